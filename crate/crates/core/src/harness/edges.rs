//! Extreme eigenvalues of Σ̂ across trials.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::samplers::SamplerModel;
use crate::spectral::eigendecompose;

/// λ_min, λ_max of A = Σ XₖXₖᵀ for m draws from stream `stream`.
pub fn gram_edges(model: &SamplerModel, m: usize, stream: u64) -> Result<(f64, f64)> {
    let gram = model.batch(m, stream)?.gram_matrix()?;
    let spectrum = eigendecompose(&gram)?;
    Ok((spectrum.lambda_min(), spectrum.lambda_max()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeTrial {
    pub trial: usize,
    /// λ_min(Σ̂).
    pub lambda_min: f64,
    /// λ_max(Σ̂).
    pub lambda_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: impl Iterator<Item = f64> + Clone) -> Self {
        let count = values.clone().count() as f64;
        let mean = values.clone().sum::<f64>() / count;
        let var = if count > 1.0 {
            values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1.0)
        } else {
            0.0
        };
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeResult {
    pub model: String,
    pub n: usize,
    pub m: usize,
    pub rho: f64,
    pub trials: Vec<EdgeTrial>,
    pub lambda_min: MeanStd,
    pub lambda_max: MeanStd,
    /// (1 − √ρ)².
    pub target_min: f64,
    /// (1 + √ρ)².
    pub target_max: f64,
    /// (mean − target)/target; NaN when the target is 0.
    pub error_min: f64,
    pub error_max: f64,
}

impl EdgeResult {
    /// Messages for trials with λ_min > λ_max or λ_min < −tol.
    pub fn invariant_failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for t in &self.trials {
            let tol = 1e-9 * t.lambda_max.abs().max(1.0);
            if t.lambda_min > t.lambda_max {
                out.push(format!("trial {}: lambda_min {} > lambda_max {}", t.trial, t.lambda_min, t.lambda_max));
            }
            if t.lambda_min < -tol {
                out.push(format!("trial {}: lambda_min {} < 0", t.trial, t.lambda_min));
            }
        }
        out
    }
}

/// `trials` independent Σ̂ edges; trial t uses stream t. Runs on the current
/// rayon pool and keeps trial order.
pub fn edge_trials(model: &SamplerModel, m: usize, trials: usize) -> Result<EdgeResult> {
    let per_trial: Vec<Result<EdgeTrial>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let (lo, hi) = gram_edges(model, m, t as u64)?;
            Ok(EdgeTrial {
                trial: t,
                lambda_min: lo / m as f64,
                lambda_max: hi / m as f64,
            })
        })
        .collect();
    let trials = per_trial.into_iter().collect::<Result<Vec<_>>>()?;
    let rho = model.dim as f64 / m as f64;
    let s = rho.sqrt();
    let (target_min, target_max) = ((1.0 - s) * (1.0 - s), (1.0 + s) * (1.0 + s));
    let lambda_min = MeanStd::of(trials.iter().map(|t| t.lambda_min));
    let lambda_max = MeanStd::of(trials.iter().map(|t| t.lambda_max));
    let rel = |mean: f64, target: f64| {
        if target == 0.0 {
            f64::NAN
        } else {
            (mean - target) / target
        }
    };
    Ok(EdgeResult {
        model: model.family.to_string(),
        n: model.dim,
        m,
        rho,
        error_min: rel(lambda_min.mean, target_min),
        error_max: rel(lambda_max.mean, target_max),
        trials,
        lambda_min,
        lambda_max,
        target_min,
        target_max,
    })
}

/// One n of a convergence table. Ratios are of A, not Σ̂.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub model: String,
    pub n: usize,
    pub m: usize,
    pub trials: usize,
    /// mean λ_min(A)/(√m − √n)²; empty when the denominator vanishes.
    pub min_ratio: Option<f64>,
    /// mean λ_max(A)/(√m + √n)².
    pub max_ratio: Option<f64>,
    pub defined: bool,
}

/// Normalized edge ratios for each n in `n_grid`, with m = round(n/ρ).
pub fn convergence_table(
    model: &SamplerModel,
    rho: f64,
    n_grid: &[usize],
    trials: usize,
) -> Result<Vec<ConvergenceRow>> {
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(crate::error::invalid("n_grid must be increasing"));
    }
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let local = model.with_dim(n)?;
        let m = crate::harness::m_from_rho(n, rho).max(1);
        let result = edge_trials(&local, m, trials)?;
        let (sm, sn) = ((m as f64).sqrt(), (n as f64).sqrt());
        let lower = (sm - sn) * (sm - sn);
        let upper = (sm + sn) * (sm + sn);
        let scale = m as f64;
        let defined = lower > 0.0;
        rows.push(ConvergenceRow {
            model: result.model,
            n,
            m,
            trials,
            min_ratio: defined.then(|| result.lambda_min.mean * scale / lower),
            max_ratio: Some(result.lambda_max.mean * scale / upper),
            defined,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::Family;

    #[test]
    fn single_sample_row_is_undefined() {
        let model = SamplerModel::new(Family::Gaussian, 1, 3).unwrap();
        let rows = convergence_table(&model, 1.0, &[1], 2).unwrap();
        assert_eq!(rows[0].m, 1);
        assert!(!rows[0].defined);
        assert_eq!(rows[0].min_ratio, None);
        // A = x², and (√1 + √1)² = 4.
        let x = model.batch(1, 0).unwrap().row(0)[0];
        let x2 = model.batch(1, 1).unwrap().row(0)[0];
        let expected = 0.5 * (x * x + x2 * x2) / 4.0;
        assert!((rows[0].max_ratio.unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn trials_are_ordered_and_reproducible() {
        let model = SamplerModel::new(Family::Rademacher, 8, 11).unwrap();
        let a = edge_trials(&model, 40, 6).unwrap();
        let b = edge_trials(&model, 40, 6).unwrap();
        assert_eq!(a, b);
        assert!(a.trials.iter().enumerate().all(|(i, t)| t.trial == i));
        assert!(a.invariant_failures().is_empty());
    }

    #[test]
    fn mean_std_matches_textbook() {
        let s = MeanStd::of([1.0, 2.0, 3.0, 4.0].into_iter());
        assert_eq!(s.mean, 2.5);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
