//! Lower barrier walk for λ_min.
//!
//! Starting from A⁽⁰⁾ = 0 and u₀ = n − √(mn), each step adds one sample
//! XXᵀ, moves the barrier up by a feasible shift δ computed from the old
//! spectrum, then pulls it back down by an integer regularity shift δ_R until
//! consecutive unit steps of the potential differ by at most 1/(εn). The
//! lower potential m̲(u) = tr((A − u)⁻¹) never increases, so the barrier stays
//! below the spectrum and u_m is a certified lower bound on λ_min(A).

use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::samplers::{SampleBatch, SamplerModel};
use crate::spectral::{check_below, lower_potential, RankOneVector, SymmetricSpectrum};
use crate::walk::{check_eps, step_tags, write_rows, TrackedGram, Violation, ViolationKind, WalkOptions};

const MAX_REGULARITY_STEPS: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerShiftParams {
    eps: f64,
}

impl LowerShiftParams {
    pub fn new(eps: f64) -> Result<Self> {
        check_eps(eps, 1.0, false)?;
        Ok(Self { eps })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Components with ⟨x, xᵢ⟩² above this level are dropped from δ.
    pub fn truncation_level(&self) -> f64 {
        1.0 / self.eps
    }

    /// Minimal λ_min − u for the shift formula to apply.
    pub fn gap_requirement(&self) -> f64 {
        2.0 / (self.eps * self.eps)
    }

    /// Whether ε < 12⁻³, where the concentration estimate is stated.
    pub fn asymptotic_regime(&self) -> bool {
        self.eps < 12f64.powi(-3)
    }
}

fn check_shifted(spectrum: &SymmetricSpectrum, x: &RankOneVector, point: f64) -> Result<()> {
    if x.dim() != spectrum.dim() {
        return Err(Error::DimensionMismatch {
            expected: spectrum.dim(),
            got: x.dim(),
        });
    }
    check_below(spectrum, point)
}

/// q₁(δ) = xᵀ(A − u − δ)⁻¹x.
pub fn q1(spectrum: &SymmetricSpectrum, x: &RankOneVector, u: f64, delta: f64) -> Result<f64> {
    check_shifted(spectrum, x, u + delta)?;
    Ok(q1_unchecked(spectrum, x, u + delta))
}

/// q₂(δ) = [Σ(λᵢ − u − δ)⁻²]⁻¹ Σ⟨x, xᵢ⟩²/(λᵢ − u − δ)².
pub fn q2(spectrum: &SymmetricSpectrum, x: &RankOneVector, u: f64, delta: f64) -> Result<f64> {
    check_shifted(spectrum, x, u + delta)?;
    Ok(q2_unchecked(spectrum, x, u + delta))
}

fn q1_unchecked(spectrum: &SymmetricSpectrum, x: &RankOneVector, point: f64) -> f64 {
    spectrum
        .eigenvalues()
        .iter()
        .zip(x.weights())
        .map(|(&l, w)| w / (l - point))
        .sum()
}

fn q2_unchecked(spectrum: &SymmetricSpectrum, x: &RankOneVector, point: f64) -> f64 {
    let (mut weighted, mut plain) = (0.0, 0.0);
    for (&l, w) in spectrum.eigenvalues().iter().zip(x.weights()) {
        let s = 1.0 / ((l - point) * (l - point));
        weighted += w * s;
        plain += s;
    }
    weighted / plain
}

/// A lower shift and the facts used to certify it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerShift {
    pub delta: f64,
    /// λ_min − u ≥ 2/ε²; otherwise δ = 0 by fiat.
    pub gap_held: bool,
    /// q₁(1/ε) ≤ (1 + ε)m̲(u) + ε.
    pub indicator: bool,
    /// q₂(δ) − δ(1 + q₁(δ)); non-negative for a feasible shift.
    pub certificate: f64,
}

fn compute_lower_shift(spectrum: &SymmetricSpectrum, x: &RankOneVector, u: f64, params: &LowerShiftParams) -> LowerShift {
    let eps = params.eps;
    let gap = spectrum.lambda_min() - u;
    if gap < params.gap_requirement() || x.is_zero() {
        return LowerShift {
            delta: 0.0,
            gap_held: gap >= params.gap_requirement(),
            indicator: false,
            certificate: q2_unchecked(spectrum, x, u),
        };
    }
    let potential = lower_potential(spectrum.eigenvalues(), u);
    let indicator = q1_unchecked(spectrum, x, u + 1.0 / eps) <= (1.0 + eps) * potential + eps;
    let delta = if indicator {
        let cutoff = params.truncation_level();
        let (mut weighted, mut plain) = (0.0, 0.0);
        for (&l, w) in spectrum.eigenvalues().iter().zip(x.weights()) {
            let s = 1.0 / ((l - u) * (l - u));
            plain += s;
            if w <= cutoff {
                weighted += w * s;
            }
        }
        (1.0 - eps) / ((1.0 + eps) * (1.0 + potential)) * weighted / plain
    } else {
        0.0
    };
    let certificate = q2_unchecked(spectrum, x, u + delta) - delta * (1.0 + q1_unchecked(spectrum, x, u + delta));
    LowerShift {
        delta,
        gap_held: true,
        indicator,
        certificate,
    }
}

fn certificate_ok(shift: &LowerShift) -> bool {
    shift.certificate >= -1e-9
}

/// The feasible lower shift δ for A, x and u.
///
/// When λ_min − u ≥ 2/ε² the returned δ is checked to satisfy δ ≤ 1/ε,
/// u + δ < λ_min and q₂(δ) ≥ δ(1 + q₁(δ)); a failed check is an
/// [`Error::Invariant`]. Below that gap δ = 0 and `gap_held` is false.
pub fn feasible_lower_shift(
    spectrum: &SymmetricSpectrum,
    x: &RankOneVector,
    u: f64,
    params: &LowerShiftParams,
) -> Result<LowerShift> {
    check_shifted(spectrum, x, u)?;
    let shift = compute_lower_shift(spectrum, x, u, params);
    if shift.gap_held {
        if shift.delta > 1.0 / params.eps {
            return Err(Error::Invariant(format!("delta {} exceeds 1/eps", shift.delta)));
        }
        if u + shift.delta >= spectrum.lambda_min() {
            return Err(Error::Invariant("u + delta reached lambda_min".into()));
        }
        if !certificate_ok(&shift) {
            return Err(Error::Invariant(format!(
                "q2(delta) - delta(1 + q1(delta)) = {}",
                shift.certificate
            )));
        }
    }
    Ok(shift)
}

/// m̲(v) − m̲(v − 1) = Σ 1/((λᵢ − v)(λᵢ − v + 1)).
pub(crate) fn unit_step_difference(eigenvalues: &[f64], v: f64) -> f64 {
    eigenvalues.iter().map(|&l| 1.0 / ((l - v) * (l - v + 1.0))).sum()
}

/// δ_R = min{ℓ ≥ 0 : m̲(v − ℓ) − m̲(v − ℓ − 1) ≤ 1/(εn)}.
pub fn regularity_shift_lower(spectrum: &SymmetricSpectrum, v: f64, eps: f64, n: usize) -> Result<u64> {
    check_below(spectrum, v)?;
    if !(eps > 0.0) || n == 0 {
        return Err(invalid("regularity shift needs eps > 0 and n > 0"));
    }
    let threshold = 1.0 / (eps * n as f64);
    let eigenvalues = spectrum.eigenvalues();
    for ell in 0..MAX_REGULARITY_STEPS {
        if unit_step_difference(eigenvalues, v - ell as f64) <= threshold {
            return Ok(ell);
        }
    }
    Err(Error::NonTermination(MAX_REGULARITY_STEPS))
}

/// One step of a lower walk.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerStep {
    pub k: usize,
    pub u_k: f64,
    pub lambda_min: f64,
    pub potential: f64,
    pub delta: f64,
    #[serde(rename = "delta_R")]
    pub delta_r: u64,
    pub violation: String,
}

/// Frequency of {q₁(1/ε) + 1 ≥ (1 + ε)(1 + m̲(u))} over eligible steps, i.e.
/// steps with λ_min − u ≥ 6/ε² + 1/ε and m̲(u) − m̲(u − 1) ≤ 1/(εn).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ConcentrationStats {
    pub eligible: usize,
    pub hits: usize,
}

impl ConcentrationStats {
    pub fn frequency(&self) -> f64 {
        if self.eligible == 0 {
            0.0
        } else {
            self.hits as f64 / self.eligible as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.eligible == 0 {
            return 0.0;
        }
        let p = self.frequency();
        (p * (1.0 - p) / self.eligible as f64).sqrt()
    }
}

/// Live state A⁽ᵏ⁾, u_k of a lower walk.
pub struct LowerWalk {
    n: usize,
    m: usize,
    params: LowerShiftParams,
    gram: TrackedGram,
    k: usize,
    u: f64,
    u0: f64,
    potential: f64,
    potential_bound: f64,
    budget: f64,
    cumulative_regularity: f64,
    violations: Vec<Violation>,
    trajectory: Vec<LowerStep>,
    concentration: ConcentrationStats,
}

impl LowerWalk {
    pub fn new(n: usize, m: usize, params: LowerShiftParams, options: WalkOptions) -> Result<Self> {
        if n == 0 || m <= n {
            return Err(invalid(format!("lower walk needs m > n >= 1 (got n = {n}, m = {m})")));
        }
        let root = (m as f64 * n as f64).sqrt();
        let u0 = n as f64 - root;
        let potential = n as f64 / (root - n as f64);
        Ok(Self {
            n,
            m,
            params,
            gram: TrackedGram::zeros(n, options),
            k: 0,
            u: u0,
            u0,
            potential,
            potential_bound: potential,
            budget: params.eps * (n * n) as f64 / (root - n as f64),
            cumulative_regularity: 0.0,
            violations: Vec::new(),
            trajectory: Vec::new(),
            concentration: ConcentrationStats::default(),
        })
    }

    pub fn step_index(&self) -> usize {
        self.k
    }

    pub fn barrier(&self) -> f64 {
        self.u
    }

    pub fn potential(&self) -> f64 {
        self.potential
    }

    pub fn cumulative_regularity(&self) -> f64 {
        self.cumulative_regularity
    }

    pub fn spectrum(&self) -> &SymmetricSpectrum {
        self.gram.spectrum()
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    fn log(&mut self, kind: ViolationKind, detail: String) {
        self.violations.push(Violation {
            step: self.k,
            kind,
            detail,
        });
    }

    /// Adds XXᵀ and moves the barrier. A barrier crossing aborts the walk.
    pub fn step(&mut self, x: &[f64]) -> Result<&LowerStep> {
        if self.k >= self.m {
            return Err(invalid("walk already consumed m samples"));
        }
        let eps = self.params.eps;
        let n = self.n as f64;
        let spectrum = self.gram.spectrum();
        let proj = spectrum.project(x)?;
        let u = self.u;
        let gap = spectrum.lambda_min() - u;

        let eligible = gap >= 6.0 / (eps * eps) + 1.0 / eps
            && unit_step_difference(spectrum.eigenvalues(), u) <= 1.0 / (eps * n);
        if eligible {
            self.concentration.eligible += 1;
            let lhs = q1_unchecked(spectrum, &proj, u + 1.0 / eps) + 1.0;
            if lhs >= (1.0 + eps) * (1.0 + self.potential) {
                self.concentration.hits += 1;
            }
        }

        let shift = compute_lower_shift(spectrum, &proj, u, &self.params);
        self.k += 1;
        if !shift.gap_held {
            self.log(
                ViolationKind::GapCondition,
                format!("lambda_min - u = {gap} < 2/eps^2"),
            );
        } else if !certificate_ok(&shift) {
            self.log(
                ViolationKind::Certificate,
                format!("q2 - delta(1 + q1) = {}", shift.certificate),
            );
        }

        self.gram.add(&proj)?;
        let v = u + shift.delta;
        let updated = self.gram.spectrum();
        if let Err(e) = check_below(updated, v) {
            self.log(ViolationKind::Barrier, e.to_string());
            return Err(e);
        }
        let delta_r = regularity_shift_lower(updated, v, eps, self.n)?;
        let u_next = v - delta_r as f64;
        let potential = lower_potential(updated.eigenvalues(), u_next);
        let lambda_min = updated.lambda_min();

        let tol = 1e-9 * self.potential.abs().max(1.0);
        if potential > self.potential + tol {
            let detail = format!("potential rose from {} to {potential}", self.potential);
            self.log(ViolationKind::Monotonicity, detail);
        }
        if potential > self.potential_bound * (1.0 + 1e-9) {
            let detail = format!("potential {potential} above start value {}", self.potential_bound);
            self.log(ViolationKind::PotentialBound, detail);
        }
        self.cumulative_regularity += delta_r as f64;
        if self.cumulative_regularity > self.budget {
            let detail = format!("sum delta_R = {} > {}", self.cumulative_regularity, self.budget);
            self.log(ViolationKind::Budget, detail);
        }
        self.u = u_next;
        self.potential = potential;
        let tags = step_tags(&self.violations, self.k);
        self.trajectory.push(LowerStep {
            k: self.k,
            u_k: u_next,
            lambda_min,
            potential,
            delta: shift.delta,
            delta_r,
            violation: tags,
        });
        Ok(self.trajectory.last().expect("just pushed"))
    }

    /// Closes the walk, checking the final barrier against a fresh
    /// decomposition of A.
    pub fn finish(mut self) -> Result<LowerWalkReport> {
        self.gram.refresh()?;
        let lambda_min = self.gram.spectrum().lambda_min();
        if self.u > lambda_min {
            let e = Error::BarrierViolation {
                barrier: self.u,
                edge: lambda_min,
                side: crate::error::BarrierSide::Below,
            };
            self.log(ViolationKind::Barrier, e.to_string());
            return Err(e);
        }
        let scale = ((self.m as f64).sqrt() - (self.n as f64).sqrt()).powi(2);
        Ok(LowerWalkReport {
            n: self.n,
            m: self.k,
            eps: self.params.eps,
            u0: self.u0,
            u_final: self.u,
            lambda_min,
            ratio: self.u / scale,
            lambda_ratio: lambda_min / scale,
            potential_bound: self.potential_bound,
            final_potential: self.potential,
            regularity_budget: self.budget,
            total_regularity: self.cumulative_regularity,
            concentration: self.concentration,
            violations: self.violations,
            trajectory: self.trajectory,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerWalkReport {
    pub n: usize,
    pub m: usize,
    pub eps: f64,
    pub u0: f64,
    pub u_final: f64,
    /// λ_min(A) from a fresh decomposition.
    pub lambda_min: f64,
    /// u_m / (√m − √n)².
    pub ratio: f64,
    /// λ_min(A) / (√m − √n)².
    pub lambda_ratio: f64,
    /// n / (√(mn) − n).
    pub potential_bound: f64,
    pub final_potential: f64,
    /// εn² / (√(mn) − n).
    pub regularity_budget: f64,
    pub total_regularity: f64,
    pub concentration: ConcentrationStats,
    pub violations: Vec<Violation>,
    #[serde(skip)]
    pub trajectory: Vec<LowerStep>,
}

impl LowerWalkReport {
    pub fn hard_violations(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.kind.is_hard())
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    /// CSV with columns k, u_k, lambda_min, potential, delta, delta_R, violation.
    pub fn write_trajectory_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        write_rows(out, &self.trajectory)
    }
}

/// Runs the walk on m fresh draws from stream `stream` of `model`.
pub fn run_lower_walk(
    model: &SamplerModel,
    m: usize,
    stream: u64,
    params: LowerShiftParams,
    options: WalkOptions,
) -> Result<LowerWalkReport> {
    let mut walk = LowerWalk::new(model.dim, m, params, options)?;
    let mut sampler = model.sampler(stream);
    let mut x = vec![0.0; model.dim];
    for _ in 0..m {
        sampler.fill(&mut x);
        walk.step(&x)?;
    }
    walk.finish()
}

/// Runs the walk on the rows of `batch`.
pub fn run_lower_walk_on_batch(
    batch: &SampleBatch,
    params: LowerShiftParams,
    options: WalkOptions,
) -> Result<LowerWalkReport> {
    let mut walk = LowerWalk::new(batch.dim(), batch.len(), params, options)?;
    for k in 0..batch.len() {
        walk.step(&batch.row(k))?;
    }
    walk.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::Family;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn diag(values: &[f64]) -> SymmetricSpectrum {
        SymmetricSpectrum::from_diagonal(values).unwrap()
    }

    #[test]
    fn q_examples() {
        let a = diag(&[2.0, 3.0]);
        let x = a.project(&[1.0, 1.0]).unwrap();
        assert!((q1(&a, &x, 0.0, 0.0).unwrap() - 5.0 / 6.0).abs() < 1e-15);
        assert!((q2(&a, &x, 0.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        let zero = a.project(&[0.0, 0.0]).unwrap();
        assert_eq!(q1(&a, &zero, 0.0, 0.0).unwrap(), 0.0);
        assert_eq!(q2(&a, &zero, 0.0, 0.0).unwrap(), 0.0);

        let a = SymmetricSpectrum::zeros(4);
        let e1 = a.project(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((q1(&a, &e1, -4.0, 0.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((q2(&a, &e1, -4.0, 0.0).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(q1(&a, &e1, -1.0, 1.0), Err(Error::BarrierViolation { .. })));
    }

    #[test]
    fn shift_examples() {
        let a = SymmetricSpectrum::zeros(4);
        let zero = a.project(&[0.0; 4]).unwrap();
        let p = LowerShiftParams::new(0.5).unwrap();
        assert_eq!(feasible_lower_shift(&a, &zero, -10.0, &p).unwrap().delta, 0.0);

        let e1 = a.project(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        let p = LowerShiftParams::new(0.01).unwrap();
        let s = feasible_lower_shift(&a, &e1, -4.0, &p).unwrap();
        assert_eq!(s.delta, 0.0);
        assert!(!s.gap_held);

        let eps = std::f64::consts::FRAC_1_SQRT_2;
        let p = LowerShiftParams::new(eps).unwrap();
        let s = feasible_lower_shift(&a, &e1, -4.0, &p).unwrap();
        assert!(s.gap_held && s.indicator);
        // m̲(−4) = 1; Σ(λ−u)⁻² = 4/16; weighted sum = 1/16.
        let expected = (1.0 - eps) / ((1.0 + eps) * 2.0) * 0.25;
        assert!((s.delta - expected).abs() < 1e-15);
        assert!((s.delta - 0.02145).abs() < 1e-5);
    }

    #[test]
    fn regularity_examples() {
        let a = SymmetricSpectrum::zeros(4);
        assert_eq!(regularity_shift_lower(&a, -2.0, 0.25, 4).unwrap(), 0);
        assert_eq!(regularity_shift_lower(&a, -2.0, 0.05, 4).unwrap(), 0);
        let a = diag(&[10.0]);
        assert_eq!(regularity_shift_lower(&a, 9.5, 1.0, 1).unwrap(), 1);
        assert!(regularity_shift_lower(&a, 10.0, 1.0, 1).is_err());
    }

    #[test]
    fn zero_samples_leave_barrier_in_place() {
        let model = SamplerModel::new(Family::Zero, 4, 0).unwrap();
        let r = run_lower_walk(&model, 16, 0, LowerShiftParams::new(0.2).unwrap(), WalkOptions::default()).unwrap();
        assert_eq!(r.u_final, r.u0);
        assert_eq!(r.u0, -4.0);
        assert!(r.trajectory.iter().all(|s| s.delta == 0.0 && s.delta_r == 0));
    }

    #[test]
    fn walk_requires_more_samples_than_dimension() {
        let p = LowerShiftParams::new(0.2).unwrap();
        assert!(LowerWalk::new(4, 4, p, WalkOptions::default()).is_err());
        assert!(LowerShiftParams::new(1.0).is_err());
    }

    #[test]
    fn gaussian_walk_certifies_lambda_min() {
        let model = SamplerModel::new(Family::Gaussian, 32, 11).unwrap();
        let r = run_lower_walk(&model, 512, 0, LowerShiftParams::new(0.25).unwrap(), WalkOptions::default()).unwrap();
        assert!(r.u_final <= r.lambda_min);
        assert!(r.ratio > 0.0 && r.ratio <= 1.05, "{}", r.ratio);
        assert_eq!(r.hard_violations().count(), 0);
        assert!(r.total_regularity <= r.regularity_budget);
        let a = model.batch(512, 0).unwrap().gram_matrix().unwrap();
        let exact = crate::spectral::eigendecompose(&a).unwrap().lambda_min();
        assert!((exact - r.lambda_min).abs() <= 1e-8 * exact);
    }

    #[test]
    fn trajectory_csv_header() {
        let model = SamplerModel::new(Family::Rademacher, 4, 1).unwrap();
        let r = run_lower_walk(&model, 20, 0, LowerShiftParams::new(0.5).unwrap(), WalkOptions::default()).unwrap();
        let mut buf = Vec::new();
        r.write_trajectory_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,u_k,lambda_min,potential,delta,delta_R,violation\n"));
        assert_eq!(text.lines().count(), 21);
    }

    fn random_psd(n: usize, seed: u64) -> DMatrix<f64> {
        let model = SamplerModel::new(Family::Gaussian, n, seed).unwrap();
        model.batch(3 * n, 0).unwrap().gram_matrix().unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn shift_is_feasible_under_gap(seed in any::<u64>(), n in 2usize..10, eps in 0.05f64..0.9, extra in 0.0f64..50.0, scale in 0.1f64..5.0) {
            let a = crate::spectral::eigendecompose(&random_psd(n, seed)).unwrap();
            let p = LowerShiftParams::new(eps).unwrap();
            let u = a.lambda_min() - p.gap_requirement() - extra;
            let model = SamplerModel::new(Family::Gaussian, n, seed ^ 1).unwrap();
            let x: Vec<f64> = model.sampler(0).sample_vector().iter().map(|v| v * scale).collect();
            let x = a.project(&x).unwrap();
            let s = feasible_lower_shift(&a, &x, u, &p).unwrap();
            prop_assert!(s.delta >= 0.0 && s.delta <= 1.0 / eps);
            // The Sherman–Morrison potential after the shift does not exceed the old one.
            let before = lower_potential(a.eigenvalues(), u);
            let after = crate::spectral::sherman_morrison_trace(&a, &x, u + s.delta).unwrap();
            prop_assert!(after <= before * (1.0 + 1e-12));
        }

        #[test]
        fn regularity_shift_is_minimal(values in proptest::collection::vec(0.0f64..50.0, 1..8), offset in 0.01f64..20.0, eps in 0.05f64..1.0) {
            let a = diag(&values);
            let n = values.len();
            let v = a.lambda_min() - offset;
            let ell = regularity_shift_lower(&a, v, eps, n).unwrap();
            let threshold = 1.0 / (eps * n as f64);
            prop_assert!(unit_step_difference(a.eigenvalues(), v - ell as f64) <= threshold);
            for smaller in 0..ell {
                prop_assert!(unit_step_difference(a.eigenvalues(), v - smaller as f64) > threshold);
            }
        }
    }
}
