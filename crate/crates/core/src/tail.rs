//! Empirical tail-projection checks.
//!
//! For an orthogonal projection P of rank r the quantity of interest is
//! ‖PX‖² − r. The weak property asks that one-dimensional marginals be
//! uniformly square-integrable, the strong one bounds
//! P(‖PX‖² − r ≥ t) by g(r)·r/t². Neither can be proved by simulation; these
//! routines estimate the probabilities at desk scale and compare them against
//! configurable bound shapes. Uniformity in n cannot be tested: reports cover
//! the n grid they were given and nothing more.
//!
//! Samples are drawn in chunks and projected with one matrix product per
//! chunk, so a cell with 10⁵ trials costs a handful of gemm calls.

use std::io::Write;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::samplers::SamplerModel;

const CHUNK: usize = 1024;

/// Where a projection's range came from.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    RandomRotation { seed: u64 },
    Coordinates(Vec<usize>),
}

/// Orthogonal projection onto the span of the columns of `basis` (n × r).
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSpec {
    basis: DMatrix<f64>,
    provenance: Provenance,
}

/// Haar-random rank-r projection in ℝⁿ from the QR factor of a Gaussian frame.
pub fn random_projection(n: usize, r: usize, seed: u64) -> Result<ProjectionSpec> {
    check_rank(n, r)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let frame = DMatrix::<f64>::from_fn(n, r, |_, _| StandardNormal.sample(&mut rng));
    let qr = frame.qr();
    let mut q = qr.q();
    let diag = qr.r().diagonal();
    for (j, d) in diag.iter().enumerate() {
        if *d < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(ProjectionSpec {
        basis: q,
        provenance: Provenance::RandomRotation { seed },
    })
}

/// Projection onto the coordinates in `indices`.
pub fn coordinate_projection(n: usize, indices: &[usize]) -> Result<ProjectionSpec> {
    check_rank(n, indices.len())?;
    let mut basis = DMatrix::zeros(n, indices.len());
    for (j, &i) in indices.iter().enumerate() {
        if i >= n {
            return Err(invalid(format!("coordinate {i} out of range for n = {n}")));
        }
        if indices[..j].contains(&i) {
            return Err(invalid(format!("coordinate {i} repeated")));
        }
        basis[(i, j)] = 1.0;
    }
    Ok(ProjectionSpec {
        basis,
        provenance: Provenance::Coordinates(indices.to_vec()),
    })
}

fn check_rank(n: usize, r: usize) -> Result<()> {
    if r == 0 || r > n {
        return Err(invalid(format!("rank {r} outside [1, {n}]")));
    }
    Ok(())
}

impl ProjectionSpec {
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// The n × n matrix P = BBᵀ.
    pub fn matrix(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// Diagonal entries Pᵢᵢ = ‖row i of B‖².
    pub fn diagonal(&self) -> Vec<f64> {
        self.basis.row_iter().map(|row| row.norm_squared()).collect()
    }

    /// max |BᵀB − I|.
    pub fn orthogonality_defect(&self) -> f64 {
        let r = self.rank();
        (self.basis.tr_mul(&self.basis) - DMatrix::<f64>::identity(r, r)).amax()
    }
}

/// Bound shapes for the tail properties, as power laws in the rank.
///
/// f(r) = min(1, f_scale·r^(−f_exponent)), g(r) = g_scale·r^(−g_exponent),
/// h(M) = min(1, h_scale/M).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailFunctions {
    pub f_scale: f64,
    pub f_exponent: f64,
    pub g_scale: f64,
    pub g_exponent: f64,
    pub h_scale: f64,
}

impl Default for TailFunctions {
    fn default() -> Self {
        Self {
            f_scale: 1.0,
            f_exponent: 0.25,
            g_scale: 10.0,
            g_exponent: 0.5,
            h_scale: 10.0,
        }
    }
}

impl TailFunctions {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.f_scale, self.g_scale, self.h_scale]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
            && self.f_exponent >= 0.0
            && self.g_exponent >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(invalid("tail functions need positive scales and non-negative exponents"))
        }
    }

    pub fn f(&self, r: usize) -> f64 {
        (self.f_scale * (r as f64).powf(-self.f_exponent)).min(1.0)
    }

    pub fn g(&self, r: usize) -> f64 {
        self.g_scale * (r as f64).powf(-self.g_exponent)
    }

    pub fn h(&self, level: f64) -> f64 {
        (self.h_scale / level).min(1.0)
    }

    /// g(r)·r/t².
    pub fn stp_bound(&self, r: usize, t: f64) -> f64 {
        self.g(r) * r as f64 / (t * t)
    }

    /// Lower bound on E⟨X,y⟩²1{⟨X,y⟩² ≤ 1/ε} implied by the envelope h.
    pub fn truncated_mass_lower_bound(&self, eps: f64) -> f64 {
        1.0 - self.h(1.0 / eps)
    }
}

/// Monte Carlo frequency with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Frequency {
    pub p: f64,
    pub stderr: f64,
}

impl Frequency {
    fn from_count(hits: usize, trials: usize) -> Self {
        let p = hits as f64 / trials as f64;
        Self {
            p,
            stderr: (p * (1.0 - p) / trials as f64).sqrt(),
        }
    }
}

/// Mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    fn from_sums(sum: f64, sum_sq: f64, count: usize) -> Self {
        let c = count as f64;
        let mean = sum / c;
        let var = (sum_sq / c - mean * mean).max(0.0);
        Self {
            mean,
            stderr: (var / c).sqrt(),
        }
    }
}

/// Calls `visit` with each chunk of samples projected onto `directions`
/// (n × d): the d × chunk matrix Dᵀ[X₁ … X_c], together with the raw chunk.
fn for_each_projected_chunk(
    model: &SamplerModel,
    directions: &DMatrix<f64>,
    trials: usize,
    stream: u64,
    mut visit: impl FnMut(&DMatrix<f64>, &DMatrix<f64>),
) {
    let n = model.dim;
    let mut sampler = model.sampler(stream);
    let mut done = 0;
    while done < trials {
        let c = CHUNK.min(trials - done);
        let mut xs = DMatrix::<f64>::zeros(n, c);
        for mut column in xs.column_iter_mut() {
            sampler.fill(column.as_mut_slice());
        }
        let projected = directions.tr_mul(&xs);
        visit(&projected, &xs);
        done += c;
    }
}

fn check_projection(model: &SamplerModel, proj: &ProjectionSpec) -> Result<()> {
    if proj.dim() != model.dim {
        return Err(Error::DimensionMismatch {
            expected: model.dim,
            got: proj.dim(),
        });
    }
    Ok(())
}

/// Samples of ‖PX‖² − r.
fn projection_excess(model: &SamplerModel, proj: &ProjectionSpec, trials: usize, stream: u64) -> Vec<f64> {
    let r = proj.rank() as f64;
    let mut out = Vec::with_capacity(trials);
    for_each_projected_chunk(model, proj.basis(), trials, stream, |y, _| {
        out.extend(y.column_iter().map(|c| c.norm_squared() - r));
    });
    out
}

/// Frequency of {‖PX‖² − rank P ≥ t} over `trials` draws from stream `stream`.
pub fn estimate_projection_tail(
    model: &SamplerModel,
    proj: &ProjectionSpec,
    t: f64,
    trials: usize,
    stream: u64,
) -> Result<Frequency> {
    check_projection(model, proj)?;
    if trials < 100 {
        return Err(invalid(format!("need at least 100 trials (got {trials})")));
    }
    if !(t > 0.0) {
        return Err(invalid(format!("threshold must be positive (got {t})")));
    }
    let excess = projection_excess(model, proj, trials, stream);
    Ok(Frequency::from_count(excess.iter().filter(|&&e| e >= t).count(), trials))
}

/// Empirical mean of ‖PX‖²; equals rank P in expectation for isotropic X.
pub fn projection_norm_mean(
    model: &SamplerModel,
    proj: &ProjectionSpec,
    trials: usize,
    stream: u64,
) -> Result<Estimate> {
    check_projection(model, proj)?;
    if trials == 0 {
        return Err(Error::EmptyBatch);
    }
    let r = proj.rank() as f64;
    let values = projection_excess(model, proj, trials, stream);
    let (s, s2) = values
        .iter()
        .fold((0.0, 0.0), |(a, b), e| (a + e + r, b + (e + r) * (e + r)));
    Ok(Estimate::from_sums(s, s2, trials))
}

/// One (r, t) cell of a strong tail-projection report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailRow {
    pub model: String,
    pub n: usize,
    pub r: usize,
    pub t: f64,
    pub p_hat: f64,
    pub stderr: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub rows: Vec<TailRow>,
}

impl TailReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &TailRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    /// CSV with columns model, n, r, t, p_hat, stderr, bound, pass.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Strong tail-projection check on a rank × threshold grid.
///
/// Thresholds are given as multiples of the rank: `t = factor · r`. Each rank
/// gets its own Haar projection in dimension `model.dim` and its own sample
/// stream; the thresholds of one rank share samples, so p̂ is exactly
/// non-increasing in t. A cell passes when p̂ ≤ g(r)·r/t² + 3·stderr.
pub fn check_stp(
    model: &SamplerModel,
    ranks: &[usize],
    t_factors: &[f64],
    trials: usize,
    tails: &TailFunctions,
) -> Result<TailReport> {
    if ranks.is_empty() || t_factors.is_empty() {
        return Err(invalid("rank and threshold grids must be non-empty"));
    }
    if trials < 100 {
        return Err(invalid(format!("need at least 100 trials (got {trials})")));
    }
    tails.validate()?;
    for &r in ranks {
        check_rank(model.dim, r)?;
        for &factor in t_factors {
            let t = factor * r as f64;
            if !(t >= tails.f(r) * r as f64) {
                return Err(Error::Precondition(format!(
                    "threshold {t} below f(r)·r = {} for r = {r}",
                    tails.f(r) * r as f64
                )));
            }
        }
    }
    let name = model.family.to_string();
    let cells: Vec<Result<Vec<TailRow>>> = ranks
        .par_iter()
        .enumerate()
        .map(|(cell, &r)| {
            let proj = random_projection(model.dim, r, model.seed ^ (0x9e37_79b9 + r as u64))?;
            let excess = projection_excess(model, &proj, trials, cell as u64);
            Ok(t_factors
                .iter()
                .map(|&factor| {
                    let t = factor * r as f64;
                    let freq = Frequency::from_count(excess.iter().filter(|&&e| e >= t).count(), trials);
                    let bound = tails.stp_bound(r, t);
                    TailRow {
                        model: name.clone(),
                        n: model.dim,
                        r,
                        t,
                        p_hat: freq.p,
                        stderr: freq.stderr,
                        bound,
                        pass: freq.p <= bound + 3.0 * freq.stderr,
                    }
                })
                .collect())
        })
        .collect();
    let mut rows = Vec::new();
    for cell in cells {
        rows.extend(cell?);
    }
    Ok(TailReport { rows })
}

/// Kind of direction achieving a truncated-moment estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionKind {
    Coordinate,
    Diagonal,
    Random,
}

/// sup over sampled unit y of E(⟨X,y⟩²·1{⟨X,y⟩² ≥ M}) for one (n, M).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WtpRow {
    pub model: String,
    pub n: usize,
    pub level: f64,
    pub sup_estimate: f64,
    pub stderr: f64,
    pub direction: DirectionKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WtpReport {
    pub rows: Vec<WtpRow>,
}

impl WtpReport {
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Uniform-integrability check of one-dimensional marginals.
///
/// Directions are e₁, the diagonal (1,…,1)/√n and `random_directions` Haar
/// unit vectors. All directions and levels share one sample stream per n, so
/// the estimate is non-increasing in M.
pub fn check_wtp_a(
    model: &SamplerModel,
    n_grid: &[usize],
    levels: &[f64],
    random_directions: usize,
    trials: usize,
) -> Result<WtpReport> {
    if levels.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("truncation levels must be increasing"));
    }
    if n_grid.is_empty() || levels.is_empty() || trials == 0 {
        return Err(invalid("grids and trial count must be non-empty"));
    }
    let mut rows = Vec::new();
    for (cell, &n) in n_grid.iter().enumerate() {
        let local = model.with_dim(n)?;
        let mut kinds = vec![DirectionKind::Coordinate, DirectionKind::Diagonal];
        let mut dirs = vec![0.0; n];
        dirs[0] = 1.0;
        dirs.extend(std::iter::repeat(1.0 / (n as f64).sqrt()).take(n));
        let mut rng = ChaCha12Rng::seed_from_u64(model.seed ^ 0x51f1_5eed ^ n as u64);
        for _ in 0..random_directions {
            let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            dirs.extend(g.iter().map(|v| v / norm));
            kinds.push(DirectionKind::Random);
        }
        let d = kinds.len();
        let directions = DMatrix::from_column_slice(n, d, &dirs);
        let mut sums = vec![(0.0, 0.0); d * levels.len()];
        for_each_projected_chunk(&local, &directions, trials, cell as u64, |y, _| {
            for col in y.column_iter() {
                for (k, v) in col.iter().enumerate() {
                    let sq = v * v;
                    for (l, &level) in levels.iter().enumerate() {
                        if sq >= level {
                            let s = &mut sums[l * d + k];
                            s.0 += sq;
                            s.1 += sq * sq;
                        }
                    }
                }
            }
        });
        for (l, &level) in levels.iter().enumerate() {
            let (best, estimate) = (0..d)
                .map(|k| {
                    let (s, s2) = sums[l * d + k];
                    (k, Estimate::from_sums(s, s2, trials))
                })
                .fold(None::<(usize, Estimate)>, |acc, cur| match acc {
                    Some(a) if a.1.mean >= cur.1.mean => Some(a),
                    _ => Some(cur),
                })
                .expect("at least two directions");
            rows.push(WtpRow {
                model: model.family.to_string(),
                n,
                level,
                sup_estimate: estimate.mean,
                stderr: estimate.stderr,
                direction: kinds[best],
            });
        }
    }
    Ok(WtpReport { rows })
}

/// Moments of the off-diagonal quadratic form ⟨X, P₀X⟩, where P₀ is P with
/// its diagonal set to zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecouplingReport {
    pub rank: usize,
    pub second_moment: Estimate,
    /// 2·Σ_{i≠j} Pᵢⱼ², the exact second moment for i.i.d. unit-variance coordinates.
    pub second_moment_exact: f64,
    pub moment_bound: f64,
    pub moment_pass: bool,
    pub tail: Frequency,
    pub tail_level: f64,
    pub tail_bound: f64,
    pub tail_pass: bool,
}

pub fn decoupled_moment_check(
    model: &SamplerModel,
    proj: &ProjectionSpec,
    trials: usize,
    stream: u64,
) -> Result<DecouplingReport> {
    check_projection(model, proj)?;
    if !model.family.has_iid_coordinates() {
        return Err(Error::Precondition(format!(
            "{} does not have i.i.d. coordinates",
            model.family
        )));
    }
    if trials == 0 {
        return Err(Error::EmptyBatch);
    }
    let r = proj.rank();
    let diag = proj.diagonal();
    let level = (r as f64).powf(0.75);
    let (mut s, mut s2, mut hits) = (0.0, 0.0, 0usize);
    for_each_projected_chunk(model, proj.basis(), trials, stream, |y, xs| {
        for (col, x) in y.column_iter().zip(xs.column_iter()) {
            let diagonal_part: f64 = diag.iter().zip(x.iter()).map(|(p, v)| p * v * v).sum();
            let q = col.norm_squared() - diagonal_part;
            s += q * q;
            s2 += q.powi(4);
            if q.abs() > level {
                hits += 1;
            }
        }
    });
    let p = proj.matrix();
    let mut exact = 0.0;
    for j in 0..p.ncols() {
        for i in 0..p.nrows() {
            if i != j {
                exact += p[(i, j)] * p[(i, j)];
            }
        }
    }
    let second_moment = Estimate::from_sums(s, s2, trials);
    let tail = Frequency::from_count(hits, trials);
    let moment_bound = 64.0 * r as f64;
    let tail_bound = 64.0 / (r as f64).sqrt();
    Ok(DecouplingReport {
        rank: r,
        second_moment,
        second_moment_exact: 2.0 * exact,
        moment_bound,
        moment_pass: second_moment.mean <= moment_bound + 3.0 * second_moment.stderr,
        tail,
        tail_level: level,
        tail_bound,
        tail_pass: tail.p <= tail_bound + 3.0 * tail.stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::Family;
    use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

    fn gaussian(n: usize) -> SamplerModel {
        SamplerModel::new(Family::Gaussian, n, 2024).unwrap()
    }

    #[test]
    fn full_rank_projection_is_identity() {
        let p = random_projection(5, 5, 1).unwrap();
        assert!((p.matrix() - DMatrix::<f64>::identity(5, 5)).amax() < 1e-12);
        let p = random_projection(6, 1, 1).unwrap();
        assert!((p.basis().column(0).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projection_is_idempotent() {
        let p = random_projection(8, 3, 42).unwrap();
        let m = p.matrix();
        assert!((&m * &m - &m).amax() <= 1e-10);
        assert!(p.orthogonality_defect() <= 1e-10);
        assert!(random_projection(8, 9, 0).is_err());
        assert!(random_projection(8, 0, 0).is_err());
    }

    #[test]
    fn gaussian_tail_matches_chi_square() {
        let model = gaussian(128);
        let proj = random_projection(128, 100, 7).unwrap();
        let est = estimate_projection_tail(&model, &proj, 100.0, 100_000, 0).unwrap();
        let exact = 1.0 - ChiSquared::new(100.0).unwrap().cdf(200.0);
        assert!((est.p - exact).abs() <= 3.0 * est.stderr.max(1e-6), "{est:?} vs {exact}");
    }

    #[test]
    fn huge_threshold_is_never_reached() {
        let proj = random_projection(16, 10, 3).unwrap();
        let est = estimate_projection_tail(&gaussian(16), &proj, 1e6, 1000, 0).unwrap();
        assert_eq!(est.p, 0.0);
    }

    #[test]
    fn rademacher_norm_is_exactly_n() {
        let model = SamplerModel::new(Family::Rademacher, 20, 1).unwrap();
        let proj = coordinate_projection(20, &(0..20).collect::<Vec<_>>()).unwrap();
        let est = estimate_projection_tail(&model, &proj, 0.5, 1000, 0).unwrap();
        assert_eq!(est.p, 0.0);
    }

    #[test]
    fn estimate_rejects_bad_inputs() {
        let proj = random_projection(4, 2, 0).unwrap();
        assert!(estimate_projection_tail(&gaussian(4), &proj, 1.0, 99, 0).is_err());
        assert!(estimate_projection_tail(&gaussian(4), &proj, 0.0, 100, 0).is_err());
        assert!(estimate_projection_tail(&gaussian(5), &proj, 1.0, 100, 0).is_err());
    }

    #[test]
    fn stp_rejects_thresholds_below_f() {
        let tails = TailFunctions::default();
        let err = check_stp(&gaussian(64), &[16], &[0.1], 1000, &tails).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn stp_probabilities_decrease_in_t() {
        let report = check_stp(&gaussian(64), &[16, 32], &[0.5, 1.0, 1.5, 2.0], 5000, &TailFunctions::default()).unwrap();
        for pair in report.rows.windows(2) {
            if pair[0].r == pair[1].r {
                assert!(pair[1].p_hat <= pair[0].p_hat);
            }
        }
        assert!(report.all_pass());
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("model,n,r,t,p_hat,stderr,bound,pass"));
    }

    #[test]
    fn projection_norm_mean_is_rank() {
        for family in [Family::Gaussian, Family::Rademacher, Family::ExponentialProduct, Family::UniformBall] {
            let model = SamplerModel::new(family, 32, 5).unwrap();
            let proj = random_projection(32, 8, 11).unwrap();
            let est = projection_norm_mean(&model, &proj, 20_000, 1).unwrap();
            assert!((est.mean - 8.0).abs() <= 4.0 * est.stderr, "{family}: {est:?}");
        }
    }

    fn gaussian_truncated_second_moment(level: f64) -> f64 {
        let s = level.sqrt();
        let normal = Normal::standard();
        let phi = (-0.5 * s * s).exp() / (2.0 * std::f64::consts::PI).sqrt();
        2.0 * (s * phi + (1.0 - normal.cdf(s)))
    }

    #[test]
    fn truncated_moment_formula_matches_quadrature() {
        // Composite Simpson rule on 2∫_s^∞ z²φ(z) dz.
        for level in [4.0, 25.0] {
            let s: f64 = f64::sqrt(level);
            let steps = 200_000;
            let h = (s + 20.0 - s) / steps as f64;
            let f = |z: f64| z * z * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let mut acc = f(s) + f(s + 20.0);
            for i in 1..steps {
                acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(s + i as f64 * h);
            }
            let quad = 2.0 * acc * h / 3.0;
            let formula = gaussian_truncated_second_moment(level);
            assert!((quad - formula).abs() <= 1e-8 * formula.max(1e-6), "{quad} {formula}");
        }
        assert!((gaussian_truncated_second_moment(25.0) - 1.5439e-5).abs() < 1e-8);
    }

    #[test]
    fn wtp_gaussian_levels() {
        let report = check_wtp_a(&gaussian(16), &[16], &[0.0, 2.0, 4.0], 3, 200_000).unwrap();
        let at0 = &report.rows[0];
        assert!((at0.sup_estimate - 1.0).abs() <= 5.0 * at0.stderr + 0.01);
        let at4 = &report.rows[2];
        let exact = gaussian_truncated_second_moment(4.0);
        // Max over six directions biases upward by a few standard errors at most.
        assert!(at4.sup_estimate >= exact - 3.0 * at4.stderr);
        assert!(at4.sup_estimate <= exact + 6.0 * at4.stderr, "{at4:?} vs {exact}");
        assert!(report.rows.windows(2).all(|w| w[1].sup_estimate <= w[0].sup_estimate));
        assert!(check_wtp_a(&gaussian(4), &[4], &[2.0, 1.0], 1, 10).is_err());
    }

    #[test]
    fn wtp_rademacher_coordinate_is_bounded() {
        let model = SamplerModel::new(Family::Rademacher, 8, 3).unwrap();
        let report = check_wtp_a(&model, &[1], &[0.0, 2.0], 0, 1000).unwrap();
        assert_eq!(report.rows[0].sup_estimate, 1.0);
        assert_eq!(report.rows[1].sup_estimate, 0.0);
    }

    #[test]
    fn decoupled_form_vanishes_for_single_coordinate() {
        let model = SamplerModel::new(Family::StudentT { nu: 3.0 }, 10, 3).unwrap();
        let proj = coordinate_projection(10, &[4]).unwrap();
        let report = decoupled_moment_check(&model, &proj, 500, 0).unwrap();
        assert_eq!(report.second_moment.mean, 0.0);
        assert_eq!(report.tail.p, 0.0);
        assert_eq!(report.second_moment_exact, 0.0);
    }

    #[test]
    fn decoupled_second_moment_matches_exact_value() {
        let model = SamplerModel::new(Family::Rademacher, 32, 8).unwrap();
        let proj = random_projection(32, 8, 1).unwrap();
        let report = decoupled_moment_check(&model, &proj, 40_000, 0).unwrap();
        let diff = (report.second_moment.mean - report.second_moment_exact).abs();
        assert!(diff <= 4.0 * report.second_moment.stderr, "{report:?}");
        assert!(report.second_moment_exact <= 2.0 * 8.0);
        assert!(report.moment_pass && report.tail_pass);
    }

    #[test]
    fn decoupled_gaussian_tail_bound_is_vacuous() {
        let proj = random_projection(64, 16, 2).unwrap();
        let report = decoupled_moment_check(&gaussian(64), &proj, 2000, 0).unwrap();
        assert_eq!(report.tail_bound, 16.0);
        assert!(report.tail_pass);
    }

    #[test]
    fn decoupling_requires_iid_coordinates() {
        let model = SamplerModel::new(Family::UniformBall, 8, 1).unwrap();
        let proj = random_projection(8, 2, 1).unwrap();
        assert!(matches!(
            decoupled_moment_check(&model, &proj, 100, 0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn tail_function_defaults() {
        let t = TailFunctions::default();
        assert_eq!(t.f(16), 0.5);
        assert_eq!(t.g(100), 1.0);
        assert!((t.stp_bound(64, 64.0) - 10.0 / 8.0 / 64.0).abs() < 1e-15);
        assert_eq!(t.truncated_mass_lower_bound(0.2), 0.0);
        assert_eq!(t.truncated_mass_lower_bound(0.05), 0.5);
    }
}
