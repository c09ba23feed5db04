//! Upper barrier walk for λ_max.
//!
//! The barrier starts at u₀ = n + √(mn) above A⁽⁰⁾ = 0. At every step the
//! shift is Δ₁ + Δ₂ + Δ_R: Δ₁ absorbs the excess of ⟨X, xᵢ⟩² over its mean on
//! base-4 level sets of the gaps u − λᵢ, Δ₂ controls the second-order
//! Sherman–Morrison term, and the integer Δ_R keeps the potential
//! m̄(u) = tr((u − A)⁻¹) from varying too fast near the barrier.
//!
//! Δ₁ + Δ₂ is not always feasible at moderate n: the Δ₁ estimate carries an
//! additive 6√ε error that the α margin cannot absorb. By default such steps
//! are repaired by enlarging the shift to the smallest value that keeps the
//! barrier above the spectrum with a non-increasing potential; each repair
//! is logged.

use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::samplers::{SampleBatch, SamplerModel};
use crate::spectral::{check_above, upper_potential, RankOneVector, SymmetricSpectrum};
use crate::walk::{check_eps, step_tags, write_rows, TrackedGram, Violation, ViolationKind, WalkOptions};

const MAX_DOUBLINGS: u32 = 64;
const MAX_REGULARITY_STEPS: u64 = 1 << 40;
const ALPHA_GRID: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpperShiftParams {
    pub eps: f64,
    pub alpha: f64,
    pub kappa: f64,
    /// Bound on sup_y E|⟨X, y⟩|^{2+κ}.
    pub moment_bound: f64,
    /// m / n.
    pub gamma: f64,
}

impl UpperShiftParams {
    /// Parameters with α chosen by [`select_alpha`] and κ = 1.
    pub fn new(eps: f64, gamma: f64, moment_bound: f64) -> Result<Self> {
        let alpha = select_alpha(gamma, eps)?;
        Ok(Self {
            eps,
            alpha,
            kappa: 1.0,
            moment_bound,
            gamma,
        })
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self> {
        let root = self.gamma.sqrt();
        if !(alpha > 0.0 && alpha < root / (1.0 + root)) {
            return Err(invalid(format!("alpha {alpha} outside (0, sqrt(g)/(1+sqrt(g)))")));
        }
        Ok(Self { alpha, ..self })
    }
}

/// The largest α with (1 + α)/(1 − t − α) ≤ (1 + ε)/(1 − t) for all
/// t ∈ (0, 1/(1 + √γ)], which is ε(1 − t*)/(2 + ε − t*) at t* = 1/(1 + √γ).
pub fn select_alpha(gamma: f64, eps: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(invalid(format!("gamma must be positive (got {gamma})")));
    }
    check_eps(eps, 0.25, true)?;
    let t = 1.0 / (1.0 + gamma.sqrt());
    Ok(eps * (1.0 - t) / (2.0 + eps - t))
}

/// Checks the defining inequality of α on the grid tᵢ = t*·i/1000.
pub fn alpha_inequality_holds(alpha: f64, gamma: f64, eps: f64) -> bool {
    let t_star = 1.0 / (1.0 + gamma.sqrt());
    (1..=ALPHA_GRID).all(|i| {
        let t = t_star * i as f64 / ALPHA_GRID as f64;
        let lhs = (1.0 + alpha) / (1.0 - t - alpha);
        let rhs = (1.0 + eps) / (1.0 - t);
        lhs.is_finite() && lhs > 0.0 && lhs <= rhs * (1.0 + 1e-12)
    })
}

/// Level of a gap d ≥ 1: the j with 4^{j−1} ≤ d < 4^j.
fn level_of(gap: f64) -> Option<u32> {
    if !(gap >= 1.0) {
        return None;
    }
    let mut j = 1;
    let mut bound = 4.0;
    while gap >= bound {
        j += 1;
        bound *= 4.0;
    }
    Some(j)
}

/// Partition of eigenvalue indices by the base-4 level of u − λᵢ.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LevelSets {
    levels: Vec<(u32, Vec<usize>)>,
    residual: Vec<usize>,
}

impl LevelSets {
    /// Non-empty levels in increasing j.
    pub fn levels(&self) -> &[(u32, Vec<usize>)] {
        &self.levels
    }

    pub fn get(&self, j: u32) -> &[usize] {
        self.levels
            .iter()
            .find(|(level, _)| *level == j)
            .map_or(&[], |(_, set)| set.as_slice())
    }

    /// Indices with u − λᵢ < 1.
    pub fn residual(&self) -> &[usize] {
        &self.residual
    }

    /// max_j |I_j| / 16^j.
    pub fn max_ratio(&self) -> f64 {
        self.levels
            .iter()
            .map(|(j, set)| set.len() as f64 / 16f64.powi(*j as i32))
            .fold(0.0, f64::max)
    }

    /// Checks |I_j|/4^j ≤ √(|I_j|/(εn)) on every level; vacuous unless
    /// max_j |I_j|/16^j ≤ 1/(εn).
    pub fn size_estimate_holds(&self, eps: f64, n: usize) -> bool {
        let scale = eps * n as f64;
        if self.max_ratio() > 1.0 / scale {
            return true;
        }
        self.levels.iter().all(|(j, set)| {
            let size = set.len() as f64;
            size / 4f64.powi(*j as i32) <= (size / scale).sqrt() * (1.0 + 1e-12)
        })
    }
}

pub fn level_sets(spectrum: &SymmetricSpectrum, u: f64) -> Result<LevelSets> {
    check_above(spectrum, u)?;
    let mut sets = LevelSets::default();
    for (i, &l) in spectrum.eigenvalues().iter().enumerate() {
        match level_of(u - l) {
            None => sets.residual.push(i),
            Some(j) => match sets.levels.iter_mut().find(|(level, _)| *level == j) {
                Some((_, set)) => set.push(i),
                None => sets.levels.push((j, vec![i])),
            },
        }
    }
    sets.levels.sort_by_key(|(j, _)| *j);
    Ok(sets)
}

/// h_j = Σ_{i∈I_j} ⟨x, xᵢ⟩² − |I_j| for every non-empty level.
pub fn h_excess(levels: &LevelSets, x: &RankOneVector) -> Vec<(u32, f64)> {
    let p = x.projections();
    levels
        .levels
        .iter()
        .map(|(j, set)| (*j, set.iter().map(|&i| p[i] * p[i]).sum::<f64>() - set.len() as f64))
        .collect()
}

fn check_inputs(spectrum: &SymmetricSpectrum, x: &RankOneVector, u: f64) -> Result<()> {
    if x.dim() != spectrum.dim() {
        return Err(Error::DimensionMismatch {
            expected: spectrum.dim(),
            got: x.dim(),
        });
    }
    check_above(spectrum, u)
}

fn weighted_sq_sum(spectrum: &SymmetricSpectrum, x: &RankOneVector, point: f64) -> f64 {
    spectrum
        .eigenvalues()
        .iter()
        .zip(x.weights())
        .map(|(&l, w)| w / ((point - l) * (point - l)))
        .sum()
}

fn q1_unchecked(spectrum: &SymmetricSpectrum, x: &RankOneVector, point: f64) -> f64 {
    spectrum
        .eigenvalues()
        .iter()
        .zip(x.weights())
        .map(|(&l, w)| w / (point - l))
        .sum()
}

/// Σ 1/((u + Δ − λᵢ)(u − λᵢ)) = (m̄(u) − m̄(u + Δ))/Δ, without cancellation.
fn potential_slope(spectrum: &SymmetricSpectrum, u: f64, delta: f64) -> f64 {
    spectrum
        .eigenvalues()
        .iter()
        .map(|&l| 1.0 / ((u + delta - l) * (u - l)))
        .sum()
}

/// Q₁(Δ) = xᵀ(u + Δ − A)⁻¹x.
pub fn q1_upper(spectrum: &SymmetricSpectrum, x: &RankOneVector, u: f64, delta: f64) -> Result<f64> {
    check_inputs(spectrum, x, u)?;
    if !(delta >= 0.0) {
        return Err(invalid("Q1 needs delta >= 0"));
    }
    Ok(q1_unchecked(spectrum, x, u + delta))
}

/// F₂(Δ) = [Σ 1/((u + Δ − λᵢ)(u − λᵢ))]⁻¹ Σ⟨x, xᵢ⟩²/(u + Δ − λᵢ)².
pub fn f2(spectrum: &SymmetricSpectrum, x: &RankOneVector, u: f64, delta: f64) -> Result<f64> {
    check_inputs(spectrum, x, u)?;
    if !(delta >= 0.0) {
        return Err(invalid("F2 needs delta >= 0"));
    }
    Ok(f2_unchecked(spectrum, x, u, delta))
}

fn f2_unchecked(spectrum: &SymmetricSpectrum, x: &RankOneVector, u: f64, delta: f64) -> f64 {
    weighted_sq_sum(spectrum, x, u + delta) / potential_slope(spectrum, u, delta)
}

/// Q₂(Δ) = [m̄(u) − m̄(u + Δ)]⁻¹ Σ⟨x, xᵢ⟩²/(u + Δ − λᵢ)², for Δ > 0.
pub fn q2_upper(spectrum: &SymmetricSpectrum, x: &RankOneVector, u: f64, delta: f64) -> Result<f64> {
    check_inputs(spectrum, x, u)?;
    if !(delta > 0.0) {
        return Err(invalid("Q2 needs delta > 0"));
    }
    Ok(q2_unchecked(spectrum, x, u, delta))
}

fn q2_unchecked(spectrum: &SymmetricSpectrum, x: &RankOneVector, u: f64, delta: f64) -> f64 {
    f2_unchecked(spectrum, x, u, delta) / delta
}

/// Δ₁ together with the terms of its estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Delta1 {
    pub value: f64,
    /// ε^{−1/2}‖x‖² when ε‖x‖² ≥ n, else 0.
    pub norm_part: f64,
    /// Q₁(Δ₁).
    pub q1: f64,
    /// m̄(u + Δ₁) + 6√ε + 8ε√n·√(max_j |I_j|/16^j).
    pub estimate: f64,
}

impl Delta1 {
    pub fn estimate_holds(&self) -> bool {
        self.q1 <= self.estimate * (1.0 + 1e-12)
    }
}

/// Largest j with 4^j ≤ n/ε².
fn level_cutoff(n: usize, eps: f64) -> u32 {
    let ratio = n as f64 / (eps * eps);
    let mut j = 0;
    let mut bound = 4.0;
    while bound <= ratio {
        j += 1;
        bound *= 4.0;
    }
    j
}

fn delta1_with_levels(spectrum: &SymmetricSpectrum, x: &RankOneVector, u: f64, eps: f64, levels: &LevelSets) -> Delta1 {
    let n = spectrum.dim();
    let norm_part = if eps * x.norm_sq() >= n as f64 {
        x.norm_sq() / eps.sqrt()
    } else {
        0.0
    };
    let cutoff = level_cutoff(n, eps);
    let mut value = norm_part;
    for (j, h) in h_excess(levels, x) {
        if j > cutoff {
            break;
        }
        let size = levels.get(j).len() as f64;
        if h > eps * eps * 2f64.powi(j as i32) * size.sqrt() {
            value += h / eps;
        }
    }
    let q1 = q1_unchecked(spectrum, x, u + value);
    let estimate = upper_potential(spectrum.eigenvalues(), u + value)
        + 6.0 * eps.sqrt()
        + 8.0 * eps * (n as f64).sqrt() * levels.max_ratio().sqrt();
    Delta1 {
        value,
        norm_part,
        q1,
        estimate,
    }
}

/// Δ₁ = ε^{−1/2}‖x‖²·1{ε‖x‖² ≥ n} + Σ_{j ≤ log₄(n/ε²)} ε⁻¹h_j·1{h_j > ε²2^j√|I_j|}.
pub fn delta1(spectrum: &SymmetricSpectrum, x: &RankOneVector, u: f64, eps: f64) -> Result<Delta1> {
    check_inputs(spectrum, x, u)?;
    check_eps(eps, 0.25, true)?;
    let potential = upper_potential(spectrum.eigenvalues(), u);
    if potential >= 1.0 {
        return Err(Error::PotentialBudget(potential));
    }
    let levels = level_sets(spectrum, u)?;
    Ok(delta1_with_levels(spectrum, x, u, eps, &levels))
}

/// How Δ₂ was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Delta2Branch {
    Zero,
    ClosedForm,
    Doubling(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Delta2 {
    pub value: f64,
    pub branch: Delta2Branch,
}

/// Δ₂: the closed form (1 + α)F₂(0)/(1 − m̄ − α) when it is at most
/// α(u − λ₁), otherwise the first 2^j(u − λ₁) with Q₂ ≤ 1 − m̄ − α.
pub fn delta2(spectrum: &SymmetricSpectrum, x: &RankOneVector, u: f64, alpha: f64) -> Result<Delta2> {
    check_inputs(spectrum, x, u)?;
    if !(alpha > 0.0) {
        return Err(invalid(format!("alpha must be positive (got {alpha})")));
    }
    let potential = upper_potential(spectrum.eigenvalues(), u);
    let room = 1.0 - potential - alpha;
    if !(room > 0.0) {
        return Err(Error::PotentialBudget(potential + alpha));
    }
    if x.is_zero() {
        return Ok(Delta2 {
            value: 0.0,
            branch: Delta2Branch::Zero,
        });
    }
    let gap = u - spectrum.lambda_max();
    let f0 = f2_unchecked(spectrum, x, u, 0.0);
    if (1.0 + alpha) * f0 <= alpha * gap * room {
        let value = (1.0 + alpha) * f0 / room;
        check_q2(spectrum, x, u, value, room)?;
        return Ok(Delta2 {
            value,
            branch: Delta2Branch::ClosedForm,
        });
    }
    for j in 0..=MAX_DOUBLINGS {
        let value = 2f64.powi(j as i32) * gap;
        if q2_unchecked(spectrum, x, u, value) <= room {
            return Ok(Delta2 {
                value,
                branch: Delta2Branch::Doubling(j),
            });
        }
    }
    Err(Error::NonTermination(MAX_DOUBLINGS as u64))
}

fn check_q2(spectrum: &SymmetricSpectrum, x: &RankOneVector, u: f64, value: f64, room: f64) -> Result<()> {
    if value > 0.0 {
        let q = q2_unchecked(spectrum, x, u, value);
        if q > room * (1.0 + 1e-10) {
            return Err(Error::Invariant(format!("Q2(delta2) = {q} > {room}")));
        }
    }
    Ok(())
}

/// m̄(v) − m̄(v + 1) = Σ 1/((v − λᵢ)(v + 1 − λᵢ)).
pub(crate) fn unit_step_difference(eigenvalues: &[f64], v: f64) -> f64 {
    eigenvalues.iter().map(|&l| 1.0 / ((v - l) * (v + 1.0 - l))).sum()
}

/// Δ_R = min{ℓ ≥ 0 : m̄(v + ℓ) − m̄(v + ℓ + 1) ≤ 1/(2εn)}.
pub fn regularity_shift_upper(spectrum: &SymmetricSpectrum, v: f64, eps: f64, n: usize) -> Result<u64> {
    check_above(spectrum, v)?;
    if !(eps > 0.0) || n == 0 {
        return Err(invalid("regularity shift needs eps > 0 and n > 0"));
    }
    let threshold = 1.0 / (2.0 * eps * n as f64);
    let eigenvalues = spectrum.eigenvalues();
    for ell in 0..MAX_REGULARITY_STEPS {
        if unit_step_difference(eigenvalues, v + ell as f64) <= threshold {
            return Ok(ell);
        }
    }
    Err(Error::NonTermination(MAX_REGULARITY_STEPS))
}

/// Smallest Δ ≥ `from` (to bisection accuracy) with u + Δ above the spectrum
/// of `updated` and m̄_updated(u + Δ) ≤ `target`.
fn repair_shift(updated: &SymmetricSpectrum, u: f64, from: f64, target: f64) -> f64 {
    let ok = |d: f64| u + d > updated.lambda_max() && upper_potential(updated.eigenvalues(), u + d) <= target;
    let mut lo = from.max(updated.lambda_max() - u);
    let mut step = (u - updated.lambda_max()).abs().max(1.0);
    let mut hi = lo + step;
    while !ok(hi) {
        lo = hi;
        step *= 2.0;
        hi = lo + step;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// One step of an upper walk.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpperStep {
    pub k: usize,
    pub u_k: f64,
    pub lambda_max: f64,
    pub potential: f64,
    #[serde(rename = "Delta1")]
    pub delta1: f64,
    #[serde(rename = "Delta2")]
    pub delta2: f64,
    #[serde(rename = "Delta_R")]
    pub delta_r: u64,
    pub max_level_ratio: f64,
    pub violations: String,
    #[serde(skip)]
    pub repair: f64,
    #[serde(skip)]
    pub delta2_bound: f64,
}

/// Live state A⁽ᵏ⁾, u_k of an upper walk.
pub struct UpperWalk {
    n: usize,
    m: usize,
    params: UpperShiftParams,
    repair: bool,
    gram: TrackedGram,
    k: usize,
    u: f64,
    u0: f64,
    potential: f64,
    budget: f64,
    cumulative_regularity: f64,
    violations: Vec<Violation>,
    trajectory: Vec<UpperStep>,
}

impl UpperWalk {
    pub fn new(n: usize, m: usize, params: UpperShiftParams, options: WalkOptions) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(invalid("upper walk needs n >= 1 and m >= 1"));
        }
        check_eps(params.eps, 0.25, true)?;
        let u0 = n as f64 + (m as f64 * n as f64).sqrt();
        let potential = n as f64 / u0;
        if potential + params.alpha >= 1.0 {
            return Err(Error::PotentialBudget(potential + params.alpha));
        }
        Ok(Self {
            n,
            m,
            params,
            repair: true,
            gram: TrackedGram::zeros(n, options),
            k: 0,
            u: u0,
            u0,
            potential,
            budget: 2.0 * params.eps * n as f64,
            cumulative_regularity: 0.0,
            violations: Vec::new(),
            trajectory: Vec::new(),
        })
    }

    /// Whether infeasible Δ₁ + Δ₂ are enlarged (default) or left to fail.
    pub fn with_repair(mut self, repair: bool) -> Self {
        self.repair = repair;
        self
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

    pub fn step(&mut self, x: &[f64]) -> Result<&UpperStep> {
        if self.k >= self.m {
            return Err(invalid("walk already consumed m samples"));
        }
        let UpperShiftParams { eps, alpha, kappa, moment_bound, .. } = self.params;
        let spectrum = self.gram.spectrum();
        let proj = spectrum.project(x)?;
        let u = self.u;
        let before = self.potential;
        if before + alpha >= 1.0 {
            return Err(Error::PotentialBudget(before + alpha));
        }

        let levels = level_sets(spectrum, u)?;
        let d1 = delta1_with_levels(spectrum, &proj, u, eps, &levels);
        let d2 = delta2(spectrum, &proj, u, alpha)?;
        let total = d1.value + d2.value;
        let composed_ok = proj.is_zero() || {
            let q1 = q1_unchecked(spectrum, &proj, u + total);
            q1 < 1.0 && q2_unchecked(spectrum, &proj, u, total) <= 1.0 - q1
        };
        let room = 1.0 - before - alpha;
        let gap = u - spectrum.lambda_max();
        let delta2_bound = (1.0 + alpha) / room
            * (1.0
                + moment_bound * 2f64.powf(1.0 + kappa)
                    / (alpha.powf(1.0 + kappa / 2.0) * (1.0 - 2f64.powf(-kappa / 2.0)))
                    / (room.powf(kappa / 2.0) * gap.powf(kappa / 2.0)));
        let residual = levels.residual().len();
        let level_ok = levels.size_estimate_holds(eps, self.n);
        let max_ratio = levels.max_ratio();

        self.k += 1;
        if residual > 0 {
            self.log(ViolationKind::ResidualLevel, format!("{residual} eigenvalues within 1 of u"));
        }
        if !level_ok {
            self.log(ViolationKind::LevelSet, "level-set size estimate failed".into());
        }
        if !d1.estimate_holds() {
            let detail = format!("Q1(Delta1) = {} > {}", d1.q1, d1.estimate);
            self.log(ViolationKind::Delta1Bound, detail);
        }
        if !composed_ok {
            self.log(ViolationKind::ComposedCondition, format!("at Delta1 + Delta2 = {total}"));
        }

        self.gram.add(&proj)?;
        let updated = self.gram.spectrum();
        let feasible = |d: f64| {
            u + d > updated.lambda_max() && upper_potential(updated.eigenvalues(), u + d) <= before
        };
        let mut shift = total;
        let mut repair = 0.0;
        if !feasible(total) {
            if self.repair {
                shift = repair_shift(updated, u, total, before);
                repair = shift - total;
                self.log(ViolationKind::Repair, format!("shift enlarged by {repair}"));
            } else if u + total <= updated.lambda_max() {
                let e = Error::BarrierViolation {
                    barrier: u + total,
                    edge: updated.lambda_max(),
                    side: crate::error::BarrierSide::Above,
                };
                self.log(ViolationKind::Barrier, e.to_string());
                return Err(e);
            }
        }
        let updated = self.gram.spectrum();
        let v = u + shift;
        if let Err(e) = check_above(updated, v) {
            self.log(ViolationKind::Barrier, e.to_string());
            return Err(e);
        }
        let delta_r = regularity_shift_upper(updated, v, eps, self.n)?;
        let u_next = v + delta_r as f64;
        let potential = upper_potential(updated.eigenvalues(), u_next);
        let lambda_max = updated.lambda_max();

        if potential > before + 1e-9 * before.max(1.0) {
            self.log(
                ViolationKind::Monotonicity,
                format!("potential rose from {before} to {potential}"),
            );
        }
        if potential + alpha >= 1.0 {
            self.log(ViolationKind::PotentialBound, format!("potential + alpha = {}", potential + alpha));
        }
        self.cumulative_regularity += delta_r as f64;
        if self.cumulative_regularity > self.budget {
            let detail = format!("sum Delta_R = {} > {}", self.cumulative_regularity, self.budget);
            self.log(ViolationKind::Budget, detail);
        }
        self.u = u_next;
        self.potential = potential;
        let tags = step_tags(&self.violations, self.k);
        self.trajectory.push(UpperStep {
            k: self.k,
            u_k: u_next,
            lambda_max,
            potential,
            delta1: d1.value,
            delta2: d2.value,
            delta_r,
            max_level_ratio: max_ratio,
            violations: tags,
            repair,
            delta2_bound,
        });
        Ok(self.trajectory.last().expect("just pushed"))
    }

    pub fn finish(mut self) -> Result<UpperWalkReport> {
        self.gram.refresh()?;
        let lambda_max = self.gram.spectrum().lambda_max();
        if self.u <= lambda_max {
            let e = Error::BarrierViolation {
                barrier: self.u,
                edge: lambda_max,
                side: crate::error::BarrierSide::Above,
            };
            self.log(ViolationKind::Barrier, e.to_string());
            return Err(e);
        }
        let steps = self.trajectory.len().max(1) as f64;
        let mean = |f: fn(&UpperStep) -> f64| self.trajectory.iter().map(f).sum::<f64>() / steps;
        let scale = ((self.m as f64).sqrt() + (self.n as f64).sqrt()).powi(2);
        Ok(UpperWalkReport {
            n: self.n,
            m: self.k,
            eps: self.params.eps,
            alpha: self.params.alpha,
            u0: self.u0,
            u_final: self.u,
            lambda_max,
            ratio: self.u / scale,
            lambda_ratio: lambda_max / scale,
            final_potential: self.potential,
            regularity_budget: self.budget,
            total_regularity: self.cumulative_regularity,
            mean_delta1: mean(|s| s.delta1),
            mean_delta2: mean(|s| s.delta2),
            mean_repair: mean(|s| s.repair),
            delta1_bound: 32.0 * self.params.moment_bound * self.params.eps.sqrt(),
            mean_delta2_bound: mean(|s| s.delta2_bound),
            violations: self.violations,
            trajectory: self.trajectory,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpperWalkReport {
    pub n: usize,
    pub m: usize,
    pub eps: f64,
    pub alpha: f64,
    pub u0: f64,
    pub u_final: f64,
    /// λ_max(A) from a fresh decomposition.
    pub lambda_max: f64,
    /// u_m / (√m + √n)².
    pub ratio: f64,
    /// λ_max(A) / (√m + √n)².
    pub lambda_ratio: f64,
    pub final_potential: f64,
    /// 2εn.
    pub regularity_budget: f64,
    pub total_regularity: f64,
    pub mean_delta1: f64,
    pub mean_delta2: f64,
    pub mean_repair: f64,
    /// 32K√ε.
    pub delta1_bound: f64,
    /// Mean over steps of the per-step bound on EΔ₂ (κ = 1).
    pub mean_delta2_bound: f64,
    pub violations: Vec<Violation>,
    #[serde(skip)]
    pub trajectory: Vec<UpperStep>,
}

impl UpperWalkReport {
    pub fn hard_violations(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.kind.is_hard())
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    /// CSV with columns k, u_k, lambda_max, potential, Delta1, Delta2,
    /// Delta_R, max_level_ratio, violations.
    pub fn write_trajectory_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        write_rows(out, &self.trajectory)
    }
}

fn default_params(model: &SamplerModel, m: usize, eps: f64) -> Result<UpperShiftParams> {
    UpperShiftParams::new(eps, m as f64 / model.dim as f64, model.third_moment_bound().max(1.0))
}

/// Runs the walk on m fresh draws from stream `stream` of `model`, with α
/// from [`select_alpha`] at γ = m/n and K from the model.
pub fn run_upper_walk(
    model: &SamplerModel,
    m: usize,
    stream: u64,
    eps: f64,
    options: WalkOptions,
) -> Result<UpperWalkReport> {
    let params = default_params(model, m, eps)?;
    run_upper_walk_with(model, m, stream, params, options, true)
}

pub fn run_upper_walk_with(
    model: &SamplerModel,
    m: usize,
    stream: u64,
    params: UpperShiftParams,
    options: WalkOptions,
    repair: bool,
) -> Result<UpperWalkReport> {
    let mut walk = UpperWalk::new(model.dim, m, params, options)?.with_repair(repair);
    let mut sampler = model.sampler(stream);
    let mut x = vec![0.0; model.dim];
    for _ in 0..m {
        sampler.fill(&mut x);
        walk.step(&x)?;
    }
    walk.finish()
}

/// Runs the walk on the rows of `batch`.
pub fn run_upper_walk_on_batch(
    batch: &SampleBatch,
    params: UpperShiftParams,
    options: WalkOptions,
) -> Result<UpperWalkReport> {
    let mut walk = UpperWalk::new(batch.dim(), batch.len(), params, options)?;
    for k in 0..batch.len() {
        walk.step(&batch.row(k))?;
    }
    walk.finish()
}
