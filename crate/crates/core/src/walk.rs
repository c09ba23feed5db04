//! Pieces shared by the two barrier walks.

use std::fmt;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::spectral::{eigendecompose, rank_one_update, RankOneVector, SymmetricSpectrum, UpdateMode};

/// How a walk maintains the spectrum of A⁽ᵏ⁾.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WalkOptions {
    pub mode: UpdateMode,
    /// In incremental mode, re-decompose the explicitly accumulated matrix
    /// every this many steps to stop orthogonality drift. 0 disables it.
    pub refresh_interval: usize,
}

impl Default for WalkOptions {
    fn default() -> Self {
        Self {
            mode: UpdateMode::Incremental,
            refresh_interval: 256,
        }
    }
}

/// What went wrong (or was worked around) at one step of a walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// Lower walk: λ_min − u below 2/ε², shift forced to zero.
    GapCondition,
    /// The barrier touched or crossed the spectrum.
    Barrier,
    /// The potential increased beyond tolerance.
    Monotonicity,
    /// The potential exceeded its starting value.
    PotentialBound,
    /// A feasibility certificate of the shift failed numerically.
    Certificate,
    /// The cumulative regularity shift exceeded its budget.
    Budget,
    /// The level-set size estimate failed.
    LevelSet,
    /// Upper walk: the composed sufficient condition Q₁ < 1, Q₂ ≤ 1 − Q₁ failed at Δ₁ + Δ₂.
    ComposedCondition,
    /// Upper walk: Δ₁ + Δ₂ was not a feasible shift and was enlarged.
    Repair,
    /// Upper walk: some eigenvalue sits within distance 1 of the barrier.
    ResidualLevel,
    /// Upper walk: the Δ₁ estimate on Q₁(Δ₁) did not hold.
    Delta1Bound,
}

impl ViolationKind {
    /// Hard kinds break a guarantee the walk is supposed to keep; the others
    /// are diagnostics.
    pub fn is_hard(self) -> bool {
        matches!(
            self,
            ViolationKind::Barrier
                | ViolationKind::Monotonicity
                | ViolationKind::PotentialBound
                | ViolationKind::Certificate
                | ViolationKind::Budget
                | ViolationKind::LevelSet
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            ViolationKind::GapCondition => "gap_condition",
            ViolationKind::Barrier => "barrier",
            ViolationKind::Monotonicity => "monotonicity",
            ViolationKind::PotentialBound => "potential_bound",
            ViolationKind::Certificate => "certificate",
            ViolationKind::Budget => "budget",
            ViolationKind::LevelSet => "level_set",
            ViolationKind::ComposedCondition => "composed_condition",
            ViolationKind::Repair => "repair",
            ViolationKind::ResidualLevel => "residual_level",
            ViolationKind::Delta1Bound => "delta1_bound",
        }
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub step: usize,
    pub kind: ViolationKind,
    pub detail: String,
}

/// Joins the kinds logged at one step, e.g. `repair;composed_condition`.
pub(crate) fn step_tags(violations: &[Violation], step: usize) -> String {
    violations
        .iter()
        .rev()
        .take_while(|v| v.step == step)
        .map(|v| v.kind.name())
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect::<Vec<_>>()
        .join(";")
}

/// A⁽ᵏ⁾ kept both explicitly and as a spectrum.
pub(crate) struct TrackedGram {
    matrix: DMatrix<f64>,
    spectrum: SymmetricSpectrum,
    options: WalkOptions,
    since_refresh: usize,
}

impl TrackedGram {
    pub(crate) fn zeros(n: usize, options: WalkOptions) -> Self {
        Self {
            matrix: DMatrix::zeros(n, n),
            spectrum: SymmetricSpectrum::zeros(n),
            options,
            since_refresh: 0,
        }
    }

    pub(crate) fn spectrum(&self) -> &SymmetricSpectrum {
        &self.spectrum
    }

    pub(crate) fn add(&mut self, x: &RankOneVector) -> Result<()> {
        self.matrix.ger(1.0, x.entries(), x.entries(), 1.0);
        if x.is_zero() {
            return Ok(());
        }
        self.since_refresh += 1;
        let refresh = match self.options.mode {
            UpdateMode::Full => true,
            UpdateMode::Incremental => {
                self.options.refresh_interval > 0 && self.since_refresh >= self.options.refresh_interval
            }
        };
        if refresh {
            self.refresh()
        } else {
            self.spectrum = rank_one_update(&self.spectrum, x, UpdateMode::Incremental)?;
            Ok(())
        }
    }

    /// Re-decomposes the accumulated matrix.
    pub(crate) fn refresh(&mut self) -> Result<()> {
        let mut a = self.matrix.clone();
        crate::spectral::symmetrize(&mut a);
        self.spectrum = eigendecompose(&a)?;
        self.since_refresh = 0;
        Ok(())
    }
}

pub(crate) fn check_eps(eps: f64, upper: f64, inclusive: bool) -> Result<()> {
    let ok = eps > 0.0 && if inclusive { eps <= upper } else { eps < upper };
    if ok {
        Ok(())
    } else {
        let bracket = if inclusive { "]" } else { ")" };
        Err(invalid(format!("eps must lie in (0, {upper}{bracket} (got {eps})")))
    }
}

/// Writes `rows` as CSV.
pub(crate) fn write_rows<W: std::io::Write, T: Serialize>(out: W, rows: &[T]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
