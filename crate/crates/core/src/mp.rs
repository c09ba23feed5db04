//! Marchenko–Pastur law with aspect ratio ρ = n/m.

use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Absolute tolerance of the CDF quadrature.
pub const CDF_TOLERANCE: f64 = 1e-8;

/// Eigenvalues with |λ| ≤ this fraction of the largest are counted as the atom at 0.
pub const ZERO_EIGENVALUE_RATIO: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MpParams {
    rho: f64,
}

/// (a⁻, a⁺) = ((1 − √ρ)², (1 + √ρ)²).
pub fn mp_edges(rho: f64) -> Result<(f64, f64)> {
    Ok(MpParams::new(rho)?.edges())
}

pub fn mp_density(rho: f64, x: f64) -> Result<f64> {
    MpParams::new(rho)?.density(x)
}

impl MpParams {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(invalid(format!("aspect ratio must be positive (got {rho})")));
        }
        Ok(Self { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn edges(&self) -> (f64, f64) {
        let s = self.rho.sqrt();
        ((1.0 - s) * (1.0 - s), (1.0 + s) * (1.0 + s))
    }

    /// Mass (ρ − 1)/ρ at zero when ρ > 1.
    pub fn atom(&self) -> f64 {
        if self.rho > 1.0 {
            (self.rho - 1.0) / self.rho
        } else {
            0.0
        }
    }

    /// Density of the continuous part. Undefined at 0 when ρ ≥ 1.
    pub fn density(&self, x: f64) -> Result<f64> {
        if x == 0.0 && self.rho >= 1.0 {
            return Err(Error::Precondition(format!(
                "density is undefined at 0 for rho = {} >= 1",
                self.rho
            )));
        }
        let (lo, hi) = self.edges();
        if !(x > lo && x < hi) {
            return Ok(0.0);
        }
        Ok(((hi - x) * (x - lo)).sqrt() / (2.0 * std::f64::consts::PI * self.rho * x))
    }

    /// Integrand after x = c − h·cos θ, with c the support centre and h its
    /// half-width: h² sin²θ / (2πρx). Smooth on [0, π], including ρ = 1.
    fn angular_integrand(&self, theta: f64) -> f64 {
        let s = self.rho.sqrt();
        let half = (0.5 * theta).sin();
        let x = (1.0 - s) * (1.0 - s) + 4.0 * s * half * half;
        let h = 2.0 * s;
        let sin = theta.sin();
        if x == 0.0 {
            // ρ = 1, θ = 0: the ratio tends to 2/π.
            return 2.0 / std::f64::consts::PI;
        }
        h * h * sin * sin / (2.0 * std::f64::consts::PI * self.rho * x)
    }

    /// Continuous mass on (−∞, x].
    fn continuous_cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.edges();
        if x <= lo {
            return 0.0;
        }
        let total = 1.0 - self.atom();
        if x >= hi {
            return total;
        }
        let h = 2.0 * self.rho.sqrt();
        let c = 1.0 + self.rho;
        let theta = ((c - x) / h).clamp(-1.0, 1.0).acos();
        adaptive_simpson(|t| self.angular_integrand(t), 0.0, theta, CDF_TOLERANCE).clamp(0.0, total)
    }

    /// μ_ρ((−∞, x]).
    pub fn cdf(&self, x: f64) -> f64 {
        let atom = if x >= 0.0 { self.atom() } else { 0.0 };
        atom + self.continuous_cdf(x)
    }

    /// μ_ρ((−∞, x)).
    pub fn cdf_left(&self, x: f64) -> f64 {
        let atom = if x > 0.0 { self.atom() } else { 0.0 };
        atom + self.continuous_cdf(x)
    }

    /// Evenly spaced density/CDF table over the support.
    pub fn table(&self, points: usize) -> Vec<MpRow> {
        let (lo, hi) = self.edges();
        (0..points)
            .map(|i| {
                let x = if points == 1 {
                    lo
                } else {
                    lo + (hi - lo) * i as f64 / (points - 1) as f64
                };
                MpRow {
                    x,
                    density: self.density(x).unwrap_or(f64::INFINITY),
                    cdf: self.cdf(x),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MpRow {
    pub x: f64,
    pub density: f64,
    pub cdf: f64,
}

/// CSV with columns x, density, cdf.
pub fn write_table_csv<W: Write>(rows: &[MpRow], out: W) -> csv::Result<()> {
    crate::walk::write_rows(out, rows)
}

fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Adaptive Simpson quadrature with Richardson correction.
pub(crate) fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(fa, fm, fb, a, b);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(fa, flm, fm, a, m);
    let right = simpson(fm, frm, fb, m, b);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Empirical spectral distribution of Σ̂ = A/m: n eigenvalues, each carrying
/// mass 1/m, so the total mass is n/m.
#[derive(Debug, Clone, PartialEq)]
pub struct Esd {
    eigenvalues: Vec<f64>,
    samples: usize,
}

impl Esd {
    /// `eigenvalues` of Σ̂ (any order) built from `samples` = m vectors.
    pub fn new(mut eigenvalues: Vec<f64>, samples: usize) -> Result<Self> {
        if eigenvalues.is_empty() || samples == 0 {
            return Err(Error::EmptyBatch);
        }
        if eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(invalid("eigenvalues must be finite"));
        }
        eigenvalues.sort_by(f64::total_cmp);
        let top = eigenvalues.last().map_or(0.0, |v| v.abs());
        for v in &mut eigenvalues {
            if v.abs() <= ZERO_EIGENVALUE_RATIO * top {
                *v = 0.0;
            }
        }
        Ok(Self { eigenvalues, samples })
    }

    /// Ascending, with near-zero values snapped to 0.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// n/m.
    pub fn total_mass(&self) -> f64 {
        self.dim() as f64 / self.samples as f64
    }

    /// n/m, the ratio the law is compared against.
    pub fn aspect_ratio(&self) -> f64 {
        self.total_mass()
    }
}

/// sup_x |F_esd(x) − F_mp(x)|.
///
/// The ESD is renormalized to a probability measure (weights 1/n) before the
/// comparison; with ρ > 1 its n − m zero eigenvalues then carry exactly the
/// mass (ρ − 1)/ρ of the atom.
pub fn ks_distance(esd: &Esd, mp: &MpParams) -> f64 {
    let values = esd.eigenvalues();
    let n = values.len() as f64;
    let mut worst = 0.0f64;
    let mut i = 0;
    while i < values.len() {
        let x = values[i];
        let below = i as f64 / n;
        let mut j = i;
        while j < values.len() && values[j] == x {
            j += 1;
        }
        let at = j as f64 / n;
        worst = worst.max((mp.cdf_left(x) - below).abs()).max((at - mp.cdf(x)).abs());
        i = j;
    }
    worst.min(1.0)
}
