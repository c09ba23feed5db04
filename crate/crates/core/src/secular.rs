//! Incremental eigen-update of A + xxᵀ from the spectrum of A.
//!
//! With A = V diag(d) Vᵀ and z = Vᵀx the problem reduces to diag(d) + zzᵀ.
//! Components with negligible z and clusters of (numerically) equal poles are
//! deflated first; the remaining eigenvalues are the roots of the secular
//! function f(λ) = 1 + Σ zᵢ² / (dᵢ − λ), one in each gap between consecutive
//! poles and one above the largest. Each root is stored relative to its
//! nearest pole so that the differences dᵢ − λⱼ are formed without
//! cancellation, and eigenvectors are built from the Löwner-corrected vector
//! ẑ so that they stay orthogonal even for tightly clustered roots.

use nalgebra::DMatrix;

use crate::spectral::{RankOneVector, SymmetricSpectrum, DEFLATION_RATIO};

const MAX_ITERATIONS: usize = 128;

/// A root λ = d[origin] + tau.
#[derive(Debug, Clone, Copy)]
struct Root {
    origin: usize,
    tau: f64,
}

pub(crate) fn rank_one_incremental(
    spectrum: &SymmetricSpectrum,
    x: &RankOneVector,
) -> SymmetricSpectrum {
    let n = spectrum.dim();
    if x.is_zero() || n == 0 {
        return spectrum.clone();
    }
    let norm = x.norm_sq().sqrt();
    let z_tol = DEFLATION_RATIO * norm;

    // Ascending working order.
    let mut d: Vec<f64> = spectrum.eigenvalues().iter().rev().copied().collect();
    let mut z: Vec<f64> = x.projections().iter().rev().copied().collect();
    let mut basis = spectrum.eigenvectors().clone();
    let col = |i: usize| n - 1 - i;

    let d_scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let pole_tol = 8.0 * f64::EPSILON * d_scale.max(x.norm_sq());

    let mut deflated: Vec<usize> = Vec::new();
    let mut active: Vec<usize> = Vec::new();
    let mut pending: Option<usize> = None;
    for i in 0..n {
        if z[i].abs() <= z_tol {
            deflated.push(i);
            continue;
        }
        let Some(p) = pending else {
            pending = Some(i);
            continue;
        };
        let r = z[p].hypot(z[i]);
        let c = z[i] / r;
        let s = z[p] / r;
        if (c * s * (d[i] - d[p])).abs() <= pole_tol {
            // Rotate the weight of p onto i; p becomes an exact eigenpair.
            let (cp, ci) = (col(p), col(i));
            let vp = basis.column(cp).clone_owned();
            let vi = basis.column(ci).clone_owned();
            basis.set_column(cp, &(&vp * c - &vi * s));
            basis.set_column(ci, &(&vp * s + &vi * c));
            let (dp, di) = (d[p], d[i]);
            d[p] = c * c * dp + s * s * di;
            d[i] = s * s * dp + c * c * di;
            z[p] = 0.0;
            z[i] = r;
            deflated.push(p);
        } else {
            active.push(p);
        }
        pending = Some(i);
    }
    if let Some(p) = pending {
        active.push(p);
    }

    let mut values: Vec<f64> = Vec::with_capacity(n);
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (slot, &i) in deflated.iter().enumerate() {
        values.push(d[i]);
        vectors.set_column(slot, &basis.column(col(i)));
    }

    if !active.is_empty() {
        let poles: Vec<f64> = active.iter().map(|&i| d[i]).collect();
        let weights: Vec<f64> = active.iter().map(|&i| z[i] * z[i]).collect();
        let signs: Vec<f64> = active.iter().map(|&i| z[i].signum()).collect();
        let roots = solve_secular(&poles, &weights);
        let zhat = lowner_vector(&poles, &roots, &signs);

        let k = poles.len();
        let mut mixing = DMatrix::<f64>::zeros(k, k);
        for (j, root) in roots.iter().enumerate() {
            let mut norm_sq = 0.0;
            for i in 0..k {
                let v = zhat[i] / ((poles[i] - poles[root.origin]) - root.tau);
                mixing[(i, j)] = v;
                norm_sq += v * v;
            }
            let inv = 1.0 / norm_sq.sqrt();
            for i in 0..k {
                mixing[(i, j)] *= inv;
            }
        }
        let old = basis.select_columns(active.iter().map(|&i| col(i)).collect::<Vec<_>>().iter());
        let mut rotated = DMatrix::<f64>::zeros(n, k);
        rotated.gemm(1.0, &old, &mixing, 0.0);
        let offset = deflated.len();
        for (j, root) in roots.iter().enumerate() {
            values.push(poles[root.origin] + root.tau);
            vectors.set_column(offset + j, &rotated.column(j));
        }
    }

    SymmetricSpectrum::sorted(values, vectors)
}

/// Roots of 1 + Σ wᵢ/(dᵢ − λ) for strictly increasing poles `d` and positive
/// weights `w`.
fn solve_secular(d: &[f64], w: &[f64]) -> Vec<Root> {
    let k = d.len();
    let total: f64 = w.iter().sum();
    (0..k)
        .map(|j| {
            if j + 1 < k {
                let mid = 0.5 * (d[j] + d[j + 1]);
                let f_mid = 1.0 + d.iter().zip(w).map(|(&di, &wi)| wi / (di - mid)).sum::<f64>();
                if f_mid >= 0.0 {
                    solve_root(d, w, j, j, 0.0, mid - d[j])
                } else {
                    solve_root(d, w, j, j + 1, mid - d[j + 1], 0.0)
                }
            } else {
                solve_root(d, w, j, j, 0.0, total)
            }
        })
        .collect()
}

/// Root in gap `j` (between poles j and j+1, or above the last pole),
/// parametrised as λ = d[origin] + τ with τ bracketed by (lo, hi).
fn solve_root(d: &[f64], w: &[f64], j: usize, origin: usize, mut lo: f64, mut hi: f64) -> Root {
    let k = d.len();
    let shifted: Vec<f64> = d.iter().map(|&di| di - d[origin]).collect();
    let left = shifted[j];
    let right = shifted.get(j + 1).copied();

    let mut tau = 0.5 * (lo + hi);
    for _ in 0..MAX_ITERATIONS {
        let (mut psi, mut dpsi, mut phi, mut dphi, mut mag) = (0.0, 0.0, 0.0, 0.0, 1.0);
        for i in 0..k {
            let r = shifted[i] - tau;
            let t = w[i] / r;
            if i <= j {
                psi += t;
                dpsi += t / r;
            } else {
                phi += t;
                dphi += t / r;
            }
            mag += t.abs();
        }
        let g = 1.0 + psi + phi;
        if g == 0.0 || g.abs() <= 4.0 * f64::EPSILON * mag {
            break;
        }
        if g < 0.0 {
            lo = tau;
        } else {
            hi = tau;
        }
        if hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
            break;
        }

        // Two-pole rational model matching value and slope of each half.
        let a = left;
        let bl = dpsi * (a - tau) * (a - tau);
        let mut c = 1.0 + psi - bl / (a - tau);
        let candidate = match right {
            Some(b) => {
                let br = dphi * (b - tau) * (b - tau);
                c += phi - br / (b - tau);
                // c(a−t)(b−t) + bl(b−t) + br(a−t) = 0
                let qa = c;
                let qb = -(c * (a + b) + bl + br);
                let qc = c * a * b + bl * b + br * a;
                quadratic_root_in(qa, qb, qc, lo, hi)
            }
            None => {
                if c > 0.0 {
                    Some(a + bl / c)
                } else {
                    None
                }
            }
        };
        tau = match candidate {
            Some(t) if t > lo && t < hi => t,
            _ => 0.5 * (lo + hi),
        };
    }
    Root { origin, tau }
}

fn quadratic_root_in(a: f64, b: f64, c: f64, lo: f64, hi: f64) -> Option<f64> {
    let inside = |t: f64| t > lo && t < hi;
    if a == 0.0 {
        return (b != 0.0).then(|| -c / b).filter(|&t| inside(t));
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let mut roots = Vec::with_capacity(2);
    roots.push(q / a);
    if q != 0.0 {
        roots.push(c / q);
    }
    roots.into_iter().find(|&t| inside(t))
}

/// ẑᵢ with ẑᵢ² = Πⱼ(λⱼ − dᵢ) / Π_{j≠i}(dⱼ − dᵢ); the computed roots are exact
/// eigenvalues of diag(d) + ẑẑᵀ.
fn lowner_vector(d: &[f64], roots: &[Root], signs: &[f64]) -> Vec<f64> {
    let k = d.len();
    let gap = |j: usize, i: usize| (d[roots[j].origin] - d[i]) + roots[j].tau;
    (0..k)
        .map(|i| {
            let mut prod = gap(k - 1, i);
            for j in 0..i {
                prod *= gap(j, i) / (d[j] - d[i]);
            }
            for j in i..(k - 1) {
                prod *= gap(j, i) / (d[j + 1] - d[i]);
            }
            signs[i] * prod.abs().sqrt()
        })
        .collect()
}
