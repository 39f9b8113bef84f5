//! Polynomial roots by Durand-Kerner (Weierstrass) simultaneous iteration.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootConfig {
    /// Relative residual / update tolerance.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RootConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 200,
        }
    }
}

/// Evaluate `sum c_i z^i` (coefficients in ascending order) and its
/// derivative by Horner's rule.
pub fn poly_eval(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::default();
    let mut dp = Complex64::default();
    for c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// `sum |c_i| |z|^i`, the natural scale of rounding errors in `p(z)`.
fn poly_scale(coeffs: &[Complex64], z: Complex64) -> f64 {
    let r = z.norm();
    coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
}

fn relative_residual(coeffs: &[Complex64], z: Complex64) -> f64 {
    let scale = poly_scale(coeffs, z);
    if scale == 0.0 {
        0.0
    } else {
        poly_eval(coeffs, z).0.norm() / scale
    }
}

/// All complex roots of `sum c_i z^i` (ascending coefficient order).
///
/// Starts from a rotated circle of radius `1 + max |c_i / c_n|` and polishes
/// each converged root with a few Newton steps. Every root satisfies
/// `|p(z)| < tol * sum |c_i| |z|^i` on success.
pub fn poly_roots(coeffs: &[Complex64], cfg: &RootConfig) -> Result<Vec<Complex64>> {
    let degree = coeffs.len().saturating_sub(1);
    if degree == 0 {
        return Err(Error::InvalidParameter("polynomial degree must be at least 1".into()));
    }
    let lead = coeffs[degree];
    if lead == Complex64::default() || !lead.re.is_finite() || !lead.im.is_finite() {
        return Err(Error::InvalidParameter("leading coefficient must be nonzero and finite".into()));
    }
    if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::InvalidParameter("coefficients must be finite".into()));
    }
    let monic: Vec<Complex64> = coeffs.iter().map(|c| c / lead).collect();
    if degree == 1 {
        return Ok(vec![-monic[0]]);
    }

    let radius = 1.0 + monic[..degree].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..degree)
        .map(|k| {
            let angle = std::f64::consts::TAU * k as f64 / degree as f64 + 0.4;
            Complex64::from_polar(radius, angle)
        })
        .collect();

    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let mut max_step = 0.0f64;
        for k in 0..degree {
            let (p, _) = poly_eval(&monic, z[k]);
            let mut den = Complex64::new(1.0, 0.0);
            for (j, zj) in z.iter().enumerate() {
                if j != k {
                    den *= z[k] - zj;
                }
            }
            if den == Complex64::default() {
                // coincident iterates: nudge apart
                den = Complex64::new(f64::EPSILON, f64::EPSILON);
            }
            let step = p / den;
            z[k] -= step;
            max_step = max_step.max(step.norm() / (1.0 + z[k].norm()));
        }
        let resid_ok = z.iter().all(|&zk| relative_residual(&monic, zk) < cfg.tol);
        if resid_ok && max_step < cfg.tol {
            break;
        }
    }

    for zk in z.iter_mut() {
        for _ in 0..4 {
            let (p, dp) = poly_eval(&monic, *zk);
            if dp == Complex64::default() {
                break;
            }
            let cand = *zk - p / dp;
            if relative_residual(&monic, cand) < relative_residual(&monic, *zk) {
                *zk = cand;
            } else {
                break;
            }
        }
    }

    refine_clusters(&monic, &mut z);

    let residuals: Vec<f64> = z.iter().map(|&zk| relative_residual(&monic, zk)).collect();
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    if max_residual < cfg.tol && z.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Ok(z)
    } else {
        Err(Error::RootsNotConverged {
            iterations,
            best: z,
            residuals,
            max_residual,
        })
    }
}

/// Coefficients of the `k`-th derivative.
fn derivative(coeffs: &[Complex64], k: usize) -> Vec<Complex64> {
    coeffs
        .iter()
        .enumerate()
        .skip(k)
        .map(|(i, c)| c * ((i - k + 1)..=i).map(|f| f as f64).product::<f64>())
        .collect()
}

/// Multiple roots are only resolved to `eps^(1/m)` by simultaneous
/// iteration. A group of `m` iterates is replaced by the simple root of
/// `p^(m-1)` near their centroid when every member lies within the
/// rounding-limited cluster radius around it; genuinely distinct close roots
/// fail that test and are left alone.
fn refine_clusters(monic: &[Complex64], z: &mut [Complex64]) {
    let n = z.len();
    let mut done = vec![false; n];
    for i in 0..n {
        if done[i] {
            continue;
        }
        let reach = 1e-3 * (1.0 + z[i].norm());
        let members: Vec<usize> = (i..n).filter(|&j| !done[j] && (z[j] - z[i]).norm() < reach).collect();
        let m = members.len();
        if m < 2 {
            continue;
        }
        let centroid = members.iter().map(|&j| z[j]).sum::<Complex64>() / m as f64;
        let d = derivative(monic, m - 1);
        let mut r = centroid;
        for _ in 0..20 {
            let (p, dp) = poly_eval(&d, r);
            if dp == Complex64::default() {
                break;
            }
            let step = p / dp;
            r -= step;
            if step.norm() <= 1e-16 * (1.0 + r.norm()) {
                break;
            }
        }
        let dm = derivative(monic, m);
        let lead = poly_eval(&dm, r).0.norm();
        if !(lead > 0.0) {
            continue;
        }
        let factorial: f64 = (1..=m).map(|f| f as f64).product();
        let radius = 10.0 * (f64::EPSILON * poly_scale(monic, r) * factorial / lead).powf(1.0 / m as f64);
        if members.iter().all(|&j| (z[j] - r).norm() <= radius) {
            for &j in &members {
                z[j] = r;
                done[j] = true;
            }
        }
    }
}

/// Ascending coefficients of `prod (z - r_k)`.
pub fn poly_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::default(); c.len() + 1];
        for (i, ci) in c.iter().enumerate() {
            next[i + 1] += ci;
            next[i] -= ci * r;
        }
        c = next;
    }
    c
}
