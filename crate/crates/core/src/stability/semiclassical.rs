//! Semiclassical self-consistency at orthogonal coupling: atoms sit at a
//! minimum of `2|a| (l1 cos(p) cos x - l2 sin(p) sin x)` while the cavity
//! phase `p` follows `a ~ e^{i chi} (l1 cos x - i l2 sin x)`.
//!
//! Eliminating `x` with `tan x = -tan(phi/2) tan p` leaves a quadratic in
//! `v = tan p`,
//! `sin(chi) t^2 v^2 - cos(chi) (1 - t^2) v + sin(chi) = 0`, `t = tan(phi/2)`,
//! whose discriminant is non-negative iff `sin^2(phi) <= cos^2(chi)`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{normalize_angle, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemiclassicalPoint {
    /// A self-consistent `(x, p)` pair was found by the iteration.
    pub exists: bool,
    /// Closed-form existence, `sin^2(phi) <= cos^2(chi)`.
    pub predicted: bool,
    pub kx_star: Option<f64>,
    pub phi_star: Option<f64>,
    pub iterations: usize,
    /// Final angular mismatch `|F(x) - x|` of the best start.
    pub residual: f64,
}

fn cavity_phase(x: f64, l1: f64, l2: f64, chi: f64) -> f64 {
    // arg(e^{i chi} (l1 cos x - i l2 sin x))
    chi + (-l2 * x.sin()).atan2(l1 * x.cos())
}

fn potential_minimum(p: f64, l1: f64, l2: f64) -> f64 {
    PI + (-l2 * p.sin()).atan2(l1 * p.cos())
}

/// Damped fixed-point iteration on the atomic position from several starts.
pub fn semiclassical_fixed_point(params: &ModelParams) -> Result<SemiclassicalPoint> {
    if (params.theta - FRAC_PI_2).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "semiclassical picture is derived for theta = pi/2 (got {})",
            params.theta
        )));
    }
    let (l1, l2) = (params.lambda1, params.lambda2);
    if !(l1 * l2 > 0.0) {
        return Err(Error::InvalidParameter("both pumps must be positive".into()));
    }
    let chi = params.phase_shift()?.chi;
    let phi = params.mixing_angle();
    let predicted = phi.sin().powi(2) <= chi.cos().powi(2);

    const STARTS: usize = 16;
    const MAX_ITER: usize = 2000;
    const DAMPING: f64 = 0.5;
    let mut best = (f64::INFINITY, 0.0, 0.0, 0usize);
    for s in 0..STARTS {
        let mut x = TAU * (s as f64 + 0.25) / STARTS as f64;
        for it in 1..=MAX_ITER {
            let p = cavity_phase(x, l1, l2, chi);
            let mismatch = normalize_angle(potential_minimum(p, l1, l2) - x);
            if mismatch.abs() < 1e-12 {
                let p = cavity_phase(x, l1, l2, chi);
                return Ok(SemiclassicalPoint {
                    exists: true,
                    predicted,
                    kx_star: Some(x.rem_euclid(TAU)),
                    phi_star: Some(normalize_angle(p)),
                    iterations: it,
                    residual: mismatch.abs(),
                });
            }
            if mismatch.abs() < best.0 {
                best = (mismatch.abs(), x, p, it);
            }
            x += DAMPING * mismatch;
        }
    }
    Ok(SemiclassicalPoint {
        exists: false,
        predicted,
        kx_star: None,
        phi_star: None,
        iterations: STARTS * MAX_ITER,
        residual: best.0,
    })
}
