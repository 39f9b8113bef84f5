//! Linear stability of the uniform state.
//!
//! With the cavity eliminated adiabatically the cos/sin density modes obey a
//! 4x4 linear problem with closed-form spectrum; keeping the cavity gives a
//! sextic characteristic polynomial. Modes evolve as `e^{-i omega t}`, so
//! `Im omega > 0` is growth.

mod roots;
mod semiclassical;

pub use roots::{poly_eval, poly_from_roots, poly_roots, RootConfig};
pub use semiclassical::{semiclassical_fixed_point, SemiclassicalPoint};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, RECOIL};

/// Band around the instability boundary inside which the closed-form test
/// reports stability (keeps the critical angle from flagging on roundoff).
pub const CRITERION_TOLERANCE: f64 = 1e-12;

/// Couplings of the adiabatic 4x4 dynamical matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticEntries {
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub zeta1: f64,
    pub zeta2: f64,
    pub omega0: f64,
}

pub fn adiabatic_entries(params: &ModelParams) -> Result<AdiabaticEntries> {
    let ps = params.phase_shift()?;
    let (l1, l2) = (params.lambda1, params.lambda2);
    let zeta1 = 2.0 * l1 * l1 * ps.r * ps.chi.cos();
    let zeta2 = 2.0 * l2 * l2 * ps.r * ps.chi.cos();
    Ok(AdiabaticEntries {
        omega_plus: 2.0 * l1 * l2 * ps.r * (params.theta + ps.chi).cos(),
        omega_minus: 2.0 * l1 * l2 * ps.r * (params.theta - ps.chi).cos(),
        zeta1,
        zeta2,
        omega0: RECOIL + 0.5 * (zeta1 + zeta2),
    })
}

/// The dynamical matrix on the quadratures of the two density modes,
/// written out entry by entry.
pub fn adiabatic_matrix(params: &ModelParams) -> Result<[[f64; 4]; 4]> {
    let e = adiabatic_entries(params)?;
    let w = RECOIL;
    Ok([
        [0.0, w, 0.0, 0.0],
        [w + e.zeta1, 0.0, e.omega_plus, 0.0],
        [0.0, 0.0, 0.0, w],
        [e.omega_minus, 0.0, w + e.zeta2, 0.0],
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpectrumSource {
    /// Closed form of the adiabatic 4x4 problem.
    Analytic4,
    /// Roots of the sextic with the cavity kept dynamical.
    Sextic6,
    /// Three-mode fluctuation matrix.
    ThreeMode6,
}

/// Complex excitation frequencies `omega = nu - i gamma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub roots: Vec<Complex64>,
    pub source: SpectrumSource,
}

impl Spectrum {
    pub fn scale(&self) -> f64 {
        self.roots.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest distance from any root to the nearest member of the mirrored
    /// set `{-conj(omega)}`.
    pub fn closure_defect(&self) -> f64 {
        let mut used = vec![false; self.roots.len()];
        let mut worst = 0.0f64;
        for z in &self.roots {
            let m = -z.conj();
            let best = self
                .roots
                .iter()
                .enumerate()
                .filter(|(j, _)| !used[*j])
                .map(|(j, w)| (j, (w - m).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((j, d)) = best {
                used[j] = true;
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Roots sorted by real part, then imaginary part (for stable output).
    pub fn sorted(mut self) -> Self {
        self.roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        self
    }
}

/// Closed-form spectrum `+-sqrt(omega0 +- sqrt(4 w+ w- + (z1 - z2)^2) / 2)`.
pub fn adiabatic_spectrum(params: &ModelParams) -> Result<Spectrum> {
    let e = adiabatic_entries(params)?;
    let d = 4.0 * e.omega_plus * e.omega_minus + (e.zeta1 - e.zeta2).powi(2);
    let sd = Complex64::new(d, 0.0).sqrt();
    let mut roots = Vec::with_capacity(4);
    for s in [1.0, -1.0] {
        let w = (Complex64::new(e.omega0 * RECOIL, 0.0) + s * 0.5 * RECOIL * sd).sqrt();
        roots.push(w);
        roots.push(-w);
    }
    Ok(Spectrum {
        roots,
        source: SpectrumSource::Analytic4,
    })
}

/// `sin^2(phi) sin^2(theta) - cos^2(chi)`; positive inside the unstable
/// wedge. Zero pump strength gives `-cos^2(chi)`.
pub fn instability_margin(params: &ModelParams) -> Result<f64> {
    let ps = params.phase_shift()?;
    let phi = params.mixing_angle();
    Ok((phi.sin() * params.theta.sin()).powi(2) - ps.chi.cos().powi(2))
}

/// Closed-form dynamical-instability test of the uniform state:
/// `sin^2(phi) sin^2(theta) > cos^2(chi)`.
///
/// Written in product form so `theta = 0, +-pi` never divides by zero.
pub fn instability_criterion(params: &ModelParams) -> Result<bool> {
    Ok(instability_margin(params)? > CRITERION_TOLERANCE)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub stable: bool,
    /// Largest `Im omega` among modes with `|Re omega| > tol`.
    pub worst_growth: Option<f64>,
    /// Largest `Im omega` over all modes, purely imaginary ones included.
    pub max_imag: f64,
    pub tol: f64,
}

/// Default tolerance `1e-9 * max(1, max |omega|)`.
pub fn default_stability_tol(spec: &Spectrum) -> f64 {
    1e-9 * spec.scale().max(1.0)
}

/// Unstable iff some mode has both `Im omega > tol` and `|Re omega| > tol`.
pub fn classify_stability(spec: &Spectrum, tol: Option<f64>) -> StabilityVerdict {
    let tol = tol.unwrap_or_else(|| default_stability_tol(spec));
    let worst_growth = spec
        .roots
        .iter()
        .filter(|z| z.re.abs() > tol)
        .map(|z| z.im)
        .reduce(f64::max);
    let max_imag = spec.roots.iter().map(|z| z.im).fold(f64::NEG_INFINITY, f64::max);
    StabilityVerdict {
        stable: worst_growth.map_or(true, |g| g <= tol),
        worst_growth,
        max_imag,
        tol,
    }
}

/// Outcome of a threshold search along a ray of fixed mixing angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Threshold {
    /// The uniform state softens (zero mode) or destabilizes at this total
    /// pump strength.
    At(f64),
    /// The ray lies inside the unstable wedge: any nonzero pump destabilizes.
    Immediate,
    /// No threshold below the search cap.
    Unbounded { cap: f64 },
}

impl Threshold {
    pub fn value(&self) -> Option<f64> {
        match self {
            Self::At(v) => Some(*v),
            Self::Immediate => Some(0.0),
            Self::Unbounded { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdConfig {
    pub cap: f64,
    pub iterations: usize,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            cap: 100.0,
            iterations: 60,
        }
    }
}

/// True when the adiabatic spectrum is no longer a set of real nonzero
/// frequencies: a zero/imaginary mode (self-organization) or a complex pair.
fn softened_or_unstable(params: &ModelParams) -> Result<bool> {
    if instability_criterion(params)? {
        return Ok(true);
    }
    let e = adiabatic_entries(params)?;
    let d = 4.0 * e.omega_plus * e.omega_minus + (e.zeta1 - e.zeta2).powi(2);
    let lower = e.omega0 - 0.5 * d.max(0.0).sqrt();
    Ok(lower <= 0.0)
}

/// Smallest total pump `lambda = sqrt(lambda1^2 + lambda2^2)` along the ray
/// `(cos(phi/2), sin(phi/2))` at which the uniform state stops being stable.
pub fn np_threshold(params: &ModelParams, phi: f64, cfg: &ThresholdConfig) -> Result<Threshold> {
    params.validate()?;
    if !(cfg.cap > 0.0) || cfg.iterations == 0 {
        return Err(Error::InvalidParameter("threshold search needs a positive cap".into()));
    }
    let (s, c) = (0.5 * phi).sin_cos();
    if s < -1e-15 || c < -1e-15 {
        return Err(Error::InvalidParameter(format!("mixing angle {phi} outside [0, pi]")));
    }
    let at = |lambda: f64| params.with_pumps(lambda * c.max(0.0), lambda * s.max(0.0));
    // inside the wedge the criterion is pump independent
    let probe = at(1.0);
    if instability_criterion(&probe)? {
        return Ok(Threshold::Immediate);
    }
    if !softened_or_unstable(&at(cfg.cap))? {
        return Ok(Threshold::Unbounded { cap: cfg.cap });
    }
    let (mut lo, mut hi) = (0.0, cfg.cap);
    for _ in 0..cfg.iterations {
        let mid = 0.5 * (lo + hi);
        if softened_or_unstable(&at(mid))? {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(Threshold::At(0.5 * (lo + hi)))
}

/// Closed form of the adiabatic threshold for `delta_c < 0` outside the
/// unstable wedge: `lambda_c^2 = 1 / (R (|cos chi| + sqrt(cos^2 chi - sin^2 phi sin^2 theta)))`.
pub fn np_threshold_closed_form(params: &ModelParams, phi: f64) -> Result<Option<f64>> {
    let ps = params.phase_shift()?;
    let c = ps.chi.cos();
    let disc = c * c - (phi.sin() * params.theta.sin()).powi(2);
    if c >= 0.0 || disc < 0.0 {
        return Ok(None);
    }
    Ok(Some((RECOIL / (ps.r * (c.abs() + disc.sqrt()))).sqrt()))
}

/// Ascending coefficients of the characteristic polynomial of the uniform
/// state with a dynamical cavity,
///
/// `[(w + i kappa)^2 - delta_c^2] (w^2 - 1)^2 + 2 delta_c (l1^2 + l2^2)(w^2 - 1)
///  - 4 l1^2 l2^2 sin^2(theta)`.
///
/// (Recoil frequency set to one.) This is `det(A - w)` for the 6x6 matrix
/// of [`np_fluctuation_matrix`].
pub fn sextic_coefficients(params: &ModelParams) -> [Complex64; 7] {
    let (d, k) = (params.delta_c, params.kappa);
    let l = params.lambda1.powi(2) + params.lambda2.powi(2);
    let cross = 4.0 * (params.lambda1 * params.lambda2 * params.theta.sin()).powi(2);
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let dk = d * d + k * k;
    [
        c(-(dk + 2.0 * d * l + cross), 0.0),
        c(0.0, 2.0 * k),
        c(2.0 * dk + 1.0 + 2.0 * d * l, 0.0),
        c(0.0, -4.0 * k),
        c(-(dk + 2.0), 0.0),
        c(0.0, 2.0 * k),
        c(1.0, 0.0),
    ]
}

/// The six roots of [`sextic_coefficients`].
pub fn beyond_adiabatic_roots(params: &ModelParams) -> Result<Spectrum> {
    params.validate()?;
    let roots = poly_roots(&sextic_coefficients(params), &RootConfig::default())?;
    Ok(Spectrum {
        roots,
        source: SpectrumSource::Sextic6,
    })
}

/// Linearization of the full equations about the uniform state in the
/// variables `(u, u*, v, v*, a, a*)`, where `u, v` are the cos/sin mode
/// amplitudes and `a` the cavity fluctuation: `i d/dt x = A x`.
pub fn np_fluctuation_matrix(params: &ModelParams) -> [[Complex64; 6]; 6] {
    let g1 = Complex64::new(params.lambda1 / std::f64::consts::SQRT_2, 0.0);
    let g2 = params.lambda2 / std::f64::consts::SQRT_2;
    let ep = Complex64::from_polar(g2, params.theta);
    let em = Complex64::from_polar(g2, -params.theta);
    let z = Complex64::default();
    let one = Complex64::new(RECOIL, 0.0);
    let cav = Complex64::new(-params.delta_c, -params.kappa);
    let cav_c = Complex64::new(params.delta_c, -params.kappa);
    [
        [one, z, z, z, g1, g1],
        [z, -one, z, z, -g1, -g1],
        [z, z, one, z, ep, em],
        [z, z, z, -one, -ep, -em],
        [g1, g1, em, em, cav, z],
        [-g1, -g1, -ep, -ep, z, cav_c],
    ]
}

/// Real 2x2 matrix of one linearized relaxation step acting on the
/// `(cos, sin)` mode amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationMatrix {
    pub gamma: [[f64; 2]; 2],
    pub d1: f64,
    pub d2: f64,
    pub n_plus: f64,
    pub n_minus: f64,
}

impl IterationMatrix {
    pub fn eigenvalues(&self) -> [Complex64; 2] {
        let [[a, b], [c, d]] = self.gamma;
        let tr = a + d;
        let det = a * d - b * c;
        let disc = Complex64::new(0.25 * tr * tr - det, 0.0).sqrt();
        [0.5 * tr + disc, 0.5 * tr - disc]
    }
}

/// `Gamma = [[1 - D1 dt, N- dt], [N+ dt, 1 - D2 dt]]` with
/// `D_j = 1 + 2 l_j^2 R cos chi` and `N+- = -2 R cos(chi +- theta) l1 l2`.
pub fn iteration_matrix(params: &ModelParams, d_tau: f64) -> Result<IterationMatrix> {
    if !(d_tau > 0.0) {
        return Err(Error::InvalidParameter(format!("d_tau must be positive (got {d_tau})")));
    }
    let ps = params.phase_shift()?;
    let (l1, l2) = (params.lambda1, params.lambda2);
    let d1 = RECOIL + 2.0 * l1 * l1 * ps.r * ps.chi.cos();
    let d2 = RECOIL + 2.0 * l2 * l2 * ps.r * ps.chi.cos();
    let n_plus = -2.0 * ps.r * (ps.chi + params.theta).cos() * l1 * l2;
    let n_minus = -2.0 * ps.r * (ps.chi - params.theta).cos() * l1 * l2;
    Ok(IterationMatrix {
        gamma: [
            [1.0 - d1 * d_tau, n_minus * d_tau],
            [n_plus * d_tau, 1.0 - d2 * d_tau],
        ],
        d1,
        d2,
        n_plus,
        n_minus,
    })
}

/// Prediction of which density wave an imaginary-time relaxation seeded
/// near the uniform state develops, at the critical coupling angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeForecast {
    pub label: crate::model::PhaseLabel,
    /// Multiplier of the pure cos mode.
    pub omega1: f64,
    /// Multiplier of the mixed mode.
    pub omega2: f64,
    /// Mixed-mode eigenvector `(x, 1)`.
    pub mixed_eigenvector: [f64; 2],
    /// Linear prediction of `(Theta1, Theta2)` after `n` steps.
    pub predicted: [f64; 2],
}

/// Linear forecast at `theta = pi/2 - chi` (within 1e-6, modulo 2pi), where
/// the iteration matrix is triangular with multipliers `1 - D_j dt`.
pub fn iteration_mode_forecast(
    params: &ModelParams,
    eps1: f64,
    eps2: f64,
    n: u32,
    d_tau: f64,
) -> Result<ModeForecast> {
    use crate::model::{normalize_angle, PhaseLabel};
    let theta_c = params.critical_angle()?;
    if normalize_angle(params.theta - theta_c).abs() > 1e-6 {
        return Err(Error::InvalidParameter(format!(
            "forecast needs theta at the critical angle {theta_c} (got {})",
            params.theta
        )));
    }
    let (l1, l2) = (params.lambda1, params.lambda2);
    let scale = (l1 * l1).max(l2 * l2).max(f64::MIN_POSITIVE);
    if ((l1 * l1 - l2 * l2) / scale).abs() < 1e-12 {
        return Err(Error::Degenerate(
            "equal pumps: mixed-mode eigenvector is singular".into(),
        ));
    }
    let m = iteration_matrix(params, d_tau)?;
    let ps = params.phase_shift()?;
    let omega1 = 1.0 - m.d1 * d_tau;
    let omega2 = 1.0 - m.d2 * d_tau;
    let x = -2.0 * l1 * l2 * ps.chi.sin() / (l1 * l1 - l2 * l2);
    // seed order parameters are sqrt(2) eps to first order
    let (t1, t2) = (std::f64::consts::SQRT_2 * eps1, std::f64::consts::SQRT_2 * eps2);
    // (t1, t2) = c1 (1, 0) + c2 (x, 1)
    let c2 = t2;
    let c1 = t1 - x * t2;
    let g1 = omega1.powi(n as i32);
    let g2 = omega2.powi(n as i32);
    let predicted = [c1 * g1 + c2 * g2 * x, c2 * g2];
    let label = if omega2 > 1.0 {
        PhaseLabel::MDW
    } else if omega1 > 1.0 {
        PhaseLabel::DW1
    } else {
        PhaseLabel::NP
    };
    Ok(ModeForecast {
        label,
        omega1,
        omega2,
        mixed_eigenvector: [x, 1.0],
        predicted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn p(l1: f64, l2: f64, th: f64, d: f64, k: f64) -> ModelParams {
        ModelParams::new(l1, l2, th, d, k).unwrap()
    }

    #[test]
    fn entries_examples() {
        let e = adiabatic_entries(&p(0.0, 0.0, 0.3, -300.0, 200.0)).unwrap();
        assert_eq!((e.zeta1, e.zeta2, e.omega_plus, e.omega_minus), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(e.omega0, 1.0);

        let pp = p(10.0, 10.0, FRAC_PI_2, -300.0, 200.0);
        let e = adiabatic_entries(&pp).unwrap();
        assert_abs_diff_eq!(e.zeta1, -600.0 / 130_000.0 * 100.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.zeta1, -0.461_538_461_538_461_5, epsilon = 1e-12);
        let ps = pp.phase_shift().unwrap();
        assert_abs_diff_eq!(e.omega_plus, -2.0 * 100.0 * ps.r * ps.chi.sin(), epsilon = 1e-12);
        assert_abs_diff_eq!(e.omega_minus, 2.0 * 100.0 * ps.r * ps.chi.sin(), epsilon = 1e-12);
        assert!(e.omega_plus * e.omega_minus < 0.0);

        let e = adiabatic_entries(&p(3.0, 7.0, 0.9, -300.0, 0.0)).unwrap();
        assert_abs_diff_eq!(e.omega_plus, e.omega_minus, epsilon = 1e-14);
    }

    #[test]
    fn spectrum_examples() {
        let s = adiabatic_spectrum(&p(0.0, 0.0, 0.0, -300.0, 0.0)).unwrap();
        let mut re: Vec<f64> = s.roots.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert_eq!(re, vec![-1.0, -1.0, 1.0, 1.0]);

        let s = adiabatic_spectrum(&p(150f64.sqrt(), 0.0, 0.0, -300.0, 0.0)).unwrap();
        let min = s.roots.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        assert!(min < 1e-7, "{min}");
    }

    #[test]
    fn criterion_examples() {
        for th in [0.1, 0.7, FRAC_PI_2, 2.0, -1.0] {
            assert!(!instability_criterion(&p(5.0, 5.0, th, -300.0, 0.0)).unwrap());
        }
        assert!(instability_criterion(&p(15.0, 15.0, FRAC_PI_2, -300.0, 200.0)).unwrap());
        let base = p(1.0, 1.0, 0.0, -300.0, 200.0);
        let tc = base.critical_angle().unwrap();
        for phi in [0.1, 0.5, FRAC_PI_2, 2.5, PI] {
            let q = ModelParams::from_mixing(15.0, phi, tc, -300.0, 200.0).unwrap();
            assert!(!instability_criterion(&q).unwrap());
        }
        assert!(!instability_criterion(&p(15.0, 15.0, 0.0, -300.0, 200.0)).unwrap());
        assert!(!instability_criterion(&p(15.0, 15.0, PI, -300.0, 200.0)).unwrap());
    }

    #[test]
    fn thresholds() {
        let cfg = ThresholdConfig::default();
        let t = np_threshold(&p(0.0, 0.0, FRAC_PI_2, -300.0, 0.0), 0.0, &cfg).unwrap();
        assert_abs_diff_eq!(t.value().unwrap(), 150f64.sqrt(), epsilon = 1e-9);

        let base = p(0.0, 0.0, 0.0, -300.0, 200.0);
        let tc = base.critical_angle().unwrap();
        let t = np_threshold(&base.with_theta(tc), PI, &cfg).unwrap();
        assert_abs_diff_eq!(t.value().unwrap(), 150f64.sqrt() / tc.sin().abs(), epsilon = 1e-8);

        let t = np_threshold(&p(0.0, 0.0, FRAC_PI_2, -300.0, 200.0), 0.0, &cfg).unwrap();
        assert_abs_diff_eq!(t.value().unwrap(), (130_000.0f64 / 600.0).sqrt(), epsilon = 1e-9);

        let t = np_threshold(&p(0.0, 0.0, FRAC_PI_2, -300.0, 200.0), FRAC_PI_2, &cfg).unwrap();
        assert_eq!(t, Threshold::Immediate);

        let t = np_threshold(&p(0.0, 0.0, FRAC_PI_2, 300.0, 0.0), 0.0, &cfg).unwrap();
        assert_eq!(t, Threshold::Unbounded { cap: 100.0 });

        for phi in [0.0, 0.3, 1.0, 2.0, 3.0] {
            let q = p(0.0, 0.0, 0.4, -300.0, 200.0);
            if let (Threshold::At(b), Some(c)) =
                (np_threshold(&q, phi, &cfg).unwrap(), np_threshold_closed_form(&q, phi).unwrap())
            {
                assert_abs_diff_eq!(b, c, epsilon = 1e-9 * c);
            }
        }
    }

    #[test]
    fn sextic_zero_coupling() {
        let s = beyond_adiabatic_roots(&p(0.0, 0.0, 0.3, -300.0, 200.0)).unwrap();
        let expect = [
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(300.0, -200.0),
            Complex64::new(-300.0, -200.0),
        ];
        for e in expect {
            let d = s.roots.iter().map(|z| (z - e).norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-6, "{e}: {d}");
        }
        assert!(s.closure_defect() < 1e-9);
    }

    #[test]
    fn classify_examples() {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let s = |r: Vec<Complex64>| Spectrum { roots: r, source: SpectrumSource::Analytic4 };
        assert!(classify_stability(&s(vec![c(1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)]), None).stable);
        let v = classify_stability(&s(vec![c(1.0, 0.1), c(-1.0, -0.1), c(-1.0, 0.1), c(1.0, -0.1)]), None);
        assert!(!v.stable);
        assert_abs_diff_eq!(v.worst_growth.unwrap(), 0.1);
        let v = classify_stability(&s(vec![c(0.0, 0.1), c(0.0, -0.1)]), None);
        assert!(v.stable);
        assert_eq!(v.worst_growth, None);
        assert_abs_diff_eq!(v.max_imag, 0.1);
    }

    #[test]
    fn iteration_matrix_examples() {
        let m = iteration_matrix(&p(5.0, 0.0, 0.4, -300.0, 200.0), 0.01).unwrap();
        assert_eq!(m.gamma[0][1], 0.0);
        assert_eq!(m.gamma[1][0], 0.0);

        let base = p(20.0, 5.0, 0.0, -300.0, 200.0);
        let q = base.with_theta(base.critical_angle().unwrap());
        let m = iteration_matrix(&q, 0.01).unwrap();
        assert!(m.gamma[1][0].abs() < 1e-14);
        let f = iteration_mode_forecast(&q, 0.01, 0.01, 10, 0.01).unwrap();
        let [x, y] = f.mixed_eigenvector;
        // (x, 1) is an eigenvector of Gamma with multiplier omega2
        let g = m.gamma;
        assert_abs_diff_eq!(g[0][0] * x + g[0][1] * y, f.omega2 * x, epsilon = 1e-12);
        assert_abs_diff_eq!(g[1][0] * x + g[1][1] * y, f.omega2 * y, epsilon = 1e-12);
        assert_eq!(f.label, crate::model::PhaseLabel::DW1);

        let f = iteration_mode_forecast(&q.with_pumps(5.0, 20.0), 0.01, 0.01, 10, 0.01).unwrap();
        assert_eq!(f.label, crate::model::PhaseLabel::MDW);
        let f = iteration_mode_forecast(&q.with_pumps(5.0, 8.0), 0.01, 0.01, 10, 0.01).unwrap();
        assert_eq!(f.label, crate::model::PhaseLabel::NP);
        assert!(matches!(
            iteration_mode_forecast(&q.with_pumps(10.0, 10.0), 0.01, 0.01, 10, 0.01),
            Err(Error::Degenerate(_))
        ));
        assert!(iteration_mode_forecast(&base, 0.01, 0.01, 10, 0.01).is_err());
    }
}
