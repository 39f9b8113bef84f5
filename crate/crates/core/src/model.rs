//! Dimensionless model: parameters, the periodic grid, condensate and cavity
//! amplitudes, order parameters, and the elementary derived quantities.
//!
//! Code units: hbar = 1, k = 1, recoil frequency = 1, so the kinetic operator
//! is `-d^2/dx^2` on one wavelength `[0, 2pi)` and every frequency is quoted
//! in recoil units. Pump strengths are collective (`lambda = sqrt(N) eta`) and
//! the cavity amplitude is stored per `sqrt(N)`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::Fourier;

/// Recoil frequency in code units.
pub const RECOIL: f64 = 1.0;

/// Tolerance used when checking that a field is normalized.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// Wrap an angle into `(-pi, pi]`.
pub fn normalize_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(TAU);
    if t > PI {
        t -= TAU;
    }
    t
}

/// Effective couplings and detunings of the mean-field model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub theta: f64,
    pub delta_c: f64,
    pub kappa: f64,
    #[serde(default)]
    pub v1: f64,
    #[serde(default)]
    pub v2: f64,
}

impl ModelParams {
    pub fn new(lambda1: f64, lambda2: f64, theta: f64, delta_c: f64, kappa: f64) -> Result<Self> {
        let p = Self {
            lambda1,
            lambda2,
            theta: normalize_angle(theta),
            delta_c,
            kappa,
            v1: 0.0,
            v2: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parametrize the pumps by total strength and mixing angle:
    /// `lambda1 = eta cos(phi/2)`, `lambda2 = eta sin(phi/2)`.
    pub fn from_mixing(eta: f64, phi: f64, theta: f64, delta_c: f64, kappa: f64) -> Result<Self> {
        let (s, c) = (0.5 * phi).sin_cos();
        // clamp the rounding residue at phi = pi
        Self::new((eta * c).max(0.0), (eta * s).max(0.0), theta, delta_c, kappa)
    }

    pub fn with_lattice(mut self, v1: f64, v2: f64) -> Self {
        self.v1 = v1;
        self.v2 = v2;
        self
    }

    pub fn with_pumps(mut self, lambda1: f64, lambda2: f64) -> Self {
        self.lambda1 = lambda1;
        self.lambda2 = lambda2;
        self
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = normalize_angle(theta);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.lambda1,
            self.lambda2,
            self.theta,
            self.delta_c,
            self.kappa,
            self.v1,
            self.v2,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("parameters must be finite".into()));
        }
        if self.lambda1 < 0.0 || self.lambda2 < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "pump strengths must be non-negative (got {}, {})",
                self.lambda1, self.lambda2
            )));
        }
        if self.kappa < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "cavity decay must be non-negative (got {})",
                self.kappa
            )));
        }
        Ok(())
    }

    /// Mixing angle `phi = 2 atan(lambda2 / lambda1)`, in `[0, pi]`.
    pub fn mixing_angle(&self) -> f64 {
        2.0 * self.lambda2.atan2(self.lambda1)
    }

    pub fn total_pump(&self) -> f64 {
        self.lambda1.hypot(self.lambda2)
    }

    pub fn phase_shift(&self) -> Result<PhaseShift> {
        dissipative_phase_shift(self.delta_c, self.kappa)
    }

    /// The coupling angle at which dissipation and the nonorthogonal
    /// coupling cancel: `theta_c = -chi + pi/2`, wrapped into `(-pi, pi]`.
    pub fn critical_angle(&self) -> Result<f64> {
        Ok(normalize_angle(-self.phase_shift()?.chi + FRAC_PI_2))
    }

    /// Complex cavity response `1 / (delta_c + i kappa)`.
    pub fn cavity_response(&self) -> Result<Complex64> {
        let ps = self.phase_shift()?;
        Ok(Complex64::from_polar(ps.r, ps.chi))
    }
}

/// `chi` and `R` with `R e^{i chi} = 1 / (delta_c + i kappa)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseShift {
    pub chi: f64,
    pub r: f64,
}

/// Dissipation-induced phase shift of the cavity response.
///
/// The full-plane branch `chi = arg(delta_c - i kappa)` is used, so that
/// `cos chi = delta_c R` and `sin chi = -kappa R` hold identically.
pub fn dissipative_phase_shift(delta_c: f64, kappa: f64) -> Result<PhaseShift> {
    if !delta_c.is_finite() || !kappa.is_finite() {
        return Err(Error::Domain("non-finite cavity detuning or decay".into()));
    }
    if delta_c == 0.0 && kappa == 0.0 {
        return Err(Error::Domain(
            "cavity response undefined for delta_c = kappa = 0".into(),
        ));
    }
    // +0.0 at kappa = 0 keeps chi = +pi on the negative real axis
    let y = if kappa == 0.0 { 0.0 } else { -kappa };
    Ok(PhaseShift {
        chi: y.atan2(delta_c),
        r: 1.0 / delta_c.hypot(kappa),
    })
}

/// Uniform periodic grid on one wavelength `[0, 2pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    num_points: usize,
}

impl Grid {
    pub const MIN_POINTS: usize = 8;

    pub fn new(num_points: usize) -> Result<Self> {
        if num_points < Self::MIN_POINTS {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least {} points (got {num_points})",
                Self::MIN_POINTS
            )));
        }
        Ok(Self { num_points })
    }

    pub fn num_points(&self) -> usize {
        self.num_points
    }

    pub fn spacing(&self) -> f64 {
        TAU / self.num_points as f64
    }

    pub fn length(&self) -> f64 {
        TAU
    }

    pub fn position(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    pub fn positions(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.num_points).map(move |j| self.position(j))
    }

    /// Rectangle-rule quadrature, exact for band-limited periodic integrands.
    pub fn integrate(&self, f: impl IntoIterator<Item = f64>) -> f64 {
        self.spacing() * f.into_iter().sum::<f64>()
    }

    pub(crate) fn cos_sin_tables(&self) -> (Vec<f64>, Vec<f64>) {
        self.positions().map(|x| x.cos_sin_pair()).unzip()
    }
}

trait CosSin {
    fn cos_sin_pair(self) -> (f64, f64);
}

impl CosSin for f64 {
    fn cos_sin_pair(self) -> (f64, f64) {
        let (s, c) = self.sin_cos();
        (c, s)
    }
}

/// Condensate wavefunction sampled on a [`Grid`], normalized to one atom.
#[derive(Debug, Clone, PartialEq)]
pub struct CondensateField {
    amplitudes: Vec<Complex64>,
}

impl CondensateField {
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Self {
        Self { amplitudes }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> Complex64) -> Self {
        Self {
            amplitudes: grid.positions().map(f).collect(),
        }
    }

    pub fn uniform(grid: &Grid) -> Self {
        let a = Complex64::new(1.0 / grid.length().sqrt(), 0.0);
        Self {
            amplitudes: vec![a; grid.num_points()],
        }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn density(&self) -> impl Iterator<Item = f64> + '_ {
        self.amplitudes.iter().map(|a| a.norm_sqr())
    }

    /// `int |psi|^2 dx`.
    pub fn norm_sqr(&self, grid: &Grid) -> f64 {
        grid.integrate(self.density())
    }

    pub fn normalize(&mut self, grid: &Grid) -> Result<()> {
        let n = self.norm_sqr(grid);
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Domain(format!("cannot normalize field with norm {n}")));
        }
        let s = 1.0 / n.sqrt();
        self.amplitudes.iter_mut().for_each(|a| *a *= s);
        Ok(())
    }

    pub fn normalized(mut self, grid: &Grid) -> Result<Self> {
        self.normalize(grid)?;
        Ok(self)
    }

    pub(crate) fn check(&self, grid: &Grid) -> Result<()> {
        if self.amplitudes.len() != grid.num_points() {
            return Err(Error::InvalidParameter(format!(
                "field has {} samples but the grid has {}",
                self.amplitudes.len(),
                grid.num_points()
            )));
        }
        let norm = self.norm_sqr(grid);
        if (norm - 1.0).abs() > NORM_TOLERANCE || !norm.is_finite() {
            return Err(Error::NotNormalized { norm });
        }
        Ok(())
    }

    /// Periodic translation `psi(x) -> psi(x - shift)`.
    ///
    /// Shifts by a whole number of grid cells are exact index rotations;
    /// anything else goes through the Fourier shift theorem.
    pub fn translated(&self, grid: &Grid, shift: f64) -> Self {
        let n = grid.num_points();
        let cells = shift / grid.spacing();
        let rounded = cells.round();
        if (cells - rounded).abs() < 1e-9 {
            let m = (rounded as i64).rem_euclid(n as i64) as usize;
            let mut out = self.amplitudes.clone();
            out.rotate_right(m);
            return Self { amplitudes: out };
        }
        let fourier = Fourier::new(n);
        let mut buf = self.amplitudes.clone();
        fourier.forward(&mut buf);
        for (c, k) in buf.iter_mut().zip(fourier.wavenumbers()) {
            if n % 2 == 0 && k.abs() == (n / 2) as f64 {
                *c *= (k * shift).cos();
            } else {
                *c *= Complex64::from_polar(1.0, -k * shift);
            }
        }
        fourier.inverse(&mut buf);
        Self { amplitudes: buf }
    }
}

/// Rescaled cavity amplitude `alpha / sqrt(N)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CavityAmplitude(pub Complex64);

impl CavityAmplitude {
    pub const ZERO: Self = Self(Complex64 { re: 0.0, im: 0.0 });

    pub fn new(re: f64, im: f64) -> Self {
        Self(Complex64::new(re, im))
    }

    pub fn value(&self) -> Complex64 {
        self.0
    }

    pub fn abs(&self) -> f64 {
        self.0.norm()
    }
}

/// Cosine and sine Fourier components of the normalized density.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OrderParameters {
    pub theta1: f64,
    pub theta2: f64,
}

impl OrderParameters {
    pub fn new(theta1: f64, theta2: f64) -> Self {
        Self { theta1, theta2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhaseLabel {
    /// Uniform condensate, empty cavity.
    NP,
    /// Only the `cos x` density wave.
    DW1,
    /// Only the `sin x` density wave.
    DW2,
    /// Both density waves.
    MDW,
    /// Dynamically unstable, no stationary state.
    UST,
}

impl PhaseLabel {
    pub const ALL: [PhaseLabel; 5] = [Self::NP, Self::DW1, Self::DW2, Self::MDW, Self::UST];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::NP => "NP",
            Self::DW1 => "DW1",
            Self::DW2 => "DW2",
            Self::MDW => "MDW",
            Self::UST => "UST",
        }
    }

    /// Small integer code used in plot scripts.
    pub fn code(&self) -> u8 {
        match self {
            Self::NP => 0,
            Self::DW1 => 1,
            Self::DW2 => 2,
            Self::MDW => 3,
            Self::UST => 4,
        }
    }

    /// Label from order-parameter magnitudes: the major component must
    /// exceed `order_tol`, the minor one must stay below `purity_tol` for a
    /// pure density wave.
    pub fn from_order(op: OrderParameters, order_tol: f64, purity_tol: f64) -> Self {
        let (a1, a2) = (op.theta1.abs(), op.theta2.abs());
        match (a1 > order_tol, a2 > order_tol) {
            (false, false) => Self::NP,
            (true, false) => Self::DW1,
            (false, true) => Self::DW2,
            (true, true) => {
                if a2 <= purity_tol {
                    Self::DW1
                } else if a1 <= purity_tol {
                    Self::DW2
                } else {
                    Self::MDW
                }
            }
        }
    }
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PhaseLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown phase label {s:?}")))
    }
}

/// `(Theta1, Theta2) = int |psi|^2 (cos x, sin x) dx`.
pub fn order_parameters(psi: &CondensateField, grid: &Grid) -> Result<OrderParameters> {
    psi.check(grid)?;
    Ok(order_parameters_unchecked(psi.amplitudes(), grid))
}

pub(crate) fn order_parameters_unchecked(psi: &[Complex64], grid: &Grid) -> OrderParameters {
    let dx = grid.spacing();
    let (mut c, mut s) = (0.0, 0.0);
    for (j, a) in psi.iter().enumerate() {
        let n = a.norm_sqr();
        let (sj, cj) = grid.position(j).sin_cos();
        c += n * cj;
        s += n * sj;
    }
    OrderParameters::new(c * dx, s * dx)
}

/// Cavity source `lambda1 Theta1 + lambda2 e^{-i theta} Theta2`.
pub(crate) fn cavity_source(op: OrderParameters, params: &ModelParams) -> Complex64 {
    params.lambda1 * op.theta1
        + params.lambda2 * Complex64::from_polar(1.0, -params.theta) * op.theta2
}

/// Adiabatic cavity amplitude for the given order parameters.
pub fn cavity_steady(op: OrderParameters, params: &ModelParams) -> Result<CavityAmplitude> {
    let response = params.cavity_response()?;
    Ok(CavityAmplitude(response * cavity_source(op, params)))
}

/// Quadrature amplitudes `(A1, A2)` of the cavity-induced potential
/// `A1 cos x + A2 sin x`.
pub(crate) fn potential_amplitudes(alpha: Complex64, params: &ModelParams) -> (f64, f64) {
    let rot = Complex64::from_polar(1.0, params.theta);
    (
        params.lambda1 * 2.0 * alpha.re,
        params.lambda2 * 2.0 * (alpha * rot).re,
    )
}

/// Optical potential felt by the atoms,
/// `lambda1 (a + a*) cos x + lambda2 (a e^{i theta} + a* e^{-i theta}) sin x
///  + v1 cos^2 x + v2 sin^2 x`.
pub fn effective_potential(
    alpha: CavityAmplitude,
    params: &ModelParams,
    grid: &Grid,
) -> Vec<f64> {
    let (a1, a2) = potential_amplitudes(alpha.0, params);
    grid.positions()
        .map(|x| {
            let (s, c) = x.sin_cos();
            a1 * c + a2 * s + params.v1 * c * c + params.v2 * s * s
        })
        .collect()
}

/// Z2 symmetry: `(alpha, psi(x)) -> (-alpha, psi(x - pi))`.
pub fn apply_z2(
    alpha: CavityAmplitude,
    psi: &CondensateField,
    grid: &Grid,
) -> (CavityAmplitude, CondensateField) {
    (CavityAmplitude(-alpha.0), psi.translated(grid, PI))
}

/// Maps a state of the orthogonal-coupling model (`theta = pi/2`, pumps
/// `lambda cos(phi/2)`, `lambda sin(phi/2)`) onto the equal-pump model with
/// coupling angle `phi` and pumps `lambda / sqrt 2`.
///
/// The map is `alpha -> alpha e^{-i phi/2}` together with a translation of
/// the condensate by `pi/4` (exact on grids with a multiple of 8 points).
pub fn gauge_to_equal_pumps(
    alpha: CavityAmplitude,
    psi: &CondensateField,
    params: &ModelParams,
    grid: &Grid,
) -> Result<(CavityAmplitude, CondensateField, ModelParams)> {
    if (params.theta - FRAC_PI_2).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "gauge map needs theta = pi/2 (got {})",
            params.theta
        )));
    }
    if params.v1 != params.v2 {
        return Err(Error::InvalidParameter(
            "gauge map needs equal lattice depths".into(),
        ));
    }
    let phi = params.mixing_angle();
    let lambda = params.total_pump() / std::f64::consts::SQRT_2;
    let mut target = ModelParams::new(lambda, lambda, phi, params.delta_c, params.kappa)?;
    target.v1 = params.v1;
    target.v2 = params.v2;
    let alpha = CavityAmplitude(alpha.0 * Complex64::from_polar(1.0, -0.5 * phi));
    Ok((alpha, psi.translated(grid, FRAC_PI_4), target))
}
