//! Three-level truncation: the matter field restricted to the uniform mode
//! and the two recoil modes `cos x`, `sin x`, treated in Holstein-Primakoff
//! mean field.
//!
//! Per-atom energy with `q = 1 - |b1|^2 - |b2|^2`:
//!
//! ```text
//! E = -delta_c |a|^2 + |b1|^2 + |b2|^2
//!     + sqrt(q) [mu1 X1 (a + a*) + mu2 X2 (a e^{i theta} + a* e^{-i theta})]
//! ```
//!
//! with `X_j = b_j + b_j*`. Equations of motion are `i db_j/dt = dE/db_j*`
//! and `i da/dt = dE/da* - i kappa a`.

use nalgebra::{DMatrix, DVector, Matrix6};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Grid, ModelParams, OrderParameters, PhaseLabel};
use crate::scan::{classify_point, CellRecord, ClassifyConfig};
use crate::stability::{
    classify_stability, poly_roots, RootConfig, Spectrum, SpectrumSource, StabilityVerdict,
};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TMParams {
    pub mu1: f64,
    pub mu2: f64,
    pub theta: f64,
    pub delta_c: f64,
    pub kappa: f64,
}

impl TMParams {
    pub fn new(mu1: f64, mu2: f64, theta: f64, delta_c: f64, kappa: f64) -> Result<Self> {
        if !(mu1 >= 0.0 && mu2 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "couplings must be non-negative (got {mu1}, {mu2})"
            )));
        }
        if !(kappa >= 0.0) || ![theta, delta_c, kappa].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("invalid cavity parameters".into()));
        }
        Ok(Self {
            mu1,
            mu2,
            theta: crate::model::normalize_angle(theta),
            delta_c,
            kappa,
        })
    }

    /// `mu = lambda / sqrt 2`.
    pub fn from_model(p: &ModelParams) -> Self {
        Self {
            mu1: p.lambda1 / std::f64::consts::SQRT_2,
            mu2: p.lambda2 / std::f64::consts::SQRT_2,
            theta: p.theta,
            delta_c: p.delta_c,
            kappa: p.kappa,
        }
    }

    pub fn to_model(&self) -> Result<ModelParams> {
        ModelParams::new(
            self.mu1 * std::f64::consts::SQRT_2,
            self.mu2 * std::f64::consts::SQRT_2,
            self.theta,
            self.delta_c,
            self.kappa,
        )
    }

    /// Single-pump threshold `sqrt(-delta_c)/2` of the closed system.
    pub fn critical_coupling(&self) -> f64 {
        (-self.delta_c).max(0.0).sqrt() / 2.0
    }

    fn cavity(&self) -> Complex64 {
        Complex64::new(-self.delta_c, -self.kappa)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TMState {
    pub beta1: Complex64,
    pub beta2: Complex64,
    pub alpha: Complex64,
}

impl TMState {
    pub fn new(beta1: Complex64, beta2: Complex64, alpha: Complex64) -> Self {
        Self { beta1, beta2, alpha }
    }

    pub fn p1(&self) -> f64 {
        self.beta1.norm_sqr()
    }

    pub fn p2(&self) -> f64 {
        self.beta2.norm_sqr()
    }

    /// Population left in the uniform mode.
    pub fn occupation(&self) -> f64 {
        1.0 - self.p1() - self.p2()
    }

    /// Density-wave order parameters `Theta_j = sqrt(2 q) Re b_j`.
    pub fn order(&self) -> OrderParameters {
        let s = (2.0 * self.occupation().max(0.0)).sqrt();
        OrderParameters::new(s * self.beta1.re, s * self.beta2.re)
    }

    fn to_vec(self) -> [f64; 6] {
        [
            self.beta1.re,
            self.beta1.im,
            self.beta2.re,
            self.beta2.im,
            self.alpha.re,
            self.alpha.im,
        ]
    }

    fn from_vec(v: &[f64]) -> Self {
        Self {
            beta1: Complex64::new(v[0], v[1]),
            beta2: Complex64::new(v[2], v[3]),
            alpha: Complex64::new(v[4], v[5]),
        }
    }

    fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }
}

/// Right-hand sides `(F1, F2, Fa)` with `i d/dt (b1, b2, a) = (F1, F2, Fa)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Forces {
    f1: Complex64,
    f2: Complex64,
    fa: Complex64,
}

struct Aux {
    s: f64,
    x1: f64,
    x2: f64,
    a1: f64,
    a2: f64,
    g: f64,
    rot: Complex64,
}

fn aux(st: &TMState, p: &TMParams) -> Result<Aux> {
    let q = st.occupation();
    if !(q > 0.0) {
        return Err(Error::OccupationExhausted {
            occupation: 1.0 - q,
        });
    }
    let rot = Complex64::from_polar(1.0, p.theta);
    let x1 = 2.0 * st.beta1.re;
    let x2 = 2.0 * st.beta2.re;
    let a1 = 2.0 * st.alpha.re;
    let a2 = 2.0 * (st.alpha * rot).re;
    Ok(Aux {
        s: q.sqrt(),
        x1,
        x2,
        a1,
        a2,
        g: p.mu1 * x1 * a1 + p.mu2 * x2 * a2,
        rot,
    })
}

fn forces(st: &TMState, p: &TMParams) -> Result<Forces> {
    let a = aux(st, p)?;
    let w = p.mu1 * a.x1 + p.mu2 * a.rot.conj() * a.x2;
    Ok(Forces {
        f1: st.beta1 + p.mu1 * a.a1 * a.s - a.g * st.beta1 / (2.0 * a.s),
        f2: st.beta2 + p.mu2 * a.a2 * a.s - a.g * st.beta2 / (2.0 * a.s),
        fa: p.cavity() * st.alpha + a.s * w,
    })
}

/// Time derivatives `(db1/dt, db2/dt, da/dt)`.
pub fn tm_rhs(state: &TMState, params: &TMParams) -> Result<TMState> {
    let f = forces(state, params)?;
    Ok(TMState::new(-I * f.f1, -I * f.f2, -I * f.fa))
}

/// Largest modulus among the three right-hand sides.
pub fn tm_residual(state: &TMState, params: &TMParams) -> Result<f64> {
    let f = forces(state, params)?;
    Ok(f.f1.norm().max(f.f2.norm()).max(f.fa.norm()))
}

/// Cavity amplitude that makes `Fa = 0` for the given atomic amplitudes.
fn slaved_alpha(b1: Complex64, b2: Complex64, p: &TMParams) -> Complex64 {
    let q = (1.0 - b1.norm_sqr() - b2.norm_sqr()).max(0.0);
    let w = p.mu1 * 2.0 * b1.re + p.mu2 * Complex64::from_polar(1.0, -p.theta) * 2.0 * b2.re;
    -q.sqrt() * w / p.cavity()
}

/// Mean-field image of the generator of the closed-system symmetry at
/// `theta = pi/2`, `mu1 = mu2`: `|a|^2 - i (b1* b2 - b2* b1)`.
///
/// With the coupling `a e^{i theta} + h.c.` on the second channel it is
/// `a^dag a - i (X12 - X21)` that commutes with the Hamiltonian; the opposite
/// sign of the transfer term is not conserved.
pub fn tm_conserved_quantity(state: &TMState) -> f64 {
    state.alpha.norm_sqr() + 2.0 * (state.beta1.conj() * state.beta2).im
}

/// Closed-form steady branch at `theta = pi/2`, `kappa = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TmBranch {
    NP,
    DW1 { p1: f64 },
    DW2 { p2: f64 },
    /// Equal couplings: any split with `p1 + p2 = total`.
    MDW { total: f64 },
}

impl TmBranch {
    pub fn populations(&self) -> (f64, f64) {
        match *self {
            Self::NP => (0.0, 0.0),
            Self::DW1 { p1 } => (p1, 0.0),
            Self::DW2 { p2 } => (0.0, p2),
            Self::MDW { total } => (total, 0.0),
        }
    }

    pub fn label(&self) -> PhaseLabel {
        match self {
            Self::NP => PhaseLabel::NP,
            Self::DW1 { .. } => PhaseLabel::DW1,
            Self::DW2 { .. } => PhaseLabel::DW2,
            Self::MDW { .. } => PhaseLabel::MDW,
        }
    }
}

/// `(4 mu^2 + delta_c) / (8 mu^2)`.
fn organized_population(mu: f64, delta_c: f64) -> f64 {
    (4.0 * mu * mu + delta_c) / (8.0 * mu * mu)
}

/// Four-branch closed form of the populations at `theta = pi/2`,
/// `kappa = 0`: the stronger coupling above `mu_c` organizes its own mode;
/// equal couplings give a one-parameter family.
pub fn tm_analytic(params: &TMParams) -> Result<TmBranch> {
    if (params.theta - std::f64::consts::FRAC_PI_2).abs() > 1e-12 || params.kappa != 0.0 {
        return Err(Error::InvalidParameter(
            "closed form holds only for theta = pi/2 and kappa = 0".into(),
        ));
    }
    if !(params.delta_c < 0.0) {
        return Err(Error::InvalidParameter("closed form needs delta_c < 0".into()));
    }
    let mc = params.critical_coupling();
    let (m1, m2) = (params.mu1, params.mu2);
    let top = m1.max(m2);
    if top <= mc {
        return Ok(TmBranch::NP);
    }
    let p = organized_population(top, params.delta_c);
    Ok(if ((m1 - m2) / top).abs() < 1e-12 {
        TmBranch::MDW { total: p }
    } else if m1 > m2 {
        TmBranch::DW1 { p1: p }
    } else {
        TmBranch::DW2 { p2: p }
    })
}

/// A full state on an analytic branch, with the cavity slaved; `split`
/// distributes the MDW population (`p1 = total cos^2`, `p2 = total sin^2`).
pub fn tm_analytic_state(params: &TMParams, split: f64) -> Result<TMState> {
    let (b1, b2) = match tm_analytic(params)? {
        TmBranch::NP => (0.0, 0.0),
        TmBranch::DW1 { p1 } => (p1.sqrt(), 0.0),
        TmBranch::DW2 { p2 } => (0.0, p2.sqrt()),
        TmBranch::MDW { total } => (total.sqrt() * split.cos(), total.sqrt() * split.sin()),
    };
    let (b1, b2) = (Complex64::new(b1, 0.0), Complex64::new(b2, 0.0));
    Ok(TMState::new(b1, b2, slaved_alpha(b1, b2, params)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TmSteadyConfig {
    /// Artificial damping `gamma` of the atomic amplitudes.
    pub damping: f64,
    /// Eliminate the cavity adiabatically during the damped flow.
    pub slave_cavity: bool,
    pub dt: f64,
    pub max_steps: usize,
    pub tol: f64,
    /// Starting amplitudes `(b1, b2)` (real).
    pub seed: [f64; 2],
    pub newton: bool,
}

impl Default for TmSteadyConfig {
    fn default() -> Self {
        Self {
            damping: 1.0,
            slave_cavity: true,
            dt: 0.02,
            max_steps: 200_000,
            tol: 1e-11,
            seed: [0.01, 0.01],
            newton: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TmSteady {
    pub state: TMState,
    pub converged: bool,
    pub residual: f64,
    pub steps: usize,
}

fn flow_derivative(st: &TMState, p: &TMParams, cfg: &TmSteadyConfig) -> Result<TMState> {
    let mut st = *st;
    if cfg.slave_cavity {
        st.alpha = slaved_alpha(st.beta1, st.beta2, p);
    }
    let f = forces(&st, p)?;
    let k = Complex64::new(-cfg.damping, -1.0);
    Ok(TMState::new(
        k * f.f1,
        k * f.f2,
        if cfg.slave_cavity { Complex64::default() } else { -I * f.fa },
    ))
}

fn rk4_step(
    st: &TMState,
    h: f64,
    deriv: impl Fn(&TMState) -> Result<TMState>,
) -> Result<TMState> {
    let add = |a: &TMState, b: &TMState, s: f64| {
        TMState::new(a.beta1 + s * b.beta1, a.beta2 + s * b.beta2, a.alpha + s * b.alpha)
    };
    let k1 = deriv(st)?;
    let k2 = deriv(&add(st, &k1, 0.5 * h))?;
    let k3 = deriv(&add(st, &k2, 0.5 * h))?;
    let k4 = deriv(&add(st, &k3, h))?;
    Ok(TMState::new(
        st.beta1 + h / 6.0 * (k1.beta1 + 2.0 * k2.beta1 + 2.0 * k3.beta1 + k4.beta1),
        st.beta2 + h / 6.0 * (k1.beta2 + 2.0 * k2.beta2 + 2.0 * k3.beta2 + k4.beta2),
        st.alpha + h / 6.0 * (k1.alpha + 2.0 * k2.alpha + 2.0 * k3.alpha + k4.alpha),
    ))
}

fn residual_vec(st: &TMState, p: &TMParams) -> Result<[f64; 6]> {
    let f = forces(st, p)?;
    Ok([f.f1.re, f.f1.im, f.f2.re, f.f2.im, f.fa.re, f.fa.im])
}

/// Newton iteration on the six real stationarity equations; the Jacobian
/// (by central differences) is inverted by SVD so the flat direction of
/// the equal-coupling family does not break the step.
fn newton_polish(st: TMState, p: &TMParams) -> TMState {
    let mut x = st.to_vec();
    let mut r = match residual_vec(&TMState::from_vec(&x), p) {
        Ok(r) => r,
        Err(_) => return st,
    };
    let norm = |r: &[f64; 6]| r.iter().map(|v| v * v).sum::<f64>().sqrt();
    for _ in 0..20 {
        if norm(&r) < 1e-15 {
            break;
        }
        let mut jac = DMatrix::<f64>::zeros(6, 6);
        let h = 1e-7;
        for j in 0..6 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let (rp, rm) = match (
                residual_vec(&TMState::from_vec(&xp), p),
                residual_vec(&TMState::from_vec(&xm), p),
            ) {
                (Ok(a), Ok(b)) => (a, b),
                _ => return TMState::from_vec(&x),
            };
            for i in 0..6 {
                jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        let dx = match svd.solve(&DVector::from_row_slice(&r), 1e-10 * smax.max(1.0)) {
            Ok(d) => d,
            Err(_) => break,
        };
        let mut cand = x;
        for i in 0..6 {
            cand[i] -= dx[i];
        }
        match residual_vec(&TMState::from_vec(&cand), p) {
            Ok(rc) if norm(&rc) < norm(&r) => {
                x = cand;
                r = rc;
            }
            _ => break,
        }
    }
    TMState::from_vec(&x)
}

/// Steady state of the three-mode equations by damped integration from
/// `cfg.seed`, followed by a Newton polish of the undamped equations.
pub fn tm_steady(params: &TMParams, cfg: &TmSteadyConfig) -> Result<TmSteady> {
    let [s1, s2] = cfg.seed;
    if s1 * s1 + s2 * s2 >= 1.0 {
        return Err(Error::OccupationExhausted {
            occupation: s1 * s1 + s2 * s2,
        });
    }
    let (b1, b2) = (Complex64::new(s1, 0.0), Complex64::new(s2, 0.0));
    let init = TMState::new(b1, b2, slaved_alpha(b1, b2, params));
    tm_steady_from(params, init, cfg)
}

pub fn tm_steady_from(params: &TMParams, init: TMState, cfg: &TmSteadyConfig) -> Result<TmSteady> {
    if !(cfg.dt > 0.0) || !(cfg.tol > 0.0) {
        return Err(Error::InvalidParameter("tm_steady needs positive dt and tol".into()));
    }
    aux(&init, params)?;
    let mut st = init;
    let mut steps = 0;
    let stationary = |st: &TMState| -> Result<f64> {
        let mut s = *st;
        if cfg.slave_cavity {
            s.alpha = slaved_alpha(s.beta1, s.beta2, params);
        }
        tm_residual(&s, params)
    };
    let mut residual = stationary(&st)?;
    while steps < cfg.max_steps && residual >= cfg.tol {
        let next = match rk4_step(&st, cfg.dt, |s| flow_derivative(s, params, cfg)) {
            Ok(n) if n.is_finite() => n,
            _ => break,
        };
        st = next;
        steps += 1;
        residual = match stationary(&st) {
            Ok(r) => r,
            Err(_) => break,
        };
    }
    if cfg.slave_cavity {
        st.alpha = slaved_alpha(st.beta1, st.beta2, params);
    }
    if cfg.newton && st.occupation() > 0.0 {
        st = newton_polish(st, params);
    }
    let residual = tm_residual(&st, params).unwrap_or(f64::INFINITY);
    Ok(TmSteady {
        state: st,
        converged: residual < cfg.tol.max(1e-9),
        residual,
        steps,
    })
}

/// Plain fourth-order Runge-Kutta integration of [`tm_rhs`]; returns the
/// states at every `stride`-th step (the initial state first).
pub fn tm_integrate(
    init: TMState,
    params: &TMParams,
    dt: f64,
    n_steps: usize,
    stride: usize,
) -> Result<Vec<(f64, TMState)>> {
    if stride == 0 || !(dt > 0.0) {
        return Err(Error::InvalidParameter("dt and stride must be positive".into()));
    }
    let mut out = vec![(0.0, init)];
    let mut st = init;
    for step in 1..=n_steps {
        st = rk4_step(&st, dt, |s| tm_rhs(s, params))?;
        if !st.is_finite() {
            return Err(Error::NonFinite {
                step,
                what: "three-mode state",
            });
        }
        if step % stride == 0 {
            out.push((step as f64 * dt, st));
        }
    }
    Ok(out)
}

/// Wirtinger derivatives `(dF/dy, dF/dy*)` of the three forces with respect
/// to `y` in `(a, b1, b2)`.
fn wirtinger(st: &TMState, p: &TMParams) -> Result<[[(Complex64, Complex64); 3]; 3]> {
    let a = aux(st, p)?;
    let s = a.s;
    let s3 = s * s * s;
    let (b1, b2) = (st.beta1, st.beta2);
    let c = |v: f64| Complex64::new(v, 0.0);
    let dg_da = p.mu1 * a.x1 + p.mu2 * a.x2 * a.rot;
    let dg_dac = p.mu1 * a.x1 + p.mu2 * a.x2 * a.rot.conj();
    let w = dg_dac;

    // force j, with own coupling m and own cavity quadrature amplitude q
    let atom = |bj: Complex64, bk: Complex64, m: f64, q: f64, mk: f64, qk: f64, phase: Complex64| {
        let g = a.g;
        let d_self = c(1.0) - m * q * (bj + bj.conj()) / (2.0 * s) - g / (2.0 * s)
            - g * bj.norm_sqr() / (4.0 * s3);
        let d_self_c = -m * q * bj / s - g * bj * bj / (4.0 * s3);
        let d_other = -m * q * bk.conj() / (2.0 * s) - mk * qk * bj / (2.0 * s)
            - g * bj * bk.conj() / (4.0 * s3);
        let d_other_c = -m * q * bk / (2.0 * s) - mk * qk * bj / (2.0 * s) - g * bj * bk / (4.0 * s3);
        let d_a = m * s * phase - bj * dg_da / (2.0 * s);
        let d_ac = m * s * phase.conj() - bj * dg_dac / (2.0 * s);
        ((d_a, d_ac), (d_self, d_self_c), (d_other, d_other_c))
    };
    let one = c(1.0);
    let (f1a, f1s, f1o) = atom(b1, b2, p.mu1, a.a1, p.mu2, a.a2, one);
    let (f2a, f2s, f2o) = atom(b2, b1, p.mu2, a.a2, p.mu1, a.a1, a.rot);
    let c1 = c(p.mu1);
    let c2 = p.mu2 * a.rot.conj();
    let fa_b1 = (-b1.conj() * w / (2.0 * s) + s * c1, -b1 * w / (2.0 * s) + s * c1);
    let fa_b2 = (-b2.conj() * w / (2.0 * s) + s * c2, -b2 * w / (2.0 * s) + s * c2);
    Ok([
        [(p.cavity(), Complex64::default()), fa_b1, fa_b2],
        [f1a, f1s, f1o],
        [f2a, f2o, f2s],
    ])
}

/// Linearization `i d/dt x = M x` about a stationary state in the variables
/// `(a, a*, b1, b1*, b2, b2*)`.
pub fn tm_fluctuation_matrix(state: &TMState, params: &TMParams) -> Result<[[Complex64; 6]; 6]> {
    let residual = tm_residual(state, params)?;
    if residual > 1e-6 {
        return Err(Error::NotSteady { residual });
    }
    tm_linearization(state, params)
}

fn tm_linearization(state: &TMState, params: &TMParams) -> Result<[[Complex64; 6]; 6]> {
    let d = wirtinger(state, params)?;
    let mut m = [[Complex64::default(); 6]; 6];
    for x in 0..3 {
        for y in 0..3 {
            let (dy, dyc) = d[x][y];
            m[2 * x][2 * y] = dy;
            m[2 * x][2 * y + 1] = dyc;
            m[2 * x + 1][2 * y] = -dyc.conj();
            m[2 * x + 1][2 * y + 1] = -dy.conj();
        }
    }
    Ok(m)
}

/// Ascending coefficients of `det(w I - A)` by the Faddeev-LeVerrier
/// recursion.
pub fn characteristic_polynomial<const N: usize>(a: &[[Complex64; N]; N]) -> Vec<Complex64> {
    let mut coeffs = vec![Complex64::default(); N + 1];
    coeffs[N] = Complex64::new(1.0, 0.0);
    let mut mk = [[Complex64::default(); N]; N];
    for k in 1..=N {
        // M_k = A M_{k-1} + c_{N-k+1} I
        let mut next = [[Complex64::default(); N]; N];
        for i in 0..N {
            for j in 0..N {
                let mut acc = Complex64::default();
                for l in 0..N {
                    acc += a[i][l] * mk[l][j];
                }
                next[i][j] = acc;
            }
            next[i][i] += coeffs[N - k + 1];
        }
        mk = next;
        let mut tr = Complex64::default();
        for i in 0..N {
            for l in 0..N {
                tr += a[i][l] * mk[l][i];
            }
        }
        coeffs[N - k] = -tr / k as f64;
    }
    coeffs
}

/// `tr (w - M)^{-1}`, the logarithmic derivative of `det(w - M)`.
fn log_det_derivative(m: &Matrix6<Complex64>, w: Complex64) -> Option<Complex64> {
    let inv = (Matrix6::from_diagonal_element(w) - m).try_inverse()?;
    let tr = inv.trace();
    (tr.re.is_finite() && tr.im.is_finite() && tr.norm() > 0.0).then_some(tr)
}

/// Newton iteration `w <- w - mult / tr (w - M)^{-1}` for a root of
/// multiplicity `mult`; `None` unless it settles to rounding level.
fn newton_on_det(m: &Matrix6<Complex64>, w0: Complex64, mult: f64) -> Option<Complex64> {
    let reach = 1e-3 * (1.0 + w0.norm());
    let mut w = w0;
    let mut last = f64::INFINITY;
    for _ in 0..30 {
        let step = mult / log_det_derivative(m, w)?;
        if step.norm() <= 1e-14 * (1.0 + w.norm()) {
            return Some(w - step);
        }
        if step.norm() >= last || (w - step - w0).norm() > reach {
            return None;
        }
        w -= step;
        last = step.norm();
    }
    None
}

/// The trace-power recursion loses accuracy `~ eps |M|^6` in the low
/// coefficients when the cavity and recoil scales are far apart, so the
/// polynomial roots are refined against `det(w - M)` directly. Near-coincident
/// roots are treated as one multiple root first; roots that do not settle
/// keep their polynomial value.
fn polish_eigenvalues(m: &Matrix6<Complex64>, roots: &mut [Complex64]) {
    let n = roots.len();
    let mut done = vec![false; n];
    for i in 0..n {
        if done[i] {
            continue;
        }
        let near = 1e-3 * (1.0 + roots[i].norm());
        let group: Vec<usize> = (i..n).filter(|&j| !done[j] && (roots[j] - roots[i]).norm() < near).collect();
        if group.len() > 1 {
            let centroid = group.iter().map(|&j| roots[j]).sum::<Complex64>() / group.len() as f64;
            if let Some(w) = newton_on_det(m, centroid, group.len() as f64) {
                for &j in &group {
                    roots[j] = w;
                    done[j] = true;
                }
                continue;
            }
        }
        for &j in &group {
            if let Some(w) = newton_on_det(m, roots[j], 1.0) {
                roots[j] = w;
            }
            done[j] = true;
        }
    }
}

/// Spectrum of [`tm_fluctuation_matrix`] and its stability verdict.
pub fn tm_spectrum(state: &TMState, params: &TMParams) -> Result<(Spectrum, StabilityVerdict)> {
    let m = tm_fluctuation_matrix(state, params)?;
    let mut roots = poly_roots(&characteristic_polynomial(&m), &RootConfig::default())?;
    polish_eigenvalues(&Matrix6::from_fn(|i, j| m[i][j]), &mut roots);
    let spec = Spectrum {
        roots,
        source: SpectrumSource::ThreeMode6,
    };
    let verdict = classify_stability(&spec, None);
    Ok((spec, verdict))
}

/// Side-by-side outcome of the continuum and three-mode models at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub full: CellRecord,
    pub tm_label: PhaseLabel,
    pub tm_state: TMState,
    pub tm_order: OrderParameters,
    pub tm_converged: bool,
    /// `|Theta1|` and `|Theta2|` differences (three-mode minus full).
    pub delta_theta1: f64,
    pub delta_theta2: f64,
}

impl Comparison {
    pub fn labels_agree(&self) -> bool {
        self.full.label == self.tm_label
    }
}

/// Run both models at the same physical parameters and compare labels and
/// order-parameter magnitudes.
pub fn compare_with_full(
    params: &ModelParams,
    grid: &Grid,
    cfg: &ClassifyConfig,
    tm_cfg: &TmSteadyConfig,
) -> Result<Comparison> {
    let full = classify_point(params, grid, cfg)?;
    let tp = TMParams::from_model(params);
    let tm = tm_steady(&tp, tm_cfg)?;
    let tm_order = tm.state.order();
    // a fixed point that M_T marks as growing is not a realized phase
    let tm_stable = tm.converged
        && tm_spectrum(&tm.state, &tp).map_or(false, |(_, v)| v.stable);
    let tm_label = if crate::stability::instability_criterion(params)? || !tm_stable {
        PhaseLabel::UST
    } else {
        PhaseLabel::from_order(tm_order, cfg.order_tol, cfg.dw_purity_tol)
    };
    let (f1, f2) = if full.label == PhaseLabel::UST {
        (f64::NAN, f64::NAN)
    } else {
        (full.theta1.abs(), full.theta2.abs())
    };
    Ok(Comparison {
        delta_theta1: tm_order.theta1.abs() - f1,
        delta_theta2: tm_order.theta2.abs() - f2,
        full,
        tm_label,
        tm_state: tm.state,
        tm_order,
        tm_converged: tm.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn closed(m1: f64, m2: f64) -> TMParams {
        TMParams::new(m1, m2, FRAC_PI_2, -300.0, 0.0).unwrap()
    }

    #[test]
    fn rhs_examples() {
        let p = TMParams::new(3.0, 4.0, 0.7, -300.0, 200.0).unwrap();
        let d = tm_rhs(&TMState::default(), &p).unwrap();
        assert_eq!(d, TMState::default());

        let p = TMParams::new(0.0, 0.0, 0.7, -300.0, 200.0).unwrap();
        let d = tm_rhs(&TMState::new(Complex64::default(), Complex64::default(), Complex64::new(1.0, 0.0)), &p).unwrap();
        assert_abs_diff_eq!((d.alpha - Complex64::new(-200.0, -300.0)).norm(), 0.0, epsilon = 1e-12);

        let full = TMState::new(Complex64::new(0.8, 0.0), Complex64::new(0.6, 0.0), Complex64::default());
        assert!(matches!(tm_rhs(&full, &p), Err(Error::OccupationExhausted { .. })));
    }

    #[test]
    fn analytic_branches() {
        let mc = closed(0.0, 0.0).critical_coupling();
        assert_abs_diff_eq!(mc, 300f64.sqrt() / 2.0);
        assert_eq!(tm_analytic(&closed(0.5 * mc, 0.5 * mc)).unwrap(), TmBranch::NP);
        let b = tm_analytic(&closed(2.0 * mc, 0.5 * mc)).unwrap();
        assert_abs_diff_eq!(b.populations().0, 0.375, epsilon = 1e-15);
        let b = tm_analytic(&closed(2.0 * mc, 2.0 * mc)).unwrap();
        assert!(matches!(b, TmBranch::MDW { total } if (total - 0.375).abs() < 1e-15));
        assert!(tm_analytic(&TMParams::new(1.0, 1.0, 0.3, -300.0, 0.0).unwrap()).is_err());

        for (m1, m2, split) in [(2.0, 0.5, 0.0), (0.5, 2.0, 0.0), (2.0, 2.0, 0.6), (0.3, 0.2, 0.0), (1.5, 1.5, 1.1)] {
            let p = closed(m1 * mc, m2 * mc);
            let st = tm_analytic_state(&p, split).unwrap();
            assert!(tm_residual(&st, &p).unwrap() < 1e-10);
        }
        // onset continuity
        let b = tm_analytic(&closed(mc * (1.0 + 1e-4), 0.0)).unwrap();
        assert!(b.populations().0 < 1e-3);
    }

    #[test]
    fn wirtinger_matches_finite_differences() {
        let p = TMParams::new(9.0, 6.0, 0.9, -300.0, 200.0).unwrap();
        let st = TMState::new(Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.25), Complex64::new(0.05, -0.02));
        let m = tm_linearization(&st, &p).unwrap();
        let h = 1e-6;
        let f = |s: &TMState| {
            let f = forces(s, &p).unwrap();
            [f.fa, f.f1, f.f2]
        };
        let get = |s: &TMState, k: usize| [s.alpha, s.beta1, s.beta2][k];
        let set = |s: &mut TMState, k: usize, v: Complex64| match k {
            0 => s.alpha = v,
            1 => s.beta1 = v,
            _ => s.beta2 = v,
        };
        for y in 0..3 {
            for dir in [Complex64::new(1.0, 0.0), I] {
                let mut sp = st;
                let mut sm = st;
                set(&mut sp, y, get(&st, y) + h * dir);
                set(&mut sm, y, get(&st, y) - h * dir);
                let (fp, fm) = (f(&sp), f(&sm));
                for x in 0..3 {
                    let fd = (fp[x] - fm[x]) / (2.0 * h);
                    // dF = dF/dy dy + dF/dy* dy*
                    let an = m[2 * x][2 * y] * dir + m[2 * x][2 * y + 1] * dir.conj();
                    assert!((fd - an).norm() < 1e-6 * (1.0 + an.norm()), "x{x} y{y}: {fd} vs {an}");
                }
            }
        }
    }

    #[test]
    fn faddeev_leverrier_small() {
        let c = |r: f64| Complex64::new(r, 0.0);
        let a = [[c(2.0), c(1.0)], [c(0.0), c(3.0)]];
        let p = characteristic_polynomial(&a);
        // (w - 2)(w - 3) = w^2 - 5 w + 6
        assert_eq!(p, vec![c(6.0), c(-5.0), c(1.0)]);
    }

    #[test]
    fn steady_reproduces_dw1_population() {
        let mc = closed(0.0, 0.0).critical_coupling();
        let p = closed(2.0 * mc, 0.0);
        let s = tm_steady(&p, &TmSteadyConfig::default()).unwrap();
        assert!(s.converged, "{s:?}");
        assert_abs_diff_eq!(s.state.p1(), 0.375, epsilon = 1e-8);
        assert!(s.state.p2() < 1e-12);

        let s = tm_steady(&closed(0.7 * mc, 0.9 * mc), &TmSteadyConfig::default()).unwrap();
        assert!(s.converged);
        assert!(s.state.p1() < 1e-12 && s.state.p2() < 1e-12);
    }

    #[test]
    fn conserved_quantity_examples() {
        assert_eq!(tm_conserved_quantity(&TMState::default()), 0.0);
        let b = Complex64::new(0.3, 0.0);
        assert_eq!(tm_conserved_quantity(&TMState::new(b, b, Complex64::default())), 0.0);
    }
}
