//! Real-time evolution of the coupled condensate/cavity equations, steady
//! states by imaginary-time relaxation with the cavity slaved to the atoms,
//! and limit-cycle detection on cavity time series.
//!
//! Equations of motion (code units):
//!
//! ```text
//! i d(alpha)/dt = (-delta_c - i kappa) alpha + lambda1 Theta1 + lambda2 e^{-i theta} Theta2
//! i d(psi)/dt   = [-d^2/dx^2 + V(x)] psi
//! ```
//!
//! with `V` from [`effective_potential`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    cavity_source, order_parameters_unchecked, potential_amplitudes, CavityAmplitude,
    CondensateField, Grid, ModelParams, OrderParameters,
};
use crate::spectral::Fourier;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Minimum post-transient span accepted by [`detect_limit_cycle`].
pub const MIN_CYCLE_WINDOW: f64 = 200.0;

/// Small-amplitude trial state
/// `psi ~ 1/sqrt(2pi) + eps1 cos(x)/sqrt(pi) + eps2 sin(x)/sqrt(pi)`.
pub fn seed_state(eps1: f64, eps2: f64, grid: &Grid) -> CondensateField {
    let a0 = 1.0 / std::f64::consts::TAU.sqrt();
    let a1 = 1.0 / std::f64::consts::PI.sqrt();
    CondensateField::from_fn(grid, |x| {
        Complex64::new(a0 + eps1 * a1 * x.cos() + eps2 * a1 * x.sin(), 0.0)
    })
    .normalized(grid)
    .expect("seed state has positive norm for small eps")
}

/// Precomputed tables shared by the solvers for one grid.
#[derive(Debug, Clone)]
pub(crate) struct Workspace {
    pub grid: Grid,
    pub fourier: Fourier,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
    pub k2: Vec<f64>,
}

impl Workspace {
    pub fn new(grid: &Grid) -> Self {
        let fourier = Fourier::new(grid.num_points());
        let (cos, sin) = grid.cos_sin_tables();
        let k2 = fourier.wavenumbers().map(|k| k * k).collect();
        Self {
            grid: *grid,
            fourier,
            cos,
            sin,
            k2,
        }
    }

    fn dx(&self) -> f64 {
        self.grid.spacing()
    }

    fn order(&self, psi: &[Complex64]) -> OrderParameters {
        let (mut c, mut s) = (0.0, 0.0);
        for ((a, cj), sj) in psi.iter().zip(&self.cos).zip(&self.sin) {
            let n = a.norm_sqr();
            c += n * cj;
            s += n * sj;
        }
        OrderParameters::new(c * self.dx(), s * self.dx())
    }

    fn potential(&self, alpha: Complex64, params: &ModelParams, out: &mut [f64]) {
        let (a1, a2) = potential_amplitudes(alpha, params);
        for ((v, c), s) in out.iter_mut().zip(&self.cos).zip(&self.sin) {
            *v = a1 * c + a2 * s + params.v1 * c * c + params.v2 * s * s;
        }
    }

    /// `dx * sum |psi|^2` from Fourier coefficients.
    fn spectral_norm(&self, psi_hat: &[Complex64]) -> f64 {
        let n = psi_hat.len() as f64;
        psi_hat.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.dx() / n
    }
}

/// Norms of the two stationarity conditions for a candidate state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyResidual {
    /// `|(-delta_c - i kappa) alpha + S|`.
    pub cavity: f64,
    /// `|| (H - mu) psi ||_2` with `mu = <psi|H|psi>`.
    pub atomic: f64,
    pub mu: f64,
}

impl SteadyResidual {
    pub fn norm(&self) -> f64 {
        self.cavity.hypot(self.atomic)
    }
}

/// Residual of the stationary mean-field equations (`d alpha/dt = 0`,
/// `H psi = mu psi`) at the given state.
pub fn steady_residual(
    alpha: CavityAmplitude,
    psi: &CondensateField,
    params: &ModelParams,
    grid: &Grid,
) -> Result<SteadyResidual> {
    psi.check(grid)?;
    let ws = Workspace::new(grid);
    let op = ws.order(psi.amplitudes());
    let source = cavity_source(op, params);
    let cavity = (Complex64::new(-params.delta_c, -params.kappa) * alpha.0 + source).norm();

    let mut v = vec![0.0; grid.num_points()];
    ws.potential(alpha.0, params, &mut v);
    let mut h = ws.fourier.laplacian_neg(psi.amplitudes());
    for ((h, p), v) in h.iter_mut().zip(psi.amplitudes()).zip(&v) {
        *h += p * v;
    }
    let dx = grid.spacing();
    let mu: f64 = psi
        .amplitudes()
        .iter()
        .zip(&h)
        .map(|(p, h)| (p.conj() * h).re)
        .sum::<f64>()
        * dx;
    let atomic = (h
        .iter()
        .zip(psi.amplitudes())
        .map(|(h, p)| (h - mu * p).norm_sqr())
        .sum::<f64>()
        * dx)
        .sqrt();
    Ok(SteadyResidual { cavity, atomic, mu })
}

/// Settings for imaginary-time relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RelaxConfig {
    pub d_tau: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Magnitude of the two trial seeds `(eps, +-eps)`.
    pub seed_eps: f64,
}

impl Default for RelaxConfig {
    fn default() -> Self {
        Self {
            d_tau: 1e-3,
            tol: 1e-9,
            max_iter: 500_000,
            seed_eps: 0.01,
        }
    }
}

impl RelaxConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_tau > 0.0 && self.d_tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("d_tau must be positive (got {})", self.d_tau)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be positive (got {})", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Stationary state of the adiabatically eliminated problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub psi0: CondensateField,
    pub alpha0: CavityAmplitude,
    pub mu: f64,
    pub order: OrderParameters,
    pub converged: bool,
    pub iterations: usize,
    /// Last step change `||psi_{n+1} - psi_n|| / d_tau`.
    pub residual: f64,
}

/// One relaxation step: the preconditioned gradient update
/// `psi <- normalize(psi - d_tau P (H[psi] - mu) psi)` with
/// `P = (1 + d_tau k^2)^{-1}`.
///
/// The kinetic preconditioner keeps the explicit step stable for any
/// `d_tau` while leaving the low-`k` modes on the ordinary imaginary-time
/// flow to first order; fixed points satisfy `H psi = mu psi` exactly.
struct Relaxer<'a> {
    ws: &'a Workspace,
    params: &'a ModelParams,
    response: Complex64,
    d_tau: f64,
    precond: Vec<f64>,
    psi_hat: Vec<Complex64>,
    psi: Vec<Complex64>,
    scratch: Vec<Complex64>,
    v: Vec<f64>,
}

impl<'a> Relaxer<'a> {
    fn new(ws: &'a Workspace, params: &'a ModelParams, init: &[Complex64], d_tau: f64) -> Result<Self> {
        let mut psi_hat = init.to_vec();
        ws.fourier.forward(&mut psi_hat);
        let n = init.len();
        Ok(Self {
            ws,
            params,
            response: params.cavity_response()?,
            d_tau,
            precond: ws.k2.iter().map(|k2| 1.0 / (1.0 + d_tau * k2)).collect(),
            psi_hat,
            psi: init.to_vec(),
            scratch: vec![Complex64::default(); n],
            v: vec![0.0; n],
        })
    }

    fn alpha(&self) -> Complex64 {
        self.response * cavity_source(self.ws.order(&self.psi), self.params)
    }

    /// Advance one step; returns `(||delta psi||, mu)` before the update.
    fn step(&mut self) -> (f64, f64) {
        let ws = self.ws;
        let alpha = self.alpha();
        ws.potential(alpha, self.params, &mut self.v);
        for ((s, p), v) in self.scratch.iter_mut().zip(&self.psi).zip(&self.v) {
            *s = p * v;
        }
        ws.fourier.forward(&mut self.scratch);
        let n = self.psi.len() as f64;
        let dx = ws.dx();
        // mu = <psi|H|psi> via Parseval
        let mut mu = 0.0;
        for ((h, p), k2) in self.scratch.iter_mut().zip(&self.psi_hat).zip(&ws.k2) {
            *h += p * k2;
            mu += (p.conj() * *h).re;
        }
        mu *= dx / n;
        let mut norm = 0.0;
        for ((h, p), pc) in self
            .scratch
            .iter_mut()
            .zip(self.psi_hat.iter_mut())
            .zip(&self.precond)
        {
            let upd = *p - self.d_tau * pc * (*h - mu * *p);
            *h = *p; // keep the old coefficient for the step size
            *p = upd;
            norm += upd.norm_sqr();
        }
        let scale = 1.0 / (norm * dx / n).sqrt();
        let mut change = 0.0;
        for (p, old) in self.psi_hat.iter_mut().zip(&self.scratch) {
            *p *= scale;
            change += (*p - old).norm_sqr();
        }
        self.psi.copy_from_slice(&self.psi_hat);
        ws.fourier.inverse(&mut self.psi);
        ((change * dx / n).sqrt(), mu)
    }

    fn mu(&mut self) -> f64 {
        let alpha = self.alpha();
        self.ws.potential(alpha, self.params, &mut self.v);
        let n = self.psi.len() as f64;
        let dx = self.ws.dx();
        let kin: f64 = self
            .psi_hat
            .iter()
            .zip(&self.ws.k2)
            .map(|(p, k2)| k2 * p.norm_sqr())
            .sum::<f64>()
            * dx
            / n;
        let pot: f64 = self.psi.iter().zip(&self.v).map(|(p, v)| v * p.norm_sqr()).sum::<f64>() * dx;
        kin + pot
    }
}

/// Imaginary-time relaxation toward a stationary state with the cavity
/// amplitude slaved to the instantaneous order parameters.
///
/// Non-convergence within `max_iter` is not an error: the returned state has
/// `converged == false` and carries the last step change.
pub fn relax_imaginary_time(
    params: &ModelParams,
    grid: &Grid,
    init: &CondensateField,
    cfg: &RelaxConfig,
) -> Result<SteadyState> {
    params.validate()?;
    cfg.validate()?;
    init.check(grid)?;
    let ws = Workspace::new(grid);
    relax_with(&ws, params, init, cfg)
}

pub(crate) fn relax_with(
    ws: &Workspace,
    params: &ModelParams,
    init: &CondensateField,
    cfg: &RelaxConfig,
) -> Result<SteadyState> {
    let mut r = Relaxer::new(ws, params, init.amplitudes(), cfg.d_tau)?;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        let (change, _) = r.step();
        iterations += 1;
        residual = change / cfg.d_tau;
        if !residual.is_finite() {
            return Err(Error::NonFinite {
                step: iterations,
                what: "relaxation",
            });
        }
        if residual < cfg.tol {
            converged = true;
            break;
        }
    }
    let mu = r.mu();
    let order = ws.order(&r.psi);
    let alpha0 = CavityAmplitude(r.response * cavity_source(order, params));
    Ok(SteadyState {
        psi0: CondensateField::from_amplitudes(r.psi),
        alpha0,
        mu,
        order,
        converged,
        iterations,
        residual,
    })
}

/// One relaxation step from `psi`, exposed for linearization checks.
pub fn relax_step(
    params: &ModelParams,
    grid: &Grid,
    psi: &CondensateField,
    d_tau: f64,
) -> Result<CondensateField> {
    psi.check(grid)?;
    let ws = Workspace::new(grid);
    let mut r = Relaxer::new(&ws, params, psi.amplitudes(), d_tau)?;
    r.step();
    Ok(CondensateField::from_amplitudes(r.psi))
}

/// Relax from the two default seeds `(eps, eps)` and `(eps, -eps)` and keep
/// the lower chemical potential (ties go to smaller `|Theta2|`).
///
/// When the first seed relaxes to the normal phase the second one is
/// skipped: both seeds lie in the basin of the uniform state then.
pub fn find_steady_state(
    params: &ModelParams,
    grid: &Grid,
    cfg: &RelaxConfig,
) -> Result<SteadyState> {
    params.validate()?;
    cfg.validate()?;
    let ws = Workspace::new(grid);
    find_steady_with(&ws, params, cfg, 1e-3)
}

pub(crate) fn find_steady_with(
    ws: &Workspace,
    params: &ModelParams,
    cfg: &RelaxConfig,
    order_tol: f64,
) -> Result<SteadyState> {
    let eps = cfg.seed_eps;
    let first = relax_with(ws, params, &seed_state(eps, eps, &ws.grid), cfg)?;
    let is_np = first.order.theta1.abs() < order_tol && first.order.theta2.abs() < order_tol;
    if first.converged && is_np {
        return Ok(first);
    }
    let second = relax_with(ws, params, &seed_state(eps, -eps, &ws.grid), cfg)?;
    Ok(pick_lower(first, second))
}

fn pick_lower(a: SteadyState, b: SteadyState) -> SteadyState {
    match (a.converged, b.converged) {
        (true, false) => return a,
        (false, true) => return b,
        _ => {}
    }
    let scale = 1e-9 * a.mu.abs().max(b.mu.abs()).max(1.0);
    if (a.mu - b.mu).abs() <= scale {
        if b.order.theta2.abs() < a.order.theta2.abs() {
            b
        } else {
            a
        }
    } else if b.mu < a.mu {
        b
    } else {
        a
    }
}

/// Settings for real-time evolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub dt: f64,
    pub n_steps: usize,
    /// Record every `stride`-th step (the initial state is always recorded).
    pub stride: usize,
    /// Also store the full condensate at every record.
    #[serde(default)]
    pub keep_fields: bool,
}

impl EvolveConfig {
    /// Covers `duration` with the default step and roughly `samples` records.
    pub fn for_duration(params: &ModelParams, duration: f64, samples: usize) -> Self {
        let dt = default_time_step(params);
        let n_steps = (duration / dt).ceil() as usize;
        Self {
            dt,
            n_steps,
            stride: (n_steps / samples.max(1)).max(1),
            keep_fields: false,
        }
    }
}

/// Default step `0.1 / max(|delta_c| + kappa, 1)`.
///
/// The cavity rotation/decay and the kinetic term are integrated exactly by
/// the exponential integrator, so the step only has to resolve the coupling
/// between them, whose fastest scale is the cavity frequency.
pub fn default_time_step(params: &ModelParams) -> f64 {
    0.1 / (params.delta_c.abs() + params.kappa).max(1.0)
}

/// One recorded sample of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub alpha: Complex64,
    pub theta1: f64,
    pub theta2: f64,
    pub norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi: Option<Vec<Complex64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub final_psi: CondensateField,
    pub final_alpha: CavityAmplitude,
}

impl Trajectory {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    /// Build a trajectory from a bare cavity time series (synthetic input).
    pub fn from_cavity_series(times: &[f64], alpha: &[Complex64], grid: &Grid) -> Self {
        let samples = times
            .iter()
            .zip(alpha)
            .map(|(&t, &a)| TrajectorySample {
                t,
                alpha: a,
                theta1: 0.0,
                theta2: 0.0,
                norm: 1.0,
                psi: None,
            })
            .collect();
        Self {
            samples,
            final_psi: CondensateField::uniform(grid),
            final_alpha: CavityAmplitude(alpha.last().copied().unwrap_or_default()),
        }
    }
}

/// Coefficients of the fourth-order exponential time-differencing
/// Runge-Kutta scheme for one linear eigenvalue, computed by contour
/// averaging to avoid cancellation near zero.
#[derive(Debug, Clone, Copy)]
struct EtdCoeffs {
    e: Complex64,
    e2: Complex64,
    q: Complex64,
    f1: Complex64,
    f2: Complex64,
    f3: Complex64,
}

impl EtdCoeffs {
    const CONTOUR: usize = 32;

    fn new(c: Complex64, h: f64) -> Self {
        let z = c * h;
        let (mut q, mut f1, mut f2, mut f3) = (Complex64::default(), Complex64::default(), Complex64::default(), Complex64::default());
        let m = Self::CONTOUR as f64;
        for j in 0..Self::CONTOUR {
            let r = z + Complex64::from_polar(1.0, std::f64::consts::TAU * (j as f64 + 0.5) / m);
            let er = r.exp();
            let r2 = r * r;
            let r3 = r2 * r;
            q += ((r * 0.5).exp() - 1.0) / r;
            f1 += (-4.0 - r + er * (4.0 - 3.0 * r + r2)) / r3;
            f2 += (2.0 + r + er * (r - 2.0)) / r3;
            f3 += (-4.0 - 3.0 * r - r2 + er * (4.0 - r)) / r3;
        }
        let s = h / m;
        Self {
            e: z.exp(),
            e2: (z * 0.5).exp(),
            q: q * s,
            f1: f1 * s,
            f2: f2 * s,
            f3: f3 * s,
        }
    }
}

/// Integrates the coupled equations with ETDRK4: the kinetic term (in
/// Fourier space) and the cavity rotation/decay are treated exactly, the
/// atom-cavity coupling explicitly.
struct Integrator<'a> {
    ws: &'a Workspace,
    params: &'a ModelParams,
    psi_coeffs: Vec<EtdCoeffs>,
    alpha_coeffs: EtdCoeffs,
    buf: Vec<Complex64>,
    v: Vec<f64>,
}

#[derive(Clone)]
struct Stage {
    psi_hat: Vec<Complex64>,
    alpha: Complex64,
}

impl<'a> Integrator<'a> {
    fn new(ws: &'a Workspace, params: &'a ModelParams, dt: f64) -> Self {
        let mut psi_coeffs = Vec::with_capacity(ws.k2.len());
        // k^2 takes few distinct values; reuse coefficients per |k|
        let mut cache: Vec<(f64, EtdCoeffs)> = Vec::new();
        for &k2 in &ws.k2 {
            let c = match cache.iter().find(|(k, _)| *k == k2) {
                Some((_, c)) => *c,
                None => {
                    let c = EtdCoeffs::new(Complex64::new(0.0, -k2), dt);
                    cache.push((k2, c));
                    c
                }
            };
            psi_coeffs.push(c);
        }
        let n = ws.k2.len();
        Self {
            ws,
            params,
            psi_coeffs,
            alpha_coeffs: EtdCoeffs::new(Complex64::new(-params.kappa, params.delta_c), dt),
            buf: vec![Complex64::default(); n],
            v: vec![0.0; n],
        }
    }

    /// Nonlinear part: `(FFT(-i V psi), -i S)`.
    fn nonlinear(&mut self, s: &Stage, out: &mut Stage) -> OrderParameters {
        self.buf.copy_from_slice(&s.psi_hat);
        self.ws.fourier.inverse(&mut self.buf);
        let op = self.ws.order(&self.buf);
        self.ws.potential(s.alpha, self.params, &mut self.v);
        for (b, v) in self.buf.iter_mut().zip(&self.v) {
            *b *= Complex64::new(0.0, -v);
        }
        self.ws.fourier.forward(&mut self.buf);
        out.psi_hat.copy_from_slice(&self.buf);
        out.alpha = -I * cavity_source(op, self.params);
        op
    }

    fn step(&mut self, u: &mut Stage, st: &mut [Stage; 7]) {
        let [nu, a, na, b, nb, c, nc] = st;
        self.nonlinear(u, nu);
        let ac = self.alpha_coeffs;
        for j in 0..u.psi_hat.len() {
            let k = &self.psi_coeffs[j];
            a.psi_hat[j] = k.e2 * u.psi_hat[j] + k.q * nu.psi_hat[j];
        }
        a.alpha = ac.e2 * u.alpha + ac.q * nu.alpha;
        self.nonlinear(a, na);
        for j in 0..u.psi_hat.len() {
            let k = &self.psi_coeffs[j];
            b.psi_hat[j] = k.e2 * u.psi_hat[j] + k.q * na.psi_hat[j];
        }
        b.alpha = ac.e2 * u.alpha + ac.q * na.alpha;
        self.nonlinear(b, nb);
        for j in 0..u.psi_hat.len() {
            let k = &self.psi_coeffs[j];
            c.psi_hat[j] = k.e2 * a.psi_hat[j] + k.q * (2.0 * nb.psi_hat[j] - nu.psi_hat[j]);
        }
        c.alpha = ac.e2 * a.alpha + ac.q * (2.0 * nb.alpha - nu.alpha);
        self.nonlinear(c, nc);
        for j in 0..u.psi_hat.len() {
            let k = &self.psi_coeffs[j];
            u.psi_hat[j] = k.e * u.psi_hat[j]
                + k.f1 * nu.psi_hat[j]
                + 2.0 * k.f2 * (na.psi_hat[j] + nb.psi_hat[j])
                + k.f3 * nc.psi_hat[j];
        }
        u.alpha = ac.e * u.alpha
            + ac.f1 * nu.alpha
            + 2.0 * ac.f2 * (na.alpha + nb.alpha)
            + ac.f3 * nc.alpha;
    }
}

/// Real-time evolution of the coupled atom-cavity equations.
pub fn evolve_real_time(
    psi: &CondensateField,
    alpha: CavityAmplitude,
    params: &ModelParams,
    grid: &Grid,
    cfg: &EvolveConfig,
) -> Result<Trajectory> {
    params.validate()?;
    psi.check(grid)?;
    if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be positive (got {})", cfg.dt)));
    }
    if cfg.stride == 0 {
        return Err(Error::InvalidParameter("stride must be at least 1".into()));
    }
    if !(alpha.0.re.is_finite() && alpha.0.im.is_finite()) {
        return Err(Error::InvalidParameter("initial cavity amplitude is not finite".into()));
    }
    let ws = Workspace::new(grid);
    let mut integ = Integrator::new(&ws, params, cfg.dt);
    let n = grid.num_points();
    let mut u = Stage {
        psi_hat: psi.amplitudes().to_vec(),
        alpha: alpha.0,
    };
    ws.fourier.forward(&mut u.psi_hat);
    let blank = Stage {
        psi_hat: vec![Complex64::default(); n],
        alpha: Complex64::default(),
    };
    let mut stages: [Stage; 7] = std::array::from_fn(|_| blank.clone());
    let mut samples = Vec::with_capacity(cfg.n_steps / cfg.stride + 2);
    let mut field = vec![Complex64::default(); n];

    let mut record = |u: &Stage, step: usize, field: &mut Vec<Complex64>| -> Result<()> {
        field.copy_from_slice(&u.psi_hat);
        ws.fourier.inverse(field);
        let op = order_parameters_unchecked(field, grid);
        let norm = ws.spectral_norm(&u.psi_hat);
        if !norm.is_finite() || !op.theta1.is_finite() || !op.theta2.is_finite() {
            return Err(Error::NonFinite { step, what: "condensate" });
        }
        samples.push(TrajectorySample {
            t: step as f64 * cfg.dt,
            alpha: u.alpha,
            theta1: op.theta1,
            theta2: op.theta2,
            norm,
            psi: cfg.keep_fields.then(|| field.clone()),
        });
        Ok(())
    };

    record(&u, 0, &mut field)?;
    for step in 1..=cfg.n_steps {
        integ.step(&mut u, &mut stages);
        if !(u.alpha.re.is_finite() && u.alpha.im.is_finite()) || u.alpha.norm() > 1e150 {
            return Err(Error::NonFinite { step, what: "cavity amplitude" });
        }
        if step % cfg.stride == 0 || step == cfg.n_steps {
            record(&u, step, &mut field)?;
        }
    }
    field.copy_from_slice(&u.psi_hat);
    ws.fourier.inverse(&mut field);
    Ok(Trajectory {
        samples,
        final_psi: CondensateField::from_amplitudes(field),
        final_alpha: CavityAmplitude(u.alpha),
    })
}

/// Mean-field energy of the closed system (conserved for `kappa = 0`):
/// `-delta_c |alpha|^2 + <kin> + <V>`.
pub fn closed_energy(
    alpha: CavityAmplitude,
    psi: &CondensateField,
    params: &ModelParams,
    grid: &Grid,
) -> f64 {
    let fourier = Fourier::new(grid.num_points());
    let kin = fourier.kinetic_energy(psi.amplitudes(), grid.spacing());
    let v = crate::model::effective_potential(alpha, params, grid);
    let pot = grid.integrate(psi.density().zip(&v).map(|(n, v)| n * v));
    -params.delta_c * alpha.0.norm_sqr() + kin + pot
}

/// Which cavity observable carried the detected oscillation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CycleChannel {
    Modulus,
    Real,
    Imag,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitCycle {
    pub oscillatory: bool,
    /// Period of the dominant spectral peak, if any oscillation was found.
    pub period: Option<f64>,
    /// Half peak-to-peak excursion of the oscillating channel.
    pub amplitude: f64,
    pub channel: Option<CycleChannel>,
    /// Relative fluctuation `std / mean|alpha|` of `|alpha|` in the window.
    pub relative_std: f64,
}

/// Decide whether a trajectory settled on a persistent oscillation.
///
/// After dropping `transient_fraction` of the samples, a channel
/// (`|alpha|`, `Re alpha`, `Im alpha`) oscillates when its standard deviation
/// exceeds 1% of the mean `|alpha|`, and neither `mean|alpha|` nor the channel's
/// spread drops below 90% between the leading and trailing halves, and it
/// crosses its mean at least four times (two full periods; slow drifts
/// toward a fixed point cross at most once or twice). The
/// quadratures are included because on the translation-symmetric line the
/// unstable motion is a sliding density wave whose `|alpha|` is constant.
pub fn detect_limit_cycle(traj: &Trajectory, transient_fraction: f64) -> Result<LimitCycle> {
    if !(0.0..1.0).contains(&transient_fraction) {
        return Err(Error::InvalidParameter(format!(
            "transient fraction must lie in [0, 1) (got {transient_fraction})"
        )));
    }
    let n = traj.samples.len();
    let start = ((n as f64) * transient_fraction).floor() as usize;
    let window = &traj.samples[start.min(n)..];
    let span = match (window.first(), window.last()) {
        (Some(a), Some(b)) => b.t - a.t,
        _ => 0.0,
    };
    if span < MIN_CYCLE_WINDOW || window.len() < 8 {
        return Err(Error::WindowTooShort {
            span,
            required: MIN_CYCLE_WINDOW,
        });
    }
    let dt = span / (window.len() - 1) as f64;
    let modulus: Vec<f64> = window.iter().map(|s| s.alpha.norm()).collect();
    let re: Vec<f64> = window.iter().map(|s| s.alpha.re).collect();
    let im: Vec<f64> = window.iter().map(|s| s.alpha.im).collect();
    let half = window.len() / 2;
    let mean_abs = mean(&modulus);
    let lead_abs = mean(&modulus[..half]);
    let trail_abs = mean(&modulus[half..]);
    let relative_std = if mean_abs > 0.0 { std(&modulus) / mean_abs } else { 0.0 };

    let quiet = LimitCycle {
        oscillatory: false,
        period: None,
        amplitude: 0.0,
        channel: None,
        relative_std,
    };
    if !(mean_abs > f64::MIN_POSITIVE) || trail_abs < 0.9 * lead_abs {
        return Ok(quiet);
    }
    for (channel, series) in [
        (CycleChannel::Modulus, &modulus),
        (CycleChannel::Real, &re),
        (CycleChannel::Imag, &im),
    ] {
        let s = std(series);
        if s / mean_abs <= 0.01 {
            continue;
        }
        if std(&series[half..]) < 0.9 * std(&series[..half]) {
            continue;
        }
        if mean_crossings(series, 0.25 * s) < MIN_CROSSINGS {
            continue;
        }
        let (lo, hi) = series
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        return Ok(LimitCycle {
            oscillatory: true,
            period: dominant_period(series, dt),
            amplitude: 0.5 * (hi - lo),
            channel: Some(channel),
            relative_std,
        });
    }
    Ok(quiet)
}

const MIN_CROSSINGS: usize = 4;

/// Mean crossings with hysteresis `band`: a crossing counts once the series
/// has moved from below `mean - band` to above `mean + band` or back.
fn mean_crossings(x: &[f64], band: f64) -> usize {
    let m = mean(x);
    let mut side = 0i8;
    let mut count = 0;
    for &v in x {
        let now = if v > m + band {
            1
        } else if v < m - band {
            -1
        } else {
            continue;
        };
        if side != 0 && now != side {
            count += 1;
        }
        side = now;
    }
    count
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len().max(1) as f64
}

fn std(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len().max(1) as f64).sqrt()
}

/// Period of the strongest non-DC peak of the zero-padded spectrum, refined
/// by parabolic interpolation on log magnitudes.
fn dominant_period(series: &[f64], dt: f64) -> Option<f64> {
    let m = mean(series);
    let len = (series.len() * 8).next_power_of_two();
    let mut buf: Vec<Complex64> = series.iter().map(|x| Complex64::new(x - m, 0.0)).collect();
    buf.resize(len, Complex64::default());
    Fourier::new(len).forward(&mut buf);
    let mag: Vec<f64> = buf[..len / 2].iter().map(|c| c.norm()).collect();
    // skip the DC lobe of the zero-padded window
    let first = 8.min(mag.len().saturating_sub(1)).max(1);
    let (k, &peak) = mag
        .iter()
        .enumerate()
        .skip(first)
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    if !(peak > 0.0) {
        return None;
    }
    let mut kf = k as f64;
    if k > 0 && k + 1 < mag.len() {
        let (a, b, c) = (mag[k - 1].max(1e-300).ln(), peak.ln(), mag[k + 1].max(1e-300).ln());
        let den = a - 2.0 * b + c;
        if den.abs() > 0.0 {
            kf += 0.5 * (a - c) / den;
        }
    }
    Some(len as f64 * dt / kf)
}
