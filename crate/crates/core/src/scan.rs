//! Phase classification of single parameter points and parallel sweeps.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    detect_limit_cycle, evolve_real_time, find_steady_with, EvolveConfig, RelaxConfig, Workspace,
};
use crate::error::{Error, Result};
use crate::model::{Grid, ModelParams, PhaseLabel};
use crate::stability::{adiabatic_spectrum, classify_stability, instability_criterion};

/// Real-time confirmation of cells where relaxation stalls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsCheck {
    pub enabled: bool,
    pub duration: f64,
    pub transient_fraction: f64,
    pub samples: usize,
}

impl Default for DynamicsCheck {
    fn default() -> Self {
        Self {
            enabled: true,
            duration: 400.0,
            transient_fraction: 0.25,
            samples: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyConfig {
    /// `|Theta|` above which a density wave counts as excited.
    pub order_tol: f64,
    /// Minor order parameter below this still counts as a pure density wave.
    pub dw_purity_tol: f64,
    /// Order-parameter jump that marks a first-order crossing.
    pub jump_tol: f64,
    pub relax: RelaxConfig,
    pub dynamics: DynamicsCheck,
    /// Tolerance of the spectral stability test (default: scale-relative).
    pub stability_tol: Option<f64>,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            order_tol: 1e-3,
            dw_purity_tol: 1e-3,
            jump_tol: 0.05,
            // on the critical-angle diagonal the linearized step is a Jordan
            // block and convergence is algebraic; near threshold that needs
            // ~7.5e5 steps
            relax: RelaxConfig {
                d_tau: 0.1,
                tol: 1e-9,
                max_iter: 2_000_000,
                seed_eps: 0.01,
            },
            dynamics: DynamicsCheck::default(),
            stability_tol: None,
        }
    }
}

impl ClassifyConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.order_tol > 0.0
            && self.order_tol <= self.dw_purity_tol
            && self.dw_purity_tol <= self.jump_tol;
        if !ok {
            return Err(Error::InvalidParameter(
                "tolerances must satisfy 0 < order_tol <= dw_purity_tol <= jump_tol".into(),
            ));
        }
        self.relax.validate()
    }
}

/// Outcome at one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub lambda1: f64,
    pub lambda2: f64,
    pub theta: f64,
    pub label: PhaseLabel,
    /// Order parameters and cavity amplitude of the stationary state; NaN
    /// where no stationary state was computed.
    pub theta1: f64,
    pub theta2: f64,
    pub alpha_abs: f64,
    pub mu: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Largest `Im omega` of the adiabatic spectrum of the uniform state.
    pub growth: f64,
    pub diagnostic: Option<String>,
}

impl CellRecord {
    fn failed(params: &ModelParams, err: &Error) -> Self {
        Self {
            lambda1: params.lambda1,
            lambda2: params.lambda2,
            theta: params.theta,
            label: PhaseLabel::UST,
            theta1: f64::NAN,
            theta2: f64::NAN,
            alpha_abs: f64::NAN,
            mu: f64::NAN,
            converged: false,
            iterations: 0,
            growth: f64::NAN,
            diagnostic: Some(format!("error: {err}")),
        }
    }
}

/// Classify one point: closed-form instability first, then relaxation,
/// then (for stalled relaxations) a real-time check for a limit cycle.
pub fn classify_point(params: &ModelParams, grid: &Grid, cfg: &ClassifyConfig) -> Result<CellRecord> {
    cfg.validate()?;
    let ws = Workspace::new(grid);
    classify_with(&ws, params, cfg)
}

fn classify_with(ws: &Workspace, params: &ModelParams, cfg: &ClassifyConfig) -> Result<CellRecord> {
    params.validate()?;
    let spec = adiabatic_spectrum(params)?;
    let verdict = classify_stability(&spec, cfg.stability_tol);
    let mut rec = CellRecord {
        lambda1: params.lambda1,
        lambda2: params.lambda2,
        theta: params.theta,
        label: PhaseLabel::UST,
        theta1: f64::NAN,
        theta2: f64::NAN,
        alpha_abs: f64::NAN,
        mu: f64::NAN,
        converged: false,
        iterations: 0,
        growth: verdict.max_imag,
        diagnostic: None,
    };
    if instability_criterion(params)? {
        rec.diagnostic = Some("uniform state dynamically unstable".into());
        return Ok(rec);
    }
    let ss = find_steady_with(ws, params, &cfg.relax, cfg.order_tol)?;
    rec.theta1 = ss.order.theta1;
    rec.theta2 = ss.order.theta2;
    rec.alpha_abs = ss.alpha0.abs();
    rec.mu = ss.mu;
    rec.converged = ss.converged;
    rec.iterations = ss.iterations;
    rec.label = PhaseLabel::from_order(ss.order, cfg.order_tol, cfg.dw_purity_tol);
    if !ss.converged {
        if cfg.dynamics.enabled {
            let ev = EvolveConfig::for_duration(params, cfg.dynamics.duration, cfg.dynamics.samples);
            let traj = evolve_real_time(&ss.psi0, ss.alpha0, params, &ws.grid, &ev)?;
            let lc = detect_limit_cycle(&traj, cfg.dynamics.transient_fraction)?;
            if lc.oscillatory {
                rec.label = PhaseLabel::UST;
                rec.diagnostic = Some(format!(
                    "relaxation stalled; limit cycle with period {:?}",
                    lc.period
                ));
                return Ok(rec);
            }
            rec.diagnostic = Some(format!(
                "relaxation stalled (residual {:e}); dynamics settle",
                ss.residual
            ));
        } else {
            rec.diagnostic = Some(format!("relaxation stalled (residual {:e})", ss.residual));
        }
    }
    Ok(rec)
}

/// One swept parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(name: impl Into<String>, lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count == 0 || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter("axis needs a finite range and count >= 1".into()));
        }
        Ok(Self {
            name: name.into(),
            lo,
            hi,
            count,
        })
    }

    pub fn value(&self, i: usize) -> f64 {
        if self.count == 1 {
            self.lo
        } else {
            self.lo + (self.hi - self.lo) * i as f64 / (self.count - 1) as f64
        }
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(move |i| self.value(i))
    }

    pub fn step(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.hi - self.lo) / (self.count - 1) as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepKind {
    /// Axes `(lambda1, lambda2)`.
    Pumps,
    /// Axes `(theta, phi)` at fixed total pump.
    Angles { },
}

/// Classified two-parameter grid; cells are stored with the first axis
/// outermost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTable {
    pub kind: SweepKind,
    pub axes: [Axis; 2],
    pub base: ModelParams,
    pub cells: Vec<CellRecord>,
}

impl PhaseTable {
    pub fn cell(&self, i: usize, j: usize) -> &CellRecord {
        &self.cells[i * self.axes[1].count + j]
    }

    pub fn label(&self, i: usize, j: usize) -> PhaseLabel {
        self.cell(i, j).label
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.axes[0].count, self.axes[1].count)
    }

    pub fn count(&self, label: PhaseLabel) -> usize {
        self.cells.iter().filter(|c| c.label == label).count()
    }

    /// Cell-edge segments separating different labels, in axis coordinates
    /// (the label field is treated as piecewise constant per cell).
    pub fn boundary_segments(&self) -> Vec<BoundarySegment> {
        let (n0, n1) = self.shape();
        let (h0, h1) = (self.axes[0].step(), self.axes[1].step());
        let mut out = Vec::new();
        for i in 0..n0 {
            for j in 0..n1 {
                let here = self.label(i, j);
                let (x, y) = (self.axes[0].value(i), self.axes[1].value(j));
                if i + 1 < n0 && self.label(i + 1, j) != here {
                    let xm = x + 0.5 * h0;
                    out.push(BoundarySegment {
                        from: [xm, y - 0.5 * h1],
                        to: [xm, y + 0.5 * h1],
                        labels: [here, self.label(i + 1, j)],
                    });
                }
                if j + 1 < n1 && self.label(i, j + 1) != here {
                    let ym = y + 0.5 * h1;
                    out.push(BoundarySegment {
                        from: [x - 0.5 * h0, ym],
                        to: [x + 0.5 * h0, ym],
                        labels: [here, self.label(i, j + 1)],
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundarySegment {
    pub from: [f64; 2],
    pub to: [f64; 2],
    pub labels: [PhaseLabel; 2],
}

/// Progress callback: `(completed, total)`.
pub type Progress<'a> = &'a (dyn Fn(usize, usize) + Sync);

/// Classify a list of points in parallel; output order follows input order.
/// Failing cells are recorded with a diagnostic instead of aborting.
pub fn classify_points(
    points: &[ModelParams],
    grid: &Grid,
    cfg: &ClassifyConfig,
    progress: Option<Progress<'_>>,
) -> Result<Vec<CellRecord>> {
    cfg.validate()?;
    let ws = Workspace::new(grid);
    let done = AtomicUsize::new(0);
    let total = points.len();
    Ok(points
        .par_iter()
        .map(|p| {
            let rec = classify_with(&ws, p, cfg).unwrap_or_else(|e| CellRecord::failed(p, &e));
            let n = done.fetch_add(1, Ordering::Relaxed) + 1;
            if let Some(cb) = progress {
                cb(n, total);
            }
            rec
        })
        .collect())
}

/// Sweep the two pump strengths over inclusive ranges.
pub fn sweep_eta(
    base: &ModelParams,
    lambda1: (f64, f64),
    lambda2: (f64, f64),
    n1: usize,
    n2: usize,
    grid: &Grid,
    cfg: &ClassifyConfig,
    progress: Option<Progress<'_>>,
) -> Result<PhaseTable> {
    if lambda1.0 < 0.0 || lambda2.0 < 0.0 || lambda1.1 < 0.0 || lambda2.1 < 0.0 {
        return Err(Error::InvalidParameter("pump ranges must be non-negative".into()));
    }
    let axes = [
        Axis::new("lambda1", lambda1.0, lambda1.1, n1)?,
        Axis::new("lambda2", lambda2.0, lambda2.1, n2)?,
    ];
    let points: Vec<ModelParams> = axes[0]
        .values()
        .flat_map(|a| axes[1].values().map(move |b| base.with_pumps(a, b)))
        .collect();
    let cells = classify_points(&points, grid, cfg, progress)?;
    Ok(PhaseTable {
        kind: SweepKind::Pumps,
        axes,
        base: *base,
        cells,
    })
}

/// Sweep coupling angle and mixing angle at fixed total pump
/// (`lambda1 = eta cos(phi/2)`, `lambda2 = eta sin(phi/2)`).
pub fn sweep_theta_phi(
    base: &ModelParams,
    eta_total: f64,
    theta: (f64, f64),
    phi: (f64, f64),
    n1: usize,
    n2: usize,
    grid: &Grid,
    cfg: &ClassifyConfig,
    progress: Option<Progress<'_>>,
) -> Result<PhaseTable> {
    if !(eta_total > 0.0) {
        return Err(Error::InvalidParameter("total pump must be positive".into()));
    }
    let axes = [
        Axis::new("theta", theta.0, theta.1, n1)?,
        Axis::new("phi", phi.0, phi.1, n2)?,
    ];
    let mut points = Vec::with_capacity(n1 * n2);
    for th in axes[0].values() {
        for ph in axes[1].values() {
            let (s, c) = (0.5 * ph).sin_cos();
            let mut p = base.with_pumps((eta_total * c).max(0.0), (eta_total * s).max(0.0));
            // keep the raw angle so the table coordinates round-trip
            p.theta = th;
            points.push(p);
        }
    }
    let cells = classify_points(&points, grid, cfg, progress)?;
    Ok(PhaseTable {
        kind: SweepKind::Angles {},
        axes,
        base: *base,
        cells,
    })
}

/// Points evenly spaced on the segment from `a` to `b` (pumps only).
pub fn segment_points(base: &ModelParams, a: (f64, f64), b: (f64, f64), n: usize) -> Vec<ModelParams> {
    (0..n)
        .map(|k| {
            let t = if n < 2 { 0.0 } else { k as f64 / (n - 1) as f64 };
            base.with_pumps(a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransitionOrder {
    First,
    Second,
}

/// One boundary crossing along a path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    /// Index of the last cell before the crossing.
    pub index: usize,
    pub from: PhaseLabel,
    pub to: PhaseLabel,
    /// `max(| |Theta1| jump |, | |Theta2| jump |)` across the crossing pair.
    pub jump: f64,
    pub order: TransitionOrder,
}

/// Order of every label change along a path of classified cells.
///
/// Crossings into or out of UST have no order parameter and are skipped.
pub fn transition_order(path: &[CellRecord], jump_tol: f64) -> Result<Vec<Crossing>> {
    let mut out = Vec::new();
    for (k, w) in path.windows(2).enumerate() {
        let (a, b) = (&w[0], &w[1]);
        if a.label == b.label || a.label == PhaseLabel::UST || b.label == PhaseLabel::UST {
            continue;
        }
        let jump = (a.theta1.abs() - b.theta1.abs())
            .abs()
            .max((a.theta2.abs() - b.theta2.abs()).abs());
        out.push(Crossing {
            index: k,
            from: a.label,
            to: b.label,
            jump,
            order: if jump > jump_tol {
                TransitionOrder::First
            } else {
                TransitionOrder::Second
            },
        });
    }
    if out.is_empty() {
        Err(Error::NoCrossing)
    } else {
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn axis_values() {
        let a = Axis::new("x", 0.0, 30.0, 4).unwrap();
        assert_eq!(a.values().collect::<Vec<_>>(), vec![0.0, 10.0, 20.0, 30.0]);
        assert_eq!(Axis::new("x", 2.0, 5.0, 1).unwrap().value(0), 2.0);
        assert!(Axis::new("x", 0.0, 1.0, 0).is_err());
    }

    #[test]
    fn config_invariants() {
        assert!(ClassifyConfig::default().validate().is_ok());
        let bad = ClassifyConfig {
            order_tol: 0.1,
            ..ClassifyConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn criterion_cells_are_unstable() {
        let g = Grid::new(64).unwrap();
        let p = ModelParams::new(15.0, 15.0, FRAC_PI_2, -300.0, 200.0).unwrap();
        let r = classify_point(&p, &g, &ClassifyConfig::default()).unwrap();
        assert_eq!(r.label, PhaseLabel::UST);
        assert!(r.theta1.is_nan());
        assert!(r.growth > 0.0);
    }

    #[test]
    fn closed_system_single_pump() {
        let g = Grid::new(64).unwrap();
        let p = ModelParams::new(20.0, 5.0, FRAC_PI_2, -300.0, 0.0).unwrap();
        let r = classify_point(&p, &g, &ClassifyConfig::default()).unwrap();
        assert_eq!(r.label, PhaseLabel::DW1);
        let r = classify_point(&p.with_pumps(5.0, 20.0), &g, &ClassifyConfig::default()).unwrap();
        assert_eq!(r.label, PhaseLabel::DW2);
    }

    #[test]
    fn transition_order_on_synthetic_path() {
        let mk = |label, t1: f64, t2: f64| CellRecord {
            lambda1: 0.0,
            lambda2: 0.0,
            theta: 0.0,
            label,
            theta1: t1,
            theta2: t2,
            alpha_abs: 0.0,
            mu: 0.0,
            converged: true,
            iterations: 0,
            growth: 0.0,
            diagnostic: None,
        };
        let path = vec![
            mk(PhaseLabel::NP, 0.0, 0.0),
            mk(PhaseLabel::DW1, 0.01, 0.0),
            mk(PhaseLabel::DW1, 0.3, 0.0),
            mk(PhaseLabel::DW2, 0.0, 0.3),
        ];
        let c = transition_order(&path, 0.05).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].order, TransitionOrder::Second);
        assert_eq!(c[1].order, TransitionOrder::First);
        assert!(matches!(
            transition_order(&path[1..3], 0.05),
            Err(Error::NoCrossing)
        ));
    }
}
