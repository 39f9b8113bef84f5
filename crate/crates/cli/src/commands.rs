use std::f64::consts::FRAC_PI_2;
use std::sync::atomic::{AtomicUsize, Ordering};

use quadcav::scan::{sweep_eta, sweep_theta_phi, Progress};
use quadcav::stability::{np_threshold_closed_form, Threshold};
use quadcav::threemode::{compare_with_full, tm_analytic, tm_spectrum, tm_steady, TmBranch};
use quadcav::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{RunConfig, SpectrumAxis};
use crate::output::{num, Csv, Sink};
use crate::CliError;

/// Summary returned to `main` for the manifest.
pub type Summary = Value;

fn progress_printer(label: &'static str) -> impl Fn(usize, usize) + Sync {
    let last = AtomicUsize::new(0);
    move |done, total| {
        let pct = 100 * done / total.max(1);
        if pct >= last.load(Ordering::Relaxed) + 10 || done == total {
            last.store(pct, Ordering::Relaxed);
            eprintln!("{label}: {done}/{total}");
        }
    }
}

pub fn steady(cfg: &RunConfig, sink: &mut Sink) -> Result<Summary, CliError> {
    let grid = cfg.grid()?;
    let p = &cfg.model;
    let ss = find_steady_state(p, &grid, &cfg.classify.relax).map_err(CliError::core)?;
    let res = steady_residual(ss.alpha0, &ss.psi0, p, &grid).map_err(CliError::core)?;
    let unstable = instability_criterion(p).map_err(CliError::core)?;
    let label = if unstable || !ss.converged {
        PhaseLabel::UST
    } else {
        PhaseLabel::from_order(ss.order, cfg.classify.order_tol, cfg.classify.dw_purity_tol)
    };
    let results = json!({
        "mu": ss.mu,
        "theta1": ss.order.theta1,
        "theta2": ss.order.theta2,
        "alpha": [ss.alpha0.0.re, ss.alpha0.0.im],
        "alpha_abs": ss.alpha0.abs(),
        "converged": ss.converged,
        "iterations": ss.iterations,
        "step_residual": ss.residual,
        "residual": res,
        "instability_criterion": unstable,
        "label": label,
    });
    sink.json("steady.json", &results)?;

    let mut csv = Csv::new(["x", "re_psi", "im_psi", "density"]);
    csv.meta("converged", ss.converged);
    for (x, z) in grid.positions().zip(ss.psi0.amplitudes()) {
        csv.push(vec![num(x), num(z.re), num(z.im), num(z.norm_sqr())]);
    }
    sink.csv("steady_psi.csv", &csv)?;
    Ok(json!({ "label": label, "converged": ss.converged }))
}

pub fn evolve(cfg: &RunConfig, sink: &mut Sink) -> Result<Summary, CliError> {
    let grid = cfg.grid()?;
    let p = &cfg.model;
    let e = &cfg.evolve;
    let mut psi = seed_state(e.seed_eps[0], e.seed_eps[1], &grid);
    if e.noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for z in psi.amplitudes_mut() {
            *z += e.noise * Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        psi.normalize(&grid).map_err(CliError::core)?;
    }
    let alpha0 = CavityAmplitude::new(e.alpha0[0], e.alpha0[1]);
    let mut ec = EvolveConfig::for_duration(p, e.duration, e.samples);
    if let Some(dt) = e.dt {
        ec.dt = dt;
        ec.n_steps = (e.duration / dt).ceil() as usize;
        ec.stride = (ec.n_steps / e.samples).max(1);
    }
    let traj = evolve_real_time(&psi, alpha0, p, &grid, &ec).map_err(CliError::core)?;

    let mut csv = Csv::new(["t", "re_alpha", "im_alpha", "abs_alpha", "theta1", "theta2", "norm"]);
    csv.meta("dt", num(ec.dt));
    csv.meta("steps", ec.n_steps);
    for s in &traj.samples {
        csv.push(vec![
            num(s.t),
            num(s.alpha.re),
            num(s.alpha.im),
            num(s.alpha.norm()),
            num(s.theta1),
            num(s.theta2),
            num(s.norm),
        ]);
    }
    sink.csv("evolve.csv", &csv)?;
    // the series is kept even when the window is too short to judge
    let lc = detect_limit_cycle(&traj, e.transient_fraction).map_err(CliError::core)?;
    let last = traj.samples.last().expect("trajectory has samples");
    sink.json(
        "evolve.json",
        &json!({
            "dt": ec.dt,
            "steps": ec.n_steps,
            "limit_cycle": lc,
            "final": { "t": last.t, "alpha": [last.alpha.re, last.alpha.im], "theta1": last.theta1, "theta2": last.theta2 },
        }),
    )?;
    sink.text(
        "evolve.gp",
        "set datafile separator ','\nset xlabel 't'\nset ylabel '|alpha|'\nplot 'evolve.csv' skip 1 using 1:4 with lines title '|alpha|'\n",
    )?;
    Ok(json!({ "oscillatory": lc.oscillatory, "period": lc.period }))
}

fn spectrum_point(cfg: &RunConfig, kappa: f64, s: f64) -> ModelParams {
    let mut p = cfg.model;
    p.kappa = kappa;
    match cfg.spectrum.axis {
        SpectrumAxis::Lambda1 => p.lambda1 = s,
        SpectrumAxis::Lambda2 => p.lambda2 = s,
        SpectrumAxis::Cut => {
            p.lambda1 = s;
            p.lambda2 = cfg.spectrum.cut_total - s;
        }
        SpectrumAxis::Theta => p.theta = s,
        SpectrumAxis::Kappa => p.kappa = s,
    }
    if let Some(r) = cfg.spectrum.detuning_ratio {
        p.delta_c = r * p.kappa;
    }
    p
}

pub fn spectrum(cfg: &RunConfig, sink: &mut Sink) -> Result<Summary, CliError> {
    let sc = &cfg.spectrum;
    let kappas = if sc.kappas.is_empty() { vec![cfg.model.kappa] } else { sc.kappas.clone() };
    let axis = scan::Axis::new("s", sc.range[0], sc.range[1], sc.count).map_err(CliError::config)?;
    let mut header = vec!["kappa".to_string(), "delta_c".into(), "s".into(), "lambda1".into(), "lambda2".into(), "theta".into()];
    for (tag, n) in [("a", 4), ("b", 6)] {
        header.extend((1..=n).map(|k| format!("re_{tag}{k}")));
        header.extend((1..=n).map(|k| format!("im_{tag}{k}")));
    }
    header.extend(["unstable_a".into(), "unstable_b".into()]);
    let mut csv = Csv::new(header);
    csv.meta("axis", serde_json::to_string(&sc.axis).unwrap());
    csv.meta("roots", "a = adiabatic (closed form), b = dynamical cavity (sextic); sorted by Re then Im");
    let mut unstable_points = 0usize;
    for &kappa in &kappas {
        for s in axis.values() {
            let p = spectrum_point(cfg, kappa, s);
            p.validate().map_err(CliError::config)?;
            let a = adiabatic_spectrum(&p).map_err(CliError::core)?.sorted();
            let b = beyond_adiabatic_roots(&p).map_err(CliError::core)?.sorted();
            let (ua, ub) = (!classify_stability(&a, None).stable, !classify_stability(&b, None).stable);
            unstable_points += ub as usize;
            let mut row = vec![num(p.kappa), num(p.delta_c), num(s), num(p.lambda1), num(p.lambda2), num(p.theta)];
            for spec in [&a, &b] {
                row.extend(spec.roots.iter().map(|z| num(z.re)));
                row.extend(spec.roots.iter().map(|z| num(z.im)));
            }
            row.extend([ua.to_string(), ub.to_string()]);
            csv.push(row);
        }
    }
    sink.csv("spectrum.csv", &csv)?;
    let mut gp = String::from("set datafile separator ','\nset xlabel 's'\nset ylabel 'Im omega'\nplot \\\n");
    let cols: Vec<String> = (0..6)
        .map(|k| format!("  'spectrum.csv' skip 1 using 3:{} with points pt 7 ps 0.3 title 'Im b{}'", 6 + 8 + 7 + k, k + 1))
        .collect();
    gp.push_str(&cols.join(", \\\n"));
    gp.push('\n');
    sink.text("spectrum.gp", &gp)?;
    Ok(json!({ "points": csv.rows.len(), "unstable_beyond_adiabatic": unstable_points }))
}

pub fn threshold(cfg: &RunConfig, sink: &mut Sink) -> Result<Summary, CliError> {
    let p = &cfg.model;
    let phi = cfg.threshold.phi;
    let th = np_threshold(p, phi, &cfg.threshold.search).map_err(CliError::core)?;
    let closed = np_threshold_closed_form(p, phi).map_err(CliError::core)?;
    let ps = p.phase_shift().map_err(CliError::core)?;
    let (kind, value) = match th {
        Threshold::At(v) => ("at", Some(v)),
        Threshold::Immediate => ("immediate", Some(0.0)),
        Threshold::Unbounded { .. } => ("unbounded", None),
    };
    let pumps = value.map(|v| [v * (0.5 * phi).cos(), v * (0.5 * phi).sin()]);
    let results = json!({
        "phi": phi,
        "kind": kind,
        "lambda": value,
        "pumps": pumps,
        "closed_form": closed,
        "chi": ps.chi,
        "cos2_chi": ps.chi.cos().powi(2),
        "critical_angle": p.critical_angle().ok(),
    });
    sink.json("threshold.json", &results)?;
    Ok(json!({ "kind": kind, "lambda": value }))
}

fn cell_row(i: usize, j: usize, x: f64, y: f64, c: &CellRecord) -> Vec<String> {
    vec![
        i.to_string(),
        j.to_string(),
        num(x),
        num(y),
        num(c.lambda1),
        num(c.lambda2),
        num(c.theta),
        c.label.to_string(),
        c.label.code().to_string(),
        num(c.theta1),
        num(c.theta2),
        num(c.alpha_abs),
        num(c.mu),
        c.converged.to_string(),
        c.iterations.to_string(),
        num(c.growth),
        c.diagnostic.as_deref().unwrap_or("").replace([',', '\n'], ";"),
    ]
}

const CELL_HEADER: [&str; 17] = [
    "i", "j", "x", "y", "lambda1", "lambda2", "theta", "label", "code", "theta1", "theta2", "alpha_abs", "mu",
    "converged", "iterations", "growth", "diagnostic",
];

fn label_map_script(csv: &str, xlabel: &str, ylabel: &str) -> String {
    let tics: Vec<String> = PhaseLabel::ALL.iter().map(|l| format!("'{}' {}", l, l.code())).collect();
    format!(
        "set datafile separator ','\nset xlabel '{xlabel}'\nset ylabel '{ylabel}'\n\
         set palette maxcolors 5 defined (0 '#f0f0f0', 1 '#d62728', 2 '#1f77b4', 3 '#9467bd', 4 '#222222')\n\
         set cbrange [-0.5:4.5]\nset cbtics ({})\nset view map\n\
         plot '{csv}' skip 1 using 3:4:9 with image notitle\n",
        tics.join(", ")
    )
}

fn write_table(
    sink: &mut Sink,
    table: &scan::PhaseTable,
    plot: bool,
) -> Result<Summary, CliError> {
    let mut csv = Csv::new(CELL_HEADER);
    csv.meta("x", &table.axes[0].name);
    csv.meta("y", &table.axes[1].name);
    csv.meta("shape", format!("{}x{}", table.axes[0].count, table.axes[1].count));
    let (n1, n2) = table.shape();
    for i in 0..n1 {
        for j in 0..n2 {
            csv.push(cell_row(i, j, table.axes[0].value(i), table.axes[1].value(j), table.cell(i, j)));
        }
    }
    sink.csv("phase_table.csv", &csv)?;
    if plot {
        sink.text("phase_table.gp", &label_map_script("phase_table.csv", &table.axes[0].name, &table.axes[1].name))?;
    }
    let counts: serde_json::Map<String, Value> = PhaseLabel::ALL
        .iter()
        .map(|l| (l.to_string(), json!(table.count(*l))))
        .collect();
    let failed = table.cells.iter().filter(|c| c.diagnostic.as_deref().is_some_and(|d| d.starts_with("error"))).count();
    Ok(json!({
        "axes": table.axes.iter().map(|a| json!({"name": a.name, "lo": a.lo, "hi": a.hi, "count": a.count})).collect::<Vec<_>>(),
        "counts": counts,
        "failed_cells": failed,
    }))
}

pub fn scan_eta(cfg: &RunConfig, sink: &mut Sink) -> Result<Summary, CliError> {
    let grid = cfg.grid()?;
    let s = &cfg.scan;
    let pr = progress_printer("scan-eta");
    let progress: Progress<'_> = &pr;
    let table = sweep_eta(
        &cfg.model,
        (s.lambda1[0], s.lambda1[1]),
        (s.lambda2[0], s.lambda2[1]),
        s.n1,
        s.n2,
        &grid,
        &cfg.classify,
        Some(progress),
    )
    .map_err(CliError::core)?;
    write_table(sink, &table, s.plot)
}

pub fn scan_angle(cfg: &RunConfig, sink: &mut Sink) -> Result<Summary, CliError> {
    let grid = cfg.grid()?;
    let s = &cfg.scan;
    let pr = progress_printer("scan-angle");
    let progress: Progress<'_> = &pr;
    let table = sweep_theta_phi(
        &cfg.model,
        s.eta_total,
        (s.theta[0], s.theta[1]),
        (s.phi[0], s.phi[1]),
        s.n1,
        s.n2,
        &grid,
        &cfg.classify,
        Some(progress),
    )
    .map_err(CliError::core)?;
    write_table(sink, &table, s.plot)
}

fn pump_points(cfg: &RunConfig) -> Result<Vec<(usize, usize, ModelParams)>, CliError> {
    let s = &cfg.scan;
    let a1 = scan::Axis::new("lambda1", s.lambda1[0], s.lambda1[1], s.n1).map_err(CliError::config)?;
    let a2 = scan::Axis::new("lambda2", s.lambda2[0], s.lambda2[1], s.n2).map_err(CliError::config)?;
    let mut pts = Vec::with_capacity(s.n1 * s.n2);
    for (i, x) in a1.values().enumerate() {
        for (j, y) in a2.values().enumerate() {
            let p = cfg.model.with_pumps(x, y);
            p.validate().map_err(CliError::config)?;
            pts.push((i, j, p));
        }
    }
    Ok(pts)
}

pub fn threemode(cfg: &RunConfig, sink: &mut Sink) -> Result<Summary, CliError> {
    let tp = TMParams::from_model(&cfg.model);
    let st = tm_steady(&tp, &cfg.threemode.steady).map_err(CliError::core)?;
    let (spec, verdict) = tm_spectrum(&st.state, &tp).map_err(CliError::core)?;
    let closed_form = if (tp.theta - FRAC_PI_2).abs() < 1e-12 && tp.kappa == 0.0 && tp.delta_c < 0.0 {
        Some(tm_analytic(&tp).map_err(CliError::core)?)
    } else {
        None
    };
    let point = json!({
        "params": tp,
        "critical_coupling": tp.critical_coupling(),
        "steady": st,
        "p1": st.state.p1(),
        "p2": st.state.p2(),
        "order": st.state.order(),
        "spectrum": spec.sorted().roots.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
        "stable": verdict.stable,
        "closed_form": closed_form.map(|b: TmBranch| json!({ "branch": b, "populations": b.populations() })),
    });
    sink.json("threemode.json", &point)?;

    let pts = pump_points(cfg)?;
    let pr = progress_printer("threemode");
    let done = AtomicUsize::new(0);
    let rows: Vec<Vec<String>> = pts
        .par_iter()
        .map(|(i, j, p)| {
            let tp = TMParams::from_model(p);
            let row = match tm_steady(&tp, &cfg.threemode.steady) {
                Ok(st) => {
                    let stable = st.converged && tm_spectrum(&st.state, &tp).is_ok_and(|(_, v)| v.stable);
                    let label = if instability_criterion(p).unwrap_or(false) || !stable {
                        PhaseLabel::UST
                    } else {
                        PhaseLabel::from_order(st.state.order(), cfg.classify.order_tol, cfg.classify.dw_purity_tol)
                    };
                    let op = st.state.order();
                    vec![
                        i.to_string(), j.to_string(), num(p.lambda1), num(p.lambda2), num(tp.mu1), num(tp.mu2),
                        num(st.state.p1()), num(st.state.p2()), num(op.theta1), num(op.theta2),
                        label.to_string(), label.code().to_string(), st.converged.to_string(), num(st.residual),
                    ]
                }
                Err(e) => vec![
                    i.to_string(), j.to_string(), num(p.lambda1), num(p.lambda2), num(tp.mu1), num(tp.mu2),
                    "nan".into(), "nan".into(), "nan".into(), "nan".into(), format!("error: {e}").replace(',', ";"),
                    "-1".into(), "false".into(), "nan".into(),
                ],
            };
            pr(done.fetch_add(1, Ordering::Relaxed) + 1, pts.len());
            row
        })
        .collect();
    let mut csv = Csv::new([
        "i", "j", "lambda1", "lambda2", "mu1", "mu2", "p1", "p2", "theta1", "theta2", "label", "code", "converged", "residual",
    ]);
    let mut counts = std::collections::BTreeMap::new();
    for r in rows {
        *counts.entry(r[10].clone()).or_insert(0usize) += 1;
        csv.push(r);
    }
    sink.csv("threemode_table.csv", &csv)?;
    if cfg.scan.plot {
        let mut gp = label_map_script("threemode_table.csv", "lambda1", "lambda2");
        gp = gp.replace("using 3:4:9", "using 3:4:12");
        sink.text("threemode_table.gp", &gp)?;
    }
    Ok(json!({ "p1": st.state.p1(), "p2": st.state.p2(), "converged": st.converged, "counts": counts }))
}

pub fn compare(cfg: &RunConfig, sink: &mut Sink) -> Result<Summary, CliError> {
    let grid = cfg.grid()?;
    let pts = pump_points(cfg)?;
    let pr = progress_printer("compare");
    let done = AtomicUsize::new(0);
    let results: Vec<_> = pts
        .par_iter()
        .map(|(i, j, p)| {
            let r = compare_with_full(p, &grid, &cfg.classify, &cfg.threemode.compare_steady);
            pr(done.fetch_add(1, Ordering::Relaxed) + 1, pts.len());
            (*i, *j, *p, r)
        })
        .collect();
    let mut csv = Csv::new([
        "i", "j", "lambda1", "lambda2", "theta", "full_label", "tm_label", "full_theta1", "full_theta2", "tm_theta1",
        "tm_theta2", "tm_converged", "agree", "diagnostic",
    ]);
    let mut pairs = std::collections::BTreeMap::new();
    for (i, j, p, r) in results {
        let row = match r {
            Ok(c) => {
                *pairs.entry(format!("{}/{}", c.full.label, c.tm_label)).or_insert(0usize) += 1;
                vec![
                    i.to_string(), j.to_string(), num(p.lambda1), num(p.lambda2), num(p.theta),
                    c.full.label.to_string(), c.tm_label.to_string(), num(c.full.theta1), num(c.full.theta2),
                    num(c.tm_order.theta1), num(c.tm_order.theta2), c.tm_converged.to_string(),
                    c.labels_agree().to_string(), c.full.diagnostic.unwrap_or_default().replace([',', '\n'], ";"),
                ]
            }
            Err(e) => {
                *pairs.entry("error".to_string()).or_insert(0usize) += 1;
                vec![
                    i.to_string(), j.to_string(), num(p.lambda1), num(p.lambda2), num(p.theta), "".into(), "".into(),
                    "nan".into(), "nan".into(), "nan".into(), "nan".into(), "false".into(), "false".into(),
                    format!("error: {e}").replace([',', '\n'], ";"),
                ]
            }
        };
        csv.push(row);
    }
    csv.meta("pairs", "full_label/tm_label counts are listed in compare.json");
    sink.csv("compare.csv", &csv)?;
    sink.json("compare.json", &json!({ "pairs": pairs }))?;
    Ok(json!({ "pairs": pairs }))
}
