use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn quadcav(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quadcav"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) {
    let o = quadcav(out, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn results(path: &Path) -> Value {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v["results"].clone()
}

/// Data rows (header skipped) split on commas.
fn rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn steady_labels_normal_and_density_wave_states() {
    let dir = tempfile::tempdir().unwrap();
    let np = dir.path().join("np");
    ok(&np, &["steady", "--set", "model.lambda1=5", "--set", "model.lambda2=3"]);
    let r = results(&np.join("steady.json"));
    assert!(r["theta1"].as_f64().unwrap().abs() < 1e-3 && r["theta2"].as_f64().unwrap().abs() < 1e-3);
    assert_eq!(r["label"], "NP");

    let dw = dir.path().join("dw");
    ok(&dw, &["steady", "--set", "model.lambda1=20", "--set", "model.lambda2=5"]);
    let r = results(&dw.join("steady.json"));
    assert!(r["theta1"].as_f64().unwrap().abs() > 0.1);
    assert_eq!(r["label"], "DW1");
    assert_eq!(rows(&dw.join("steady_psi.csv")).len(), 128);
}

#[test]
fn steady_flags_unstable_parameters_without_failing() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["steady", "--set", "model.kappa=200", "--set", "model.lambda1=15", "--set", "model.lambda2=15", "--set", "grid.num_points=32"]);
    let r = results(&dir.path().join("steady.json"));
    assert_eq!(r["converged"], false);
    assert_eq!(r["instability_criterion"], true);
    assert_eq!(r["label"], "UST");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| quadcav(dir.path(), args).status.code().unwrap();
    assert_eq!(code(&["steady", "--set", "model.kapa=1"]), 2);
    assert_eq!(code(&["steady", "--set", "model.kappa=-1"]), 2);
    assert_eq!(code(&["steady", "--set", "grid.num_points=4"]), 2);
    assert_eq!(code(&["steady", "--set", "nonsense"]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["steady", "--config", "/definitely/not/here.json"]), 4);
    // detection window shorter than the minimum is a configuration problem
    assert_eq!(code(&["evolve", "--set", "evolve.duration=100", "--set", "grid.num_points=16"]), 2);

    let file = dir.path().join("occupied");
    std::fs::write(&file, "x").unwrap();
    let o = quadcav(&file, &["threshold"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn threshold_reports_closed_system_value() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["threshold"]);
    let r = results(&dir.path().join("threshold.json"));
    assert_eq!(r["kind"], "at");
    let l = r["lambda"].as_f64().unwrap();
    assert!((l - 150f64.sqrt()).abs() < 1e-6 * l);
    assert!((r["closed_form"].as_f64().unwrap() - l).abs() < 1e-6 * l);
}

#[test]
fn zero_coupling_spectrum_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["spectrum", "--set", "model.lambda2=0", "--set", "spectrum.range=[0,0]", "--set", "spectrum.count=3"]);
    let csv = rows(&dir.path().join("spectrum.csv"));
    assert_eq!(csv.len(), 3);
    for r in &csv {
        let re: Vec<f64> = r[6..10].iter().map(|s| s.parse().unwrap()).collect();
        let im: Vec<f64> = r[10..14].iter().map(|s| s.parse().unwrap()).collect();
        assert_eq!(re, vec![-1.0, -1.0, 1.0, 1.0]);
        assert!(im.iter().all(|v| *v == 0.0));
    }
}

#[test]
fn spectrum_cut_over_several_decay_rates() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "spectrum",
            "--set", "spectrum.axis=cut",
            "--set", "spectrum.kappas=[5,15,50,1000,6000]",
            "--set", "spectrum.detuning_ratio=-1.5",
            "--set", "spectrum.range=[0,2]",
            "--set", "spectrum.count=21",
        ],
    );
    let csv = rows(&dir.path().join("spectrum.csv"));
    assert_eq!(csv.len(), 105);
    for r in &csv {
        let kappa: f64 = r[0].parse().unwrap();
        let delta: f64 = r[1].parse().unwrap();
        let (l1, l2): (f64, f64) = (r[3].parse().unwrap(), r[4].parse().unwrap());
        assert_eq!(delta, -1.5 * kappa);
        assert!((l1 + l2 - 2.0).abs() < 1e-12);
    }
    assert!(dir.path().join("spectrum.gp").exists());
}

#[test]
fn decoupled_cavity_decays_exponentially() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "evolve",
            "--set", "model.lambda1=0",
            "--set", "model.lambda2=0",
            "--set", "model.kappa=0.01",
            "--set", "model.delta_c=-10",
            "--set", "evolve.alpha0=[0.1,0]",
            "--set", "evolve.duration=420",
            "--set", "evolve.samples=400",
            "--set", "grid.num_points=16",
        ],
    );
    let csv = rows(&dir.path().join("evolve.csv"));
    let pts: Vec<(f64, f64)> = csv.iter().map(|r| (r[0].parse().unwrap(), r[3].parse::<f64>().unwrap().ln())).collect();
    // least-squares line through (t, ln|alpha|)
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = sxy * sxy / (sxx * syy);
    assert!(r2 > 0.999, "R^2 = {r2}");
    assert!((slope + 0.01).abs() < 1e-6, "slope {slope}");
    assert_eq!(results(&dir.path().join("evolve.json"))["limit_cycle"]["oscillatory"], false);
}

#[test]
fn evolve_finds_limit_cycle_in_unstable_region() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["evolve", "--set", "model.kappa=200", "--set", "model.lambda1=15", "--set", "model.lambda2=15", "--set", "grid.num_points=32"],
    );
    let lc = &results(&dir.path().join("evolve.json"))["limit_cycle"];
    assert_eq!(lc["oscillatory"], true);
    assert!(lc["period"].as_f64().unwrap() > 0.0);
}

#[test]
fn scan_single_cell_matches_steady() {
    let dir = tempfile::tempdir().unwrap();
    let (scan, steady) = (dir.path().join("scan"), dir.path().join("steady"));
    let set = ["--set", "model.lambda1=20", "--set", "model.lambda2=5", "--set", "model.kappa=100"];
    let mut args = vec!["scan-eta", "--set", "scan.n1=1", "--set", "scan.n2=1", "--set", "scan.lambda1=[20,20]", "--set", "scan.lambda2=[5,5]"];
    args.extend(set);
    ok(&scan, &args);
    let mut args = vec!["steady"];
    args.extend(set);
    ok(&steady, &args);
    let cells = rows(&scan.join("phase_table.csv"));
    assert_eq!(cells.len(), 1);
    let r = results(&steady.join("steady.json"));
    assert_eq!(cells[0][7], r["label"].as_str().unwrap());
    let t1: f64 = cells[0][9].parse().unwrap();
    assert!((t1 - r["theta1"].as_f64().unwrap()).abs() < 1e-9);
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(scan.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "scan-eta");
    assert!(manifest["wall_time_s"].as_f64().is_some());
    assert!(manifest["git"].as_str().is_some());
    assert!(scan.join("phase_table.gp").exists());
}

#[test]
fn rerun_from_embedded_config_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    ok(&a, &["scan-eta", "--set", "scan.n1=4", "--set", "scan.n2=3", "--set", "model.kappa=50", "--threads", "2"]);
    let csv = a.join("phase_table.csv");
    ok(&b, &["scan-eta", "--config", csv.to_str().unwrap()]);
    assert_eq!(std::fs::read(&csv).unwrap(), std::fs::read(b.join("phase_table.csv")).unwrap());
    ok(&c, &["scan-eta", "--config", a.join("manifest.json").to_str().unwrap()]);
    assert_eq!(std::fs::read(&csv).unwrap(), std::fs::read(c.join("phase_table.csv")).unwrap());
    assert_eq!(rows(&csv).len(), 12);
}

#[test]
fn every_output_embeds_the_full_config() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["threshold", "--seed", "42"]);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("threshold.json")).unwrap()).unwrap();
    assert_eq!(v["config"]["seed"], 42);
    // defaults are written out, not omitted
    assert!(v["config"]["classify"]["relax"]["max_iter"].as_u64().is_some());
    assert!(v["config"]["evolve"]["dt"].is_null());
}

#[test]
fn angle_scan_has_requested_shape() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["scan-angle", "--set", "scan.n1=3", "--set", "scan.n2=4", "--set", "model.kappa=200", "--set", "grid.num_points=32"]);
    let cells = rows(&dir.path().join("phase_table.csv"));
    assert_eq!(cells.len(), 12);
    for r in &cells {
        let (l1, l2): (f64, f64) = (r[4].parse().unwrap(), r[5].parse().unwrap());
        assert!((l1.hypot(l2) - 20.0).abs() < 1e-9);
    }
}

#[test]
fn threemode_spot_check_and_table() {
    let dir = tempfile::tempdir().unwrap();
    // mu1 = 2 mu_c = sqrt(300) with mu = lambda / sqrt 2
    let l1 = 600f64.sqrt().to_string();
    let set1 = format!("model.lambda1={l1}");
    ok(dir.path(), &["threemode", "--set", &set1, "--set", "model.lambda2=0", "--set", "scan.n1=3", "--set", "scan.n2=3", "--set", "scan.lambda1=[0,5]", "--set", "scan.lambda2=[0,5]"]);
    let r = results(&dir.path().join("threemode.json"));
    assert!((r["p1"].as_f64().unwrap() - 0.375).abs() < 1e-8);
    assert!(r["closed_form"].is_object());
    // below threshold everywhere
    let cells = rows(&dir.path().join("threemode_table.csv"));
    assert_eq!(cells.len(), 9);
    assert!(cells.iter().all(|r| r[10] == "NP"));
}

#[test]
fn compare_reports_both_labels() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["compare", "--set", "scan.n1=2", "--set", "scan.n2=2", "--set", "scan.lambda1=[5,20]", "--set", "scan.lambda2=[2,2]", "--set", "grid.num_points=32"]);
    let cells = rows(&dir.path().join("compare.csv"));
    assert_eq!(cells.len(), 4);
    assert_eq!(cells[0][5], "NP");
    assert_eq!(cells[2][5], "DW1");
    assert_eq!(cells[2][6], "DW1");
    assert!(results(&dir.path().join("compare.json"))["pairs"].is_object());
}
