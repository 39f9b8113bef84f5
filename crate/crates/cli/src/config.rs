use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::path::Path;

use quadcav::stability::ThresholdConfig;
use quadcav::threemode::TmSteadyConfig;
use quadcav::{ClassifyConfig, Grid, ModelParams};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

/// Everything a run depends on. Serialized in full into every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    pub grid: GridSettings,
    /// Seed of the random perturbation added by `evolve` (see `evolve.noise`).
    pub seed: u64,
    pub classify: ClassifyConfig,
    pub threshold: ThresholdSettings,
    pub evolve: EvolveSettings,
    pub spectrum: SpectrumSettings,
    pub scan: ScanSettings,
    pub threemode: ThreeModeSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelParams {
                lambda1: 15.0,
                lambda2: 5.0,
                theta: FRAC_PI_2,
                delta_c: -300.0,
                kappa: 0.0,
                v1: 0.0,
                v2: 0.0,
            },
            grid: GridSettings { num_points: 128 },
            seed: 0,
            classify: ClassifyConfig::default(),
            threshold: ThresholdSettings {
                phi: 0.0,
                search: ThresholdConfig::default(),
            },
            evolve: EvolveSettings::default(),
            spectrum: SpectrumSettings::default(),
            scan: ScanSettings::default(),
            threemode: ThreeModeSettings {
                steady: TmSteadyConfig::default(),
                compare_steady: TmSteadyConfig::default(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSettings {
    pub num_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSettings {
    /// Mixing angle of the search ray.
    pub phi: f64,
    pub search: ThresholdConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSettings {
    pub duration: f64,
    pub samples: usize,
    /// Overrides the default step when set.
    pub dt: Option<f64>,
    pub transient_fraction: f64,
    /// Seed amplitudes of the two density modes.
    pub seed_eps: [f64; 2],
    /// Initial cavity amplitude `[re, im]`.
    pub alpha0: [f64; 2],
    /// Amplitude of seeded random noise on the initial condensate.
    pub noise: f64,
}

impl Default for EvolveSettings {
    fn default() -> Self {
        Self {
            duration: 500.0,
            samples: 5000,
            dt: None,
            transient_fraction: 0.5,
            seed_eps: [0.01, 0.01],
            alpha0: [0.0, 0.0],
            noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumAxis {
    Lambda1,
    Lambda2,
    /// `lambda1 = s`, `lambda2 = cut_total - s`.
    Cut,
    Theta,
    Kappa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSettings {
    pub axis: SpectrumAxis,
    pub range: [f64; 2],
    pub count: usize,
    pub cut_total: f64,
    /// Repeat the sweep for each of these decay rates (empty: use the model's).
    pub kappas: Vec<f64>,
    /// When set, `delta_c = detuning_ratio * kappa` for every point.
    pub detuning_ratio: Option<f64>,
}

impl Default for SpectrumSettings {
    fn default() -> Self {
        Self {
            axis: SpectrumAxis::Lambda1,
            range: [0.0, 20.0],
            count: 201,
            cut_total: 2.0,
            kappas: Vec::new(),
            detuning_ratio: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSettings {
    pub lambda1: [f64; 2],
    pub lambda2: [f64; 2],
    pub theta: [f64; 2],
    pub phi: [f64; 2],
    /// Total pump of the angle sweep.
    pub eta_total: f64,
    pub n1: usize,
    pub n2: usize,
    /// Emit a gnuplot script next to the table.
    pub plot: bool,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self {
            lambda1: [0.0, 30.0],
            lambda2: [0.0, 30.0],
            theta: [0.0, TAU],
            phi: [0.0, PI],
            eta_total: 20.0,
            n1: 64,
            n2: 64,
            plot: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThreeModeSettings {
    pub steady: TmSteadyConfig,
    pub compare_steady: TmSteadyConfig,
}

impl RunConfig {
    pub fn grid(&self) -> Result<Grid, CliError> {
        Grid::new(self.grid.num_points).map_err(CliError::config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let c = |m: String| Err(CliError::Config(m));
        self.model.validate().map_err(CliError::config)?;
        self.grid()?;
        self.classify.validate().map_err(CliError::config)?;
        let e = &self.evolve;
        if !(e.duration > 0.0) || e.samples == 0 || !(0.0..1.0).contains(&e.transient_fraction) {
            return c("evolve: need duration > 0, samples > 0, transient_fraction in [0, 1)".into());
        }
        if e.dt.is_some_and(|dt| !(dt > 0.0 && dt.is_finite())) || !(e.noise >= 0.0) {
            return c("evolve: dt must be positive and noise non-negative".into());
        }
        if self.spectrum.count == 0 || self.spectrum.kappas.iter().any(|k| !(*k >= 0.0)) {
            return c("spectrum: need count > 0 and non-negative kappas".into());
        }
        let s = &self.scan;
        if s.n1 == 0 || s.n2 == 0 || !(s.eta_total > 0.0) {
            return c("scan: need n1, n2 > 0 and eta_total > 0".into());
        }
        if !(self.threshold.search.cap > 0.0) {
            return c("threshold.search.cap must be positive".into());
        }
        Ok(())
    }
}

/// Defaults, then the config file (a plain config, or any JSON/CSV output
/// of an earlier run, whose embedded config is reused), then `--set`.
pub fn load(path: Option<&Path>, sets: &[String]) -> Result<RunConfig, CliError> {
    let mut tree = serde_json::to_value(RunConfig::default()).expect("default config serializes");
    if let Some(path) = path {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let user = parse_config_text(&text).map_err(|m| CliError::Config(format!("{}: {m}", path.display())))?;
        merge(&mut tree, user, "")?;
    }
    for s in sets {
        let (key, raw) = s
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects key=value (got {s:?})")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        set_path(&mut tree, key.trim(), value)?;
    }
    let cfg: RunConfig = serde_json::from_value(tree).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn parse_config_text(text: &str) -> Result<Value, String> {
    if text.trim_start().starts_with('#') {
        return text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .find_map(|l| l.strip_prefix("# config: "))
            .ok_or_else(|| "no embedded config line".to_string())
            .and_then(|j| serde_json::from_str(j).map_err(|e| e.to_string()));
    }
    let v: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    // outputs wrap the effective config together with results
    match v {
        Value::Object(mut m) if m.contains_key("command") && m.contains_key("config") => {
            Ok(m.remove("config").unwrap())
        }
        other => Ok(other),
    }
}

fn merge(base: &mut Value, user: Value, at: &str) -> Result<(), CliError> {
    match (base, user) {
        (Value::Object(b), Value::Object(u)) => {
            for (k, v) in u {
                let path = if at.is_empty() { k.clone() } else { format!("{at}.{k}") };
                let slot = b
                    .get_mut(&k)
                    .ok_or_else(|| CliError::Config(format!("unknown key {path:?}")))?;
                merge(slot, v, &path)?;
            }
            Ok(())
        }
        (Value::Object(_), _) => Err(CliError::Config(format!("{at:?} is a section, not a value"))),
        (b, u) => {
            *b = u;
            Ok(())
        }
    }
}

fn set_path(tree: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let mut node = tree;
    for part in key.split('.') {
        node = node
            .as_object_mut()
            .and_then(|m| m.get_mut(part))
            .ok_or_else(|| CliError::Config(format!("unknown key {key:?}")))?;
    }
    if node.is_object() {
        return Err(CliError::Config(format!("{key:?} is a section, not a value")));
    }
    *node = value;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn set_overrides_nested_keys() {
        let cfg = load(None, &["model.kappa=200".into(), "scan.n1=8".into(), "spectrum.axis=cut".into()]).unwrap();
        assert_eq!(cfg.model.kappa, 200.0);
        assert_eq!(cfg.scan.n1, 8);
        assert_eq!(cfg.spectrum.axis, SpectrumAxis::Cut);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(load(None, &["model.kapa=1".into()]), Err(CliError::Config(_))));
        assert!(matches!(load(None, &["model=1".into()]), Err(CliError::Config(_))));
        let mut tree = serde_json::to_value(RunConfig::default()).unwrap();
        let user = serde_json::json!({"scan": {"n3": 4}});
        assert!(merge(&mut tree, user, "").is_err());
    }

    #[test]
    fn embedded_config_is_recovered() {
        let cfg = RunConfig::default();
        let line = serde_json::to_string(&cfg).unwrap();
        let csv = format!("# quadcav\n# config: {line}\nx,y\n1,2\n");
        let back: RunConfig = serde_json::from_value(parse_config_text(&csv).unwrap()).unwrap();
        assert_eq!(back, cfg);
        let wrapped = serde_json::json!({"command": "steady", "config": cfg});
        let back: RunConfig = serde_json::from_value(parse_config_text(&wrapped.to_string()).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        assert!(matches!(load(None, &["model.kappa=-1".into()]), Err(CliError::Config(_))));
        assert!(matches!(load(None, &["grid.num_points=7".into()]), Err(CliError::Config(_))));
    }
}
