//! JSON run configuration.

use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use spectra_core::inverse::{OptimizerOptions, StepRule};
use spectra_core::{make_grid, preset_potential, BoundaryAngle, GridFunction, Potential};

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Eig,
    SolveNp,
    Invert,
    NodalScan,
    Check,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Eig => "eig",
            Command::SolveNp => "solve-np",
            Command::Invert => "invert",
            Command::NodalScan => "nodal-scan",
            Command::Check => "check",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PotentialSpec {
    Preset {
        preset: String,
        #[serde(default)]
        params: Vec<f64>,
    },
    Csv {
        csv: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRuleSpec {
    Backtracking,
    Fixed(f64),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    pub penalty_init: Option<f64>,
    pub penalty_growth: Option<f64>,
    pub max_outer: Option<usize>,
    pub grad_tol: Option<f64>,
    pub max_inner: Option<usize>,
    pub step_rule: Option<StepRuleSpec>,
}

/// The file as written. Everything but `potential` is optional here;
/// [`RunConfig::resolve`] checks what each command needs.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub command: Option<String>,
    pub potential: serde_json::Value,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    pub k: Option<usize>,
    pub k_max: Option<usize>,
    pub lambda: Option<f64>,
    pub lambda_grid: Option<Vec<f64>>,
    pub delta: Option<i8>,
    pub l_max: Option<usize>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub optimizer: Option<OptimizerSpec>,
}

fn default_grid_n() -> usize {
    spectra_core::grid::DEFAULT_INTERVALS
}

/// A validated configuration with the potential already built.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub potential: Potential,
    pub alpha: BoundaryAngle,
    pub grid_n: usize,
    pub k: Option<usize>,
    pub k_max: Option<usize>,
    pub lambda: Option<f64>,
    pub lambda_grid: Option<Vec<f64>>,
    pub delta: Option<i8>,
    pub l_max: Option<usize>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub optimizer: OptimizerOptions,
}

/// Reads and validates `path` for `command`. A `--seed` given on the command
/// line replaces the file's seed.
pub fn parse_config(path: &Path, command: Command, seed: Option<u64>) -> Result<RunConfig, ConfigError> {
    let file = File::open(path).map_err(|e| err(format!("cannot open config {}: {e}", path.display())))?;
    let raw: RawConfig = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| err(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    RunConfig::resolve(raw, command, seed, base)
}

/// Same as [`parse_config`] for an in-memory document; relative CSV paths
/// resolve against `base`.
pub fn parse_config_str(text: &str, command: Command, seed: Option<u64>, base: &Path) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
    RunConfig::resolve(raw, command, seed, base)
}

fn require<T: Copy>(v: Option<T>, key: &str, command: Command) -> Result<T, ConfigError> {
    v.ok_or_else(|| err(format!("`{command}` needs key \"{key}\"")))
}

impl RunConfig {
    fn resolve(raw: RawConfig, command: Command, seed: Option<u64>, base: &Path) -> Result<Self, ConfigError> {
        if let Some(c) = &raw.command {
            if c != command.name() {
                return Err(err(format!("config is for `{c}` but `{command}` was requested")));
            }
        }
        if raw.grid_n < spectra_core::grid::MIN_INTERVALS {
            return Err(err(format!(
                "\"grid_n\" must be at least {}, got {}",
                spectra_core::grid::MIN_INTERVALS,
                raw.grid_n
            )));
        }
        let alpha = BoundaryAngle::new(raw.alpha).map_err(|e| err(format!("\"alpha\": {e}")))?;
        let seed = seed.or(raw.seed);
        let potential = build_potential(&raw.potential, raw.grid_n, seed, base)?;
        let optimizer = optimizer_options(raw.optimizer.as_ref())?;

        if let Some(d) = raw.delta {
            if d != 1 && d != -1 {
                return Err(err(format!("\"delta\" must be 1 or -1, got {d}")));
            }
        }
        for (key, v) in [("k", raw.k), ("k_max", raw.k_max), ("l_max", raw.l_max)] {
            if v == Some(0) {
                return Err(err(format!("\"{key}\" must be >= 1")));
            }
        }
        if let Some(l) = raw.lambda {
            if !l.is_finite() {
                return Err(err("\"lambda\" must be finite"));
            }
        }

        let cfg = RunConfig {
            command,
            potential,
            alpha,
            grid_n: raw.grid_n,
            k: raw.k,
            k_max: raw.k_max,
            lambda: raw.lambda,
            lambda_grid: raw.lambda_grid,
            delta: raw.delta,
            l_max: raw.l_max,
            seed,
            out_dir: raw.out_dir,
            optimizer,
        };
        match command {
            Command::Eig => {
                if cfg.k_max.is_none() && cfg.k.is_none() {
                    return Err(err("`eig` needs key \"k_max\" (or \"k\")"));
                }
            }
            Command::SolveNp => {
                require(cfg.lambda, "lambda", command)?;
                require(cfg.delta, "delta", command)?;
                require(cfg.k, "k", command)?;
            }
            Command::Invert => {
                require(cfg.lambda, "lambda", command)?;
                require(cfg.k, "k", command)?;
            }
            Command::NodalScan => {
                if cfg.lambda_grid.is_none() && cfg.lambda.is_none() {
                    return Err(err("`nodal-scan` needs key \"lambda_grid\" (or \"lambda\")"));
                }
                if cfg.lambda_grid.as_ref().is_some_and(|g| g.is_empty() || g.iter().any(|l| !l.is_finite())) {
                    return Err(err("\"lambda_grid\" must be a non-empty list of finite numbers"));
                }
                require(cfg.l_max, "l_max", command)?;
            }
            Command::Check => {}
        }
        Ok(cfg)
    }

    /// `lambda_grid`, or the single `lambda`.
    pub fn lambdas(&self) -> Vec<f64> {
        match (&self.lambda_grid, self.lambda) {
            (Some(g), _) => g.clone(),
            (None, Some(l)) => vec![l],
            (None, None) => Vec::new(),
        }
    }
}

fn build_potential(value: &serde_json::Value, grid_n: usize, seed: Option<u64>, base: &Path) -> Result<Potential, ConfigError> {
    let spec: PotentialSpec = serde_json::from_value(value.clone()).map_err(|_| {
        err("\"potential\" must be {\"preset\": name, \"params\": [...]} or {\"csv\": path}")
    })?;
    let keys: Vec<&String> = value.as_object().map(|m| m.keys().collect()).unwrap_or_default();
    let allowed: &[&str] = match spec {
        PotentialSpec::Preset { .. } => &["preset", "params"],
        PotentialSpec::Csv { .. } => &["csv"],
    };
    if let Some(extra) = keys.iter().find(|k| !allowed.contains(&k.as_str())) {
        return Err(err(format!("unknown key \"{extra}\" in \"potential\"")));
    }
    let grid = make_grid(grid_n).map_err(|e| err(e.to_string()))?;
    match spec {
        PotentialSpec::Preset { preset, params } => {
            preset_potential(&preset, &params, grid, seed).map_err(|e| err(format!("\"potential\": {e}")))
        }
        PotentialSpec::Csv { csv } => {
            let path = if csv.is_absolute() { csv } else { base.join(csv) };
            let file = File::open(&path).map_err(|e| err(format!("potential CSV {}: {e}", path.display())))?;
            let f = GridFunction::read_csv(BufReader::new(file), grid)
                .map_err(|e| err(format!("potential CSV {}: {e}", path.display())))?;
            let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok(Potential::new(f, label))
        }
    }
}

fn optimizer_options(spec: Option<&OptimizerSpec>) -> Result<OptimizerOptions, ConfigError> {
    let mut o = OptimizerOptions::default();
    if let Some(s) = spec {
        if let Some(v) = s.penalty_init {
            o.penalty_init = v;
        }
        if let Some(v) = s.penalty_growth {
            o.penalty_growth = v;
        }
        if let Some(v) = s.max_outer {
            o.max_outer = v;
        }
        if let Some(v) = s.grad_tol {
            o.grad_tol = v;
        }
        if let Some(v) = s.max_inner {
            o.max_inner = v;
        }
        if let Some(r) = s.step_rule {
            o.step_rule = match r {
                StepRuleSpec::Backtracking => StepRule::Backtracking,
                StepRuleSpec::Fixed(t) => StepRule::Fixed(t),
            };
        }
    }
    o.validate().map_err(|e| err(format!("\"optimizer\": {e}")))?;
    Ok(o)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, command: Command) -> Result<RunConfig, ConfigError> {
        parse_config_str(text, command, None, Path::new("."))
    }

    #[test]
    fn minimal_eig_config_gets_defaults() {
        let c = parse(r#"{"potential": {"preset": "zero"}, "k_max": 5}"#, Command::Eig).unwrap();
        assert_eq!(c.grid_n, 2000);
        assert_eq!(c.alpha.alpha(), 0.0);
        assert_eq!(c.optimizer, OptimizerOptions::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = parse(r#"{"potential": {"preset": "zero"}, "k_max": 5, "alpha2": 1}"#, Command::Eig).unwrap_err();
        assert!(e.0.contains("alpha2"), "{e}");
        let e = parse(r#"{"potential": {"preset": "zero", "scale": 2}, "k_max": 5}"#, Command::Eig).unwrap_err();
        assert!(e.0.contains("scale"), "{e}");
        let e = parse(
            r#"{"potential": {"preset": "zero"}, "k": 1, "lambda": 2, "optimizer": {"rho": 1}}"#,
            Command::Invert,
        )
        .unwrap_err();
        assert!(e.0.contains("rho"), "{e}");
    }

    #[test]
    fn missing_csv_names_the_path() {
        let e = parse(r#"{"potential": {"csv": "nowhere/q.csv"}, "k_max": 2}"#, Command::Eig).unwrap_err();
        assert!(e.0.contains("nowhere/q.csv"), "{e}");
    }

    #[test]
    fn command_requirements() {
        assert!(parse(r#"{"potential": {"preset": "zero"}, "k": 1}"#, Command::Invert).is_err());
        assert!(parse(r#"{"potential": {"preset": "zero"}, "k": 1, "lambda": 2}"#, Command::SolveNp).is_err());
        assert!(parse(r#"{"potential": {"preset": "zero"}, "k": 1, "lambda": 2, "delta": 2}"#, Command::SolveNp).is_err());
        assert!(parse(r#"{"potential": {"preset": "zero"}, "lambda": 5}"#, Command::NodalScan).is_err());
        assert!(parse(r#"{"potential": {"preset": "zero"}, "k_max": 2, "grid_n": 8}"#, Command::Eig).is_err());
        assert!(parse(r#"{"potential": {"preset": "zero"}, "k_max": 2, "alpha": 4}"#, Command::Eig).is_err());
        assert!(parse(r#"{"potential": {"preset": "nope"}, "k_max": 2}"#, Command::Eig).is_err());
        assert!(parse(r#"{"command": "eig", "potential": {"preset": "zero"}}"#, Command::Check).is_err());
    }

    #[test]
    fn seed_flag_overrides_file() {
        let text = r#"{"potential": {"preset": "random_fourier", "params": [3]}, "seed": 4}"#;
        let a = parse_config_str(text, Command::Check, Some(9), Path::new(".")).unwrap();
        assert_eq!(a.seed, Some(9));
        assert_eq!(a.potential.seed(), Some(9));
    }

    #[test]
    fn optimizer_block() {
        let c = parse(
            r#"{"potential": {"preset": "zero"}, "k": 1, "lambda": 2,
                "optimizer": {"max_outer": 3, "step_rule": {"fixed": 0.5}}}"#,
            Command::Invert,
        )
        .unwrap();
        assert_eq!(c.optimizer.max_outer, 3);
        assert_eq!(c.optimizer.step_rule, StepRule::Fixed(0.5));
        assert!(parse(
            r#"{"potential": {"preset": "zero"}, "k": 1, "lambda": 2, "optimizer": {"penalty_growth": 1}}"#,
            Command::Invert
        )
        .is_err());
    }
}
