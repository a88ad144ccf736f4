//! Scenario configuration: JSON with radial profile expressions.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

/// A profile is either a JSON number or an expression string.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Profile {
    Number(f64),
    Expr(String),
}

impl Profile {
    pub fn source(&self) -> String {
        match self {
            Profile::Number(x) => format!("{x:?}"),
            Profile::Expr(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub n: usize,
    pub t_max: f64,
    pub m: usize,
    #[serde(default)]
    pub scal_perturbation: Option<Profile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PscConfig {
    pub target_scal: Profile,
    #[serde(default)]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LichConfig {
    pub tau: Profile,
    pub a: Profile,
}

/// Each region is a list of `[t_lo, t_hi]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YamabeConfig {
    pub regions: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemConfig {
    Psc(PscConfig),
    Lichnerowicz(LichConfig),
    Yamabe(YamabeConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    #[default]
    Auto,
    Monotone,
    Newton,
    Variational,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub method: MethodChoice,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Defaults to 20000 for the monotone iteration and 500 otherwise.
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default = "default_margin")]
    pub omega_margin: f64,
    #[serde(default)]
    pub decay_window: Option<[f64; 2]>,
}

fn default_tol() -> f64 {
    1e-10
}

fn default_margin() -> f64 {
    0.1
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: MethodChoice::Auto,
            tol: default_tol(),
            max_iter: None,
            omega_margin: default_margin(),
            decay_window: None,
        }
    }
}

impl SolverConfig {
    pub fn max_iter(&self) -> usize {
        self.max_iter.unwrap_or(match self.method {
            MethodChoice::Monotone => 20_000,
            _ => 500,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
}

fn default_dir() -> String {
    "out".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub geometry: GeometryConfig,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Named constants, referenced as `$name` in profiles.
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, why: String| Err(CliError::Config(format!("{field}: {why}")));
        let g = &self.geometry;
        if g.n < 3 {
            return bad("geometry.n", format!("must be >= 3, got {}", g.n));
        }
        if !(g.t_max.is_finite() && g.t_max > 0.0) {
            return bad("geometry.t_max", format!("must be positive, got {}", g.t_max));
        }
        if g.m < 200 {
            return bad("geometry.m", format!("must be >= 200, got {}", g.m));
        }
        let s = &self.solver;
        if !(s.tol.is_finite() && s.tol > 0.0) {
            return bad("solver.tol", format!("must be positive, got {}", s.tol));
        }
        if !(s.omega_margin >= 0.0) {
            return bad("solver.omega_margin", format!("must be >= 0, got {}", s.omega_margin));
        }
        if s.max_iter == Some(0) {
            return bad("solver.max_iter", "must be positive".into());
        }
        if let Some([lo, hi]) = s.decay_window {
            if !(lo < hi && hi <= g.t_max - 1.0) {
                return bad("solver.decay_window", format!("need lo < hi <= t_max - 1, got [{lo}, {hi}]"));
            }
        }
        if let ProblemConfig::Yamabe(y) = &self.problem {
            if y.regions.is_empty() || y.regions.iter().any(|r| r.is_empty()) {
                return bad("problem.yamabe.regions", "needs at least one non-empty region".into());
            }
        }
        if self.solver.method != MethodChoice::Auto && !matches!(self.problem, ProblemConfig::Psc(_)) {
            return bad("solver.method", "only `auto` applies to this problem".into());
        }
        Ok(())
    }
}

/// A parsed config with the directory that relative paths resolve against.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub raw: Value,
    pub base: PathBuf,
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let raw: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    Ok(Loaded { raw, base })
}

/// Typed config from a JSON value; errors name the offending field.
pub fn typed(raw: &Value) -> Result<ScenarioConfig, CliError> {
    let cfg: ScenarioConfig = serde_path_to_error::deserialize(raw.clone())
        .map_err(|e| CliError::Config(format!("field `{}`: {}", e.path(), e.inner())))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Overwrites the number at a dotted path (`params.width`,
/// `problem.yamabe.regions.0.0.1`).
pub fn set_scalar(raw: &mut Value, path: &str, value: f64) -> Result<(), CliError> {
    let err = |why: &str| CliError::Config(format!("--param {path}: {why}"));
    let mut cur = raw;
    for key in path.split('.') {
        cur = match cur {
            Value::Object(map) => map.get_mut(key),
            Value::Array(arr) => key.parse::<usize>().ok().and_then(|i| arr.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| err(&format!("no field `{key}`")))?;
    }
    if !cur.is_number() {
        return Err(err("does not address a scalar"));
    }
    let num = serde_json::Number::from_f64(value).ok_or_else(|| err("value must be finite"))?;
    *cur = Value::Number(num);
    Ok(())
}
