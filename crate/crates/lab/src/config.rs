//! Experiment configuration.
//!
//! Documents are TOML. Tables and dotted keys are interchangeable, so
//! `[physics]\nnu = 0.1` and `physics.nu = 0.1` mean the same thing. The
//! document is flattened to dotted keys, unknown keys are rejected, and
//! every module precondition reachable from the configuration is checked
//! before any command runs.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use steadylab_core::evolution::EvolutionConfig;
use steadylab_core::{ForcingSpec, Lattice, PhysicalParams, DEFAULT_DEALIAS};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("malformed document: {0}")]
    Parse(String),
    #[error("unknown key \"{key}\"{}", suggestion.as_ref().map(|s| format!("; did you mean \"{}\" ({})?", leaf(s), s)).unwrap_or_default())]
    UnknownKey { key: String, suggestion: Option<String> },
    #[error("missing required key \"{0}\"")]
    Missing(&'static str),
    #[error("key \"{key}\" expects {expected}")]
    Type { key: String, expected: &'static str },
    #[error("{key}: {reason}")]
    Invalid { key: String, reason: String },
}

fn leaf(key: &str) -> &str {
    key.rsplit('.').next().unwrap_or(key)
}

/// Accepted keys and the informal names they are commonly mistyped as.
const KEYS: &[(&str, &[&str])] = &[
    ("seed", &["random_seed"]),
    ("lattice.n", &["resolution", "grid", "size"]),
    ("lattice.period", &["box", "length", "domain"]),
    ("lattice.dealias", &["dealias_fraction", "dealiasing"]),
    ("physics.nu", &["viscosity", "kinematic_viscosity"]),
    ("physics.rho0", &["spectral_gap", "gap"]),
    ("physics.m_energy", &["energy_budget", "budget"]),
    ("forcing.rho0", &["inner_radius"]),
    ("forcing.rho1", &["outer_radius"]),
    ("forcing.x_norm", &["amplitude", "target_x_norm", "xnorm"]),
    ("forcing.seed", &[]),
    ("evolution.dt", &["timestep", "time_step"]),
    ("evolution.horizon", &["t_end", "final_time"]),
    ("evolution.tail_tolerance", &["tail", "tail_tol"]),
    ("evolution.snapshot_stride", &["stride"]),
    ("build.route", &["method"]),
    ("build.tol_outer", &["tolerance", "tol"]),
    ("build.tol_inner", &[]),
    ("build.max_outer", &["max_iterations"]),
    ("build.max_inner", &[]),
    ("build.uniqueness_probe", &["uniqueness"]),
    ("build.alt_seed", &[]),
    ("decay.m", &["weights", "exponents"]),
    ("decay.envelope_exponent", &["beta"]),
    ("decay.heat_samples", &["samples"]),
    ("stability.alpha", &[]),
    ("stability.amplitude", &["perturbation"]),
    ("stability.w0_seed", &[]),
    ("stability.w0_rho1", &[]),
    ("stability.horizon", &[]),
    ("stability.decay_target", &["target"]),
    ("stability.max_steps", &[]),
    ("stability.pairs", &["s_t_pairs"]),
    ("stability.linear_only", &["linear"]),
    ("verify.checkpoint", &["checkpoint_path"]),
    ("verify.residual_tolerance", &[]),
    ("sweep.command", &[]),
    ("sweep.parameter", &["param"]),
    ("sweep.values", &["grid_values"]),
];

/// Keys a sweep may vary.
const SWEEPABLE: &[&str] = &[
    "seed",
    "physics.nu",
    "physics.rho0",
    "physics.m_energy",
    "forcing.rho0",
    "forcing.rho1",
    "forcing.x_norm",
    "forcing.seed",
    "evolution.dt",
    "stability.amplitude",
    "stability.alpha",
];

/// Closest accepted key, judged on the full path, the leaf and its aliases.
pub fn suggest(unknown: &str) -> Option<String> {
    let u_leaf = leaf(unknown);
    let mut best: Option<(f64, &str)> = None;
    for (key, aliases) in KEYS {
        let mut score = strsim::normalized_damerau_levenshtein(unknown, key);
        score = score.max(strsim::normalized_damerau_levenshtein(u_leaf, leaf(key)));
        for a in *aliases {
            score = score.max(strsim::normalized_damerau_levenshtein(u_leaf, a));
        }
        if best.is_none_or(|(s, _)| score > s) {
            best = Some((score, key));
        }
    }
    best.filter(|(s, _)| *s >= 0.6).map(|(_, k)| k.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    BuildSteady,
    Decay,
    Stability,
    VerifyBounds,
    Sweep,
}

impl Command {
    pub const ALL: [Command; 5] = [
        Command::BuildSteady,
        Command::Decay,
        Command::Stability,
        Command::VerifyBounds,
        Command::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::BuildSteady => "build-steady",
            Command::Decay => "decay",
            Command::Stability => "stability",
            Command::VerifyBounds => "verify-bounds",
            Command::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command \"{s}\""))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RouteName {
    Direct,
    Quadrature,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeConfig {
    pub n: usize,
    pub period: f64,
    pub dealias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuildConfig {
    pub route: RouteName,
    pub tol_outer: f64,
    pub tol_inner: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub uniqueness_probe: bool,
    pub alt_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayConfig {
    pub m: Vec<u32>,
    pub envelope_exponent: f64,
    pub heat_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityConfig {
    pub alpha: f64,
    /// `|w0|_2 / |U|_2`.
    pub amplitude: f64,
    pub w0_seed: u64,
    /// Outer band radius of the seeded perturbation.
    pub w0_rho1: f64,
    pub horizon: f64,
    pub decay_target: f64,
    pub max_steps: usize,
    /// Explicit `(s, t)` pairs; spread over the run when absent.
    pub pairs: Option<Vec<(f64, f64)>>,
    pub linear_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub command: Command,
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub lattice: LatticeConfig,
    pub physics: PhysicalParams,
    pub forcing: ForcingSpec,
    pub evolution: EvolutionConfig,
    pub build: BuildConfig,
    pub decay: DecayConfig,
    pub stability: StabilityConfig,
    pub verify_checkpoint: Option<PathBuf>,
    /// Residual allowed by verify-bounds; `10 tol_outer` when absent.
    pub verify_residual: Option<f64>,
    pub sweep: Option<SweepConfig>,
    /// The flattened document this configuration was read from.
    #[serde(skip)]
    pub source: BTreeMap<String, toml::Value>,
}

impl ExperimentConfig {
    pub fn lattice(&self) -> Lattice {
        Lattice::new(self.lattice.n, self.lattice.period, self.lattice.dealias).expect("validated at parse time")
    }

    /// The same document with one key replaced, re-validated.
    pub fn with_override(&self, key: &str, value: f64) -> Result<ExperimentConfig, ConfigError> {
        let mut flat = self.source.clone();
        let v = if matches!(flat.get(key), Some(toml::Value::Integer(_))) || INTEGER_KEYS.contains(&key) {
            if value.fract() != 0.0 || value < 0.0 {
                return Err(ConfigError::Type {
                    key: key.to_string(),
                    expected: "a non-negative integer",
                });
            }
            toml::Value::Integer(value as i64)
        } else {
            toml::Value::Float(value)
        };
        flat.insert(key.to_string(), v);
        from_flat(flat)
    }
}

const INTEGER_KEYS: &[&str] = &["seed", "forcing.seed"];

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.message().to_string()))?;
    let mut flat = BTreeMap::new();
    flatten("", &table, &mut flat);
    from_flat(flat)
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, toml::Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

struct Reader<'a> {
    flat: &'a BTreeMap<String, toml::Value>,
}

impl Reader<'_> {
    fn get(&self, key: &'static str) -> Option<&toml::Value> {
        self.flat.get(key)
    }

    fn float(&self, key: &'static str) -> Result<Option<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(toml::Value::Float(x)) => Ok(Some(*x)),
            Some(toml::Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(type_err(key, "a number")),
        }
    }

    fn float_or(&self, key: &'static str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.float(key)?.unwrap_or(default))
    }

    fn required(&self, key: &'static str) -> Result<f64, ConfigError> {
        self.float(key)?.ok_or(ConfigError::Missing(key))
    }

    fn uint(&self, key: &'static str) -> Result<Option<u64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(toml::Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(_) => Err(type_err(key, "a non-negative integer")),
        }
    }

    fn uint_or(&self, key: &'static str, default: u64) -> Result<u64, ConfigError> {
        Ok(self.uint(key)?.unwrap_or(default))
    }

    fn boolean(&self, key: &'static str, default: bool) -> Result<bool, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(toml::Value::Boolean(b)) => Ok(*b),
            Some(_) => Err(type_err(key, "true or false")),
        }
    }

    fn string(&self, key: &'static str) -> Result<Option<&str>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(type_err(key, "a string")),
        }
    }

    fn array(&self, key: &'static str) -> Result<Option<&Vec<toml::Value>>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(toml::Value::Array(a)) => Ok(Some(a)),
            Some(_) => Err(type_err(key, "an array")),
        }
    }
}

fn type_err(key: &str, expected: &'static str) -> ConfigError {
    ConfigError::Type {
        key: key.to_string(),
        expected,
    }
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn as_f64(v: &toml::Value) -> Option<f64> {
    match v {
        toml::Value::Float(x) => Some(*x),
        toml::Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

pub fn from_flat(flat: BTreeMap<String, toml::Value>) -> Result<ExperimentConfig, ConfigError> {
    for key in flat.keys() {
        if !KEYS.iter().any(|(k, _)| k == key) {
            return Err(ConfigError::UnknownKey {
                key: key.clone(),
                suggestion: suggest(key),
            });
        }
    }
    let r = Reader { flat: &flat };
    let seed = r.uint_or("seed", 0)?;

    let lattice = LatticeConfig {
        n: r.uint_or("lattice.n", 32)? as usize,
        period: r.float_or("lattice.period", 1.0)?,
        dealias: r.float_or("lattice.dealias", DEFAULT_DEALIAS)?,
    };
    let lat = Lattice::new(lattice.n, lattice.period, lattice.dealias).map_err(|e| invalid("lattice", e.to_string()))?;

    let physics = PhysicalParams::new(
        r.required("physics.nu")?,
        r.required("physics.rho0")?,
        r.required("physics.m_energy")?,
    )
    .map_err(|e| invalid("physics", e.to_string()))?;

    let rho0 = r.float_or("forcing.rho0", physics.rho0)?;
    let forcing = ForcingSpec {
        rho0,
        rho1: r.float_or("forcing.rho1", rho0 + 1.0)?,
        target_x_norm: r.required("forcing.x_norm")?,
        seed: r.uint_or("forcing.seed", seed)?,
    };
    forcing.validate().map_err(|e| invalid("forcing", format!("ForcingSpec invariant violated: {e}")))?;
    if forcing.rho0 < physics.rho0 {
        return Err(invalid(
            "forcing.rho0",
            format!(
                "band starts at {} below the spectral gap physics.rho0 = {}; the forcing must vanish for |xi| < rho0",
                forcing.rho0, physics.rho0
            ),
        ));
    }

    let evolution = EvolutionConfig {
        dt: r.float_or("evolution.dt", 1e-3)?,
        horizon: r.float_or("evolution.horizon", 3.0)?,
        tail_tolerance: r.float_or("evolution.tail_tolerance", 0.0)?,
        snapshot_stride: r.uint_or("evolution.snapshot_stride", 1)? as usize,
        store_fields: false,
    };
    evolution.validate().map_err(|e| invalid("evolution", e.to_string()))?;
    let spacing = lat.grid_spacing();
    let diffusive = steadylab_core::evolution::C_CFL * spacing * spacing / physics.nu;
    if evolution.dt > diffusive {
        return Err(invalid(
            "evolution.dt",
            format!("exceeds the diffusive step limit {diffusive:.6e} of this lattice"),
        ));
    }

    let route = match r.string("build.route")?.unwrap_or("direct") {
        "direct" => RouteName::Direct,
        "quadrature" => RouteName::Quadrature,
        other => return Err(invalid("build.route", format!("expected \"direct\" or \"quadrature\", got \"{other}\""))),
    };
    let build = BuildConfig {
        route,
        tol_outer: r.float_or("build.tol_outer", 1e-8)?,
        tol_inner: r.float_or("build.tol_inner", 1e-10)?,
        max_outer: r.uint_or("build.max_outer", 60)? as usize,
        max_inner: r.uint_or("build.max_inner", 200)? as usize,
        uniqueness_probe: r.boolean("build.uniqueness_probe", false)?,
        alt_seed: r.uint_or("build.alt_seed", seed.wrapping_add(1))?,
    };
    for (key, v) in [("build.tol_outer", build.tol_outer), ("build.tol_inner", build.tol_inner)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(invalid(key, format!("must lie in (0, 1) (got {v})")));
        }
    }
    if build.max_outer == 0 || build.max_inner == 0 {
        return Err(invalid("build", "iteration limits must be at least 1"));
    }

    let m = match r.get("decay.m") {
        None => vec![4],
        Some(toml::Value::Integer(i)) => vec![*i],
        Some(toml::Value::Array(a)) => a
            .iter()
            .map(|v| v.as_integer().ok_or_else(|| type_err("decay.m", "an integer or an array of integers")))
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(type_err("decay.m", "an integer or an array of integers")),
    };
    if m.is_empty() || m.iter().any(|&x| x < 4 || x > 64) {
        return Err(invalid("decay.m", format!("bootstrap weights must satisfy 4 <= m <= 64 (got {m:?})")));
    }
    let decay = DecayConfig {
        m: m.into_iter().map(|x| x as u32).collect(),
        envelope_exponent: r.float_or("decay.envelope_exponent", 2.5)?,
        heat_samples: r.uint_or("decay.heat_samples", 50)? as usize,
    };
    if decay.heat_samples < 2 {
        return Err(invalid("decay.heat_samples", "need at least 2 samples"));
    }

    let pairs = match r.array("stability.pairs")? {
        None => None,
        Some(a) => {
            let mut out = Vec::new();
            for v in a {
                let pair = v.as_array().filter(|p| p.len() == 2).ok_or_else(|| type_err("stability.pairs", "an array of [s, t] pairs"))?;
                let (s, t) = match (as_f64(&pair[0]), as_f64(&pair[1])) {
                    (Some(s), Some(t)) => (s, t),
                    _ => return Err(type_err("stability.pairs", "an array of [s, t] pairs")),
                };
                if !(s >= 0.0 && s < t) {
                    return Err(invalid("stability.pairs", format!("need 0 <= s < t (got [{s}, {t}])")));
                }
                out.push((s, t));
            }
            Some(out)
        }
    };
    let stability = StabilityConfig {
        alpha: r.float_or("stability.alpha", 4.0)?,
        amplitude: r.float_or("stability.amplitude", 0.1)?,
        w0_seed: r.uint_or("stability.w0_seed", seed.wrapping_add(2))?,
        w0_rho1: r.float_or("stability.w0_rho1", 4.0)?,
        horizon: r.float_or("stability.horizon", 20.0)?,
        decay_target: r.float_or("stability.decay_target", 1e-3)?,
        max_steps: r.uint_or("stability.max_steps", 100_000)? as usize,
        pairs,
        linear_only: r.boolean("stability.linear_only", false)?,
    };
    if !(stability.alpha > 3.0) {
        return Err(invalid("stability.alpha", format!("the weight exponent must exceed 3 (got {})", stability.alpha)));
    }
    if !(stability.amplitude >= 0.0) {
        return Err(invalid("stability.amplitude", "must be non-negative"));
    }
    if !(stability.decay_target > 0.0 && stability.decay_target < 1.0) {
        return Err(invalid("stability.decay_target", "must lie in (0, 1)"));
    }
    if !(stability.horizon >= evolution.dt) {
        return Err(invalid("stability.horizon", "must be at least evolution.dt"));
    }
    if !(stability.w0_rho1 > 0.0) {
        return Err(invalid("stability.w0_rho1", "must be positive"));
    }

    let verify_checkpoint = r.string("verify.checkpoint")?.map(PathBuf::from);
    let verify_residual = r.float("verify.residual_tolerance")?;
    if verify_residual.is_some_and(|v| !(v > 0.0)) {
        return Err(invalid("verify.residual_tolerance", "must be positive"));
    }

    let sweep = if flat.keys().any(|k| k.starts_with("sweep.")) {
        let command: Command = r
            .string("sweep.command")?
            .ok_or(ConfigError::Missing("sweep.command"))?
            .parse()
            .map_err(|e: String| invalid("sweep.command", e))?;
        if command == Command::Sweep || command == Command::VerifyBounds {
            return Err(invalid("sweep.command", format!("cannot sweep \"{command}\"")));
        }
        let parameter = r.string("sweep.parameter")?.unwrap_or("forcing.x_norm").to_string();
        if !SWEEPABLE.contains(&parameter.as_str()) {
            return Err(invalid(
                "sweep.parameter",
                format!("\"{parameter}\" cannot be swept; choose one of {SWEEPABLE:?}"),
            ));
        }
        let values: Vec<f64> = r
            .array("sweep.values")?
            .ok_or(ConfigError::Missing("sweep.values"))?
            .iter()
            .map(|v| as_f64(v).ok_or_else(|| type_err("sweep.values", "an array of numbers")))
            .collect::<Result<_, _>>()?;
        if values.is_empty() {
            return Err(invalid("sweep.values", "need at least one value"));
        }
        Some(SweepConfig {
            command,
            parameter,
            values,
        })
    } else {
        None
    };

    let cfg = ExperimentConfig {
        seed,
        lattice,
        physics,
        forcing,
        evolution,
        build,
        decay,
        stability,
        verify_checkpoint,
        verify_residual,
        sweep,
        source: flat,
    };
    // every sweep point must be a valid configuration on its own
    if let Some(s) = &cfg.sweep {
        for v in &s.values {
            cfg.point(&s.parameter, *v).map_err(|e| invalid("sweep.values", format!("{} = {v}: {e}", s.parameter)))?;
        }
    }
    Ok(cfg)
}

impl ExperimentConfig {
    /// Configuration of one sweep point: the override applied and the sweep removed.
    pub fn point(&self, key: &str, value: f64) -> Result<ExperimentConfig, ConfigError> {
        let mut base = self.clone();
        base.source.retain(|k, _| !k.starts_with("sweep."));
        base.with_override(key, value)
    }
}
