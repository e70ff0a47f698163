//! Run configuration files (strict TOML).
//!
//! ```toml
//! name = "chain-sweep"
//! L = [64, 128]          # one value or a list
//! p = [0.25, 0.5, 0.75]  # one value or a list
//! n_traj = 10000
//! master_seed = 1
//! dimension = 1          # 1 or 2
//! boundary = "periodic"  # or "open"
//! scheme = "fixed"       # fixed | dilute | random
//! theta = "pi/4"
//! q = 0.015625           # dilute only; default 2/N
//! per_site = false       # dilute only
//! t_max = 128            # default 2L (1D) or L (2D)
//! initial = "theta"      # theta | zero | random | an angle such as "3pi/4"
//! measure = "t_unit"     # t_unit | nullity | stabilizer_renyi2
//! mode = "parity"        # parity | full; default parity for fixed pi/4
//! observables = ["magic_density", "mutual_magic_half"]
//! times = "final"        # final | "every:K" | "log:K" | [t1, t2, ...]
//! window_average = false
//! records = false        # write per-trajectory JSON lines
//! output = "runs/chain-sweep"
//! ```
//!
//! Unknown keys are rejected. Only `L`, `p` and `n_traj` are required.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::circuit::{AngleScheme, CircuitError, CircuitParams, EngineMode, InitialPhases, ScheduleEntry, Times};
use crate::lattice::{Boundary, LatticeSpec};
use crate::observables::{MagicMeasure, ObservableId};
use crate::phase::PhaseValue;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("parity mode requires the fixed pi/4 scheme with pi/4 initial phases")]
    ParityScheme,
}

impl From<CircuitError> for ConfigError {
    fn from(e: CircuitError) -> Self {
        match e {
            CircuitError::ParityScheme => ConfigError::ParityScheme,
            other => ConfigError::Invalid(other.to_string()),
        }
    }
}

/// A scalar or a list in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    #[default]
    Fixed,
    Dilute,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimesSpec {
    Named(String),
    List(Vec<usize>),
}

impl TimesSpec {
    pub fn resolve(&self) -> Result<Times, ConfigError> {
        match self {
            TimesSpec::List(v) => Ok(Times::At(v.clone())),
            TimesSpec::Named(s) => {
                let s = s.trim();
                if s == "final" {
                    return Ok(Times::Final);
                }
                let (kind, k) = s.split_once(':').ok_or_else(|| ConfigError::Invalid(format!("times = {s:?}")))?;
                let k: usize = k.trim().parse().map_err(|_| ConfigError::Invalid(format!("times = {s:?}")))?;
                match kind.trim() {
                    "every" => Ok(Times::Every(k)),
                    "log" => Ok(Times::Log(k)),
                    _ => Err(ConfigError::Invalid(format!("times = {s:?}"))),
                }
            }
        }
    }
}

fn default_seed() -> u64 {
    1
}

fn default_dimension() -> u8 {
    1
}

fn default_theta() -> String {
    "pi/4".into()
}

fn default_observables() -> Vec<ObservableId> {
    vec![ObservableId::MagicDensity, ObservableId::MutualMagicHalf]
}

fn default_times() -> TimesSpec {
    TimesSpec::Named("final".into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(rename = "L")]
    pub l: OneOrMany<usize>,
    pub p: OneOrMany<f64>,
    pub n_traj: u64,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default = "default_dimension")]
    pub dimension: u8,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default)]
    pub scheme: SchemeKind,
    #[serde(default = "default_theta")]
    pub theta: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default)]
    pub per_site: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MagicMeasure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<EngineMode>,
    #[serde(default = "default_observables")]
    pub observables: Vec<ObservableId>,
    #[serde(default = "default_times")]
    pub times: TimesSpec,
    #[serde(default)]
    pub window_average: bool,
    #[serde(default)]
    pub records: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    /// The minimal config: everything else at its default.
    pub fn minimal(l: usize, p: f64, n_traj: u64) -> Self {
        toml::from_str(&format!("L = {l}\np = {p:?}\nn_traj = {n_traj}")).expect("minimal config parses")
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.l.to_vec()
    }

    pub fn p_values(&self) -> Vec<f64> {
        self.p.to_vec()
    }

    pub fn theta_value(&self) -> Result<PhaseValue, ConfigError> {
        self.theta.parse().map_err(|e| ConfigError::Invalid(format!("theta: {e}")))
    }

    pub fn lattice(&self, l: usize) -> LatticeSpec {
        LatticeSpec { dimension: self.dimension, l, boundary: self.boundary }
    }

    /// The engine mode after defaults: parity for the fixed pi/4 scheme with
    /// default initial phases, full otherwise.
    pub fn resolved_mode(&self) -> Result<EngineMode, ConfigError> {
        if let Some(m) = self.mode {
            return Ok(m);
        }
        let fixed_quarter = self.scheme == SchemeKind::Fixed && self.theta_value()? == PhaseValue::PI_4;
        let default_initial = matches!(self.initial.as_deref(), None | Some("theta") | Some("pi/4"));
        Ok(if fixed_quarter && default_initial { EngineMode::Parity } else { EngineMode::Full })
    }

    /// Circuit parameters of one `(L, p)` cell.
    pub fn params_for(&self, l: usize, p: f64) -> Result<CircuitParams, ConfigError> {
        let lattice = self.lattice(l);
        lattice.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let theta = self.theta_value()?;
        let scheme = match self.scheme {
            SchemeKind::Fixed => AngleScheme::Fixed { theta },
            SchemeKind::Dilute => AngleScheme::Dilute {
                theta,
                q: self.q.unwrap_or(2.0 / lattice.n_sites() as f64),
                per_site: self.per_site,
            },
            SchemeKind::Random => AngleScheme::RandomUniform,
        };
        let initial = match self.initial.as_deref() {
            None => scheme.default_initial(),
            Some("theta") => InitialPhases::Uniform { phase: theta },
            Some("zero") => InitialPhases::Uniform { phase: PhaseValue::ZERO },
            Some("random") => InitialPhases::Random,
            Some(a) => InitialPhases::Uniform {
                phase: a.parse().map_err(|e| ConfigError::Invalid(format!("initial: {e}")))?,
            },
        };
        let times = self.times.resolve()?;
        let mut params = CircuitParams::new(lattice, p, scheme)
            .with_initial(initial)
            .with_mode(self.resolved_mode()?)
            .with_schedule(self.observables.iter().map(|&id| ScheduleEntry { id, times: times.clone() }).collect());
        if !params.scheme.is_exact() || matches!(params.initial, InitialPhases::Random) {
            params.measure = MagicMeasure::Nullity;
        }
        if let Some(m) = self.measure {
            params.measure = m;
        }
        if let Some(t) = self.t_max {
            params.t_max = t;
        }
        params.window_average = self.window_average;
        params.validate()?;
        Ok(params)
    }

    /// Checks every cell of the sweep.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.sizes().is_empty() || self.p_values().is_empty() {
            return Err(ConfigError::Invalid("L and p need at least one value".into()));
        }
        if self.n_traj == 0 {
            return Err(ConfigError::Invalid("n_traj must be at least 1".into()));
        }
        if self.observables.is_empty() {
            return Err(ConfigError::Invalid("observables must not be empty".into()));
        }
        for &l in &self.sizes() {
            for &p in &self.p_values() {
                self.params_for(l, p)?;
            }
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    RunConfig::parse(&text)
}

pub fn save_config(config: &RunConfig, path: &Path) -> Result<(), ConfigError> {
    std::fs::write(path, config.to_toml()).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })
}
