//! Experiment configuration: one flat JSON object.
//!
//! ```json
//! {
//!   "model": "suarez-scarani",
//!   "visibility": 1.0,
//!   "local_strategy": "product",
//!   "n": 2,
//!   "alice_t": 5.0, "alice_x": -5.0,
//!   "bob_t": 5.0,   "bob_x": 5.0,
//!   "beta_a": -0.5, "beta_b": 0.5,
//!   "trials": 1000000,
//!   "seed": 7
//! }
//! ```
//!
//! Every key is optional; see [`ExperimentConfig::default`] for the
//! defaults. Timing comes either from the six geometry keys or from
//! `timing`, never both; with neither, the nonlocal `after-after` branch is
//! used.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use chainbell::chainedbell::{ChainedConfig, InterferometerParams, DEFAULT_N_MAX};
use chainbell::models::{
    LocalDeterministicModel, LocalStrategy, OutcomeModel, QuantumModel, SignalingToyModel,
    SuarezScaraniModel,
};
use chainbell::montecarlo::{effective_visibility, SettingChoice, DEFAULT_Z_THRESHOLD};
use chainbell::spacetime::{ApparatusGeometry, Boost, Event, TimingClass};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Quantum,
    SuarezScarani,
    Local,
    SignalingToy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChoiceKind {
    ChainPairs,
    RandomUniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub visibility: f64,
    pub accidental_fraction: f64,
    pub local_strategy: String,
    pub delta: f64,

    pub n: usize,
    pub theta: f64,
    pub n_max: usize,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_b: Option<f64>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub alice_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alice_x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bob_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bob_x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<String>,

    pub trials: u64,
    pub seed: u64,
    pub setting_choice: ChoiceKind,
    pub phase_points: usize,
    pub z_threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Quantum,
            visibility: 1.0,
            accidental_fraction: 0.0,
            local_strategy: "product".into(),
            delta: 0.25,
            n: 2,
            theta: PI,
            n_max: DEFAULT_N_MAX,
            omega_a: None,
            omega_b: None,
            s_a: None,
            s_b: None,
            alice_t: None,
            alice_x: None,
            bob_t: None,
            bob_x: None,
            beta_a: None,
            beta_b: None,
            timing: None,
            trials: 100_000,
            seed: 1,
            setting_choice: ChoiceKind::ChainPairs,
            phase_points: 16,
            z_threshold: DEFAULT_Z_THRESHOLD,
            workers: None,
            out_dir: PathBuf::from("."),
        }
    }
}

fn key_error(key: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("key `{key}`: {e}"))
}

/// Where the timing class comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimingSource {
    Geometry(ApparatusGeometry),
    Explicit(TimingClass),
    Default,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("line {}, column {}: {e}", e.line(), e.column())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn chained_config(&self) -> Result<ChainedConfig, CliError> {
        ChainedConfig::new(self.n, self.theta, self.visibility)
            .map_err(|e| key_error("n/theta/visibility", e))
    }

    pub fn interferometer(&self) -> Result<InterferometerParams, CliError> {
        let d = InterferometerParams::default();
        InterferometerParams::new(
            self.omega_a.unwrap_or(d.omega_a()),
            self.omega_b.unwrap_or(d.omega_b()),
            self.s_a.unwrap_or(d.short_a()),
            self.s_b.unwrap_or(d.short_b()),
        )
        .map_err(|e| key_error("omega_a/omega_b/s_a/s_b", e))
    }

    pub fn local_strategy(&self) -> Result<LocalStrategy, CliError> {
        self.local_strategy
            .parse()
            .map_err(|e| key_error("local_strategy", e))
    }

    pub fn model(&self) -> Result<Box<dyn OutcomeModel>, CliError> {
        let v = effective_visibility(self.visibility, self.accidental_fraction)
            .map_err(|e| key_error("visibility/accidental_fraction", e))?;
        let model: Box<dyn OutcomeModel> = match self.model {
            ModelKind::Quantum => {
                Box::new(QuantumModel::new(v).map_err(|e| key_error("visibility", e))?)
            }
            ModelKind::SuarezScarani => Box::new(
                SuarezScaraniModel::new(v, self.local_strategy()?)
                    .map_err(|e| key_error("visibility", e))?,
            ),
            ModelKind::Local => Box::new(LocalDeterministicModel),
            ModelKind::SignalingToy => {
                Box::new(SignalingToyModel::new(self.delta).map_err(|e| key_error("delta", e))?)
            }
        };
        Ok(model)
    }

    pub fn setting_choice(&self) -> SettingChoice {
        match self.setting_choice {
            ChoiceKind::ChainPairs => SettingChoice::ChainPairs,
            ChoiceKind::RandomUniform => SettingChoice::RandomUniform,
        }
    }

    pub fn timing_source(&self) -> Result<TimingSource, CliError> {
        let keys = [
            ("alice_t", self.alice_t),
            ("alice_x", self.alice_x),
            ("bob_t", self.bob_t),
            ("bob_x", self.bob_x),
            ("beta_a", self.beta_a),
            ("beta_b", self.beta_b),
        ];
        let given: Vec<_> = keys.iter().filter(|(_, v)| v.is_some()).collect();
        if given.is_empty() {
            return match &self.timing {
                Some(t) => Ok(TimingSource::Explicit(
                    t.parse().map_err(|e| key_error("timing", e))?,
                )),
                None => Ok(TimingSource::Default),
            };
        }
        if self.timing.is_some() {
            return Err(CliError::Config(
                "give either the geometry keys or `timing`, not both".into(),
            ));
        }
        if let Some((missing, _)) = keys.iter().find(|(_, v)| v.is_none()) {
            return Err(key_error(missing, "geometry is incomplete"));
        }
        let val = |i: usize| keys[i].1.unwrap();
        let alice = Event::new(val(0), val(1)).map_err(|e| key_error("alice_t/alice_x", e))?;
        let bob = Event::new(val(2), val(3)).map_err(|e| key_error("bob_t/bob_x", e))?;
        let beta_a = Boost::new(val(4)).map_err(|e| key_error("beta_a", e))?;
        let beta_b = Boost::new(val(5)).map_err(|e| key_error("beta_b", e))?;
        ApparatusGeometry::new(alice, bob, beta_a, beta_b)
            .map(TimingSource::Geometry)
            .map_err(|e| key_error("alice_*/bob_*", e))
    }

    pub fn timing_class(&self) -> Result<TimingClass, CliError> {
        match self.timing_source()? {
            TimingSource::Geometry(g) => {
                chainbell::spacetime::classify_timing(&g).map_err(|e| key_error("geometry", e))
            }
            TimingSource::Explicit(t) => Ok(t),
            TimingSource::Default => Ok(TimingClass::AfterAfter),
        }
    }

    /// Checks every key that any command may read.
    pub fn validate(&self) -> Result<(), CliError> {
        self.chained_config()?;
        self.interferometer()?;
        self.model()?;
        self.timing_class()?;
        if self.trials == 0 {
            return Err(key_error("trials", "must be at least 1"));
        }
        if self.z_threshold.is_nan() || self.z_threshold <= 0.0 {
            return Err(key_error("z_threshold", "must be positive"));
        }
        if self.workers == Some(0) {
            return Err(key_error("workers", "must be at least 1"));
        }
        Ok(())
    }
}
