//! TOML run configuration.
//!
//! A config names a catalog scenario (default `paper-experimental`) and
//! overrides any of its parameters. Keys match the field names of
//! [`SourceParams`], [`BenchParams`] and [`SimConfig`]; units are SI except
//! `idler_loss_db`.
//!
//! ```toml
//! scenario = "paper-experimental"
//!
//! [source]
//! mu = 6.6e6
//! delta_t = 3e-9
//!
//! [trigger]
//! n_t = 124302.0
//!
//! [sim]
//! duration = 10.0
//! seed = 7
//! ```
//!
//! Setting `gamma` alone drops the scenario's `gamma_prep`; setting
//! `gamma_prep` alone derives `gamma` through `idler_loss_db`. In `[trigger]`,
//! `n_t` (observed herald rate) derives `trigger_transmission`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{
    collection_from_preparation, derive_trigger_transmission, make_scenario, Scenario, SourceParams,
    PAPER_EXPERIMENTAL,
};
use crate::error::{Error, Result};
use crate::estimator::{BenchParams, BootstrapOptions};
use crate::simulator::{Engine, SimConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    #[serde(skip_serializing_if = "Option::is_none")]
    scenario: Option<String>,
    #[serde(default)]
    source: SourceSection,
    #[serde(default)]
    trigger: TriggerSection,
    #[serde(default)]
    idler: IdlerSection,
    #[serde(default)]
    bench: BenchSection,
    #[serde(default)]
    sim: SimSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_prep: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    idler_loss_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coherence_time: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TriggerSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    eta_trigger: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trigger_transmission: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dark_rate_trigger: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_t: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IdlerSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    eta_idler: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dark_rate_idler: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    splitter_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    correction_kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    multiphoton_correction: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta_rel_sigma: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    duration: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    replicas: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dead_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    engine: Option<Engine>,
}

/// Simulation settings that are not physical parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub duration: f64,
    pub seed: u64,
    pub replicas: u32,
    pub dead_time: f64,
    pub engine: Engine,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            duration: 10.0,
            seed: 1,
            replicas: 1,
            dead_time: 0.0,
            engine: Engine::default(),
        }
    }
}

/// Relative uncertainty of the idler detector efficiency used in error bars.
pub const DEFAULT_ETA_REL_SIGMA: f64 = 0.05;

/// A fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub scenario: String,
    pub params: SourceParams,
    pub bench: BenchParams,
    pub eta_rel_sigma: f64,
    pub sim: SimSettings,
}

impl Config {
    pub fn from_scenario(s: &Scenario) -> Self {
        Config {
            scenario: s.name.clone(),
            params: s.params,
            bench: BenchParams::from_source(&s.params),
            eta_rel_sigma: DEFAULT_ETA_REL_SIGMA,
            sim: SimSettings::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: File = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        resolve(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Config::parse(&text)
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            params: self.params,
            duration: self.sim.duration,
            seed: self.sim.seed,
            replicas: self.sim.replicas,
            dead_time: self.sim.dead_time,
            engine: self.sim.engine,
        }
    }

    pub fn bootstrap_options(&self, n_resamples: usize, seed: u64) -> BootstrapOptions {
        BootstrapOptions { n_resamples, seed, eta_rel_sigma: self.eta_rel_sigma }
    }

    /// Explicit TOML for every value; parses back to an equal `Config`.
    pub fn to_toml(&self) -> String {
        let p = &self.params;
        let file = File {
            scenario: Some(self.scenario.clone()),
            source: SourceSection {
                mu: Some(p.mu),
                delta_t: Some(p.delta_t),
                gamma: Some(p.gamma),
                gamma_prep: p.gamma_prep,
                idler_loss_db: Some(p.idler_loss_db),
                coherence_time: Some(p.coherence_time),
            },
            trigger: TriggerSection {
                eta_trigger: Some(p.eta_trigger),
                trigger_transmission: Some(p.trigger_transmission),
                dark_rate_trigger: Some(p.dark_rate_trigger),
                n_t: None,
            },
            idler: IdlerSection {
                eta_idler: Some(p.eta_idler),
                dark_rate_idler: Some(p.dark_rate_idler),
            },
            bench: BenchSection {
                splitter_t: Some(p.splitter_t),
                correction_kappa: self.bench.correction_kappa,
                multiphoton_correction: Some(self.bench.multiphoton_correction),
                eta_rel_sigma: Some(self.eta_rel_sigma),
            },
            sim: SimSection {
                duration: Some(self.sim.duration),
                seed: Some(self.sim.seed),
                replicas: Some(self.sim.replicas),
                dead_time: Some(self.sim.dead_time),
                engine: Some(self.sim.engine),
            },
        };
        toml::to_string(&file).expect("config values are plain numbers and strings")
    }
}

fn resolve(file: File) -> Result<Config> {
    let name = file.scenario.as_deref().unwrap_or(PAPER_EXPERIMENTAL);
    let scenario = make_scenario(name)?;
    let mut p = scenario.params;

    let src = &file.source;
    set(&mut p.mu, src.mu);
    set(&mut p.delta_t, src.delta_t);
    set(&mut p.idler_loss_db, src.idler_loss_db);
    set(&mut p.coherence_time, src.coherence_time);
    match (src.gamma, src.gamma_prep) {
        (Some(g), prep) => {
            p.gamma = g;
            p.gamma_prep = prep;
        }
        (None, Some(prep)) => {
            p.gamma_prep = Some(prep);
            p.gamma = collection_from_preparation(prep, p.idler_loss_db)?;
        }
        (None, None) => {
            if let (Some(prep), Some(_)) = (p.gamma_prep, src.idler_loss_db) {
                p.gamma = collection_from_preparation(prep, p.idler_loss_db)?;
            }
        }
    }

    let trig = &file.trigger;
    set(&mut p.eta_trigger, trig.eta_trigger);
    set(&mut p.dark_rate_trigger, trig.dark_rate_trigger);
    match (trig.trigger_transmission, trig.n_t) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "give either trigger_transmission or n_t in [trigger], not both".into(),
            ))
        }
        (Some(t), None) => p.trigger_transmission = t,
        (None, Some(n_t)) => {
            p.trigger_transmission =
                derive_trigger_transmission(n_t, p.dark_rate_trigger, p.eta_trigger, p.mu)?;
        }
        (None, None) => {}
    }

    set(&mut p.eta_idler, file.idler.eta_idler);
    set(&mut p.dark_rate_idler, file.idler.dark_rate_idler);
    set(&mut p.splitter_t, file.bench.splitter_t);
    p.validate()?;

    let mut bench = BenchParams::from_source(&p);
    bench.correction_kappa = file.bench.correction_kappa;
    if let Some(m) = file.bench.multiphoton_correction {
        bench.multiphoton_correction = m;
    }
    bench.validate()?;
    let eta_rel_sigma = file.bench.eta_rel_sigma.unwrap_or(DEFAULT_ETA_REL_SIGMA);
    if !(eta_rel_sigma.is_finite() && eta_rel_sigma >= 0.0) {
        return Err(Error::Config("eta_rel_sigma must be >= 0".into()));
    }

    let defaults = SimSettings::default();
    let sim = SimSettings {
        duration: file.sim.duration.unwrap_or(defaults.duration),
        seed: file.sim.seed.unwrap_or(defaults.seed),
        replicas: file.sim.replicas.unwrap_or(defaults.replicas),
        dead_time: file.sim.dead_time.unwrap_or(defaults.dead_time),
        engine: file.sim.engine.unwrap_or(defaults.engine),
    };

    Ok(Config {
        scenario: scenario.name,
        params: p,
        bench,
        eta_rel_sigma,
        sim,
    })
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}
