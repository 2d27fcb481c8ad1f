use std::path::PathBuf;

use clap::ValueEnum;
use intham::margolus::MargolusRule;
use intham::model::FunctionSpec;
use intham::ModelSpec;
use serde::{Deserialize, Serialize};

use crate::error::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Trajectory,
    Invert,
    Shell,
    Spectral,
    Census,
    MargolusContrast,
    Lightcone,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartSpec {
    /// `Q` for pair models, `Φ` for fields.
    pub q: Option<Vec<i64>>,
    pub p: Option<Vec<i64>>,
    /// Draw every entry uniformly from `[−a, a]` with the run seed.
    pub random_amplitude: Option<i64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralOptions {
    #[serde(default = "default_radius")]
    pub radius: f64,
    pub terms: Option<usize>,
    #[serde(default = "default_cap")]
    pub cap: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            radius: default_radius(),
            terms: None,
            cap: default_cap(),
            alpha: default_alpha(),
            radii: default_radii(),
        }
    }
}

fn default_radius() -> f64 {
    20.0
}
fn default_cap() -> usize {
    64
}
fn default_alpha() -> f64 {
    0.3
}
fn default_radii() -> Vec<f64> {
    vec![1e3, 1e4, 1e5]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CensusOptions {
    pub kinetic: FunctionSpec,
    pub potential: FunctionSpec,
    pub e_min: i64,
    pub e_max: i64,
    #[serde(default = "one")]
    pub e_step: i64,
    #[serde(default = "default_fit_min")]
    pub fit_min: i64,
}

fn one() -> i64 {
    1
}
fn default_fit_min() -> i64 {
    10
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MargolusOptions {
    pub rule: MargolusRule,
    #[serde(default = "default_values")]
    pub search_values: Vec<i64>,
    #[serde(default = "default_search_size")]
    pub search_size: usize,
}

fn default_values() -> Vec<i64> {
    vec![-1, 0, 1]
}
fn default_search_size() -> usize {
    4
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightconeOptions {
    pub site: usize,
    #[serde(default = "one")]
    pub delta: i64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelSpec>,
    pub mode: Option<Mode>,
    pub steps: Option<u64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub start: Option<StartSpec>,
    pub energy: Option<i64>,
    pub energies: Option<Vec<i64>>,
    pub spectral: Option<SpectralOptions>,
    pub census: Option<CensusOptions>,
    pub margolus: Option<MargolusOptions>,
    pub lightcone: Option<LightconeOptions>,
}

/// A configuration with overrides applied and mode requirements checked.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub mode: Mode,
    pub steps: u64,
    pub seed: u64,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, RunError> {
        serde_json::from_str(text).map_err(|e| RunError::Config(format!("config: {e}")))
    }

    pub fn resolve(
        self,
        mode: Option<Mode>,
        steps: Option<u64>,
        seed: Option<u64>,
        out: Option<PathBuf>,
    ) -> Result<Resolved, RunError> {
        let mode = mode
            .or(self.mode)
            .ok_or_else(|| RunError::Config("no mode given".into()))?;
        let steps = steps.or(self.steps).unwrap_or(0);
        let seed = seed.or(self.seed).unwrap_or(0);
        let out = out
            .or_else(|| self.out.clone())
            .unwrap_or_else(|| PathBuf::from("intham-out"));
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(RunError::Config(format!("mode {mode:?} requires {what}")))
            }
        };
        let has_model = self.model.is_some();
        let is_field = matches!(self.model, Some(ModelSpec::Field { .. }));
        let is_separable = matches!(self.model, Some(ModelSpec::Separable { .. }));
        match mode {
            Mode::Trajectory | Mode::Invert => {
                need(has_model, "a model")?;
                need(self.start.is_some(), "a start state")?;
            }
            Mode::Shell | Mode::Spectral => {
                need(is_separable, "a separable model")?;
                need(
                    self.energy.is_some() || self.energies.is_some(),
                    "an energy or energies",
                )?;
            }
            Mode::Census => need(self.census.is_some(), "census options")?,
            Mode::MargolusContrast => {
                need(is_field, "a field model")?;
                need(self.margolus.is_some(), "margolus options")?;
                need(self.start.is_some(), "a start state")?;
            }
            Mode::Lightcone => {
                need(is_field, "a field model")?;
                need(self.lightcone.is_some(), "lightcone options")?;
                need(self.start.is_some(), "a start state")?;
            }
        }
        if let Some(c) = &self.census {
            if c.e_min > c.e_max || c.e_step <= 0 || c.e_min < 0 {
                return Err(RunError::Config("census energy range is empty".into()));
            }
        }
        Ok(Resolved {
            config: self,
            mode,
            steps,
            seed,
            out,
        })
    }
}
