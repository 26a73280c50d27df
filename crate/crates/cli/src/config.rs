//! Run configuration read from TOML or JSON and overridden by command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use vnb_core::CostWeights;
use vnb_planning::baselines::{CemConfig, PfConfig};
use vnb_planning::bench::{BenchConfig, Method};
use vnb_planning::planner::MpcConfig;
use vnb_planning::sim::{object_catalog, EnvOptions, FrictionRegime};
use vnb_planning::training::TrainConfig;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// Perception cost disabled.
    #[default]
    Simulation,
    /// Perception cost weighted by 0.3.
    SyntheticPerception,
}

impl Profile {
    pub const ALL: [Profile; 2] = [Profile::Simulation, Profile::SyntheticPerception];

    pub fn as_str(&self) -> &'static str {
        match self {
            Profile::Simulation => "simulation",
            Profile::SyntheticPerception => "synthetic-perception",
        }
    }

    pub fn lambda_v(&self) -> f64 {
        match self {
            Profile::Simulation => 0.0,
            Profile::SyntheticPerception => 0.3,
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Profile::ALL.iter().copied().find(|p| p.as_str() == s).ok_or_else(|| format!("unknown profile '{s}' (valid: simulation, synthetic-perception)"))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct WeightPaths {
    /// Multi-component belief networks used by VNB.
    pub mixture: Option<PathBuf>,
    /// Single-component belief networks used by Gauss, Gauss-CVaR and CEM.
    pub gaussian: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    pub path: PathBuf,
    pub episodes: usize,
    pub steps: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { path: PathBuf::from("data/trajectories.jsonl"), episodes: 8, steps: 40 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub cases: usize,
    pub trials: usize,
    pub belief_samples: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self { cases: 5, trials: 10_000, belief_samples: 4096 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub methods: Vec<Method>,
    pub regimes: Vec<FrictionRegime>,
    pub objects: Vec<String>,
    pub betas: Vec<f64>,
    pub seeds: usize,
    pub master_seed: u64,
    pub out: PathBuf,
    pub profile: Profile,
    /// Record wall-clock planning time; off reports zero times so outputs are reproducible.
    pub timing: bool,
    pub threads: usize,
    pub ema: f64,
    pub weights: WeightPaths,
    pub mpc: MpcConfig,
    pub cem: CemConfig,
    pub pf: PfConfig,
    pub cost: CostWeights,
    pub env: EnvOptions,
    pub data: DataConfig,
    pub train: TrainConfig,
    pub calibration: CalibrationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::Vnb],
            regimes: vec![FrictionRegime::Nominal],
            objects: object_catalog().into_iter().map(|o| o.name).collect(),
            betas: vec![0.5, 0.9, 0.95, 0.99],
            seeds: 3,
            master_seed: 0,
            out: PathBuf::from("out"),
            profile: Profile::Simulation,
            timing: true,
            threads: 0,
            ema: 0.3,
            weights: WeightPaths::default(),
            mpc: MpcConfig::default(),
            cem: CemConfig::default(),
            pf: PfConfig::default(),
            cost: CostWeights::default(),
            env: EnvOptions::default(),
            data: DataConfig::default(),
            train: TrainConfig::default(),
            calibration: CalibrationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Toml,
    Json,
}

impl Format {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Format::Json,
            _ => Format::Toml,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, format: Format) -> Result<Self, CliError> {
        let cfg: RunConfig = match format {
            Format::Toml => toml::from_str(text).map_err(|e| CliError::Config(format!("invalid TOML config: {e}")))?,
            Format::Json => serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON config: {e}")))?,
        };
        Ok(cfg)
    }

    pub fn to_string(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Toml => toml::to_string_pretty(self).map_err(|e| CliError::Config(format!("cannot serialize config: {e}"))),
            Format::Json => serde_json::to_string_pretty(self).map_err(|e| CliError::Config(format!("cannot serialize config: {e}"))),
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, Format::from_path(path))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.seeds == 0 {
            return Err(CliError::Config("seeds must be at least 1".into()));
        }
        self.bench_config().validate()?;
        self.train.validate().map_err(CliError::from)
    }

    /// Benchmark settings with the profile's perception weight applied.
    pub fn bench_config(&self) -> BenchConfig {
        BenchConfig {
            methods: self.methods.clone(),
            regimes: self.regimes.clone(),
            objects: self.objects.clone(),
            betas: self.betas.clone(),
            seeds: self.seeds,
            master_seed: self.master_seed,
            mpc: MpcConfig { lambda_v: self.profile.lambda_v(), ..self.mpc.clone() },
            cem: self.cem.clone(),
            pf: self.pf.clone(),
            weights: CostWeights { lambda_v: self.profile.lambda_v(), ..self.cost },
            env: self.env,
            ema: self.ema,
            timing: self.timing,
            threads: self.threads,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_both_formats() {
        let cfg = RunConfig { methods: vec![Method::Vnb, Method::Cem], seeds: 5, profile: Profile::SyntheticPerception, ..RunConfig::default() };
        for f in [Format::Toml, Format::Json] {
            let text = cfg.to_string(f).unwrap();
            assert_eq!(RunConfig::parse(&text, f).unwrap(), cfg);
        }
    }

    #[test]
    fn partial_config_uses_defaults() {
        let cfg = RunConfig::parse("seeds = 2\nmethods = [\"pf\"]\n[mpc]\nt_max = 5\n", Format::Toml).unwrap();
        assert_eq!(cfg.seeds, 2);
        assert_eq!(cfg.mpc.t_max, 5);
        assert_eq!(cfg.mpc.samples, 256);
        assert_eq!(cfg.methods, vec![Method::Pf]);
    }

    #[test]
    fn unknown_method_is_config_error() {
        assert!(matches!(RunConfig::parse("methods = [\"mppi\"]", Format::Toml), Err(CliError::Config(_))));
    }
}
