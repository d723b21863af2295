//! JSON run configurations. Field names carry their units.

use std::path::Path;

use polyphase::echo_sim::{ImpairmentConfig, RadarParams, TripEcho, TwoTripScenario};
use polyphase::optimizer::{ErrorFunctionConfig, ObjectiveTerms, OptimizerConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignConfig {
    pub m: usize,
    pub code_length: usize,
    pub filter_length: usize,
    pub mainlobe_width: usize,
    pub p: u32,
    pub starts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub objective: ObjectiveTerms,
    pub step_rad: f64,
    pub perturbation_rad: f64,
}

impl Default for DesignConfig {
    fn default() -> Self {
        let opt = OptimizerConfig::default();
        DesignConfig {
            m: 2,
            code_length: 40,
            filter_length: 480,
            mainlobe_width: 5,
            p: 1,
            starts: opt.starts,
            seed: opt.seed,
            max_iterations: opt.max_iterations,
            tolerance: opt.tolerance,
            objective: opt.terms,
            step_rad: opt.step,
            perturbation_rad: opt.perturbation,
        }
    }
}

impl DesignConfig {
    pub fn resolve(&self) -> Result<(ErrorFunctionConfig, OptimizerConfig), CliError> {
        let field = |name: &str, e: polyphase::Error| CliError::Config(format!("{name}: {e}"));
        if self.m == 0 {
            return Err(CliError::Config("m: must be at least 1".into()));
        }
        if self.code_length == 0 {
            return Err(CliError::Config("code_length: must be at least 1".into()));
        }
        if self.filter_length < self.code_length {
            return Err(CliError::Config("filter_length: must be at least code_length".into()));
        }
        let cfg = ErrorFunctionConfig::sidelobes(self.filter_length, self.mainlobe_width, self.p)
            .map_err(|e| field("mainlobe_width/p", e))?;
        let opt = OptimizerConfig {
            starts: self.starts,
            max_iterations: self.max_iterations,
            step: self.step_rad,
            tolerance: self.tolerance,
            seed: self.seed,
            perturbation: self.perturbation_rad,
            terms: self.objective,
            ..OptimizerConfig::default()
        };
        opt.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok((cfg, opt))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Corr,
    Ambiguity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub mode: EvalMode,
    pub sample_rate_hz: f64,
    pub doppler_start_hz: f64,
    pub doppler_stop_hz: f64,
    pub doppler_step_hz: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            mode: EvalMode::Corr,
            sample_rate_hz: 2e6,
            doppler_start_hz: 0.0,
            doppler_stop_hz: 2000.0,
            doppler_step_hz: 25.0,
        }
    }
}

impl EvalConfig {
    pub fn doppler_grid(&self) -> Result<Vec<f64>, CliError> {
        if !(self.doppler_step_hz > 0.0) || self.doppler_stop_hz < self.doppler_start_hz {
            return Err(CliError::Config(
                "doppler_step_hz must be positive and doppler_stop_hz >= doppler_start_hz".into(),
            ));
        }
        let n = ((self.doppler_stop_hz - self.doppler_start_hz) / self.doppler_step_hz + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| self.doppler_start_hz + i as f64 * self.doppler_step_hz).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub radar: RadarParams,
    pub trips: Vec<TripEcho>,
    pub impairments: ImpairmentConfig,
    pub pulses: usize,
    pub seed: u64,
    pub ensemble_size: usize,
    pub jitter_sweep_deg: Vec<f64>,
    pub jitter_seeds: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        let sc = TwoTripScenario::default();
        SimulateConfig {
            radar: sc.radar,
            trips: sc.trips,
            impairments: sc.impairments,
            pulses: sc.pulses,
            seed: 1,
            ensemble_size: 16,
            jitter_sweep_deg: vec![0.0, 0.25, 0.5],
            jitter_seeds: 64,
        }
    }
}

impl SimulateConfig {
    pub fn scenario(&self) -> Result<TwoTripScenario, CliError> {
        let sc = TwoTripScenario {
            radar: self.radar,
            trips: self.trips.clone(),
            impairments: self.impairments,
            pulses: self.pulses,
        };
        sc.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.ensemble_size == 0 {
            return Err(CliError::Config("ensemble_size: must be at least 1".into()));
        }
        if !self.jitter_sweep_deg.is_empty() && self.jitter_seeds == 0 {
            return Err(CliError::Config("jitter_seeds: must be at least 1".into()));
        }
        Ok(sc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CanVariant {
    Can,
    Wecan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CanRunConfig {
    pub variant: CanVariant,
    pub m: usize,
    pub code_length: usize,
    /// WeCAN only: lags `1..region` carry unit weight; absent means the
    /// central region `(L+M)/(2M)`.
    pub region: Option<usize>,
    pub max_cycles: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for CanRunConfig {
    fn default() -> Self {
        CanRunConfig {
            variant: CanVariant::Can,
            m: 2,
            code_length: 256,
            region: None,
            max_cycles: 2000,
            tolerance: 1e-6,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaselineConfig {
    /// Matched set of Sylvester Hadamard rows, 0-based.
    Hadamard { code_length: usize, rows: Vec<usize> },
    /// Matched set of Chu codes.
    Chu { code_length: usize, indices: Vec<i64> },
    /// LFM chirp with matched and minimum-ISL mismatched filters.
    Chirp {
        bandwidth_hz: f64,
        pulse_width_us: f64,
        sample_rate_hz: f64,
        filter_length: usize,
        mainlobe_width: usize,
    },
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig::Hadamard { code_length: 256, rows: vec![2, 3] }
    }
}
