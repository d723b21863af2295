//! Weather echo simulation for second-trip suppression experiments.
//!
//! Slow-time echo series are synthesized per range gate, coded pulse by pulse
//! with an alternating two-code schedule, folded so that second-trip echoes
//! carry the previous pulse's code, impaired with phase jitter and noise, and
//! compressed with either the first-trip or second-trip filter schedule.

mod metrics;
mod series;
mod spectrum;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use metrics::{
    jitter_psl_study, single_target_cross_psl, suppression_db, suppression_ensemble, suppression_from_train,
    JitterPoint, SuppressionReport,
};
pub use series::{apply_impairments, gaussian_echo_series, pulse_pair_velocity};
pub use spectrum::{doppler_spectrum, mean_doppler_spectrum, DopplerSpectrum, DopplerWindow};
pub use train::{build_two_trip_train, compress, PulseTrain};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadarParams {
    pub frequency_hz: f64,
    pub pri_s: f64,
    pub sample_rate_hz: f64,
    pub pulse_width_s: f64,
}

impl Default for RadarParams {
    /// Ku-band weather radar: 13.91 GHz, 500 µs PRI, 2 MHz sampling, 20 µs
    /// pulse (40 samples).
    fn default() -> Self {
        RadarParams {
            frequency_hz: 13.91e9,
            pri_s: 500e-6,
            sample_rate_hz: 2e6,
            pulse_width_s: 20e-6,
        }
    }
}

impl RadarParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("frequency_hz", self.frequency_hz),
            ("pri_s", self.pri_s),
            ("sample_rate_hz", self.sample_rate_hz),
            ("pulse_width_s", self.pulse_width_s),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(format!("{name} must be positive and finite")));
            }
        }
        if self.pri_s <= self.pulse_width_s {
            return Err(invalid("pri_s must exceed pulse_width_s"));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency_hz
    }

    /// `c·pri/2`.
    pub fn unambiguous_range(&self) -> f64 {
        SPEED_OF_LIGHT * self.pri_s / 2.0
    }

    /// `λ/(4·pri)`.
    pub fn nyquist_velocity(&self) -> f64 {
        self.wavelength() / (4.0 * self.pri_s)
    }

    /// Fast-time samples per receive window.
    pub fn window_samples(&self) -> usize {
        (self.pri_s * self.sample_rate_hz).round() as usize
    }

    pub fn code_samples(&self) -> usize {
        (self.pulse_width_s * self.sample_rate_hz).round() as usize
    }
}

/// Which trip an echo belongs to. Serialized as `1` or `2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Trip {
    First,
    Second,
}

impl TryFrom<u8> for Trip {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Trip::First),
            2 => Ok(Trip::Second),
            other => Err(format!("trip must be 1 or 2, got {other}")),
        }
    }
}

impl From<Trip> for u8 {
    fn from(t: Trip) -> u8 {
        match t {
            Trip::First => 1,
            Trip::Second => 2,
        }
    }
}

/// A block of contiguous range gates filled with weather echo from one trip.
/// Gates are fast-time sample indices within the receive window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripEcho {
    pub trip: Trip,
    pub gate_start: usize,
    /// Exclusive.
    pub gate_end: usize,
    pub power_db: f64,
    pub velocity_mps: f64,
    pub spectral_width_mps: f64,
}

impl TripEcho {
    pub fn gates(&self) -> std::ops::Range<usize> {
        self.gate_start..self.gate_end
    }

    pub fn validate(&self, radar: &RadarParams) -> Result<()> {
        if self.gate_start >= self.gate_end {
            return Err(invalid("trip gate span is empty"));
        }
        let w = radar.window_samples();
        if self.gate_end > w {
            return Err(invalid(format!(
                "trip gate span ends at {} beyond the {w}-sample receive window",
                self.gate_end
            )));
        }
        series::check_echo(2, self.velocity_mps, self.spectral_width_mps, radar)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImpairmentConfig {
    pub phase_jitter_rms_deg: f64,
    /// `None` or `+inf` disables the noise.
    pub snr_db: Option<f64>,
    pub system_phase_rad: f64,
}

impl Default for ImpairmentConfig {
    fn default() -> Self {
        ImpairmentConfig {
            phase_jitter_rms_deg: 0.0,
            snr_db: None,
            system_phase_rad: 0.0,
        }
    }
}

impl ImpairmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.phase_jitter_rms_deg >= 0.0) || !self.phase_jitter_rms_deg.is_finite() {
            return Err(invalid("phase_jitter_rms_deg must be nonnegative"));
        }
        if !self.system_phase_rad.is_finite() {
            return Err(invalid("system_phase_rad must be finite"));
        }
        if matches!(self.snr_db, Some(s) if s.is_nan() || s == f64::NEG_INFINITY) {
            return Err(invalid("snr_db must be a number or +inf"));
        }
        Ok(())
    }
}

/// Everything needed to regenerate a two-trip experiment apart from the code
/// set and the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoTripScenario {
    pub radar: RadarParams,
    pub trips: Vec<TripEcho>,
    pub impairments: ImpairmentConfig,
    pub pulses: usize,
}

impl Default for TwoTripScenario {
    /// Equal-power trips at ±5 m/s sharing gates 300..500, 128 pulses and
    /// 60 dB SNR.
    fn default() -> Self {
        let trip = |trip, velocity_mps| TripEcho {
            trip,
            gate_start: 300,
            gate_end: 500,
            power_db: 0.0,
            velocity_mps,
            spectral_width_mps: 1.0,
        };
        TwoTripScenario {
            radar: RadarParams::default(),
            trips: vec![trip(Trip::First, 5.0), trip(Trip::Second, -5.0)],
            impairments: ImpairmentConfig { snr_db: Some(60.0), ..Default::default() },
            pulses: 128,
        }
    }
}

impl TwoTripScenario {
    pub fn validate(&self) -> Result<()> {
        self.radar.validate()?;
        self.impairments.validate()?;
        if self.trips.is_empty() {
            return Err(invalid("scenario has no trips"));
        }
        if self.pulses < 8 {
            return Err(invalid("scenario needs at least 8 pulses"));
        }
        self.trips.iter().try_for_each(|t| t.validate(&self.radar))
    }
}
