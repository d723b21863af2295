use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{PulseTrain, RadarParams};
use crate::correlation::{to_dbc, DB_FLOOR};
use crate::error::{invalid, Result};
use crate::fft;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DopplerWindow {
    None,
    #[default]
    VonHann,
}

impl DopplerWindow {
    fn weights(self, k: usize) -> Vec<f64> {
        match self {
            DopplerWindow::None => vec![1.0; k],
            DopplerWindow::VonHann => (0..k)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / (k - 1) as f64).cos())
                .collect(),
        }
    }
}

/// Periodogram over slow time with bins ordered by increasing velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct DopplerSpectrum {
    pub velocity_mps: Vec<f64>,
    /// Linear power per bin, normalized by the window energy.
    pub power: Vec<f64>,
}

impl DopplerSpectrum {
    pub fn power_db(&self) -> Vec<f64> {
        self.power.iter().map(|&p| to_dbc(p.sqrt(), 1.0)).collect()
    }

    pub fn peak(&self) -> (f64, f64) {
        let i = (0..self.power.len())
            .max_by(|&a, &b| self.power[a].total_cmp(&self.power[b]))
            .expect("nonempty spectrum");
        (self.velocity_mps[i], self.power[i])
    }

    /// Power in the bin nearest to `velocity`.
    pub fn at(&self, velocity: f64) -> f64 {
        let i = (0..self.velocity_mps.len())
            .min_by(|&a, &b| {
                (self.velocity_mps[a] - velocity)
                    .abs()
                    .total_cmp(&(self.velocity_mps[b] - velocity).abs())
            })
            .expect("nonempty spectrum");
        self.power[i]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("velocity_mps,power_db\n");
        for (v, p) in self.velocity_mps.iter().zip(self.power_db()) {
            out.push_str(&format!("{v},{p}\n"));
        }
        out
    }
}

pub(crate) fn periodogram(series: &[Complex64], radar: &RadarParams, window: DopplerWindow) -> DopplerSpectrum {
    let k = series.len();
    let w = window.weights(k);
    let norm: f64 = w.iter().map(|v| v * v).sum();
    let mut buf: Vec<Complex64> = series.iter().zip(&w).map(|(x, w)| x * w).collect();
    fft::forward(&mut buf);
    let half = k / 2;
    let bin = 1.0 / (radar.pri_s * k as f64);
    let scale = radar.wavelength() / 2.0;
    let (velocity_mps, power) = (0..k)
        .map(|i| {
            let src = (i + k - half) % k;
            ((i as f64 - half as f64) * bin * scale, buf[src].norm_sqr() / norm)
        })
        .unzip();
    DopplerSpectrum { velocity_mps, power }
}

/// Slow-time spectrum at one gate. The velocity axis spans
/// `[-λ/(4·pri), λ/(4·pri))`.
pub fn doppler_spectrum(train: &PulseTrain, gate: usize, window: DopplerWindow) -> Result<DopplerSpectrum> {
    mean_doppler_spectrum(train, gate..gate + 1, window)
}

/// Spectrum averaged over a block of gates.
pub fn mean_doppler_spectrum(
    train: &PulseTrain,
    gates: std::ops::Range<usize>,
    window: DopplerWindow,
) -> Result<DopplerSpectrum> {
    if train.pulses < 8 {
        return Err(invalid("Doppler spectrum needs at least 8 pulses"));
    }
    if gates.is_empty() || gates.end > train.gates {
        return Err(invalid(format!("gates {gates:?} outside 0..{}", train.gates)));
    }
    let n = gates.len() as f64;
    let mut acc: Option<DopplerSpectrum> = None;
    for g in gates {
        let s = periodogram(&train.gate_series(g), &train.radar, window);
        match acc.as_mut() {
            None => acc = Some(s),
            Some(a) => a.power.iter_mut().zip(&s.power).for_each(|(x, y)| *x += y),
        }
    }
    let mut out = acc.expect("nonempty gate range");
    out.power.iter_mut().for_each(|p| *p = (*p / n).max(10f64.powf(DB_FLOOR / 10.0)));
    Ok(out)
}
