//! Baseline and initial waveforms.
//!
//! Codes are stored as phase vectors so every generated sequence is
//! unimodular by construction.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A unit-modulus complex sequence `a_l = exp(j * phases[l])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CodeJson", into = "CodeJson")]
pub struct PolyphaseCode {
    label: String,
    phases: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CodeJson {
    label: String,
    length: usize,
    phases_radians: Vec<f64>,
}

impl TryFrom<CodeJson> for PolyphaseCode {
    type Error = Error;

    fn try_from(raw: CodeJson) -> Result<Self> {
        if raw.length != raw.phases_radians.len() {
            return Err(Error::Parse(format!(
                "code '{}' declares length {} but has {} phases",
                raw.label,
                raw.length,
                raw.phases_radians.len()
            )));
        }
        PolyphaseCode::new(raw.label, raw.phases_radians)
    }
}

impl From<PolyphaseCode> for CodeJson {
    fn from(code: PolyphaseCode) -> Self {
        CodeJson {
            label: code.label,
            length: code.phases.len(),
            phases_radians: code.phases,
        }
    }
}

impl PolyphaseCode {
    pub fn new(label: impl Into<String>, phases: Vec<f64>) -> Result<Self> {
        if phases.is_empty() {
            return Err(invalid("code length must be at least 1"));
        }
        if let Some(i) = phases.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite(format!("phase {i} is not finite")));
        }
        Ok(PolyphaseCode {
            label: label.into(),
            phases,
        })
    }

    /// Builds a code from complex samples, keeping only their arguments.
    pub fn from_samples(label: impl Into<String>, samples: &[Complex64]) -> Result<Self> {
        Self::new(label, samples.iter().map(|s| s.arg()).collect())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn samples(&self) -> Vec<Complex64> {
        self.phases.iter().map(|&p| Complex64::from_polar(1.0, p)).collect()
    }

    /// Same code multiplied by the global phase factor `exp(j*theta)`.
    pub fn rotated(&self, theta: f64) -> Self {
        PolyphaseCode {
            label: self.label.clone(),
            phases: self.phases.iter().map(|p| p + theta).collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Linear-FM pulse sampled at `sample_rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChirpWaveform {
    pub samples: Vec<Complex64>,
    pub bandwidth: f64,
    pub pulse_width: f64,
}

impl ChirpWaveform {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn to_code(&self) -> PolyphaseCode {
        PolyphaseCode::from_samples(
            format!("chirp-{:.0}Hz-{:.1}us", self.bandwidth, self.pulse_width * 1e6),
            &self.samples,
        )
        .expect("chirp has at least one finite sample")
    }
}

/// I.i.d. uniform phases on `[0, 2π)`, reproducible for a fixed seed.
pub fn random_unimodular(length: usize, seed: u64) -> Result<PolyphaseCode> {
    if length == 0 {
        return Err(invalid("length must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phases = (0..length).map(|_| rng.random_range(0.0..TAU)).collect();
    PolyphaseCode::new(format!("random-{seed}"), phases)
}

/// Sylvester Hadamard matrix of the given power-of-two order, entries ±1.
pub fn hadamard_matrix(order: usize) -> Result<Vec<Vec<i8>>> {
    if order == 0 || !order.is_power_of_two() {
        return Err(invalid(format!("Hadamard order {order} is not a power of two")));
    }
    let mut m = vec![vec![1i8]];
    while m.len() < order {
        let n = m.len();
        let mut next = vec![vec![0i8; 2 * n]; 2 * n];
        for i in 0..n {
            for j in 0..n {
                let v = m[i][j];
                next[i][j] = v;
                next[i][j + n] = v;
                next[i + n][j] = v;
                next[i + n][j + n] = -v;
            }
        }
        m = next;
    }
    Ok(m)
}

/// One row of the Sylvester Hadamard matrix as a binary (0/π) phase code.
pub fn hadamard_code(order: usize, row: usize) -> Result<PolyphaseCode> {
    let m = hadamard_matrix(order)?;
    if row >= order {
        return Err(invalid(format!("row {row} out of range for order {order}")));
    }
    let phases = m[row]
        .iter()
        .map(|&v| if v > 0 { 0.0 } else { PI })
        .collect();
    PolyphaseCode::new(format!("hadamard-{order}-{row}"), phases)
}

/// Per-sub-pulse phase increments `n*π*l²/L` (for odd `L` the
/// `n*π*l*(l+1)/L` form, which keeps the periodic correlation ideal).
pub fn chu_increments(length: usize, n: i64) -> Result<Vec<f64>> {
    if length == 0 {
        return Err(invalid("Chu length must be at least 1"));
    }
    let len = length as f64;
    Ok((0..length)
        .map(|l| {
            let l = l as f64;
            let q = if length.is_multiple_of(2) { l * l } else { l * (l + 1.0) };
            n as f64 * PI * q / len
        })
        .collect())
}

/// Chu sequence with sample phases `-φ_l`.
///
/// With `gcd(n, L) = 1` the periodic autocorrelation vanishes at every lag
/// that is not a multiple of `L`.
pub fn chu_code(length: usize, n: i64) -> Result<PolyphaseCode> {
    let phases = chu_increments(length, n)?.into_iter().map(|p| -p).collect();
    PolyphaseCode::new(format!("chu-{length}-{n}"), phases)
}

/// Centered LFM chirp, `exp(jπ(B/T)t²)` for `t` spanning `[-T/2, T/2]`.
pub fn chirp(bandwidth: f64, pulse_width: f64, sample_rate: f64) -> Result<ChirpWaveform> {
    for (name, v) in [
        ("bandwidth", bandwidth),
        ("pulse_width", pulse_width),
        ("sample_rate", sample_rate),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(invalid(format!("{name} must be positive, got {v}")));
        }
    }
    if bandwidth * pulse_width < 1.0 {
        return Err(invalid("time-bandwidth product must be at least 1"));
    }
    if sample_rate < bandwidth {
        return Err(invalid("sample_rate must be at least the bandwidth"));
    }
    let len = (pulse_width * sample_rate).round() as usize;
    let k = PI * bandwidth / pulse_width;
    let center = (len as f64 - 1.0) / 2.0;
    let samples = (0..len)
        .map(|l| {
            let t = (l as f64 - center) / sample_rate;
            Complex64::from_polar(1.0, k * t * t)
        })
        .collect();
    Ok(ChirpWaveform {
        samples,
        bandwidth,
        pulse_width,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_is_deterministic_and_seed_sensitive() {
        let a = random_unimodular(40, 7).unwrap();
        let b = random_unimodular(40, 7).unwrap();
        let c = random_unimodular(40, 8).unwrap();
        assert_eq!(a, b);
        assert!(a.phases().iter().zip(c.phases()).any(|(x, y)| x != y));
        let single = random_unimodular(1, 3).unwrap();
        assert!((0.0..TAU).contains(&single.phases()[0]));
        assert!(a.phases().iter().all(|p| (0.0..TAU).contains(p)));
    }

    #[test]
    fn zero_length_rejected() {
        assert!(matches!(random_unimodular(0, 1), Err(Error::InvalidArgument(_))));
        assert!(PolyphaseCode::new("x", vec![]).is_err());
    }

    #[test]
    fn hadamard_small_orders() {
        let m2 = hadamard_matrix(2).unwrap();
        assert_eq!(m2, vec![vec![1, 1], vec![1, -1]]);
        let row0 = hadamard_code(4, 0).unwrap();
        assert!(row0.samples().iter().all(|s| (s - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        assert!(hadamard_matrix(6).is_err());
        assert!(hadamard_code(4, 4).is_err());
    }

    #[test]
    fn hadamard_rows_orthogonal() {
        for order in [1, 2, 4, 8, 16, 64] {
            let m = hadamard_matrix(order).unwrap();
            for i in 0..order {
                for j in 0..order {
                    let dot: i64 = m[i].iter().zip(&m[j]).map(|(&a, &b)| a as i64 * b as i64).sum();
                    assert_eq!(dot, if i == j { order as i64 } else { 0 });
                }
            }
        }
    }

    #[test]
    fn chu_increments_match_formula() {
        let phi = chu_increments(4, 1).unwrap();
        let expected = [0.0, PI / 4.0, PI, 9.0 * PI / 4.0];
        for (a, b) in phi.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        let phi2 = chu_increments(2, 1).unwrap();
        assert!((phi2[1] - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn chirp_lengths() {
        let c = chirp(2e6, 20e-6, 2e6).unwrap();
        assert_eq!(c.len(), 40);
        let c = chirp(1e6, 40e-6, 1e6).unwrap();
        assert_eq!(c.len(), 40);
        assert!(c.samples.iter().all(|s| (s.norm() - 1.0).abs() < 1e-12));
        assert!(chirp(-1.0, 1e-5, 1e6).is_err());
        assert!(chirp(1e6, 1e-7, 1e6).is_err());
        assert!(chirp(2e6, 20e-6, 1e6).is_err());
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let code = random_unimodular(17, 99).unwrap();
        let back = PolyphaseCode::from_json(&code.to_json().unwrap()).unwrap();
        assert_eq!(code, back);
        let bad = r#"{"label":"x","length":3,"phases_radians":[0.0,1.0]}"#;
        assert!(PolyphaseCode::from_json(bad).is_err());
    }
}
