//! Weighted sidelobe error, its analytic phase gradient, and the
//! code/filter search built on them.
//!
//! The error of a code `a` through filter `b` is
//! `ε = Σ_m w_m·(|c_m|²)^p` over the full lag axis, where
//! `c_m = Σ_i a_i·conj(b_{i+m})`. With `a_j = exp(jα_j)` its derivative is
//! `∂ε/∂α_j = 2p·Im(conj(a_j)·Σ_m β_m·c_m·b_{j+m})`,
//! `β_m = w_m·(|c_m|²)^(p−1)`.

mod scatter;
mod search;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::correlation::{centered_pad, pad_offset, CorrelationProfile};
use crate::error::{invalid, Result};
use crate::filter_design::MismatchedFilter;
use crate::waveforms::PolyphaseCode;

pub use scatter::{latin_hypercube_point, perturb};
pub use search::{global_search, local_search, DesignResult, ObjectiveTerms, OptimizerConfig};

/// Per-lag weights and exponent of the sidelobe error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorFunctionConfig {
    pub p: u32,
    /// One weight per lag, `-(N_f-1)..=N_f-1`.
    pub weights: Vec<f64>,
    /// Exempted central lags; 0 means every lag is weighted.
    pub mainlobe_width: usize,
}

impl ErrorFunctionConfig {
    pub fn new(p: u32, weights: Vec<f64>, mainlobe_width: usize) -> Result<Self> {
        if p == 0 {
            return Err(invalid("exponent p must be at least 1"));
        }
        if weights.len().is_multiple_of(2) {
            return Err(invalid(format!(
                "weights must cover an odd number of lags, got {}",
                weights.len()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(invalid(format!("weight {i} is negative or not finite")));
        }
        if mainlobe_width > 0 && mainlobe_width.is_multiple_of(2) {
            return Err(invalid(format!("mainlobe width {mainlobe_width} must be odd")));
        }
        if mainlobe_width > weights.len() {
            return Err(invalid("mainlobe wider than the lag axis"));
        }
        let zero = weights.len() / 2;
        let half = mainlobe_width / 2;
        if mainlobe_width > 0 && weights[zero - half..=zero + half].iter().any(|&w| w != 0.0) {
            return Err(invalid("weights inside the mainlobe must be zero"));
        }
        Ok(ErrorFunctionConfig {
            p,
            weights,
            mainlobe_width,
        })
    }

    /// Unit weights everywhere outside the mainlobe.
    pub fn sidelobes(filter_length: usize, mainlobe_width: usize, p: u32) -> Result<Self> {
        if filter_length == 0 {
            return Err(invalid("filter length must be at least 1"));
        }
        if mainlobe_width == 0 || mainlobe_width.is_multiple_of(2) {
            return Err(invalid(format!("mainlobe width {mainlobe_width} must be odd")));
        }
        let n = 2 * filter_length - 1;
        let zero = filter_length - 1;
        let half = mainlobe_width / 2;
        let weights = (0..n)
            .map(|i| if i.abs_diff(zero) <= half { 0.0 } else { 1.0 })
            .collect();
        Self::new(p, weights, mainlobe_width)
    }

    /// Unit weights at every lag, as used for cross terms.
    pub fn all_lags(filter_length: usize, p: u32) -> Result<Self> {
        if filter_length == 0 {
            return Err(invalid("filter length must be at least 1"));
        }
        Self::new(p, vec![1.0; 2 * filter_length - 1], 0)
    }

    pub fn filter_length(&self) -> usize {
        self.weights.len().div_ceil(2)
    }

    /// Same weights with a different exponent.
    pub fn with_p(&self, p: u32) -> Result<Self> {
        Self::new(p, self.weights.clone(), self.mainlobe_width)
    }
}

fn check_dims(code_len: usize, filter_len: usize, cfg: &ErrorFunctionConfig) -> Result<usize> {
    let n = code_len.max(filter_len);
    if cfg.weights.len() != 2 * n - 1 {
        return Err(invalid(format!(
            "{} weights for a correlation with {} lags",
            cfg.weights.len(),
            2 * n - 1
        )));
    }
    Ok(n)
}

fn powi(x: f64, p: u32) -> f64 {
    x.powi(p as i32)
}

pub(crate) fn error_of_profile(profile: &CorrelationProfile, cfg: &ErrorFunctionConfig) -> f64 {
    profile
        .values()
        .iter()
        .zip(&cfg.weights)
        .filter(|(_, &w)| w != 0.0)
        .map(|(c, w)| w * powi(c.norm_sqr(), cfg.p))
        .sum()
}

/// Weighted sidelobe error summed over every lag.
pub fn weighted_error(
    code: &PolyphaseCode,
    filter: &MismatchedFilter,
    cfg: &ErrorFunctionConfig,
) -> Result<f64> {
    weighted_error_raw(&code.samples(), &filter.coefficients, cfg)
}

pub(crate) fn weighted_error_raw(a: &[Complex64], b: &[Complex64], cfg: &ErrorFunctionConfig) -> Result<f64> {
    check_dims(a.len(), b.len(), cfg)?;
    let profile = crate::correlation::cross_correlate(a, b)?;
    Ok(error_of_profile(&profile, cfg))
}

/// Twice the error over strictly positive lags. Agrees with
/// [`weighted_error`] whenever the profile magnitude and the weights are
/// symmetric, as for a code correlated with itself.
pub fn weighted_error_one_sided(
    code: &PolyphaseCode,
    filter: &MismatchedFilter,
    cfg: &ErrorFunctionConfig,
) -> Result<f64> {
    let n = check_dims(code.len(), filter.len(), cfg)?;
    let profile = crate::correlation::cross_correlate(&code.samples(), &filter.coefficients)?;
    let zero = n - 1;
    Ok(2.0
        * profile.values()[zero + 1..]
            .iter()
            .zip(&cfg.weights[zero + 1..])
            .map(|(c, w)| w * powi(c.norm_sqr(), cfg.p))
            .sum::<f64>())
}

/// Derivative of [`weighted_error`] with respect to each code phase, the
/// filter held fixed.
pub fn phase_gradient(
    code: &PolyphaseCode,
    filter: &MismatchedFilter,
    cfg: &ErrorFunctionConfig,
) -> Result<Vec<f64>> {
    let a = code.samples();
    check_dims(a.len(), filter.len(), cfg)?;
    let profile = crate::correlation::cross_correlate(&a, &filter.coefficients)?;
    Ok(gradient_from_profile(&a, &filter.coefficients, &profile, cfg))
}

pub(crate) fn gradient_from_profile(
    a: &[Complex64],
    b: &[Complex64],
    profile: &CorrelationProfile,
    cfg: &ErrorFunctionConfig,
) -> Vec<f64> {
    let n = a.len().max(b.len());
    let zero = n as i64 - 1;
    let a_pad = centered_pad(a, n);
    let b_pad = centered_pad(b, n);
    let g: Vec<Complex64> = profile
        .values()
        .iter()
        .zip(&cfg.weights)
        .map(|(c, &w)| {
            if w == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                c * (w * powi(c.norm_sqr(), cfg.p - 1))
            }
        })
        .collect();
    let off = pad_offset(n, a.len());
    let scale = 2.0 * cfg.p as f64;
    (0..a.len())
        .map(|l| {
            let j = (off + l) as i64;
            // m runs over lags with 0 <= j + m < n
            let mut s = Complex64::new(0.0, 0.0);
            for k in 0..n as i64 {
                let m = k - j;
                s += g[(m + zero) as usize] * b_pad[k as usize];
            }
            scale * (a_pad[j as usize].conj() * s).im
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::isl;
    use crate::filter_design::min_isl_filter;
    use crate::waveforms::{chu_code, random_unimodular};

    fn random_filter(len: usize, seed: u64) -> MismatchedFilter {
        let re = random_unimodular(len, seed).unwrap();
        let im = random_unimodular(len, seed + 1000).unwrap();
        MismatchedFilter {
            label: "f".into(),
            designed_for: String::new(),
            coefficients: re
                .samples()
                .iter()
                .zip(im.phases())
                .map(|(s, r)| s * (0.5 + r / 7.0))
                .collect(),
            achieved_error: 0.0,
            regularization_used: 0.0,
        }
    }

    fn fd_check(code: &PolyphaseCode, f: &MismatchedFilter, cfg: &ErrorFunctionConfig) -> f64 {
        let g = phase_gradient(code, f, cfg).unwrap();
        let h = 1e-6;
        let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0f64;
        for j in 0..code.len() {
            let mut up = code.phases().to_vec();
            let mut dn = code.phases().to_vec();
            up[j] += h;
            dn[j] -= h;
            let eu = weighted_error(&PolyphaseCode::new("u", up).unwrap(), f, cfg).unwrap();
            let ed = weighted_error(&PolyphaseCode::new("d", dn).unwrap(), f, cfg).unwrap();
            let fd = (eu - ed) / (2.0 * h);
            worst = worst.max((fd - g[j]).abs() / scale);
        }
        worst
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for p in [1, 2] {
            let code = random_unimodular(8, 3).unwrap();
            let f = random_filter(20, 4);
            let cfg = ErrorFunctionConfig::sidelobes(20, 3, p).unwrap();
            assert!(fd_check(&code, &f, &cfg) < 1e-5, "p={p}");
        }
    }

    #[test]
    fn impulse_has_zero_error_and_gradient() {
        let code = PolyphaseCode::new("one", vec![0.4]).unwrap();
        let f = MismatchedFilter::matched(&code);
        let cfg = ErrorFunctionConfig::sidelobes(1, 1, 1).unwrap();
        assert_eq!(weighted_error(&code, &f, &cfg).unwrap(), 0.0);
        assert_eq!(phase_gradient(&code, &f, &cfg).unwrap(), vec![0.0]);
    }

    #[test]
    fn p1_matches_isl_and_is_linear_in_weights() {
        let code = random_unimodular(10, 8).unwrap();
        let f = min_isl_filter(&code, 30, 5).unwrap();
        let cfg = ErrorFunctionConfig::sidelobes(30, 5, 1).unwrap();
        let e = weighted_error(&code, &f, &cfg).unwrap();
        let direct = isl(&f.respond(&code), 5).unwrap();
        assert!((e - direct).abs() < 1e-10 * direct);
        let doubled = ErrorFunctionConfig::new(1, cfg.weights.iter().map(|w| 2.0 * w).collect(), 5).unwrap();
        assert!((weighted_error(&code, &f, &doubled).unwrap() - 2.0 * e).abs() < 1e-10 * e);
    }

    #[test]
    fn one_sided_form_agrees_for_autocorrelation() {
        let code = random_unimodular(12, 2).unwrap();
        let f = MismatchedFilter::matched(&code);
        for p in [1, 2, 3] {
            let cfg = ErrorFunctionConfig::sidelobes(12, 1, p).unwrap();
            let full = weighted_error(&code, &f, &cfg).unwrap();
            let half = weighted_error_one_sided(&code, &f, &cfg).unwrap();
            assert!((full - half).abs() < 1e-10 * full);
        }
    }

    #[test]
    fn global_phase_is_a_null_direction() {
        for p in [1, 2] {
            let code = chu_code(9, 2).unwrap();
            let f = random_filter(15, 1);
            let cfg = ErrorFunctionConfig::sidelobes(15, 3, p).unwrap();
            let g = phase_gradient(&code, &f, &cfg).unwrap();
            let sum: f64 = g.iter().sum();
            let scale: f64 = g.iter().map(|v| v.abs()).sum();
            assert!(sum.abs() < 1e-8 * scale, "p={p}");
            let e0 = weighted_error(&code, &f, &cfg).unwrap();
            let e1 = weighted_error(&code.rotated(1.3), &f, &cfg).unwrap();
            assert!((e0 - e1).abs() < 1e-10 * e0);
        }
    }

    #[test]
    fn config_validation() {
        assert!(ErrorFunctionConfig::new(0, vec![1.0], 0).is_err());
        assert!(ErrorFunctionConfig::new(1, vec![1.0, 1.0], 0).is_err());
        assert!(ErrorFunctionConfig::new(1, vec![1.0, 1.0, 1.0], 1).is_err());
        assert!(ErrorFunctionConfig::new(1, vec![1.0, -1.0, 1.0], 0).is_err());
        assert!(ErrorFunctionConfig::sidelobes(4, 2, 1).is_err());
        let code = random_unimodular(4, 1).unwrap();
        let f = random_filter(6, 1);
        let cfg = ErrorFunctionConfig::sidelobes(5, 1, 1).unwrap();
        assert!(weighted_error(&code, &f, &cfg).is_err());
    }
}
