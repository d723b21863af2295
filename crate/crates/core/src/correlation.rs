//! Aperiodic and periodic correlation, convolution matrices and sidelobe
//! metrics.
//!
//! Throughout the crate the correlation of a sequence `a` against a filter
//! `b` is `c_m = Σ_i a_i · conj(b_{i+m})` for lags `m ∈ [-(N-1), N-1]`. When
//! the lengths differ the shorter sequence is zero-padded to `N` and
//! centered, so a code sits in the middle of a longer mismatched filter and
//! zero lag is the aligned position.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::fft;
use crate::waveforms::PolyphaseCode;

/// Above this length correlations go through the FFT path.
pub const DIRECT_MAX_LEN: usize = 64;

/// Lowest value reported by dB views, used instead of `-inf`.
pub const DB_FLOOR: f64 = -300.0;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Complex correlation sequence over lags `-(N-1)..=N-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationProfile {
    values: Vec<Complex64>,
    zero_lag_index: usize,
    normalization: f64,
}

impl CorrelationProfile {
    /// Wraps raw lag values; `values.len()` must be odd.
    pub fn from_values(values: Vec<Complex64>) -> Result<Self> {
        if values.len().is_multiple_of(2) {
            return Err(invalid("a correlation profile has an odd number of lags"));
        }
        let zero_lag_index = values.len() / 2;
        let mut profile = CorrelationProfile {
            values,
            zero_lag_index,
            normalization: 0.0,
        };
        profile.normalization = profile.default_normalization();
        Ok(profile)
    }

    fn default_normalization(&self) -> f64 {
        let zero = self.values[self.zero_lag_index].norm();
        if zero > 0.0 {
            zero
        } else {
            self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
        }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn zero_lag_index(&self) -> usize {
        self.zero_lag_index
    }

    /// Largest lag magnitude, `N - 1`.
    pub fn max_lag(&self) -> i64 {
        self.zero_lag_index as i64
    }

    pub fn lags(&self) -> impl Iterator<Item = i64> + '_ {
        let z = self.zero_lag_index as i64;
        (0..self.values.len() as i64).map(move |i| i - z)
    }

    pub fn at(&self, lag: i64) -> Complex64 {
        let idx = lag + self.zero_lag_index as i64;
        if idx < 0 || idx as usize >= self.values.len() {
            ZERO
        } else {
            self.values[idx as usize]
        }
    }

    pub fn zero_lag(&self) -> Complex64 {
        self.values[self.zero_lag_index]
    }

    /// Magnitude used as the 0 dBc reference (zero-lag magnitude unless
    /// overridden, e.g. a cross profile referenced to its auto mainlobe).
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn with_normalization(mut self, reference: f64) -> Self {
        self.normalization = reference;
        self
    }

    /// `20·log10(|c_m| / normalization)`, floored at [`DB_FLOOR`].
    pub fn magnitude_dbc(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| to_dbc(v.norm(), self.normalization))
            .collect()
    }

    /// Total energy `Σ |c_m|²` over every lag.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Whether `lag` falls in the centered window of `mainlobe_width` lags.
    pub fn in_mainlobe(lag: i64, mainlobe_width: usize) -> bool {
        lag.unsigned_abs() as usize <= mainlobe_width / 2
    }

    /// Sidelobe magnitudes (lags outside the mainlobe), in lag order.
    pub fn sidelobes(&self, mainlobe_width: usize) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.lags()
            .zip(self.values.iter().copied())
            .filter(move |(m, _)| !Self::in_mainlobe(*m, mainlobe_width))
    }

    /// CSV with columns `lag,re,im,magnitude_dbc`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lag,re,im,magnitude_dbc\n");
        for ((lag, v), db) in self.lags().zip(&self.values).zip(self.magnitude_dbc()) {
            let _ = writeln!(out, "{lag},{:e},{:e},{db:.6}", v.re, v.im);
        }
        out
    }

    /// Parses the output of [`to_csv`](Self::to_csv). The dBc column is
    /// ignored; values are taken from `re`/`im`.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        for (n, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(Error::Parse(format!("line {}: expected 4 columns", n + 1)));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))
            };
            values.push(Complex64::new(parse(cols[1])?, parse(cols[2])?));
        }
        Self::from_values(values)
    }
}

pub(crate) fn to_dbc(magnitude: f64, reference: f64) -> f64 {
    if reference <= 0.0 {
        return DB_FLOOR;
    }
    let db = 20.0 * (magnitude / reference).log10();
    if db.is_finite() {
        db.max(DB_FLOOR)
    } else if db > 0.0 {
        db
    } else {
        DB_FLOOR
    }
}

/// Offset at which a sequence of length `len` is placed inside `n` samples.
pub fn pad_offset(n: usize, len: usize) -> usize {
    (n - len) / 2
}

/// Zero-pads `x` to `n` samples, centered.
pub fn centered_pad(x: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; n];
    let off = pad_offset(n, x.len());
    out[off..off + x.len()].copy_from_slice(x);
    out
}

fn check_inputs(a: &[Complex64], b: &[Complex64]) -> Result<usize> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("correlation inputs must be nonempty"));
    }
    Ok(a.len().max(b.len()))
}

/// `c_m = Σ a_i conj(b_{i+m})`, choosing the direct loop for short inputs
/// and the zero-padded FFT otherwise.
pub fn cross_correlate(a: &[Complex64], b: &[Complex64]) -> Result<CorrelationProfile> {
    let n = check_inputs(a, b)?;
    let values = if n <= DIRECT_MAX_LEN {
        direct_values(a, b, n)
    } else {
        fft_values(a, b, n)
    };
    CorrelationProfile::from_values(values)
}

/// Direct O(N²) evaluation.
pub fn cross_correlate_direct(a: &[Complex64], b: &[Complex64]) -> Result<CorrelationProfile> {
    let n = check_inputs(a, b)?;
    CorrelationProfile::from_values(direct_values(a, b, n))
}

/// FFT evaluation regardless of length.
pub fn cross_correlate_fft(a: &[Complex64], b: &[Complex64]) -> Result<CorrelationProfile> {
    let n = check_inputs(a, b)?;
    CorrelationProfile::from_values(fft_values(a, b, n))
}

fn direct_values(a: &[Complex64], b: &[Complex64], n: usize) -> Vec<Complex64> {
    let a = centered_pad(a, n);
    let b = centered_pad(b, n);
    let n = n as i64;
    (-(n - 1)..n)
        .map(|m| {
            let lo = 0.max(-m);
            let hi = n.min(n - m);
            (lo..hi)
                .map(|i| a[i as usize] * b[(i + m) as usize].conj())
                .sum()
        })
        .collect()
}

fn fft_values(a: &[Complex64], b: &[Complex64], n: usize) -> Vec<Complex64> {
    let size = (2 * n - 1).next_power_of_two();
    let fa = fft::padded_forward(&centered_pad(a, n), size);
    let mut q = fft::padded_forward(&centered_pad(b, n), size);
    for (qb, fa) in q.iter_mut().zip(&fa) {
        *qb *= fa.conj();
    }
    fft::inverse(&mut q);
    // q[m] = Σ_i b_{i+m} conj(a_i) = conj(c_m), negative lags wrap around
    let n = n as i64;
    (-(n - 1)..n)
        .map(|m| q[m.rem_euclid(size as i64) as usize].conj())
        .collect()
}

/// Periodic correlation `r_m = Σ a_i conj(b_{(i+m) mod L})`, `m = 0..L`.
pub fn periodic_correlate(a: &[Complex64], b: &[Complex64]) -> Result<Vec<Complex64>> {
    if a.is_empty() || a.len() != b.len() {
        return Err(invalid("periodic correlation needs equal nonempty lengths"));
    }
    let len = a.len();
    let fa = fft::padded_forward(a, len);
    let mut q = fft::padded_forward(b, len);
    for (qb, fa) in q.iter_mut().zip(&fa) {
        *qb *= fa.conj();
    }
    fft::inverse(&mut q);
    Ok(q.into_iter().map(|v| v.conj()).collect())
}

fn check_width(mainlobe_width: usize) -> Result<()> {
    if mainlobe_width.is_multiple_of(2) {
        return Err(invalid(format!("mainlobe width {mainlobe_width} must be odd")));
    }
    Ok(())
}

/// Integrated sidelobe energy: `Σ |c_m|²` outside the centered mainlobe.
pub fn isl(profile: &CorrelationProfile, mainlobe_width: usize) -> Result<f64> {
    check_width(mainlobe_width)?;
    if mainlobe_width > profile.len() {
        return Err(invalid("mainlobe wider than the profile"));
    }
    Ok(profile
        .sidelobes(mainlobe_width)
        .map(|(_, v)| v.norm_sqr())
        .sum())
}

/// Largest sidelobe magnitude outside the mainlobe (0 if there is none).
pub fn peak_sidelobe(profile: &CorrelationProfile, mainlobe_width: usize) -> Result<f64> {
    check_width(mainlobe_width)?;
    Ok(profile
        .sidelobes(mainlobe_width)
        .map(|(_, v)| v.norm())
        .fold(0.0, f64::max))
}

/// Peak sidelobe relative to the zero-lag magnitude, in dB.
///
/// Returns `f64::NEG_INFINITY` when every sidelobe is exactly zero.
pub fn psl_dbc(profile: &CorrelationProfile, mainlobe_width: usize) -> Result<f64> {
    let peak = peak_sidelobe(profile, mainlobe_width)?;
    let main = profile.zero_lag().norm();
    if main == 0.0 {
        return Err(Error::DegenerateInput("zero mainlobe magnitude".into()));
    }
    if peak == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(20.0 * (peak / main).log10())
}

/// Transmit convolution matrix of a code and its mainlobe-deleted version.
///
/// `full` is `filter_length × (2·filter_length − 1)`: row `k` is the filter
/// tap, column `m + N − 1` the output lag, with entry `a_pad[k − m]`. For any
/// filter `h`, `hᴴ·full` equals `cross_correlate(code, h)`.
#[derive(Debug, Clone)]
pub struct ConvolutionMatrices {
    pub full: DMatrix<Complex64>,
    pub mainlobe_deleted: DMatrix<Complex64>,
    pub mainlobe_width: usize,
    /// Lags corresponding to the columns of `mainlobe_deleted`.
    pub kept_lags: Vec<i64>,
}

impl ConvolutionMatrices {
    /// `hᴴ · full`, i.e. the correlation of the code with `h`.
    pub fn apply(&self, h: &[Complex64]) -> Vec<Complex64> {
        (0..self.full.ncols())
            .map(|col| {
                h.iter()
                    .enumerate()
                    .map(|(k, hk)| hk.conj() * self.full[(k, col)])
                    .sum()
            })
            .collect()
    }
}

pub fn convolution_matrices(
    code: &PolyphaseCode,
    filter_length: usize,
    mainlobe_width: usize,
) -> Result<ConvolutionMatrices> {
    check_width(mainlobe_width)?;
    if filter_length < code.len() {
        return Err(invalid(format!(
            "filter length {filter_length} shorter than code length {}",
            code.len()
        )));
    }
    let n = filter_length;
    let apad = centered_pad(&code.samples(), n);
    let ni = n as i64;
    let lag_count = 2 * n - 1;
    let full = DMatrix::from_fn(n, lag_count, |k, col| {
        let m = col as i64 - (ni - 1);
        let i = k as i64 - m;
        if (0..ni).contains(&i) {
            apad[i as usize]
        } else {
            ZERO
        }
    });
    let kept_lags: Vec<i64> = (-(ni - 1)..ni)
        .filter(|&m| !CorrelationProfile::in_mainlobe(m, mainlobe_width))
        .collect();
    let kept_cols: Vec<usize> = kept_lags.iter().map(|m| (m + ni - 1) as usize).collect();
    let mainlobe_deleted = full.select_columns(kept_cols.iter());
    Ok(ConvolutionMatrices {
        full,
        mainlobe_deleted,
        mainlobe_width,
        kept_lags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveforms::random_unimodular;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    // brute-force oracle, written independently of the padding helpers
    fn oracle(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
        let n = a.len().max(b.len()) as i64;
        let oa = (n - a.len() as i64) / 2;
        let ob = (n - b.len() as i64) / 2;
        let get = |x: &[Complex64], off: i64, i: i64| {
            let j = i - off;
            if j >= 0 && (j as usize) < x.len() { x[j as usize] } else { ZERO }
        };
        let mut out = Vec::new();
        for m in -(n - 1)..n {
            let mut s = ZERO;
            for i in 0..n {
                s += get(a, oa, i) * get(b, ob, i + m).conj();
            }
            out.push(s);
        }
        out
    }

    #[test]
    fn all_ones_triangle() {
        let ones = vec![c(1.0, 0.0); 4];
        let p = cross_correlate(&ones, &ones).unwrap();
        let mags: Vec<f64> = p.values().iter().map(|v| v.re).collect();
        assert_eq!(mags, vec![1.0, 2.0, 3.0, 4.0, 3.0, 2.0, 1.0]);
    }

    #[test]
    fn hand_evaluated_pair() {
        let a = vec![c(1.0, 0.0), c(0.0, 1.0)];
        let p = cross_correlate(&a, &a).unwrap();
        let expected = [c(0.0, 1.0), c(2.0, 0.0), c(0.0, -1.0)];
        for (v, e) in p.values().iter().zip(expected) {
            assert!((v - e).norm() < 1e-15);
        }
    }

    #[test]
    fn matches_oracle_small_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let la = rng.random_range(1..=8);
            let lb = rng.random_range(1..=8);
            let a = random_vec(&mut rng, la);
            let b = random_vec(&mut rng, lb);
            let want = oracle(&a, &b);
            for got in [
                cross_correlate(&a, &b).unwrap(),
                cross_correlate_fft(&a, &b).unwrap(),
            ] {
                assert_eq!(got.len(), want.len());
                for (g, w) in got.values().iter().zip(&want) {
                    assert!((g - w).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn empty_rejected() {
        assert!(cross_correlate(&[], &[c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn isl_and_psl_basics() {
        let p = CorrelationProfile::from_values(vec![c(1.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(isl(&p, 1).unwrap(), 2.0);
        assert_eq!(isl(&p, 3).unwrap(), 0.0);
        assert!((psl_dbc(&p, 1).unwrap() - 20.0 * 0.5f64.log10()).abs() < 1e-12);
        assert!(isl(&p, 2).is_err());

        let mut imp = vec![ZERO; 9];
        imp[4] = c(5.0, 0.0);
        let imp = CorrelationProfile::from_values(imp).unwrap();
        assert_eq!(isl(&imp, 1).unwrap(), 0.0);
        assert_eq!(psl_dbc(&imp, 3).unwrap(), f64::NEG_INFINITY);

        let zero_main = CorrelationProfile::from_values(vec![c(1.0, 0.0), ZERO, c(1.0, 0.0)]).unwrap();
        assert!(matches!(psl_dbc(&zero_main, 1), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn convolution_matrix_identity() {
        let one = PolyphaseCode::new("one", vec![0.0]).unwrap();
        let m = convolution_matrices(&one, 1, 1).unwrap();
        assert_eq!(m.full.shape(), (1, 1));
        assert_eq!(m.full[(0, 0)], c(1.0, 0.0));
        assert_eq!(m.mainlobe_deleted.ncols(), 0);

        let code = random_unimodular(5, 3).unwrap();
        let m = convolution_matrices(&code, 12, 5).unwrap();
        assert_eq!(m.mainlobe_deleted.ncols(), 2 * 12 - 1 - 5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let h = random_vec(&mut rng, 12);
            let via_matrix = m.apply(&h);
            let direct = cross_correlate(&code.samples(), &h).unwrap();
            for (x, y) in via_matrix.iter().zip(direct.values()) {
                assert!((x - y).norm() < 1e-12);
            }
        }
        assert!(convolution_matrices(&code, 4, 1).is_err());
        assert!(convolution_matrices(&code, 12, 4).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let code = random_unimodular(9, 1).unwrap();
        let p = cross_correlate(&code.samples(), &code.samples()).unwrap();
        let back = CorrelationProfile::from_csv(&p.to_csv()).unwrap();
        for (a, b) in p.values().iter().zip(back.values()) {
            assert!((a - b).norm() <= 1e-15 * a.norm().max(1.0));
        }
    }

    #[test]
    fn periodic_of_impulse_like_code() {
        let ones = vec![c(1.0, 0.0); 4];
        let r = periodic_correlate(&ones, &ones).unwrap();
        assert!(r.iter().all(|v| (v - c(4.0, 0.0)).norm() < 1e-12));
    }
}
