//! Closed-form minimum-ISL mismatched filters.
//!
//! For a target code `x` (zero-padded and centered to the filter length) the
//! filter minimizes `hᴴ·R·h` subject to the zero-lag response
//! `Σ a_l·conj(h_l) = L`, giving `h = L·R⁻¹x / (xᴴR⁻¹x)`. `R` sums the
//! mainlobe-deleted Gram matrix of the target with the full Gram matrices of
//! every other code in the set, so the filter trades auto-correlation
//! sidelobes against cross-correlation energy at all lags.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::correlation::{centered_pad, cross_correlate, isl, to_dbc, CorrelationProfile};
use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::linalg::GramSystem;
use crate::waveforms::PolyphaseCode;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Which correlation terms exempt their mainlobe window from the error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossMainlobe {
    /// Only the target's own auto term has its mainlobe deleted.
    #[default]
    Keep,
    /// Every term, cross terms included, has its mainlobe deleted.
    Delete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FilterJson", into = "FilterJson")]
pub struct MismatchedFilter {
    pub label: String,
    pub designed_for: String,
    pub coefficients: Vec<Complex64>,
    /// Value of the filter's quadratic error form.
    pub achieved_error: f64,
    /// Diagonal loading the solver had to add (0 when none).
    pub regularization_used: f64,
}

#[derive(Serialize, Deserialize)]
struct FilterJson {
    label: String,
    #[serde(default)]
    designed_for: String,
    length: usize,
    re: Vec<f64>,
    im: Vec<f64>,
    achieved_error: f64,
    regularization_used: f64,
}

impl TryFrom<FilterJson> for MismatchedFilter {
    type Error = Error;

    fn try_from(raw: FilterJson) -> Result<Self> {
        if raw.re.len() != raw.length || raw.im.len() != raw.length {
            return Err(Error::Parse(format!(
                "filter '{}' declares length {} but has {} re / {} im values",
                raw.label,
                raw.length,
                raw.re.len(),
                raw.im.len()
            )));
        }
        Ok(MismatchedFilter {
            label: raw.label,
            designed_for: raw.designed_for,
            coefficients: raw
                .re
                .iter()
                .zip(&raw.im)
                .map(|(&r, &i)| Complex64::new(r, i))
                .collect(),
            achieved_error: raw.achieved_error,
            regularization_used: raw.regularization_used,
        })
    }
}

impl From<MismatchedFilter> for FilterJson {
    fn from(f: MismatchedFilter) -> Self {
        FilterJson {
            length: f.coefficients.len(),
            re: f.coefficients.iter().map(|c| c.re).collect(),
            im: f.coefficients.iter().map(|c| c.im).collect(),
            label: f.label,
            designed_for: f.designed_for,
            achieved_error: f.achieved_error,
            regularization_used: f.regularization_used,
        }
    }
}

impl MismatchedFilter {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Matched filter of a code: the code samples themselves, so the
    /// correlation is the code's autocorrelation.
    pub fn matched(code: &PolyphaseCode) -> Self {
        let coefficients = code.samples();
        let profile = cross_correlate(&coefficients, &coefficients).expect("nonempty code");
        MismatchedFilter {
            label: format!("matched-{}", code.label()),
            designed_for: code.label().to_string(),
            coefficients,
            achieved_error: isl(&profile, 1).expect("odd width"),
            regularization_used: 0.0,
        }
    }

    /// Correlation of `code` against this filter.
    pub fn respond(&self, code: &PolyphaseCode) -> CorrelationProfile {
        cross_correlate(&code.samples(), &self.coefficients).expect("nonempty inputs")
    }

    /// Zero-lag response `Σ a_l·conj(h_l)` of `code` through this filter.
    pub fn zero_lag_response(&self, code: &PolyphaseCode) -> Complex64 {
        let n = self.len().max(code.len());
        let a = centered_pad(&code.samples(), n);
        let h = centered_pad(&self.coefficients, n);
        a.iter().zip(&h).map(|(x, y)| x * y.conj()).sum()
    }

    /// Same filter multiplied by a complex gain.
    pub fn scaled(&self, gain: Complex64) -> Self {
        MismatchedFilter {
            coefficients: self.coefficients.iter().map(|c| c * gain).collect(),
            achieved_error: self.achieved_error * gain.norm_sqr(),
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// `M` code/filter pairs designed together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeFilterSet {
    pub codes: Vec<PolyphaseCode>,
    pub filters: Vec<MismatchedFilter>,
    pub mainlobe_width: usize,
    pub joint_error: f64,
}

impl CodeFilterSet {
    /// Assembles a set and recomputes its joint error.
    pub fn new(
        codes: Vec<PolyphaseCode>,
        filters: Vec<MismatchedFilter>,
        mainlobe_width: usize,
    ) -> Result<Self> {
        validate_codes(&codes)?;
        if filters.len() != codes.len() {
            return Err(invalid(format!(
                "{} codes but {} filters",
                codes.len(),
                filters.len()
            )));
        }
        let flen = filters[0].len();
        if filters.iter().any(|f| f.len() != flen) {
            return Err(invalid("filters differ in length"));
        }
        if flen < codes[0].len() {
            return Err(invalid("filters shorter than codes"));
        }
        if mainlobe_width.is_multiple_of(2) {
            return Err(invalid("mainlobe width must be odd"));
        }
        let mut set = CodeFilterSet {
            codes,
            filters,
            mainlobe_width,
            joint_error: 0.0,
        };
        set.joint_error = joint_error(&set);
        Ok(set)
    }

    pub fn m(&self) -> usize {
        self.codes.len()
    }

    pub fn code_length(&self) -> usize {
        self.codes[0].len()
    }

    pub fn filter_length(&self) -> usize {
        self.filters[0].len()
    }

    /// Correlation of code `k` through filter `i` (auto when `i == k`).
    pub fn response(&self, filter: usize, code: usize) -> CorrelationProfile {
        self.filters[filter].respond(&self.codes[code])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: CodeFilterSet = serde_json::from_str(text)?;
        CodeFilterSet::new(raw.codes, raw.filters, raw.mainlobe_width)
    }
}

fn validate_codes(codes: &[PolyphaseCode]) -> Result<()> {
    if codes.is_empty() {
        return Err(invalid("a code set needs at least one code"));
    }
    let len = codes[0].len();
    if codes.iter().any(|c| c.len() != len) {
        return Err(invalid("all codes in a set must have the same length"));
    }
    Ok(())
}

fn check_design_args(codes: &[PolyphaseCode], filter_length: usize, mainlobe_width: usize) -> Result<()> {
    validate_codes(codes)?;
    if filter_length < codes[0].len() {
        return Err(invalid(format!(
            "filter length {filter_length} shorter than code length {}",
            codes[0].len()
        )));
    }
    if mainlobe_width.is_multiple_of(2) {
        return Err(invalid(format!("mainlobe width {mainlobe_width} must be odd")));
    }
    Ok(())
}

/// Autocorrelation `r(d) = Σ x_j conj(x_{j+d})`, `d = 0..n`.
fn autocorrelation_row(x: &[Complex64]) -> Vec<Complex64> {
    let p = cross_correlate(x, x).expect("nonempty");
    (0..x.len() as i64).map(|d| p.at(d)).collect()
}

fn shifted_columns(x: &[Complex64], mainlobe_width: usize) -> impl Iterator<Item = Vec<Complex64>> + '_ {
    let n = x.len() as i64;
    let half = (mainlobe_width / 2) as i64;
    (-half..=half).map(move |m| {
        (0..n)
            .map(|k| {
                let i = k - m;
                if (0..n).contains(&i) {
                    x[i as usize]
                } else {
                    ZERO
                }
            })
            .collect()
    })
}

pub(crate) fn gram_system(
    padded: &[Vec<Complex64>],
    target: usize,
    mainlobe_width: usize,
    cross: CrossMainlobe,
) -> GramSystem {
    let n = padded[0].len();
    let mut first_row = vec![ZERO; n];
    for x in padded {
        for (acc, v) in first_row.iter_mut().zip(autocorrelation_row(x)) {
            *acc += v;
        }
    }
    let mut deleted: Vec<Vec<Complex64>> = shifted_columns(&padded[target], mainlobe_width).collect();
    if cross == CrossMainlobe::Delete {
        for (k, x) in padded.iter().enumerate() {
            if k != target {
                deleted.extend(shifted_columns(x, mainlobe_width));
            }
        }
    }
    GramSystem { first_row, deleted }
}

/// Options shared by the filter solvers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterOptions {
    #[serde(default)]
    pub cross_mainlobe: CrossMainlobe,
}

/// Minimum-ISL mismatched filter for a single code.
pub fn min_isl_filter(
    code: &PolyphaseCode,
    filter_length: usize,
    mainlobe_width: usize,
) -> Result<MismatchedFilter> {
    joint_min_isl_filter(std::slice::from_ref(code), 0, filter_length, mainlobe_width)
}

/// Filter for `codes[target]` minimizing its auto sidelobes plus the
/// cross-correlation energy of every other code in the set.
pub fn joint_min_isl_filter(
    codes: &[PolyphaseCode],
    target: usize,
    filter_length: usize,
    mainlobe_width: usize,
) -> Result<MismatchedFilter> {
    joint_min_isl_filter_with(codes, target, filter_length, mainlobe_width, FilterOptions::default())
}

pub fn joint_min_isl_filter_with(
    codes: &[PolyphaseCode],
    target: usize,
    filter_length: usize,
    mainlobe_width: usize,
    options: FilterOptions,
) -> Result<MismatchedFilter> {
    check_design_args(codes, filter_length, mainlobe_width)?;
    if target >= codes.len() {
        return Err(invalid(format!("target {target} out of range")));
    }
    let padded: Vec<Vec<Complex64>> = codes
        .iter()
        .map(|c| centered_pad(&c.samples(), filter_length))
        .collect();
    let system = gram_system(&padded, target, mainlobe_width, options.cross_mainlobe);
    let x = &padded[target];
    let solution = system.solve(x);
    let denom: Complex64 = x.iter().zip(&solution.y).map(|(a, b)| a.conj() * b).sum();
    if !(denom.re > 0.0) || !denom.re.is_finite() {
        return Err(Error::NonFinite(format!(
            "filter normalization xᴴR⁻¹x = {denom} for code '{}'",
            codes[target].label()
        )));
    }
    let len = codes[target].len() as f64;
    let scale = len / denom.re;
    let coefficients: Vec<Complex64> = solution.y.iter().map(|v| v * scale).collect();
    let achieved_error =
        filter_error(codes, target, &coefficients, mainlobe_width, options.cross_mainlobe);
    Ok(MismatchedFilter {
        label: format!("filter-{}", codes[target].label()),
        designed_for: codes[target].label().to_string(),
        coefficients,
        achieved_error,
        regularization_used: solution.loading,
    })
}

/// The quadratic form `hᴴ·R·h` of filter `h` for `codes[target]`,
/// evaluated in the lag domain.
pub fn filter_error(
    codes: &[PolyphaseCode],
    target: usize,
    h: &[Complex64],
    mainlobe_width: usize,
    cross: CrossMainlobe,
) -> f64 {
    codes
        .iter()
        .enumerate()
        .map(|(k, code)| {
            let profile = cross_correlate(&code.samples(), h).expect("nonempty");
            if k == target || cross == CrossMainlobe::Delete {
                isl(&profile, mainlobe_width).expect("odd width")
            } else {
                profile.energy()
            }
        })
        .sum()
}

/// Relative residual of the stationarity condition `R·h = (ε/L)·x`.
pub fn kkt_residual(
    codes: &[PolyphaseCode],
    target: usize,
    filter: &MismatchedFilter,
    mainlobe_width: usize,
) -> f64 {
    let n = filter.len();
    let padded: Vec<Vec<Complex64>> = codes.iter().map(|c| centered_pad(&c.samples(), n)).collect();
    let system = gram_system(&padded, target, mainlobe_width, CrossMainlobe::Keep);
    let rh = system.apply(&filter.coefficients);
    let mu = filter.achieved_error / codes[target].len() as f64;
    let num: f64 = rh
        .iter()
        .zip(&padded[target])
        .map(|(r, x)| (r - x * mu).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let den: f64 = rh.iter().map(|r| r.norm_sqr()).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Sum over every pair of its filter's error: auto sidelobe energy outside
/// the mainlobe plus the full cross-correlation energy of the other codes.
pub fn joint_error(set: &CodeFilterSet) -> f64 {
    (0..set.m())
        .map(|i| {
            filter_error(
                &set.codes,
                i,
                &set.filters[i].coefficients,
                set.mainlobe_width,
                CrossMainlobe::Keep,
            )
        })
        .sum()
}

/// Designs the joint filter of every code in the set and balances the
/// pairs' zero-lag responses.
pub fn design_set(
    codes: &[PolyphaseCode],
    filter_length: usize,
    mainlobe_width: usize,
    execution: Execution,
) -> Result<CodeFilterSet> {
    check_design_args(codes, filter_length, mainlobe_width)?;
    let filters = execution
        .map(codes.len(), |i| {
            joint_min_isl_filter(codes, i, filter_length, mainlobe_width)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut set = CodeFilterSet::new(codes.to_vec(), filters, mainlobe_width)?;
    balance_pairs(&mut set);
    Ok(set)
}

/// Rescales filters `1..M` so every pair's zero-lag response equals that of
/// pair 0 in gain and phase.
pub fn balance_pairs(set: &mut CodeFilterSet) {
    let reference = set.filters[0].zero_lag_response(&set.codes[0]);
    for i in 1..set.m() {
        let own = set.filters[i].zero_lag_response(&set.codes[i]);
        if own.norm() > 0.0 {
            // respond() conjugates the filter, so the gain enters conjugated
            let gain = (reference / own).conj();
            set.filters[i] = set.filters[i].scaled(gain);
        }
    }
    set.joint_error = joint_error(set);
}

/// Largest deviation between pair 0's zero-lag response and any other pair's.
pub fn pair_imbalance(set: &CodeFilterSet) -> f64 {
    let reference = set.filters[0].zero_lag_response(&set.codes[0]);
    (1..set.m())
        .map(|i| (set.filters[i].zero_lag_response(&set.codes[i]) - reference).norm())
        .fold(0.0, f64::max)
}

/// Sidelobe statistics of one filter/code combination of a set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub filter: String,
    pub code: String,
    pub auto: bool,
    /// Peak outside the mainlobe (auto) or over all lags (cross), relative to
    /// the filter's own auto mainlobe.
    pub psl_dbc: f64,
    /// Energy over the same lags, relative to the squared mainlobe.
    pub isl_db: f64,
    /// Share of those lags at or below -70 dBc.
    pub fraction_below_70_dbc: f64,
}

/// Summaries for every filter/code combination, filter-major.
pub fn summarize_set(set: &CodeFilterSet) -> Vec<PairSummary> {
    let w = set.mainlobe_width;
    let mut out = Vec::with_capacity(set.m() * set.m());
    for i in 0..set.m() {
        let mainlobe = set.response(i, i).zero_lag().norm();
        for k in 0..set.m() {
            let p = set.response(i, k);
            let levels: Vec<f64> = p
                .lags()
                .zip(p.values())
                .filter(|(lag, _)| i != k || !CorrelationProfile::in_mainlobe(*lag, w))
                .map(|(_, v)| v.norm())
                .collect();
            let peak = levels.iter().copied().fold(0.0, f64::max);
            let energy: f64 = levels.iter().map(|v| v * v).sum();
            let below = levels.iter().filter(|&&v| to_dbc(v, mainlobe) <= -70.0).count();
            out.push(PairSummary {
                filter: set.filters[i].label.clone(),
                code: set.codes[k].label().to_string(),
                auto: i == k,
                psl_dbc: to_dbc(peak, mainlobe),
                isl_db: 10.0 * (energy / (mainlobe * mainlobe)).log10().max(-300.0),
                fraction_below_70_dbc: below as f64 / levels.len().max(1) as f64,
            });
        }
    }
    out
}
