//! Delay–Doppler response of code/filter pairs.
//!
//! `χ(m, f_d) = Σ_n a_n·exp(j2π·f_d·n/f_s)·conj(b_{n+m})`, with `n` the code
//! sample index. Each Doppler row is the correlation of the modulated code
//! with the filter.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::correlation::{centered_pad, cross_correlate, to_dbc, DB_FLOOR};
use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::filter_design::{CodeFilterSet, MismatchedFilter};
use crate::waveforms::PolyphaseCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceKind {
    Auto,
    Cross,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguitySurface {
    pub kind: SurfaceKind,
    /// (code label, filter label)
    pub pair: (String, String),
    pub delays: Vec<i64>,
    pub dopplers: Vec<f64>,
    pub sample_rate: f64,
    /// Linear magnitude that maps to 0 dBc.
    pub reference: f64,
    /// `|χ|`, one row per Doppler value.
    pub magnitude: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct SurfaceMeta<'a> {
    kind: SurfaceKind,
    code: &'a str,
    filter: &'a str,
    sample_rate_hz: f64,
    reference: f64,
    min_delay: i64,
    max_delay: i64,
    dopplers_hz: &'a [f64],
    floor_dbc: f64,
}

impl AmbiguitySurface {
    /// dBc rows, clamped at the floor.
    pub fn values(&self) -> Vec<Vec<f64>> {
        self.magnitude
            .iter()
            .map(|row| row.iter().map(|&v| to_dbc(v, self.reference)).collect())
            .collect()
    }

    /// Long-format `delay,doppler_hz,dbc` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delay,doppler_hz,dbc\n");
        for (f, row) in self.dopplers.iter().zip(self.values()) {
            for (d, v) in self.delays.iter().zip(row) {
                out.push_str(&format!("{d},{f},{v}\n"));
            }
        }
        out
    }

    pub fn metadata_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&SurfaceMeta {
            kind: self.kind,
            code: &self.pair.0,
            filter: &self.pair.1,
            sample_rate_hz: self.sample_rate,
            reference: self.reference,
            min_delay: *self.delays.first().expect("nonempty"),
            max_delay: *self.delays.last().expect("nonempty"),
            dopplers_hz: &self.dopplers,
            floor_dbc: DB_FLOOR,
        })?)
    }
}

/// `0, 25, …, 2000` Hz.
pub fn default_doppler_grid() -> Vec<f64> {
    (0..=80).map(|i| i as f64 * 25.0).collect()
}

fn check_grid(dopplers: &[f64], sample_rate: f64) -> Result<()> {
    if dopplers.is_empty() {
        return Err(invalid("Doppler grid is empty"));
    }
    if !(sample_rate > 0.0) || !sample_rate.is_finite() {
        return Err(invalid("sample rate must be positive"));
    }
    if dopplers.iter().any(|f| !f.is_finite()) {
        return Err(invalid("Doppler grid has non-finite values"));
    }
    Ok(())
}

fn modulated(code: &[Complex64], doppler: f64, sample_rate: f64) -> Vec<Complex64> {
    let w = 2.0 * PI * doppler / sample_rate;
    code.iter()
        .enumerate()
        .map(|(n, a)| a * Complex64::from_polar(1.0, w * n as f64))
        .collect()
}

fn rows(
    code: &[Complex64],
    filter: &[Complex64],
    dopplers: &[f64],
    sample_rate: f64,
    execution: Execution,
) -> Result<Vec<Vec<f64>>> {
    execution
        .map(dopplers.len(), |i| {
            let p = cross_correlate(&modulated(code, dopplers[i], sample_rate), filter)?;
            Ok(p.values().iter().map(|v| v.norm()).collect())
        })
        .into_iter()
        .collect()
}

fn delays(code: &[Complex64], filter: &[Complex64]) -> Vec<i64> {
    let n = code.len().max(filter.len()) as i64;
    (-(n - 1)..n).collect()
}

fn zero_lag_reference(code: &[Complex64], filter: &[Complex64]) -> Result<f64> {
    let p = cross_correlate(code, filter)?;
    let r = p.zero_lag().norm();
    if r > 0.0 {
        Ok(r)
    } else {
        Err(Error::DegenerateInput("zero-lag response of the pair is zero".into()))
    }
}

/// Surface of one pair, normalized to its own response at zero delay and
/// zero Doppler.
pub fn ambiguity(
    code: &PolyphaseCode,
    filter: &MismatchedFilter,
    dopplers: &[f64],
    sample_rate: f64,
) -> Result<AmbiguitySurface> {
    ambiguity_with(code, filter, dopplers, sample_rate, Execution::default())
}

pub fn ambiguity_with(
    code: &PolyphaseCode,
    filter: &MismatchedFilter,
    dopplers: &[f64],
    sample_rate: f64,
    execution: Execution,
) -> Result<AmbiguitySurface> {
    check_grid(dopplers, sample_rate)?;
    let a = code.samples();
    let b = &filter.coefficients;
    Ok(AmbiguitySurface {
        kind: SurfaceKind::Auto,
        pair: (code.label().to_string(), filter.label.clone()),
        delays: delays(&a, b),
        dopplers: dopplers.to_vec(),
        sample_rate,
        reference: zero_lag_reference(&a, b)?,
        magnitude: rows(&a, b, dopplers, sample_rate, execution)?,
    })
}

/// Direct evaluation of a single cell, for checking the fast path.
pub fn ambiguity_cell(code: &PolyphaseCode, filter: &MismatchedFilter, delay: i64, doppler: f64, sample_rate: f64) -> f64 {
    let a = code.samples();
    let n = a.len().max(filter.len());
    let off = crate::correlation::pad_offset(n, a.len()) as i64;
    let b = centered_pad(&filter.coefficients, n);
    let w = 2.0 * PI * doppler / sample_rate;
    let mut acc = Complex64::new(0.0, 0.0);
    for (l, av) in a.iter().enumerate() {
        let k = off + l as i64 + delay;
        if (0..n as i64).contains(&k) {
            acc += av * Complex64::from_polar(1.0, w * l as f64) * b[k as usize].conj();
        }
    }
    acc.norm()
}

/// `[χ1auto, χ2auto, χ1cross, χ2cross]`: code `i` through filter `i`, then
/// code 1 through filter 2 and code 2 through filter 1. Cross surfaces are
/// referenced to the auto mainlobe of the filter they pass through.
pub fn auto_and_cross_surfaces(
    set: &CodeFilterSet,
    dopplers: &[f64],
    sample_rate: f64,
    execution: Execution,
) -> Result<[AmbiguitySurface; 4]> {
    if set.m() != 2 {
        return Err(invalid(format!("auto/cross surfaces need exactly 2 pairs, got {}", set.m())));
    }
    check_grid(dopplers, sample_rate)?;
    let a: Vec<Vec<Complex64>> = set.codes.iter().map(|c| c.samples()).collect();
    let b: Vec<&[Complex64]> = set.filters.iter().map(|f| f.coefficients.as_slice()).collect();
    let refs = [zero_lag_reference(&a[0], b[0])?, zero_lag_reference(&a[1], b[1])?];
    let surface = |code: usize, filter: usize| -> Result<AmbiguitySurface> {
        Ok(AmbiguitySurface {
            kind: if code == filter { SurfaceKind::Auto } else { SurfaceKind::Cross },
            pair: (set.codes[code].label().to_string(), set.filters[filter].label.clone()),
            delays: delays(&a[code], b[filter]),
            dopplers: dopplers.to_vec(),
            sample_rate,
            reference: refs[filter],
            magnitude: rows(&a[code], b[filter], dopplers, sample_rate, execution)?,
        })
    };
    Ok([surface(0, 0)?, surface(1, 1)?, surface(0, 1)?, surface(1, 0)?])
}

/// The `f_d = 0` row of a surface in dBc.
#[derive(Debug, Clone, PartialEq)]
pub struct DopplerCut {
    pub delays: Vec<i64>,
    pub dbc: Vec<f64>,
}

impl DopplerCut {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delay,dbc\n");
        for (d, v) in self.delays.iter().zip(&self.dbc) {
            out.push_str(&format!("{d},{v}\n"));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("delay,dbc") {
            return Err(Error::Parse("expected header 'delay,dbc'".into()));
        }
        let mut cut = DopplerCut { delays: Vec::new(), dbc: Vec::new() };
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let (d, v) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("row {}: expected 2 fields", i + 1)))?;
            cut.delays.push(d.trim().parse().map_err(|e| Error::Parse(format!("row {}: {e}", i + 1)))?);
            cut.dbc.push(v.trim().parse().map_err(|e| Error::Parse(format!("row {}: {e}", i + 1)))?);
        }
        Ok(cut)
    }

    /// Highest level outside `|delay| <= mainlobe_width/2`; with width 0
    /// every delay counts.
    pub fn peak_outside(&self, mainlobe_width: usize) -> f64 {
        let half = (mainlobe_width / 2) as i64;
        self.delays
            .iter()
            .zip(&self.dbc)
            .filter(|(d, _)| mainlobe_width == 0 || d.abs() > half)
            .map(|(_, v)| *v)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Zero-Doppler response of code `code` through filter `filter`, referenced
/// to the filter's own auto mainlobe. Equal to the corresponding
/// [`zero_doppler_cut`] of [`auto_and_cross_surfaces`].
pub fn correlation_cut(set: &CodeFilterSet, filter: usize, code: usize) -> Result<DopplerCut> {
    if filter >= set.m() || code >= set.m() {
        return Err(invalid(format!("pair ({filter}, {code}) out of range for {} codes", set.m())));
    }
    let b = &set.filters[filter].coefficients;
    let reference = zero_lag_reference(&set.codes[filter].samples(), b)?;
    let a = set.codes[code].samples();
    let p = cross_correlate(&a, b)?;
    Ok(DopplerCut {
        delays: delays(&a, b),
        dbc: p.values().iter().map(|v| to_dbc(v.norm(), reference)).collect(),
    })
}

pub fn zero_doppler_cut(surface: &AmbiguitySurface) -> Result<DopplerCut> {
    let row = surface
        .dopplers
        .iter()
        .position(|&f| f == 0.0)
        .ok_or_else(|| invalid("Doppler grid does not contain 0 Hz"))?;
    Ok(DopplerCut {
        delays: surface.delays.clone(),
        dbc: surface.magnitude[row].iter().map(|&v| to_dbc(v, surface.reference)).collect(),
    })
}
