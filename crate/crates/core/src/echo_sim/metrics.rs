use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::series::{impair_from, rng_for};
use super::spectrum::mean_doppler_spectrum;
use super::train::{build_two_trip_train, compress};
use super::{DopplerWindow, ImpairmentConfig, PulseTrain, Trip, TwoTripScenario};
use crate::correlation::cross_correlate;
use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::filter_design::CodeFilterSet;

fn db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Peak of the gate-averaged Doppler spectrum of a second-trip train after
/// second-trip compression, over the same peak after first-trip
/// compression, in dB.
pub fn suppression_from_train(
    train: &PulseTrain,
    set: &CodeFilterSet,
    gates: std::ops::Range<usize>,
) -> Result<f64> {
    let recovered = compress(train, set, Trip::Second)?;
    let residual = compress(train, set, Trip::First)?;
    let (_, p2) = mean_doppler_spectrum(&recovered, gates.clone(), DopplerWindow::VonHann)?.peak();
    let (_, p1) = mean_doppler_spectrum(&residual, gates, DopplerWindow::VonHann)?.peak();
    if !(p1 > 0.0) {
        return Err(Error::DegenerateInput("second-trip residual has zero power".into()));
    }
    Ok(db(p2 / p1))
}

fn second_trip_gates(scenario: &TwoTripScenario) -> Result<std::ops::Range<usize>> {
    let spans: Vec<_> = scenario.trips.iter().filter(|t| t.trip == Trip::Second).map(|t| t.gates()).collect();
    if spans.is_empty() {
        return Err(invalid("scenario has no second-trip echo"));
    }
    let start = spans.iter().map(|r| r.start).min().expect("nonempty");
    let end = spans.iter().map(|r| r.end).max().expect("nonempty");
    Ok(start..end)
}

/// Second-trip suppression for one realization. The second-trip echoes of
/// the scenario are simulated on their own (the pipeline is linear, so the
/// first-trip echo adds nothing to either peak apart from leakage), impaired
/// as configured and measured with [`suppression_from_train`] over the
/// second-trip gates.
pub fn suppression_db(scenario: &TwoTripScenario, set: &CodeFilterSet, seed: u64) -> Result<f64> {
    scenario.validate()?;
    let gates = second_trip_gates(scenario)?;
    let trips: Vec<_> = scenario.trips.iter().filter(|t| t.trip == Trip::Second).cloned().collect();
    let train = build_two_trip_train(&trips, set, &scenario.radar, &scenario.impairments, scenario.pulses, seed)?;
    suppression_from_train(&train, set, gates)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuppressionReport {
    pub seeds: Vec<u64>,
    pub per_seed_db: Vec<f64>,
    pub mean_db: f64,
}

/// [`suppression_db`] over several seeds; the mean is taken in dB.
pub fn suppression_ensemble(
    scenario: &TwoTripScenario,
    set: &CodeFilterSet,
    seeds: &[u64],
    execution: Execution,
) -> Result<SuppressionReport> {
    if seeds.is_empty() {
        return Err(invalid("ensemble needs at least one seed"));
    }
    let per_seed_db = execution
        .map(seeds.len(), |i| suppression_db(scenario, set, seeds[i]))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let mean_db = per_seed_db.iter().sum::<f64>() / per_seed_db.len() as f64;
    Ok(SuppressionReport { seeds: seeds.to_vec(), per_seed_db, mean_db })
}

/// Peak of `|code ⋆ filter|` over all lags for a point target whose code
/// samples carry white phase jitter, relative to the unjittered zero-lag
/// response of the filter's own code, in dBc.
pub fn single_target_cross_psl(
    set: &CodeFilterSet,
    code: usize,
    filter: usize,
    jitter_deg: f64,
    seed: u64,
) -> Result<f64> {
    if code >= set.m() || filter >= set.m() {
        return Err(invalid(format!("pair ({code}, {filter}) out of range for {} codes", set.m())));
    }
    let imp = ImpairmentConfig { phase_jitter_rms_deg: jitter_deg, ..Default::default() };
    imp.validate()?;
    let h = &set.filters[filter].coefficients;
    let reference = cross_correlate(&set.codes[filter].samples(), h)?.zero_lag().norm();
    let mut rx: Vec<Complex64> = set.codes[code].samples();
    impair_from(&mut rng_for(seed, 0), &mut rx, &imp);
    let peak = cross_correlate(&rx, h)?.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    Ok(20.0 * (peak / reference).log10())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JitterPoint {
    pub jitter_deg: f64,
    pub per_seed_dbc: Vec<f64>,
    pub mean_dbc: f64,
}

/// Cross PSL of code 2 through filter 1 for each jitter level, averaged in dB
/// over `seeds`.
pub fn jitter_psl_study(
    set: &CodeFilterSet,
    jitters_deg: &[f64],
    seeds: &[u64],
    execution: Execution,
) -> Result<Vec<JitterPoint>> {
    if set.m() < 2 {
        return Err(invalid("jitter study needs at least 2 code/filter pairs"));
    }
    if seeds.is_empty() {
        return Err(invalid("jitter study needs at least one seed"));
    }
    jitters_deg
        .iter()
        .map(|&j| {
            let per_seed_dbc = execution
                .map(seeds.len(), |i| single_target_cross_psl(set, 1, 0, j, seeds[i]))
                .into_iter()
                .collect::<Result<Vec<f64>>>()?;
            let mean_dbc = per_seed_dbc.iter().sum::<f64>() / per_seed_dbc.len() as f64;
            Ok(JitterPoint { jitter_deg: j, per_seed_dbc, mean_dbc })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::echo_sim::{RadarParams, TripEcho};
    use crate::filter_design::{design_set, MismatchedFilter};
    use crate::waveforms::{random_unimodular, PolyphaseCode};

    fn scenario() -> TwoTripScenario {
        let trip = |trip, v| TripEcho {
            trip,
            gate_start: 60,
            gate_end: 100,
            power_db: 0.0,
            velocity_mps: v,
            spectral_width_mps: 1.0,
        };
        TwoTripScenario {
            radar: RadarParams { pri_s: 100e-6, pulse_width_s: 8e-6, ..Default::default() },
            trips: vec![trip(Trip::First, 5.0), trip(Trip::Second, -5.0)],
            impairments: ImpairmentConfig { snr_db: Some(60.0), ..Default::default() },
            pulses: 32,
        }
    }

    fn set() -> CodeFilterSet {
        let codes = vec![random_unimodular(16, 3).unwrap(), random_unimodular(16, 4).unwrap()];
        design_set(&codes, 64, 3, Execution::Sequential).unwrap()
    }

    #[test]
    fn suppression_is_gain_invariant() {
        let sc = scenario();
        let s = set();
        let trips: Vec<_> = sc.trips[1..].to_vec();
        let t = build_two_trip_train(&trips, &s, &sc.radar, &sc.impairments, sc.pulses, 5).unwrap();
        let a = suppression_from_train(&t, &s, 60..100).unwrap();
        let b = suppression_from_train(&t.scaled(Complex64::new(0.0, 2.0)), &s, 60..100).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.0);
    }

    #[test]
    fn identical_pairs_give_no_suppression() {
        let c = PolyphaseCode::new("c1", vec![0.0]).unwrap();
        let d = PolyphaseCode::new("c2", vec![0.0]).unwrap();
        let f1 = MismatchedFilter::matched(&c);
        let mut f2 = MismatchedFilter::matched(&d);
        f2.label = "filter-c2".into();
        let s = CodeFilterSet::new(vec![c, d], vec![f1, f2], 1).unwrap();
        let sc = TwoTripScenario { radar: RadarParams { pulse_width_s: 0.5e-6, ..scenario().radar }, ..scenario() };
        let r = suppression_db(&sc, &s, 1).unwrap();
        assert!(r.abs() < 1e-9, "{r}");
    }

    #[test]
    fn ensemble_is_deterministic_and_needs_second_trip() {
        let sc = scenario();
        let s = set();
        let a = suppression_ensemble(&sc, &s, &[1, 2, 3], Execution::Sequential).unwrap();
        let b = suppression_ensemble(&sc, &s, &[1, 2, 3], Execution::Parallel).unwrap();
        assert_eq!(a, b);
        let first_only = TwoTripScenario { trips: sc.trips[..1].to_vec(), ..sc };
        assert!(suppression_db(&first_only, &s, 1).is_err());
    }

    #[test]
    fn jitter_free_psl_is_the_cross_correlation_peak() {
        let s = set();
        let p = single_target_cross_psl(&s, 1, 0, 0.0, 1).unwrap();
        let cross = s.response(0, 1);
        let auto = s.response(0, 0);
        let peak = cross.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!((p - 20.0 * (peak / auto.zero_lag().norm()).log10()).abs() < 1e-12);
        let pts = jitter_psl_study(&s, &[0.0, 5.0], &[1, 2, 3, 4], Execution::Sequential).unwrap();
        assert_eq!(pts[0].per_seed_dbc, vec![p; 4]);
    }
}
