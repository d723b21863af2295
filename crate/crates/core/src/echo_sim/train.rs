use num_complex::Complex64;

use super::series::{echo_series_from, impair_from, rng_for};
use super::{ImpairmentConfig, RadarParams, Trip, TripEcho};
use crate::correlation::pad_offset;
use crate::error::{invalid, Result};
use crate::fft;
use crate::filter_design::CodeFilterSet;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `pulses × gates` fast-time samples, row-major by pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseTrain {
    pub radar: RadarParams,
    pub pulses: usize,
    pub gates: usize,
    pub samples: Vec<Complex64>,
    /// Index into the code set transmitted on each pulse.
    pub code_schedule: Vec<usize>,
    pub code_labels: Vec<String>,
}

impl PulseTrain {
    pub fn pulse(&self, k: usize) -> &[Complex64] {
        &self.samples[k * self.gates..(k + 1) * self.gates]
    }

    /// Slow-time series at one gate.
    pub fn gate_series(&self, gate: usize) -> Vec<Complex64> {
        (0..self.pulses).map(|k| self.samples[k * self.gates + gate]).collect()
    }

    pub fn scaled(&self, gain: Complex64) -> Self {
        PulseTrain {
            samples: self.samples.iter().map(|v| v * gain).collect(),
            ..self.clone()
        }
    }

    /// Labels of the transmitted codes, pulse by pulse.
    pub fn schedule_labels(&self) -> Vec<&str> {
        self.code_schedule.iter().map(|&i| self.code_labels[i].as_str()).collect()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v.norm_sqr()).sum()
    }
}

fn check_pair(set: &CodeFilterSet) -> Result<()> {
    if set.m() != 2 {
        return Err(invalid(format!("two-trip processing needs exactly 2 code/filter pairs, got {}", set.m())));
    }
    Ok(())
}

/// Receive windows for an alternating `C1, C2, …` schedule. On pulse `k`,
/// first-trip gates are coded with the code of pulse `k` and second-trip
/// gates with the code of pulse `k-1`; pulse 0 treats `C2` as its
/// predecessor. Each (trip, gate) has its own slow-time echo series and the
/// impairments are applied to the summed windows.
pub fn build_two_trip_train(
    trips: &[TripEcho],
    set: &CodeFilterSet,
    radar: &RadarParams,
    imp: &ImpairmentConfig,
    pulses: usize,
    seed: u64,
) -> Result<PulseTrain> {
    check_pair(set)?;
    radar.validate()?;
    imp.validate()?;
    if trips.is_empty() {
        return Err(invalid("at least one trip echo is required"));
    }
    if pulses < 2 {
        return Err(invalid("pulse train needs at least 2 pulses"));
    }
    trips.iter().try_for_each(|t| t.validate(radar))?;

    let gates = radar.window_samples();
    let codes: Vec<Vec<Complex64>> = set.codes.iter().map(|c| c.samples()).collect();
    let schedule: Vec<usize> = (0..pulses).map(|k| k % 2).collect();
    let mut samples = vec![ZERO; pulses * gates];
    for (t, trip) in trips.iter().enumerate() {
        for g in trip.gates() {
            let mut rng = rng_for(seed, 1 + ((t as u64) << 32) + g as u64);
            let s = echo_series_from(
                &mut rng,
                pulses,
                trip.velocity_mps,
                trip.spectral_width_mps,
                trip.power_db,
                radar,
            );
            for (k, sk) in s.iter().enumerate() {
                let code = match trip.trip {
                    Trip::First => &codes[schedule[k]],
                    Trip::Second => &codes[1 - schedule[k]],
                };
                let row = &mut samples[k * gates..(k + 1) * gates];
                for (n, c) in code.iter().enumerate().take(gates.saturating_sub(g)) {
                    row[g + n] += sk * c;
                }
            }
        }
    }
    let mut rng = rng_for(seed, u64::MAX);
    impair_from(&mut rng, &mut samples, imp);
    Ok(PulseTrain {
        radar: *radar,
        pulses,
        gates,
        samples,
        code_schedule: schedule,
        code_labels: set.codes.iter().map(|c| c.label().to_string()).collect(),
    })
}

/// Per-pulse compression. Output gate `g` of pulse `k` is
/// `Σ_j r_k[g - off + j]·conj(h[j])`, with `off` the code's offset inside the
/// filter, so a point target at gate `g` peaks at output gate `g`.
/// [`Trip::First`] applies filter `i` to pulses coded with `C_i`;
/// [`Trip::Second`] swaps the filters.
pub fn compress(train: &PulseTrain, set: &CodeFilterSet, target: Trip) -> Result<PulseTrain> {
    check_pair(set)?;
    if train.code_schedule.len() != train.pulses || train.code_schedule.iter().any(|&c| c > 1) {
        return Err(invalid("pulse train schedule does not match a two-code set"));
    }
    let nf = set.filter_length();
    let off = pad_offset(nf, set.code_length());
    let w = train.gates;
    let size = (w + nf - 1).next_power_of_two();
    let spectra: Vec<Vec<Complex64>> = set
        .filters
        .iter()
        .map(|f| fft::padded_forward(&f.coefficients, size).iter().map(|v| v.conj()).collect())
        .collect();
    let mut samples = Vec::with_capacity(train.samples.len());
    for k in 0..train.pulses {
        let code = train.code_schedule[k];
        let filter = match target {
            Trip::First => code,
            Trip::Second => 1 - code,
        };
        let mut buf = fft::padded_forward(train.pulse(k), size);
        buf.iter_mut().zip(&spectra[filter]).for_each(|(x, h)| *x *= h);
        fft::inverse(&mut buf);
        // circular index of lag t = g - off
        samples.extend((0..w).map(|g| buf[(g + size - off) % size]));
    }
    Ok(PulseTrain {
        samples,
        ..train.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::{cross_correlate, psl_dbc};
    use crate::filter_design::design_set;
    use crate::waveforms::random_unimodular;
    use crate::Execution;

    fn small_set() -> CodeFilterSet {
        let codes = vec![random_unimodular(8, 1).unwrap(), random_unimodular(8, 2).unwrap()];
        design_set(&codes, 24, 3, Execution::Sequential).unwrap()
    }

    fn radar() -> RadarParams {
        RadarParams { pri_s: 100e-6, pulse_width_s: 4e-6, ..Default::default() }
    }

    fn echo(trip: Trip, gate_start: usize, gate_end: usize) -> TripEcho {
        TripEcho { trip, gate_start, gate_end, power_db: 0.0, velocity_mps: 3.0, spectral_width_mps: 1.0 }
    }

    #[test]
    fn fft_compression_matches_direct_sum() {
        let set = small_set();
        let train = build_two_trip_train(
            &[echo(Trip::First, 20, 30), echo(Trip::Second, 25, 60)],
            &set,
            &radar(),
            &ImpairmentConfig { snr_db: Some(30.0), ..Default::default() },
            4,
            3,
        )
        .unwrap();
        let off = pad_offset(24, 8) as i64;
        for target in [Trip::First, Trip::Second] {
            let out = compress(&train, &set, target).unwrap();
            for k in 0..4 {
                let f = match target {
                    Trip::First => k % 2,
                    Trip::Second => 1 - k % 2,
                };
                let h = &set.filters[f].coefficients;
                let r = train.pulse(k);
                for g in 0..train.gates {
                    let mut acc = ZERO;
                    for (j, hj) in h.iter().enumerate() {
                        let n = g as i64 - off + j as i64;
                        if (0..r.len() as i64).contains(&n) {
                            acc += r[n as usize] * hj.conj();
                        }
                    }
                    assert!((acc - out.pulse(k)[g]).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn schedule_alternates_and_second_trip_folds() {
        let set = small_set();
        let t = build_two_trip_train(&[echo(Trip::Second, 50, 51)], &set, &radar(), &Default::default(), 5, 1)
            .unwrap();
        assert_eq!(t.schedule_labels(), ["random-1", "random-2", "random-1", "random-2", "random-1"]);
        // a point echo on pulse k carries the other code
        for k in 0..5 {
            let row = t.pulse(k);
            let expect = set.codes[1 - k % 2].samples();
            let ratio = row[50] / expect[0];
            for (n, e) in expect.iter().enumerate() {
                assert!((row[50 + n] - ratio * e).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn point_target_reproduces_pair_psl() {
        let set = small_set();
        let t = build_two_trip_train(&[echo(Trip::First, 100, 101)], &set, &radar(), &Default::default(), 4, 9)
            .unwrap();
        let out = compress(&t, &set, Trip::First).unwrap();
        for k in 0..4 {
            let row = out.pulse(k);
            let peak = (0..row.len()).max_by(|&a, &b| row[a].norm().total_cmp(&row[b].norm())).unwrap();
            assert_eq!(peak, 100);
            let side = row
                .iter()
                .enumerate()
                .filter(|(g, _)| (*g as i64 - 100).abs() > 1)
                .map(|(_, v)| v.norm())
                .fold(0.0, f64::max);
            let psl = 20.0 * (side / row[100].norm()).log10();
            let c = k % 2;
            let expect = psl_dbc(&cross_correlate(&set.codes[c].samples(), &set.filters[c].coefficients).unwrap(), 3)
                .unwrap();
            assert!((psl - expect).abs() < 0.5, "{psl} vs {expect}");
        }
    }

    #[test]
    fn energy_is_echo_power_times_correlation_energy() {
        let set = small_set();
        let trips = [echo(Trip::First, 100, 101)];
        let t = build_two_trip_train(&trips, &set, &radar(), &Default::default(), 6, 5).unwrap();
        let out = compress(&t, &set, Trip::First).unwrap();
        let corr_energy: Vec<f64> =
            (0..2).map(|c| set.response(c, c).energy()).collect();
        let expect: f64 = (0..6)
            .map(|k| t.pulse(k)[100].norm_sqr() * corr_energy[k % 2])
            .sum();
        assert!((out.energy() / expect - 1.0).abs() < 1e-9);
    }

    #[test]
    fn compression_is_stateless() {
        let set = small_set();
        let t = build_two_trip_train(&[echo(Trip::First, 10, 40)], &set, &radar(), &Default::default(), 4, 2)
            .unwrap();
        let a = compress(&t, &set, Trip::Second).unwrap();
        let _ = compress(&t, &set, Trip::First).unwrap();
        assert_eq!(compress(&t, &set, Trip::Second).unwrap(), a);
        assert_eq!(
            build_two_trip_train(&[echo(Trip::First, 10, 40)], &set, &radar(), &Default::default(), 4, 2).unwrap(),
            t
        );
    }

    #[test]
    fn rejects_bad_geometry() {
        let set = small_set();
        let r = radar();
        assert!(build_two_trip_train(&[echo(Trip::First, 150, 250)], &set, &r, &Default::default(), 4, 1).is_err());
        assert!(build_two_trip_train(&[], &set, &r, &Default::default(), 4, 1).is_err());
        assert!(build_two_trip_train(&[echo(Trip::First, 5, 5)], &set, &r, &Default::default(), 4, 1).is_err());
    }
}
