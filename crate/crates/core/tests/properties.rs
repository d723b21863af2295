use std::f64::consts::TAU;

use num_complex::Complex64;
use polyphase::ambiguity::{ambiguity_cell, ambiguity_with};
use polyphase::correlation::{centered_pad, cross_correlate, cross_correlate_direct, cross_correlate_fft, isl, periodic_correlate};
use polyphase::filter_design::{design_set, kkt_residual, min_isl_filter, summarize_set, MismatchedFilter};
use polyphase::optimizer::{phase_gradient, weighted_error, ErrorFunctionConfig};
use polyphase::waveforms::{chu_code, PolyphaseCode};
use polyphase::Execution;
use proptest::prelude::*;

fn phases(len: impl Into<proptest::sample::SizeRange>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..TAU, len)
}

fn samples(len: impl Into<proptest::sample::SizeRange>) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| Complex64::new(re, im)), len)
}

fn code(p: Vec<f64>) -> PolyphaseCode {
    PolyphaseCode::new("p", p).unwrap()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fft_correlation_matches_direct(a in samples(1..80), b in samples(1..80)) {
        let fast = cross_correlate_fft(&a, &b).unwrap();
        let slow = cross_correlate_direct(&a, &b).unwrap();
        prop_assert_eq!(fast.len(), 2 * a.len().max(b.len()) - 1);
        for (x, y) in fast.values().iter().zip(slow.values()) {
            prop_assert!((x - y).norm() < 1e-10 * (1.0 + y.norm()));
        }
    }

    #[test]
    fn swapping_arguments_reverses_and_conjugates(a in samples(1..40), b in samples(1..40)) {
        let ab = cross_correlate(&a, &b).unwrap();
        let ba = cross_correlate(&b, &a).unwrap();
        for lag in -ab.max_lag()..=ab.max_lag() {
            prop_assert!((ab.at(lag) - ba.at(-lag).conj()).norm() < 1e-10);
        }
    }

    #[test]
    fn unimodular_autocorrelation_peaks_at_energy(p in phases(1..64)) {
        let c = code(p);
        let s = c.samples();
        let r = cross_correlate(&s, &s).unwrap();
        prop_assert!((r.zero_lag() - Complex64::new(c.len() as f64, 0.0)).norm() < 1e-9);
        for v in r.values() {
            prop_assert!(v.norm() <= c.len() as f64 + 1e-9);
        }
    }

    #[test]
    fn chu_codes_have_ideal_periodic_autocorrelation(len in 2usize..128, n in 1i64..16) {
        prop_assume!(gcd(len, n as usize) == 1);
        let s = chu_code(len, n).unwrap().samples();
        let r = periodic_correlate(&s, &s).unwrap();
        prop_assert!((r[0].re - len as f64).abs() < 1e-9);
        for v in &r[1..] {
            prop_assert!(v.norm() < 1e-9 * len as f64);
        }
    }

    #[test]
    fn min_isl_filter_beats_matched_filter(p in phases(4..16), extra in 0usize..24, half in 0usize..3) {
        let c = code(p);
        let w = 2 * half + 1;
        prop_assume!(w < c.len());
        let nf = c.len() + extra;
        let f = min_isl_filter(&c, nf, w).unwrap();
        let reference = MismatchedFilter { coefficients: centered_pad(&c.samples(), nf), ..f.clone() };
        let ratio = |h: &MismatchedFilter| {
            let r = h.respond(&c);
            isl(&r, w).unwrap() / r.zero_lag().norm_sqr()
        };
        prop_assert!(ratio(&f) <= ratio(&reference) * (1.0 + 1e-9));
        prop_assert!(kkt_residual(std::slice::from_ref(&c), 0, &f, w) < 1e-6);
    }

    #[test]
    fn error_ignores_global_code_phase(p in phases(4..12), theta in 0.0..TAU) {
        let c = code(p);
        let f = MismatchedFilter::matched(&c);
        let cfg = ErrorFunctionConfig::sidelobes(c.len(), 1, 2).unwrap();
        let e0 = weighted_error(&c, &f, &cfg).unwrap();
        let e1 = weighted_error(&c.rotated(theta), &f, &cfg).unwrap();
        prop_assert!((e0 - e1).abs() <= 1e-9 * (1.0 + e0));
        // the error is flat along a global rotation, so the gradient sums to zero
        let g = phase_gradient(&c, &f, &cfg).unwrap();
        let scale = g.iter().map(|v| v.abs()).sum::<f64>();
        prop_assert!(g.iter().sum::<f64>().abs() <= 1e-9 * (1.0 + scale));
    }

    #[test]
    fn ambiguity_rows_match_direct_cells(p in phases(3..12), extra in 0usize..8, doppler in -4000.0..4000.0f64) {
        let c = code(p);
        let f = MismatchedFilter::matched(&c);
        let f = MismatchedFilter { coefficients: centered_pad(&f.coefficients, c.len() + extra), ..f };
        let s = ambiguity_with(&c, &f, &[0.0, doppler], 2e6, Execution::Sequential).unwrap();
        for (row, &fd) in s.magnitude.iter().zip(&s.dopplers) {
            for (&delay, &v) in s.delays.iter().zip(row) {
                let direct = ambiguity_cell(&c, &f, delay, fd, 2e6);
                prop_assert!((v - direct).abs() < 1e-9 * (1.0 + direct));
            }
        }
        let r = f.respond(&c);
        for (&delay, &v) in s.delays.iter().zip(&s.magnitude[0]) {
            prop_assert!((v - r.at(delay).norm()).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn designed_sets_are_balanced_and_summarized(a in phases(8), b in phases(8), extra in 0usize..16) {
        let codes = vec![code(a), code(b)];
        let set = design_set(&codes, 8 + extra, 3, Execution::Sequential).unwrap();
        let z0 = set.filters[0].zero_lag_response(&set.codes[0]);
        let z1 = set.filters[1].zero_lag_response(&set.codes[1]);
        prop_assert!((z0 - z1).norm() < 1e-9 * z0.norm());
        let summary = summarize_set(&set);
        prop_assert_eq!(summary.len(), 4);
        for (i, s) in summary.iter().enumerate() {
            prop_assert_eq!(s.auto, i == 0 || i == 3);
            prop_assert!((0.0..=1.0).contains(&s.fraction_below_70_dbc));
            prop_assert!(s.isl_db >= s.psl_dbc - 1e-9);
        }
        let back = polyphase::filter_design::CodeFilterSet::from_json(&set.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.to_json().unwrap(), set.to_json().unwrap());
    }
}
