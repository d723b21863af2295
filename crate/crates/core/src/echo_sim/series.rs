use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{ImpairmentConfig, RadarParams};
use crate::error::{invalid, Result};
use crate::fft;

/// Unit-variance circular complex Gaussian sample.
pub(crate) fn complex_normal(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn check_echo(pulses: usize, velocity: f64, spectral_width: f64, radar: &RadarParams) -> Result<()> {
    if pulses < 2 {
        return Err(invalid("echo series needs at least 2 pulses"));
    }
    if !(spectral_width > 0.0) || !spectral_width.is_finite() {
        return Err(invalid("spectral width must be positive"));
    }
    let nyq = radar.nyquist_velocity();
    if !velocity.is_finite() || velocity.abs() > nyq {
        return Err(invalid(format!(
            "velocity {velocity} m/s is outside the Nyquist interval ±{nyq:.3} m/s"
        )));
    }
    Ok(())
}

pub(crate) fn echo_series_from(
    rng: &mut ChaCha8Rng,
    pulses: usize,
    velocity: f64,
    spectral_width: f64,
    power_db: f64,
    radar: &RadarParams,
) -> Vec<Complex64> {
    let prf = 1.0 / radar.pri_s;
    let mean = 2.0 * velocity / radar.wavelength();
    let sigma = 2.0 * spectral_width / radar.wavelength();
    // Gaussian PSD on the DFT grid, folded over neighbouring Nyquist intervals
    let mut psd: Vec<f64> = (0..pulses)
        .map(|k| {
            let f = k as f64 * prf / pulses as f64;
            (-4..=4)
                .map(|wrap| {
                    let d = f + wrap as f64 * prf - mean;
                    (-d * d / (2.0 * sigma * sigma)).exp()
                })
                .sum()
        })
        .collect();
    let total: f64 = psd.iter().sum();
    let power = 10f64.powf(power_db / 10.0);
    for s in psd.iter_mut() {
        *s *= pulses as f64 * power / total;
    }
    let mut buf: Vec<Complex64> = psd.iter().map(|s| complex_normal(rng) * s.sqrt()).collect();
    fft::inverse(&mut buf);
    // `inverse` divides by K; rescale so that E|x_n|^2 = mean(psd)
    let gain = (pulses as f64).sqrt();
    buf.iter_mut().for_each(|v| *v *= gain);
    buf
}

/// Slow-time series of one range gate: zero-mean complex Gaussian with a
/// Gaussian Doppler spectrum centred on `2·velocity/λ` with standard deviation
/// `2·spectral_width/λ`. The expected sample power is `10^(power_db/10)`.
pub fn gaussian_echo_series(
    pulses: usize,
    velocity: f64,
    spectral_width: f64,
    power_db: f64,
    radar: &RadarParams,
    seed: u64,
) -> Result<Vec<Complex64>> {
    radar.validate()?;
    check_echo(pulses, velocity, spectral_width, radar)?;
    Ok(echo_series_from(&mut rng_for(seed, 0), pulses, velocity, spectral_width, power_db, radar))
}

pub(crate) fn impair_from(rng: &mut ChaCha8Rng, series: &mut [Complex64], imp: &ImpairmentConfig) {
    let jitter = imp.phase_jitter_rms_deg.to_radians();
    if jitter > 0.0 || imp.system_phase_rad != 0.0 {
        let normal = Normal::new(0.0, jitter).expect("validated jitter");
        for v in series.iter_mut() {
            let phi = if jitter > 0.0 { normal.sample(rng) } else { 0.0 };
            *v *= Complex64::from_polar(1.0, phi + imp.system_phase_rad);
        }
    }
    if let Some(snr) = imp.snr_db.filter(|s| s.is_finite()) {
        let signal = series.iter().map(|v| v.norm_sqr()).sum::<f64>() / series.len().max(1) as f64;
        let sd = (signal / 10f64.powf(snr / 10.0)).sqrt();
        for v in series.iter_mut() {
            *v += complex_normal(rng) * sd;
        }
    }
}

/// `x_n·exp(j(φ_n + φ_sys)) + w_n` with white Gaussian `φ_n` of the configured
/// RMS and AWGN scaled to the configured SNR relative to the mean power of
/// the input.
pub fn apply_impairments(series: &[Complex64], imp: &ImpairmentConfig, seed: u64) -> Result<Vec<Complex64>> {
    imp.validate()?;
    let mut out = series.to_vec();
    impair_from(&mut rng_for(seed, 0), &mut out, imp);
    Ok(out)
}

/// Lag-one autocorrelation velocity estimate, `λ·arg(R1)/(4π·pri)`.
pub fn pulse_pair_velocity(series: &[Complex64], radar: &RadarParams) -> Result<f64> {
    if series.len() < 2 {
        return Err(invalid("pulse-pair estimate needs at least 2 samples"));
    }
    let r1: Complex64 = series.windows(2).map(|w| w[0].conj() * w[1]).sum();
    Ok(radar.wavelength() * r1.arg() / (4.0 * PI * radar.pri_s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radar() -> RadarParams {
        RadarParams::default()
    }

    #[test]
    fn zero_velocity_phase_is_centred() {
        let r = radar();
        let est: Vec<f64> = (0..64)
            .map(|s| pulse_pair_velocity(&gaussian_echo_series(128, 0.0, 1.0, 0.0, &r, s).unwrap(), &r).unwrap())
            .collect();
        let mean = est.iter().sum::<f64>() / 64.0;
        let sd = (est.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 63.0).sqrt();
        assert!(mean.abs() < 3.0 * sd / 8.0, "mean {mean} sd {sd}");
    }

    #[test]
    fn pulse_pair_recovers_velocity() {
        let r = radar();
        let mean = (0..16)
            .map(|s| pulse_pair_velocity(&gaussian_echo_series(128, 5.0, 1.0, 0.0, &r, s).unwrap(), &r).unwrap())
            .sum::<f64>()
            / 16.0;
        assert!((mean - 5.0).abs() < 0.5, "{mean}");
    }

    #[test]
    fn power_scales_linearly() {
        let r = radar();
        let p = |db: f64| {
            (0..64)
                .flat_map(|s| gaussian_echo_series(128, 2.0, 2.0, db, &r, s).unwrap())
                .map(|v| v.norm_sqr())
                .sum::<f64>()
        };
        let ratio = p(10.0) / p(0.0);
        assert!((ratio - 10.0).abs() < 0.5, "{ratio}");
        // identical seeds scale exactly
        let a = gaussian_echo_series(32, 1.0, 1.0, 0.0, &r, 3).unwrap();
        let b = gaussian_echo_series(32, 1.0, 1.0, 20.0, &r, 3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x * 10.0 - y).norm() < 1e-12);
        }
    }

    #[test]
    fn mean_power_matches_configuration() {
        let r = radar();
        let p = (0..200)
            .flat_map(|s| gaussian_echo_series(64, -3.0, 1.5, 3.0, &r, s).unwrap())
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            / (200.0 * 64.0);
        assert!((p / 10f64.powf(0.3) - 1.0).abs() < 0.05, "{p}");
    }

    #[test]
    fn independent_seeds_are_uncorrelated() {
        // a wide spectrum keeps the number of independent samples near K
        let r = radar();
        let rho: f64 = (0..16)
            .map(|s| {
                let x = gaussian_echo_series(128, 5.0, 8.0, 0.0, &r, 2 * s).unwrap();
                let y = gaussian_echo_series(128, 5.0, 8.0, 0.0, &r, 2 * s + 1).unwrap();
                let c: Complex64 = x.iter().zip(&y).map(|(a, b)| a * b.conj()).sum();
                let ex: f64 = x.iter().map(|v| v.norm_sqr()).sum();
                let ey: f64 = y.iter().map(|v| v.norm_sqr()).sum();
                c.norm() / (ex * ey).sqrt()
            })
            .sum::<f64>()
            / 16.0;
        assert!(rho < 0.1, "{rho}");
        assert_eq!(
            gaussian_echo_series(16, 1.0, 1.0, 0.0, &r, 7).unwrap(),
            gaussian_echo_series(16, 1.0, 1.0, 0.0, &r, 7).unwrap()
        );
    }

    #[test]
    fn rejects_degenerate_echo() {
        let r = radar();
        assert!(gaussian_echo_series(64, 0.0, 0.0, 0.0, &r, 1).is_err());
        assert!(gaussian_echo_series(1, 0.0, 1.0, 0.0, &r, 1).is_err());
        assert!(gaussian_echo_series(64, 50.0, 1.0, 0.0, &r, 1).is_err());
    }

    #[test]
    fn impairments_identity_and_system_phase() {
        let x = gaussian_echo_series(32, 1.0, 1.0, 0.0, &radar(), 1).unwrap();
        assert_eq!(apply_impairments(&x, &ImpairmentConfig::default(), 4).unwrap(), x);
        let inf = ImpairmentConfig { snr_db: Some(f64::INFINITY), ..Default::default() };
        assert_eq!(apply_impairments(&x, &inf, 4).unwrap(), x);
        let flip = ImpairmentConfig { system_phase_rad: PI, ..Default::default() };
        for (y, v) in apply_impairments(&x, &flip, 4).unwrap().iter().zip(&x) {
            assert!((y + v).norm() < 1e-12);
        }
    }

    #[test]
    fn jitter_has_configured_rms() {
        let x = vec![Complex64::new(1.0, 0.0); 100_000];
        let imp = ImpairmentConfig { phase_jitter_rms_deg: 0.5, ..Default::default() };
        let y = apply_impairments(&x, &imp, 11).unwrap();
        let sd = (y.iter().map(|v| v.arg().powi(2)).sum::<f64>() / y.len() as f64).sqrt().to_degrees();
        assert!((sd - 0.5).abs() < 0.05, "{sd}");
    }

    #[test]
    fn noise_follows_snr() {
        let x = vec![Complex64::new(1.0, 0.0); 50_000];
        let imp = ImpairmentConfig { snr_db: Some(20.0), ..Default::default() };
        let y = apply_impairments(&x, &imp, 2).unwrap();
        let noise = y.iter().map(|v| (v - 1.0).norm_sqr()).sum::<f64>() / y.len() as f64;
        assert!((noise / 0.01 - 1.0).abs() < 0.05, "{noise}");
    }
}
