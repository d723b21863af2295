//! CAN and WeCAN cyclic designers for sets of `M` unimodular sequences, and
//! matched-filter evaluation of code sets.
//!
//! The weighted criterion is
//! `ε = Σ_{i,j} Σ_n γ_|n|² · |r_ij(n) − L·δ_n·δ_ij|²`
//! with `r_ij` the aperiodic correlation of sequences `i` and `j`; CAN is the
//! case `γ ≡ 1`. Writing `Γ = [γ_|t−s|] = CᵀC`, the criterion equals
//! `(1/2L)·Σ_p ‖Y_p·Y_pᴴ − γ_0·L·I‖²` over the `2L`-point spectrum, where
//! column `k` of `Y_p` is the DFT at bin `p` of `C_k,t·x(t)`. Each cycle
//! replaces `Y_p` by the nearest scaled partial isometry and then projects
//! the sequences back onto the unit circle.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::correlation::{cross_correlate, isl, psl_dbc, to_dbc, CorrelationProfile};
use crate::error::{invalid, Error, Result};
use crate::fft;
use crate::waveforms::{random_unimodular, PolyphaseCode};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanConfig {
    pub m: usize,
    pub length: usize,
    /// `γ_0 .. γ_{L−1}`; used by WeCAN only.
    #[serde(default)]
    pub gamma: Option<Vec<f64>>,
    pub max_cycles: usize,
    /// Stop once no phase moves by more than this many radians.
    pub tolerance: f64,
    pub seed: u64,
}

impl CanConfig {
    pub fn new(m: usize, length: usize, seed: u64) -> Self {
        CanConfig {
            m,
            length,
            gamma: None,
            max_cycles: 2000,
            tolerance: 1e-6,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(invalid("M must be at least 1"));
        }
        if self.length < self.m {
            return Err(invalid(format!("L = {} must be at least M = {}", self.length, self.m)));
        }
        if !(self.tolerance > 0.0) {
            return Err(invalid("tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanResult {
    pub codes: Vec<PolyphaseCode>,
    /// Criterion of the iterate entering each cycle, then of the result.
    pub criterion_trace: Vec<f64>,
    pub cycles: usize,
    /// False when `max_cycles` ran out before the phases settled.
    pub converged: bool,
}

impl CanResult {
    pub fn criterion(&self) -> f64 {
        *self.criterion_trace.last().expect("trace is never empty")
    }
}

/// CAN: every lag weighted equally.
pub fn can_design(cfg: &CanConfig) -> Result<CanResult> {
    cfg.validate()?;
    let gamma = vec![1.0; cfg.length];
    run(cfg, &gamma)
}

/// WeCAN with the configured lag weights.
pub fn wecan_design(cfg: &CanConfig) -> Result<CanResult> {
    cfg.validate()?;
    let gamma = cfg
        .gamma
        .as_ref()
        .ok_or_else(|| invalid("WeCAN needs gamma weights"))?;
    check_gamma(gamma, cfg.length)?;
    run(cfg, gamma)
}

fn check_gamma(gamma: &[f64], length: usize) -> Result<()> {
    if gamma.len() != length {
        return Err(invalid(format!("{} gamma weights for length {length}", gamma.len())));
    }
    if let Some(i) = gamma.iter().position(|g| !g.is_finite()) {
        return Err(invalid(format!("gamma[{i}] is not finite")));
    }
    if !(gamma[0] > 0.0) {
        return Err(invalid("gamma[0] must be positive"));
    }
    Ok(())
}

fn gamma_matrix(gamma: &[f64]) -> DMatrix<f64> {
    let n = gamma.len();
    DMatrix::from_fn(n, n, |i, j| gamma[i.abs_diff(j)])
}

/// Rows `C_k` with `CᵀC = Γ`, one per positive eigenvalue of `Γ`.
fn gamma_factor(gamma: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = gamma.len();
    let eig = SymmetricEigen::new(gamma_matrix(gamma));
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -1e-10 * max {
        return Err(invalid(format!(
            "gamma weights give an indefinite matrix: eigenvalue {min:.6e}"
        )));
    }
    Ok((0..n)
        .filter(|&k| eig.eigenvalues[k] > 1e-12 * max)
        .map(|k| {
            let s = eig.eigenvalues[k].sqrt();
            eig.eigenvectors.column(k).iter().map(|v| s * v).collect()
        })
        .collect())
}

/// Spectra of the weighted sequences, stored flat: entry `(m, k, p)` is the
/// DFT bin `p` of `C_k,t·x_m(t)`, contiguous in `p`.
struct Spectra {
    m: usize,
    k: usize,
    bins: usize,
    data: Vec<Complex64>,
}

impl Spectra {
    fn compute(x: &[Vec<Complex64>], c: &[Vec<f64>]) -> Self {
        let n = x[0].len();
        let bins = 2 * n;
        let mut data = vec![ZERO; x.len() * c.len() * bins];
        for (mi, xm) in x.iter().enumerate() {
            for (ki, ck) in c.iter().enumerate() {
                let row = &mut data[(mi * c.len() + ki) * bins..][..bins];
                for t in 0..n {
                    row[t] = xm[t] * ck[t];
                }
                fft::forward(row);
            }
        }
        Spectra {
            m: x.len(),
            k: c.len(),
            bins,
            data,
        }
    }

    fn row(&self, m: usize, k: usize) -> &[Complex64] {
        &self.data[(m * self.k + k) * self.bins..][..self.bins]
    }

    /// Per-bin Gram matrices `Y_p·Y_pᴴ` (M × M), flattened `(i, j, p)`.
    fn gram_rows(&self) -> Vec<Complex64> {
        let (m, b) = (self.m, self.bins);
        let mut g = vec![ZERO; m * m * b];
        for i in 0..m {
            for j in i..m {
                let out = &mut g[(i * m + j) * b..][..b];
                for k in 0..self.k {
                    for ((o, yi), yj) in out.iter_mut().zip(self.row(i, k)).zip(self.row(j, k)) {
                        *o += yi * yj.conj();
                    }
                }
            }
        }
        for i in 0..m {
            for j in 0..i {
                for p in 0..b {
                    g[(i * m + j) * b + p] = g[(j * m + i) * b + p].conj();
                }
            }
        }
        g
    }

    /// Per-bin Gram matrices `Y_pᴴ·Y_p` (K × K), flattened `(i, j, p)`.
    fn cogram_rows(&self) -> Vec<Complex64> {
        let (k, b) = (self.k, self.bins);
        let mut g = vec![ZERO; k * k * b];
        for i in 0..k {
            for j in 0..k {
                let out = &mut g[(i * k + j) * b..][..b];
                for mi in 0..self.m {
                    for ((o, yi), yj) in out.iter_mut().zip(self.row(mi, i)).zip(self.row(mi, j)) {
                        *o += yi.conj() * yj;
                    }
                }
            }
        }
        g
    }

    fn criterion(&self, gamma0: f64) -> f64 {
        let (m, b) = (self.m, self.bins);
        let g = self.gram_rows();
        let target = gamma0 * (b / 2) as f64;
        let mut total = 0.0;
        for i in 0..m {
            for j in 0..m {
                for v in &g[(i * m + j) * b..][..b] {
                    total += if i == j { (v - target).norm_sqr() } else { v.norm_sqr() };
                }
            }
        }
        total / b as f64
    }

    /// `scale·U_p` with `U_p` the polar factor of `Y_p`, in the same layout.
    fn polar_targets(&self, scale: f64) -> Vec<Complex64> {
        let (m, k, b) = (self.m, self.k, self.bins);
        let wide = m <= k;
        let r = if wide { m } else { k };
        let gram = if wide { self.gram_rows() } else { self.cogram_rows() };
        let mut out = vec![ZERO; self.data.len()];
        for p in 0..b {
            let gp = DMatrix::from_fn(r, r, |i, j| gram[(i * r + j) * b + p]);
            match inverse_sqrt(gp) {
                Some(root) => {
                    for mi in 0..m {
                        for ki in 0..k {
                            let mut v = ZERO;
                            if wide {
                                for mj in 0..m {
                                    v += root[(mi, mj)] * self.data[(mj * k + ki) * b + p];
                                }
                            } else {
                                for kj in 0..k {
                                    v += self.data[(mi * k + kj) * b + p] * root[(kj, ki)];
                                }
                            }
                            out[(mi * k + ki) * b + p] = v * scale;
                        }
                    }
                }
                None => {
                    let yp = DMatrix::from_fn(m, k, |mi, ki| self.data[(mi * k + ki) * b + p]);
                    let svd = yp.svd(true, true);
                    let u = svd.u.expect("requested u") * svd.v_t.expect("requested v_t");
                    for mi in 0..m {
                        for ki in 0..k {
                            out[(mi * k + ki) * b + p] = u[(mi, ki)] * scale;
                        }
                    }
                }
            }
        }
        out
    }
}

/// `G^{-1/2}` of a Hermitian positive definite matrix, `None` when singular.
fn inverse_sqrt(g: DMatrix<Complex64>) -> Option<DMatrix<Complex64>> {
    if g.nrows() == 1 {
        let v = g[(0, 0)].re;
        return (v > 0.0).then(|| DMatrix::from_element(1, 1, Complex64::new(v.sqrt().recip(), 0.0)));
    }
    let eig = SymmetricEigen::new(g);
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(*v));
    if !(max > 0.0) || eig.eigenvalues.iter().any(|&v| v <= 1e-12 * max) {
        return None;
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| Complex64::new(v.sqrt().recip(), 0.0)));
    Some(&eig.eigenvectors * d * eig.eigenvectors.adjoint())
}

fn unit(phases: &[Vec<f64>]) -> Vec<Vec<Complex64>> {
    phases
        .iter()
        .map(|p| p.iter().map(|&a| Complex64::from_polar(1.0, a)).collect())
        .collect()
}

fn run(cfg: &CanConfig, gamma: &[f64]) -> Result<CanResult> {
    let n = cfg.length;
    let m = cfg.m;
    let c = gamma_factor(gamma)?;
    let k = c.len();
    // target norm matching the spectra's total energy 2L·M·L·γ_0
    let scale = (gamma[0] * (n * m) as f64 / m.min(k) as f64).sqrt();
    let mut phases: Vec<Vec<f64>> = (0..m)
        .map(|i| random_unimodular(n, cfg.seed.wrapping_add(i as u64)).map(|c| c.phases().to_vec()))
        .collect::<Result<_>>()?;

    let mut y = Spectra::compute(&unit(&phases), &c);
    let mut trace = vec![y.criterion(gamma[0])];
    let mut best = (trace[0], phases.clone());
    let mut converged = false;
    let mut cycles = 0;
    let mut buf = vec![ZERO; 2 * n];
    while cycles < cfg.max_cycles {
        cycles += 1;
        let targets = y.polar_targets(scale);
        let mut moved = 0.0f64;
        for (mi, ph) in phases.iter_mut().enumerate() {
            let mut acc = vec![ZERO; n];
            for (ki, ck) in c.iter().enumerate() {
                buf.copy_from_slice(&targets[(mi * k + ki) * 2 * n..][..2 * n]);
                fft::inverse(&mut buf);
                for t in 0..n {
                    acc[t] += buf[t] * ck[t];
                }
            }
            for (a, s) in ph.iter_mut().zip(&acc) {
                if s.norm() > 0.0 {
                    let next = s.arg();
                    let d = (next - *a).rem_euclid(std::f64::consts::TAU);
                    moved = moved.max(d.min(std::f64::consts::TAU - d));
                    *a = next;
                }
            }
        }
        y = Spectra::compute(&unit(&phases), &c);
        let e = y.criterion(gamma[0]);
        if !e.is_finite() {
            return Err(Error::NonFinite(format!("criterion became {e} at cycle {cycles}")));
        }
        trace.push(e);
        if e < best.0 {
            best = (e, phases.clone());
        }
        if moved < cfg.tolerance {
            converged = true;
            break;
        }
    }
    let codes = best
        .1
        .into_iter()
        .enumerate()
        .map(|(i, p)| PolyphaseCode::new(format!("can-{}", i + 1), p))
        .collect::<Result<Vec<_>>>()?;
    if *trace.last().expect("nonempty") != best.0 {
        trace.push(best.0);
    }
    Ok(CanResult {
        codes,
        criterion_trace: trace,
        cycles,
        converged,
    })
}

/// Weighted criterion evaluated lag by lag from the correlations. `None`
/// weights every lag by one.
pub fn can_criterion(codes: &[PolyphaseCode], gamma: Option<&[f64]>) -> Result<f64> {
    let n = check_set(codes)?;
    if let Some(g) = gamma {
        check_gamma(g, n)?;
    }
    let weight = |lag: i64| gamma.map_or(1.0, |g| g[lag.unsigned_abs() as usize]);
    let samples: Vec<Vec<Complex64>> = codes.iter().map(|c| c.samples()).collect();
    let mut total = 0.0;
    for (i, a) in samples.iter().enumerate() {
        for (j, b) in samples.iter().enumerate() {
            let p = cross_correlate(a, b)?;
            for lag in p.lags() {
                let mut v = p.at(lag);
                if lag == 0 && i == j {
                    v -= Complex64::new(n as f64, 0.0);
                }
                let w = weight(lag);
                total += w * w * v.norm_sqr();
            }
        }
    }
    Ok(total)
}

/// The same criterion through the `2L`-point spectrum.
pub fn can_criterion_spectral(codes: &[PolyphaseCode], gamma: Option<&[f64]>) -> Result<f64> {
    let n = check_set(codes)?;
    let ones;
    let g = match gamma {
        Some(g) => {
            check_gamma(g, n)?;
            g
        }
        None => {
            ones = vec![1.0; n];
            &ones
        }
    };
    let c = gamma_factor(g)?;
    let x: Vec<Vec<Complex64>> = codes.iter().map(|c| c.samples()).collect();
    Ok(Spectra::compute(&x, &c).criterion(g[0]))
}

/// Largest region `P = ⌊(L+M)/2M⌋` in which the criterion can be driven
/// near zero.
pub fn central_region(length: usize, m: usize) -> usize {
    (length + m) / (2 * m)
}

/// Unit weights on lags `|n| < P`, zero elsewhere, with `γ_0` raised just
/// enough to keep `Γ` positive semidefinite.
pub fn region_weights(length: usize, region: usize) -> Result<Vec<f64>> {
    if region == 0 || region > length {
        return Err(invalid(format!("region {region} outside 1..={length}")));
    }
    let mut gamma: Vec<f64> = (0..length).map(|n| if n < region { 1.0 } else { 0.0 }).collect();
    let eig = SymmetricEigen::new(gamma_matrix(&gamma));
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < 0.0 {
        gamma[0] += -min * (1.0 + 1e-9);
    }
    Ok(gamma)
}

fn check_set(codes: &[PolyphaseCode]) -> Result<usize> {
    if codes.is_empty() {
        return Err(invalid("code set is empty"));
    }
    let n = codes[0].len();
    if codes.iter().any(|c| c.len() != n) {
        return Err(invalid("codes differ in length"));
    }
    Ok(n)
}

/// One filter/code combination of a matched-filter report.
#[derive(Debug, Clone, PartialEq)]
pub struct PairReport {
    /// Index of the code acting as the (matched) filter.
    pub filter: usize,
    pub code: usize,
    pub profile: CorrelationProfile,
    /// Sidelobe energy: outside the zero lag for auto terms, all lags for
    /// cross terms.
    pub isl: f64,
    /// Peak sidelobe relative to the filter's own auto mainlobe.
    pub psl_dbc: f64,
}

impl PairReport {
    pub fn is_auto(&self) -> bool {
        self.filter == self.code
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchedReport {
    pub labels: Vec<String>,
    pub pairs: Vec<PairReport>,
}

impl MatchedReport {
    /// Worst peak sidelobe across every auto and cross term.
    pub fn worst_psl_dbc(&self) -> f64 {
        self.pairs.iter().map(|p| p.psl_dbc).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `pair,isl,psl_dbc` rows; `pair` is `filter/code` by label.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("pair,isl,psl_dbc\n");
        for p in &self.pairs {
            out.push_str(&format!(
                "{}/{},{:e},{}\n",
                self.labels[p.filter], self.labels[p.code], p.isl, p.psl_dbc
            ));
        }
        out
    }
}

/// All `M²` matched-filter correlations of a code set.
pub fn evaluate_set_matched(codes: &[PolyphaseCode]) -> Result<MatchedReport> {
    check_set(codes)?;
    let samples: Vec<Vec<Complex64>> = codes.iter().map(|c| c.samples()).collect();
    let mut pairs = Vec::with_capacity(codes.len() * codes.len());
    for (i, filter) in samples.iter().enumerate() {
        let mainlobe = cross_correlate(filter, filter)?.zero_lag().norm();
        for (k, code) in samples.iter().enumerate() {
            let profile = cross_correlate(code, filter)?.with_normalization(mainlobe);
            let (energy, psl) = if i == k {
                (isl(&profile, 1)?, psl_dbc(&profile, 1)?)
            } else {
                let peak = profile.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
                (profile.energy(), to_dbc(peak, mainlobe))
            };
            pairs.push(PairReport {
                filter: i,
                code: k,
                profile,
                isl: energy,
                psl_dbc: psl,
            });
        }
    }
    Ok(MatchedReport {
        labels: codes.iter().map(|c| c.label().to_string()).collect(),
        pairs,
    })
}
