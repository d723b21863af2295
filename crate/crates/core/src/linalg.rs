//! Solver for the Gram systems behind the minimum-ISL filters.
//!
//! The Gram matrix of a code set is `R = T − U·Uᴴ`: `T` is the Hermitian
//! Toeplitz matrix built from the summed autocorrelations of the codes and
//! `U` holds the deleted mainlobe columns. `T` is inverted through the
//! Levinson–Durbin factorization `T⁻¹ = B·D⁻¹·Bᴴ`, the low-rank part through
//! the Woodbury identity, and the result is polished by iterative
//! refinement against the exact `R`. Whenever that path breaks down the
//! system is solved densely by Cholesky, with diagonal loading if needed.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `R = T − Σ u_r u_rᴴ` with `T[i][j] = t[j − i]`, `t[-d] = conj(t[d])`.
#[derive(Debug, Clone)]
pub(crate) struct GramSystem {
    pub first_row: Vec<Complex64>,
    pub deleted: Vec<Vec<Complex64>>,
}

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub y: Vec<Complex64>,
    /// Diagonal loading added to `R` (0 when none was needed).
    pub loading: f64,
    /// Set when the structured path was abandoned for dense Cholesky.
    #[cfg_attr(not(test), allow(dead_code))]
    pub dense: bool,
}

impl GramSystem {
    pub fn dim(&self) -> usize {
        self.first_row.len()
    }

    fn t(&self, d: i64) -> Complex64 {
        if d >= 0 {
            self.first_row[d as usize]
        } else {
            self.first_row[(-d) as usize].conj()
        }
    }

    pub fn trace(&self) -> f64 {
        let n = self.dim() as f64;
        let low_rank: f64 = self
            .deleted
            .iter()
            .map(|u| u.iter().map(|v| v.norm_sqr()).sum::<f64>())
            .sum();
        n * self.first_row[0].re - low_rank
    }

    /// `R·y` evaluated exactly (O(N²)).
    pub fn apply(&self, y: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        let mut out = vec![ZERO; n];
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = ZERO;
            for (j, yj) in y.iter().enumerate() {
                s += self.t(j as i64 - i as i64) * yj;
            }
            *o = s;
        }
        for u in &self.deleted {
            let proj: Complex64 = u.iter().zip(y).map(|(a, b)| a.conj() * b).sum();
            for (o, ui) in out.iter_mut().zip(u) {
                *o -= ui * proj;
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut r = DMatrix::from_fn(n, n, |i, j| self.t(j as i64 - i as i64));
        for u in &self.deleted {
            for j in 0..n {
                let uj = u[j].conj();
                for i in 0..n {
                    r[(i, j)] -= u[i] * uj;
                }
            }
        }
        r
    }

    /// Solves `R·y = x`, structured path first.
    pub fn solve(&self, x: &[Complex64]) -> Solution {
        if let Some(y) = self.structured_solve(x) {
            return Solution {
                y,
                loading: 0.0,
                dense: false,
            };
        }
        self.dense_solve(x)
    }

    fn structured_solve(&self, x: &[Complex64]) -> Option<Vec<Complex64>> {
        let toeplitz = ToeplitzInverse::new(&self.first_row)?;
        let woodbury = Woodbury::new(&toeplitz, &self.deleted)?;
        let x_norm = norm(x);
        if x_norm == 0.0 {
            return Some(vec![ZERO; x.len()]);
        }
        let mut y = woodbury.solve(&toeplitz, x);
        let mut res_norm = f64::INFINITY;
        for _ in 0..6 {
            let ry = self.apply(&y);
            let res: Vec<Complex64> = x.iter().zip(&ry).map(|(a, b)| a - b).collect();
            let rn = norm(&res);
            if !rn.is_finite() {
                return None;
            }
            if rn <= 1e-14 * x_norm {
                return Some(y);
            }
            if rn > 0.5 * res_norm {
                // refinement stalled: accept only a small residual
                return (rn <= 1e-10 * x_norm).then_some(y);
            }
            res_norm = rn;
            let dy = woodbury.solve(&toeplitz, &res);
            for (yi, d) in y.iter_mut().zip(dy) {
                *yi += d;
            }
        }
        let rn = norm(
            &x.iter()
                .zip(self.apply(&y))
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        );
        (rn <= 1e-10 * x_norm).then_some(y)
    }

    /// Cholesky on the dense matrix, loading the diagonal with
    /// `1e-10·trace/N` (escalating tenfold) until the factorization succeeds.
    pub fn dense_solve(&self, x: &[Complex64]) -> Solution {
        let n = self.dim();
        let r = self.to_dense();
        let rhs = DVector::from_column_slice(x);
        if let Some(ch) = r.clone().cholesky() {
            return Solution {
                y: ch.solve(&rhs).iter().copied().collect(),
                loading: 0.0,
                dense: true,
            };
        }
        let trace = self.trace();
        let base = if trace > 0.0 {
            trace
        } else {
            n as f64 * self.first_row[0].re.max(1.0)
        };
        let mut loading = 1e-10 * base / n as f64;
        loop {
            let mut loaded = r.clone();
            for i in 0..n {
                loaded[(i, i)] += Complex64::new(loading, 0.0);
            }
            if let Some(ch) = loaded.cholesky() {
                return Solution {
                    y: ch.solve(&rhs).iter().copied().collect(),
                    loading,
                    dense: true,
                };
            }
            loading *= 10.0;
        }
    }
}

fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Levinson–Durbin factorization of a Hermitian positive definite Toeplitz
/// matrix: forward predictors `a_k` and prediction errors `P_k`.
struct ToeplitzInverse {
    n: usize,
    // a_k stored at offset k(k+1)/2, length k+1, a_k[0] = 1
    predictors: Vec<Complex64>,
    errors: Vec<f64>,
}

impl ToeplitzInverse {
    fn new(t: &[Complex64]) -> Option<Self> {
        let n = t.len();
        let p0 = t[0].re;
        if !(p0 > 0.0) {
            return None;
        }
        let mut predictors = Vec::with_capacity(n * (n + 1) / 2);
        let mut errors = Vec::with_capacity(n);
        predictors.push(Complex64::new(1.0, 0.0));
        errors.push(p0);
        let mut prev = vec![Complex64::new(1.0, 0.0)];
        let mut p = p0;
        for k in 1..n {
            let delta: Complex64 = (0..k).map(|i| t[k - i].conj() * prev[i]).sum();
            let kappa = delta / p;
            let mut next = Vec::with_capacity(k + 1);
            for i in 0..=k {
                let fwd = if i < k { prev[i] } else { ZERO };
                let bwd = if i >= 1 { prev[k - i].conj() } else { ZERO };
                next.push(fwd - kappa * bwd);
            }
            p *= 1.0 - kappa.norm_sqr();
            if !(p > 1e-15 * p0) || !p.is_finite() {
                return None;
            }
            predictors.extend_from_slice(&next);
            errors.push(p);
            prev = next;
        }
        Some(ToeplitzInverse {
            n,
            predictors,
            errors,
        })
    }

    fn predictor(&self, k: usize) -> &[Complex64] {
        let off = k * (k + 1) / 2;
        &self.predictors[off..off + k + 1]
    }

    /// `T⁻¹·b = B·D⁻¹·Bᴴ·b` with `B[i][k] = conj(a_k[k − i])`.
    fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut w = vec![ZERO; n];
        for (k, wk) in w.iter_mut().enumerate() {
            let a = self.predictor(k);
            let s: Complex64 = (0..=k).map(|i| a[k - i] * b[i]).sum();
            *wk = s / self.errors[k];
        }
        let mut y = vec![ZERO; n];
        for (k, wk) in w.iter().enumerate() {
            let a = self.predictor(k);
            for i in 0..=k {
                y[i] += a[k - i].conj() * wk;
            }
        }
        y
    }
}

/// Woodbury correction for `R = T − U·Uᴴ`: `R⁻¹ = T⁻¹ + V·(I − S)⁻¹·Vᴴ`
/// with `V = T⁻¹U` and `S = UᴴV`.
struct Woodbury {
    v: Vec<Vec<Complex64>>,
    u: Vec<Vec<Complex64>>,
    capacitance: Option<nalgebra::Cholesky<Complex64, nalgebra::Dyn>>,
}

impl Woodbury {
    fn new(toeplitz: &ToeplitzInverse, deleted: &[Vec<Complex64>]) -> Option<Self> {
        let r = deleted.len();
        let v: Vec<Vec<Complex64>> = deleted.iter().map(|u| toeplitz.solve(u)).collect();
        let capacitance = if r == 0 {
            None
        } else {
            let g = DMatrix::from_fn(r, r, |i, j| {
                let s: Complex64 = deleted[i].iter().zip(&v[j]).map(|(a, b)| a.conj() * b).sum();
                let id = if i == j { 1.0 } else { 0.0 };
                Complex64::new(id, 0.0) - s
            });
            // symmetrize against round-off before factorizing
            let g = (&g + g.adjoint()) * Complex64::new(0.5, 0.0);
            let ch = g.cholesky()?;
            let diag_min = (0..r)
                .map(|i| ch.l_dirty()[(i, i)].re)
                .fold(f64::INFINITY, f64::min);
            if !(diag_min > 1e-7) {
                return None;
            }
            Some(ch)
        };
        Some(Woodbury {
            v,
            u: deleted.to_vec(),
            capacitance,
        })
    }

    fn solve(&self, toeplitz: &ToeplitzInverse, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = toeplitz.solve(x);
        if let Some(ch) = &self.capacitance {
            // Vᴴx = Uᴴ T⁻¹ x since T⁻¹ is Hermitian
            let proj = DVector::from_iterator(
                self.u.len(),
                self.u
                    .iter()
                    .map(|u| u.iter().zip(&y).map(|(a, b)| a.conj() * b).sum::<Complex64>()),
            );
            let coeff = ch.solve(&proj);
            for (vr, c) in self.v.iter().zip(coeff.iter()) {
                for (yi, vi) in y.iter_mut().zip(vr) {
                    *yi += vi * c;
                }
            }
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    // Gram matrix of a random sequence: T from its autocorrelation, U from
    // shifted copies, as the filter designer builds it.
    fn system(rng: &mut ChaCha8Rng, n: usize, len: usize, deleted: usize) -> GramSystem {
        let mut x = vec![ZERO; n];
        let off = (n - len) / 2;
        for v in x.iter_mut().skip(off).take(len) {
            *v = Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
        }
        let first_row: Vec<Complex64> = (0..n)
            .map(|d| (0..n - d).map(|j| x[j] * x[j + d].conj()).sum())
            .collect();
        let half = deleted as i64 / 2;
        let deleted = (-half..=half)
            .map(|m| {
                (0..n as i64)
                    .map(|k| {
                        let i = k - m;
                        if (0..n as i64).contains(&i) { x[i as usize] } else { ZERO }
                    })
                    .collect()
            })
            .collect();
        GramSystem { first_row, deleted }
    }

    #[test]
    fn structured_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (n, len, del) in [(12, 5, 1), (32, 8, 5), (64, 16, 3), (40, 40, 0)] {
            let sys = system(&mut rng, n, len, del);
            let b = random_vec(&mut rng, n);
            let s = sys.solve(&b);
            let d = sys.dense_solve(&b);
            assert_eq!(d.loading, 0.0);
            let scale = norm(&d.y);
            let diff: Vec<Complex64> = s.y.iter().zip(&d.y).map(|(a, b)| a - b).collect();
            assert!(norm(&diff) < 1e-8 * scale, "n={n} rel err {}", norm(&diff) / scale);
        }
    }

    #[test]
    fn singular_system_gets_loading() {
        // code [1], one tap, one deleted column: R = 0
        let sys = GramSystem {
            first_row: vec![Complex64::new(1.0, 0.0)],
            deleted: vec![vec![Complex64::new(1.0, 0.0)]],
        };
        let s = sys.solve(&[Complex64::new(1.0, 0.0)]);
        assert!(s.dense);
        assert!(s.loading > 0.0);
        assert!(s.y[0].re > 0.0);
    }
}
