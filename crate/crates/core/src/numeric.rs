//! Small dense linear algebra and the shared guarded logarithm.

use serde::Serialize;

use crate::error::{Error, Result};

/// Logarithm with the convention `log x = 0` whenever `x <= 1`.
///
/// Every iterated logarithm in the rate functions, series terms and
/// statistics goes through this one primitive.
#[inline]
pub fn glog(x: f64) -> f64 {
    if x > 1.0 {
        x.ln()
    } else {
        0.0
    }
}

/// `log log x` under the guarded convention.
#[inline]
pub fn glog2(x: f64) -> f64 {
    glog(glog(x))
}

/// `log log log x` under the guarded convention.
#[inline]
pub fn glog3(x: f64) -> f64 {
    glog(glog(glog(x)))
}

/// Square row-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Mat {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Mat {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = Mat::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            m.data[i * n..(i + 1) * n].copy_from_slice(r);
        }
        m
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(|c| c.to_vec()).collect()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mul(&self, o: &Mat) -> Mat {
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * o.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn pow(&self, mut e: u64) -> Mat {
        let mut base = self.clone();
        let mut acc = Mat::identity(self.n);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// `M x`
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `x^T M`
    pub fn apply_left(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for i in 0..n {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for j in 0..n {
                out[j] += xi * self.data[i * n + j];
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let n = self.n;
        let mut t = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Dobrushin ergodicity coefficient of a stochastic matrix,
    /// `1 - min_{i,k} sum_j min(M_ij, M_kj)`.
    pub fn dobrushin(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for k in (i + 1)..n {
                let overlap: f64 = self
                    .row(i)
                    .iter()
                    .zip(self.row(k))
                    .map(|(a, b)| a.min(*b))
                    .sum();
                worst = worst.max(1.0 - overlap);
            }
        }
        worst
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

pub const POWER_TOL: f64 = 1e-14;
pub const POWER_MAX_ITERS: usize = 1_000_000;

/// Leading eigenpair of a nonnegative primitive matrix by power iteration.
///
/// Returns `(lambda, v)` with `v` positive and normalized to sum 1. Iterates
/// until successive normalized iterates differ by less than `POWER_TOL` in
/// max norm.
pub fn perron_vector(m: &Mat) -> Result<(f64, Vec<f64>)> {
    let n = m.n;
    let mut v = vec![1.0 / n as f64; n];
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = m.apply(&v);
        let s: f64 = w.iter().sum();
        if s <= 0.0 || !s.is_finite() {
            return Err(Error::Numeric {
                what: "power iteration collapsed".into(),
                residual: s,
            });
        }
        let w: Vec<f64> = w.into_iter().map(|x| x / s).collect();
        let diff = w
            .iter()
            .zip(&v)
            .fold(0.0f64, |d, (a, b)| d.max((a - b).abs()));
        v = w;
        lambda = s;
        if diff < POWER_TOL {
            // one more Rayleigh-type refinement of lambda
            let mv = m.apply(&v);
            lambda = mv.iter().sum::<f64>() / v.iter().sum::<f64>();
            return Ok((lambda, v));
        }
    }
    let mv = m.apply(&v);
    let residual = mv
        .iter()
        .zip(&v)
        .fold(0.0f64, |d, (a, b)| d.max((a - lambda * b).abs()));
    Err(Error::Numeric {
        what: format!("power iteration did not converge in {POWER_MAX_ITERS} iterations"),
        residual,
    })
}

/// Spectral radius of `P - 1 pi`, i.e. the modulus of the second eigenvalue
/// of a stochastic matrix `P` with stationary vector `pi`.
///
/// Power iteration on the deflated matrix by repeated normalized squaring:
/// `log rho ~ log ||B^(2^j)|| / 2^j`, which converges even when the
/// subdominant spectrum is complex or has ties in modulus.
pub fn second_eigen_modulus(p: &Mat, pi: &[f64]) -> f64 {
    let n = p.n;
    let mut b = p.clone();
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] -= pi[j];
        }
    }
    let mut log_scale = 0.0f64;
    let mut power = 1.0f64;
    let norm0 = b.max_abs();
    if norm0 < 1e-300 {
        return 0.0;
    }
    for v in b.data.iter_mut() {
        *v /= norm0;
    }
    log_scale += norm0.ln();
    let mut prev = f64::NAN;
    for _ in 0..48 {
        b = b.mul(&b);
        log_scale *= 2.0;
        power *= 2.0;
        let s = b.max_abs();
        if s < 1e-300 {
            return 0.0;
        }
        for v in b.data.iter_mut() {
            *v /= s;
        }
        log_scale += s.ln();
        let est = (log_scale / power).exp();
        if (est - prev).abs() < POWER_TOL * est.max(1e-300) {
            return est;
        }
        prev = est;
    }
    (log_scale / power).exp()
}

/// Stationary vector of an irreducible stochastic matrix (left Perron vector).
pub fn stationary(p: &Mat) -> Result<Vec<f64>> {
    let (_, v) = perron_vector(&p.transpose())?;
    Ok(v)
}

/// Solve `M x = b` by Gaussian elimination with partial pivoting.
pub fn solve(m: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    let n = m.n;
    let mut a = m.data.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .unwrap();
        let pv = a[piv * n + col];
        if pv.abs() < 1e-300 {
            return Err(Error::Numeric {
                what: "singular matrix in solve".into(),
                residual: pv.abs(),
            });
        }
        if piv != col {
            for j in 0..n {
                a.swap(col * n + j, piv * n + j);
            }
            x.swap(col, piv);
        }
        for i in (col + 1)..n {
            let f = a[i * n + col] / pv;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                a[i * n + j] -= f * a[col * n + j];
            }
            x[i] -= f * x[col];
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in (i + 1)..n {
            s -= a[i * n + j] * x[j];
        }
        x[i] = s / a[i * n + i];
    }
    Ok(x)
}

/// `ln(e^a + e^b)` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn guarded_log_convention() {
        assert_eq!(glog(1.0), 0.0);
        assert_eq!(glog(0.5), 0.0);
        assert_eq!(glog(-3.0), 0.0);
        assert!((glog(std::f64::consts::E) - 1.0).abs() < 1e-15);
        // log log log n vanishes up to n = 15 and is positive from 16
        assert_eq!(glog3(15.0), 0.0);
        assert!(glog3(16.0) > 0.0);
    }

    #[test]
    fn perron_of_golden_mean() {
        let a = Mat::from_rows(&[vec![1.0, 1.0], vec![1.0, 0.0]]);
        let (l, v) = perron_vector(&a).unwrap();
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((l - golden).abs() < 1e-13);
        assert!((v[0] / v[1] - golden).abs() < 1e-12);
    }

    #[test]
    fn second_modulus_of_two_state_chain() {
        // eigenvalues 1 and 1 - a - b
        let (a, b) = (0.3, 0.1);
        let p = Mat::from_rows(&[vec![1.0 - a, a], vec![b, 1.0 - b]]);
        let pi = stationary(&p).unwrap();
        let g = second_eigen_modulus(&p, &pi);
        assert!((g - 0.6).abs() < 1e-12, "{g}");
    }

    #[test]
    fn second_modulus_complex_pair() {
        // deterministic 3-cycle mixed with uniform: eigenvalues 1, 0.5 w, 0.5 w^2
        let c = 0.5;
        let mut p = Mat::zeros(3);
        for i in 0..3 {
            p[(i, (i + 1) % 3)] += c;
            for j in 0..3 {
                p[(i, j)] += (1.0 - c) / 3.0;
            }
        }
        let pi = stationary(&p).unwrap();
        let g = second_eigen_modulus(&p, &pi);
        assert!((g - 0.5).abs() < 1e-10, "{g}");
    }

    #[test]
    fn solve_small_system() {
        let m = Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let x = solve(&m, &[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
    }
}
