//! Exact Gaussian-process inference on a precomputed Gram matrix.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{NngpError, Result};
use crate::gram::GramMatrix;
use crate::math::{dot, ln, sqrt};
use crate::matrix::Matrix;

/// First rung of the jitter ladder, relative to the mean diagonal.
pub const JITTER_START: f64 = 1e-10;
/// Last rung of the jitter ladder, relative to the mean diagonal.
pub const JITTER_MAX: f64 = 1e-4;
/// Negative predictive variances above `-VARIANCE_FLOOR_TOL * max(1, psi)`
/// are rounding and get floored to zero.
pub const VARIANCE_FLOOR_TOL: f64 = 1e-8;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Lower-triangular Cholesky factor `A = L L^T`, stored dense row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    /// Fails with the offending pivot if `a` is not numerically positive
    /// definite.
    pub fn new(a: &Matrix) -> core::result::Result<Self, (usize, f64)> {
        let n = a.rows();
        let mut l = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let s = dot(&l.row(i)[..j], &l.row(j)[..j]);
                if i == j {
                    let d = a[(i, i)] - s;
                    if !(d > 0.0) || !d.is_finite() {
                        return Err((i, d));
                    }
                    l[(i, i)] = sqrt(d);
                } else {
                    l[(i, j)] = (a[(i, j)] - s) / l[(j, j)];
                }
            }
        }
        Ok(Self { l })
    }

    pub fn size(&self) -> usize {
        self.l.rows()
    }

    pub fn lower(&self) -> &Matrix {
        &self.l
    }

    /// Solves `L z = b` in place.
    pub fn forward(&self, b: &mut [f64]) {
        let n = self.size();
        for i in 0..n {
            let s = dot(&self.l.row(i)[..i], &b[..i]);
            b[i] = (b[i] - s) / self.l[(i, i)];
        }
    }

    /// Solves `L^T x = z` in place.
    pub fn backward(&self, b: &mut [f64]) {
        let n = self.size();
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * b[k];
            }
            b[i] = s / self.l[(i, i)];
        }
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        self.forward(b);
        self.backward(b);
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.size()).map(|i| ln(self.l[(i, i)])).sum::<f64>()
    }

    /// `L L^T`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.size();
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = dot(&self.l.row(i)[..=j], &self.l.row(j)[..=j]);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        a
    }
}

/// Factorises `k + shift I`, climbing the jitter ladder on failure.
/// Returns the factor and the jitter added on top of `shift`.
pub fn factor_with_jitter(k: &Matrix, shift: f64) -> Result<(Cholesky, f64)> {
    let n = k.rows();
    if n == 0 {
        return Err(NngpError::EmptyDataset);
    }
    if k.cols() != n {
        return Err(NngpError::DimensionMismatch {
            expected: n,
            found: k.cols(),
        });
    }
    if !k.is_finite() || !shift.is_finite() {
        return Err(NngpError::NonFinite("covariance matrix"));
    }
    let mut psi = k.clone();
    for i in 0..n {
        psi[(i, i)] += shift;
    }
    let mean_diag = psi.diagonal().iter().sum::<f64>() / n as f64;
    let scale = if mean_diag > 0.0 { mean_diag } else { 1.0 };
    let mut last = match Cholesky::new(&psi) {
        Ok(f) => return Ok((f, 0.0)),
        Err(p) => p,
    };
    let mut rel = JITTER_START;
    let mut jitter = 0.0;
    while rel <= JITTER_MAX * (1.0 + 1e-9) {
        jitter = rel * scale;
        let mut shifted = psi.clone();
        for i in 0..n {
            shifted[(i, i)] += jitter;
        }
        match Cholesky::new(&shifted) {
            Ok(f) => return Ok((f, jitter)),
            Err(p) => last = p,
        }
        rel *= 10.0;
    }
    Err(NngpError::Factorization {
        jitter,
        pivot: last.0,
        size: n,
        value: last.1,
    })
}

/// Fitted GP: factor of `Psi = K + sigma_eps2 I` and `alpha = Psi^-1 Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    factor: Cholesky,
    alpha: Matrix,
    sigma_eps2: f64,
    jitter_used: f64,
    factorizations: usize,
}

/// Predictive mean per channel and the variance they share.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorPredictive {
    pub mean: Vec<f64>,
    pub variance: f64,
}

impl Posterior {
    pub fn factor(&self) -> &Cholesky {
        &self.factor
    }

    /// `N x C`.
    pub fn alpha(&self) -> &Matrix {
        &self.alpha
    }

    pub fn sigma_eps2(&self) -> f64 {
        self.sigma_eps2
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    /// Number of Cholesky factorisations that produced this posterior.
    /// Always 1 regardless of the number of target channels.
    pub fn factorizations(&self) -> usize {
        self.factorizations
    }

    pub fn size(&self) -> usize {
        self.factor.size()
    }

    pub fn channels(&self) -> usize {
        self.alpha.cols()
    }
}

pub fn fit(gram: &GramMatrix, targets: &Matrix, sigma_eps2: f64) -> Result<Posterior> {
    fit_kernel(gram.values(), targets, sigma_eps2)
}

/// [`fit`] on a bare kernel matrix.
pub fn fit_kernel(k: &Matrix, targets: &Matrix, sigma_eps2: f64) -> Result<Posterior> {
    if !(sigma_eps2 >= 0.0) || !sigma_eps2.is_finite() {
        return Err(NngpError::InvalidParams(alloc::format!(
            "sigma_eps2 must be finite and >= 0, got {sigma_eps2}"
        )));
    }
    if targets.rows() != k.rows() {
        return Err(NngpError::DimensionMismatch {
            expected: k.rows(),
            found: targets.rows(),
        });
    }
    if !targets.is_finite() {
        return Err(NngpError::NonFinite("targets"));
    }
    let (factor, jitter_used) = factor_with_jitter(k, sigma_eps2)?;
    let (n, c) = (targets.rows(), targets.cols());
    let mut alpha = Matrix::zeros(n, c);
    let mut col = vec![0.0; n];
    for ch in 0..c {
        for i in 0..n {
            col[i] = targets[(i, ch)];
        }
        factor.solve_in_place(&mut col);
        for i in 0..n {
            alpha[(i, ch)] = col[i];
        }
    }
    Ok(Posterior {
        factor,
        alpha,
        sigma_eps2,
        jitter_used,
        factorizations: 1,
    })
}

pub fn predict(post: &Posterior, k_vec: &[f64], psi0: f64) -> Result<PosteriorPredictive> {
    let n = post.size();
    if k_vec.len() != n {
        return Err(NngpError::DimensionMismatch {
            expected: n,
            found: k_vec.len(),
        });
    }
    if !psi0.is_finite() || k_vec.iter().any(|v| !v.is_finite()) {
        return Err(NngpError::NonFinite("test covariance"));
    }
    let mean = (0..post.channels())
        .map(|ch| (0..n).map(|i| k_vec[i] * post.alpha[(i, ch)]).sum())
        .collect();
    let mut z = k_vec.to_vec();
    post.factor.forward(&mut z);
    let psi = psi0 + post.sigma_eps2;
    let v = psi - dot(&z, &z);
    let variance = if v >= 0.0 {
        v
    } else if v >= -VARIANCE_FLOOR_TOL * psi.abs().max(1.0) {
        0.0
    } else {
        return Err(NngpError::NegativeVariance(v));
    };
    Ok(PosteriorPredictive { mean, variance })
}

/// Predictions for every row of `k` (`M x N`) with matching `psi0`.
pub fn predict_batch(
    post: &Posterior,
    k: &Matrix,
    psi0: &[f64],
) -> Result<Vec<PosteriorPredictive>> {
    if psi0.len() != k.rows() {
        return Err(NngpError::DimensionMismatch {
            expected: k.rows(),
            found: psi0.len(),
        });
    }
    (0..k.rows())
        .map(|m| predict(post, k.row(m), psi0[m]))
        .collect()
}

/// Gaussian log evidence summed over target channels.
pub fn log_marginal_likelihood(post: &Posterior, targets: &Matrix) -> Result<f64> {
    let n = post.size();
    if targets.rows() != n || targets.cols() != post.channels() {
        return Err(NngpError::DimensionMismatch {
            expected: n,
            found: targets.rows(),
        });
    }
    let log_det = post.factor.log_det();
    let mut total = 0.0;
    for ch in 0..targets.cols() {
        let quad: f64 = (0..n).map(|i| targets[(i, ch)] * post.alpha[(i, ch)]).sum();
        total += -0.5 * quad - 0.5 * log_det - 0.5 * n as f64 * LN_2PI;
    }
    Ok(total)
}

/// `n_samples` draws from `N(0, gram)`, one per row.
pub fn sample_prior(gram: &GramMatrix, n_samples: usize, seed: u64) -> Result<Matrix> {
    sample_gaussian(gram.values(), n_samples, seed)
}

/// [`sample_prior`] on a bare covariance matrix.
pub fn sample_gaussian(cov: &Matrix, n_samples: usize, seed: u64) -> Result<Matrix> {
    let (factor, _) = factor_with_jitter(cov, 0.0)?;
    let n = factor.size();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Matrix::zeros(n_samples, n);
    let mut z = vec![0.0; n];
    for s in 0..n_samples {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let row = out.row_mut(s);
        for i in 0..n {
            row[i] = dot(&factor.l.row(i)[..=i], &z[..=i]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{KernelParams, NoiseSpec};
    use approx::assert_relative_eq;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn identity_system() {
        let post = fit_kernel(&Matrix::identity(2), &m(&[&[1.0], &[2.0]]), 0.0).unwrap();
        assert_eq!(post.alpha().as_slice(), &[1.0, 2.0]);
        assert_eq!(post.jitter_used(), 0.0);
    }

    #[test]
    fn hand_two_by_two() {
        let k = m(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let post = fit_kernel(&k, &m(&[&[1.0], &[0.0]]), 1.0).unwrap();
        assert_relative_eq!(post.alpha()[(0, 0)], 3.0 / 8.0, epsilon = 1e-15);
        assert_relative_eq!(post.alpha()[(1, 0)], -1.0 / 8.0, epsilon = 1e-15);
        let p = predict(&post, &[1.0, 1.0], 2.0).unwrap();
        assert_relative_eq!(p.mean[0], 0.25, epsilon = 1e-15);
        assert_relative_eq!(p.variance, 2.5, epsilon = 1e-14);
    }

    #[test]
    fn zero_cross_gives_prior() {
        let k = m(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let post = fit_kernel(&k, &m(&[&[1.0], &[0.0]]), 0.3).unwrap();
        let p = predict(&post, &[0.0, 0.0], 1.7).unwrap();
        assert_eq!(p.mean[0], 0.0);
        assert_relative_eq!(p.variance, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn noiseless_interpolation() {
        let k = m(&[&[1.0, 0.3, 0.1], &[0.3, 1.0, 0.2], &[0.1, 0.2, 1.0]]);
        let y = m(&[&[0.5], &[-1.0], &[2.0]]);
        let post = fit_kernel(&k, &y, 0.0).unwrap();
        for i in 0..3 {
            let p = predict(&post, k.row(i), 1.0).unwrap();
            assert_relative_eq!(p.mean[0], y[(i, 0)], epsilon = 1e-12);
            assert!(p.variance.abs() < 1e-12);
        }
    }

    #[test]
    fn log_evidence_scalars() {
        let post = fit_kernel(&Matrix::identity(1), &m(&[&[0.0]]), 0.0).unwrap();
        let l = log_marginal_likelihood(&post, &m(&[&[0.0]])).unwrap();
        assert_relative_eq!(l, -0.918_938_533_204_672_7, epsilon = 1e-12);
        let y = m(&[&[1.0]]);
        let post = fit_kernel(&Matrix::identity(1), &y, 1.0).unwrap();
        let l = log_marginal_likelihood(&post, &y).unwrap();
        assert_relative_eq!(
            l,
            -0.25 - 0.5 * 2f64.ln() - 0.918_938_533_204_672_7,
            epsilon = 1e-12
        );
        assert_relative_eq!(l, -1.515_512, epsilon = 1e-6);
    }

    #[test]
    fn jitter_rescues_rank_one() {
        let k = Matrix::from_vec(3, 3, vec![1.0; 9]).unwrap();
        let post = fit_kernel(&k, &m(&[&[1.0], &[1.0], &[1.0]]), 0.0).unwrap();
        assert!(post.jitter_used() > 0.0);
        assert!(post.jitter_used() <= 1e-4);
    }

    #[test]
    fn indefinite_fails_with_diagnostic() {
        let k = m(&[&[1.0, 2.0], &[2.0, 1.0]]);
        match fit_kernel(&k, &m(&[&[1.0], &[1.0]]), 0.0) {
            Err(NngpError::Factorization {
                pivot, size, value, ..
            }) => {
                assert_eq!(pivot, 1);
                assert_eq!(size, 2);
                assert!(value < 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_targets_and_noise() {
        let k = Matrix::identity(2);
        assert!(fit_kernel(&k, &m(&[&[f64::NAN], &[0.0]]), 0.0).is_err());
        assert!(fit_kernel(&k, &m(&[&[1.0], &[0.0]]), -1.0).is_err());
        assert!(fit_kernel(&k, &m(&[&[1.0]]), 0.0).is_err());
    }

    #[test]
    fn multi_channel_single_factorisation() {
        let k = m(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let y = m(&[&[1.0, 0.0, 5.0], &[0.0, 1.0, -2.0]]);
        let post = fit_kernel(&k, &y, 1.0).unwrap();
        assert_eq!(post.factorizations(), 1);
        for ch in 0..3 {
            let single = fit_kernel(&k, &m(&[&[y[(0, ch)]], &[y[(1, ch)]]]), 1.0).unwrap();
            assert_relative_eq!(
                post.alpha()[(0, ch)],
                single.alpha()[(0, 0)],
                epsilon = 1e-15
            );
            assert_relative_eq!(
                post.alpha()[(1, ch)],
                single.alpha()[(1, 0)],
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn prior_samples_identity() {
        let p = KernelParams::new(2.0, 0.0, NoiseSpec::none(), 1).unwrap();
        let g = GramMatrix::from_matrix(Matrix::identity(3), p).unwrap();
        let n = 100_000;
        let s = sample_prior(&g, n, 7).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let c: f64 = (0..n).map(|r| s[(r, a)] * s[(r, b)]).sum::<f64>() / n as f64;
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((c - want).abs() < 0.02, "({a},{b}) {c}");
            }
        }
        assert_eq!(s, sample_prior(&g, n, 7).unwrap());
    }

    #[test]
    fn prior_samples_scaled() {
        let mut k = Matrix::identity(1);
        k[(0, 0)] = 4.0;
        let n = 20_000;
        let s = sample_gaussian(&k, n, 11).unwrap();
        let v: f64 = s.as_slice().iter().map(|x| x * x).sum::<f64>() / n as f64;
        // standard error of the sample variance is 4 * sqrt(2 / n)
        assert!((v - 4.0).abs() < 3.0 * 4.0 * (2.0 / n as f64).sqrt(), "{v}");
    }

    #[test]
    fn reconstruction_matches() {
        let k = m(&[&[4.0, 1.0, 0.5], &[1.0, 3.0, 0.2], &[0.5, 0.2, 2.0]]);
        let f = Cholesky::new(&k).unwrap();
        let r = f.reconstruct();
        for (a, b) in r.as_slice().iter().zip(k.as_slice()) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }
    }
}
