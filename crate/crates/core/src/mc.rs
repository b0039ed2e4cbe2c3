//! Monte-Carlo checks of the kernel recursion: Gaussian expectations of
//! one layer step, and wide finite noisy networks.
//!
//! Finite networks are sampled layer by layer. Given the noisy activations
//! `a`, `a'` of the previous layer at the two inputs, every unit's
//! pre-activation pair is exactly bivariate normal with covariance
//! `sigma_w2 / D * [[a.a, a.a'], [a.a', a'.a']] + sigma_b2`, so the weight
//! matrix never has to be materialised.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{NngpError, Result};
use crate::kernel::{KernelParams, NoiseMode, NoiseSpec};
use crate::math::{dot, sqrt};
use crate::matrix::Matrix;

pub const MIN_LAYER_SAMPLES: usize = 10_000;
pub const MIN_WIDTH: usize = 64;
pub const MIN_NETWORKS: usize = 1_000;

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub estimate: f64,
    pub std_err: f64,
}

impl Estimate {
    /// Whether `value` lies within `k` standard errors.
    pub fn brackets(&self, value: f64, k: f64) -> bool {
        (self.estimate - value).abs() <= k * self.std_err
    }
}

fn bivariate(k_xx: f64, k_yy: f64, k_xy: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let z1: f64 = StandardNormal.sample(rng);
    let z2: f64 = StandardNormal.sample(rng);
    if k_xx <= 0.0 {
        return (0.0, sqrt(k_yy.max(0.0)) * z2);
    }
    let s = sqrt(k_xx);
    let c = k_xy / s;
    let rest = sqrt((k_yy - c * c).max(0.0));
    (s * z1, c * z1 + rest * z2)
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// `sigma_w2 E[relu(u) relu(v)] + sigma_b2` for `(u, v)` with covariance
/// `[[k_xx, k_xy], [k_xy, k_yy]]`.
pub fn mc_layer_expectation(
    k_xx: f64,
    k_yy: f64,
    k_xy: f64,
    sigma_w2: f64,
    sigma_b2: f64,
    n_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    if n_samples < MIN_LAYER_SAMPLES {
        return Err(NngpError::InvalidParams(alloc::format!(
            "need at least {MIN_LAYER_SAMPLES} samples, got {n_samples}"
        )));
    }
    for v in [k_xx, k_yy, k_xy, sigma_w2, sigma_b2] {
        if !v.is_finite() {
            return Err(NngpError::NonFinite("layer expectation input"));
        }
    }
    if k_xx < 0.0 || k_yy < 0.0 || k_xy * k_xy > k_xx * k_yy * (1.0 + 1e-12) {
        return Err(NngpError::NotPsd);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Welford keeps the variance accurate for long runs
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..n_samples {
        let (u, v) = bivariate(k_xx, k_yy, k_xy, &mut rng);
        let s = sigma_w2 * relu(u) * relu(v) + sigma_b2;
        let d = s - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (s - mean);
    }
    let var = m2 / (n_samples - 1) as f64;
    Ok(Estimate {
        estimate: mean,
        std_err: sqrt(var / n_samples as f64),
    })
}

/// Distribution of the injected noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseLaw {
    /// No noise.
    Identity,
    /// Keep with probability `p`, scaling kept values by `1/p`.
    Dropout { keep: f64 },
    /// Multiplicative `N(1, mu2 - 1)`.
    GaussianMult { mu2: f64 },
    /// Additive `N(0, mu2)`.
    GaussianAdd { mu2: f64 },
}

impl NoiseLaw {
    /// Dropout for multiplicative noise, Gaussian for additive.
    pub fn default_for(noise: NoiseSpec) -> Self {
        if noise.is_noiseless() {
            return NoiseLaw::Identity;
        }
        match noise.mode() {
            NoiseMode::None => NoiseLaw::Identity,
            NoiseMode::Multiplicative => NoiseLaw::Dropout {
                keep: 1.0 / noise.mu2(),
            },
            NoiseMode::Additive => NoiseLaw::GaussianAdd { mu2: noise.mu2() },
        }
    }

    /// Gaussian law with the same second moment.
    pub fn gaussian_for(noise: NoiseSpec) -> Self {
        match Self::default_for(noise) {
            NoiseLaw::Dropout { .. } => NoiseLaw::GaussianMult { mu2: noise.mu2() },
            other => other,
        }
    }

    pub fn is_additive(&self) -> bool {
        matches!(self, NoiseLaw::GaussianAdd { .. })
    }

    /// One draw of the noise variable itself.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseLaw::Identity => 1.0,
            NoiseLaw::Dropout { keep } => {
                if rng.random::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            }
            NoiseLaw::GaussianMult { mu2 } => {
                let z: f64 = StandardNormal.sample(rng);
                1.0 + sqrt(mu2 - 1.0) * z
            }
            NoiseLaw::GaussianAdd { mu2 } => {
                let z: f64 = StandardNormal.sample(rng);
                sqrt(mu2) * z
            }
        }
    }

    fn apply<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> f64 {
        match self {
            NoiseLaw::Identity => x,
            NoiseLaw::GaussianAdd { .. } => x + self.sample(rng),
            _ => x * self.sample(rng),
        }
    }
}

/// Which output statistic a network contributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Readout {
    /// Products of output unit 0 at the two inputs.
    SingleUnit,
    /// Products averaged over every output unit of the network.
    LayerAverage,
}

/// A family of random finite networks sharing width, depth and noise.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteNetworkSample {
    pub width: usize,
    pub params: KernelParams,
    pub law: NoiseLaw,
    pub readout: Readout,
    pub seed: u64,
}

impl FiniteNetworkSample {
    pub fn new(width: usize, params: KernelParams, seed: u64) -> Self {
        Self {
            width,
            law: NoiseLaw::default_for(params.noise()),
            params,
            readout: Readout::SingleUnit,
            seed,
        }
    }

    pub fn with_law(mut self, law: NoiseLaw) -> Self {
        self.law = law;
        self
    }

    pub fn with_readout(mut self, readout: Readout) -> Self {
        self.readout = readout;
        self
    }

    pub fn depth(&self) -> usize {
        self.params.depth()
    }

    /// Output second moments `[hh, hh', h'h']` of network number `index`.
    /// Each network draws from its own ChaCha stream, so any partition of
    /// the indices gives the same values.
    pub fn network_moments(&self, x: &[f64], y: &[f64], index: u64) -> [f64; 3] {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let d0 = x.len() as f64;
        let xn: Vec<f64> = x.iter().map(|&v| self.law.apply(v, &mut rng)).collect();
        let yn: Vec<f64> = y.iter().map(|&v| self.law.apply(v, &mut rng)).collect();
        let (mut cxx, mut cyy, mut cxy) =
            (dot(&xn, &xn) / d0, dot(&yn, &yn) / d0, dot(&xn, &yn) / d0);

        let w = self.width;
        let sw = self.params.sigma_w2();
        let sb = self.params.sigma_b2();
        let depth = self.params.depth();
        let mut hx = vec![0.0; w];
        let mut hy = vec![0.0; w];
        let mut layer = 0;
        loop {
            let last = layer == depth;
            let units = if last && self.readout == Readout::SingleUnit {
                1
            } else {
                w
            };
            for i in 0..units {
                let (u, v) = bivariate(cxx, cyy, cxy, &mut rng);
                hx[i] = u;
                hy[i] = v;
            }
            if last {
                let n = units as f64;
                let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
                for i in 0..units {
                    a += hx[i] * hx[i];
                    b += hx[i] * hy[i];
                    c += hy[i] * hy[i];
                }
                return [a / n, b / n, c / n];
            }
            for i in 0..w {
                hx[i] = self.law.apply(relu(hx[i]), &mut rng);
                hy[i] = self.law.apply(relu(hy[i]), &mut rng);
            }
            let scale = sw / w as f64;
            cxx = scale * dot(&hx, &hx) + sb;
            cyy = scale * dot(&hy, &hy) + sb;
            cxy = scale * dot(&hx, &hy) + sb;
            layer += 1;
        }
    }
}

/// Empirical `2 x 2` output covariance over `n_networks` random networks,
/// with the default noise law and a single output unit.
pub fn mc_finite_network_gram(
    x_pair: (&[f64], &[f64]),
    width: usize,
    params: &KernelParams,
    n_networks: usize,
    seed: u64,
) -> Result<Matrix> {
    finite_network_gram(
        x_pair,
        &FiniteNetworkSample::new(width, *params, seed),
        n_networks,
    )
}

/// [`mc_finite_network_gram`] with explicit noise law and readout.
pub fn finite_network_gram(
    x_pair: (&[f64], &[f64]),
    sample: &FiniteNetworkSample,
    n_networks: usize,
) -> Result<Matrix> {
    check_network_inputs(x_pair, sample, n_networks)?;
    let mut acc = [0.0; 3];
    for k in 0..n_networks as u64 {
        let m = sample.network_moments(x_pair.0, x_pair.1, k);
        for (a, v) in acc.iter_mut().zip(m) {
            *a += v;
        }
    }
    Ok(moments_to_matrix(acc, n_networks))
}

/// Validates the arguments of a finite-network run.
pub fn check_network_inputs(
    x_pair: (&[f64], &[f64]),
    sample: &FiniteNetworkSample,
    n_networks: usize,
) -> Result<()> {
    if sample.width < MIN_WIDTH {
        return Err(NngpError::InvalidParams(alloc::format!(
            "width must be at least {MIN_WIDTH}, got {}",
            sample.width
        )));
    }
    if n_networks < MIN_NETWORKS {
        return Err(NngpError::InvalidParams(alloc::format!(
            "need at least {MIN_NETWORKS} networks, got {n_networks}"
        )));
    }
    let (x, y) = x_pair;
    if x.is_empty() || x.len() != y.len() {
        return Err(NngpError::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(NngpError::NonFinite("network inputs"));
    }
    Ok(())
}

/// Averages summed `[hh, hh', h'h']` moments into a symmetric matrix.
pub fn moments_to_matrix(sums: [f64; 3], n_networks: usize) -> Matrix {
    let n = n_networks as f64;
    let mut m = Matrix::zeros(2, 2);
    m[(0, 0)] = sums[0] / n;
    m[(0, 1)] = sums[1] / n;
    m[(1, 0)] = sums[1] / n;
    m[(1, 1)] = sums[2] / n;
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{rho_g, step_offdiag, KernelState};
    use core::f64::consts::PI;

    #[test]
    fn diagonal_step_bracket() {
        let e = mc_layer_expectation(1.0, 1.0, 1.0, 2.0, 0.0, 200_000, 1).unwrap();
        assert!(e.brackets(1.0, 3.0), "{e:?}");
    }

    #[test]
    fn orthogonal_step_bracket() {
        let e = mc_layer_expectation(1.0, 1.0, 0.0, 2.0, 0.0, 200_000, 2).unwrap();
        assert!(e.brackets(1.0 / PI, 3.0), "{e:?}");
        assert!((rho_g(0.0) - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn half_correlation_bracket() {
        let e = mc_layer_expectation(1.0, 1.0, 0.5, 1.0, 0.1, 1_000_000, 3).unwrap();
        let p = KernelParams::new(1.0, 0.1, NoiseSpec::none(), 1).unwrap();
        let want = step_offdiag(&KernelState::new(1.0, 1.0, 0.5, 0).unwrap(), &p).unwrap();
        assert!((want - 0.404_50).abs() < 1e-5);
        assert!(e.brackets(want, 3.0), "{e:?} vs {want}");
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            mc_layer_expectation(1.0, 1.0, 1.5, 2.0, 0.0, 10_000, 0),
            Err(NngpError::NotPsd)
        ));
        assert!(mc_layer_expectation(1.0, 1.0, 0.5, 2.0, 0.0, 100, 0).is_err());
        let p = KernelParams::critical(NoiseSpec::none(), 1).unwrap();
        let x = [1.0, 0.0];
        assert!(mc_finite_network_gram((&x, &x), 32, &p, 1000, 0).is_err());
        assert!(mc_finite_network_gram((&x, &x), 64, &p, 10, 0).is_err());
        assert!(mc_finite_network_gram((&x, &x[..1]), 64, &p, 1000, 0).is_err());
    }

    #[test]
    fn noise_draw_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        for law in [
            NoiseLaw::Dropout { keep: 0.5 },
            NoiseLaw::GaussianMult { mu2: 1.5 },
        ] {
            let draws: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
            assert!(
                (mean - 1.0).abs() < 3.0 * sqrt(var / n as f64),
                "{law:?} {mean}"
            );
            let m2 = draws.iter().map(|d| d * d).sum::<f64>() / n as f64;
            assert!(
                (m2 - 2.0).abs() < 0.05 || (m2 - 1.5).abs() < 0.05,
                "{law:?} {m2}"
            );
        }
        let law = NoiseLaw::GaussianAdd { mu2: 0.7 };
        let draws: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 3.0 * sqrt(0.7 / n as f64), "{mean}");
    }

    #[test]
    fn network_moments_are_partition_free() {
        let p = KernelParams::critical(NoiseSpec::multiplicative(1.5).unwrap(), 2).unwrap();
        let s = FiniteNetworkSample::new(64, p, 9);
        let x = [1.0, 0.5, -0.3];
        let y = [0.2, 1.0, 0.4];
        assert_eq!(s.network_moments(&x, &y, 17), s.network_moments(&x, &y, 17));
        assert_ne!(s.network_moments(&x, &y, 17), s.network_moments(&x, &y, 18));
    }

    #[test]
    fn identical_inputs_give_rank_one_without_noise() {
        let p = KernelParams::critical(NoiseSpec::none(), 2).unwrap();
        let x = [1.0, 0.5, -0.3];
        let g = mc_finite_network_gram((&x, &x), 64, &p, 1000, 4).unwrap();
        assert!((g[(0, 0)] - g[(0, 1)]).abs() < 1e-6 * g[(0, 0)]);
        assert!((g[(1, 1)] - g[(0, 1)]).abs() < 1e-6 * g[(0, 0)]);
    }
}
