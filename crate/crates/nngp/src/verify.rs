//! Monte-Carlo checks of the analytic kernel: single layer expectations and
//! finite random networks.

use nngp_core::kernel::{step_offdiag, KernelState};
use nngp_core::mc::{
    check_network_inputs, mc_layer_expectation, moments_to_matrix, FiniteNetworkSample, Readout,
};
use nngp_core::{KernelParams, Matrix, NoiseSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerCheck {
    pub k_xx: f64,
    pub k_yy: f64,
    pub k_xy: f64,
    pub sigma_w2: f64,
    pub sigma_b2: f64,
    pub analytic: f64,
    pub estimate: f64,
    pub std_err: f64,
    /// Within the requested number of standard errors.
    pub pass: bool,
}

/// `n` random layer inputs drawn from `seed`: variances in [0.05, 3],
/// correlation in [-1, 1], sigma_w2 in [0.5, 3], sigma_b2 in [0, 0.5].
pub fn random_layer_configs(n: usize, seed: u64) -> Vec<(KernelState, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let kxx = rng.random_range(0.05..3.0);
            let kyy = rng.random_range(0.05..3.0);
            let rho: f64 = rng.random_range(-1.0..=1.0);
            let state = KernelState::new(kxx, kyy, rho * (kxx * kyy).sqrt(), 0)
                .expect("valid by construction");
            (
                state,
                rng.random_range(0.5..3.0),
                rng.random_range(0.0..0.5),
            )
        })
        .collect()
}

/// Compares the off-diagonal step against `mc_layer_expectation` for each
/// configuration. Configurations run in parallel; each has its own seed.
pub fn check_layers(
    configs: &[(KernelState, f64, f64)],
    n_samples: usize,
    k_se: f64,
    seed: u64,
) -> Result<Vec<LayerCheck>> {
    configs
        .par_iter()
        .enumerate()
        .map(|(i, &(s, w, b))| {
            let p = KernelParams::new(w, b, NoiseSpec::none(), 1)?;
            let analytic = step_offdiag(&s, &p)?;
            let e = mc_layer_expectation(
                s.k_xx,
                s.k_yy,
                s.k_xy,
                w,
                b,
                n_samples,
                seed.wrapping_add(i as u64),
            )?;
            Ok(LayerCheck {
                k_xx: s.k_xx,
                k_yy: s.k_yy,
                k_xy: s.k_xy,
                sigma_w2: w,
                sigma_b2: b,
                analytic,
                estimate: e.estimate,
                std_err: e.std_err,
                pass: e.brackets(analytic, k_se),
            })
        })
        .collect()
}

/// Analytic `2 x 2` kernel of `(x, y)` at `params.depth()`.
pub fn analytic_pair_gram(x: &[f64], y: &[f64], params: &KernelParams) -> Result<Matrix> {
    let mut s = KernelState::base(x, y, params.noise())?;
    for _ in 0..params.depth() {
        s = s.step(params)?;
    }
    let mut m = Matrix::zeros(2, 2);
    m[(0, 0)] = s.k_xx;
    m[(0, 1)] = s.k_xy;
    m[(1, 0)] = s.k_xy;
    m[(1, 1)] = s.k_yy;
    Ok(m)
}

/// Empirical Gram over `n_networks` networks, computed in parallel and
/// summed in index order so the result does not depend on scheduling.
pub fn parallel_network_gram(
    x: &[f64],
    y: &[f64],
    sample: &FiniteNetworkSample,
    n_networks: usize,
) -> Result<Matrix> {
    check_network_inputs((x, y), sample, n_networks)?;
    let moments: Vec<[f64; 3]> = (0..n_networks as u64)
        .into_par_iter()
        .map(|k| sample.network_moments(x, y, k))
        .collect();
    let mut acc = [0.0; 3];
    for m in moments {
        for (a, v) in acc.iter_mut().zip(m) {
            *a += v;
        }
    }
    Ok(moments_to_matrix(acc, n_networks))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkCheck {
    pub noise: String,
    pub mu2: f64,
    pub sigma_w2: f64,
    pub sigma_b2: f64,
    pub depth: usize,
    pub width: usize,
    pub n_networks: usize,
    /// `[k_xx, k_xy, k_yy]`.
    pub analytic: [f64; 3],
    pub empirical: [f64; 3],
    /// Largest entry error relative to `sqrt(k_xx k_yy)`.
    pub rel_err: f64,
    pub pass: bool,
}

/// Two fixed inputs of dimension 16 with correlation about 0.4.
pub fn network_inputs() -> (Vec<f64>, Vec<f64>) {
    let x: Vec<f64> = (0..16).map(|i| ((i as f64) * 0.7).sin() + 0.3).collect();
    let y: Vec<f64> = (0..16).map(|i| ((i as f64) * 0.45 + 1.0).cos()).collect();
    (x, y)
}

/// Noiseless and multiplicative settings at depths 1 to 3 checked against
/// the layer-averaged Gram of width-`width` networks.
pub fn network_settings() -> Vec<KernelParams> {
    let mut out = Vec::new();
    for depth in 1..=3 {
        out.push(KernelParams::new(2.0, 0.1, NoiseSpec::none(), depth).expect("valid"));
        out.push(
            KernelParams::critical(NoiseSpec::multiplicative(1.5).expect("valid"), depth)
                .expect("valid"),
        );
        out.push(
            KernelParams::new(
                1.2,
                0.05,
                NoiseSpec::multiplicative(2.0).expect("valid"),
                depth,
            )
            .expect("valid"),
        );
    }
    out
}

pub fn check_networks(
    settings: &[KernelParams],
    width: usize,
    n_networks: usize,
    rel_tol: f64,
    seed: u64,
) -> Result<Vec<NetworkCheck>> {
    let (x, y) = network_inputs();
    settings
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let sample = FiniteNetworkSample::new(width, *p, seed.wrapping_add(i as u64))
                .with_readout(Readout::LayerAverage);
            let a = analytic_pair_gram(&x, &y, p)?;
            let e = parallel_network_gram(&x, &y, &sample, n_networks)?;
            let scale = (a[(0, 0)] * a[(1, 1)]).sqrt();
            let analytic = [a[(0, 0)], a[(0, 1)], a[(1, 1)]];
            let empirical = [e[(0, 0)], e[(0, 1)], e[(1, 1)]];
            let rel_err = analytic
                .iter()
                .zip(&empirical)
                .map(|(a, e)| (a - e).abs() / scale)
                .fold(0.0, f64::max);
            Ok(NetworkCheck {
                noise: p.noise().mode().to_string(),
                mu2: p.noise().mu2(),
                sigma_w2: p.sigma_w2(),
                sigma_b2: p.sigma_b2(),
                depth: p.depth(),
                width,
                n_networks,
                analytic,
                empirical,
                rel_err,
                pass: rel_err <= rel_tol,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_layer_suite_brackets() {
        let configs = random_layer_configs(5, 3);
        let checks = check_layers(&configs, 20_000, 4.0, 9).unwrap();
        assert!(checks.iter().all(|c| c.pass), "{checks:?}");
        assert_eq!(checks, check_layers(&configs, 20_000, 4.0, 9).unwrap());
    }

    #[test]
    fn parallel_gram_matches_serial() {
        let (x, y) = network_inputs();
        let p = network_settings()[1];
        let s = FiniteNetworkSample::new(64, p, 4);
        let serial = nngp_core::mc::finite_network_gram((&x, &y), &s, 1000).unwrap();
        assert_eq!(parallel_network_gram(&x, &y, &s, 1000).unwrap(), serial);
    }
}
