use nalgebra::{DMatrix, DVector};
use nngp_core::gp::{fit_kernel, log_marginal_likelihood, predict, sample_prior};
use nngp_core::gram::{build_cross_vector, build_train_gram, frobenius_norm};
use nngp_core::kernel::base_kernel;
use nngp_core::{Dataset, KernelParams, Matrix, NoiseSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_dataset(n: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for _ in 0..n {
        let row: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        rows.push(
            row.iter()
                .map(|v| v / norm * (d as f64).sqrt())
                .collect::<Vec<_>>(),
        );
    }
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    Dataset::from_parts(Matrix::from_rows(&rows).unwrap(), Matrix::column(&y)).unwrap()
}

/// Entry-by-entry recursion on the three scalars, no shared trajectories.
fn naive_entry(x: &[f64], y: &[f64], p: &KernelParams) -> f64 {
    use nngp_core::kernel::{step_diag, step_offdiag};
    let mut s = nngp_core::KernelState::new(
        base_kernel(x, x, p.noise()).unwrap(),
        base_kernel(y, y, p.noise()).unwrap(),
        if x == y {
            base_kernel(x, x, p.noise()).unwrap()
        } else {
            base_kernel(x, y, p.noise()).unwrap()
        },
        0,
    )
    .unwrap();
    for _ in 0..p.depth() {
        let kxy = if x == y {
            step_diag(s.k_xy, p)
        } else {
            step_offdiag(&s, p).unwrap()
        };
        s = nngp_core::KernelState::new(
            step_diag(s.k_xx, p),
            step_diag(s.k_yy, p),
            kxy,
            s.layer + 1,
        )
        .unwrap();
    }
    s.k_xy
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn permutation_equivariance(seed in 0u64..1000, n in 2usize..12, depth in 1usize..15) {
        let d = random_dataset(n, 5, seed);
        let p = KernelParams::new(1.6, 0.05, NoiseSpec::multiplicative(1.2).unwrap(), depth).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.reverse();
        perm.rotate_left(seed as usize % n);
        let g = build_train_gram(&d, &p, &[]).unwrap();
        let gp = build_train_gram(&d.permuted(&perm).unwrap(), &p, &[]).unwrap();
        for a in 0..n {
            for b in 0..n {
                prop_assert_eq!(gp.values()[(a, b)], g.values()[(perm[a], perm[b])]);
            }
        }
    }

    #[test]
    fn gram_matches_naive_entries(seed in 0u64..1000, depth in 1usize..20, mode in 0usize..3) {
        let d = random_dataset(6, 4, seed);
        let noise = match mode {
            0 => NoiseSpec::none(),
            1 => NoiseSpec::additive(0.3).unwrap(),
            _ => NoiseSpec::multiplicative(1.7).unwrap(),
        };
        let p = KernelParams::new(1.3, 0.1, noise, depth).unwrap();
        let g = build_train_gram(&d, &p, &[]).unwrap();
        prop_assert_eq!(g.values().asymmetry(), 0.0);
        for a in 0..6 {
            for b in 0..6 {
                let want = naive_entry(d.inputs().row(a), d.inputs().row(b), &p);
                let got = g.values()[(a, b)];
                prop_assert!((got - want).abs() <= 1e-13 * want.abs().max(1.0), "{got} vs {want}");
            }
        }
    }
}

#[test]
fn frobenius_matches_double_loop() {
    let d = random_dataset(20, 7, 3);
    let p = KernelParams::critical(NoiseSpec::multiplicative(1.25).unwrap(), 20).unwrap();
    let g = build_train_gram(&d, &p, &[]).unwrap();
    let mut s = 0.0;
    for i in 0..20 {
        for j in 0..20 {
            s += g.values()[(i, j)] * g.values()[(i, j)];
        }
    }
    assert_eq!(frobenius_norm(&g), s.sqrt());
}

#[test]
fn large_noise_cross_vector_vanishes() {
    let d = random_dataset(8, 6, 11);
    let p = KernelParams::critical(NoiseSpec::multiplicative(1e4).unwrap(), 20).unwrap();
    let x_star: Vec<f64> = random_dataset(1, 6, 99).inputs().row(0).to_vec();
    let (k, psi0) = build_cross_vector(&d, &x_star, &p).unwrap();
    let max = k.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(max < 1e-3 * psi0, "{max} vs {psi0}");
}

fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let a = &b * b.transpose() / n as f64 + DMatrix::identity(n, n) * 0.1;
    Matrix::from_vec(n, n, a.transpose().as_slice().to_vec()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

#[test]
fn dense_inverse_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..100 {
        let n = rng.random_range(1..=50);
        let c = rng.random_range(1..=3);
        let k = random_spd(n, &mut rng);
        let eps = if case % 4 == 0 {
            0.0
        } else {
            rng.random_range(0.0..0.5)
        };
        let y = Matrix::from_vec(
            n,
            c,
            (0..n * c).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let post = fit_kernel(&k, &y, eps).unwrap();
        assert_eq!(post.jitter_used(), 0.0);

        let psi = to_na(&k) + DMatrix::identity(n, n) * eps;
        let inv = psi.clone().try_inverse().unwrap();
        let det = psi.determinant();
        let ya = to_na(&y);
        let mut lml = 0.0;
        for ch in 0..c {
            let yc = ya.column(ch);
            lml += -0.5 * yc.dot(&(&inv * yc))
                - 0.5 * det.ln()
                - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
        }
        assert!(
            rel(log_marginal_likelihood(&post, &y).unwrap(), lml) < 1e-8,
            "case {case}"
        );

        let kv = DVector::from_fn(n, |_, _| rng.random_range(-0.3..0.3));
        let psi0 = 1.0 + kv.norm_squared() * 20.0;
        let p = predict(&post, kv.as_slice(), psi0).unwrap();
        let w = &inv * &kv;
        for ch in 0..c {
            let mean = ya.column(ch).dot(&w);
            assert!(
                (p.mean[ch] - mean).abs() <= 1e-8 * mean.abs().max(1e-3),
                "case {case} ch {ch}"
            );
        }
        let var = psi0 + eps - kv.dot(&w);
        assert!(
            rel(p.variance, var) < 1e-8,
            "case {case}: {} vs {var}",
            p.variance
        );
        assert!(p.variance >= 0.0 && p.variance <= psi0 + eps);
    }
}

#[test]
fn predictive_variance_within_prior_on_real_kernel() {
    let d = random_dataset(30, 5, 8);
    let p = KernelParams::new(1.8, 0.02, NoiseSpec::multiplicative(1.1).unwrap(), 10).unwrap();
    let g = build_train_gram(&d, &p, &[]).unwrap();
    let post = fit_kernel(g.values(), d.targets(), 1e-3).unwrap();
    let tests = random_dataset(20, 5, 9);
    for t in 0..20 {
        let (k, psi0) = build_cross_vector(&d, tests.inputs().row(t), &p).unwrap();
        let pr = predict(&post, &k, psi0).unwrap();
        assert!(pr.variance >= 0.0 && pr.variance <= psi0 + 1e-3);
    }
}

#[test]
fn large_noise_gives_prior_predictions() {
    let d = random_dataset(40, 10, 21);
    let p = KernelParams::critical(NoiseSpec::multiplicative(1e4).unwrap(), 20).unwrap();
    let g = build_train_gram(&d, &p, &[]).unwrap();
    let post = fit_kernel(g.values(), d.targets(), 1e-6).unwrap();
    let ymax = d
        .targets()
        .as_slice()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let tests = random_dataset(10, 10, 22);
    for t in 0..10 {
        let (k, psi0) = build_cross_vector(&d, tests.inputs().row(t), &p).unwrap();
        let pr = predict(&post, &k, psi0).unwrap();
        assert!(pr.mean[0].abs() <= 1e-2 * ymax);
        assert!(pr.variance >= 0.95 * (psi0 + 1e-6));
    }
}

#[test]
fn noisy_prior_samples_are_erratic() {
    // 1-D lattice embedded as (x, 1) so neighbouring points are strongly correlated
    let xs: Vec<Vec<f64>> = (0..40)
        .map(|i| vec![-1.0 + 3.0 * i as f64 / 39.0, 1.0])
        .collect();
    let data = Dataset::from_parts(Matrix::from_rows(&xs).unwrap(), Matrix::zeros(40, 1)).unwrap();
    let adjacent_corr = |noise: NoiseSpec| {
        let p = KernelParams::critical(noise, 20).unwrap();
        let g = build_train_gram(&data, &p, &[]).unwrap();
        let v = g.values();
        (0..39)
            .map(|i| v[(i, i + 1)] / (v[(i, i)] * v[(i + 1, i + 1)]).sqrt())
            .sum::<f64>()
            / 39.0
    };
    assert!(adjacent_corr(NoiseSpec::none()) > 0.9);
    assert!(adjacent_corr(NoiseSpec::multiplicative(2.0).unwrap()) < 0.3);

    let p = KernelParams::critical(NoiseSpec::multiplicative(2.0).unwrap(), 20).unwrap();
    let g = build_train_gram(&data, &p, &[]).unwrap();
    let a = sample_prior(&g, 5, 1).unwrap();
    assert_eq!(a, sample_prior(&g, 5, 1).unwrap());
    assert_ne!(a, sample_prior(&g, 5, 2).unwrap());
}
