//! Float helpers that are not available in `core`.

pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub(crate) fn asin(x: f64) -> f64 {
    libm::asin(x)
}

pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

/// `base^exp` by binary exponentiation.
pub(crate) fn powu(base: f64, mut exp: usize) -> f64 {
    let mut acc = 1.0;
    let mut b = base;
    while exp > 0 {
        if exp & 1 == 1 {
            acc *= b;
        }
        b *= b;
        exp >>= 1;
    }
    acc
}

/// `sum_{l=0}^{n-1} r^l`, accurate for `r` close to one.
pub(crate) fn geometric_sum(r: f64, n: usize) -> f64 {
    if r == 1.0 {
        return n as f64;
    }
    let dm = r - 1.0;
    if dm.abs() < 0.5 {
        libm::expm1(n as f64 * libm::log1p(dm)) / dm
    } else {
        (powu(r, n) - 1.0) / dm
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators keep the loop vectorisable
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_sum_matches_loop() {
        for &r in &[0.3, 0.999_999_9, 1.0, 1.000_000_1, 1.7, 4.5] {
            for n in [0usize, 1, 7, 50] {
                let mut s = 0.0;
                let mut t = 1.0;
                for _ in 0..n {
                    s += t;
                    t *= r;
                }
                let g = geometric_sum(r, n);
                assert!((g - s).abs() <= 1e-12 * s.abs().max(1.0), "r={r} n={n}");
            }
        }
    }

    #[test]
    fn powu_small_cases() {
        assert_eq!(powu(2.0, 10), 1024.0);
        assert_eq!(powu(0.5, 0), 1.0);
        assert_eq!(powu(3.0, 1), 3.0);
    }
}
