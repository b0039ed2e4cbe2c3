//! Scalar mathematics of the noisy ReLU kernel: the arc-cosine correlation
//! map, the input-layer kernel, the per-layer diagonal and off-diagonal
//! recursions, the closed-form diagonal expansion and the limiting-regime
//! taxonomy.
//!
//! Noise enters only through its second moment `mu2 = E[eps^2]`, and only on
//! the diagonal: injected noise is drawn independently for every input, so
//! the expected product of two distinct noisy inputs carries no `mu2` factor.

use core::f64::consts::PI;
use core::fmt;

use alloc::format;

use crate::error::{NngpError, Result};
use crate::math::{asin, dot, geometric_sum, powu, sqrt};

/// Absolute slack allowed on `|k_xy| <= sqrt(k_xx k_yy)`.
pub const CAUCHY_SCHWARZ_TOL: f64 = 1e-12;

/// Correlations up to this far outside `[-1, 1]` are clamped silently.
pub const CORRELATION_CLAMP_TOL: f64 = 1e-9;

/// Relative tolerance for deciding `sigma_w2 == 2 / mu2`.
pub const CRITICAL_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseMode {
    None,
    Additive,
    Multiplicative,
}

impl fmt::Display for NoiseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseMode::None => "none",
            NoiseMode::Additive => "add",
            NoiseMode::Multiplicative => "mult",
        })
    }
}

/// How noise is combined with a layer input, and its second moment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    mode: NoiseMode,
    mu2: f64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            mode: NoiseMode::None,
            mu2: 1.0,
        }
    }

    /// Additive noise with `E[eps] = 0` and `E[eps^2] = mu2 >= 0`.
    pub fn additive(mu2: f64) -> Result<Self> {
        if !(mu2.is_finite() && mu2 >= 0.0) {
            return Err(NngpError::InvalidParams(format!(
                "additive noise needs mu2 >= 0, got {mu2}"
            )));
        }
        Ok(Self {
            mode: NoiseMode::Additive,
            mu2,
        })
    }

    /// Multiplicative noise with `E[eps] = 1`, hence `mu2 >= 1`.
    pub fn multiplicative(mu2: f64) -> Result<Self> {
        if !(mu2.is_finite() && mu2 >= 1.0) {
            return Err(NngpError::InvalidParams(format!(
                "multiplicative noise needs mu2 >= 1, got {mu2}"
            )));
        }
        Ok(Self {
            mode: NoiseMode::Multiplicative,
            mu2,
        })
    }

    /// Inverted dropout keeping each unit with probability `keep`: `mu2 = 1/keep`.
    pub fn dropout(keep: f64) -> Result<Self> {
        if !(keep > 0.0 && keep <= 1.0) {
            return Err(NngpError::InvalidParams(format!(
                "dropout keep probability must lie in (0, 1], got {keep}"
            )));
        }
        Self::multiplicative(1.0 / keep)
    }

    pub fn new(mode: NoiseMode, mu2: f64) -> Result<Self> {
        match mode {
            NoiseMode::None => Ok(Self::none()),
            NoiseMode::Additive => Self::additive(mu2),
            NoiseMode::Multiplicative => Self::multiplicative(mu2),
        }
    }

    pub fn mode(&self) -> NoiseMode {
        self.mode
    }

    pub fn mu2(&self) -> f64 {
        self.mu2
    }

    /// True when the noise leaves the kernel identical to the noiseless one.
    pub fn is_noiseless(&self) -> bool {
        match self.mode {
            NoiseMode::None => true,
            NoiseMode::Multiplicative => self.mu2 == 1.0,
            NoiseMode::Additive => self.mu2 == 0.0,
        }
    }
}

/// Weight and bias variances, noise and depth of a noisy ReLU NNGP kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    sigma_w2: f64,
    sigma_b2: f64,
    noise: NoiseSpec,
    depth: usize,
}

impl KernelParams {
    pub fn new(sigma_w2: f64, sigma_b2: f64, noise: NoiseSpec, depth: usize) -> Result<Self> {
        if !(sigma_w2.is_finite() && sigma_w2 > 0.0) {
            return Err(NngpError::InvalidParams(format!(
                "sigma_w2 must be positive, got {sigma_w2}"
            )));
        }
        if !(sigma_b2.is_finite() && sigma_b2 >= 0.0) {
            return Err(NngpError::InvalidParams(format!(
                "sigma_b2 must be non-negative, got {sigma_b2}"
            )));
        }
        if depth == 0 {
            return Err(NngpError::InvalidParams("depth must be at least 1".into()));
        }
        Ok(Self {
            sigma_w2,
            sigma_b2,
            noise,
            depth,
        })
    }

    /// The critical pair `(2/mu2, 0)` for the given noise at `depth`.
    pub fn critical(noise: NoiseSpec, depth: usize) -> Result<Self> {
        let (w, b) = critical_params(noise)?;
        Self::new(w, b, noise, depth)
    }

    pub fn sigma_w2(&self) -> f64 {
        self.sigma_w2
    }

    pub fn sigma_b2(&self) -> f64 {
        self.sigma_b2
    }

    pub fn noise(&self) -> NoiseSpec {
        self.noise
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn with_depth(&self, depth: usize) -> Result<Self> {
        Self::new(self.sigma_w2, self.sigma_b2, self.noise, depth)
    }

    /// The diagonal step is affine, `k -> ratio * k + offset`.
    pub fn diag_affine(&self) -> (f64, f64) {
        let half = self.sigma_w2 / 2.0;
        match self.noise.mode {
            NoiseMode::None => (half, self.sigma_b2),
            NoiseMode::Multiplicative => (half * self.noise.mu2, self.sigma_b2),
            NoiseMode::Additive => (half, self.noise.mu2 + self.sigma_b2),
        }
    }

    /// `|sigma_w2 - 2/mu2|`; for additive noise the boundary is `sigma_w2 = 2`.
    pub fn distance_to_critical(&self) -> f64 {
        (self.sigma_w2 - 2.0 / effective_mu2(self.noise)).abs()
    }
}

/// `k^l(x,x)`, `k^l(x',x')` and `k^l(x,x')` at layer `l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelState {
    pub k_xx: f64,
    pub k_yy: f64,
    pub k_xy: f64,
    pub layer: usize,
}

impl KernelState {
    pub fn new(k_xx: f64, k_yy: f64, k_xy: f64, layer: usize) -> Result<Self> {
        if !(k_xx.is_finite() && k_yy.is_finite() && k_xy.is_finite()) {
            return Err(NngpError::NonFinite("kernel state"));
        }
        if k_xx < 0.0 || k_yy < 0.0 {
            return Err(NngpError::InvalidParams(format!(
                "variances must be non-negative, got {k_xx} and {k_yy}"
            )));
        }
        if k_xy.abs() > sqrt(k_xx * k_yy) + CAUCHY_SCHWARZ_TOL {
            return Err(NngpError::InvalidParams(format!(
                "|k_xy| = {} exceeds sqrt(k_xx k_yy) = {}",
                k_xy.abs(),
                sqrt(k_xx * k_yy)
            )));
        }
        Ok(Self {
            k_xx,
            k_yy,
            k_xy,
            layer,
        })
    }

    /// Layer-0 state for two distinct inputs.
    pub fn base(x: &[f64], y: &[f64], noise: NoiseSpec) -> Result<Self> {
        let k_xy = base_covariance(x, y)?;
        Self::new(base_variance(x, noise)?, base_variance(y, noise)?, k_xy, 0)
    }

    /// `rho = k_xy / sqrt(k_xx k_yy)`, or `None` when a variance is zero.
    pub fn correlation(&self) -> Result<Option<f64>> {
        let s = sqrt(self.k_xx * self.k_yy);
        if s == 0.0 {
            return Ok(None);
        }
        clamp_correlation(self.k_xy / s).map(Some)
    }

    /// One layer of the recursion.
    pub fn step(&self, params: &KernelParams) -> Result<Self> {
        let k_xy = step_offdiag(self, params)?;
        Ok(Self {
            k_xx: step_diag(self.k_xx, params),
            k_yy: step_diag(self.k_yy, params),
            k_xy,
            layer: self.layer + 1,
        })
    }

    pub fn satisfies_cauchy_schwarz(&self) -> bool {
        self.k_xy.abs() <= sqrt(self.k_xx * self.k_yy) + CAUCHY_SCHWARZ_TOL
    }
}

/// Clamp a correlation into `[-1, 1]`, rejecting values beyond rounding slack.
pub fn clamp_correlation(rho: f64) -> Result<f64> {
    if rho.is_nan() || rho.abs() > 1.0 + CORRELATION_CLAMP_TOL {
        return Err(NngpError::CorrelationOutOfRange(rho));
    }
    Ok(rho.clamp(-1.0, 1.0))
}

/// `rho * g(rho) = (rho asin(rho) + sqrt(1 - rho^2)) / pi`, continuous on `[-1, 1]`.
pub fn rho_g(rho: f64) -> f64 {
    let r = rho.clamp(-1.0, 1.0);
    (r * asin(r) + sqrt((1.0 - r * r).max(0.0))) / PI
}

/// The arc-cosine map `g(rho)`. Singular at zero; the recursion only needs [`rho_g`].
pub fn g_rho(rho: f64) -> f64 {
    let r = rho.clamp(-1.0, 1.0);
    rho_g(r) / r
}

/// Input-layer variance `k^0(x, x)` including the injected noise.
pub fn base_variance(x: &[f64], noise: NoiseSpec) -> Result<f64> {
    if x.is_empty() {
        return Err(NngpError::EmptyDataset);
    }
    let sq = dot(x, x) / x.len() as f64;
    Ok(match noise.mode {
        NoiseMode::None => sq,
        NoiseMode::Multiplicative => noise.mu2 * sq,
        NoiseMode::Additive => sq + noise.mu2,
    })
}

/// Input-layer covariance `k^0(x, y)` of two distinct inputs.
pub fn base_covariance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(NngpError::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.is_empty() {
        return Err(NngpError::EmptyDataset);
    }
    Ok(dot(x, y) / x.len() as f64)
}

/// Input-layer kernel normalised by the input dimension. Identical vectors
/// are treated as the same input and receive the noisy variance.
pub fn base_kernel(x: &[f64], y: &[f64], noise: NoiseSpec) -> Result<f64> {
    let k = base_covariance(x, y)?;
    if x == y {
        base_variance(x, noise)
    } else {
        Ok(k)
    }
}

/// One layer of the diagonal recursion.
pub fn step_diag(k_prev: f64, params: &KernelParams) -> f64 {
    let (ratio, offset) = params.diag_affine();
    ratio * k_prev + offset
}

/// Off-diagonal update from previous-layer variances and covariance.
#[inline]
pub(crate) fn offdiag_update(
    k_xy: f64,
    sd_x: f64,
    sd_y: f64,
    half_w: f64,
    sigma_b2: f64,
) -> Result<f64> {
    let s = sd_x * sd_y;
    if s == 0.0 {
        return Ok(sigma_b2);
    }
    let rho = clamp_correlation(k_xy / s)?;
    Ok(half_w * s * (rho_g(rho) + 0.5 * rho) + sigma_b2)
}

/// One layer of the off-diagonal recursion. Noise never enters this step.
pub fn step_offdiag(state: &KernelState, params: &KernelParams) -> Result<f64> {
    offdiag_update(
        state.k_xy,
        sqrt(state.k_xx),
        sqrt(state.k_yy),
        params.sigma_w2 / 2.0,
        params.sigma_b2,
    )
}

/// Diagonal after `params.depth()` layers, from the geometric expansion.
pub fn closed_form_diag(k0: f64, params: &KernelParams) -> f64 {
    let (ratio, offset) = params.diag_affine();
    let depth = params.depth;
    powu(ratio, depth) * k0 + offset * geometric_sum(ratio, depth)
}

/// Second moment governing the critical boundary: 1 for noiseless kernels.
pub fn effective_mu2(noise: NoiseSpec) -> f64 {
    match noise.mode {
        NoiseMode::Multiplicative => noise.mu2,
        _ => 1.0,
    }
}

/// `(2/mu2, 0)`; additive noise has no critical pair.
pub fn critical_params(noise: NoiseSpec) -> Result<(f64, f64)> {
    if noise.mode == NoiseMode::Additive && !noise.is_noiseless() {
        return Err(NngpError::NoCriticalPair);
    }
    Ok((2.0 / effective_mu2(noise), 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    Vanishing,
    ConstantLimit(f64),
    Divergent,
    FixedPreserving,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::Vanishing => f.write_str("Vanishing"),
            Regime::ConstantLimit(a) => write!(f, "ConstantLimit({a})"),
            Regime::Divergent => f.write_str("Divergent"),
            Regime::FixedPreserving => f.write_str("FixedPreserving"),
        }
    }
}

/// Row of the limiting-behaviour table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TableCase {
    A1,
    A2,
    M1,
    M2,
    M3,
    M4,
    M5,
    NoiselessCritical,
    NoiselessOrdered,
    NoiselessDivergent,
}

impl fmt::Display for TableCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TableCase::A1 => "A1",
            TableCase::A2 => "A2",
            TableCase::M1 => "M1",
            TableCase::M2 => "M2",
            TableCase::M3 => "M3",
            TableCase::M4 => "M4",
            TableCase::M5 => "M5",
            TableCase::NoiselessCritical => "NoiselessCritical",
            TableCase::NoiselessOrdered => "NoiselessOrdered",
            TableCase::NoiselessDivergent => "NoiselessDivergent",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeLabel {
    pub regime: Regime,
    pub case: TableCase,
}

impl fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.case, self.regime)
    }
}

fn is_critical(sigma_w2: f64, critical: f64) -> bool {
    (sigma_w2 - critical).abs() <= CRITICAL_REL_TOL * critical
}

/// Depth-to-infinity behaviour of the diagonal recursion.
pub fn classify_regime(params: &KernelParams) -> RegimeLabel {
    let noise = params.noise;
    let (w, b) = (params.sigma_w2, params.sigma_b2);
    let label = |regime, case| RegimeLabel { regime, case };

    if noise.mode == NoiseMode::Additive && !noise.is_noiseless() {
        // every additive setting degenerates; sigma_w2 = 2 grows linearly
        return if w < 2.0 && !is_critical(w, 2.0) {
            label(
                Regime::ConstantLimit((noise.mu2 + b) / (1.0 - w / 2.0)),
                TableCase::A1,
            )
        } else {
            label(Regime::Divergent, TableCase::A2)
        };
    }

    let mu2 = effective_mu2(noise);
    let critical = 2.0 / mu2;
    let ratio = w * mu2 / 2.0;
    let noiseless = noise.is_noiseless();
    let pick = |noisy, quiet| if noiseless { quiet } else { noisy };

    if is_critical(w, critical) {
        if b == 0.0 {
            label(
                Regime::FixedPreserving,
                pick(TableCase::M5, TableCase::NoiselessCritical),
            )
        } else {
            label(
                Regime::Divergent,
                pick(TableCase::M4, TableCase::NoiselessDivergent),
            )
        }
    } else if w < critical {
        if b == 0.0 {
            label(
                Regime::Vanishing,
                pick(TableCase::M1, TableCase::NoiselessOrdered),
            )
        } else {
            label(
                Regime::ConstantLimit(b / (1.0 - ratio)),
                pick(TableCase::M2, TableCase::NoiselessOrdered),
            )
        }
    } else {
        label(
            Regime::Divergent,
            pick(TableCase::M3, TableCase::NoiselessDivergent),
        )
    }
}
