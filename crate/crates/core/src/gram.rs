//! Lifting the scalar recursion to train Gram matrices, train/test
//! cross-covariances and test-point variances.
//!
//! Only the `N x N` block is stored: output units are independent, so the
//! full covariance over `N * D_L` outputs is that block tensored with the
//! identity. Entries are evaluated pair by pair from the per-input diagonal
//! trajectories, which are computed once per input.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{NngpError, Result};
use crate::kernel::{classify_regime, offdiag_update, step_diag, KernelParams, NoiseMode};
use crate::math::{dot, sqrt};
use crate::matrix::Matrix;

/// Inputs, regression targets and stable row identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Matrix,
    targets: Matrix,
    row_ids: Vec<usize>,
}

impl Dataset {
    pub fn new(inputs: Matrix, targets: Matrix, row_ids: Vec<usize>) -> Result<Self> {
        if inputs.rows() == 0 {
            return Err(NngpError::EmptyDataset);
        }
        if inputs.cols() == 0 {
            return Err(NngpError::InvalidParams(
                "inputs need at least one column".into(),
            ));
        }
        if targets.rows() != inputs.rows() {
            return Err(NngpError::DimensionMismatch {
                expected: inputs.rows(),
                found: targets.rows(),
            });
        }
        if row_ids.len() != inputs.rows() {
            return Err(NngpError::DimensionMismatch {
                expected: inputs.rows(),
                found: row_ids.len(),
            });
        }
        if !inputs.is_finite() {
            return Err(NngpError::NonFinite("dataset inputs"));
        }
        if !targets.is_finite() {
            return Err(NngpError::NonFinite("dataset targets"));
        }
        Ok(Self {
            inputs,
            targets,
            row_ids,
        })
    }

    /// Dataset with row ids `0..N`.
    pub fn from_parts(inputs: Matrix, targets: Matrix) -> Result<Self> {
        let ids = (0..inputs.rows()).collect();
        Self::new(inputs, targets, ids)
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.rows() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn targets(&self) -> &Matrix {
        &self.targets
    }

    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    /// Rows reordered by `perm` (row `i` of the result is row `perm[i]`).
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.len() {
            return Err(NngpError::DimensionMismatch {
                expected: self.len(),
                found: perm.len(),
            });
        }
        let inputs: Vec<&[f64]> = perm.iter().map(|&p| self.inputs.row(p)).collect();
        let targets: Vec<&[f64]> = perm.iter().map(|&p| self.targets.row(p)).collect();
        let mut t = Matrix::from_rows(&targets)?;
        if self.targets.cols() == 0 {
            t = Matrix::zeros(self.len(), 0);
        }
        Self::new(
            Matrix::from_rows(&inputs)?,
            t,
            perm.iter().map(|&p| self.row_ids[p]).collect(),
        )
    }
}

/// Per-layer values of one traced pair, layers `0..=L`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTrace {
    pub i: usize,
    pub j: usize,
    pub diag_i: Vec<f64>,
    pub diag_j: Vec<f64>,
    pub offdiag: Vec<f64>,
}

/// Symmetric train covariance at depth `params.depth()`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    values: Matrix,
    params: KernelParams,
    depth_trace: Vec<PairTrace>,
}

impl GramMatrix {
    /// Wrap an existing symmetric matrix.
    pub fn from_matrix(values: Matrix, params: KernelParams) -> Result<Self> {
        if values.rows() != values.cols() {
            return Err(NngpError::DimensionMismatch {
                expected: values.rows(),
                found: values.cols(),
            });
        }
        if !values.is_finite() {
            return Err(NngpError::NonFinite("gram matrix"));
        }
        Ok(Self {
            values,
            params,
            depth_trace: Vec::new(),
        })
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn depth_trace(&self) -> &[PairTrace] {
        &self.depth_trace
    }

    pub fn size(&self) -> usize {
        self.values.rows()
    }
}

/// Kernel values between every test point and every training point.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCovariance {
    /// `M x N`; row `m` is the vector `k` for test point `m`.
    pub k: Matrix,
    /// `k^L(x*, x*)` per test point, without observation noise.
    pub psi0: Vec<f64>,
}

/// Inner products of the training inputs divided by the input dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainProducts {
    dots: Matrix,
}

impl TrainProducts {
    pub fn new(inputs: &Matrix) -> Result<Self> {
        check_inputs(inputs)?;
        let n = inputs.rows();
        let d = inputs.cols() as f64;
        let mut dots = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = dot(inputs.row(i), inputs.row(j)) / d;
                dots[(i, j)] = v;
                dots[(j, i)] = v;
            }
        }
        Ok(Self { dots })
    }

    pub fn len(&self) -> usize {
        self.dots.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.dots.rows() == 0
    }
}

/// Inner products between test and training inputs, plus squared norms.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossProducts {
    dots: Matrix,
    test_sq: Vec<f64>,
    train_sq: Vec<f64>,
}

impl CrossProducts {
    pub fn new(train: &Matrix, test: &Matrix) -> Result<Self> {
        check_inputs(train)?;
        check_inputs(test)?;
        if train.cols() != test.cols() {
            return Err(NngpError::DimensionMismatch {
                expected: train.cols(),
                found: test.cols(),
            });
        }
        let d = train.cols() as f64;
        let (m, n) = (test.rows(), train.rows());
        let mut dots = Matrix::zeros(m, n);
        for a in 0..m {
            let row = test.row(a);
            for b in 0..n {
                dots[(a, b)] = dot(row, train.row(b)) / d;
            }
        }
        let sq = |x: &Matrix| (0..x.rows()).map(|i| dot(x.row(i), x.row(i)) / d).collect();
        Ok(Self {
            dots,
            test_sq: sq(test),
            train_sq: sq(train),
        })
    }
}

fn check_inputs(inputs: &Matrix) -> Result<()> {
    if inputs.rows() == 0 {
        return Err(NngpError::EmptyDataset);
    }
    if inputs.cols() == 0 {
        return Err(NngpError::InvalidParams(
            "inputs need at least one column".into(),
        ));
    }
    if !inputs.is_finite() {
        return Err(NngpError::NonFinite("inputs"));
    }
    Ok(())
}

fn noisy_variance(sq: f64, params: &KernelParams) -> f64 {
    let noise = params.noise();
    match noise.mode() {
        NoiseMode::None => sq,
        NoiseMode::Multiplicative => noise.mu2() * sq,
        NoiseMode::Additive => sq + noise.mu2(),
    }
}

fn overflow(layer: usize, params: &KernelParams) -> NngpError {
    NngpError::Overflow {
        layer,
        regime: classify_regime(params).to_string(),
    }
}

/// Diagonal values for layers `0..=depth`, or the first non-finite layer.
fn diag_trajectory(k0: f64, params: &KernelParams, depth: usize) -> (Vec<f64>, Option<usize>) {
    let mut traj = Vec::with_capacity(depth + 1);
    traj.push(k0);
    let mut k = k0;
    for layer in 1..=depth {
        k = step_diag(k, params);
        if !k.is_finite() {
            return (traj, Some(layer));
        }
        traj.push(k);
    }
    (traj, None)
}

/// Square-root trajectories of a set of inputs, truncated at the first
/// overflow of any of them.
struct Trajectories {
    values: Vec<Vec<f64>>,
    sds: Vec<Vec<f64>>,
    overflow_at: Option<usize>,
}

impl Trajectories {
    fn new(sq: &[f64], params: &KernelParams, depth: usize) -> Self {
        let mut overflow_at: Option<usize> = None;
        let mut values = Vec::with_capacity(sq.len());
        for &s in sq {
            let (t, o) = diag_trajectory(noisy_variance(s, params), params, depth);
            if let Some(layer) = o {
                overflow_at = Some(overflow_at.map_or(layer, |c| c.min(layer)));
            }
            values.push(t);
        }
        let sds = values
            .iter()
            .map(|t| t.iter().map(|&v| sqrt(v.max(0.0))).collect())
            .collect();
        Self {
            values,
            sds,
            overflow_at,
        }
    }

    /// Deepest layer for which every trajectory is finite.
    fn last_finite_layer(&self, depth: usize) -> usize {
        self.overflow_at.map_or(depth, |l| l - 1)
    }
}

enum PairFailure {
    Overflow(usize),
    Invalid(NngpError),
}

/// Runs one pair through the off-diagonal recursion, writing the value at
/// each checkpoint. Returns the layer reached.
fn propagate_pair(
    k0: f64,
    sd_x: &[f64],
    sd_y: &[f64],
    params: &KernelParams,
    checkpoints: &[usize],
    out: &mut [f64],
    mut trace: Option<&mut Vec<f64>>,
) -> core::result::Result<(), PairFailure> {
    let half_w = params.sigma_w2() / 2.0;
    let b = params.sigma_b2();
    let mut k = k0;
    let mut next = 0;
    if let Some(t) = trace.as_deref_mut() {
        t.push(k);
    }
    let max = *checkpoints.last().unwrap_or(&0);
    while next < checkpoints.len() && checkpoints[next] == 0 {
        out[next] = k;
        next += 1;
    }
    for layer in 1..=max {
        if layer >= sd_x.len() || layer >= sd_y.len() {
            return Err(PairFailure::Overflow(layer));
        }
        k = offdiag_update(k, sd_x[layer - 1], sd_y[layer - 1], half_w, b)
            .map_err(PairFailure::Invalid)?;
        if !k.is_finite() {
            return Err(PairFailure::Overflow(layer));
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(k);
        }
        while next < checkpoints.len() && checkpoints[next] == layer {
            out[next] = k;
            next += 1;
        }
    }
    Ok(())
}

fn sorted_depths(depths: &[usize]) -> Result<Vec<usize>> {
    if depths.is_empty() {
        return Err(NngpError::InvalidParams("no depths requested".into()));
    }
    let mut d = depths.to_vec();
    d.sort_unstable();
    d.dedup();
    if d[0] == 0 {
        return Err(NngpError::InvalidParams("depth must be at least 1".into()));
    }
    Ok(d)
}

/// Train Gram matrices at several depths from one pass of the recursion.
///
/// `params.depth()` is ignored; one result is returned per entry of
/// `depths`, in the order given. Once an entry overflows, every deeper
/// request reports the overflow.
pub fn build_train_grams(
    products: &TrainProducts,
    params: &KernelParams,
    depths: &[usize],
    trace_pairs: &[(usize, usize)],
) -> Vec<Result<GramMatrix>> {
    let sorted = match sorted_depths(depths) {
        Ok(s) => s,
        Err(e) => return vec![Err(e); depths.len().max(1)],
    };
    let n = products.len();
    for &(i, j) in trace_pairs {
        if i >= n || j >= n {
            let bad = if i >= n { i } else { j };
            return vec![
                Err(NngpError::DimensionMismatch {
                    expected: n,
                    found: bad
                });
                depths.len()
            ];
        }
    }
    let max = *sorted.last().unwrap_or(&0);
    let sq: Vec<f64> = (0..n).map(|i| products.dots[(i, i)]).collect();
    let traj = Trajectories::new(&sq, params, max);
    let mut reached = traj.last_finite_layer(max);

    let mut mats: Vec<Matrix> = sorted.iter().map(|_| Matrix::zeros(n, n)).collect();
    let mut out = vec![0.0; sorted.len()];
    let mut failure: Option<NngpError> = None;
    for i in 0..n {
        for (c, &d) in sorted.iter().enumerate() {
            if d <= reached {
                mats[c][(i, i)] = traj.values[i][d];
            }
        }
        for j in (i + 1)..n {
            let checkpoints: Vec<usize> =
                sorted.iter().copied().filter(|&d| d <= reached).collect();
            if checkpoints.is_empty() {
                break;
            }
            match propagate_pair(
                products.dots[(i, j)],
                &traj.sds[i],
                &traj.sds[j],
                params,
                &checkpoints,
                &mut out,
                None,
            ) {
                Ok(()) => {}
                Err(PairFailure::Overflow(layer)) => {
                    reached = reached.min(layer - 1);
                    continue;
                }
                Err(PairFailure::Invalid(e)) => {
                    failure = Some(e);
                    reached = 0;
                    break;
                }
            }
            for (c, v) in out.iter().take(checkpoints.len()).enumerate() {
                mats[c][(i, j)] = *v;
                mats[c][(j, i)] = *v;
            }
        }
    }

    // overflow found late may have left earlier checkpoints filled; keep
    // only those at or below the final reachable layer
    let mut by_depth: Vec<(usize, Result<GramMatrix>)> = Vec::with_capacity(sorted.len());
    for (c, (&d, m)) in sorted.iter().zip(mats).enumerate() {
        let _ = c;
        let res = if let Some(e) = &failure {
            Err(e.clone())
        } else if d > reached {
            Err(overflow(reached + 1, params))
        } else {
            let p = params.with_depth(d);
            p.map(|p| GramMatrix {
                values: m,
                params: p,
                depth_trace: Vec::new(),
            })
        };
        by_depth.push((d, res));
    }

    if !trace_pairs.is_empty() {
        for (d, res) in by_depth.iter_mut() {
            if let Ok(g) = res {
                g.depth_trace = trace_pairs
                    .iter()
                    .map(|&(i, j)| trace_pair(products, &traj, params, i, j, *d))
                    .collect();
            }
        }
    }

    depths
        .iter()
        .map(|d| {
            by_depth
                .iter()
                .find(|(dd, _)| dd == d)
                .map(|(_, r)| r.clone())
                .unwrap_or(Err(NngpError::InvalidParams(
                    "depth must be at least 1".into(),
                )))
        })
        .collect()
}

fn trace_pair(
    products: &TrainProducts,
    traj: &Trajectories,
    params: &KernelParams,
    i: usize,
    j: usize,
    depth: usize,
) -> PairTrace {
    let diag_i = traj.values[i][..=depth].to_vec();
    let diag_j = traj.values[j][..=depth].to_vec();
    let offdiag = if i == j {
        diag_i.clone()
    } else {
        let mut t = Vec::with_capacity(depth + 1);
        let mut out = [0.0];
        // the pair already succeeded while building the matrix
        let _ = propagate_pair(
            products.dots[(i, j)],
            &traj.sds[i],
            &traj.sds[j],
            params,
            &[depth],
            &mut out,
            Some(&mut t),
        );
        t
    };
    PairTrace {
        i,
        j,
        diag_i,
        diag_j,
        offdiag,
    }
}

/// Train Gram matrix at `params.depth()`, with per-layer traces of the
/// requested index pairs.
pub fn build_train_gram(
    data: &Dataset,
    params: &KernelParams,
    trace_pairs: &[(usize, usize)],
) -> Result<GramMatrix> {
    let products = TrainProducts::new(data.inputs())?;
    build_train_grams(&products, params, &[params.depth()], trace_pairs)
        .pop()
        .unwrap_or(Err(NngpError::EmptyDataset))
}

/// Cross-covariances and test variances at several depths.
pub fn build_cross(
    products: &CrossProducts,
    params: &KernelParams,
    depths: &[usize],
) -> Vec<Result<CrossCovariance>> {
    let sorted = match sorted_depths(depths) {
        Ok(s) => s,
        Err(e) => return vec![Err(e); depths.len().max(1)],
    };
    let max = *sorted.last().unwrap_or(&0);
    let (m, n) = (products.test_sq.len(), products.train_sq.len());
    let train = Trajectories::new(&products.train_sq, params, max);
    let test = Trajectories::new(&products.test_sq, params, max);
    let mut reached = train
        .last_finite_layer(max)
        .min(test.last_finite_layer(max));

    let mut mats: Vec<Matrix> = sorted.iter().map(|_| Matrix::zeros(m, n)).collect();
    let mut out = vec![0.0; sorted.len()];
    let mut failure: Option<NngpError> = None;
    'outer: for a in 0..m {
        for b in 0..n {
            let checkpoints: Vec<usize> =
                sorted.iter().copied().filter(|&d| d <= reached).collect();
            if checkpoints.is_empty() {
                break 'outer;
            }
            match propagate_pair(
                products.dots[(a, b)],
                &test.sds[a],
                &train.sds[b],
                params,
                &checkpoints,
                &mut out,
                None,
            ) {
                Ok(()) => {}
                Err(PairFailure::Overflow(layer)) => {
                    reached = reached.min(layer - 1);
                    continue;
                }
                Err(PairFailure::Invalid(e)) => {
                    failure = Some(e);
                    break 'outer;
                }
            }
            for (c, v) in out.iter().take(checkpoints.len()).enumerate() {
                mats[c][(a, b)] = *v;
            }
        }
    }

    let results: Vec<(usize, Result<CrossCovariance>)> = sorted
        .iter()
        .zip(mats)
        .map(|(&d, k)| {
            let r = if let Some(e) = &failure {
                Err(e.clone())
            } else if d > reached {
                Err(overflow(reached + 1, params))
            } else {
                Ok(CrossCovariance {
                    k,
                    psi0: test.values.iter().map(|t| t[d]).collect(),
                })
            };
            (d, r)
        })
        .collect();
    depths
        .iter()
        .map(|d| {
            results
                .iter()
                .find(|(dd, _)| dd == d)
                .map(|(_, r)| r.clone())
                .unwrap_or(Err(NngpError::InvalidParams(
                    "depth must be at least 1".into(),
                )))
        })
        .collect()
}

/// Cross-covariance block for a test set at `params.depth()`.
pub fn build_cross_matrix(
    data: &Dataset,
    test_inputs: &Matrix,
    params: &KernelParams,
) -> Result<CrossCovariance> {
    let products = CrossProducts::new(data.inputs(), test_inputs)?;
    build_cross(&products, params, &[params.depth()])
        .pop()
        .unwrap_or(Err(NngpError::EmptyDataset))
}

/// Kernel vector between the training inputs and one test input, and the
/// test input's own kernel variance `k^L(x*, x*)`.
pub fn build_cross_vector(
    data: &Dataset,
    x_star: &[f64],
    params: &KernelParams,
) -> Result<(Vec<f64>, f64)> {
    if x_star.len() != data.input_dim() {
        return Err(NngpError::DimensionMismatch {
            expected: data.input_dim(),
            found: x_star.len(),
        });
    }
    let test = Matrix::from_vec(1, x_star.len(), x_star.to_vec())?;
    let cross = build_cross_matrix(data, &test, params)?;
    let psi0 = cross.psi0[0];
    Ok((cross.k.into_vec(), psi0))
}

pub fn frobenius_norm(gram: &GramMatrix) -> f64 {
    gram.values.frobenius_norm()
}

const MAGIC: &[u8; 8] = b"NNGPGRAM";

fn mode_code(mode: NoiseMode) -> f64 {
    match mode {
        NoiseMode::None => 0.0,
        NoiseMode::Additive => 1.0,
        NoiseMode::Multiplicative => 2.0,
    }
}

impl GramMatrix {
    /// Little-endian dump: `"NNGPGRAM"`, `u32` N, five `f64` parameters
    /// (sigma_w2, sigma_b2, noise mode code 0/1/2 for none/add/mult, mu2,
    /// depth), then the upper triangle row by row.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let n = self.size();
        let mut out = Vec::with_capacity(12 + 40 + 8 * n * (n + 1) / 2);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(n as u32).to_le_bytes());
        let p = &self.params;
        for v in [
            p.sigma_w2(),
            p.sigma_b2(),
            mode_code(p.noise().mode()),
            p.noise().mu2(),
            p.depth() as f64,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for i in 0..n {
            for j in i..n {
                out.extend_from_slice(&self.values[(i, j)].to_le_bytes());
            }
        }
        out
    }

    pub fn from_le_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |what: &str| NngpError::InvalidParams(alloc::format!("gram dump: {what}"));
        if bytes.len() < 52 || &bytes[..8] != MAGIC {
            return Err(bad("bad magic or truncated header"));
        }
        let n = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize;
        let f = |off: usize| {
            let mut b = [0u8; 8];
            b.copy_from_slice(&bytes[off..off + 8]);
            f64::from_le_bytes(b)
        };
        let expected = 52 + 8 * n * (n + 1) / 2;
        if bytes.len() != expected {
            return Err(NngpError::DimensionMismatch {
                expected,
                found: bytes.len(),
            });
        }
        let mode = match f(28) as u32 {
            0 => NoiseMode::None,
            1 => NoiseMode::Additive,
            2 => NoiseMode::Multiplicative,
            _ => return Err(bad("unknown noise mode")),
        };
        let noise = crate::kernel::NoiseSpec::new(mode, f(36))?;
        let params = KernelParams::new(f(12), f(20), noise, f(44) as usize)?;
        let mut values = Matrix::zeros(n, n);
        let mut off = 52;
        for i in 0..n {
            for j in i..n {
                let v = f(off);
                values[(i, j)] = v;
                values[(j, i)] = v;
                off += 8;
            }
        }
        Self::from_matrix(values, params)
    }
}
