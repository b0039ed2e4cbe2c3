//! Experiment drivers: grid sweeps over (sigma_w2, mu2, depth), depth
//! traces, uncertainty correlations and the 1-D regression demo.

use std::fmt;
use std::io::Write;

use nngp_core::codec::{accuracy, decode_prediction, encode_labels, mean_predictive_variance};
use nngp_core::gp::{fit_kernel, predict, predict_batch, sample_gaussian};
use nngp_core::gram::{build_cross, build_train_grams, CrossProducts, TrainProducts};
use nngp_core::kernel::{base_kernel, step_diag, step_offdiag};
use nngp_core::{Dataset, KernelParams, KernelState, Matrix, NngpError, NoiseMode, NoiseSpec};
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{linspace, make_sinusoid, Normalizer, Split};
use crate::{Error, Result};

/// Near/far split of cells by `|sigma_w2 - 2/mu2|`.
pub const DEFAULT_NEAR_THRESHOLD: f64 = 0.05;
/// Accuracy band, as a fraction, used to count cells close to the best.
pub const DEFAULT_BAND: f64 = 0.02;

/// Weight variances to sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaW2Grid {
    Values(Vec<f64>),
    /// One cell per mu2 at exactly `2 / mu2`.
    Critical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub sigma_w2: SigmaW2Grid,
    pub mu2_grid: Vec<f64>,
    pub sigma_b2: f64,
    pub noise_mode: NoiseMode,
    pub depths: Vec<usize>,
    pub sigma_eps2: f64,
    pub threads: usize,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let increasing = |v: &[f64]| !v.is_empty() && v.windows(2).all(|w| w[0] < w[1]);
        if let SigmaW2Grid::Values(v) = &self.sigma_w2 {
            if !increasing(v) || v.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
                return Err(Error::Usage(
                    "sigma_w2 grid must be nonempty, positive and strictly increasing".into(),
                ));
            }
        }
        if !increasing(&self.mu2_grid) {
            return Err(Error::Usage(
                "mu2 grid must be nonempty and strictly increasing".into(),
            ));
        }
        for &m in &self.mu2_grid {
            NoiseSpec::new(self.noise_mode, m)?;
        }
        if self.depths.is_empty() || self.depths.contains(&0) {
            return Err(Error::Usage(
                "depths must be a nonempty list of positive integers".into(),
            ));
        }
        if !(self.sigma_b2 >= 0.0) || !(self.sigma_eps2 >= 0.0) {
            return Err(Error::Usage("sigma_b2 and sigma_eps2 must be >= 0".into()));
        }
        if self.noise_mode == NoiseMode::Additive && self.sigma_w2 == SigmaW2Grid::Critical {
            return Err(Error::Usage(
                "additive noise has no critical weight variance".into(),
            ));
        }
        Ok(())
    }

    fn units(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for &mu2 in &self.mu2_grid {
            match &self.sigma_w2 {
                SigmaW2Grid::Values(v) => out.extend(v.iter().map(|&w| (w, mu2))),
                SigmaW2Grid::Critical => out.push((2.0 / mu2, mu2)),
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CellStatus {
    Ok,
    Overflow,
    FactorFail,
}

impl fmt::Display for CellStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellStatus::Ok => "OK",
            CellStatus::Overflow => "Overflow",
            CellStatus::FactorFail => "FactorFail",
        })
    }
}

/// Metrics of one (sigma_w2, mu2, depth) configuration. Metrics are absent
/// unless the status is `Ok`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub depth: usize,
    pub mu2: f64,
    pub sigma_w2: f64,
    pub sigma_b2: f64,
    pub status: CellStatus,
    pub accuracy: Option<f64>,
    pub frobenius_norm: Option<f64>,
    pub mean_pred_variance: Option<f64>,
    pub distance_to_critical: f64,
}

/// Normalised train/test inputs with labels and encoded targets.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Dataset,
    pub train_labels: Vec<usize>,
    pub test_inputs: Matrix,
    pub test_labels: Vec<usize>,
    pub num_classes: usize,
}

impl Prepared {
    /// Normalisation is fitted on the training split only.
    pub fn new(split: &Split, normalizer: &Normalizer) -> Result<Self> {
        let train_norm = normalizer.apply(&split.train)?;
        let test_norm = normalizer.apply(&split.test)?;
        let targets = encode_labels(&split.train.labels, split.num_classes)?;
        Ok(Self {
            train: Dataset::from_parts(train_norm.inputs().clone(), targets.into_encoded())?,
            train_labels: split.train.labels.clone(),
            test_inputs: test_norm.inputs().clone(),
            test_labels: split.test.labels.clone(),
            num_classes: split.num_classes,
        })
    }
}

fn distance_to_critical(w: f64, mode: NoiseMode, mu2: f64) -> f64 {
    match NoiseSpec::new(mode, mu2).and_then(|n| KernelParams::new(w, 0.0, n, 1)) {
        Ok(p) => p.distance_to_critical(),
        Err(_) => f64::NAN,
    }
}

fn failed(base: &SweepCell, e: &NngpError) -> SweepCell {
    let status = match e {
        NngpError::Overflow { .. } => CellStatus::Overflow,
        _ => CellStatus::FactorFail,
    };
    SweepCell {
        status,
        ..base.clone()
    }
}

fn evaluate(
    prepared: &Prepared,
    gram: &Matrix,
    cross: &nngp_core::CrossCovariance,
    sigma_eps2: f64,
) -> core::result::Result<(f64, f64, f64), NngpError> {
    let post = fit_kernel(gram, prepared.train.targets(), sigma_eps2)?;
    let preds = predict_batch(&post, &cross.k, &cross.psi0)?;
    let predicted: Vec<usize> = preds.iter().map(|p| decode_prediction(&p.mean)).collect();
    Ok((
        accuracy(&predicted, &prepared.test_labels)?,
        gram.frobenius_norm(),
        mean_predictive_variance(&preds)?,
    ))
}

fn run_unit(
    prepared: &Prepared,
    train_products: &TrainProducts,
    cross_products: &CrossProducts,
    cfg: &SweepConfig,
    (w, mu2): (f64, f64),
) -> Vec<SweepCell> {
    let base = |depth| SweepCell {
        depth,
        mu2,
        sigma_w2: w,
        sigma_b2: cfg.sigma_b2,
        status: CellStatus::Ok,
        accuracy: None,
        frobenius_norm: None,
        mean_pred_variance: None,
        distance_to_critical: distance_to_critical(w, cfg.noise_mode, mu2),
    };
    let params = match NoiseSpec::new(cfg.noise_mode, mu2)
        .and_then(|n| KernelParams::new(w, cfg.sigma_b2, n, 1))
    {
        Ok(p) => p,
        Err(e) => return cfg.depths.iter().map(|&d| failed(&base(d), &e)).collect(),
    };
    let grams = build_train_grams(train_products, &params, &cfg.depths, &[]);
    let crosses = build_cross(cross_products, &params, &cfg.depths);
    cfg.depths
        .iter()
        .zip(grams.into_iter().zip(crosses))
        .map(|(&d, pair)| {
            let cell = base(d);
            let result = match pair {
                (Ok(g), Ok(c)) => evaluate(prepared, g.values(), &c, cfg.sigma_eps2),
                (Err(e), _) | (_, Err(e)) => Err(e),
            };
            match result {
                Ok((acc, frob, var)) => SweepCell {
                    accuracy: Some(acc),
                    frobenius_norm: Some(frob),
                    mean_pred_variance: Some(var),
                    ..cell
                },
                Err(e) => failed(&cell, &e),
            }
        })
        .collect()
}

/// Sorts cells by (depth, mu2, sigma_w2).
pub fn sort_cells(cells: &mut [SweepCell]) {
    cells.sort_by(|a, b| {
        a.depth
            .cmp(&b.depth)
            .then(a.mu2.total_cmp(&b.mu2))
            .then(a.sigma_w2.total_cmp(&b.sigma_w2))
    });
}

/// Every cell of the sweep. Work units (one per weight variance and noise
/// level, covering all depths) run on a pool of at most `cfg.threads`
/// workers; the output order does not depend on scheduling.
pub fn run_sweep(prepared: &Prepared, cfg: &SweepConfig) -> Result<Vec<SweepCell>> {
    cfg.validate()?;
    let train_products = TrainProducts::new(prepared.train.inputs())?;
    let cross_products = CrossProducts::new(prepared.train.inputs(), &prepared.test_inputs)?;
    let units = cfg.units();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.max(1))
        .build()
        .map_err(|e| Error::Format(format!("thread pool: {e}")))?;
    let nested: Vec<Vec<SweepCell>> = pool.install(|| {
        units
            .par_iter()
            .map(|&u| run_unit(prepared, &train_products, &cross_products, cfg, u))
            .collect()
    });
    let mut cells: Vec<SweepCell> = nested.into_iter().flatten().collect();
    sort_cells(&mut cells);
    Ok(cells)
}

pub const SWEEP_COLUMNS: [&str; 9] = [
    "depth",
    "mu2",
    "sigma_w2",
    "sigma_b2",
    "status",
    "accuracy",
    "frob_norm",
    "mean_var",
    "dist_crit",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `# key: value` metadata lines, the header and one row per cell.
pub fn write_sweep_csv<W: Write>(
    out: W,
    meta: &[(String, String)],
    cells: &[SweepCell],
) -> Result<()> {
    let mut out = out;
    write_meta(&mut out, meta)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_COLUMNS)?;
    for c in cells {
        w.write_record([
            c.depth.to_string(),
            c.mu2.to_string(),
            c.sigma_w2.to_string(),
            c.sigma_b2.to_string(),
            c.status.to_string(),
            opt(c.accuracy),
            opt(c.frobenius_norm),
            opt(c.mean_pred_variance),
            c.distance_to_critical.to_string(),
        ])?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

pub(crate) fn io_err(source: std::io::Error) -> Error {
    Error::Io {
        path: "<output>".into(),
        source,
    }
}

pub fn write_meta<W: Write>(out: &mut W, meta: &[(String, String)]) -> Result<()> {
    for (k, v) in meta {
        writeln!(out, "# {k}: {v}").map_err(io_err)?;
    }
    Ok(())
}

/// Reads a CSV written by [`write_sweep_csv`].
pub fn read_sweep_csv(text: &str) -> Result<Vec<SweepCell>> {
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let num = |s: &str| -> Result<f64> {
        s.parse()
            .map_err(|_| Error::Format(format!("bad number {s:?}")))
    };
    let optnum = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            num(s).map(Some)
        }
    };
    let mut cells = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != SWEEP_COLUMNS.len() {
            return Err(Error::Format(
                "sweep csv row has the wrong number of fields".into(),
            ));
        }
        cells.push(SweepCell {
            depth: rec[0]
                .parse()
                .map_err(|_| Error::Format("bad depth".into()))?,
            mu2: num(&rec[1])?,
            sigma_w2: num(&rec[2])?,
            sigma_b2: num(&rec[3])?,
            status: match &rec[4] {
                "OK" => CellStatus::Ok,
                "Overflow" => CellStatus::Overflow,
                "FactorFail" => CellStatus::FactorFail,
                s => return Err(Error::Format(format!("bad status {s:?}"))),
            },
            accuracy: optnum(&rec[5])?,
            frobenius_norm: optnum(&rec[6])?,
            mean_pred_variance: optnum(&rec[7])?,
            distance_to_critical: num(&rec[8])?,
        });
    }
    Ok(cells)
}

/// The most accurate OK cell at `depth`; ties go to the first in canonical
/// order.
pub fn best_cell(cells: &[SweepCell], depth: usize) -> Option<&SweepCell> {
    let mut best: Option<&SweepCell> = None;
    for c in cells
        .iter()
        .filter(|c| c.depth == depth && c.status == CellStatus::Ok)
    {
        if best.is_none_or(|b| c.accuracy > b.accuracy) {
            best = Some(c);
        }
    }
    best
}

/// Number of OK cells at `depth` within `band` of the best accuracy.
pub fn band_size(cells: &[SweepCell], depth: usize, band: f64) -> usize {
    let Some(best) = best_cell(cells, depth).and_then(|b| b.accuracy) else {
        return 0;
    };
    cells
        .iter()
        .filter(|c| c.depth == depth && c.accuracy.is_some_and(|a| a >= best - band - 1e-12))
        .count()
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(NngpError::DimensionMismatch {
            expected: xs.len(),
            found: ys.len(),
        }
        .into());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(NngpError::UndefinedCorrelation.into());
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Pearson correlation of mean predictive variance with accuracy among OK
/// cells near criticality (`dist_crit <= near_threshold`) and far from it.
pub fn uncertainty_correlation(cells: &[SweepCell], near_threshold: f64) -> Result<(f64, f64)> {
    let part = |near: bool| -> Result<f64> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = cells
            .iter()
            .filter(|c| c.status == CellStatus::Ok)
            .filter(|c| (c.distance_to_critical <= near_threshold) == near)
            .filter_map(|c| Some((c.mean_pred_variance?, c.accuracy?)))
            .unzip();
        if xs.len() < 3 {
            return Err(NngpError::InsufficientCells {
                needed: 3,
                found: xs.len(),
            }
            .into());
        }
        pearson(&xs, &ys)
    };
    Ok((part(true)?, part(false)?))
}

/// Mean accuracy of the top tenth of OK cells by Frobenius norm minus that
/// of the bottom tenth.
pub fn norm_accuracy_gap(cells: &[SweepCell]) -> Result<f64> {
    let mut ok: Vec<(f64, f64)> = cells
        .iter()
        .filter_map(|c| Some((c.frobenius_norm?, c.accuracy?)))
        .collect();
    if ok.len() < 2 {
        return Err(NngpError::InsufficientCells {
            needed: 2,
            found: ok.len(),
        }
        .into());
    }
    ok.sort_by(|a, b| a.0.total_cmp(&b.0));
    let k = (ok.len() / 10).max(1);
    let mean = |s: &[(f64, f64)]| s.iter().map(|p| p.1).sum::<f64>() / s.len() as f64;
    Ok(mean(&ok[ok.len() - k..]) - mean(&ok[..k]))
}

/// Per-layer kernel values of one input pair under one parameter setting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepthTrace {
    pub sigma_w2: f64,
    pub sigma_b2: f64,
    pub mu2: f64,
    pub noise: String,
    pub diag_x: Vec<f64>,
    pub diag_y: Vec<f64>,
    pub offdiag: Vec<f64>,
    /// First layer whose value was not finite; the series stop before it.
    pub overflow_layer: Option<usize>,
}

/// Layers `0..=params.depth()` of the recursion for the pair `(x, y)`.
pub fn depth_trace(x: &[f64], y: &[f64], params_list: &[KernelParams]) -> Result<Vec<DepthTrace>> {
    params_list
        .iter()
        .map(|p| {
            let kxx = base_kernel(x, x, p.noise())?;
            let kyy = base_kernel(y, y, p.noise())?;
            let kxy = base_kernel(x, y, p.noise())?;
            let mut s = KernelState::new(kxx, kyy, kxy, 0)?;
            let mut t = DepthTrace {
                sigma_w2: p.sigma_w2(),
                sigma_b2: p.sigma_b2(),
                mu2: p.noise().mu2(),
                noise: p.noise().mode().to_string(),
                diag_x: vec![kxx],
                diag_y: vec![kyy],
                offdiag: vec![kxy],
                overflow_layer: None,
            };
            for layer in 1..=p.depth() {
                let (a, b) = (step_diag(s.k_xx, p), step_diag(s.k_yy, p));
                let c = if x == y { a } else { step_offdiag(&s, p)? };
                if !(a.is_finite() && b.is_finite() && c.is_finite()) {
                    t.overflow_layer = Some(layer);
                    break;
                }
                s = KernelState::new(a, b, c, layer)?;
                t.diag_x.push(a);
                t.diag_y.push(b);
                t.offdiag.push(c);
            }
            Ok(t)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoConfig {
    pub mu2_list: Vec<f64>,
    pub sigma_b2: f64,
    pub depth: usize,
    pub n_train: usize,
    pub x_range: (f64, f64),
    pub noise_sd: f64,
    pub sigma_eps2: f64,
    pub lattice: Vec<f64>,
    pub n_prior_samples: usize,
    pub seed: u64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            mu2_list: vec![1.0, 1.001, 2.0],
            sigma_b2: 0.05,
            depth: 20,
            n_train: 4,
            x_range: (0.0, 1.0),
            noise_sd: 0.1,
            sigma_eps2: 0.01,
            lattice: linspace(-1.0, 2.0, 61),
            n_prior_samples: 5,
            seed: 0,
        }
    }
}

/// Everything plotted for one noise level of the 1-D demo.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoBundle {
    pub mu2: f64,
    pub sigma_w2: f64,
    pub sigma_b2: f64,
    pub depth: usize,
    pub sigma_eps2: f64,
    pub lattice: Vec<f64>,
    pub train_x: Vec<f64>,
    pub train_y: Vec<f64>,
    pub prior_samples: Vec<Vec<f64>>,
    /// Prior covariance over the lattice.
    pub gram: Vec<Vec<f64>>,
    /// Mean off-diagonal entry of `gram` over its mean diagonal entry.
    pub offdiag_ratio: f64,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// Prior predictive variance `k(x*, x*) + sigma_eps2`.
    pub psi: Vec<f64>,
}

fn first<T>(r: Vec<core::result::Result<T, NngpError>>) -> core::result::Result<T, NngpError> {
    r.into_iter().next().expect("one depth requested")
}

fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn offdiag_ratio(m: &Matrix) -> f64 {
    let n = m.rows();
    if n < 2 {
        return 0.0;
    }
    let diag: f64 = m.diagonal().iter().sum::<f64>() / n as f64;
    let total: f64 = m.as_slice().iter().sum();
    let off = (total - diag * n as f64) / (n * (n - 1)) as f64;
    off / diag
}

/// Prior samples, lattice covariance and posterior fit for each noise level,
/// at critical weight variance `2 / mu2` with multiplicative noise.
pub fn run_1d_demo(cfg: &DemoConfig) -> Result<Vec<DemoBundle>> {
    if cfg.lattice.is_empty() {
        return Err(Error::Usage("demo lattice is empty".into()));
    }
    if cfg.mu2_list.is_empty() {
        return Err(Error::Usage("demo needs at least one mu2".into()));
    }
    let train = make_sinusoid(cfg.n_train, cfg.x_range, cfg.noise_sd, cfg.seed)?;
    let lattice = Dataset::from_parts(
        Matrix::column(&cfg.lattice),
        Matrix::zeros(cfg.lattice.len(), 1),
    )?;
    let lattice_products = TrainProducts::new(lattice.inputs())?;
    let cross_products = CrossProducts::new(train.inputs(), lattice.inputs())?;
    let train_products = TrainProducts::new(train.inputs())?;
    cfg.mu2_list
        .iter()
        .enumerate()
        .map(|(i, &mu2)| {
            let noise = NoiseSpec::multiplicative(mu2)?;
            let params = KernelParams::new(2.0 / mu2, cfg.sigma_b2, noise, cfg.depth)?;
            let lattice_gram = first(build_train_grams(
                &lattice_products,
                &params,
                &[cfg.depth],
                &[],
            ))?;
            let train_gram = first(build_train_grams(
                &train_products,
                &params,
                &[cfg.depth],
                &[],
            ))?;
            let cross = first(build_cross(&cross_products, &params, &[cfg.depth]))?;
            let samples = sample_gaussian(
                lattice_gram.values(),
                cfg.n_prior_samples,
                cfg.seed.wrapping_add(1 + i as u64),
            )?;
            let post = fit_kernel(train_gram.values(), train.targets(), cfg.sigma_eps2)?;
            let mut mean = Vec::with_capacity(cfg.lattice.len());
            let mut variance = Vec::with_capacity(cfg.lattice.len());
            for m in 0..cfg.lattice.len() {
                let p = predict(&post, cross.k.row(m), cross.psi0[m])?;
                mean.push(p.mean[0]);
                variance.push(p.variance);
            }
            Ok(DemoBundle {
                mu2,
                sigma_w2: params.sigma_w2(),
                sigma_b2: cfg.sigma_b2,
                depth: cfg.depth,
                sigma_eps2: cfg.sigma_eps2,
                lattice: cfg.lattice.clone(),
                train_x: train.inputs().col(0),
                train_y: train.targets().col(0),
                prior_samples: matrix_rows(&samples),
                gram: matrix_rows(lattice_gram.values()),
                offdiag_ratio: offdiag_ratio(lattice_gram.values()),
                mean,
                variance,
                psi: cross.psi0.iter().map(|p| p + cfg.sigma_eps2).collect(),
            })
        })
        .collect()
}
