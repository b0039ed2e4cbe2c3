//! Command line: `sweep`, `trace`, `demo1d`, `classify`, `limits`, `verify`.
//!
//! Exit codes: 0 success, 1 fatal error or bad usage, 2 partial failure
//! (sweep cells that did not finish, or failed oracle checks).

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nngp_core::codec::{accuracy, decode_prediction};
use nngp_core::gp::{fit, predict_batch};
use nngp_core::gram::{build_cross, build_train_grams, CrossProducts, TrainProducts};
use nngp_core::{classify_regime, KernelParams, NoiseMode, NoiseSpec, Regime};
use serde::Serialize;

use crate::config::expand_config_args;
use crate::data::{load_split, DatasetKind, Normalization, Normalizer, Subset};
use crate::experiments::{
    depth_trace, run_1d_demo, run_sweep, write_meta, write_sweep_csv, CellStatus, DemoConfig,
    Prepared, SigmaW2Grid, SweepConfig,
};
use crate::gramfile::write_gram;
use crate::plot::{heatmap_svg, lines_svg, Metric, Series};
use crate::verify::{check_layers, check_networks, network_settings, random_layer_configs};
use crate::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(
    name = "nngp",
    version,
    about = "Noisy neural network Gaussian process experiments"
)]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classification accuracy, Gram norm and predictive variance over a
    /// (sigma_w2, mu2, depth) grid
    Sweep(SweepArgs),
    /// Per-layer kernel values for a pair of training inputs
    Trace(TraceArgs),
    /// 1-D regression demo: prior samples, Gram and posterior on a lattice
    Demo1d(DemoArgs),
    /// One kernel configuration on a dataset, with per-example predictions
    Classify(ClassifyArgs),
    /// Depth limit of the diagonal recursion
    Limits(LimitsArgs),
    /// Monte-Carlo checks of the analytic kernel
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum NoiseArg {
    None,
    Mult,
    Add,
}

impl From<NoiseArg> for NoiseMode {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::None => NoiseMode::None,
            NoiseArg::Mult => NoiseMode::Multiplicative,
            NoiseArg::Add => NoiseMode::Additive,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    #[arg(long, default_value = "mnist")]
    pub dataset: DatasetKind,
    /// Defaults to $NNGP_DATA_DIR, then `data/mnist`
    #[arg(long, env = "NNGP_DATA_DIR", default_value = "data/mnist")]
    pub data_dir: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub n_train: usize,
    #[arg(long, default_value_t = 1000)]
    pub n_test: usize,
    /// none, unit-norm or center-scale
    #[arg(long, default_value = "unit-norm")]
    pub normalize: Normalization,
    /// Training examples: first N, or the earliest N/C of each class
    #[arg(long, default_value = "balanced")]
    pub subset: Subset,
}

impl DataArgs {
    fn prepare(&self) -> Result<Prepared> {
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::Usage(
                "--n-train and --n-test must be at least 1".into(),
            ));
        }
        let split = load_split(
            self.dataset,
            &self.data_dir,
            self.n_train,
            self.n_test,
            self.subset,
        )?;
        let norm = Normalizer::fit(&split.train, self.normalize)?;
        Prepared::new(&split, &norm)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma list of depths
    #[arg(long, default_value = "20")]
    pub depths: String,
    /// `a:b:step` (inclusive), a comma list, or `critical` for 2/mu2
    #[arg(long, default_value = "1.0:2.0:0.1")]
    pub sw2_grid: String,
    #[arg(long, default_value = "1.0:2.0:0.25")]
    pub mu2_grid: String,
    #[arg(long, default_value_t = 0.0)]
    pub sb2: f64,
    #[arg(long, value_enum, default_value = "mult")]
    pub noise: NoiseArg,
    #[arg(long, default_value_t = 1e-6)]
    pub sigma_eps2: f64,
    #[arg(long, default_value = "results.csv")]
    pub out: PathBuf,
    /// Accuracy heatmap per depth; `{depth}` in the name is replaced
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Worker threads, default all cores
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Indices of the two training inputs
    #[arg(long, default_value = "0,1")]
    pub pair: String,
    /// Weight variances, or `critical`
    #[arg(long, default_value = "critical")]
    pub sw2: String,
    #[arg(long, default_value = "1.0,1.25,1.5,2.0")]
    pub mu2: String,
    #[arg(long, default_value_t = 0.0)]
    pub sb2: f64,
    #[arg(long, value_enum, default_value = "mult")]
    pub noise: NoiseArg,
    #[arg(long, default_value_t = 50)]
    pub depth: usize,
    #[arg(long, default_value = "trace.csv")]
    pub out: PathBuf,
    /// Line plot of the diagonal of the first input
    #[arg(long)]
    pub plot_diag: Option<PathBuf>,
    /// Line plot of the off-diagonal
    #[arg(long)]
    pub plot_offdiag: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct DemoArgs {
    #[arg(long, default_value = "1.0,1.001,2.0")]
    pub mu2: String,
    #[arg(long, default_value_t = 0.05)]
    pub sb2: f64,
    #[arg(long, default_value_t = 20)]
    pub depth: usize,
    #[arg(long, default_value_t = 4)]
    pub n_train: usize,
    #[arg(long, default_value_t = 0.1)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = 0.01)]
    pub sigma_eps2: f64,
    #[arg(long, default_value = "-1.0:2.0:0.05")]
    pub lattice: String,
    #[arg(long, default_value_t = 5)]
    pub samples: usize,
    #[arg(long, default_value = "demo.json")]
    pub out: PathBuf,
    /// Posterior mean plot, one line per mu2
    #[arg(long)]
    pub plot: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Weight variance, or `critical`
    #[arg(long, default_value = "critical")]
    pub sw2: String,
    #[arg(long, default_value_t = 1.0)]
    pub mu2: f64,
    #[arg(long, default_value_t = 0.0)]
    pub sb2: f64,
    #[arg(long, value_enum, default_value = "mult")]
    pub noise: NoiseArg,
    #[arg(long, default_value_t = 20)]
    pub depth: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub sigma_eps2: f64,
    #[arg(long, default_value = "predictions.csv")]
    pub out: PathBuf,
    /// Binary dump of the training Gram matrix
    #[arg(long)]
    pub gram_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct LimitsArgs {
    /// Weight variance, or `critical`
    #[arg(long, default_value = "critical")]
    pub sw2: String,
    #[arg(long, default_value_t = 1.0)]
    pub mu2: f64,
    #[arg(long, default_value_t = 0.0)]
    pub sb2: f64,
    #[arg(long, value_enum, default_value = "mult")]
    pub noise: NoiseArg,
    /// Print the critical curve sigma_w2 = 2/mu2 as CSV instead
    #[arg(long)]
    pub boundary: bool,
    #[arg(long, default_value = "1.0:2.0:0.01")]
    pub mu2_grid: String,
    /// Output file for --boundary, default stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Random single-layer configurations
    #[arg(long, default_value_t = 50)]
    pub configs: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    /// Standard errors allowed for layer checks
    #[arg(long, default_value_t = 3.0)]
    pub k_se: f64,
    #[arg(long, default_value_t = 4096)]
    pub width: usize,
    #[arg(long, default_value_t = 1000)]
    pub networks: usize,
    /// Relative tolerance for the finite-network checks
    #[arg(long, default_value_t = 0.05)]
    pub rel_tol: f64,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value = "verify.json")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// `a:b:step` (inclusive, values rounded to 12 decimals) or `a,b,c`.
/// Results must be strictly increasing.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let num = |t: &str| -> Result<f64> {
        let v: f64 = t
            .trim()
            .parse()
            .map_err(|_| Error::Usage(format!("bad number {t:?} in grid {s:?}")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Usage(format!("non-finite value in grid {s:?}")))
        }
    };
    let values = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Usage(format!("grid {s:?} is not a:b:step")));
        }
        let (a, b, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || b < a {
            return Err(Error::Usage(format!(
                "grid {s:?} needs step > 0 and b >= a"
            )));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize + 1;
        (0..n)
            .map(|i| ((a + i as f64 * step) * 1e12).round() / 1e12)
            .collect()
    } else {
        s.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    if values.is_empty() || values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Usage(format!(
            "grid {s:?} must be nonempty and strictly increasing"
        )));
    }
    Ok(values)
}

fn parse_depths(s: &str) -> Result<Vec<usize>> {
    let d = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Usage(format!("bad depth {t:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if d.is_empty() || d.contains(&0) || d.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Usage(
            "depths must be positive and strictly increasing".into(),
        ));
    }
    Ok(d)
}

fn parse_sw2_grid(s: &str) -> Result<SigmaW2Grid> {
    if s.trim() == "critical" {
        Ok(SigmaW2Grid::Critical)
    } else {
        parse_grid(s).map(SigmaW2Grid::Values)
    }
}

fn resolve_sw2(s: &str, noise: NoiseSpec) -> Result<f64> {
    if s.trim() == "critical" {
        Ok(nngp_core::kernel::critical_params(noise)?.0)
    } else {
        s.trim()
            .parse()
            .map_err(|_| Error::Usage(format!("bad sigma_w2 {s:?}")))
    }
}

fn noise_spec(noise: NoiseArg, mu2: f64) -> Result<NoiseSpec> {
    Ok(match noise {
        NoiseArg::None => NoiseSpec::none(),
        other => NoiseSpec::new(other.into(), mu2)?,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn io(source: io::Error) -> Error {
    crate::experiments::io_err(source)
}

/// Metadata header: tool version, the subcommand and its arguments.
fn metadata(args: &[String]) -> Vec<(String, String)> {
    vec![
        ("nngp".into(), VERSION.into()),
        (
            "command".into(),
            args.iter().skip(1).cloned().collect::<Vec<_>>().join(" "),
        ),
    ]
}

#[derive(Serialize)]
struct Meta {
    nngp: String,
    command: String,
}

fn json_meta(meta: &[(String, String)]) -> Meta {
    Meta {
        nngp: meta[0].1.clone(),
        command: meta[1].1.clone(),
    }
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        b = b.num_threads(t.max(1));
    }
    b.build()
        .map_err(|e| Error::Format(format!("thread pool: {e}")))
}

fn default_threads() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

fn cmd_sweep(a: &SweepArgs, meta: &[(String, String)]) -> Result<i32> {
    let cfg = SweepConfig {
        sigma_w2: parse_sw2_grid(&a.sw2_grid)?,
        mu2_grid: parse_grid(&a.mu2_grid)?,
        sigma_b2: a.sb2,
        noise_mode: a.noise.into(),
        depths: parse_depths(&a.depths)?,
        sigma_eps2: a.sigma_eps2,
        threads: a.threads.unwrap_or_else(default_threads),
    };
    cfg.validate()?;
    let prepared = a.data.prepare()?;
    let cells = run_sweep(&prepared, &cfg)?;
    write_sweep_csv(create(&a.out)?, meta, &cells)?;
    if let Some(plot) = &a.plot {
        for &d in &cfg.depths {
            let name = plot.to_string_lossy().replace("{depth}", &d.to_string());
            let path = if cfg.depths.len() > 1 && name == plot.to_string_lossy() {
                with_suffix(plot, &format!("_L{d}"))
            } else {
                PathBuf::from(name)
            };
            write_file(&path, &heatmap_svg(&cells, d, Metric::Accuracy, meta))?;
        }
    }
    let failed = cells.iter().filter(|c| c.status != CellStatus::Ok).count();
    if failed > 0 {
        eprintln!(
            "{failed} of {} cells did not finish; see the status column",
            cells.len()
        );
        return Ok(2);
    }
    Ok(0)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(e) => format!("{stem}{suffix}.{}", e.to_string_lossy()),
        None => format!("{stem}{suffix}"),
    };
    path.with_file_name(name)
}

fn cmd_trace(a: &TraceArgs, meta: &[(String, String)]) -> Result<i32> {
    let pair = a
        .pair
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Usage(format!("bad index {t:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if pair.len() != 2 {
        return Err(Error::Usage("--pair takes two indices".into()));
    }
    let mu2s = parse_grid(&a.mu2)?;
    let mut params = Vec::new();
    for &m in &mu2s {
        let noise = noise_spec(a.noise, m)?;
        let ws = if a.sw2.trim() == "critical" {
            vec![resolve_sw2("critical", noise)?]
        } else {
            parse_grid(&a.sw2)?
        };
        for w in ws {
            params.push(KernelParams::new(w, a.sb2, noise, a.depth)?);
        }
    }
    let n_needed = pair[0].max(pair[1]) + 1;
    let data = DataArgs {
        n_train: a.data.n_train.max(n_needed),
        subset: Subset::First,
        ..a.data.clone()
    };
    let prepared = data.prepare()?;
    let x = prepared.train.inputs().row(pair[0]);
    let y = prepared.train.inputs().row(pair[1]);
    let traces = depth_trace(x, y, &params)?;

    let mut out = create(&a.out)?;
    write_meta(&mut out, meta)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "series", "noise", "mu2", "sigma_w2", "sigma_b2", "layer", "k_xx", "k_yy", "k_xy",
    ])?;
    for (i, t) in traces.iter().enumerate() {
        for l in 0..t.offdiag.len() {
            w.write_record([
                i.to_string(),
                t.noise.clone(),
                t.mu2.to_string(),
                t.sigma_w2.to_string(),
                t.sigma_b2.to_string(),
                l.to_string(),
                t.diag_x[l].to_string(),
                t.diag_y[l].to_string(),
                t.offdiag[l].to_string(),
            ])?;
        }
    }
    w.flush().map_err(io)?;

    let layers: Vec<Vec<f64>> = traces
        .iter()
        .map(|t| (0..t.offdiag.len()).map(|l| l as f64).collect())
        .collect();
    let name = |t: &crate::experiments::DepthTrace| format!("mu2={} sw2={:.4}", t.mu2, t.sigma_w2);
    if let Some(p) = &a.plot_diag {
        let s: Vec<Series> = traces
            .iter()
            .zip(&layers)
            .map(|(t, l)| Series {
                name: name(t),
                x: l,
                y: &t.diag_x,
            })
            .collect();
        write_file(p, &lines_svg(&s, true, meta))?;
    }
    if let Some(p) = &a.plot_offdiag {
        let s: Vec<Series> = traces
            .iter()
            .zip(&layers)
            .map(|(t, l)| Series {
                name: name(t),
                x: l,
                y: &t.offdiag,
            })
            .collect();
        write_file(p, &lines_svg(&s, false, meta))?;
    }
    Ok(0)
}

#[derive(Serialize)]
struct DemoFile<'a> {
    meta: Meta,
    bundles: &'a [crate::experiments::DemoBundle],
}

fn cmd_demo(a: &DemoArgs, meta: &[(String, String)]) -> Result<i32> {
    let cfg = DemoConfig {
        mu2_list: parse_grid(&a.mu2)?,
        sigma_b2: a.sb2,
        depth: a.depth,
        n_train: a.n_train,
        noise_sd: a.noise_sd,
        sigma_eps2: a.sigma_eps2,
        lattice: parse_grid(&a.lattice)?,
        n_prior_samples: a.samples,
        seed: a.seed,
        ..DemoConfig::default()
    };
    let bundles = run_1d_demo(&cfg)?;
    let mut out = create(&a.out)?;
    serde_json::to_writer_pretty(
        &mut out,
        &DemoFile {
            meta: json_meta(meta),
            bundles: &bundles,
        },
    )?;
    writeln!(out).map_err(io)?;
    out.flush().map_err(io)?;
    if let Some(p) = &a.plot {
        let s: Vec<Series> = bundles
            .iter()
            .map(|b| Series {
                name: format!("mu2={}", b.mu2),
                x: &b.lattice,
                y: &b.mean,
            })
            .collect();
        write_file(p, &lines_svg(&s, false, meta))?;
    }
    Ok(0)
}

fn cmd_classify(a: &ClassifyArgs, meta: &[(String, String)]) -> Result<i32> {
    let noise = noise_spec(a.noise, a.mu2)?;
    let params = KernelParams::new(resolve_sw2(&a.sw2, noise)?, a.sb2, noise, a.depth)?;
    let prepared = a.data.prepare()?;
    let trace_pairs: &[(usize, usize)] = &[];
    let gram = build_train_grams(
        &TrainProducts::new(prepared.train.inputs())?,
        &params,
        &[a.depth],
        trace_pairs,
    )
    .remove(0)?;
    let cross = build_cross(
        &CrossProducts::new(prepared.train.inputs(), &prepared.test_inputs)?,
        &params,
        &[a.depth],
    )
    .remove(0)?;
    if let Some(p) = &a.gram_out {
        write_gram(p, &gram)?;
    }
    let post = fit(&gram, prepared.train.targets(), a.sigma_eps2)?;
    let preds = predict_batch(&post, &cross.k, &cross.psi0)?;
    let predicted: Vec<usize> = preds.iter().map(|p| decode_prediction(&p.mean)).collect();
    let acc = accuracy(&predicted, &prepared.test_labels)?;

    let mut out = create(&a.out)?;
    let mut meta = meta.to_vec();
    meta.push(("regime".into(), classify_regime(&params).to_string()));
    meta.push(("accuracy".into(), acc.to_string()));
    meta.push(("jitter".into(), post.jitter_used().to_string()));
    write_meta(&mut out, &meta)?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "index".to_string(),
        "label".into(),
        "predicted".into(),
        "variance".into(),
    ];
    header.extend((0..prepared.num_classes).map(|c| format!("mean_{c}")));
    w.write_record(&header)?;
    for (i, p) in preds.iter().enumerate() {
        let mut row = vec![
            i.to_string(),
            prepared.test_labels[i].to_string(),
            predicted[i].to_string(),
            p.variance.to_string(),
        ];
        row.extend(p.mean.iter().map(|m| m.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(io)?;
    println!("accuracy {acc}");
    Ok(0)
}

fn cmd_limits(a: &LimitsArgs, meta: &[(String, String)]) -> Result<i32> {
    if a.boundary {
        let grid = parse_grid(&a.mu2_grid)?;
        let mut text = Vec::new();
        write_meta(&mut text, meta)?;
        let mut w = csv::Writer::from_writer(text);
        w.write_record(["mu2", "sigma_w2"])?;
        for m in grid {
            let noise = NoiseSpec::multiplicative(m)?;
            w.write_record([
                m.to_string(),
                nngp_core::kernel::critical_params(noise)?.0.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        match &a.out {
            Some(p) => fs::write(p, bytes).map_err(|source| Error::Io {
                path: p.clone(),
                source,
            })?,
            None => io::stdout().write_all(&bytes).map_err(io)?,
        }
        return Ok(0);
    }
    let noise = noise_spec(a.noise, a.mu2)?;
    let params = KernelParams::new(resolve_sw2(&a.sw2, noise)?, a.sb2, noise, 1)?;
    let label = classify_regime(&params);
    println!("{} {}", label.case, regime_name(label.regime));
    if let Regime::ConstantLimit(v) = label.regime {
        println!("limit {v}");
    }
    Ok(0)
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::Vanishing => "Vanishing",
        Regime::ConstantLimit(_) => "ConstantLimit",
        Regime::Divergent => "Divergent",
        Regime::FixedPreserving => "FixedPreserving",
    }
}

#[derive(Serialize)]
struct VerifyFile {
    meta: Meta,
    layers: Vec<crate::verify::LayerCheck>,
    networks: Vec<crate::verify::NetworkCheck>,
}

fn cmd_verify(a: &VerifyArgs, meta: &[(String, String)]) -> Result<i32> {
    let pool = thread_pool(a.threads)?;
    let (layers, networks) = pool.install(|| -> Result<_> {
        let configs = random_layer_configs(a.configs, a.seed);
        let layers = check_layers(&configs, a.samples, a.k_se, a.seed.wrapping_add(1))?;
        let networks = check_networks(
            &network_settings(),
            a.width,
            a.networks,
            a.rel_tol,
            a.seed.wrapping_add(2),
        )?;
        Ok((layers, networks))
    })?;
    let failed_layers = layers.iter().filter(|c| !c.pass).count();
    let failed_networks = networks.iter().filter(|c| !c.pass).count();
    let mut out = create(&a.out)?;
    serde_json::to_writer_pretty(
        &mut out,
        &VerifyFile {
            meta: json_meta(meta),
            layers,
            networks,
        },
    )?;
    writeln!(out).map_err(io)?;
    out.flush().map_err(io)?;
    println!("layer checks failed: {failed_layers}");
    println!("network checks failed: {failed_networks}");
    Ok(if failed_layers + failed_networks > 0 {
        2
    } else {
        0
    })
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run(args: Vec<String>) -> i32 {
    let args = match expand_config_args(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let meta = metadata(&args);
    let result = match &cli.command {
        Command::Sweep(a) => cmd_sweep(a, &meta),
        Command::Trace(a) => cmd_trace(a, &meta),
        Command::Demo1d(a) => cmd_demo(a, &meta),
        Command::Classify(a) => cmd_classify(a, &meta),
        Command::Limits(a) => cmd_limits(a, &meta),
        Command::Verify(a) => cmd_verify(a, &meta),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(
            parse_grid("1.0:2.0:0.25").unwrap(),
            [1.0, 1.25, 1.5, 1.75, 2.0]
        );
        let g = parse_grid("1.0:2.0:0.01").unwrap();
        assert_eq!(g.len(), 101);
        assert_eq!(g[37], 1.37);
        assert_eq!(g[100], 2.0);
        assert_eq!(
            parse_grid("1.0:2.0:0.2").unwrap(),
            [1.0, 1.2, 1.4, 1.6, 1.8, 2.0]
        );
        assert_eq!(parse_grid("1,1.001,2").unwrap(), [1.0, 1.001, 2.0]);
        assert!(parse_grid("2,1").is_err());
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("1:2:0").is_err());
        assert!(parse_grid("a,b").is_err());
        assert_eq!(parse_depths("10,20,50").unwrap(), [10, 20, 50]);
        assert!(parse_depths("0").is_err());
    }

    #[test]
    fn suffix_paths() {
        assert_eq!(
            with_suffix(Path::new("out/h.svg"), "_L20"),
            PathBuf::from("out/h_L20.svg")
        );
    }

    #[test]
    fn bad_flag_is_usage_error() {
        assert_eq!(
            run(vec!["nngp".into(), "sweep".into(), "--bogus".into()]),
            1
        );
        assert_eq!(run(vec!["nngp".into()]), 1);
        assert_eq!(run(vec!["nngp".into(), "--help".into()]), 0);
    }
}
