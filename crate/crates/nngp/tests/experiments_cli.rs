use std::path::PathBuf;
use std::process::{Command, Output};

use nngp::data::{load_split, DatasetKind, Normalization, Normalizer, Subset};
use nngp::experiments::{
    norm_accuracy_gap, read_sweep_csv, run_sweep, CellStatus, Prepared, SigmaW2Grid, SweepConfig,
};
use nngp_core::NoiseMode;

fn data_dir() -> PathBuf {
    std::env::var_os("NNGP_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

fn prepared(n_train: usize, n_test: usize) -> Prepared {
    let split = load_split(
        DatasetKind::Mnist,
        &data_dir(),
        n_train,
        n_test,
        Subset::Balanced,
    )
    .unwrap();
    let norm = Normalizer::fit(&split.train, Normalization::UnitNorm).unwrap();
    Prepared::new(&split, &norm).unwrap()
}

fn cfg(sigma_w2: SigmaW2Grid, mu2: Vec<f64>, depths: Vec<usize>, threads: usize) -> SweepConfig {
    SweepConfig {
        sigma_w2,
        mu2_grid: mu2,
        sigma_b2: 0.0,
        noise_mode: NoiseMode::Multiplicative,
        depths,
        sigma_eps2: 1e-6,
        threads,
    }
}

fn nngp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nngp"))
        .args(args)
        .env("NNGP_DATA_DIR", data_dir())
        .output()
        .unwrap()
}

#[test]
fn critical_cells_stay_finite_at_depth_100() {
    let data = prepared(100, 50);
    let cells = run_sweep(
        &data,
        &cfg(SigmaW2Grid::Critical, vec![1.0, 1.5, 3.0], vec![100], 1),
    )
    .unwrap();
    assert_eq!(cells.len(), 3);
    for c in &cells {
        assert_eq!(c.status, CellStatus::Ok);
        assert!(c.accuracy.unwrap() >= 0.0 && c.accuracy.unwrap() <= 1.0);
        assert!(c.frobenius_norm.unwrap().is_finite() && c.mean_pred_variance.unwrap().is_finite());
        assert_eq!(c.distance_to_critical, 0.0);
    }
}

#[test]
fn sweep_independent_of_thread_count() {
    let data = prepared(60, 30);
    let grid = || SigmaW2Grid::Values(vec![1.0, 1.5, 2.0]);
    let a = run_sweep(&data, &cfg(grid(), vec![1.0, 2.0], vec![3, 8], 1)).unwrap();
    let b = run_sweep(&data, &cfg(grid(), vec![1.0, 2.0], vec![3, 8], 3)).unwrap();
    assert_eq!(a, b);
    let order: Vec<(usize, f64, f64)> = a.iter().map(|c| (c.depth, c.mu2, c.sigma_w2)).collect();
    let mut sorted = order.clone();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    assert_eq!(order, sorted);
}

#[test]
fn norm_accuracy_step_along_critical_line() {
    // on [1, 3] more noise shrinks the off-diagonal, the Gram norm and,
    // abruptly at depth 50, the accuracy
    let data = prepared(200, 200);
    let mu2: Vec<f64> = (0..=20).map(|i| 1.0 + 0.1 * i as f64).collect();
    let cells = run_sweep(&data, &cfg(SigmaW2Grid::Critical, mu2, vec![50], 1)).unwrap();
    let gap = norm_accuracy_gap(&cells).unwrap();
    assert!(gap >= 0.2, "gap {gap}");
}

#[test]
fn smoke_sweep_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = nngp(&[
        "sweep",
        "--n-train",
        "50",
        "--n-test",
        "50",
        "--sw2-grid",
        "1.0,2.0",
        "--mu2-grid",
        "1.0,2.0",
        "--depths",
        "20",
        "--out",
        out.to_str().unwrap(),
        "--plot",
        dir.path().join("h.svg").to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# nngp: "));
    assert_eq!(read_sweep_csv(&text).unwrap().len(), 4);
    assert!(std::fs::read_to_string(dir.path().join("h.svg"))
        .unwrap()
        .contains("<svg"));
}

#[test]
fn overflowing_cells_exit_two_with_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = nngp(&[
        "sweep",
        "--n-train",
        "20",
        "--n-test",
        "10",
        "--sw2-grid",
        "1.0,2.0",
        "--mu2-grid",
        "2.0",
        "--depths",
        "10,1100",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let cells = read_sweep_csv(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(cells.len(), 4);
    let over: Vec<_> = cells
        .iter()
        .filter(|c| c.status == CellStatus::Overflow)
        .collect();
    assert_eq!(over.len(), 1);
    assert_eq!((over[0].depth, over[0].sigma_w2), (1100, 2.0));
    assert!(over[0].accuracy.is_none());
}

#[test]
fn fatal_errors_exit_one() {
    assert_eq!(nngp(&["sweep", "--bogus"]).status.code(), Some(1));
    assert_eq!(nngp(&["sweep", "--sw2-grid", "2,1"]).status.code(), Some(1));
    let o = nngp(&["sweep", "--data-dir", "/nonexistent", "--out", "/dev/null"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: "));
}

#[test]
fn limits_output() {
    let o = nngp(&[
        "limits", "--sw2", "1.0", "--mu2", "2.0", "--sb2", "0", "--noise", "mult",
    ]);
    assert_eq!(String::from_utf8_lossy(&o.stdout), "M5 FixedPreserving\n");
    let o = nngp(&[
        "limits", "--sw2", "1.0", "--mu2", "0.5", "--sb2", "0.1", "--noise", "add",
    ]);
    assert_eq!(
        String::from_utf8_lossy(&o.stdout),
        "A1 ConstantLimit\nlimit 1.2\n"
    );
    let o = nngp(&["limits", "--sw2", "critical", "--mu2", "1.25"]);
    assert_eq!(String::from_utf8_lossy(&o.stdout), "M5 FixedPreserving\n");
    let o = nngp(&["limits", "--boundary", "--mu2-grid", "1.0:2.0:0.5"]);
    let text = String::from_utf8_lossy(&o.stdout);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(
        rows,
        ["mu2,sigma_w2", "1,2", "1.5,1.3333333333333333", "2,1"]
    );
}

#[test]
fn critical_trace_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let o = nngp(&[
        "trace",
        "--n-train",
        "5",
        "--n-test",
        "1",
        "--mu2",
        "1.5",
        "--depth",
        "30",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = std::fs::read_to_string(&out).unwrap();
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let diag: Vec<f64> = r
        .records()
        .map(|rec| rec.unwrap()[6].parse().unwrap())
        .collect();
    assert_eq!(diag.len(), 31);
    assert!(diag.iter().all(|d| (d - diag[0]).abs() <= 1e-12 * diag[0]));
}

#[test]
fn verify_fails_loudly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.json");
    let args = [
        "verify",
        "--configs",
        "3",
        "--samples",
        "10000",
        "--width",
        "64",
        "--networks",
        "1000",
        "--out",
    ];
    let mut ok = args.to_vec();
    ok.push(out.to_str().unwrap());
    assert_eq!(nngp(&ok).status.code(), Some(0));
    let mut strict = ok.clone();
    strict.extend(["--k-se", "0"]);
    assert_eq!(nngp(&strict).status.code(), Some(2));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("demo.conf");
    std::fs::write(&conf, "# demo settings\nmu2 = \"1.0,2.0\"\nsamples = 2\n").unwrap();
    let out = dir.path().join("d.json");
    let o = nngp(&[
        "demo1d",
        "--config",
        conf.to_str().unwrap(),
        "--samples",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let b = v["bundles"].as_array().unwrap();
    assert_eq!(b.len(), 2);
    assert_eq!(b[0]["prior_samples"].as_array().unwrap().len(), 3);
    assert!(v["meta"]["command"]
        .as_str()
        .unwrap()
        .contains("--samples 3"));
}

#[test]
fn classify_writes_predictions_and_gram() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.csv");
    let gram = dir.path().join("k.bin");
    let o = nngp(&[
        "classify",
        "--n-train",
        "100",
        "--n-test",
        "40",
        "--mu2",
        "1.25",
        "--out",
        out.to_str().unwrap(),
        "--gram-out",
        gram.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let g = nngp::gramfile::read_gram(&gram).unwrap();
    assert_eq!(g.size(), 100);
    assert_eq!(g.params().sigma_w2(), 1.6);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("# regime: M5 FixedPreserving"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 41);
}
