//! Dataset ingestion: MNIST IDX files, CIFAR-10 binary batches, CSV, and
//! the synthetic sinusoid.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use nngp_core::{Dataset, Matrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::{Error, Result};

const IDX_IMAGES: u32 = 0x0000_0803;
const IDX_LABELS: u32 = 0x0000_0801;
const CIFAR_PIXELS: usize = 3072;
const CIFAR_RECORD: usize = 1 + CIFAR_PIXELS;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Mnist,
    Cifar10,
    Csv,
    Synthetic,
}

/// Labelled examples before normalisation. Image pixels are scaled to
/// `[0, 1]` by dividing the byte value by 255.
#[derive(Debug, Clone, PartialEq)]
pub struct RawImageSet {
    pub pixels: Matrix,
    pub labels: Vec<usize>,
    pub source: Source,
}

impl RawImageSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// The examples at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let rows: Vec<&[f64]> = indices.iter().map(|&i| self.pixels.row(i)).collect();
        Ok(Self {
            pixels: Matrix::from_rows(&rows)?,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            source: self.source,
        })
    }

    /// The first `n` examples.
    pub fn first(&self, n: usize) -> Result<Self> {
        check_limit(n, self.len())?;
        self.select(&(0..n).collect::<Vec<_>>())
    }

    /// `n` examples with class counts differing by at most one, taking the
    /// earliest examples of each class in file order. Returned in file order.
    pub fn balanced(&self, n: usize, num_classes: usize) -> Result<Self> {
        check_limit(n, self.len())?;
        if num_classes == 0 {
            return Err(Error::Format(
                "balanced subset needs at least one class".into(),
            ));
        }
        let quota: Vec<usize> = (0..num_classes)
            .map(|c| n / num_classes + usize::from(c < n % num_classes))
            .collect();
        let mut taken = vec![0usize; num_classes];
        let mut picked = Vec::with_capacity(n);
        for (i, &l) in self.labels.iter().enumerate() {
            if l < num_classes && taken[l] < quota[l] {
                taken[l] += 1;
                picked.push(i);
                if picked.len() == n {
                    break;
                }
            }
        }
        if picked.len() < n {
            let short = (0..num_classes).find(|&c| taken[c] < quota[c]).unwrap_or(0);
            return Err(Error::Format(format!(
                "not enough examples of class {short} for a balanced subset of {n}"
            )));
        }
        self.select(&picked)
    }
}

fn check_limit(limit: usize, available: usize) -> Result<()> {
    if limit == 0 {
        return Err(Error::Format("requested 0 examples".into()));
    }
    if limit > available {
        return Err(Error::Format(format!(
            "requested {limit} examples but only {available} are available"
        )));
    }
    Ok(())
}

pub(crate) fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format(format!("{what}: truncated header")))
}

/// Parses IDX image and label buffers, keeping the first `limit` examples.
pub fn parse_mnist_idx(images: &[u8], labels: &[u8], limit: usize) -> Result<RawImageSet> {
    let magic = be_u32(images, 0, "images")?;
    if magic != IDX_IMAGES {
        return Err(Error::Format(format!("images: bad magic {magic:#010x}")));
    }
    let magic = be_u32(labels, 0, "labels")?;
    if magic != IDX_LABELS {
        return Err(Error::Format(format!("labels: bad magic {magic:#010x}")));
    }
    let n_images = be_u32(images, 4, "images")? as usize;
    let rows = be_u32(images, 8, "images")? as usize;
    let cols = be_u32(images, 12, "images")? as usize;
    let n_labels = be_u32(labels, 4, "labels")? as usize;
    if n_images != n_labels {
        return Err(Error::Format(format!(
            "{n_images} images but {n_labels} labels"
        )));
    }
    let dim = rows * cols;
    if dim == 0 {
        return Err(Error::Format("images: zero-sized images".into()));
    }
    if images.len() < 16 + n_images * dim {
        return Err(Error::Format("images: truncated file".into()));
    }
    if labels.len() < 8 + n_labels {
        return Err(Error::Format("labels: truncated file".into()));
    }
    check_limit(limit, n_images)?;
    let data = images[16..16 + limit * dim]
        .iter()
        .map(|&b| f64::from(b) / 255.0)
        .collect();
    Ok(RawImageSet {
        pixels: Matrix::from_vec(limit, dim, data)?,
        labels: labels[8..8 + limit]
            .iter()
            .map(|&b| usize::from(b))
            .collect(),
        source: Source::Mnist,
    })
}

pub fn load_mnist_idx(images_path: &Path, labels_path: &Path, limit: usize) -> Result<RawImageSet> {
    parse_mnist_idx(&read(images_path)?, &read(labels_path)?, limit)
}

/// Parses concatenated CIFAR-10 batches, keeping the first `limit` records.
/// Pixels stay channel-major as stored.
pub fn parse_cifar10(batches: &[Vec<u8>], limit: usize) -> Result<RawImageSet> {
    let mut available = 0;
    for (i, b) in batches.iter().enumerate() {
        if b.len() % CIFAR_RECORD != 0 {
            return Err(Error::Format(format!(
                "batch {i}: {} bytes is not a whole number of {CIFAR_RECORD}-byte records",
                b.len()
            )));
        }
        available += b.len() / CIFAR_RECORD;
    }
    check_limit(limit, available)?;
    let mut data = Vec::with_capacity(limit * CIFAR_PIXELS);
    let mut labels = Vec::with_capacity(limit);
    'outer: for b in batches {
        for rec in b.chunks_exact(CIFAR_RECORD) {
            if labels.len() == limit {
                break 'outer;
            }
            labels.push(usize::from(rec[0]));
            data.extend(rec[1..].iter().map(|&p| f64::from(p) / 255.0));
        }
    }
    Ok(RawImageSet {
        pixels: Matrix::from_vec(limit, CIFAR_PIXELS, data)?,
        labels,
        source: Source::Cifar10,
    })
}

pub fn load_cifar10_bin(batch_paths: &[PathBuf], limit: usize) -> Result<RawImageSet> {
    let batches = batch_paths
        .iter()
        .map(|p| read(p))
        .collect::<Result<Vec<_>>>()?;
    parse_cifar10(&batches, limit)
}

/// Reads a CSV with header `x0,...,x{D-1},label`. Values are used as given.
pub fn parse_csv(text: &str, limit: Option<usize>) -> Result<RawImageSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let d = headers.len().saturating_sub(1);
    if d == 0 || &headers[d] != "label" {
        return Err(Error::Format("csv header must be x0,...,xD,label".into()));
    }
    for (i, h) in headers.iter().take(d).enumerate() {
        if h != format!("x{i}") {
            return Err(Error::Format(format!(
                "csv header column {i} is {h:?}, expected x{i}"
            )));
        }
    }
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        if limit.is_some_and(|l| labels.len() == l) {
            break;
        }
        let rec = rec?;
        if rec.len() != d + 1 {
            return Err(Error::Format(format!(
                "csv row {}: expected {} fields",
                line + 1,
                d + 1
            )));
        }
        for v in rec.iter().take(d) {
            let x: f64 = v
                .parse()
                .map_err(|_| Error::Format(format!("csv row {}: bad number {v:?}", line + 1)))?;
            data.push(x);
        }
        labels.push(rec[d].parse().map_err(|_| {
            Error::Format(format!("csv row {}: bad label {:?}", line + 1, &rec[d]))
        })?);
    }
    let n = labels.len();
    if let Some(l) = limit {
        check_limit(l, n)?;
    } else if n == 0 {
        return Err(Error::Format("csv has no rows".into()));
    }
    Ok(RawImageSet {
        pixels: Matrix::from_vec(n, d, data)?,
        labels,
        source: Source::Csv,
    })
}

pub fn load_csv(path: &Path, limit: Option<usize>) -> Result<RawImageSet> {
    let bytes = read(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::Format(format!("{}: not UTF-8", path.display())))?;
    parse_csv(&text, limit)
}

/// `n` evenly spaced points on `x_range` (endpoints included) with
/// `y = sin(2 pi x) + eps`, `eps ~ N(0, noise_sd^2)`.
pub fn make_sinusoid(
    n_train: usize,
    x_range: (f64, f64),
    noise_sd: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_train == 0 {
        return Err(Error::Format("need at least one training point".into()));
    }
    if !(noise_sd >= 0.0) || !x_range.0.is_finite() || !x_range.1.is_finite() {
        return Err(Error::Format("bad sinusoid parameters".into()));
    }
    let xs = linspace(x_range.0, x_range.1, n_train);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sd).map_err(|e| Error::Format(e.to_string()))?;
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| (2.0 * std::f64::consts::PI * x).sin() + noise.sample(&mut rng))
        .collect();
    Ok(Dataset::from_parts(
        Matrix::column(&xs),
        Matrix::column(&ys),
    )?)
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    None,
    /// Each row scaled to Euclidean norm 1.
    #[default]
    UnitNorm,
    /// Columns centred on the fitting set's means, then one global scale
    /// making the mean squared row norm 1.
    CenterScale,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::None => "none",
            Normalization::UnitNorm => "unit_norm",
            Normalization::CenterScale => "center_scale",
        })
    }
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Normalization::None),
            "unit_norm" | "unit-norm" => Ok(Normalization::UnitNorm),
            "center_scale" | "center-scale" => Ok(Normalization::CenterScale),
            _ => Err(Error::Usage(format!(
                "unknown normalisation {s:?} (none, unit_norm, center_scale)"
            ))),
        }
    }
}

/// A normalisation fitted on one set (the training split) and applied to
/// any other set with the same dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    mode: Normalization,
    means: Vec<f64>,
    scale: f64,
}

impl Normalizer {
    pub fn fit(set: &RawImageSet, mode: Normalization) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::Format("cannot normalise an empty set".into()));
        }
        let (n, d) = (set.pixels.rows(), set.pixels.cols());
        let mut means = Vec::new();
        let mut scale = 1.0;
        if mode == Normalization::CenterScale {
            means = vec![0.0; d];
            for i in 0..n {
                for (m, v) in means.iter_mut().zip(set.pixels.row(i)) {
                    *m += v;
                }
            }
            means.iter_mut().for_each(|m| *m /= n as f64);
            let mut sq = 0.0;
            for i in 0..n {
                sq += set
                    .pixels
                    .row(i)
                    .iter()
                    .zip(&means)
                    .map(|(v, m)| (v - m) * (v - m))
                    .sum::<f64>();
            }
            let rms = (sq / n as f64).sqrt();
            if !(rms > 0.0) {
                return Err(Error::Format("center_scale: all rows identical".into()));
            }
            scale = 1.0 / rms;
        }
        Ok(Self { mode, means, scale })
    }

    pub fn mode(&self) -> Normalization {
        self.mode
    }

    /// Normalised inputs with the labels as a one-column target.
    pub fn apply(&self, set: &RawImageSet) -> Result<Dataset> {
        let (n, d) = (set.pixels.rows(), set.pixels.cols());
        if n == 0 {
            return Err(Error::Format("cannot normalise an empty set".into()));
        }
        let mut out = set.pixels.clone();
        for i in 0..n {
            let row = out.row_mut(i);
            match self.mode {
                Normalization::None => {}
                Normalization::UnitNorm => {
                    let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if !(norm > 0.0) {
                        return Err(Error::Format(format!("unit_norm: row {i} has zero norm")));
                    }
                    row.iter_mut().for_each(|v| *v /= norm);
                }
                Normalization::CenterScale => {
                    if self.means.len() != d {
                        return Err(Error::Format(format!(
                            "center_scale fitted on dimension {}, got {d}",
                            self.means.len()
                        )));
                    }
                    for (v, m) in row.iter_mut().zip(&self.means) {
                        *v = (*v - m) * self.scale;
                    }
                }
            }
        }
        let labels: Vec<f64> = set.labels.iter().map(|&l| l as f64).collect();
        Ok(Dataset::from_parts(out, Matrix::column(&labels))?)
    }
}

pub fn normalize_inputs(set: &RawImageSet, mode: Normalization) -> Result<Dataset> {
    Normalizer::fit(set, mode)?.apply(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Mnist,
    Cifar10,
    Csv,
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetKind::Mnist => "mnist",
            DatasetKind::Cifar10 => "cifar10",
            DatasetKind::Csv => "csv",
        })
    }
}

impl std::str::FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mnist" => Ok(DatasetKind::Mnist),
            "cifar10" | "cifar" => Ok(DatasetKind::Cifar10),
            "csv" => Ok(DatasetKind::Csv),
            _ => Err(Error::Usage(format!(
                "unknown dataset {s:?} (mnist, cifar10, csv)"
            ))),
        }
    }
}

/// How training examples are chosen from the training file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Subset {
    /// The first `n` examples.
    First,
    /// The earliest `n / C` examples of each class, so the 0.9/-0.1 targets
    /// have zero column means.
    #[default]
    Balanced,
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subset::First => "first",
            Subset::Balanced => "balanced",
        })
    }
}

impl std::str::FromStr for Subset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" => Ok(Subset::First),
            "balanced" => Ok(Subset::Balanced),
            _ => Err(Error::Usage(format!(
                "unknown subset {s:?} (first, balanced)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: RawImageSet,
    pub test: RawImageSet,
    pub num_classes: usize,
}

/// File layout under `dir`:
/// - mnist: `train-images-idx3-ubyte`, `train-labels-idx1-ubyte`,
///   `t10k-images-idx3-ubyte`, `t10k-labels-idx1-ubyte`
/// - cifar10: `data_batch_1.bin` .. `data_batch_5.bin` (those present, in
///   order) and `test_batch.bin`
/// - csv: `train.csv`, `test.csv`
pub fn load_split(
    kind: DatasetKind,
    dir: &Path,
    n_train: usize,
    n_test: usize,
    subset: Subset,
) -> Result<Split> {
    let (train_all, test) = match kind {
        DatasetKind::Mnist => {
            let tr_img = read(&dir.join("train-images-idx3-ubyte"))?;
            let tr_lab = read(&dir.join("train-labels-idx1-ubyte"))?;
            let count = be_u32(&tr_img, 4, "images")? as usize;
            let train = parse_mnist_idx(&tr_img, &tr_lab, train_limit(subset, n_train, count))?;
            let test = load_mnist_idx(
                &dir.join("t10k-images-idx3-ubyte"),
                &dir.join("t10k-labels-idx1-ubyte"),
                n_test,
            )?;
            (train, test)
        }
        DatasetKind::Cifar10 => {
            let batches: Vec<PathBuf> = (1..=5)
                .map(|i| dir.join(format!("data_batch_{i}.bin")))
                .filter(|p| p.exists())
                .collect();
            if batches.is_empty() {
                return Err(Error::Format(format!(
                    "no data_batch_*.bin files in {}",
                    dir.display()
                )));
            }
            let bytes = batches
                .iter()
                .map(|p| read(p))
                .collect::<Result<Vec<_>>>()?;
            let count = bytes.iter().map(|b| b.len() / CIFAR_RECORD).sum();
            let train = parse_cifar10(&bytes, train_limit(subset, n_train, count))?;
            let test = load_cifar10_bin(&[dir.join("test_batch.bin")], n_test)?;
            (train, test)
        }
        DatasetKind::Csv => {
            let limit = if subset == Subset::First {
                Some(n_train)
            } else {
                None
            };
            let train = load_csv(&dir.join("train.csv"), limit)?;
            let test = load_csv(&dir.join("test.csv"), Some(n_test))?;
            (train, test)
        }
    };
    if train_all.pixels.cols() != test.pixels.cols() {
        return Err(Error::Format(format!(
            "train dimension {} differs from test dimension {}",
            train_all.pixels.cols(),
            test.pixels.cols()
        )));
    }
    let num_classes = match kind {
        DatasetKind::Csv => train_all.num_classes().max(test.num_classes()),
        _ => 10,
    };
    let train = match subset {
        Subset::First => train_all.first(n_train)?,
        Subset::Balanced => train_all.balanced(n_train, num_classes)?,
    };
    if let Some(&bad) = test.labels.iter().find(|&&l| l >= num_classes) {
        return Err(Error::Format(format!(
            "test label {bad} outside {num_classes} classes"
        )));
    }
    Ok(Split {
        train,
        test,
        num_classes,
    })
}

fn train_limit(subset: Subset, n_train: usize, available: usize) -> usize {
    match subset {
        Subset::First => n_train,
        Subset::Balanced => available,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn idx_fixture(pixels: &[[u8; 4]], labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
        let mut img = Vec::new();
        img.extend_from_slice(&IDX_IMAGES.to_be_bytes());
        img.extend_from_slice(&(pixels.len() as u32).to_be_bytes());
        img.extend_from_slice(&2u32.to_be_bytes());
        img.extend_from_slice(&2u32.to_be_bytes());
        for p in pixels {
            img.extend_from_slice(p);
        }
        let mut lab = Vec::new();
        lab.extend_from_slice(&IDX_LABELS.to_be_bytes());
        lab.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        lab.extend_from_slice(labels);
        (img, lab)
    }

    #[test]
    fn idx_fixture_exact() {
        let (img, lab) = idx_fixture(&[[0, 255, 51, 1], [7, 8, 9, 10]], &[3, 9]);
        let s = parse_mnist_idx(&img, &lab, 2).unwrap();
        assert_eq!(s.pixels.row(0), &[0.0, 1.0, 0.2, 1.0 / 255.0]);
        assert_eq!(s.pixels.row(1)[2], 9.0 / 255.0);
        assert_eq!(s.labels, vec![3, 9]);
        assert_eq!(s.source, Source::Mnist);
    }

    #[test]
    fn idx_errors() {
        let (img, lab) = idx_fixture(&[[0, 1, 2, 3], [4, 5, 6, 7]], &[1, 2]);
        assert!(parse_mnist_idx(&img, &lab, 0).is_err());
        assert!(parse_mnist_idx(&img, &lab, 3).is_err());
        assert!(parse_mnist_idx(&img[..img.len() - 1], &lab, 1).is_err());
        let (_, short) = idx_fixture(&[[0; 4]], &[1]);
        assert!(parse_mnist_idx(&img, &short, 1).is_err());
        let mut bad = img.clone();
        bad[3] = 0x01;
        assert!(parse_mnist_idx(&bad, &lab, 1).is_err());
        assert!(parse_mnist_idx(&lab, &img, 1).is_err());
    }

    #[test]
    fn cifar_round_trip() {
        let mut b = Vec::new();
        for (label, fill) in [(4u8, 0u8), (7, 255)] {
            b.push(label);
            b.extend((0..CIFAR_PIXELS).map(|i| if i == 5 { 102 } else { fill }));
        }
        let s = parse_cifar10(&[b.clone()], 2).unwrap();
        assert_eq!(s.labels, vec![4, 7]);
        assert_eq!(s.pixels.cols(), 3072);
        assert_eq!(s.pixels[(0, 5)], 0.4);
        assert_eq!(s.pixels[(1, 0)], 1.0);
        assert!(parse_cifar10(&[b.clone()], 3).is_err());
        assert!(parse_cifar10(&[b[..b.len() - 1].to_vec()], 1).is_err());
    }

    #[test]
    fn csv_loader() {
        let s = parse_csv("x0,x1,label\n0.5,1.5,2\n-1,2,0\n", None).unwrap();
        assert_eq!(s.pixels.row(1), &[-1.0, 2.0]);
        assert_eq!(s.labels, vec![2, 0]);
        assert!(parse_csv("a,b,label\n1,2,0\n", None).is_err());
        assert!(parse_csv("x0,label\n1,2\n", Some(2)).is_err());
    }

    #[test]
    fn sinusoid() {
        let d = make_sinusoid(1, (0.25, 0.25), 0.0, 1).unwrap();
        assert!((d.targets()[(0, 0)] - 1.0).abs() < 1e-15);
        let a = make_sinusoid(4, (0.0, 1.0), 0.1, 7).unwrap();
        assert_eq!(a, make_sinusoid(4, (0.0, 1.0), 0.1, 7).unwrap());
        assert_eq!(a.len(), 4);
        assert_eq!(a.inputs().col(0), vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
    }

    #[test]
    fn normalisation_modes() {
        let set = RawImageSet {
            pixels: Matrix::from_rows(&[[3.0, 4.0], [1.0, 0.0]]).unwrap(),
            labels: vec![0, 1],
            source: Source::Synthetic,
        };
        let d = normalize_inputs(&set, Normalization::UnitNorm).unwrap();
        for i in 0..2 {
            let n: f64 = d.inputs().row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
        let d = normalize_inputs(&set, Normalization::None).unwrap();
        assert_eq!(d.inputs(), &set.pixels);
        let d = normalize_inputs(&set, Normalization::CenterScale).unwrap();
        let sq: f64 = d.inputs().as_slice().iter().map(|v| v * v).sum();
        assert!((sq / 2.0 - 1.0).abs() < 1e-12);
        let zero = RawImageSet {
            pixels: Matrix::zeros(1, 3),
            labels: vec![0],
            source: Source::Synthetic,
        };
        assert!(normalize_inputs(&zero, Normalization::UnitNorm).is_err());
    }

    #[test]
    fn balanced_subset() {
        let set = RawImageSet {
            pixels: Matrix::from_vec(8, 1, (0..8).map(f64::from).collect()).unwrap(),
            labels: vec![0, 0, 0, 1, 0, 2, 1, 2],
            source: Source::Synthetic,
        };
        let b = set.balanced(6, 3).unwrap();
        assert_eq!(b.labels, vec![0, 0, 1, 2, 1, 2]);
        assert_eq!(b.pixels.col(0), vec![0.0, 1.0, 3.0, 5.0, 6.0, 7.0]);
        assert!(set.balanced(8, 3).is_err());
        assert_eq!(set.first(3).unwrap().labels, vec![0, 0, 0]);
    }
}
