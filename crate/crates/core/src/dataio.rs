//! Table ingestion, normalization, protocol splits and synthetic datasets.
//!
//! Tables are delimiter-separated text with a header row. Features are
//! normalized by dividing every column by its maximum absolute value, so
//! non-negative columns land in `[0, 1]` and signed columns in `[-1, 1]`.
//! The per-column maxima are recorded so the same scaling can be replayed
//! on test or future data.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// One parsed data row: numeric features plus a binary label.
#[derive(Clone, Debug, PartialEq)]
pub struct RawRecord {
    pub features: Vec<f64>,
    /// 1 = fraud, 0 = non-fraud.
    pub label: u8,
}

/// Row-major feature table with optional binary labels.
///
/// When the matrix was produced by normalization, the per-column maxima used
/// for scaling are retained so the same transform can be applied elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    feats: Vec<f64>,
    dim: usize,
    n_rows: usize,
    labels: Option<Vec<u8>>,
    column_maxima: Option<Vec<f64>>,
}

impl DataMatrix {
    /// Builds a matrix from row vectors, checking that all rows agree on arity.
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Option<Vec<u8>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::NoDataRows);
        }
        let dim = rows[0].len();
        if let Some(ref l) = labels {
            if l.len() != rows.len() {
                return Err(Error::MalformedRow {
                    row: l.len().min(rows.len()),
                    reason: "label count differs from row count".into(),
                });
            }
            if let Some(bad) = l.iter().find(|&&v| v > 1) {
                return Err(Error::UnknownLabel(bad.to_string()));
            }
        }
        let mut feats = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::MalformedRow {
                    row: i,
                    reason: format!("expected {} features, got {}", dim, r.len()),
                });
            }
            feats.extend_from_slice(r);
        }
        Ok(DataMatrix {
            feats,
            dim,
            n_rows: rows.len(),
            labels,
            column_maxima: None,
        })
    }

    pub fn from_records(records: Vec<RawRecord>) -> Result<Self> {
        let labels = records.iter().map(|r| r.label).collect();
        let rows = records.into_iter().map(|r| r.features).collect();
        Self::from_rows(rows, Some(labels))
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.feats[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.feats.chunks_exact(self.dim)
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn column_maxima(&self) -> Option<&[f64]> {
        self.column_maxima.as_deref()
    }

    /// Number of rows carrying the given label. Zero when unlabeled.
    pub fn count_label(&self, label: u8) -> usize {
        self.labels
            .as_ref()
            .map(|l| l.iter().filter(|&&v| v == label).count())
            .unwrap_or(0)
    }

    /// New matrix containing the given rows, in the given order.
    /// Labels and stored maxima carry over.
    pub fn select(&self, indices: &[usize]) -> DataMatrix {
        let mut feats = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            feats.extend_from_slice(self.row(i));
        }
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        DataMatrix {
            feats,
            dim: self.dim,
            n_rows: indices.len(),
            labels,
            column_maxima: self.column_maxima.clone(),
        }
    }

    /// Drops the label column, keeping features and stored maxima.
    pub fn without_labels(&self) -> DataMatrix {
        DataMatrix {
            labels: None,
            ..self.clone()
        }
    }
}

/// Parameters of the protocol split: a seeded test partition, the remaining
/// rows as the two-class training side, and a target-class-only slice of the
/// training side.
#[derive(Clone, Copy, Debug)]
pub struct SplitSpec {
    /// Fraction of all rows held out as the shared test partition.
    pub test_fraction: f64,
    /// Fraction of the training side's non-fraud rows kept for one-class training.
    pub train_target_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "test_fraction must be in (0,1), got {}",
                self.test_fraction
            )));
        }
        if !(self.train_target_fraction > 0.0 && self.train_target_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train_target_fraction must be in (0,1], got {}",
                self.train_target_fraction
            )));
        }
        Ok(())
    }
}

/// Options for [`load_table`].
#[derive(Clone, Debug)]
pub struct LoadOptions {
    pub delimiter: u8,
    /// Columns whose string values are mapped to small integer indices in
    /// order of first appearance, before normalization.
    pub categorical: Vec<String>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            delimiter: b',',
            categorical: Vec::new(),
        }
    }
}

/// Default column selection for the PaySim mobile-money table.
///
/// Identifier columns (`nameOrig`, `nameDest`) are intentionally absent:
/// they are unique per row and carry no density structure. The `type`
/// column is categorical and gets index-encoded.
pub fn paysim_schema() -> (Vec<String>, String, LoadOptions) {
    let schema = [
        "step",
        "type",
        "amount",
        "oldbalanceOrg",
        "newbalanceOrig",
        "oldbalanceDest",
        "newbalanceDest",
    ]
    .into_iter()
    .map(String::from)
    .collect();
    let options = LoadOptions {
        delimiter: b',',
        categorical: vec!["type".into()],
    };
    (schema, "isFraud".into(), options)
}

/// Reads a delimited table with a header row, keeping only the named feature
/// columns plus the label column. Row order is preserved.
pub fn load_table(
    path: &Path,
    schema: &[String],
    label_column: &str,
    options: &LoadOptions,
) -> Result<DataMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;

    let headers = reader.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let feature_idx: Vec<usize> = schema.iter().map(|c| find(c)).collect::<Result<_>>()?;
    let label_idx = find(label_column)?;
    let width = headers.len();

    let mut categories: HashMap<usize, HashMap<String, f64>> = HashMap::new();
    for name in &options.categorical {
        if let Ok(i) = find(name) {
            categories.insert(i, HashMap::new());
        }
    }

    let mut records = Vec::new();
    for (row_no, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() != width {
            return Err(Error::MalformedRow {
                row: row_no,
                reason: format!("expected {} fields, got {}", width, rec.len()),
            });
        }
        let mut features = Vec::with_capacity(feature_idx.len());
        for (&col, name) in feature_idx.iter().zip(schema) {
            let raw = &rec[col];
            let value = if let Some(map) = categories.get_mut(&col) {
                let next = map.len() as f64;
                *map.entry(raw.to_string()).or_insert(next)
            } else {
                raw.parse::<f64>().map_err(|_| Error::MalformedRow {
                    row: row_no,
                    reason: format!("non-numeric value '{}' in column '{}'", raw, name),
                })?
            };
            features.push(value);
        }
        let raw_label = &rec[label_idx];
        let label = match raw_label.parse::<f64>() {
            Ok(v) if v == 0.0 => 0u8,
            Ok(v) if v == 1.0 => 1u8,
            _ => return Err(Error::UnknownLabel(raw_label.to_string())),
        };
        records.push(RawRecord { features, label });
    }
    if records.is_empty() {
        return Err(Error::NoDataRows);
    }
    DataMatrix::from_records(records)
}

/// Writes a matrix back to delimited text with an `x0..x{d-1}` header plus a
/// label column when labels are present. Values use the shortest decimal
/// representation that round-trips, so write-then-read is bit-exact.
pub fn write_table(data: &DataMatrix, path: &Path, delimiter: u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_path(path)?;
    let mut header: Vec<String> = (0..data.dim()).map(|i| format!("x{}", i)).collect();
    if data.labels().is_some() {
        header.push("label".into());
    }
    w.write_record(&header)?;
    for i in 0..data.n_rows() {
        let mut fields: Vec<String> = data.row(i).iter().map(|v| v.to_string()).collect();
        if let Some(labels) = data.labels() {
            fields.push(labels[i].to_string());
        }
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a table previously written by [`write_table`].
pub fn read_table(path: &Path, delimiter: u8) -> Result<DataMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let has_label = headers.iter().last() == Some("label");
    let dim = if has_label {
        headers.len() - 1
    } else {
        headers.len()
    };
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (row_no, rec) in reader.records().enumerate() {
        let rec = rec?;
        let mut features = Vec::with_capacity(dim);
        for v in rec.iter().take(dim) {
            features.push(v.parse::<f64>().map_err(|_| Error::MalformedRow {
                row: row_no,
                reason: format!("non-numeric value '{}'", v),
            })?);
        }
        rows.push(features);
        if has_label {
            let raw = &rec[dim];
            labels.push(match raw {
                "0" => 0u8,
                "1" => 1u8,
                other => return Err(Error::UnknownLabel(other.to_string())),
            });
        }
    }
    DataMatrix::from_rows(rows, if has_label { Some(labels) } else { None })
}

/// Saves normalization maxima as one value per line.
pub fn save_maxima(maxima: &[f64], path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    for v in maxima {
        writeln!(f, "{}", v)?;
    }
    Ok(())
}

/// Loads maxima written by [`save_maxima`].
pub fn load_maxima(path: &Path) -> Result<Vec<f64>> {
    let f = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(line.trim().parse::<f64>().map_err(|_| Error::MalformedRow {
            row: i,
            reason: format!("bad maxima value '{}'", line),
        })?);
    }
    Ok(out)
}

/// Divides every column by its maximum absolute value and records the maxima.
///
/// Columns whose maximum is zero pass through unchanged: division by zero is
/// undefined and a constant-zero column carries no information anyway.
pub fn normalize_by_column_max(data: &DataMatrix) -> Result<DataMatrix> {
    if data.is_empty() {
        return Err(Error::NoDataRows);
    }
    let dim = data.dim();
    let mut maxima = vec![0.0f64; dim];
    for row in data.rows() {
        for (m, v) in maxima.iter_mut().zip(row) {
            let a = v.abs();
            if a > *m {
                *m = a;
            }
        }
    }
    let mut out = data.clone();
    scale_in_place(&mut out.feats, dim, &maxima);
    out.column_maxima = Some(maxima);
    Ok(out)
}

/// Applies previously recorded maxima to new data. Values may leave `[0, 1]`
/// when the new data exceeds the recorded range.
pub fn apply_stored_normalization(data: &DataMatrix, maxima: &[f64]) -> Result<DataMatrix> {
    if maxima.len() != data.dim() {
        return Err(Error::ArityMismatch {
            expected: data.dim(),
            got: maxima.len(),
        });
    }
    let mut out = data.clone();
    scale_in_place(&mut out.feats, data.dim(), maxima);
    out.column_maxima = Some(maxima.to_vec());
    Ok(out)
}

fn scale_in_place(feats: &mut [f64], dim: usize, maxima: &[f64]) {
    for row in feats.chunks_exact_mut(dim) {
        for (v, &m) in row.iter_mut().zip(maxima) {
            if m != 0.0 {
                *v /= m;
            }
        }
    }
}

/// Splits a labeled dataset into the three protocol partitions:
/// a seeded uniform test sample, the remaining rows as the two-class SVM
/// training partition, and a target-class-only subset of the training side
/// for one-class training. The test partition is disjoint from both training
/// views; the one-class subset draws only non-fraud rows from the training
/// side and never touches the test rows.
pub fn split_for_protocol(
    data: &DataMatrix,
    spec: &SplitSpec,
) -> Result<(DataMatrix, DataMatrix, DataMatrix)> {
    spec.validate()?;
    let labels = data.labels().ok_or(Error::MissingLabels)?;
    let n = data.n_rows();
    if data.count_label(0) == 0 || data.count_label(1) == 0 {
        return Err(Error::SingleClass);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let n_test = ((spec.test_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut test_idx: Vec<usize> = order[..n_test].to_vec();
    let mut train_idx: Vec<usize> = order[n_test..].to_vec();

    let target_in_order: Vec<usize> = train_idx
        .iter()
        .copied()
        .filter(|&i| labels[i] == 0)
        .collect();
    if target_in_order.is_empty() {
        return Err(Error::DegenerateData(
            "training partition has no non-fraud rows".into(),
        ));
    }
    let n_target = ((spec.train_target_fraction * target_in_order.len() as f64).round() as usize)
        .clamp(1, target_in_order.len());
    let mut svdd_idx: Vec<usize> = target_in_order[..n_target].to_vec();

    test_idx.sort_unstable();
    train_idx.sort_unstable();
    svdd_idx.sort_unstable();

    Ok((
        data.select(&svdd_idx),
        data.select(&train_idx),
        data.select(&test_idx),
    ))
}

/// Shapes available from [`generate_two_class_shapes`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShapeKind {
    /// Two concentric noisy circles, class 0 inner.
    Rings,
    /// Two interleaving half-circles.
    Moons,
    /// Two isotropic blobs with well-separated centers.
    Gaussians,
}

impl std::str::FromStr for ShapeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rings" => Ok(ShapeKind::Rings),
            "moons" => Ok(ShapeKind::Moons),
            "gaussians" => Ok(ShapeKind::Gaussians),
            other => Err(Error::InvalidConfig(format!("unknown shape '{}'", other))),
        }
    }
}

/// Generates a 2-D two-class dataset where each class occupies a connected
/// region with a visible boundary. Deterministic per seed.
pub fn generate_two_class_shapes(
    n_per_class: usize,
    shape: ShapeKind,
    noise: f64,
    seed: u64,
) -> Result<DataMatrix> {
    if n_per_class == 0 {
        return Err(Error::InvalidConfig("n_per_class must be >= 1".into()));
    }
    if noise < 0.0 {
        return Err(Error::InvalidConfig("noise must be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = |rng: &mut ChaCha8Rng| -> (f64, f64) {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        (a * noise, b * noise)
    };

    let mut rows = Vec::with_capacity(2 * n_per_class);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for class in 0..2u8 {
        for _ in 0..n_per_class {
            let (x, y) = match shape {
                ShapeKind::Rings => {
                    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                    let r = if class == 0 { 1.0 } else { 2.0 };
                    let (dx, dy) = jitter(&mut rng);
                    (r * theta.cos() + dx, r * theta.sin() + dy)
                }
                ShapeKind::Moons => {
                    let t = rng.gen_range(0.0..std::f64::consts::PI);
                    let (dx, dy) = jitter(&mut rng);
                    if class == 0 {
                        (t.cos() + dx, t.sin() + dy)
                    } else {
                        (1.0 - t.cos() + dx, 0.5 - t.sin() + dy)
                    }
                }
                ShapeKind::Gaussians => {
                    let (cx, cy) = if class == 0 { (0.0, 0.0) } else { (3.0, 3.0) };
                    let (dx, dy) = jitter(&mut rng);
                    (cx + dx, cy + dy)
                }
            };
            rows.push(vec![x, y]);
            labels.push(class);
        }
    }
    DataMatrix::from_rows(rows, Some(labels))
}

/// Generates a fraud-like 2-D dataset: a dense majority class drawn from a
/// few compact clusters, plus a small fraction of sparse anomalies scattered
/// over a much wider box (some of which land inside the clusters, so the
/// classes are not trivially separable). Deterministic per seed.
pub fn generate_fraud_like(
    n_rows: usize,
    fraud_fraction: f64,
    noise: f64,
    seed: u64,
) -> Result<DataMatrix> {
    if n_rows < 2 {
        return Err(Error::InvalidConfig("n_rows must be >= 2".into()));
    }
    if !(fraud_fraction > 0.0 && fraud_fraction < 1.0) {
        return Err(Error::InvalidConfig(
            "fraud_fraction must be in (0,1)".into(),
        ));
    }
    let n_fraud = ((n_rows as f64 * fraud_fraction).round() as usize).clamp(1, n_rows - 1);
    let n_normal = n_rows - n_fraud;
    // (center, spread multiplier, mixture weight): transaction-style data is
    // heavy tailed, so most of the mass sits in a tight core with the rest
    // spread over progressively wider halos
    let clusters = [
        ((0.0, 0.0), 0.4, 0.60),
        ((4.0, 1.0), 1.0, 0.30),
        ((2.0, 4.0), 2.2, 0.10),
    ];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n_rows);
    let mut labels = Vec::with_capacity(n_rows);
    for _ in 0..n_normal {
        let pick: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = clusters[clusters.len() - 1];
        for c in clusters {
            acc += c.2;
            if pick < acc {
                chosen = c;
                break;
            }
        }
        let ((cx, cy), spread, _) = chosen;
        let dx: f64 = rng.sample(StandardNormal);
        let dy: f64 = rng.sample(StandardNormal);
        rows.push(vec![cx + dx * noise * spread, cy + dy * noise * spread]);
        labels.push(0u8);
    }
    // Anomalies have learnable structure: most come from small pockets
    // buried in the wide halo cluster, where the call is a density-ratio
    // judgement that takes examples of both classes; a few pockets sit in
    // the empty gaps, and a quarter scatter uniformly as background noise.
    let halo_center = clusters[2].0;
    let halo_sigma = clusters[2].1 * noise;
    let halo_pockets = [(1.1, 0.55), (-1.0, -0.45), (0.45, 1.35), (-0.9, 0.8)];
    let gap_pockets = [(1.3, 0.4), (5.2, 0.2)];
    let pocket_std = 0.3 * noise;
    for _ in 0..n_fraud {
        let pick: f64 = rng.gen();
        let (px, py) = if pick < 0.25 {
            let x = rng.gen_range(-4.0..8.0);
            let y = rng.gen_range(-4.0..8.0);
            rows.push(vec![x, y]);
            labels.push(1u8);
            continue;
        } else if pick < 0.85 {
            let (ox, oy) = halo_pockets[rng.gen_range(0..halo_pockets.len())];
            (halo_center.0 + ox * halo_sigma, halo_center.1 + oy * halo_sigma)
        } else {
            gap_pockets[rng.gen_range(0..gap_pockets.len())]
        };
        let dx: f64 = rng.sample(StandardNormal);
        let dy: f64 = rng.sample(StandardNormal);
        rows.push(vec![px + dx * pocket_std, py + dy * pocket_std]);
        labels.push(1u8);
    }
    DataMatrix::from_rows(rows, Some(labels))
}
