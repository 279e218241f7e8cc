//! Tabular ingestion and synthetic concept streams.
//!
//! Datasets are dense numeric matrices with binary labels: 0 for normal
//! traffic, 1 for attacks. CSV is the only ingestion format; synthetic
//! streams provide deterministic desk-scale stand-ins for real captures.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major numeric sample matrix with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    samples: Vec<Vec<f64>>,
    labels: Vec<u8>,
    feature_names: Vec<String>,
}

impl TabularDataset {
    pub fn new(samples: Vec<Vec<f64>>, labels: Vec<u8>, feature_names: Vec<String>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let d = feature_names.len();
        if d == 0 {
            return Err(Error::EmptyDataset);
        }
        for (i, name) in feature_names.iter().enumerate() {
            if feature_names[..i].contains(name) {
                return Err(Error::DuplicateFeature(name.clone()));
            }
        }
        if labels.len() != samples.len() {
            return Err(Error::DimensionMismatch {
                expected: samples.len(),
                got: labels.len(),
            });
        }
        for (i, row) in samples.iter().enumerate() {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        row: i + 1,
                        column: j + 1,
                    });
                }
            }
        }
        for &l in &labels {
            if l > 1 {
                return Err(Error::invalid(format!("label {l} is not binary")));
            }
        }
        Ok(Self {
            samples,
            labels,
            feature_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.samples.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.samples[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.samples.iter().map(|r| r[j]).collect()
    }

    /// Indices of rows carrying the given label, in row order.
    pub fn rows_with_label(&self, label: u8) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| self.labels[i] == label).collect()
    }

    /// New dataset holding the given rows (in the given order).
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Self {
            samples: rows.iter().map(|&i| self.samples[i].clone()).collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
        })
    }

    /// New dataset with columns reordered/filtered by `keep` (indices into
    /// the current feature list).
    pub fn select_columns(&self, keep: &[usize]) -> Result<Self> {
        for &j in keep {
            if j >= self.n_features() {
                return Err(Error::invalid(format!("column index {j} out of range")));
            }
        }
        Ok(Self {
            samples: self
                .samples
                .iter()
                .map(|r| keep.iter().map(|&j| r[j]).collect())
                .collect(),
            labels: self.labels.clone(),
            feature_names: keep.iter().map(|&j| self.feature_names[j].clone()).collect(),
        })
    }
}

/// Per-feature min/max from training data; applied to test data with clamping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormStats {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let d = rows[0].len();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for row in rows {
            for j in 0..d {
                min[j] = min[j].min(row[j]);
                max[j] = max[j].max(row[j]);
            }
        }
        Ok(Self { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// Scale one value to [0, 1] with clamping; constant features map to 0.
    pub fn scale(&self, j: usize, value: f64) -> f64 {
        let span = self.max[j] - self.min[j];
        if span <= 0.0 {
            return 0.0;
        }
        ((value - self.min[j]) / span).clamp(0.0, 1.0)
    }
}

/// Min-max normalize a dataset to [0, 1]. When `stats` is absent they are
/// computed from `ds` itself; otherwise they are applied with clamping.
pub fn normalize(ds: &TabularDataset, stats: Option<&NormStats>) -> Result<(TabularDataset, NormStats)> {
    let stats = match stats {
        Some(s) => {
            if s.dim() != ds.n_features() {
                return Err(Error::DimensionMismatch {
                    expected: ds.n_features(),
                    got: s.dim(),
                });
            }
            s.clone()
        }
        None => NormStats::from_rows(ds.rows())?,
    };
    let samples = ds
        .rows()
        .iter()
        .map(|row| (0..row.len()).map(|j| stats.scale(j, row[j])).collect())
        .collect();
    let out = TabularDataset::new(samples, ds.labels().to_vec(), ds.feature_names().to_vec())?;
    Ok((out, stats))
}

/// Load a labeled CSV: UTF-8, comma-delimited, header row, '.' decimals.
/// The label column is removed from the features and binarized: cells equal
/// to `normal_value` become 0, everything else 1.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str, normal_value: &str) -> Result<TabularDataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io {
                path: path.to_path_buf(),
                source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
            },
            _ => Error::Csv(e.to_string()),
        })?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingLabelColumn(label_column.to_owned()))?;

    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        if record.len() != headers.len() {
            return Err(Error::Csv(format!(
                "row {} has {} fields, expected {}",
                row_idx + 1,
                record.len(),
                headers.len()
            )));
        }
        let mut row = Vec::with_capacity(headers.len() - 1);
        for (col_idx, cell) in record.iter().enumerate() {
            if col_idx == label_idx {
                labels.push(u8::from(cell != normal_value));
                continue;
            }
            let value: f64 = cell.trim().parse().map_err(|_| Error::CellParse {
                row: row_idx + 1,
                column: col_idx + 1,
                value: cell.to_owned(),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    row: row_idx + 1,
                    column: col_idx + 1,
                });
            }
            row.push(value);
        }
        samples.push(row);
    }
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    TabularDataset::new(samples, labels, feature_names)
}

/// Write a dataset as CSV with a trailing `label` column. Values round-trip
/// exactly through `load_csv`.
pub fn write_csv(ds: &TabularDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for name in ds.feature_names() {
        out.push_str(name);
        out.push(',');
    }
    out.push_str("label\n");
    for i in 0..ds.n_rows() {
        for v in ds.row(i) {
            let _ = write!(out, "{v},");
        }
        let _ = writeln!(out, "{}", ds.labels()[i]);
    }
    std::fs::write(path, out).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Specification of a synthetic drifting stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub concept_count: usize,
    pub samples_per_concept: usize,
    pub feature_dim: usize,
    pub drift_magnitude: f64,
    pub anomaly_offset: f64,
    pub seed: u64,
}

impl StreamSpec {
    pub fn validate(&self) -> Result<()> {
        if self.concept_count < 2 {
            return Err(Error::invalid("concept_count must be at least 2"));
        }
        if self.samples_per_concept < 20 {
            return Err(Error::invalid("samples_per_concept must be at least 20"));
        }
        if self.feature_dim == 0 {
            return Err(Error::invalid("feature_dim must be positive"));
        }
        if self.drift_magnitude < 0.0 || self.anomaly_offset < 0.0 {
            return Err(Error::invalid("drift_magnitude and anomaly_offset must be nonnegative"));
        }
        Ok(())
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; one draw per call keeps the stream layout simple.
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| standard_normal(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Generate `concept_count` pairs of (normal, anomaly) datasets. Concept i's
/// normals are unit Gaussians centered at `i * drift_magnitude` along a fixed
/// direction; its anomalies sit `anomaly_offset` away from that center along
/// a second fixed direction orthogonal to the drift. Pure function of the
/// spec: equal specs yield bit-identical streams.
pub fn gen_synthetic_stream(spec: &StreamSpec) -> Result<Vec<(TabularDataset, TabularDataset)>> {
    spec.validate()?;
    let d = spec.feature_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let drift_dir = random_unit(&mut rng, d);
    let offset_dir = {
        let raw = random_unit(&mut rng, d);
        let proj: f64 = raw.iter().zip(&drift_dir).map(|(a, b)| a * b).sum();
        let ortho: Vec<f64> = raw
            .iter()
            .zip(&drift_dir)
            .map(|(a, b)| a - proj * b)
            .collect();
        let norm = ortho.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            ortho.into_iter().map(|x| x / norm).collect()
        } else {
            // One-dimensional data has no orthogonal direction.
            drift_dir.clone()
        }
    };

    let feature_names: Vec<String> = (1..=d).map(|j| format!("f{j}")).collect();
    let mut stream = Vec::with_capacity(spec.concept_count);
    for concept in 0..spec.concept_count {
        let shift = concept as f64 * spec.drift_magnitude;
        let gen_block = |extra: Option<&[f64]>, label: u8, rng: &mut ChaCha8Rng| {
            let mut rows = Vec::with_capacity(spec.samples_per_concept);
            for _ in 0..spec.samples_per_concept {
                let mut row = Vec::with_capacity(d);
                for j in 0..d {
                    let mut v = shift * drift_dir[j] + standard_normal(rng);
                    if let Some(extra) = extra {
                        v += extra[j];
                    }
                    row.push(v);
                }
                rows.push(row);
            }
            let labels = vec![label; spec.samples_per_concept];
            TabularDataset::new(rows, labels, feature_names.clone())
        };
        let normals = gen_block(None, 0, &mut rng)?;
        let offset: Vec<f64> = offset_dir.iter().map(|x| x * spec.anomaly_offset).collect();
        let anomalies = gen_block(Some(&offset), 1, &mut rng)?;
        stream.push((normals, anomalies));
    }
    Ok(stream)
}
