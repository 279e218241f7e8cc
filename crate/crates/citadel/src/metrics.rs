//! Detection and lifelong-learning metrics.
//!
//! PR-AUC is computed as step-wise average precision (no interpolation) so
//! that independent implementations agree bit-for-bit. The lifelong metrics
//! reduce a result matrix R, where R[i][j] is the PR-AUC on task j's test set
//! after training through task i.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Average precision over anomaly scores (higher = more anomalous).
/// Ties are broken by ascending sample index so the staircase is unique.
pub fn pr_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::invalid("pr_auc needs at least one positive and one negative label"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));

    let mut ap = 0.0;
    let mut true_pos = 0usize;
    for (rank, &idx) in order.iter().enumerate() {
        if labels[idx] == 1 {
            true_pos += 1;
            let precision = true_pos as f64 / (rank + 1) as f64;
            // Each positive advances recall by exactly 1/positives.
            ap += precision / positives as f64;
        }
    }
    Ok(ap)
}

/// c x c grid of per-task PR-AUC scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultMatrix {
    c: usize,
    values: Vec<f64>,
}

impl ResultMatrix {
    pub fn new(c: usize) -> Result<Self> {
        if c == 0 {
            return Err(Error::invalid("result matrix needs at least one task"));
        }
        Ok(Self {
            c,
            values: vec![0.0; c * c],
        })
    }

    pub fn from_values(c: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != c * c {
            return Err(Error::DimensionMismatch {
                expected: c * c,
                got: values.len(),
            });
        }
        for &v in &values {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("result entry {v} outside [0, 1]")));
            }
        }
        Ok(Self { c, values })
    }

    pub fn task_count(&self) -> usize {
        self.c
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.c + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.c + j] = v;
    }

    /// Mean PR-AUC over all (step, past-or-current task) pairs: the lower
    /// triangle including the diagonal.
    pub fn ll_pr_auc(&self) -> f64 {
        let c = self.c;
        let mut sum = 0.0;
        for i in 0..c {
            for j in 0..=i {
                sum += self.get(i, j);
            }
        }
        sum * 2.0 / (c * (c + 1)) as f64
    }

    /// Backward transfer: mean over i > j of R[i][j] - R[j][j]. Positive
    /// values mean later learning improved earlier tasks.
    pub fn bwt(&self) -> Result<f64> {
        let c = self.c;
        if c < 2 {
            return Err(Error::invalid("bwt needs at least two tasks"));
        }
        let mut sum = 0.0;
        for i in 1..c {
            for j in 0..i {
                sum += self.get(i, j) - self.get(j, j);
            }
        }
        Ok(sum * 2.0 / (c * (c - 1)) as f64)
    }

    /// Forward transfer: mean of the strict upper triangle.
    pub fn fwt(&self) -> Result<f64> {
        let c = self.c;
        if c < 2 {
            return Err(Error::invalid("fwt needs at least two tasks"));
        }
        let mut sum = 0.0;
        for i in 0..c {
            for j in (i + 1)..c {
                sum += self.get(i, j);
            }
        }
        Ok(sum * 2.0 / (c * (c - 1)) as f64)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for i in 0..self.c {
            for j in 0..self.c {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", self.get(i, j));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_csv_string()).map_err(|e| Error::Io {
            path: path.as_ref().to_path_buf(),
            source: e,
        })
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::Io {
            path: path.as_ref().to_path_buf(),
            source: e,
        })?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut row = Vec::new();
            for (j, cell) in line.split(',').enumerate() {
                let v: f64 = cell.trim().parse().map_err(|_| Error::CellParse {
                    row: i + 1,
                    column: j + 1,
                    value: cell.to_owned(),
                })?;
                row.push(v);
            }
            rows.push(row);
        }
        let c = rows.len();
        if c == 0 {
            return Err(Error::EmptyDataset);
        }
        for row in &rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    expected: c,
                    got: row.len(),
                });
            }
        }
        Self::from_values(c, rows.into_iter().flatten().collect())
    }
}

/// Summary emitted as `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ll_pr_auc: f64,
    pub bwt: f64,
    pub fwt: f64,
    pub c: usize,
}

impl MetricsReport {
    pub fn from_matrix(r: &ResultMatrix) -> Result<Self> {
        Ok(Self {
            ll_pr_auc: r.ll_pr_auc(),
            bwt: r.bwt()?,
            fwt: r.fwt()?,
            c: r.task_count(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pr_auc_perfect_separation_is_one() {
        let scores = [9.0, 8.0, 7.0, 1.0, 0.5];
        let labels = [1, 1, 1, 0, 0];
        assert_eq!(pr_auc(&scores, &labels).unwrap(), 1.0);
    }

    #[test]
    fn pr_auc_interleaved_fixture() {
        // Hand-enumerated staircase: 1/2 * 1 + 1/2 * 2/3 = 0.8333...
        let scores = [0.9, 0.8, 0.7, 0.6];
        let labels = [1, 0, 1, 0];
        let ap = pr_auc(&scores, &labels).unwrap();
        assert!((ap - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn pr_auc_rejects_single_class() {
        assert!(pr_auc(&[0.1, 0.2], &[1, 1]).is_err());
        assert!(pr_auc(&[0.1, 0.2], &[0, 0]).is_err());
    }

    #[test]
    fn ll_pr_auc_constant_matrix() {
        let r = ResultMatrix::from_values(3, vec![0.8; 9]).unwrap();
        assert!((r.ll_pr_auc() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn ll_pr_auc_two_task_fixture() {
        let mut r = ResultMatrix::new(2).unwrap();
        r.set(0, 0, 0.9);
        r.set(1, 0, 0.8);
        r.set(1, 1, 0.7);
        assert!((r.ll_pr_auc() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn bwt_fixtures() {
        let mut r = ResultMatrix::new(2).unwrap();
        r.set(0, 0, 0.9);
        r.set(1, 0, 0.8);
        assert!((r.bwt().unwrap() + 0.1).abs() < 1e-15);

        let mut r = ResultMatrix::new(3).unwrap();
        r.set(0, 0, 0.9);
        r.set(1, 1, 0.8);
        r.set(1, 0, 0.7);
        r.set(2, 0, 0.6);
        r.set(2, 1, 0.7);
        assert!((r.bwt().unwrap() + 0.2).abs() < 1e-15);
    }

    #[test]
    fn bwt_zero_when_rows_repeat_diagonal() {
        let mut r = ResultMatrix::new(4).unwrap();
        let diag = [0.9, 0.6, 0.75, 0.4];
        for i in 0..4 {
            for j in 0..4 {
                r.set(i, j, diag[j]);
            }
        }
        assert_eq!(r.bwt().unwrap(), 0.0);
    }

    #[test]
    fn fwt_fixtures() {
        let mut r = ResultMatrix::new(2).unwrap();
        r.set(0, 1, 0.6);
        assert!((r.fwt().unwrap() - 0.6).abs() < 1e-15);

        let mut r = ResultMatrix::new(3).unwrap();
        r.set(0, 1, 0.5);
        r.set(0, 2, 0.4);
        r.set(1, 2, 0.6);
        assert!((r.fwt().unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn matrix_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let r = ResultMatrix::from_values(3, (0..9).map(|i| i as f64 / 10.0).collect()).unwrap();
        r.write_csv(&path).unwrap();
        assert_eq!(ResultMatrix::read_csv(&path).unwrap(), r);
    }

    proptest! {
        // Any strictly monotone transform of the scores leaves AP unchanged.
        #[test]
        fn pr_auc_invariant_under_monotone_transform(
            scores in proptest::collection::vec(-50.0f64..50.0, 5..40),
            flips in proptest::collection::vec(any::<bool>(), 5..40),
        ) {
            let n = scores.len().min(flips.len());
            let scores = &scores[..n];
            let labels: Vec<u8> = flips[..n].iter().map(|&b| b as u8).collect();
            prop_assume!(labels.iter().any(|&l| l == 1) && labels.iter().any(|&l| l == 0));
            let base = pr_auc(scores, &labels).unwrap();
            let transformed: Vec<f64> = scores.iter().map(|s| (s * 0.1).exp() + 3.0).collect();
            let mapped = pr_auc(&transformed, &labels).unwrap();
            prop_assert!((base - mapped).abs() < 1e-12);
        }
    }

    #[test]
    fn random_scores_on_balanced_labels_concentrate_near_half() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut total = 0.0;
        let trials = 200;
        for _ in 0..trials {
            let scores: Vec<f64> = (0..120).map(|_| rng.gen::<f64>()).collect();
            let labels: Vec<u8> = (0..120).map(|i| (i % 2) as u8).collect();
            total += pr_auc(&scores, &labels).unwrap();
        }
        let mean = total / trials as f64;
        assert!((mean - 0.5).abs() < 0.05, "mean AP {mean}");
    }
}
