//! Feature selection: rank features by summed absolute PCA loadings over the
//! components that cover the requested explained-variance share, then retain
//! the top k.

use serde::{Deserialize, Serialize};

use crate::data::TabularDataset;
use crate::error::{Error, Result};

/// Principal components of the benign training data.
///
/// Component rows are orthonormal and sign-canonicalized (largest-magnitude
/// entry positive) so serialized models are reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaModel {
    /// M x d loading matrix; row j holds the loadings of component j.
    pub components: Vec<Vec<f64>>,
    /// Share of total variance explained by each retained component,
    /// non-increasing.
    pub explained_variance_ratio: Vec<f64>,
    /// Eigenvalues of the retained components (sample covariance, divisor n-1).
    pub eigenvalues: Vec<f64>,
    /// Per-feature training mean.
    pub mean: Vec<f64>,
}

/// Ranking scores and the descending order they induce; ties break toward the
/// lower feature index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub scores: Vec<f64>,
    pub order: Vec<usize>,
}

impl FeatureRanking {
    /// CSV export: feature_name, score, rank.
    pub fn to_csv_string(&self, feature_names: &[String]) -> String {
        let mut out = String::from("feature_name,score,rank\n");
        for (rank, &idx) in self.order.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", feature_names[idx], self.scores[idx], rank + 1));
        }
        out
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// (eigenvalues, eigenvectors-as-rows), unsorted.
fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let scale: f64 = (0..n).map(|i| a[i][i].abs()).sum::<f64>().max(1e-300);

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off.sqrt() <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                let app = a[p][p];
                let aqq = a[q][q];
                a[p][p] = app - t * apq;
                a[q][q] = aqq + t * apq;
                a[p][q] = 0.0;
                a[q][p] = 0.0;
                for i in 0..n {
                    if i != p && i != q {
                        let aip = a[i][p];
                        let aiq = a[i][q];
                        a[i][p] = c * aip - s * aiq;
                        a[p][i] = a[i][p];
                        a[i][q] = s * aip + c * aiq;
                        a[q][i] = a[i][q];
                    }
                }
                for row in v.iter_mut() {
                    let vip = row[p];
                    let viq = row[q];
                    row[p] = c * vip - s * viq;
                    row[q] = s * vip + c * viq;
                }
            }
        }
    }

    let eigenvalues: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    let eigenvectors: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| v[i][j]).collect())
        .collect();
    (eigenvalues, eigenvectors)
}

fn sample_covariance(ds: &TabularDataset) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = ds.n_rows();
    let d = ds.n_features();
    let mut mean = vec![0.0; d];
    for row in ds.rows() {
        for j in 0..d {
            mean[j] += row[j];
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut cov = vec![vec![0.0; d]; d];
    for row in ds.rows() {
        for j in 0..d {
            let dj = row[j] - mean[j];
            for l in j..d {
                cov[j][l] += dj * (row[l] - mean[l]);
            }
        }
    }
    let denom = (n - 1) as f64;
    for j in 0..d {
        for l in j..d {
            cov[j][l] /= denom;
            cov[l][j] = cov[j][l];
        }
    }
    (mean, cov)
}

/// Fit PCA on benign training rows and rank every feature by the sum of its
/// absolute loadings over the components that cumulatively explain at least
/// `variance_threshold` of the variance.
pub fn rank_features(
    train_normals: &TabularDataset,
    variance_threshold: f64,
) -> Result<(PcaModel, FeatureRanking)> {
    if !(0.0 < variance_threshold && variance_threshold <= 1.0) {
        return Err(Error::invalid("variance_threshold must be in (0, 1]"));
    }
    if train_normals.n_rows() < 2 {
        return Err(Error::invalid("pca needs at least 2 samples"));
    }
    if train_normals.labels().iter().any(|&l| l != 0) {
        return Err(Error::invalid("feature ranking is fit on benign rows only"));
    }

    let d = train_normals.n_features();
    let (mean, cov) = sample_covariance(train_normals);
    let total_variance: f64 = (0..d).map(|j| cov[j][j]).sum();
    if total_variance <= 1e-18 {
        return Err(Error::invalid("zero-variance dataset: all rows are identical"));
    }

    let (raw_values, raw_vectors) = jacobi_eigen(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| raw_values[b].partial_cmp(&raw_values[a]).unwrap().then(a.cmp(&b)));

    let eigenvalues: Vec<f64> = order.iter().map(|&i| raw_values[i].max(0.0)).collect();
    let mut components: Vec<Vec<f64>> = order.iter().map(|&i| raw_vectors[i].clone()).collect();
    for comp in components.iter_mut() {
        let lead = comp
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| {
                a.abs()
                    .partial_cmp(&b.abs())
                    .unwrap()
                    .then(ib.cmp(ia))
            })
            .map(|(_, &v)| v)
            .unwrap_or(1.0);
        if lead < 0.0 {
            for x in comp.iter_mut() {
                *x = -*x;
            }
        }
    }

    let lambda_sum: f64 = eigenvalues.iter().sum();
    let ratios: Vec<f64> = eigenvalues.iter().map(|&l| l / lambda_sum).collect();
    let mut retained = d;
    let mut cumulative = 0.0;
    for (m, &r) in ratios.iter().enumerate() {
        cumulative += r;
        if cumulative >= variance_threshold {
            retained = m + 1;
            break;
        }
    }

    components.truncate(retained);
    let explained_variance_ratio = ratios[..retained].to_vec();
    let eigenvalues = eigenvalues[..retained].to_vec();

    let mut scores = vec![0.0; d];
    for comp in &components {
        for (j, &a) in comp.iter().enumerate() {
            scores[j] += a.abs();
        }
    }
    let mut rank_order: Vec<usize> = (0..d).collect();
    rank_order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));

    Ok((
        PcaModel {
            components,
            explained_variance_ratio,
            eigenvalues,
            mean,
        },
        FeatureRanking {
            scores,
            order: rank_order,
        },
    ))
}

/// Keep the k highest-ranked features, columns ordered by rank.
pub fn select_top_k(ds: &TabularDataset, ranking: &FeatureRanking, k: usize) -> Result<TabularDataset> {
    let d = ds.n_features();
    if ranking.order.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: ranking.order.len(),
        });
    }
    if k == 0 || k > d {
        return Err(Error::invalid(format!("k must be in [1, {d}], got {k}")));
    }
    ds.select_columns(&ranking.order[..k])
}
