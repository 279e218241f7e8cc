//! Local Outlier Factor in novelty mode: the reference set is the benign
//! training latents only, and queries never join the neighborhood graph.
//! Scores near 1 mean inlier; larger means more anomalous.

use crate::error::{Error, Result};

/// Distances are floored here so duplicate points keep reachability densities
/// finite.
pub const DISTANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LofModel {
    refs: Vec<Vec<f64>>,
    n_neighbors: usize,
    threshold: f64,
    k_distance: Vec<f64>,
    reference_lrd: Vec<f64>,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
        .max(DISTANCE_FLOOR)
}

/// Neighborhood of a point: every index whose distance is within the
/// k-distance (so ties are all included).
fn neighborhood(dists: &[f64], skip: Option<usize>, k: usize) -> (f64, Vec<usize>) {
    let mut order: Vec<usize> = (0..dists.len()).filter(|&i| Some(i) != skip).collect();
    order.sort_by(|&a, &b| dists[a].partial_cmp(&dists[b]).unwrap().then(a.cmp(&b)));
    let k_dist = dists[order[k - 1]];
    let members = order.into_iter().filter(|&i| dists[i] <= k_dist).collect();
    (k_dist, members)
}

/// Fit LOF on benign latents: precompute each reference point's k-distance
/// and local reachability density.
pub fn fit_lof(latents: &[Vec<f64>], n_neighbors: usize, threshold: f64) -> Result<LofModel> {
    if n_neighbors == 0 {
        return Err(Error::invalid("n_neighbors must be positive"));
    }
    if latents.len() <= n_neighbors {
        return Err(Error::invalid(format!(
            "LOF needs more than {n_neighbors} reference points, got {}",
            latents.len()
        )));
    }
    if threshold <= 0.0 {
        return Err(Error::invalid("threshold must be positive"));
    }
    let n = latents.len();
    let mut dist = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean(&latents[i], &latents[j]);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }

    let mut k_distance = vec![0.0; n];
    let mut neighbor_sets: Vec<Vec<usize>> = Vec::with_capacity(n);
    for i in 0..n {
        let (kd, members) = neighborhood(&dist[i], Some(i), n_neighbors);
        k_distance[i] = kd;
        neighbor_sets.push(members);
    }

    let mut reference_lrd = vec![0.0; n];
    for i in 0..n {
        let reach_sum: f64 = neighbor_sets[i]
            .iter()
            .map(|&j| dist[i][j].max(k_distance[j]))
            .sum();
        reference_lrd[i] = neighbor_sets[i].len() as f64 / reach_sum;
    }

    Ok(LofModel {
        refs: latents.to_vec(),
        n_neighbors,
        threshold,
        k_distance,
        reference_lrd,
    })
}

impl LofModel {
    pub fn n_neighbors(&self) -> usize {
        self.n_neighbors
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn reference_len(&self) -> usize {
        self.refs.len()
    }

    /// LOF score of a query point: mean reference-neighbor density divided by
    /// the query's own reachability density.
    pub fn score(&self, x: &[f64]) -> f64 {
        let dists: Vec<f64> = self.refs.iter().map(|r| euclidean(x, r)).collect();
        let (_, members) = neighborhood(&dists, None, self.n_neighbors);
        let reach_sum: f64 = members
            .iter()
            .map(|&j| dists[j].max(self.k_distance[j]))
            .sum();
        let lrd_x = members.len() as f64 / reach_sum;
        let mean_neighbor_lrd: f64 =
            members.iter().map(|&j| self.reference_lrd[j]).sum::<f64>() / members.len() as f64;
        mean_neighbor_lrd / lrd_x
    }

    /// 1 when the score exceeds the decision threshold.
    pub fn classify(&self, x: &[f64]) -> u8 {
        u8::from(self.score(x) > self.threshold)
    }
}
