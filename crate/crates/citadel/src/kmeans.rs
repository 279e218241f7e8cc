//! Seeded k-means with k-means++ initialization, restarts, and empty-cluster
//! repair. Ties always resolve to the lowest index so runs are reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seeding::sub_seed;

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
}

pub const DEFAULT_RESTARTS: usize = 10;
pub const DEFAULT_MAX_ITERS: usize = 300;
pub const DEFAULT_REL_TOL: f64 = 1e-6;

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest_centroid(row: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0usize;
    let mut best_d = squared_distance(row, &centroids[0]);
    for (c, centroid) in centroids.iter().enumerate().skip(1) {
        let d = squared_distance(row, centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    (best, best_d)
}

fn plus_plus_init(rows: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(rows[rng.gen_range(0..rows.len())].clone());
    let mut dist_sq: Vec<f64> = rows
        .iter()
        .map(|r| squared_distance(r, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = dist_sq.iter().sum();
        let next = if total <= 0.0 {
            // All remaining mass is on existing centroids; fall back to uniform.
            rng.gen_range(0..rows.len())
        } else {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = rows.len() - 1;
            for (i, &d) in dist_sq.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        centroids.push(rows[next].clone());
        for (i, row) in rows.iter().enumerate() {
            let d = squared_distance(row, centroids.last().unwrap());
            if d < dist_sq[i] {
                dist_sq[i] = d;
            }
        }
    }
    centroids
}

fn lloyd(rows: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iters: usize, rel_tol: f64) -> KMeansFit {
    let k = centroids.len();
    let d = rows[0].len();
    let mut assignments = vec![0usize; rows.len()];
    let mut prev_inertia = f64::INFINITY;

    for _ in 0..max_iters {
        let mut inertia = 0.0;
        for (i, row) in rows.iter().enumerate() {
            let (c, dist) = nearest_centroid(row, &centroids);
            assignments[i] = c;
            inertia += dist;
        }

        let mut counts = vec![0usize; k];
        let mut sums = vec![vec![0.0; d]; k];
        for (i, row) in rows.iter().enumerate() {
            let c = assignments[i];
            counts[c] += 1;
            for j in 0..d {
                sums[c][j] += row[j];
            }
        }

        // Repair empty clusters by re-seeding them on the farthest member of
        // the currently largest cluster.
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let largest = (0..k).max_by_key(|&x| (counts[x], usize::MAX - x)).unwrap();
            let mut far_idx = None;
            let mut far_d = -1.0;
            for (i, row) in rows.iter().enumerate() {
                if assignments[i] == largest {
                    let dist = squared_distance(row, &centroids[largest]);
                    if dist > far_d {
                        far_d = dist;
                        far_idx = Some(i);
                    }
                }
            }
            if let Some(i) = far_idx {
                counts[assignments[i]] -= 1;
                for j in 0..d {
                    sums[assignments[i]][j] -= rows[i][j];
                }
                assignments[i] = c;
                counts[c] = 1;
                sums[c] = rows[i].clone();
            }
        }

        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..d {
                    centroids[c][j] = sums[c][j] / counts[c] as f64;
                }
            }
        }

        if prev_inertia.is_finite() {
            let denom = prev_inertia.abs().max(1e-12);
            if (prev_inertia - inertia) / denom < rel_tol {
                break;
            }
        }
        prev_inertia = inertia;
    }

    // Final assignment against the converged centroids.
    let mut inertia = 0.0;
    for (i, row) in rows.iter().enumerate() {
        let (c, dist) = nearest_centroid(row, &centroids);
        assignments[i] = c;
        inertia += dist;
    }
    // The final assignment can re-empty a cluster; repair without another
    // centroid update so every cluster keeps at least one member.
    let mut counts = vec![0usize; k];
    for &a in &assignments {
        counts[a] += 1;
    }
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        let largest = (0..k).max_by_key(|&x| (counts[x], usize::MAX - x)).unwrap();
        let mut far = None;
        let mut far_d = -1.0;
        for (i, row) in rows.iter().enumerate() {
            if assignments[i] == largest && counts[largest] > 1 {
                let dist = squared_distance(row, &centroids[largest]);
                if dist > far_d {
                    far_d = dist;
                    far = Some(i);
                }
            }
        }
        if let Some(i) = far {
            counts[assignments[i]] -= 1;
            assignments[i] = c;
            counts[c] = 1;
            centroids[c] = rows[i].clone();
        }
    }
    KMeansFit {
        centroids,
        assignments,
        inertia,
    }
}

/// Fit k-means with `DEFAULT_RESTARTS` k-means++ restarts; the best fit by
/// (inertia, restart index) wins.
pub fn fit(rows: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeansFit> {
    fit_with(rows, k, seed, DEFAULT_RESTARTS, DEFAULT_MAX_ITERS, DEFAULT_REL_TOL)
}

pub fn fit_with(
    rows: &[Vec<f64>],
    k: usize,
    seed: u64,
    restarts: usize,
    max_iters: usize,
    rel_tol: f64,
) -> Result<KMeansFit> {
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    if rows.len() < k {
        return Err(Error::invalid(format!(
            "k-means needs at least {k} rows, got {}",
            rows.len()
        )));
    }
    let mut best: Option<KMeansFit> = None;
    for restart in 0..restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, "kmeans-restart", restart as u64));
        let init = plus_plus_init(rows, k, &mut rng);
        let fit = lloyd(rows, init, max_iters, rel_tol);
        let better = match &best {
            None => true,
            Some(b) => fit.inertia < b.inertia,
        };
        if better {
            best = Some(fit);
        }
    }
    Ok(best.unwrap())
}
