//! Exact t-SNE for embedding feature columns into the plane. Point counts
//! here are tiny (one point per selected feature), so the quadratic gradient
//! is computed directly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
}

impl TsneParams {
    /// Defaults scaled to the number of embedded points: perplexity
    /// min(10, (k-1)/3), floored at 1 so tiny inputs stay solvable.
    pub fn for_point_count(k: usize) -> Self {
        let perplexity = (((k.saturating_sub(1)) / 3) as f64).min(10.0).max(1.0);
        Self {
            perplexity,
            iterations: 500,
            learning_rate: 100.0,
            early_exaggeration: 4.0,
            exaggeration_iters: 100,
        }
    }
}

fn pairwise_squared(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = points.len();
    let mut d = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let dist: f64 = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[i][j] = dist;
            d[j][i] = dist;
        }
    }
    d
}

/// Conditional probabilities P(j|i) with the bandwidth of each point tuned by
/// binary search until the entropy matches ln(perplexity).
fn conditional_probabilities(dist: &[Vec<f64>], perplexity: f64) -> Vec<Vec<f64>> {
    let k = dist.len();
    let target_entropy = perplexity.ln();
    let mut p = vec![vec![0.0; k]; k];
    for i in 0..k {
        let mut beta = 1.0;
        let mut beta_min = f64::NEG_INFINITY;
        let mut beta_max = f64::INFINITY;
        for _ in 0..64 {
            let mut sum = 0.0;
            for j in 0..k {
                p[i][j] = if i == j { 0.0 } else { (-beta * dist[i][j]).exp() };
                sum += p[i][j];
            }
            let mut entropy = 0.0;
            if sum > 0.0 {
                for j in 0..k {
                    if i != j {
                        p[i][j] /= sum;
                        if p[i][j] > 1e-12 {
                            entropy -= p[i][j] * p[i][j].ln();
                        }
                    }
                }
            }
            let diff = entropy - target_entropy;
            if diff.abs() < 1e-5 {
                break;
            }
            if diff > 0.0 {
                beta_min = beta;
                beta = if beta_max.is_infinite() { beta * 2.0 } else { (beta + beta_max) / 2.0 };
            } else {
                beta_max = beta;
                beta = if beta_min.is_infinite() { beta / 2.0 } else { (beta + beta_min) / 2.0 };
            }
        }
    }
    p
}

/// Embed each point into the plane with exact-gradient t-SNE; deterministic
/// under the seed.
pub fn embed_2d(points: &[Vec<f64>], params: &TsneParams, seed: u64) -> Result<Vec<(f64, f64)>> {
    let k = points.len();
    if k < 2 {
        return Err(Error::invalid("t-SNE needs at least 2 points"));
    }
    if params.perplexity < 1.0 || params.perplexity >= k as f64 {
        return Err(Error::invalid(format!(
            "perplexity {} must be in [1, {k})",
            params.perplexity
        )));
    }

    let dist = pairwise_squared(points);
    let conditional = conditional_probabilities(&dist, params.perplexity);
    let mut joint = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            joint[i][j] = ((conditional[i][j] + conditional[j][i]) / (2.0 * k as f64)).max(1e-12);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gaussian = || -> f64 {
        let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    };
    let mut y: Vec<(f64, f64)> = (0..k).map(|_| (gaussian() * 1e-2, gaussian() * 1e-2)).collect();
    let mut velocity = vec![(0.0, 0.0); k];

    for iter in 0..params.iterations {
        let exaggeration = if iter < params.exaggeration_iters {
            params.early_exaggeration
        } else {
            1.0
        };

        // Student-t similarities in the embedding.
        let mut q_raw = vec![vec![0.0; k]; k];
        let mut q_sum = 0.0;
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    let dx = y[i].0 - y[j].0;
                    let dy = y[i].1 - y[j].1;
                    let w = 1.0 / (1.0 + dx * dx + dy * dy);
                    q_raw[i][j] = w;
                    q_sum += w;
                }
            }
        }

        let momentum = if iter < 250 { 0.5 } else { 0.8 };
        for i in 0..k {
            let mut gx = 0.0;
            let mut gy = 0.0;
            for j in 0..k {
                if i == j {
                    continue;
                }
                let q = (q_raw[i][j] / q_sum).max(1e-12);
                let factor = 4.0 * (exaggeration * joint[i][j] - q) * q_raw[i][j];
                gx += factor * (y[i].0 - y[j].0);
                gy += factor * (y[i].1 - y[j].1);
            }
            velocity[i].0 = momentum * velocity[i].0 - params.learning_rate * gx;
            velocity[i].1 = momentum * velocity[i].1 - params.learning_rate * gy;
        }
        for i in 0..k {
            y[i].0 += velocity[i].0;
            y[i].1 += velocity[i].1;
        }
        // Keep the embedding centered.
        let mx = y.iter().map(|p| p.0).sum::<f64>() / k as f64;
        let my = y.iter().map(|p| p.1).sum::<f64>() / k as f64;
        for p in y.iter_mut() {
            p.0 -= mx;
            p.1 -= my;
        }
    }
    Ok(y)
}
