//! Strategic forgetting and sampling: box-constrained KL minimization over
//! per-sample weights, solved by projected gradient descent.
//!
//! Forgetting searches weights for the buffer so that the weighted buffer
//! histogram tracks the incoming distribution, then drops the quota of
//! lowest-weight samples. Sampling searches weights for the incoming samples
//! so that the even mixture of buffer and weighted-new histograms tracks the
//! incoming distribution, then admits the quota of highest-weight samples.

use crate::error::{Error, Result};
use crate::memory::hist::{bin_index, kl_pure, smooth_norm, union_edges, KL_EPS};
use crate::memory::TempBuffer;

/// Role of an optimized weight vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightRole {
    Forgetting,
    Sampling,
}

/// Per-sample weights in [0, 1] over the weighted population.
#[derive(Debug, Clone)]
pub struct WeightVector {
    pub values: Vec<f64>,
    pub role: WeightRole,
}

pub const PGD_INIT_STEP: f64 = 0.05;
pub const PGD_MAX_ITERS: usize = 500;
pub const PGD_STOP_TOL: f64 = 1e-6;

/// Projected gradient descent over the unit box. The step is halved whenever
/// it would increase the objective, so the recorded history is non-increasing.
fn projected_gradient_descent(
    objective: &dyn Fn(&[f64]) -> f64,
    gradient: &dyn Fn(&[f64]) -> Vec<f64>,
    mut w: Vec<f64>,
) -> (Vec<f64>, Vec<f64>) {
    let mut history = vec![objective(&w)];
    let mut step = PGD_INIT_STEP;
    for _ in 0..PGD_MAX_ITERS {
        let g = gradient(&w);
        let mut accepted = None;
        while step > 1e-12 {
            let candidate: Vec<f64> = w
                .iter()
                .zip(&g)
                .map(|(wi, gi)| (wi - step * gi).clamp(0.0, 1.0))
                .collect();
            let value = objective(&candidate);
            if value <= *history.last().unwrap() {
                accepted = Some((candidate, value));
                break;
            }
            step *= 0.5;
        }
        let Some((candidate, value)) = accepted else {
            break;
        };
        let improvement = history.last().unwrap() - value;
        w = candidate;
        history.push(value);
        if improvement < PGD_STOP_TOL {
            break;
        }
    }
    (w, history)
}

/// Bin assignments of every row in every feature, plus the smoothed target
/// distribution of the incoming data.
struct BinnedProblem {
    /// bins_of[i][j]: bin of row i in feature j.
    bins_of: Vec<Vec<usize>>,
    /// target[j]: smoothed, normalized histogram of the incoming data.
    target: Vec<Vec<f64>>,
    bins: usize,
    dims: usize,
}

impl BinnedProblem {
    fn build(weighted_rows: &[Vec<f64>], new_rows: &[Vec<f64>], edges: &[Vec<f64>]) -> Self {
        let dims = edges.len();
        let bins = edges[0].len() - 1;
        let bins_of = weighted_rows
            .iter()
            .map(|row| (0..dims).map(|j| bin_index(&edges[j], row[j])).collect())
            .collect();
        let mut target = Vec::with_capacity(dims);
        for j in 0..dims {
            let mut counts = vec![0.0; bins];
            for row in new_rows {
                counts[bin_index(&edges[j], row[j])] += 1.0;
            }
            target.push(smooth_norm(&counts, KL_EPS));
        }
        Self {
            bins_of,
            target,
            bins,
            dims,
        }
    }

    /// Raw weighted masses per feature for the weighted population.
    fn weighted_masses(&self, w: &[f64]) -> Vec<Vec<f64>> {
        let mut masses = vec![vec![0.0; self.bins]; self.dims];
        for (i, row_bins) in self.bins_of.iter().enumerate() {
            for (j, &t) in row_bins.iter().enumerate() {
                masses[j][t] += w[i];
            }
        }
        masses
    }
}

/// Forgetting objective: sum over features of KL(new || weighted buffer),
/// both histograms eps-smoothed and normalized. Exposed so that exhaustive
/// search oracles can score the same function.
pub fn forgetting_objective(
    buffer_rows: &[Vec<f64>],
    new_rows: &[Vec<f64>],
    edges: &[Vec<f64>],
    weights: &[f64],
) -> f64 {
    let problem = BinnedProblem::build(buffer_rows, new_rows, edges);
    forgetting_objective_inner(&problem, weights)
}

fn forgetting_objective_inner(problem: &BinnedProblem, w: &[f64]) -> f64 {
    let masses = problem.weighted_masses(w);
    (0..problem.dims)
        .map(|j| kl_pure(&problem.target[j], &smooth_norm(&masses[j], KL_EPS)))
        .sum()
}

fn forgetting_gradient(problem: &BinnedProblem, w: &[f64]) -> Vec<f64> {
    let masses = problem.weighted_masses(w);
    let total: f64 = w.iter().sum::<f64>() + KL_EPS * problem.bins as f64;
    let mut grad = vec![0.0; w.len()];
    // d/dw_i KL_j = -P[j][t_ij] / (M[j][t_ij] + eps) + 1 / total.
    let base = problem.dims as f64 / total;
    for (i, row_bins) in problem.bins_of.iter().enumerate() {
        let mut g = base;
        for (j, &t) in row_bins.iter().enumerate() {
            g -= problem.target[j][t] / (masses[j][t] + KL_EPS);
        }
        grad[i] = g;
    }
    grad
}

#[derive(Debug, Clone)]
pub struct ForgettingOutcome {
    pub weights: WeightVector,
    /// Indices (into the pre-removal buffer) of the dropped samples, ascending.
    pub dropped: Vec<usize>,
    /// Objective value after every accepted optimizer step, non-increasing.
    pub objective_history: Vec<f64>,
}

/// Optimize forgetting weights over the buffer, then remove exactly `quota`
/// samples: all with weight below 0.5, padded or truncated to the quota by
/// ascending weight (ties toward the lower index).
pub fn strategic_forget(
    temp: &mut TempBuffer,
    new_rows: &[Vec<f64>],
    bins: usize,
    quota: usize,
) -> Result<ForgettingOutcome> {
    if new_rows.is_empty() {
        return Err(Error::invalid("forgetting needs non-empty incoming data"));
    }
    if quota == 0 {
        return Err(Error::invalid("forgetting quota must be positive"));
    }
    if quota >= temp.len() {
        return Err(Error::invalid(format!(
            "forgetting quota {quota} must be smaller than the buffer ({} entries)",
            temp.len()
        )));
    }
    let edges = union_edges(temp.rows(), new_rows, bins)?;
    let problem = BinnedProblem::build(temp.rows(), new_rows, &edges);

    let start = vec![1.0; temp.len()];
    let (weights, history) = projected_gradient_descent(
        &|w| forgetting_objective_inner(&problem, w),
        &|w| forgetting_gradient(&problem, w),
        start,
    );

    let mut by_weight: Vec<usize> = (0..weights.len()).collect();
    by_weight.sort_by(|&a, &b| weights[a].partial_cmp(&weights[b]).unwrap().then(a.cmp(&b)));
    let mut dropped: Vec<usize> = by_weight[..quota].to_vec();
    dropped.sort_unstable();
    temp.remove_indices(&dropped);

    Ok(ForgettingOutcome {
        weights: WeightVector {
            values: weights,
            role: WeightRole::Forgetting,
        },
        dropped,
        objective_history: history,
    })
}

/// Sampling objective: sum over features of KL(new || mixture), where the
/// mixture is the even average of the smoothed buffer histogram and the
/// smoothed weighted histogram of the incoming data.
pub fn sampling_objective(
    buffer_rows: &[Vec<f64>],
    new_rows: &[Vec<f64>],
    edges: &[Vec<f64>],
    weights: &[f64],
) -> f64 {
    let problem = BinnedProblem::build(new_rows, new_rows, edges);
    let buffer_hist = buffer_histograms(buffer_rows, edges);
    sampling_objective_inner(&problem, &buffer_hist, weights)
}

fn buffer_histograms(buffer_rows: &[Vec<f64>], edges: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dims = edges.len();
    let bins = edges[0].len() - 1;
    let mut hists = Vec::with_capacity(dims);
    for j in 0..dims {
        let mut counts = vec![0.0; bins];
        for row in buffer_rows {
            counts[bin_index(&edges[j], row[j])] += 1.0;
        }
        hists.push(smooth_norm(&counts, KL_EPS));
    }
    hists
}

fn sampling_mixture(problem: &BinnedProblem, buffer_hist: &[Vec<f64>], w: &[f64]) -> Vec<Vec<f64>> {
    let masses = problem.weighted_masses(w);
    (0..problem.dims)
        .map(|j| {
            let weighted = smooth_norm(&masses[j], KL_EPS);
            buffer_hist[j]
                .iter()
                .zip(&weighted)
                .map(|(&a, &b)| 0.5 * (a + b))
                .collect()
        })
        .collect()
}

fn sampling_objective_inner(problem: &BinnedProblem, buffer_hist: &[Vec<f64>], w: &[f64]) -> f64 {
    let mixture = sampling_mixture(problem, buffer_hist, w);
    (0..problem.dims)
        .map(|j| kl_pure(&problem.target[j], &mixture[j]))
        .sum()
}

fn sampling_gradient(problem: &BinnedProblem, buffer_hist: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let masses = problem.weighted_masses(w);
    let total: f64 = w.iter().sum::<f64>() + KL_EPS * problem.bins as f64;
    let mixture = sampling_mixture(problem, buffer_hist, w);

    // Per feature: r[j] = sum_t P[j][t] * Nhat[j][t] / mix[j][t], where
    // Nhat is the smoothed weighted-new histogram.
    let mut r = vec![0.0; problem.dims];
    let mut nhat = Vec::with_capacity(problem.dims);
    for j in 0..problem.dims {
        let weighted = smooth_norm(&masses[j], KL_EPS);
        r[j] = (0..problem.bins)
            .map(|t| problem.target[j][t] * weighted[t] / mixture[j][t])
            .sum();
        nhat.push(weighted);
    }

    let scale = 0.5 / total;
    let mut grad = vec![0.0; w.len()];
    for (i, row_bins) in problem.bins_of.iter().enumerate() {
        let mut g = 0.0;
        for (j, &t) in row_bins.iter().enumerate() {
            g -= scale * (problem.target[j][t] / mixture[j][t] - r[j]);
        }
        grad[i] = g;
    }
    grad
}

#[derive(Debug, Clone)]
pub struct SamplingOutcome {
    pub weights: WeightVector,
    /// Indices (into the incoming batch) of the admitted samples, ascending.
    pub selected: Vec<usize>,
    pub objective_history: Vec<f64>,
}

/// Optimize sampling weights over the incoming batch, then append exactly
/// `quota` samples with the largest weights (ties toward the lower index).
pub fn strategic_sample(
    temp: &mut TempBuffer,
    new_rows: &[Vec<f64>],
    bins: usize,
    quota: usize,
) -> Result<SamplingOutcome> {
    if quota == 0 {
        return Err(Error::invalid("sampling quota must be positive"));
    }
    if quota > new_rows.len() {
        return Err(Error::invalid(format!(
            "sampling quota {quota} exceeds the incoming batch ({} samples)",
            new_rows.len()
        )));
    }
    if temp.is_empty() {
        return Err(Error::invalid("sampling needs a non-empty buffer"));
    }
    let edges = union_edges(temp.rows(), new_rows, bins)?;
    let problem = BinnedProblem::build(new_rows, new_rows, &edges);
    let buffer_hist = buffer_histograms(temp.rows(), &edges);

    let start = vec![0.5; new_rows.len()];
    let (weights, history) = projected_gradient_descent(
        &|w| sampling_objective_inner(&problem, &buffer_hist, w),
        &|w| sampling_gradient(&problem, &buffer_hist, w),
        start,
    );

    let mut by_weight: Vec<usize> = (0..weights.len()).collect();
    by_weight.sort_by(|&a, &b| {
        weights[b]
            .partial_cmp(&weights[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut selected: Vec<usize> = by_weight[..quota].to_vec();
    selected.sort_unstable();
    for &i in &selected {
        temp.push(new_rows[i].clone());
    }

    Ok(SamplingOutcome {
        weights: WeightVector {
            values: weights,
            role: WeightRole::Sampling,
        },
        selected,
        objective_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive grid search over {0, 0.1, ..., 1}^n; the independent oracle
    /// for optimizer quality on tiny instances.
    pub(crate) fn grid_search_minimum(n: usize, objective: &dyn Fn(&[f64]) -> f64) -> f64 {
        let mut w = vec![0.0; n];
        let mut best = f64::INFINITY;
        let levels = 11usize;
        let total = levels.pow(n as u32);
        for code in 0..total {
            let mut c = code;
            for wi in w.iter_mut() {
                *wi = (c % levels) as f64 / 10.0;
                c /= levels;
            }
            best = best.min(objective(&w));
        }
        best
    }

    #[test]
    fn forgetting_drops_the_overrepresented_bin() {
        // Buffer [0, 0, 0, 1] on two equal-width bins; incoming data is
        // uniform over the bins; quota 1 must drop a bin-0 sample (lowest
        // index on ties) and bring the histogram strictly closer to uniform.
        let mut temp = TempBuffer::from_rows(vec![vec![0.0], vec![0.0], vec![0.0], vec![1.0]]);
        let new_rows = vec![vec![0.25], vec![0.75]];
        let outcome = strategic_forget(&mut temp, &new_rows, 2, 1).unwrap();
        assert_eq!(outcome.dropped, vec![0]);
        assert_eq!(temp.len(), 3);

        let edges = union_edges(temp.rows(), &new_rows, 2).unwrap();
        let after = forgetting_objective(temp.rows(), &new_rows, &edges, &vec![1.0; 3]);
        let before = forgetting_objective(
            &[vec![0.0], vec![0.0], vec![0.0], vec![1.0]],
            &new_rows,
            &edges,
            &vec![1.0; 4],
        );
        assert!(after < before, "{after} !< {before}");

        // Optimizer lands near the exhaustive grid optimum. The absolute term
        // covers instances whose optimum is exactly zero: the 1e-6 stopping
        // tolerance leaves a residual of that order above it.
        let buffer = vec![vec![0.0], vec![0.0], vec![0.0], vec![1.0]];
        let oracle = grid_search_minimum(4, &|w| forgetting_objective(&buffer, &new_rows, &edges, w));
        let achieved = *outcome.objective_history.last().unwrap();
        assert!(achieved <= oracle.max(0.0) * 1.05 + 1e-4, "{achieved} vs oracle {oracle}");
    }

    #[test]
    fn forgetting_with_matching_distributions_keeps_all_ones() {
        // Incoming distribution equals the buffer distribution, so the
        // all-ones start is already optimal and the quota falls back to the
        // lowest indices.
        let buffer = vec![vec![0.1], vec![0.9], vec![0.1], vec![0.9]];
        let new_rows = vec![vec![0.2], vec![0.8]];
        let mut temp = TempBuffer::from_rows(buffer.clone());
        let outcome = strategic_forget(&mut temp, &new_rows, 2, 2).unwrap();
        assert_eq!(outcome.dropped, vec![0, 1]);

        let edges = union_edges(&buffer, &new_rows, 2).unwrap();
        let oracle = grid_search_minimum(4, &|w| forgetting_objective(&buffer, &new_rows, &edges, w));
        let at_ones = forgetting_objective(&buffer, &new_rows, &edges, &vec![1.0; 4]);
        assert!(at_ones <= oracle + 1e-6, "all-ones {at_ones} vs grid {oracle}");
        let achieved = *outcome.objective_history.last().unwrap();
        assert!(achieved <= at_ones + 1e-12);
    }

    #[test]
    fn forgetting_quota_must_leave_the_buffer_non_empty() {
        let mut temp = TempBuffer::from_rows(vec![vec![0.0], vec![1.0]]);
        assert!(strategic_forget(&mut temp, &[vec![0.5]], 2, 2).is_err());
    }

    #[test]
    fn sampling_picks_the_missing_bin() {
        // Buffer concentrated in bin 0; incoming has both bins; the single
        // admitted sample must come from bin 1.
        let mut temp = TempBuffer::from_rows(vec![vec![0.1], vec![0.2], vec![0.15]]);
        let new_rows = vec![vec![0.1], vec![0.9], vec![0.2]];
        let outcome = strategic_sample(&mut temp, &new_rows, 2, 1).unwrap();
        assert_eq!(outcome.selected, vec![1]);
        assert_eq!(temp.len(), 4);
        assert_eq!(temp.rows().last().unwrap(), &vec![0.9]);

        let edges = union_edges(&[vec![0.1], vec![0.2], vec![0.15]], &new_rows, 2).unwrap();
        let buffer = vec![vec![0.1], vec![0.2], vec![0.15]];
        let oracle = grid_search_minimum(3, &|w| sampling_objective(&buffer, &new_rows, &edges, w));
        let achieved = *outcome.objective_history.last().unwrap();
        assert!(achieved <= oracle.max(0.0) * 1.05 + 1e-4, "{achieved} vs oracle {oracle}");
    }

    #[test]
    fn sampling_quota_equal_to_batch_admits_everything() {
        let mut temp = TempBuffer::from_rows(vec![vec![0.5], vec![0.6]]);
        let new_rows = vec![vec![0.1], vec![0.9], vec![0.4]];
        let outcome = strategic_sample(&mut temp, &new_rows, 2, 3).unwrap();
        assert_eq!(outcome.selected, vec![0, 1, 2]);
        assert_eq!(temp.len(), 5);
    }

    #[test]
    fn sampling_single_candidate_is_forced() {
        let mut temp = TempBuffer::from_rows(vec![vec![0.5]]);
        let outcome = strategic_sample(&mut temp, &[vec![0.9]], 2, 1).unwrap();
        assert_eq!(outcome.selected, vec![0]);
    }

    #[test]
    fn sampling_rejects_oversized_quota() {
        let mut temp = TempBuffer::from_rows(vec![vec![0.5]]);
        assert!(strategic_sample(&mut temp, &[vec![0.9]], 2, 2).is_err());
    }

    #[test]
    fn objective_histories_are_monotone() {
        let buffer: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 7) as f64, (i % 3) as f64]).collect();
        let new_rows: Vec<Vec<f64>> = (0..20).map(|i| vec![(i % 5) as f64, (i % 4) as f64]).collect();
        let mut temp = TempBuffer::from_rows(buffer.clone());
        let forget = strategic_forget(&mut temp, &new_rows, 6, 5).unwrap();
        for w in forget.objective_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
        let sample = strategic_sample(&mut temp, &new_rows, 6, 5).unwrap();
        for w in sample.objective_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }
}
