//! Drift detection (per-feature two-sample Kolmogorov-Smirnov), severity
//! scoring, and the severity-to-level mapping with geometric allocations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact two-sample KS statistic: the supremum of |ECDF_a - ECDF_b|.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
    ys.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let n = xs.len() as f64;
    let m = ys.len() as f64;

    let (mut i, mut j) = (0usize, 0usize);
    let mut sup = 0.0f64;
    while i < xs.len() || j < ys.len() {
        let v = match (xs.get(i), ys.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => break,
        };
        while i < xs.len() && xs[i] == v {
            i += 1;
        }
        while j < ys.len() && ys[j] == v {
            j += 1;
        }
        let diff = (i as f64 / n - j as f64 / m).abs();
        if diff > sup {
            sup = diff;
        }
    }
    sup
}

/// Asymptotic two-sample critical value c(alpha) * sqrt((n + m) / (n * m)).
pub fn ks_critical(alpha: f64, n: usize, m: usize) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * (((n + m) as f64) / ((n * m) as f64)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub drifted: bool,
    /// Mean per-feature KS statistic, in [0, 1].
    pub severity: f64,
    pub statistics: Vec<f64>,
}

/// Compare incoming data against the memory population feature by feature.
/// A feature drifts when its KS statistic exceeds the critical value at
/// `alpha`; the stream drifts when any feature does.
pub fn detect_drift(new_rows: &[Vec<f64>], memory_rows: &[Vec<f64>], alpha: f64) -> Result<DriftReport> {
    if new_rows.is_empty() || memory_rows.is_empty() {
        return Err(Error::invalid("drift detection needs two non-empty populations"));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::invalid("alpha must be in (0, 1)"));
    }
    let d = new_rows[0].len();
    if memory_rows[0].len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: memory_rows[0].len(),
        });
    }
    let critical = ks_critical(alpha, new_rows.len(), memory_rows.len());
    let mut statistics = Vec::with_capacity(d);
    let mut drifted = false;
    for j in 0..d {
        let col_new: Vec<f64> = new_rows.iter().map(|r| r[j]).collect();
        let col_mem: Vec<f64> = memory_rows.iter().map(|r| r[j]).collect();
        let k = ks_statistic(&col_new, &col_mem);
        drifted |= k > critical;
        statistics.push(k);
    }
    let severity = statistics.iter().sum::<f64>() / d as f64;
    Ok(DriftReport {
        drifted,
        severity,
        statistics,
    })
}

/// Map a severity score in [0, 1] to a memory level through an exponential
/// ramp; monotone non-decreasing in the severity.
pub fn assign_level(severity: f64, lambda: f64, level_min: usize, level_max: usize) -> usize {
    let s = severity.clamp(0.0, 1.0);
    let span = (level_max - level_min) as f64;
    let ramp = ((lambda * s).exp() - 1.0) / (lambda.exp() - 1.0);
    let level = (level_min as f64 + span * ramp + 0.5).floor() as usize;
    level.clamp(level_min, level_max)
}

/// Split `capacity` across `levels` with geometrically decaying shares
/// (ratio 1/gamma), rounded by largest remainder so the sum is exact.
pub fn level_allocations(capacity: usize, levels: usize, gamma: f64) -> Result<Vec<usize>> {
    if gamma <= 1.0 {
        return Err(Error::invalid("gamma must exceed 1"));
    }
    if levels == 0 {
        return Err(Error::invalid("at least one level is required"));
    }
    let weights: Vec<f64> = (0..levels).map(|j| gamma.powi(-(j as i32))).collect();
    let total: f64 = weights.iter().sum();
    let targets: Vec<f64> = weights.iter().map(|w| capacity as f64 * w / total).collect();

    let mut alloc: Vec<usize> = targets.iter().map(|t| t.floor() as usize).collect();
    let assigned: usize = alloc.iter().sum();
    let mut order: Vec<usize> = (0..levels).collect();
    order.sort_by(|&a, &b| {
        let ra = targets[a] - targets[a].floor();
        let rb = targets[b] - targets[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &level in order.iter().take(capacity - assigned) {
        alloc[level] += 1;
    }
    Ok(alloc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute-force oracle: evaluate both ECDFs at every sample point.
    fn ks_brute_force(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let m = b.len() as f64;
        let mut sup = 0.0f64;
        for &v in a.iter().chain(b) {
            let fa = a.iter().filter(|&&x| x <= v).count() as f64 / n;
            let fb = b.iter().filter(|&&x| x <= v).count() as f64 / m;
            let diff = (fa - fb).abs();
            if diff > sup {
                sup = diff;
            }
        }
        sup
    }

    fn gaussian(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> Vec<f64> {
        (0..n)
            .map(|_| {
                let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
                let u2: f64 = rng.gen();
                shift + (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            })
            .collect()
    }

    #[test]
    fn identical_samples_have_zero_statistic() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, (i * 3 % 7) as f64]).collect();
        let report = detect_drift(&rows, &rows, 0.05).unwrap();
        assert_eq!(report.statistics, vec![0.0, 0.0]);
        assert_eq!(report.severity, 0.0);
        assert!(!report.drifted);
    }

    #[test]
    fn disjoint_supports_have_unit_statistic() {
        let a: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64]).collect();
        let b: Vec<Vec<f64>> = (0..30).map(|i| vec![1000.0 + i as f64]).collect();
        let report = detect_drift(&a, &b, 0.05).unwrap();
        assert_eq!(report.statistics, vec![1.0]);
        assert_eq!(report.severity, 1.0);
        assert!(report.drifted);
    }

    #[test]
    fn shifted_normal_matches_brute_force_and_exceeds_critical() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let a = gaussian(&mut rng, 100, 0.0);
        let b = gaussian(&mut rng, 100, 2.0);
        let k = ks_statistic(&a, &b);
        assert_eq!(k, ks_brute_force(&a, &b));
        let critical = ks_critical(0.05, 100, 100);
        assert!((critical - 0.192).abs() < 5e-4, "critical {critical}");
        assert!(k > critical);
    }

    #[test]
    fn statistic_equals_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let n = rng.gen_range(2..200);
            let m = rng.gen_range(2..200);
            // Coarse grid values provoke ties across the two samples.
            let a: Vec<f64> = (0..n).map(|_| (rng.gen::<f64>() * 10.0).round() / 10.0).collect();
            let b: Vec<f64> = (0..m).map(|_| (rng.gen::<f64>() * 10.0).round() / 10.0).collect();
            assert_eq!(ks_statistic(&a, &b), ks_brute_force(&a, &b));
        }
    }

    #[test]
    fn level_mapping_fixtures() {
        assert_eq!(assign_level(0.0, 5.5, 1, 10), 1);
        assert_eq!(assign_level(1.0, 5.5, 1, 10), 10);
        assert_eq!(assign_level(0.5, 5.5, 1, 10), 2);
    }

    #[test]
    fn level_mapping_is_monotone() {
        let mut prev = 0;
        for i in 0..=1000 {
            let s = i as f64 / 1000.0;
            let level = assign_level(s, 5.5, 1, 10);
            assert!(level >= prev);
            prev = level;
        }
    }

    #[test]
    fn allocations_match_fixtures() {
        assert_eq!(level_allocations(300, 2, 2.0).unwrap(), vec![200, 100]);
        assert_eq!(level_allocations(100, 1, 2.0).unwrap(), vec![100]);
        let alloc = level_allocations(5000, 10, 2.0).unwrap();
        assert_eq!(alloc[0], 2502);
        assert_eq!(alloc.iter().sum::<usize>(), 5000);
    }

    #[test]
    fn allocations_always_sum_to_capacity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let capacity = rng.gen_range(10..10000);
            let levels = rng.gen_range(1..12);
            let gamma = 1.0 + rng.gen::<f64>() * 3.0 + 1e-6;
            let alloc = level_allocations(capacity, levels, gamma).unwrap();
            assert_eq!(alloc.iter().sum::<usize>(), capacity);
        }
    }

    #[test]
    fn gamma_at_or_below_one_is_rejected() {
        assert!(level_allocations(100, 3, 1.0).is_err());
        assert!(level_allocations(100, 3, 0.5).is_err());
    }

    #[test]
    fn drift_requires_non_empty_populations() {
        let rows = vec![vec![1.0]];
        assert!(detect_drift(&rows, &[], 0.05).is_err());
        assert!(detect_drift(&[], &rows, 0.05).is_err());
    }
}
