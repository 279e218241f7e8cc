//! Per-feature weighted histograms and smoothed KL divergence.

use crate::error::{Error, Result};

pub const KL_EPS: f64 = 1e-8;

/// Binned mass per feature. `edges[j]` has `bins + 1` strictly ascending
/// entries; `masses[j]` has `bins` nonnegative entries.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureHistograms {
    pub edges: Vec<Vec<f64>>,
    pub masses: Vec<Vec<f64>>,
}

impl FeatureHistograms {
    pub fn bins(&self) -> usize {
        self.masses.first().map_or(0, Vec::len)
    }
}

/// `bins` equal-width bins over [lo, hi]; a degenerate range is widened by
/// half a unit on both sides so every value still lands in a bin.
pub fn equal_width_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|t| lo + t as f64 * width).collect();
    edges.push(hi);
    edges
}

/// Per-feature equal-width edges covering the union range of two populations.
pub fn union_edges(a: &[Vec<f64>], b: &[Vec<f64>], bins: usize) -> Result<Vec<Vec<f64>>> {
    let d = a
        .first()
        .or_else(|| b.first())
        .ok_or_else(|| Error::invalid("cannot bin two empty populations"))?
        .len();
    if bins == 0 {
        return Err(Error::invalid("bin count must be positive"));
    }
    let mut edges = Vec::with_capacity(d);
    for j in 0..d {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for row in a.iter().chain(b) {
            lo = lo.min(row[j]);
            hi = hi.max(row[j]);
        }
        edges.push(equal_width_edges(lo, hi, bins));
    }
    Ok(edges)
}

/// Bin index of `v`; values outside the edge range clamp to the end bins and
/// the last bin includes its upper edge.
pub fn bin_index(edges: &[f64], v: f64) -> usize {
    let bins = edges.len() - 1;
    if v < edges[0] {
        return 0;
    }
    if v >= edges[bins] {
        return bins - 1;
    }
    // partition_point returns the count of edges <= v among the interior ones.
    let idx = edges[1..bins].partition_point(|&e| e <= v);
    idx.min(bins - 1)
}

fn check_edges(edges: &[Vec<f64>]) -> Result<()> {
    for feature_edges in edges {
        if feature_edges.len() < 2 {
            return Err(Error::invalid("each feature needs at least one bin"));
        }
        if feature_edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("bin edges must be strictly ascending"));
        }
    }
    Ok(())
}

/// Weighted per-feature histograms: mass of bin t in feature j is the sum of
/// weights of samples whose j-th value falls in that bin. Unit weights when
/// `weights` is absent.
pub fn feature_histograms(
    rows: &[Vec<f64>],
    edges: &[Vec<f64>],
    weights: Option<&[f64]>,
) -> Result<FeatureHistograms> {
    check_edges(edges)?;
    if let Some(w) = weights {
        if w.len() != rows.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                got: w.len(),
            });
        }
    }
    let d = edges.len();
    let mut masses: Vec<Vec<f64>> = edges.iter().map(|e| vec![0.0; e.len() - 1]).collect();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: row.len(),
            });
        }
        let w = weights.map_or(1.0, |w| w[i]);
        for j in 0..d {
            masses[j][bin_index(&edges[j], row[j])] += w;
        }
    }
    Ok(FeatureHistograms {
        edges: edges.to_vec(),
        masses,
    })
}

/// Add eps to every bin and renormalize to a probability vector.
pub fn smooth_norm(masses: &[f64], eps: f64) -> Vec<f64> {
    let total: f64 = masses.iter().sum::<f64>() + eps * masses.len() as f64;
    masses.iter().map(|&m| (m + eps) / total).collect()
}

/// KL(P || Q) after eps-smoothing and renormalizing both arguments.
/// Nonnegative; zero iff the smoothed distributions coincide.
pub fn kl_divergence(p: &[f64], q: &[f64], eps: f64) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    if eps <= 0.0 {
        return Err(Error::invalid("eps must be positive"));
    }
    if p.iter().chain(q).any(|&v| v < 0.0) {
        return Err(Error::invalid("histogram masses must be nonnegative"));
    }
    let ps = smooth_norm(p, eps);
    let qs = smooth_norm(q, eps);
    Ok(kl_pure(&ps, &qs))
}

/// KL between strictly positive, already-normalized distributions.
pub(crate) fn kl_pure(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(&pt, &qt)| pt * (pt / qt).ln()).sum()
}
