//! Capacity-bounded hierarchical replay memory.
//!
//! The buffer is organized into levels with geometrically decaying
//! allocations. Each integrated concept owns one per-level buffer; incoming
//! concepts are placed at the level chosen from their drift severity. The
//! first concept seeds every level, with the copies above level 1 marked as
//! placeholders that are phased out as genuine concepts arrive.

mod drift;
mod hist;
mod optimize;

pub use drift::{assign_level, detect_drift, ks_critical, ks_statistic, level_allocations, DriftReport};
pub use hist::{
    bin_index, equal_width_edges, feature_histograms, kl_divergence, smooth_norm, union_edges,
    FeatureHistograms, KL_EPS,
};
pub use optimize::{
    forgetting_objective, sampling_objective, strategic_forget, strategic_sample,
    ForgettingOutcome, SamplingOutcome, WeightRole, WeightVector,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kmeans;
use crate::seeding::sub_seed;

/// Working copy of the memory contents while a concept is being folded in.
#[derive(Debug, Clone, Default)]
pub struct TempBuffer {
    rows: Vec<Vec<f64>>,
}

impl TempBuffer {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        Self { rows }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<Vec<f64>> {
        self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: Vec<f64>) {
        self.rows.push(row);
    }

    /// Remove rows at the given ascending indices.
    pub(crate) fn remove_indices(&mut self, ascending: &[usize]) {
        let mut keep = Vec::with_capacity(self.rows.len() - ascending.len());
        let mut cursor = 0usize;
        for (i, row) in self.rows.drain(..).enumerate() {
            if cursor < ascending.len() && ascending[cursor] == i {
                cursor += 1;
            } else {
                keep.push(row);
            }
        }
        self.rows = keep;
    }
}

/// One concept's samples stored at some level.
#[derive(Debug, Clone)]
pub struct ConceptBuffer {
    pub origin_task: usize,
    pub marked: bool,
    pub rows: Vec<Vec<f64>>,
}

/// A flattened view item: one stored sample with its provenance flags.
#[derive(Debug, Clone)]
pub struct MemoryEntry {
    pub sample: Vec<f64>,
    pub marked: bool,
    pub origin_task: usize,
}

/// Pick `target` rows by k-means summarization: cluster, then keep the rows
/// closest to any centroid (ties toward the lower index). Returns ascending
/// row indices.
pub fn downsize(rows: &[Vec<f64>], target: usize, n_clusters: usize, seed: u64) -> Result<Vec<usize>> {
    if target > rows.len() {
        return Err(Error::invalid(format!(
            "downsize target {target} exceeds available rows ({})",
            rows.len()
        )));
    }
    if target == rows.len() {
        return Ok((0..rows.len()).collect());
    }
    if target == 0 {
        return Err(Error::invalid("downsize target must be positive"));
    }
    let k = n_clusters.max(1).min(rows.len());
    let fit = kmeans::fit(rows, k, seed)?;
    let dist: Vec<f64> = rows
        .iter()
        .map(|row| {
            fit.centroids
                .iter()
                .map(|c| kmeans::squared_distance(row, c))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut by_distance: Vec<usize> = (0..rows.len()).collect();
    by_distance.sort_by(|&a, &b| dist[a].partial_cmp(&dist[b]).unwrap().then(a.cmp(&b)));
    let mut kept: Vec<usize> = by_distance[..target].to_vec();
    kept.sort_unstable();
    Ok(kept)
}

fn downsize_rows(rows: &[Vec<f64>], target: usize, n_clusters: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let kept = downsize(rows, target.min(rows.len()), n_clusters, seed)?;
    Ok(kept.into_iter().map(|i| rows[i].clone()).collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BufferAudit {
    pub origin_task: usize,
    pub marked: bool,
    pub len: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelAudit {
    pub level: usize,
    pub allocation: usize,
    pub total: usize,
    pub buffers: Vec<BufferAudit>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemoryAudit {
    pub capacity: usize,
    pub total: usize,
    pub levels: Vec<LevelAudit>,
}

#[derive(Debug, Clone)]
pub struct HierarchicalMemory {
    capacity: usize,
    gamma: f64,
    lambda: f64,
    downsize_clusters: usize,
    allocations: Vec<usize>,
    levels: Vec<Vec<ConceptBuffer>>,
}

impl HierarchicalMemory {
    pub fn new(
        capacity: usize,
        level_count: usize,
        gamma: f64,
        lambda: f64,
        downsize_clusters: usize,
    ) -> Result<Self> {
        if lambda <= 0.0 {
            return Err(Error::invalid("lambda must be positive"));
        }
        if downsize_clusters == 0 {
            return Err(Error::invalid("downsize cluster count must be positive"));
        }
        let allocations = level_allocations(capacity, level_count, gamma)?;
        if allocations.iter().any(|&a| a == 0) {
            return Err(Error::invalid(format!(
                "capacity {capacity} is too small for {level_count} levels at gamma {gamma}"
            )));
        }
        Ok(Self {
            capacity,
            gamma,
            lambda,
            downsize_clusters,
            allocations,
            levels: vec![Vec::new(); level_count],
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    /// Allocation of a 1-based level.
    pub fn allocation(&self, level: usize) -> usize {
        self.allocations[level - 1]
    }

    pub fn is_empty(&self) -> bool {
        self.levels.iter().all(Vec::is_empty)
    }

    pub fn total_len(&self) -> usize {
        self.levels
            .iter()
            .flat_map(|bufs| bufs.iter().map(|b| b.rows.len()))
            .sum()
    }

    /// Occupancy of a 1-based level.
    pub fn level_len(&self, level: usize) -> usize {
        self.levels[level - 1].iter().map(|b| b.rows.len()).sum()
    }

    /// All stored samples, levels ascending, buffers in insertion order.
    pub fn flatten_rows(&self) -> Vec<Vec<f64>> {
        self.levels
            .iter()
            .flat_map(|bufs| bufs.iter().flat_map(|b| b.rows.iter().cloned()))
            .collect()
    }

    pub fn flatten_entries(&self) -> Vec<MemoryEntry> {
        self.levels
            .iter()
            .flat_map(|bufs| {
                bufs.iter().flat_map(|b| {
                    b.rows.iter().map(|row| MemoryEntry {
                        sample: row.clone(),
                        marked: b.marked,
                        origin_task: b.origin_task,
                    })
                })
            })
            .collect()
    }

    /// Duplicate the current contents into a working buffer.
    pub fn make_temp(&self) -> TempBuffer {
        TempBuffer::from_rows(self.flatten_rows())
    }

    /// Fold a processed concept into the hierarchy.
    ///
    /// On an empty memory this bootstraps every level from the first concept:
    /// level 1 genuinely, the rest as marked placeholders, each downsized to
    /// its allocation. Afterwards, the incoming buffer evicts any marked
    /// placeholder at its level and shares the level allocation uniformly
    /// with the genuine buffers already living there.
    pub fn integrate(&mut self, temp: TempBuffer, level: usize, origin_task: usize, seed: u64) -> Result<()> {
        if temp.is_empty() {
            return Err(Error::invalid("cannot integrate an empty buffer"));
        }
        if self.is_empty() {
            let rows = temp.into_rows();
            for lvl in 1..=self.level_count() {
                let target = self.allocation(lvl).min(rows.len());
                let kept = downsize_rows(
                    &rows,
                    target,
                    self.downsize_clusters,
                    sub_seed(seed, "memory-bootstrap", lvl as u64),
                )?;
                self.levels[lvl - 1].push(ConceptBuffer {
                    origin_task,
                    marked: lvl != 1,
                    rows: kept,
                });
            }
            return Ok(());
        }

        if level < 1 || level > self.level_count() {
            return Err(Error::invalid(format!(
                "level {level} outside [1, {}]",
                self.level_count()
            )));
        }
        let alloc = self.allocations[level - 1];
        let slot = &mut self.levels[level - 1];
        slot.retain(|b| !b.marked);

        // Evict the oldest genuine buffers if the level cannot give every
        // occupant at least one slot.
        while alloc / (slot.len() + 1) == 0 && !slot.is_empty() {
            slot.remove(0);
        }
        let share = alloc / (slot.len() + 1);

        for (pos, buffer) in slot.iter_mut().enumerate() {
            if buffer.rows.len() > share {
                buffer.rows = downsize_rows(
                    &buffer.rows,
                    share,
                    self.downsize_clusters,
                    sub_seed(seed, "memory-reshare", pos as u64),
                )?;
            }
        }
        let rows = temp.into_rows();
        let kept = downsize_rows(
            &rows,
            share.min(rows.len()),
            self.downsize_clusters,
            sub_seed(seed, "memory-incoming", 0),
        )?;
        self.levels[level - 1].push(ConceptBuffer {
            origin_task,
            marked: false,
            rows: kept,
        });
        Ok(())
    }

    pub fn audit(&self) -> MemoryAudit {
        MemoryAudit {
            capacity: self.capacity,
            total: self.total_len(),
            levels: self
                .levels
                .iter()
                .enumerate()
                .map(|(i, bufs)| LevelAudit {
                    level: i + 1,
                    allocation: self.allocations[i],
                    total: bufs.iter().map(|b| b.rows.len()).sum(),
                    buffers: bufs
                        .iter()
                        .map(|b| BufferAudit {
                            origin_task: b.origin_task,
                            marked: b.marked,
                            len: b.rows.len(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..d).map(|_| rng.gen::<f64>() * 4.0).collect()).collect()
    }

    #[test]
    fn downsize_identity_when_target_is_everything() {
        let rows = grid_rows(12, 2, 0);
        assert_eq!(downsize(&rows, 12, 3, 1).unwrap(), (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn downsize_excludes_the_straggler() {
        // Two tight blobs plus one straggler that is far from both but not so
        // far that k-means isolates it in its own cluster; dropping one row
        // must drop the straggler. Oracle: recompute nearest-centroid
        // distances.
        let mut rows = Vec::new();
        for i in 0..6 {
            rows.push(vec![0.0 + i as f64 * 0.01, 0.0]);
            rows.push(vec![1000.0 + i as f64 * 0.01, 1000.0]);
        }
        rows.push(vec![100.0, 100.0]);
        let kept = downsize(&rows, rows.len() - 1, 2, 7).unwrap();
        assert!(!kept.contains(&(rows.len() - 1)), "straggler survived: {kept:?}");

        let fit = kmeans::fit(&rows, 2, 7).unwrap();
        let dist: Vec<f64> = rows
            .iter()
            .map(|r| {
                fit.centroids
                    .iter()
                    .map(|c| kmeans::squared_distance(r, c))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let worst = (0..rows.len())
            .max_by(|&a, &b| dist[a].partial_cmp(&dist[b]).unwrap().then(b.cmp(&a)))
            .unwrap();
        assert_eq!(worst, rows.len() - 1);
    }

    #[test]
    fn downsize_is_deterministic() {
        let rows = grid_rows(40, 3, 5);
        assert_eq!(downsize(&rows, 25, 4, 9).unwrap(), downsize(&rows, 25, 4, 9).unwrap());
    }

    #[test]
    fn downsize_rejects_oversized_target() {
        let rows = grid_rows(5, 2, 1);
        assert!(downsize(&rows, 6, 2, 0).is_err());
    }

    fn small_memory() -> HierarchicalMemory {
        // Allocations for capacity 1200, 2 levels, gamma 2: [800, 400].
        HierarchicalMemory::new(1200, 2, 2.0, 5.5, 3).unwrap()
    }

    #[test]
    fn first_concept_seeds_every_level() {
        let mut memory = HierarchicalMemory::new(5000, 10, 2.0, 5.5, 5).unwrap();
        let rows = grid_rows(280, 4, 11);
        memory.integrate(TempBuffer::from_rows(rows), 1, 1, 99).unwrap();

        let audit = memory.audit();
        assert_eq!(audit.levels[0].buffers.len(), 1);
        assert!(!audit.levels[0].buffers[0].marked);
        for level in &audit.levels[1..] {
            assert_eq!(level.buffers.len(), 1);
            assert!(level.buffers[0].marked);
            assert_eq!(level.buffers[0].len, level.allocation.min(280));
        }
        assert!(memory.total_len() <= memory.capacity());
    }

    #[test]
    fn marked_placeholders_are_evicted_on_arrival() {
        let mut memory = small_memory();
        memory.integrate(TempBuffer::from_rows(grid_rows(100, 3, 1)), 1, 1, 5).unwrap();
        assert!(memory.audit().levels[1].buffers[0].marked);

        memory.integrate(TempBuffer::from_rows(grid_rows(90, 3, 2)), 2, 2, 6).unwrap();
        let audit = memory.audit();
        assert_eq!(audit.levels[1].buffers.len(), 1);
        assert!(!audit.levels[1].buffers[0].marked);
        assert_eq!(audit.levels[1].buffers[0].origin_task, 2);
    }

    #[test]
    fn cohabiting_concepts_share_the_level_uniformly() {
        let mut memory = small_memory();
        memory.integrate(TempBuffer::from_rows(grid_rows(600, 3, 1)), 1, 1, 5).unwrap();
        memory.integrate(TempBuffer::from_rows(grid_rows(600, 3, 2)), 2, 2, 6).unwrap();
        memory.integrate(TempBuffer::from_rows(grid_rows(600, 3, 3)), 2, 3, 7).unwrap();
        let audit = memory.audit();
        // Level 2 allocation is 400 shared by two genuine concepts.
        let lens: Vec<usize> = audit.levels[1].buffers.iter().map(|b| b.len).collect();
        assert_eq!(lens, vec![200, 200]);
        assert!(memory.total_len() <= memory.capacity());
    }

    #[test]
    fn randomized_run_respects_capacity_and_allocations() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let mut memory = HierarchicalMemory::new(240, 4, 2.0, 5.5, 3).unwrap();
        memory
            .integrate(TempBuffer::from_rows(grid_rows(120, 3, 0)), 1, 1, 0)
            .unwrap();
        for step in 0..60usize {
            let new_rows = grid_rows(rng.gen_range(20..50), 3, 1000 + step as u64);
            let mut temp = memory.make_temp();
            let forget_quota = rng.gen_range(1..temp.len().min(20));
            let before = temp.len();
            let forget = strategic_forget(&mut temp, &new_rows, 8, forget_quota).unwrap();
            assert_eq!(before - temp.len(), forget_quota);
            assert_eq!(forget.dropped.len(), forget_quota);

            let sample_quota = rng.gen_range(1..=new_rows.len());
            let mid = temp.len();
            let sample = strategic_sample(&mut temp, &new_rows, 8, sample_quota).unwrap();
            assert_eq!(temp.len() - mid, sample_quota);
            assert_eq!(sample.selected.len(), sample_quota);

            let severity: f64 = rng.gen();
            let level = assign_level(severity, 5.5, 1, 4);
            memory.integrate(temp, level, step + 2, 77 + step as u64).unwrap();

            assert!(memory.total_len() <= memory.capacity(), "step {step}");
            for lvl in 1..=4 {
                assert!(
                    memory.level_len(lvl) <= memory.allocation(lvl) + 1,
                    "level {lvl} over allocation at step {step}"
                );
            }
        }
    }

    #[test]
    fn integrate_rejects_bad_level() {
        let mut memory = small_memory();
        memory.integrate(TempBuffer::from_rows(grid_rows(10, 2, 0)), 1, 1, 1).unwrap();
        let temp = memory.make_temp();
        assert!(memory.integrate(temp, 3, 2, 2).is_err());
    }
}
