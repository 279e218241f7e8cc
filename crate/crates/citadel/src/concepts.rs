//! Concept creation: cluster normals and anomalies separately, greedily pair
//! each normal concept with its nearest unmatched anomaly concept by centroid
//! distance, and split every pair into train/test partitions.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::TabularDataset;
use crate::error::{Error, Result};
use crate::kmeans;
use crate::seeding::sub_seed;

/// One concept: member row indices into its source dataset plus the member
/// mean.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cluster {
    pub members: Vec<usize>,
    pub centroid: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConceptSet {
    pub normal: Vec<Cluster>,
    pub anomaly: Vec<Cluster>,
}

/// Matched task partitions; all indices refer to the source normal/anomaly
/// datasets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Task {
    pub index: usize,
    pub normal_train: Vec<usize>,
    pub normal_test: Vec<usize>,
    pub anomaly_train: Vec<usize>,
    pub anomaly_test: Vec<usize>,
}

fn build_clusters(ds: &TabularDataset, c: usize, seed: u64) -> Result<Vec<Cluster>> {
    let fit = kmeans::fit(ds.rows(), c, seed)?;
    let mut clusters: Vec<Cluster> = (0..c)
        .map(|cl| {
            let members: Vec<usize> = (0..ds.n_rows()).filter(|&i| fit.assignments[i] == cl).collect();
            let mut centroid = vec![0.0; ds.n_features()];
            for &i in &members {
                for (j, v) in ds.row(i).iter().enumerate() {
                    centroid[j] += v;
                }
            }
            for v in centroid.iter_mut() {
                *v /= members.len().max(1) as f64;
            }
            Cluster { members, centroid }
        })
        .collect();
    if clusters.iter().any(|cl| cl.members.is_empty()) {
        return Err(Error::invalid("k-means produced an empty concept"));
    }
    // Concept indexing is pinned: descending size, ties by lexicographic
    // centroid order.
    clusters.sort_by(|a, b| {
        b.members
            .len()
            .cmp(&a.members.len())
            .then_with(|| a.centroid.partial_cmp(&b.centroid).unwrap())
    });
    Ok(clusters)
}

/// Cluster each side into `c` disjoint concepts with seeded k-means.
pub fn cluster_concepts(
    normals: &TabularDataset,
    anomalies: &TabularDataset,
    c: usize,
    seed: u64,
) -> Result<ConceptSet> {
    if c == 0 {
        return Err(Error::invalid("concept count must be positive"));
    }
    if normals.n_rows() < c || anomalies.n_rows() < c {
        return Err(Error::invalid(format!(
            "need at least {c} samples per side, got {} normals and {} anomalies",
            normals.n_rows(),
            anomalies.n_rows()
        )));
    }
    if normals.labels().iter().any(|&l| l != 0) {
        return Err(Error::invalid("normal side contains attack-labeled rows"));
    }
    if anomalies.labels().iter().any(|&l| l != 1) {
        return Err(Error::invalid("anomaly side contains normal-labeled rows"));
    }
    Ok(ConceptSet {
        normal: build_clusters(normals, c, sub_seed(seed, "cluster-normals", 0))?,
        anomaly: build_clusters(anomalies, c, sub_seed(seed, "cluster-anomalies", 0))?,
    })
}

fn centroid_distance(a: &[f64], b: &[f64]) -> f64 {
    kmeans::squared_distance(a, b).sqrt()
}

/// Greedy matching: walk normal concepts in index order and take the nearest
/// anomaly concept still unmatched. Returns (normal index, anomaly index)
/// pairs; always a bijection.
pub fn match_concepts(set: &ConceptSet) -> Result<Vec<(usize, usize)>> {
    let c = set.normal.len();
    if set.anomaly.len() != c {
        return Err(Error::DimensionMismatch {
            expected: c,
            got: set.anomaly.len(),
        });
    }
    let mut remaining: Vec<usize> = (0..c).collect();
    let mut pairs = Vec::with_capacity(c);
    for i in 0..c {
        let best = remaining
            .iter()
            .copied()
            .min_by(|&a, &b| {
                centroid_distance(&set.normal[i].centroid, &set.anomaly[a].centroid)
                    .partial_cmp(&centroid_distance(&set.normal[i].centroid, &set.anomaly[b].centroid))
                    .unwrap()
                    .then(a.cmp(&b))
            })
            .expect("remaining pool is non-empty");
        remaining.retain(|&j| j != best);
        pairs.push((i, best));
    }
    Ok(pairs)
}

fn split_side(members: &[usize], train_fraction: f64, rng: &mut ChaCha8Rng) -> Result<(Vec<usize>, Vec<usize>)> {
    if members.len() < 2 {
        return Err(Error::invalid("each side needs at least 2 samples to split"));
    }
    let mut shuffled = members.to_vec();
    shuffled.shuffle(rng);
    // Nudge below the exact product before ceiling so 0.7 * 20 still gives 14.
    let mut train_len = ((train_fraction * members.len() as f64) - 1e-9).ceil() as usize;
    train_len = train_len.clamp(1, members.len());
    if train_len == members.len() {
        train_len -= 1;
    }
    let test = shuffled.split_off(train_len);
    Ok((shuffled, test))
}

/// Split a matched pair 70/30 (or any fraction): shuffle each side under the
/// seed, send the first ceil(fraction * n) to train, and keep both test sets
/// non-empty by moving one sample back if rounding would drain one.
pub fn split_task(
    index: usize,
    normal_members: &[usize],
    anomaly_members: &[usize],
    train_fraction: f64,
    seed: u64,
) -> Result<Task> {
    if !(0.0 < train_fraction && train_fraction < 1.0) {
        return Err(Error::invalid("train_fraction must be in (0, 1)"));
    }
    let mut rng_normal = ChaCha8Rng::seed_from_u64(sub_seed(seed, "split-normal", index as u64));
    let mut rng_anomaly = ChaCha8Rng::seed_from_u64(sub_seed(seed, "split-anomaly", index as u64));
    let (normal_train, normal_test) = split_side(normal_members, train_fraction, &mut rng_normal)?;
    let (anomaly_train, anomaly_test) = split_side(anomaly_members, train_fraction, &mut rng_anomaly)?;
    Ok(Task {
        index,
        normal_train,
        normal_test,
        anomaly_train,
        anomaly_test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn blob_dataset(centers: &[&[f64]], per: usize, label: u8, seed: u64) -> TabularDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = centers[0].len();
        let mut rows = Vec::new();
        for center in centers {
            for _ in 0..per {
                rows.push((0..d).map(|j| center[j] + rng.gen::<f64>() - 0.5).collect());
            }
        }
        let n = rows.len();
        let names = (1..=d).map(|j| format!("f{j}")).collect();
        TabularDataset::new(rows, vec![label; n], names).unwrap()
    }

    #[test]
    fn two_distant_blobs_recover_ground_truth() {
        let normals = blob_dataset(&[&[0.0, 0.0], &[20.0, 20.0]], 30, 0, 1);
        let anomalies = blob_dataset(&[&[5.0, 5.0], &[25.0, 25.0]], 30, 1, 2);
        let set = cluster_concepts(&normals, &anomalies, 2, 7).unwrap();
        for cluster in &set.normal {
            // All members of a cluster come from one blob (rows 0..30 or 30..60).
            let from_first = cluster.members.iter().filter(|&&i| i < 30).count();
            assert!(from_first == 0 || from_first == cluster.members.len());
            assert_eq!(cluster.members.len(), 30);
        }
    }

    #[test]
    fn single_concept_is_the_whole_set_with_mean_centroid() {
        let normals = blob_dataset(&[&[1.0, 2.0]], 20, 0, 3);
        let anomalies = blob_dataset(&[&[9.0, 9.0]], 20, 1, 4);
        let set = cluster_concepts(&normals, &anomalies, 1, 5).unwrap();
        assert_eq!(set.normal[0].members.len(), 20);
        let mean: Vec<f64> = (0..2)
            .map(|j| normals.column(j).iter().sum::<f64>() / 20.0)
            .collect();
        for j in 0..2 {
            assert!((set.normal[0].centroid[j] - mean[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn clustering_is_deterministic() {
        let normals = blob_dataset(&[&[0.0], &[5.0], &[10.0]], 25, 0, 6);
        let anomalies = blob_dataset(&[&[2.0], &[7.0], &[12.0]], 25, 1, 7);
        let a = cluster_concepts(&normals, &anomalies, 3, 11).unwrap();
        let b = cluster_concepts(&normals, &anomalies, 3, 11).unwrap();
        for (x, y) in a.normal.iter().zip(&b.normal) {
            assert_eq!(x.members, y.members);
        }
    }

    #[test]
    fn matching_picks_nearest_by_inspection() {
        let set = ConceptSet {
            normal: vec![
                Cluster { members: vec![0], centroid: vec![0.0, 0.0] },
                Cluster { members: vec![1], centroid: vec![10.0, 10.0] },
            ],
            anomaly: vec![
                Cluster { members: vec![0], centroid: vec![9.0, 9.0] },
                Cluster { members: vec![1], centroid: vec![1.0, 1.0] },
            ],
        };
        let pairs = match_concepts(&set).unwrap();
        assert_eq!(pairs, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn matching_single_pair_is_forced() {
        let set = ConceptSet {
            normal: vec![Cluster { members: vec![0], centroid: vec![0.0] }],
            anomaly: vec![Cluster { members: vec![0], centroid: vec![99.0] }],
        };
        assert_eq!(match_concepts(&set).unwrap(), vec![(0, 0)]);
    }

    #[test]
    fn matching_is_a_bijection_and_greedy() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mk = |rng: &mut ChaCha8Rng| -> Vec<Cluster> {
            (0..5)
                .map(|i| Cluster {
                    members: vec![i],
                    centroid: vec![rng.gen::<f64>() * 10.0, rng.gen::<f64>() * 10.0],
                })
                .collect()
        };
        let set = ConceptSet { normal: mk(&mut rng), anomaly: mk(&mut rng) };
        let pairs = match_concepts(&set).unwrap();

        let mut seen: Vec<usize> = pairs.iter().map(|&(_, j)| j).collect();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2, 3, 4]);

        // Greedy replay: the first normal concept takes its global nearest.
        let nearest = (0..5)
            .min_by(|&a, &b| {
                centroid_distance(&set.normal[0].centroid, &set.anomaly[a].centroid)
                    .partial_cmp(&centroid_distance(&set.normal[0].centroid, &set.anomaly[b].centroid))
                    .unwrap()
            })
            .unwrap();
        assert_eq!(pairs[0].1, nearest);

        // And at every later step the chosen anomaly is nearest among those
        // not already taken.
        let mut taken: Vec<usize> = Vec::new();
        for &(i, j) in &pairs {
            let best = (0..5)
                .filter(|x| !taken.contains(x))
                .min_by(|&a, &b| {
                    centroid_distance(&set.normal[i].centroid, &set.anomaly[a].centroid)
                        .partial_cmp(&centroid_distance(&set.normal[i].centroid, &set.anomaly[b].centroid))
                        .unwrap()
                        .then(a.cmp(&b))
                })
                .unwrap();
            assert_eq!(j, best);
            taken.push(j);
        }
    }

    #[test]
    fn split_follows_the_seventy_thirty_arithmetic() {
        let normals: Vec<usize> = (0..10).collect();
        let anomalies: Vec<usize> = (0..10).map(|i| i + 100).collect();
        let task = split_task(0, &normals, &anomalies, 0.7, 5).unwrap();
        assert_eq!(task.normal_train.len(), 7);
        assert_eq!(task.normal_test.len(), 3);

        // Partition exactly: no loss, no duplication.
        let mut all: Vec<usize> = task.normal_train.iter().chain(&task.normal_test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, normals);
    }

    #[test]
    fn split_keeps_test_sets_non_empty() {
        let normals: Vec<usize> = (0..10).collect();
        let anomalies: Vec<usize> = vec![3, 4, 5];
        let task = split_task(1, &normals, &anomalies, 0.7, 6).unwrap();
        // ceil(0.7 * 3) = 3 would drain the test side; one sample moves back.
        assert_eq!(task.anomaly_train.len(), 2);
        assert_eq!(task.anomaly_test.len(), 1);
    }

    #[test]
    fn split_is_deterministic() {
        let members: Vec<usize> = (0..50).collect();
        let a = split_task(2, &members, &members, 0.7, 9).unwrap();
        let b = split_task(2, &members, &members, 0.7, 9).unwrap();
        assert_eq!(a.normal_train, b.normal_train);
        assert_eq!(a.anomaly_test, b.anomaly_test);
    }

    #[test]
    fn split_rejects_tiny_sides() {
        let one = vec![0usize];
        let many: Vec<usize> = (0..10).collect();
        assert!(split_task(0, &one, &many, 0.7, 0).is_err());
        assert!(split_task(0, &many, &one, 0.7, 0).is_err());
    }

    #[test]
    fn exact_fraction_products_do_not_overshoot() {
        let members: Vec<usize> = (0..20).collect();
        let task = split_task(0, &members, &members, 0.7, 1).unwrap();
        // 0.7 * 20 = 14 exactly; floating-point noise must not make it 15.
        assert_eq!(task.normal_train.len(), 14);
    }
}
