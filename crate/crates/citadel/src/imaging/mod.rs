//! Tabular-to-image mapping. Each selected feature is embedded into the plane
//! (its column treated as one point), projected onto a square grid, and given
//! a unique cell; sample values then paint grayscale intensities into those
//! cells.

mod assign;
mod hull;
mod tsne;

pub use assign::min_cost_assignment;
pub use hull::{bounding_box, convex_hull};
pub use tsne::{embed_2d, TsneParams};

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{NormStats, TabularDataset};
use crate::error::{Error, Result};

/// Square grayscale grid with integer intensities in [0, 255].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageGrid {
    dim: usize,
    pixels: Vec<u8>,
}

impl ImageGrid {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            pixels: vec![0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.pixels[row * self.dim + col] = value;
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// Plain-text PGM (P2) dump for visual inspection.
    pub fn to_pgm(&self) -> String {
        let mut out = format!("P2\n{} {}\n255\n", self.dim, self.dim);
        for row in 0..self.dim {
            for col in 0..self.dim {
                if col > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{}", self.get(row, col));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_pgm()).map_err(|e| Error::Io {
            path: path.as_ref().to_path_buf(),
            source: e,
        })
    }
}

/// Frozen feature-to-cell map plus the intensity normalization fitted on
/// benign training data. Immutable once fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayout {
    schema: u32,
    grid_dim: usize,
    feature_names: Vec<String>,
    cells: Vec<(usize, usize)>,
    norm: NormStats,
}

pub const LAYOUT_SCHEMA_VERSION: u32 = 1;

impl FeatureLayout {
    pub fn grid_dim(&self) -> usize {
        self.grid_dim
    }

    pub fn feature_count(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[(usize, usize)] {
        &self.cells
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn norm(&self) -> &NormStats {
        &self.norm
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::invalid(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let layout: FeatureLayout =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("bad layout json: {e}")))?;
        if layout.schema != LAYOUT_SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "unsupported layout schema {}",
                layout.schema
            )));
        }
        layout.validate()?;
        Ok(layout)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_json()?).map_err(|e| Error::Io {
            path: path.as_ref().to_path_buf(),
            source: e,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::Io {
            path: path.as_ref().to_path_buf(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for &(r, c) in &self.cells {
            if r >= self.grid_dim || c >= self.grid_dim {
                return Err(Error::invalid("layout cell outside the grid"));
            }
            if !seen.insert((r, c)) {
                return Err(Error::invalid("layout cells must be distinct"));
            }
        }
        if self.norm.dim() != self.cells.len() || self.feature_names.len() != self.cells.len() {
            return Err(Error::DimensionMismatch {
                expected: self.cells.len(),
                got: self.norm.dim(),
            });
        }
        Ok(())
    }
}

/// Fit the feature-to-cell layout on selected benign training data.
///
/// Every feature column becomes one point for t-SNE; the convex hull of the
/// embedded points is scaled onto the grid through its axis-aligned bounding
/// box, and cell conflicts are resolved by a minimum total squared distance
/// assignment over all grid cells, which equals nearest-cell snapping
/// whenever that is already injective.
pub fn fit_layout(
    train_selected: &TabularDataset,
    grid_dim: usize,
    params: &TsneParams,
    seed: u64,
) -> Result<FeatureLayout> {
    let k = train_selected.n_features();
    if grid_dim == 0 {
        return Err(Error::invalid("grid_dim must be positive"));
    }
    if k > grid_dim * grid_dim {
        return Err(Error::invalid(format!(
            "{k} features cannot fit a {grid_dim}x{grid_dim} grid"
        )));
    }
    if train_selected.n_rows() < 5 {
        return Err(Error::invalid("layout fitting needs at least 5 training rows"));
    }

    let columns: Vec<Vec<f64>> = (0..k).map(|j| train_selected.column(j)).collect();
    let embedded = embed_2d(&columns, params, seed)?;

    let hull = convex_hull(&embedded);
    let (min_x, min_y, max_x, max_y) = bounding_box(&hull);
    let span_x = max_x - min_x;
    let span_y = max_y - min_y;
    let scale = |p: (f64, f64)| -> (f64, f64) {
        let x = if span_x > 0.0 {
            (p.0 - min_x) / span_x * (grid_dim - 1) as f64
        } else {
            0.0
        };
        let y = if span_y > 0.0 {
            (p.1 - min_y) / span_y * (grid_dim - 1) as f64
        } else {
            0.0
        };
        (x, y)
    };

    let cost: Vec<Vec<f64>> = embedded
        .iter()
        .map(|&p| {
            let (x, y) = scale(p);
            (0..grid_dim * grid_dim)
                .map(|cell| {
                    let row = (cell / grid_dim) as f64;
                    let col = (cell % grid_dim) as f64;
                    (x - col) * (x - col) + (y - row) * (y - row)
                })
                .collect()
        })
        .collect();
    let assignment = min_cost_assignment(&cost)?;
    let cells: Vec<(usize, usize)> = assignment
        .iter()
        .map(|&cell| (cell / grid_dim, cell % grid_dim))
        .collect();

    let layout = FeatureLayout {
        schema: LAYOUT_SCHEMA_VERSION,
        grid_dim,
        feature_names: train_selected.feature_names().to_vec(),
        cells,
        norm: NormStats::from_rows(train_selected.rows())?,
    };
    layout.validate()?;
    Ok(layout)
}

/// Paint one selected-feature vector into its grid: each feature's value is
/// min-max scaled against the training stats (clamped) and written as an
/// integer intensity; cells not covered by the layout stay 0.
pub fn to_image(sample: &[f64], layout: &FeatureLayout) -> Result<ImageGrid> {
    if sample.len() != layout.feature_count() {
        return Err(Error::DimensionMismatch {
            expected: layout.feature_count(),
            got: sample.len(),
        });
    }
    let mut image = ImageGrid::zeros(layout.grid_dim());
    for (s, &(row, col)) in layout.cells().iter().enumerate() {
        let intensity = (255.0 * layout.norm().scale(s, sample[s])).round() as u8;
        image.set(row, col, intensity);
    }
    Ok(image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn benign(samples: Vec<Vec<f64>>) -> TabularDataset {
        let d = samples[0].len();
        let n = samples.len();
        let names = (1..=d).map(|j| format!("f{j}")).collect();
        TabularDataset::new(samples, vec![0; n], names).unwrap()
    }

    fn random_selected(n: usize, k: usize, seed: u64) -> TabularDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        benign(
            (0..n)
                .map(|_| (0..k).map(|j| rng.gen::<f64>() * (1.0 + j as f64)).collect())
                .collect(),
        )
    }

    #[test]
    fn three_features_land_on_distinct_cells_in_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| vec![rng.gen::<f64>(), 50.0 + rng.gen::<f64>(), -30.0 * rng.gen::<f64>()])
            .collect();
        let ds = benign(rows);
        let params = TsneParams { perplexity: 1.0, ..TsneParams::for_point_count(3) };
        let layout = fit_layout(&ds, 8, &params, 4).unwrap();
        let mut cells = layout.cells().to_vec();
        cells.sort_unstable();
        cells.dedup();
        assert_eq!(cells.len(), 3);
    }

    #[test]
    fn identical_columns_still_get_distinct_cells() {
        // Coincident embedding points are separated by the assignment. The
        // brute-force oracle checks the assignment is optimal over all cell
        // pairs for the scaled positions.
        let base: Vec<f64> = (0..20).map(|i| i as f64 * 0.3).collect();
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![base[i], base[i]]).collect();
        let ds = benign(rows);
        let params = TsneParams { perplexity: 1.0, ..TsneParams::for_point_count(2) };
        let layout = fit_layout(&ds, 2, &params, 9).unwrap();
        assert_ne!(layout.cells()[0], layout.cells()[1]);

        let columns: Vec<Vec<f64>> = (0..2).map(|j| ds.column(j)).collect();
        let embedded = embed_2d(&columns, &params, 9).unwrap();
        let (min_x, min_y, max_x, max_y) = bounding_box(&convex_hull(&embedded));
        let to_grid = |p: (f64, f64)| -> (f64, f64) {
            let x = if max_x > min_x { (p.0 - min_x) / (max_x - min_x) } else { 0.0 };
            let y = if max_y > min_y { (p.1 - min_y) / (max_y - min_y) } else { 0.0 };
            (x, y)
        };
        let cost = |p: (f64, f64), cell: (usize, usize)| {
            let (x, y) = to_grid(p);
            (x - cell.1 as f64).powi(2) + (y - cell.0 as f64).powi(2)
        };
        let cells_all = [(0, 0), (0, 1), (1, 0), (1, 1)];
        let mut best = f64::INFINITY;
        for a in cells_all {
            for b in cells_all {
                if a != b {
                    best = best.min(cost(embedded[0], a) + cost(embedded[1], b));
                }
            }
        }
        let achieved = cost(embedded[0], layout.cells()[0]) + cost(embedded[1], layout.cells()[1]);
        assert!((achieved - best).abs() < 1e-9, "{achieved} vs {best}");
    }

    #[test]
    fn layout_is_deterministic() {
        let ds = random_selected(40, 12, 5);
        let params = TsneParams::for_point_count(12);
        let a = fit_layout(&ds, 8, &params, 11).unwrap();
        let b = fit_layout(&ds, 8, &params, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_many_features_for_the_grid_is_an_error() {
        let ds = random_selected(20, 5, 6);
        let params = TsneParams::for_point_count(5);
        assert!(fit_layout(&ds, 2, &params, 0).is_err());
    }

    #[test]
    fn layout_injectivity_over_random_datasets() {
        for seed in 0..6 {
            let k = 8 + (seed as usize % 3) * 7;
            let ds = random_selected(25, k, 50 + seed);
            let layout = fit_layout(&ds, 8, &TsneParams::for_point_count(k), seed).unwrap();
            let mut cells = layout.cells().to_vec();
            cells.sort_unstable();
            cells.dedup();
            assert_eq!(cells.len(), k, "seed {seed}");
        }
    }

    #[test]
    fn intensities_hit_the_endpoints() {
        let ds = random_selected(30, 4, 7);
        let layout = fit_layout(&ds, 4, &TsneParams::for_point_count(4), 3).unwrap();
        let mins = layout.norm().min.clone();
        let maxs = layout.norm().max.clone();
        let lo = to_image(&mins, &layout).unwrap();
        let hi = to_image(&maxs, &layout).unwrap();
        for (s, &(r, c)) in layout.cells().iter().enumerate() {
            assert_eq!(lo.get(r, c), 0, "feature {s} at training minimum");
            assert_eq!(hi.get(r, c), 255, "feature {s} at training maximum");
        }
    }

    #[test]
    fn out_of_range_values_clamp() {
        let ds = random_selected(30, 4, 8);
        let layout = fit_layout(&ds, 4, &TsneParams::for_point_count(4), 3).unwrap();
        let below: Vec<f64> = layout.norm().min.iter().map(|v| v - 100.0).collect();
        let img = to_image(&below, &layout).unwrap();
        assert!(img.pixels().iter().all(|&p| p == 0));
    }

    #[test]
    fn vacant_cells_stay_zero() {
        let ds = random_selected(60, 31, 9);
        let layout = fit_layout(&ds, 8, &TsneParams::for_point_count(31), 21).unwrap();
        // A sample at the training maximum paints every covered cell with
        // 255, leaving exactly the vacancy zeroed.
        let img = to_image(&layout.norm().max.clone(), &layout).unwrap();
        let zeros = img.pixels().iter().filter(|&&p| p == 0).count();
        assert_eq!(zeros, 64 - 31);
    }

    #[test]
    fn to_image_is_monotone_per_feature() {
        let ds = random_selected(30, 6, 10);
        let layout = fit_layout(&ds, 4, &TsneParams::for_point_count(6), 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..50 {
            let sample: Vec<f64> = (0..6).map(|j| layout.norm().min[j] + rng.gen::<f64>()).collect();
            let feature = rng.gen_range(0..6);
            let mut bumped = sample.clone();
            bumped[feature] += rng.gen::<f64>();
            let base = to_image(&sample, &layout).unwrap();
            let more = to_image(&bumped, &layout).unwrap();
            let (r, c) = layout.cells()[feature];
            assert!(more.get(r, c) >= base.get(r, c));
            for row in 0..4 {
                for col in 0..4 {
                    if (row, col) != (r, c) {
                        assert_eq!(more.get(row, col), base.get(row, col));
                    }
                }
            }
        }
    }

    #[test]
    fn layout_json_round_trip() {
        let ds = random_selected(25, 5, 11);
        let layout = fit_layout(&ds, 4, &TsneParams::for_point_count(5), 2).unwrap();
        let json = layout.to_json().unwrap();
        assert_eq!(FeatureLayout::from_json(&json).unwrap(), layout);
    }

    #[test]
    fn pgm_dump_has_the_right_shape() {
        let mut img = ImageGrid::zeros(3);
        img.set(0, 0, 255);
        img.set(2, 2, 17);
        let pgm = img.to_pgm();
        let lines: Vec<&str> = pgm.lines().collect();
        assert_eq!(lines[0], "P2");
        assert_eq!(lines[1], "3 3");
        assert_eq!(lines[2], "255");
        assert_eq!(lines[3], "255 0 0");
        assert_eq!(lines[5], "0 0 17");
    }
}

