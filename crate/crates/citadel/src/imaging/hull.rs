//! Convex hull by Andrew's monotone chain.

/// Hull vertices in counter-clockwise order. Degenerate inputs (fewer than 3
/// distinct points, or collinear points) return the extreme points.
pub fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| -> f64 {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    if lower.is_empty() && upper.is_empty() {
        // All points collinear; keep the two extremes.
        return vec![pts[0], pts[pts.len() - 1]];
    }
    lower.extend(upper);
    lower
}

/// Axis-aligned bounding box (min_x, min_y, max_x, max_y) of a point set.
pub fn bounding_box(points: &[(f64, f64)]) -> (f64, f64, f64, f64) {
    let mut min_x = f64::INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for &(x, y) in points {
        min_x = min_x.min(x);
        min_y = min_y.min(y);
        max_x = max_x.max(x);
        max_y = max_y.max(y);
    }
    (min_x, min_y, max_x, max_y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_with_interior_point() {
        let pts = vec![(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0), (2.0, 2.0)];
        let hull = convex_hull(&pts);
        assert_eq!(hull.len(), 4);
        assert!(!hull.contains(&(2.0, 2.0)));
    }

    #[test]
    fn collinear_points_collapse_to_extremes() {
        let pts = vec![(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 3.0)];
        let hull = convex_hull(&pts);
        assert_eq!(hull, vec![(0.0, 0.0), (3.0, 3.0)]);
    }

    #[test]
    fn hull_bounding_box_equals_point_bounding_box() {
        let pts: Vec<(f64, f64)> = (0..30)
            .map(|i| {
                let t = i as f64 * 0.37;
                (t.sin() * 3.0 + t * 0.1, t.cos() * 2.0 - t * 0.05)
            })
            .collect();
        let hull = convex_hull(&pts);
        assert_eq!(bounding_box(&hull), bounding_box(&pts));
    }

    #[test]
    fn duplicates_are_tolerated() {
        let pts = vec![(1.0, 1.0); 5];
        assert_eq!(convex_hull(&pts), vec![(1.0, 1.0)]);
    }
}
