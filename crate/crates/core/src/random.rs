//! Seeded generators for ultrametric spaces, tree points and boundary data.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::boundary::BoundaryPoint;
use crate::filling::{FillingTree, TreePoint};
use crate::metric::{ExtendedMetricSpace, PointId};

/// Shape of a random dendrogram-generated space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceShape {
    /// Total number of points, the remote point included.
    pub points: usize,
    pub min_height: f64,
    pub max_height: f64,
    /// Round merge heights to multiples of this step.
    pub grid: Option<f64>,
    pub remote: bool,
}

impl SpaceShape {
    pub fn new(points: usize) -> Self {
        SpaceShape {
            points,
            min_height: 0.0,
            max_height: 10.0,
            grid: None,
            remote: true,
        }
    }

    pub fn on_grid(self, step: f64) -> Self {
        SpaceShape {
            grid: Some(step),
            ..self
        }
    }

    pub fn without_remote(self) -> Self {
        SpaceShape { remote: false, ..self }
    }
}

/// Merges random clusters at sorted-descending heights. Finite points are
/// labelled `p0, p1, …`; the remote point, if any, is `omega` at a random index.
pub fn random_ultrametric(rng: &mut impl Rng, shape: SpaceShape) -> ExtendedMetricSpace {
    let n = shape.points;
    assert!(n >= 3, "a space needs at least three points");
    let leaves = if shape.remote { n - 1 } else { n };
    let mut merges: Vec<f64> = (0..leaves - 1)
        .map(|_| {
            let h = rng.random_range(shape.min_height..=shape.max_height);
            match shape.grid {
                Some(step) => (h / step).round() * step,
                None => h,
            }
        })
        .collect();
    merges.sort_by(|a, b| b.total_cmp(a));

    let mut h = vec![f64::INFINITY; leaves * leaves];
    let mut clusters: Vec<Vec<usize>> = (0..leaves).map(|i| vec![i]).collect();
    for m in merges {
        let i = rng.random_range(0..clusters.len());
        let a = clusters.swap_remove(i);
        let j = rng.random_range(0..clusters.len());
        let b = &mut clusters[j];
        for &x in &a {
            for &y in b.iter() {
                h[x * leaves + y] = m;
                h[y * leaves + x] = m;
            }
        }
        b.extend(a);
    }

    let omega = shape.remote.then(|| rng.random_range(0..n));
    let mut labels = Vec::with_capacity(n);
    let mut leaf_of = Vec::with_capacity(n);
    let mut next = 0;
    for i in 0..n {
        if Some(i) == omega {
            labels.push("omega".to_string());
            leaf_of.push(None);
        } else {
            labels.push(format!("p{next}"));
            leaf_of.push(Some(next));
            next += 1;
        }
    }
    let mut heights = vec![f64::NEG_INFINITY; n * n];
    for i in 0..n {
        for j in 0..n {
            if let (Some(a), Some(b)) = (leaf_of[i], leaf_of[j]) {
                heights[i * n + j] = h[a * leaves + b];
            }
        }
    }
    ExtendedMetricSpace::from_heights(labels, omega, heights).expect("dendrogram heights form an ultrametric")
}

/// Uniform anchor, height uniform in the merge-height range widened by `margin`.
pub fn random_tree_point(tree: &FillingTree, rng: &mut impl Rng, margin: f64) -> TreePoint {
    let anchors: Vec<PointId> = tree.anchors().collect();
    let z = anchors[rng.random_range(0..anchors.len())];
    let (lo, hi) = tree.height_range();
    let t = rng.random_range((lo - margin)..=(hi + margin));
    tree.point(z, t).expect("anchor and height are valid")
}

/// `k` distinct boundary points in random order.
pub fn random_boundary_points(tree: &FillingTree, rng: &mut impl Rng, k: usize) -> Vec<BoundaryPoint> {
    let mut all = tree.boundary_points();
    all.shuffle(rng);
    all.truncate(k);
    all
}

/// A uniformly random permutation of `0..n`.
pub fn random_permutation(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Tolerance;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_spaces_are_ultrametric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 3..30 {
            let s = random_ultrametric(&mut rng, SpaceShape::new(n));
            assert_eq!(s.len(), n);
            assert!(s.omega().is_some());
            assert!(s.is_ultrametric(Tolerance::default()));
            let g = random_ultrametric(&mut rng, SpaceShape::new(n).on_grid(0.5).without_remote());
            assert!(g.omega().is_none());
            assert!(g.height_matrix().iter().all(|h| h.is_infinite() || (h * 2.0).fract() == 0.0));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = random_ultrametric(&mut ChaCha8Rng::seed_from_u64(5), SpaceShape::new(12));
        let b = random_ultrametric(&mut ChaCha8Rng::seed_from_u64(5), SpaceShape::new(12));
        assert_eq!(a.distance_matrix(), b.distance_matrix());
        assert_eq!(a.labels(), b.labels());
    }
}
