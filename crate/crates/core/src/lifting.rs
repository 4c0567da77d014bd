//! Extending boundary Möbius maps to isometric embeddings of filling trees.
//!
//! A point `x` on a line `(a, b)` is fixed by its signed offset from the
//! tripod `Trip(a, b, c)`, positive toward `b`. The lift sends `x` to the
//! point with the same offset from `Trip(f(a), f(b), f(c))` on `(f(a), f(b))`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::boundary::BoundaryPoint;
use crate::error::{Error, Result};
use crate::filling::{FillingTree, TreePoint};
use crate::metric::{ExtendedMetricSpace, PointId, Tolerance};
use crate::moebius::{crt_deviation, Checks, PointMap};
use crate::par;
use crate::random::random_tree_point;

/// A Möbius embedding between the boundaries of two fillings, given by the
/// image index of every source boundary point.
#[derive(Debug, Clone)]
pub struct BoundaryMap<'a> {
    source: &'a FillingTree,
    target: &'a FillingTree,
    assignment: Vec<PointId>,
}

impl<'a> BoundaryMap<'a> {
    /// Validates injectivity and the Möbius property against the canonical
    /// boundary metrics of both trees.
    pub fn new(
        source: &'a FillingTree,
        target: &'a FillingTree,
        assignment: Vec<PointId>,
        checks: &Checks,
    ) -> Result<Self> {
        if target.boundary_len() < 3 {
            return Err(Error::domain("target boundary has fewer than three points"));
        }
        let src_metric = source.canonical_boundary_space(&source.default_base_point());
        let tgt_metric = target.canonical_boundary_space(&target.default_base_point());
        let m = PointMap::new(&src_metric, &tgt_metric, assignment.clone())?;
        let stats = crt_deviation(&m, checks);
        if stats.violations > 0 {
            return Err(Error::contract(format!(
                "boundary map is not Möbius: {} of {} quadruples differ, max crt deviation {:e}",
                stats.violations, stats.checked, stats.max_deviation
            )));
        }
        Ok(BoundaryMap {
            source,
            target,
            assignment,
        })
    }

    /// Index-preserving map between fillings on the same labelled point set.
    pub fn identity(source: &'a FillingTree, target: &'a FillingTree, checks: &Checks) -> Result<Self> {
        if source.base().labels() != target.base().labels() {
            return Err(Error::domain("identity map needs identical point sets"));
        }
        Self::new(source, target, source.base().points().collect(), checks)
    }

    /// Builds a map from `(source label, target label)` pairs covering every source point.
    pub fn from_labels(
        source: &'a FillingTree,
        target: &'a FillingTree,
        pairs: &[(String, String)],
        checks: &Checks,
    ) -> Result<Self> {
        let mut assignment: Vec<Option<PointId>> = vec![None; source.boundary_len()];
        for (s, t) in pairs {
            let s = source.base().point(s)?;
            let t = target.base().point(t)?;
            if assignment[s.0].replace(t).is_some() {
                return Err(Error::domain(format!(
                    "{} is assigned twice",
                    source.base().label(s)
                )));
            }
        }
        let assignment = assignment
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                t.ok_or_else(|| {
                    Error::domain(format!("{} has no image", source.base().labels()[i]))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(source, target, assignment, checks)
    }

    pub fn source(&self) -> &'a FillingTree {
        self.source
    }

    pub fn target(&self) -> &'a FillingTree {
        self.target
    }

    pub fn assignment(&self) -> &[PointId] {
        &self.assignment
    }

    pub fn image(&self, a: BoundaryPoint) -> BoundaryPoint {
        let i = self.source.boundary_index(a);
        self.target.boundary_point(self.assignment[i.0])
    }

    pub fn is_surjective(&self) -> bool {
        self.assignment.len() == self.target.boundary_len()
    }

    /// `g ∘ self`.
    pub fn then<'b>(&self, g: &BoundaryMap<'b>, checks: &Checks) -> Result<BoundaryMap<'b>>
    where
        'a: 'b,
    {
        if !std::ptr::eq(self.target, g.source) {
            return Err(Error::domain("maps are not composable"));
        }
        let assignment = self.assignment.iter().map(|p| g.assignment[p.0]).collect();
        BoundaryMap::new(self.source, g.target, assignment, checks)
    }

    pub fn inverse(&self, checks: &Checks) -> Result<BoundaryMap<'a>> {
        if !self.is_surjective() {
            return Err(Error::domain("only bijective boundary maps have inverses"));
        }
        let mut inv = vec![PointId(0); self.assignment.len()];
        for (i, p) in self.assignment.iter().enumerate() {
            inv[p.0] = PointId(i);
        }
        BoundaryMap::new(self.target, self.source, inv, checks)
    }
}

fn distinct(points: &[BoundaryPoint]) -> bool {
    points
        .iter()
        .enumerate()
        .all(|(i, p)| points[i + 1..].iter().all(|q| q != p))
}

/// `ln [a, c1, c2, b]`: the signed distance from `Trip(a, b, c1)` to
/// `Trip(a, b, c2)` along `(a, b)`, positive toward `b`.
///
/// Evaluated in the Bourdon metric at the tree's default base point, in log
/// form: `ln [a,c1,c2,b] = (a|c1) + (c2|b) - (a|c2) - (c1|b)`.
pub fn signed_tripod_displacement(
    tree: &FillingTree,
    a: BoundaryPoint,
    b: BoundaryPoint,
    c1: BoundaryPoint,
    c2: BoundaryPoint,
) -> Result<f64> {
    if !distinct(&[a, b, c1]) || !distinct(&[a, b, c2]) {
        return Err(Error::domain(
            "a, b, c1 and a, b, c2 must each be distinct boundary points",
        ));
    }
    for p in [a, b, c1, c2] {
        tree.check_boundary(p)?;
    }
    if c1 == c2 {
        return Ok(0.0);
    }
    let o = tree.default_base_point();
    let g = |p, q| tree.boundary_gromov_product(p, q, &o).to_f64();
    Ok(g(a, c1) + g(c2, b) - g(a, c2) - g(c1, b))
}

/// Frame `(ι(ω), ι(anchor), c)` through `x`, with `c` the least other boundary point.
pub fn default_frame(tree: &FillingTree, x: &TreePoint) -> (BoundaryPoint, BoundaryPoint, BoundaryPoint) {
    let a = BoundaryPoint::OmegaEnd;
    let b = BoundaryPoint::Finite(x.anchor());
    let c = tree
        .boundary_points()
        .into_iter()
        .find(|p| *p != a && *p != b)
        .expect("a filling has at least three boundary points");
    (a, b, c)
}

/// The image `F(x)` of the isometric embedding extending `f`.
pub fn lift(f: &BoundaryMap<'_>, x: &TreePoint) -> Result<TreePoint> {
    let (a, b, c) = default_frame(f.source, x);
    lift_with_frame(f, x, a, b, c)
}

/// `F_{a,b,c}(x)` for an explicit frame with `x ∈ (a, b)`.
pub fn lift_with_frame(
    f: &BoundaryMap<'_>,
    x: &TreePoint,
    a: BoundaryPoint,
    b: BoundaryPoint,
    c: BoundaryPoint,
) -> Result<TreePoint> {
    let src = f.source;
    let tgt = f.target;
    for p in [a, b, c] {
        src.check_boundary(p)?;
    }
    if !distinct(&[a, b, c]) {
        return Err(Error::domain("frame points must be distinct"));
    }
    if !src.on_line(a, b, x) {
        return Err(Error::domain(format!("{x} does not lie on the line ({a:?}, {b:?})")));
    }
    let u = src.boundary_tripod(a, b, c)?;
    let offset = src.busemann(b, &u, x);
    let (fa, fb, fc) = (f.image(a), f.image(b), f.image(c));
    let u_img = tgt.boundary_tripod(fa, fb, fc)?;
    Ok(if offset >= 0.0 {
        tgt.toward(&u_img, fb, offset)
    } else {
        tgt.toward(&u_img, fa, -offset)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingReport {
    pub pairs_checked: usize,
    pub max_relative_deviation: f64,
    pub coherence_checks: usize,
    pub coherence_failures: usize,
}

impl EmbeddingReport {
    pub fn passed(&self, tol: Tolerance) -> bool {
        self.max_relative_deviation <= tol.rel && self.coherence_failures == 0
    }
}

/// Compares `|xy|` with `|F(x)F(y)|` on every pair, and checks that rays
/// `[x, a)` are carried to rays `[F(x), f(a))`.
pub fn verify_isometric_embedding(
    f: &BoundaryMap<'_>,
    pairs: &[(TreePoint, TreePoint)],
    parallel: bool,
) -> Result<EmbeddingReport> {
    let src = f.source;
    let tgt = f.target;
    let tol = src.tolerance();
    let ends = src.boundary_points();
    let per_pair = par::map_slice(pairs, parallel, |(x, y)| -> Result<(f64, usize, usize)> {
        let fx = lift(f, x)?;
        let fy = lift(f, y)?;
        let dev = tol.relative_deviation(src.distance(x, y), tgt.distance(&fx, &fy));
        let mut checks = 0;
        let mut failures = 0;
        for &a in &ends {
            for reach in [1.0, src.stabilization_depth(x)] {
                let probe = src.toward(x, a, reach);
                let expected = tgt.toward(&fx, f.image(a), reach);
                checks += 1;
                if !tgt.same_point(&lift(f, &probe)?, &expected)? {
                    failures += 1;
                }
            }
        }
        Ok((dev, checks, failures))
    });
    let mut report = EmbeddingReport {
        pairs_checked: pairs.len(),
        max_relative_deviation: 0.0,
        coherence_checks: 0,
        coherence_failures: 0,
    };
    for r in per_pair {
        let (dev, checks, failures) = r?;
        report.max_relative_deviation = report.max_relative_deviation.max(dev);
        report.coherence_checks += checks;
        report.coherence_failures += failures;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundtripReport {
    /// Worst relative error between the recovered boundary metric and the input.
    pub boundary_max_relative_error: f64,
    pub embedding: EmbeddingReport,
    /// Points whose image is not `[same anchor, same height]` in the refilled tree.
    pub coordinate_mismatches: usize,
    pub passed: bool,
}

/// Fill, read the boundary back, refill, and certify that the lift of the
/// identity boundary map is an isometry.
pub fn roundtrip_isometry(
    space: &ExtendedMetricSpace,
    checks: &Checks,
    samples: usize,
    seed: u64,
) -> Result<RoundtripReport> {
    let tol = checks.tol;
    let tree = FillingTree::with_tolerance(space.clone(), tol)?;
    let recovered = tree.canonical_boundary_space(&tree.default_base_point());
    let mut boundary_err: f64 = 0.0;
    for &i in tree.finite_indices() {
        for &j in tree.finite_indices() {
            if i != j {
                let (p, q) = (PointId(i), PointId(j));
                boundary_err = boundary_err.max(
                    tol.relative_deviation(space.dist(p, q).to_f64(), recovered.dist(p, q).to_f64()),
                );
            }
        }
    }
    let refilled = FillingTree::with_tolerance(recovered, tol)?;
    let f = BoundaryMap::identity(&tree, &refilled, checks)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(TreePoint, TreePoint)> = (0..samples)
        .map(|_| {
            (
                random_tree_point(&tree, &mut rng, 2.0),
                random_tree_point(&tree, &mut rng, 2.0),
            )
        })
        .collect();
    let embedding = verify_isometric_embedding(&f, &pairs, checks.parallel)?;
    let mut coordinate_mismatches = 0;
    for (x, _) in &pairs {
        let fx = lift(&f, x)?;
        let expected = refilled.point(x.anchor(), x.height())?;
        if !refilled.same_point(&fx, &expected)? {
            coordinate_mismatches += 1;
        }
    }
    let passed = boundary_err <= tol.rel && embedding.passed(tol) && coordinate_mismatches == 0;
    Ok(RoundtripReport {
        boundary_max_relative_error: boundary_err,
        embedding,
        coordinate_mismatches,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_e() -> FillingTree {
        let inv_e = (-1.0f64).exp();
        let labels = ["a", "b", "c", "w"].map(String::from).to_vec();
        let base = ExtendedMetricSpace::from_fn(labels, Some(3), |i, j| if (i, j) == (0, 1) { inv_e } else { 1.0 })
            .unwrap();
        FillingTree::new(base).unwrap()
    }

    const A: BoundaryPoint = BoundaryPoint::Finite(PointId(0));
    const B: BoundaryPoint = BoundaryPoint::Finite(PointId(1));
    const C: BoundaryPoint = BoundaryPoint::Finite(PointId(2));
    const W: BoundaryPoint = BoundaryPoint::OmegaEnd;

    #[test]
    fn displacement_examples() {
        let x = example_e();
        assert_eq!(signed_tripod_displacement(&x, W, A, C, C).unwrap(), 0.0);
        // tripods [a,0] and [a,1]: one unit toward ι(a)
        let d = signed_tripod_displacement(&x, W, A, C, B).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        let back = signed_tripod_displacement(&x, W, A, B, C).unwrap();
        assert!((back + 1.0).abs() < 1e-12);
        assert!(signed_tripod_displacement(&x, W, A, A, C).is_err());
    }

    #[test]
    fn identity_lift_is_identity() {
        let x = example_e();
        let checks = Checks::default();
        let f = BoundaryMap::identity(&x, &x, &checks).unwrap();
        for anchor in ["a", "b", "c"] {
            for t in [-2.0, 0.0, 0.5, 1.0, 3.0] {
                let p = x.point_by_label(anchor, t).unwrap();
                assert!(x.same_point(&lift(&f, &p).unwrap(), &p).unwrap());
            }
        }
    }

    #[test]
    fn swap_lift() {
        let x = example_e();
        let checks = Checks::default();
        let f = BoundaryMap::new(&x, &x, vec![PointId(1), PointId(0), PointId(2), PointId(3)], &checks).unwrap();
        let a2 = x.point_by_label("a", 2.0).unwrap();
        let b2 = x.point_by_label("b", 2.0).unwrap();
        let a1 = x.point_by_label("a", 1.0).unwrap();
        assert!(x.same_point(&lift(&f, &a2).unwrap(), &b2).unwrap());
        assert!(x.same_point(&lift(&f, &a1).unwrap(), &a1).unwrap());
        // distances to every probe point on the boundary rays are preserved
        let fa2 = lift(&f, &a2).unwrap();
        for end in x.boundary_points() {
            let p = x.toward(&a2, end, 3.0);
            let fp = lift(&f, &p).unwrap();
            assert!((x.distance(&a2, &p) - x.distance(&fa2, &fp)).abs() < 1e-12);
        }
    }

    #[test]
    fn non_moebius_map_rejected() {
        let x = example_e();
        // ι(c) ↔ ι(a) is not a symmetry of E
        let err = BoundaryMap::new(&x, &x, vec![PointId(2), PointId(1), PointId(0), PointId(3)], &Checks::default())
            .unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn frame_choice_does_not_matter() {
        let x = example_e();
        let checks = Checks::default();
        let f = BoundaryMap::new(&x, &x, vec![PointId(1), PointId(0), PointId(2), PointId(3)], &checks).unwrap();
        let p = x.point_by_label("a", 0.5).unwrap();
        let reference = lift(&f, &p).unwrap();
        let ends = x.boundary_points();
        let mut used = 0;
        for &a in &ends {
            for &b in &ends {
                for &c in &ends {
                    if distinct(&[a, b, c]) && x.on_line(a, b, &p) {
                        let q = lift_with_frame(&f, &p, a, b, c).unwrap();
                        assert!(x.same_point(&q, &reference).unwrap());
                        used += 1;
                    }
                }
            }
        }
        assert!(used > 4);
        assert!(lift_with_frame(&f, &p, A, B, C).is_err());
    }

    #[test]
    fn verify_and_roundtrip_on_example() {
        let x = example_e();
        let checks = Checks::default();
        let f = BoundaryMap::new(&x, &x, vec![PointId(1), PointId(0), PointId(2), PointId(3)], &checks).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pairs: Vec<_> = (0..100)
            .map(|_| (random_tree_point(&x, &mut rng, 2.0), random_tree_point(&x, &mut rng, 2.0)))
            .collect();
        let report = verify_isometric_embedding(&f, &pairs, false).unwrap();
        assert!(report.passed(Tolerance::default()), "{report:?}");

        let inv = f.inverse(&checks).unwrap();
        let back = f.then(&inv, &checks).unwrap();
        for (p, _) in &pairs {
            assert!(x.same_point(&lift(&back, p).unwrap(), p).unwrap());
        }

        let rt = roundtrip_isometry(x.base(), &checks, 20, 1).unwrap();
        assert!(rt.passed, "{rt:?}");
    }
}
