//! The filling tree `X = (Z_ω × ℝ)/∼` of an ultrametric with a remote point.
//!
//! A point `[z, t]` is the ray of `z` at height `t`; two rays are glued below
//! the height `h(z1, z2) = -ln ρ(z1, z2)` at which they merge. The tree is
//! never materialized: every operation evaluates closed formulas on the base
//! space.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Axiom, Error, Result};
use crate::metric::{ExtendedMetricSpace, PointId, Tolerance};

static NEXT_TREE_ID: AtomicU64 = AtomicU64::new(1);

/// Nonelementary geodesically complete tree filling an ultrametric space.
#[derive(Debug, Clone)]
pub struct FillingTree {
    base: ExtendedMetricSpace,
    omega: usize,
    finite: Vec<usize>,
    tol: Tolerance,
    id: u64,
}

/// A point `[anchor, t]` in canonical form: `anchor` is the least index whose
/// ray passes through the point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreePoint {
    tree: u64,
    anchor: PointId,
    t: f64,
}

impl TreePoint {
    pub fn anchor(&self) -> PointId {
        self.anchor
    }

    pub fn height(&self) -> f64 {
        self.t
    }
}

impl fmt::Display for TreePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.anchor, self.t)
    }
}

impl FillingTree {
    pub fn new(base: ExtendedMetricSpace) -> Result<Self> {
        Self::with_tolerance(base, Tolerance::default())
    }

    pub fn with_tolerance(base: ExtendedMetricSpace, tol: Tolerance) -> Result<Self> {
        let omega = base
            .omega_index()
            .ok_or_else(|| Error::domain("the filling needs a space with a remote point"))?;
        let finite = base.finite_indices();
        if finite.len() < 2 {
            return Err(Error::domain(
                "the filling of fewer than two finite points is elementary",
            ));
        }
        if !base.satisfies_triangle() {
            return Err(Error::axiom(Axiom::Triangle, "base space is not a metric"));
        }
        if let Some((x, y, z)) = base.ultrametric_violation(tol) {
            return Err(Error::axiom(
                Axiom::Ultrametric,
                format!(
                    "triple ({}, {}, {}) has a unique largest distance",
                    base.labels()[x],
                    base.labels()[y],
                    base.labels()[z]
                ),
            ));
        }
        Ok(FillingTree {
            base,
            omega,
            finite,
            tol,
            id: NEXT_TREE_ID.fetch_add(1, Ordering::Relaxed),
        })
    }

    pub fn base(&self) -> &ExtendedMetricSpace {
        &self.base
    }

    pub fn tolerance(&self) -> Tolerance {
        self.tol
    }

    pub fn omega(&self) -> PointId {
        PointId(self.omega)
    }

    /// Anchors available for tree points (`Z_ω`).
    pub fn anchors(&self) -> impl Iterator<Item = PointId> + '_ {
        self.finite.iter().map(|&i| PointId(i))
    }

    pub(crate) fn finite_indices(&self) -> &[usize] {
        &self.finite
    }

    #[inline]
    pub(crate) fn h(&self, i: usize, j: usize) -> f64 {
        self.base.h(i, j)
    }

    /// Smallest and largest finite merge height among distinct anchors.
    pub fn height_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (a, &i) in self.finite.iter().enumerate() {
            for &j in &self.finite[a + 1..] {
                let h = self.h(i, j);
                lo = lo.min(h);
                hi = hi.max(h);
            }
        }
        (lo, hi)
    }

    pub(crate) fn owns(&self, p: &TreePoint) -> bool {
        p.tree == self.id
    }

    pub(crate) fn assert_owns(&self, p: &TreePoint) {
        assert!(self.owns(p), "tree point {p} belongs to a different filling");
    }

    /// The point `[anchor, t]`.
    pub fn point(&self, anchor: PointId, t: f64) -> Result<TreePoint> {
        self.base.check(anchor)?;
        if anchor.0 == self.omega {
            return Err(Error::domain("the remote point is not an anchor"));
        }
        if !t.is_finite() {
            return Err(Error::domain(format!("height {t} is not finite")));
        }
        Ok(self.canonical(anchor.0, t))
    }

    pub fn point_by_label(&self, label: &str, t: f64) -> Result<TreePoint> {
        self.point(self.base.point(label)?, t)
    }

    pub(crate) fn canonical(&self, z: usize, t: f64) -> TreePoint {
        let anchor = self
            .finite
            .iter()
            .copied()
            .find(|&w| self.tol.le(t, self.h(z, w)))
            .unwrap_or(z);
        TreePoint {
            tree: self.id,
            anchor: PointId(anchor),
            t,
        }
    }

    /// `[z1, t1] = [z2, t2]` iff `t1 = t2` and `t1 ≤ h(z1, z2)`.
    pub fn same_point(&self, p: &TreePoint, q: &TreePoint) -> Result<bool> {
        if !self.owns(p) || !self.owns(q) {
            return Err(Error::domain("tree points belong to different fillings"));
        }
        Ok(self.tol.eq(p.t, q.t) && self.tol.le(p.t, self.h(p.anchor.0, q.anchor.0)))
    }

    /// `d([z1,t1],[z2,t2]) = t1 + t2 - 2 min(t1, t2, h(z1, z2))`.
    pub fn distance(&self, p: &TreePoint, q: &TreePoint) -> f64 {
        self.assert_owns(p);
        self.assert_owns(q);
        let meet = p.t.min(q.t).min(self.h(p.anchor.0, q.anchor.0));
        ((p.t - meet) + (q.t - meet)).max(0.0)
    }

    /// `(x|y)_z = ½(|zx| + |zy| - |xy|)`.
    pub fn gromov_product(&self, x: &TreePoint, y: &TreePoint, base: &TreePoint) -> f64 {
        let v = 0.5 * (self.distance(base, x) + self.distance(base, y) - self.distance(x, y));
        v.max(0.0)
    }

    pub fn geodesic(&self, p: &TreePoint, q: &TreePoint) -> Geodesic<'_> {
        self.assert_owns(p);
        self.assert_owns(q);
        let meet = p.t.min(q.t).min(self.h(p.anchor.0, q.anchor.0));
        Geodesic {
            tree: self,
            from: *p,
            to: *q,
            meet,
            length: (p.t - meet) + (q.t - meet),
        }
    }

    /// The common point of the three geodesics between `x`, `y`, `z`.
    pub fn tripod(&self, x: &TreePoint, y: &TreePoint, z: &TreePoint) -> TreePoint {
        let g = self.geodesic(x, y);
        let s = self.gromov_product(y, z, x).clamp(0.0, g.length());
        g.point_at(s)
    }
}

/// Unit-speed natural geodesic: down the ray of the start anchor to the
/// meeting height, then up the ray of the end anchor.
#[derive(Debug, Clone, Copy)]
pub struct Geodesic<'a> {
    tree: &'a FillingTree,
    from: TreePoint,
    to: TreePoint,
    meet: f64,
    length: f64,
}

impl Geodesic<'_> {
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn start(&self) -> TreePoint {
        self.from
    }

    pub fn end(&self) -> TreePoint {
        self.to
    }

    /// Lowest height visited.
    pub fn meeting_height(&self) -> f64 {
        self.meet
    }

    /// `γ(s)` for `s ∈ [0, length]`.
    pub fn at(&self, s: f64) -> Result<TreePoint> {
        let tol = self.tree.tol;
        if !(tol.le(0.0, s) && tol.le(s, self.length)) {
            return Err(Error::domain(format!(
                "arclength {s} outside [0, {}]",
                self.length
            )));
        }
        Ok(self.point_at(s.clamp(0.0, self.length)))
    }

    fn point_at(&self, s: f64) -> TreePoint {
        let descent = self.from.t - self.meet;
        if s <= descent {
            self.tree.canonical(self.from.anchor.0, self.from.t - s)
        } else if s >= self.length {
            self.to
        } else {
            // The ascending branch is [z2, s - t1 + 2·meet]; the literal
            // form [z2, meet + s] would miss the endpoint.
            self.tree
                .canonical(self.to.anchor.0, self.meet + (s - descent))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn example_e() -> FillingTree {
        let inv_e = (-1.0f64).exp();
        let labels = ["a", "b", "c", "w"].map(String::from).to_vec();
        let base = ExtendedMetricSpace::from_fn(labels, Some(3), |i, j| if (i, j) == (0, 1) { inv_e } else { 1.0 })
            .unwrap();
        FillingTree::new(base).unwrap()
    }

    fn p(tree: &FillingTree, label: &str, t: f64) -> TreePoint {
        tree.point_by_label(label, t).unwrap()
    }

    #[test]
    fn same_point_examples() {
        let x = example_e();
        assert!(x.same_point(&p(&x, "a", 0.0), &p(&x, "c", 0.0)).unwrap());
        assert!(x.same_point(&p(&x, "b", 3.0), &p(&x, "b", 3.0)).unwrap());
        assert!(!x.same_point(&p(&x, "a", 2.0), &p(&x, "b", 2.0)).unwrap());
        assert!(x.same_point(&p(&x, "a", 1.0), &p(&x, "b", 1.0)).unwrap());
    }

    #[test]
    fn canonical_representative_is_least_anchor() {
        let x = example_e();
        assert_eq!(p(&x, "c", -1.0).anchor(), PointId(0));
        assert_eq!(p(&x, "b", 0.5).anchor(), PointId(0));
        assert_eq!(p(&x, "b", 1.5).anchor(), PointId(1));
        assert_eq!(p(&x, "c", 0.5).anchor(), PointId(2));
    }

    #[test]
    fn distances() {
        let x = example_e();
        assert_eq!(x.distance(&p(&x, "b", 3.0), &p(&x, "b", -0.5)), 3.5);
        assert_eq!(x.distance(&p(&x, "a", 2.0), &p(&x, "b", 2.0)), 2.0);
        assert_eq!(x.distance(&p(&x, "a", 2.0), &p(&x, "c", 0.0)), 2.0);
    }

    #[test]
    fn remote_anchor_rejected() {
        let x = example_e();
        assert!(x.point_by_label("w", 0.0).is_err());
        assert!(x.point_by_label("a", f64::NAN).is_err());
    }

    #[test]
    fn geodesic_trace() {
        let x = example_e();
        let g = x.geodesic(&p(&x, "a", 2.0), &p(&x, "b", 2.0));
        assert_eq!(g.length(), 2.0);
        assert!(x.same_point(&g.at(0.0).unwrap(), &p(&x, "a", 2.0)).unwrap());
        assert!(x.same_point(&g.at(1.0).unwrap(), &p(&x, "a", 1.0)).unwrap());
        assert!(x.same_point(&g.at(1.0).unwrap(), &p(&x, "b", 1.0)).unwrap());
        assert!(x.same_point(&g.at(2.0).unwrap(), &p(&x, "b", 2.0)).unwrap());
        assert!(g.at(2.5).is_err());
        assert!(g.at(-0.1).is_err());
    }

    #[test]
    fn geodesic_pure_descent() {
        let x = example_e();
        // from [a,3] to [b,0.5]: meeting height 0.5 < h(a,b) = 1
        let g = x.geodesic(&p(&x, "a", 3.0), &p(&x, "b", 0.5));
        assert_eq!(g.length(), 2.5);
        assert!(x.same_point(&g.at(2.5).unwrap(), &p(&x, "b", 0.5)).unwrap());
    }

    #[test]
    fn tripod_examples() {
        let x = example_e();
        let a2 = p(&x, "a", 2.0);
        let b2 = p(&x, "b", 2.0);
        let c0 = p(&x, "c", 0.0);
        assert!(x.same_point(&x.tripod(&a2, &b2, &c0), &p(&x, "a", 1.0)).unwrap());
        assert!(x.same_point(&x.tripod(&a2, &a2, &b2), &a2).unwrap());
        let g = x.geodesic(&a2, &c0);
        let mid = g.at(0.7).unwrap();
        assert!(x.same_point(&x.tripod(&a2, &mid, &c0), &mid).unwrap());
    }

    #[test]
    fn gromov_product_examples() {
        let x = example_e();
        let a2 = p(&x, "a", 2.0);
        let b2 = p(&x, "b", 2.0);
        let c0 = p(&x, "c", 0.0);
        assert_eq!(x.gromov_product(&a2, &b2, &a2), 0.0);
        assert_eq!(x.gromov_product(&b2, &c0, &a2), 1.0);
    }

    #[test]
    fn rejects_non_ultrametric_base() {
        let labels = ["a", "b", "c", "w"].map(String::from).to_vec();
        let base = ExtendedMetricSpace::from_fn(labels, Some(3), |i, j| match (i, j) {
            (0, 1) => 0.3,
            (0, 2) => 0.9,
            _ => 1.0,
        })
        .unwrap();
        let err = FillingTree::new(base).unwrap_err();
        assert_eq!(err.violated_axiom(), Some(Axiom::Ultrametric));
    }

    #[test]
    fn rejects_space_without_remote_point() {
        let base = ExtendedMetricSpace::from_fn(crate::metric::default_labels(3), None, |_, _| 1.0).unwrap();
        assert!(FillingTree::new(base).is_err());
    }

    #[test]
    fn points_from_other_trees_rejected() {
        let x = example_e();
        let y = example_e();
        let px = p(&x, "a", 0.0);
        let py = p(&y, "a", 0.0);
        assert!(x.same_point(&px, &py).is_err());
    }
}
