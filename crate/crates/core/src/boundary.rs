//! Boundary at infinity of a filling tree.
//!
//! Every base point `z ∈ Z_ω` is the end of the ascending ray `t ↦ [z, t]`;
//! the remote point is the common end of all descending rays `t ↦ [z, -t]`.
//! Boundary points share their index with the base point they come from.

use crate::error::{Error, Result};
use crate::filling::{FillingTree, TreePoint};
use crate::metric::{ExtReal, ExtendedMetricSpace, PointId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryPoint {
    Finite(PointId),
    OmegaEnd,
}

impl FillingTree {
    /// The end `ι(p)` of a base point.
    pub fn boundary_point(&self, p: PointId) -> BoundaryPoint {
        if p == self.omega() {
            BoundaryPoint::OmegaEnd
        } else {
            BoundaryPoint::Finite(p)
        }
    }

    /// `ι⁻¹`.
    pub fn boundary_index(&self, a: BoundaryPoint) -> PointId {
        match a {
            BoundaryPoint::Finite(z) => z,
            BoundaryPoint::OmegaEnd => self.omega(),
        }
    }

    /// All boundary points in index order.
    pub fn boundary_points(&self) -> Vec<BoundaryPoint> {
        self.base().points().map(|p| self.boundary_point(p)).collect()
    }

    pub fn boundary_len(&self) -> usize {
        self.base().len()
    }

    pub(crate) fn check_boundary(&self, a: BoundaryPoint) -> Result<()> {
        match a {
            BoundaryPoint::Finite(z) if z == self.omega() || z.0 >= self.base().len() => {
                Err(Error::UnknownPoint(z.to_string()))
            }
            _ => Ok(()),
        }
    }

    /// A point at parameter `depth` on a ray toward `a`: `[z, depth]` for
    /// `a = ι(z)`, `[z0, -depth]` for the remote end.
    pub fn ray_probe(&self, a: BoundaryPoint, depth: f64) -> TreePoint {
        match a {
            BoundaryPoint::Finite(z) => self.canonical(z.0, depth),
            BoundaryPoint::OmegaEnd => self.canonical(self.finite_indices()[0], -depth),
        }
    }

    /// A probe depth past which every limit defining the boundary Gromov
    /// products and Busemann functions at `x` is constant.
    pub fn stabilization_depth(&self, x: &TreePoint) -> f64 {
        let (lo, hi) = self.height_range();
        2.0 * lo.abs().max(hi.abs()) + x.height().abs() + 1.0
    }

    /// `(a|b)_x`: length of the common initial segment of `[x, a)` and `[x, b)`.
    pub fn boundary_gromov_product(&self, a: BoundaryPoint, b: BoundaryPoint, x: &TreePoint) -> ExtReal {
        self.assert_owns(x);
        if a == b {
            return ExtReal::Infinite;
        }
        let z = x.anchor().0;
        let t = x.height();
        let down = |p: PointId| t - t.min(self.h(z, p.0));
        ExtReal::Finite(match (a, b) {
            (BoundaryPoint::Finite(p), BoundaryPoint::Finite(q)) => {
                let meet_p = t.min(self.h(z, p.0));
                let meet_q = t.min(self.h(z, q.0));
                (t - meet_p - meet_q + self.h(p.0, q.0)).max(0.0)
            }
            (BoundaryPoint::Finite(p), BoundaryPoint::OmegaEnd)
            | (BoundaryPoint::OmegaEnd, BoundaryPoint::Finite(p)) => down(p),
            (BoundaryPoint::OmegaEnd, BoundaryPoint::OmegaEnd) => unreachable!(),
        })
    }

    fn gromov(&self, a: BoundaryPoint, b: BoundaryPoint, x: &TreePoint) -> f64 {
        self.boundary_gromov_product(a, b, x).to_f64()
    }

    /// `B_a(x, y) = lim |x a_i| - |y a_i|`.
    pub fn busemann(&self, a: BoundaryPoint, x: &TreePoint, y: &TreePoint) -> f64 {
        self.assert_owns(x);
        self.assert_owns(y);
        match a {
            BoundaryPoint::Finite(p) => {
                let up = |q: &TreePoint| q.height() - 2.0 * q.height().min(self.h(q.anchor().0, p.0));
                up(x) - up(y)
            }
            BoundaryPoint::OmegaEnd => x.height() - y.height(),
        }
    }

    /// The point at distance `dist ≥ 0` from `x` along the ray `[x, a)`.
    pub fn toward(&self, x: &TreePoint, a: BoundaryPoint, dist: f64) -> TreePoint {
        self.assert_owns(x);
        let z = x.anchor().0;
        let t = x.height();
        match a {
            BoundaryPoint::OmegaEnd => self.canonical(z, t - dist),
            BoundaryPoint::Finite(p) => {
                let meet = t.min(self.h(z, p.0));
                let descent = t - meet;
                if dist <= descent {
                    self.canonical(z, t - dist)
                } else {
                    self.canonical(p.0, meet + (dist - descent))
                }
            }
        }
    }

    /// Whether `x` lies on the line `(a, b)`.
    pub fn on_line(&self, a: BoundaryPoint, b: BoundaryPoint, x: &TreePoint) -> bool {
        a != b && self.tolerance().le(self.gromov(a, b, x), 0.0)
    }

    /// Tripod of three distinct boundary points.
    pub fn boundary_tripod(&self, a: BoundaryPoint, b: BoundaryPoint, c: BoundaryPoint) -> Result<TreePoint> {
        for p in [a, b, c] {
            self.check_boundary(p)?;
        }
        if a == b || a == c || b == c {
            return Err(Error::domain("tripod needs three distinct boundary points"));
        }
        let finite: Vec<usize> = [a, b, c]
            .into_iter()
            .filter_map(|p| match p {
                BoundaryPoint::Finite(z) => Some(z.0),
                BoundaryPoint::OmegaEnd => None,
            })
            .collect();
        // the pair merging highest meets at the tripod
        let mut best = (finite[0], self.h(finite[0], finite[1]));
        for (i, &p) in finite.iter().enumerate() {
            for &q in &finite[i + 1..] {
                let h = self.h(p, q);
                if h > best.1 {
                    best = (p, h);
                }
            }
        }
        Ok(self.canonical(best.0, best.1))
    }

    /// The Bourdon metric `ρ_x(a, b) = e^{-(a|b)_x}` on the boundary.
    pub fn bourdon_metric(&self, x: &TreePoint) -> ExtendedMetricSpace {
        let n = self.boundary_len();
        let pts = self.boundary_points();
        let mut heights = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let g = self.gromov(pts[i], pts[j], x);
                heights[i * n + j] = g;
                heights[j * n + i] = g;
            }
        }
        ExtendedMetricSpace::from_heights(self.base().labels().to_vec(), None, heights)
            .expect("a Bourdon metric is an ultrametric")
    }

    /// `ρ_{ω,o}(a, b) = ρ_o(a, b) / (ρ_o(a, ω) ρ_o(b, ω))` with remote point `ι(ω)`.
    pub fn boundary_metric_with_remote(&self, o: &TreePoint) -> ExtendedMetricSpace {
        let n = self.boundary_len();
        let w = self.omega().0;
        let pts = self.boundary_points();
        let mut heights = vec![f64::NEG_INFINITY; n * n];
        for i in 0..n {
            for j in i + 1..n {
                if i == w || j == w {
                    continue;
                }
                let g = self.gromov(pts[i], pts[j], o)
                    - self.gromov(pts[i], BoundaryPoint::OmegaEnd, o)
                    - self.gromov(pts[j], BoundaryPoint::OmegaEnd, o);
                heights[i * n + j] = g;
                heights[j * n + i] = g;
            }
        }
        ExtendedMetricSpace::from_heights(self.base().labels().to_vec(), Some(w), heights)
            .expect("the remote-point boundary metric is an ultrametric")
    }

    /// The boundary with its remote-point metric, pulled back along `ι` to
    /// the base point set.
    pub fn canonical_boundary_space(&self, o: &TreePoint) -> ExtendedMetricSpace {
        // boundary points already carry the index and label of their base point
        self.boundary_metric_with_remote(o)
    }

    /// `[u, 0]` for the least anchor `u`.
    pub fn default_base_point(&self) -> TreePoint {
        self.canonical(self.finite_indices()[0], 0.0)
    }
}
