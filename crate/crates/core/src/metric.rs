//! Extended metric spaces on finite point sets.
//!
//! A space stores its distance matrix exactly as supplied together with the
//! log-domain heights `h(x, y) = -ln ρ(x, y)`. At most one point may be the
//! remote point `ω`, which sits at distance `∞` from every other point.

use std::fmt;

use crate::error::{Axiom, Error, Result};

/// Comparison tolerance for derived reals: relative with an absolute floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rel: 1e-9,
            abs: 1e-12,
        }
    }
}

impl Tolerance {
    pub fn new(rel: f64) -> Self {
        Tolerance {
            rel,
            ..Tolerance::default()
        }
    }

    fn slack(&self, a: f64, b: f64) -> f64 {
        self.abs.max(self.rel * a.abs().max(b.abs()))
    }

    pub fn eq(&self, a: f64, b: f64) -> bool {
        a == b || (a - b).abs() <= self.slack(a, b)
    }

    /// `a ≤ b` up to tolerance.
    pub fn le(&self, a: f64, b: f64) -> bool {
        a <= b || self.eq(a, b)
    }

    /// `a < b` by more than the tolerance.
    pub fn lt(&self, a: f64, b: f64) -> bool {
        !self.le(b, a)
    }

    /// `|a - b| / max(|a|, |b|)`, or zero when the difference is below the
    /// absolute floor.
    pub fn relative_deviation(&self, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        let diff = (a - b).abs();
        if diff <= self.abs {
            0.0
        } else {
            diff / a.abs().max(b.abs())
        }
    }
}

/// A real number or `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum ExtReal {
    Finite(f64),
    Infinite,
}

impl ExtReal {
    pub fn from_f64(x: f64) -> Self {
        if x == f64::INFINITY {
            ExtReal::Infinite
        } else {
            ExtReal::Finite(x)
        }
    }

    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::Finite(x) => x,
            ExtReal::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, ExtReal::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(x) => Some(x),
            ExtReal::Infinite => None,
        }
    }

    /// Product with `c·∞ = ∞` for `c > 0`; `0·∞` is indeterminate.
    pub fn checked_mul(self, other: ExtReal) -> Result<ExtReal> {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => Ok(ExtReal::Finite(a * b)),
            (ExtReal::Finite(c), ExtReal::Infinite) | (ExtReal::Infinite, ExtReal::Finite(c)) => {
                if c > 0.0 {
                    Ok(ExtReal::Infinite)
                } else {
                    Err(Error::NumericDomain("0·∞ is indeterminate".into()))
                }
            }
            (ExtReal::Infinite, ExtReal::Infinite) => Ok(ExtReal::Infinite),
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(x) => write!(f, "{x}"),
            ExtReal::Infinite => f.write_str("inf"),
        }
    }
}

/// Dense index of a point within one space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PointId(pub usize);

impl PointId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for PointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A point `(a : b : c)` of the simplex Σ, stored with `a + b + c = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectiveTriple {
    entries: [f64; 3],
}

impl ProjectiveTriple {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let entries = [a, b, c];
        if entries.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::domain(format!(
                "projective triple entries must be finite and nonnegative, got ({a}, {b}, {c})"
            )));
        }
        if entries.iter().all(|x| *x == 0.0) {
            return Err(Error::domain("projective triple (0:0:0) is not a point"));
        }
        Ok(ProjectiveTriple { entries }.canonical())
    }

    pub fn entries(&self) -> [f64; 3] {
        self.entries
    }

    /// Rescales to unit entry sum. A triple whose sum is already one up to a
    /// few ulps is returned bit-for-bit.
    pub fn canonical(&self) -> Self {
        let sum: f64 = self.entries.iter().sum();
        if (sum - 1.0).abs() <= 4.0 * f64::EPSILON {
            return *self;
        }
        ProjectiveTriple {
            entries: self.entries.map(|x| x / sum),
        }
    }

    pub fn linf_distance(&self, other: &ProjectiveTriple) -> f64 {
        self.entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// The two largest entries coincide.
    pub fn is_ultrametric(&self, tol: Tolerance) -> bool {
        let mut e = self.entries;
        e.sort_by(|a, b| b.total_cmp(a));
        tol.eq(e[0], e[1])
    }
}

impl fmt::Display for ProjectiveTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.entries;
        write!(f, "({a} : {b} : {c})")
    }
}

pub fn is_ultrametric_point(t: &ProjectiveTriple, tol: Tolerance) -> bool {
    t.is_ultrametric(tol)
}

/// A distance written as `coef · ∞^order`; the remote point contributes order one.
#[derive(Clone, Copy)]
struct Scaled {
    coef: f64,
    order: u8,
}

impl Scaled {
    fn mul(self, other: Scaled) -> Scaled {
        Scaled {
            coef: self.coef * other.coef,
            order: self.order + other.order,
        }
    }
}

/// Finite point set with an extended metric.
#[derive(Debug, Clone)]
pub struct ExtendedMetricSpace {
    labels: Vec<String>,
    omega: Option<usize>,
    dist: Vec<f64>,
    heights: Vec<f64>,
    triangle: bool,
}

impl ExtendedMetricSpace {
    /// Builds and fully validates a space from an `n × n` row-major distance
    /// matrix. Remote entries are `f64::INFINITY`.
    pub fn new(labels: Vec<String>, omega: Option<usize>, dist: Vec<f64>) -> Result<Self> {
        let space = Self::new_relaxed(labels, omega, dist)?;
        space.require_triangle()?;
        Ok(space)
    }

    /// Like [`ExtendedMetricSpace::new`] but records a triangle-inequality
    /// failure in [`ExtendedMetricSpace::satisfies_triangle`] instead of
    /// rejecting.
    pub fn new_relaxed(labels: Vec<String>, omega: Option<usize>, dist: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        validate_shape(&labels, omega, dist.len())?;
        for i in 0..n {
            if dist[i * n + i] != 0.0 {
                return Err(Error::axiom(
                    Axiom::Diagonal,
                    format!("ρ({0}, {0}) = {1}", labels[i], dist[i * n + i]),
                ));
            }
        }
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let d = dist[i * n + j];
                let remote = omega == Some(i) || omega == Some(j);
                if remote {
                    if d != f64::INFINITY {
                        return Err(Error::axiom(
                            Axiom::RemotePoint,
                            format!("ρ({}, {}) = {d}, expected ∞", labels[i], labels[j]),
                        ));
                    }
                    continue;
                }
                if !d.is_finite() {
                    return Err(Error::axiom(
                        Axiom::Finiteness,
                        format!("ρ({}, {}) = {d}", labels[i], labels[j]),
                    ));
                }
                if d != dist[j * n + i] {
                    return Err(Error::axiom(
                        Axiom::Symmetry,
                        format!(
                            "ρ({0}, {1}) = {2} but ρ({1}, {0}) = {3}",
                            labels[i],
                            labels[j],
                            d,
                            dist[j * n + i]
                        ),
                    ));
                }
                if d <= 0.0 {
                    return Err(Error::axiom(
                        Axiom::Positivity,
                        format!("ρ({}, {}) = {d}", labels[i], labels[j]),
                    ));
                }
            }
        }
        let heights = dist
            .iter()
            .map(|&d| if d == 0.0 { f64::INFINITY } else { -d.ln() })
            .collect();
        Ok(Self::finish(labels, omega, dist, heights))
    }

    /// Builds a space from heights `h = -ln ρ`. Heights are kept exactly as
    /// given; remote entries are `-∞`, the diagonal is ignored.
    pub fn from_heights(labels: Vec<String>, omega: Option<usize>, heights: Vec<f64>) -> Result<Self> {
        let space = Self::from_heights_relaxed(labels, omega, heights)?;
        space.require_triangle()?;
        Ok(space)
    }

    pub fn from_heights_relaxed(
        labels: Vec<String>,
        omega: Option<usize>,
        mut heights: Vec<f64>,
    ) -> Result<Self> {
        let n = labels.len();
        validate_shape(&labels, omega, heights.len())?;
        for i in 0..n {
            heights[i * n + i] = f64::INFINITY;
            for j in 0..n {
                if i == j {
                    continue;
                }
                let h = heights[i * n + j];
                let remote = omega == Some(i) || omega == Some(j);
                if remote {
                    if h != f64::NEG_INFINITY {
                        return Err(Error::axiom(
                            Axiom::RemotePoint,
                            format!("h({}, {}) = {h}, expected -∞", labels[i], labels[j]),
                        ));
                    }
                    continue;
                }
                if !h.is_finite() {
                    let axiom = if h == f64::INFINITY {
                        Axiom::Positivity
                    } else {
                        Axiom::Finiteness
                    };
                    return Err(Error::axiom(
                        axiom,
                        format!("h({}, {}) = {h}", labels[i], labels[j]),
                    ));
                }
                if h != heights[j * n + i] {
                    return Err(Error::axiom(
                        Axiom::Symmetry,
                        format!("h({0}, {1}) ≠ h({1}, {0})", labels[i], labels[j]),
                    ));
                }
            }
        }
        let dist = heights
            .iter()
            .map(|&h| if h == f64::INFINITY { 0.0 } else { (-h).exp() })
            .collect::<Vec<_>>();
        for i in 0..n {
            for j in 0..n {
                let remote = omega == Some(i) || omega == Some(j);
                if i != j && !remote && (dist[i * n + j] == 0.0 || !dist[i * n + j].is_finite()) {
                    return Err(Error::axiom(
                        Axiom::Finiteness,
                        format!(
                            "height {} between {} and {} leaves the floating-point range",
                            heights[i * n + j],
                            labels[i],
                            labels[j]
                        ),
                    ));
                }
            }
        }
        Ok(Self::finish(labels, omega, dist, heights))
    }

    /// Builds from a symmetric distance function evaluated on `i < j`.
    pub fn from_fn(
        labels: Vec<String>,
        omega: Option<usize>,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let n = labels.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = if omega == Some(i) || omega == Some(j) {
                    f64::INFINITY
                } else {
                    f(i, j)
                };
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        Self::new(labels, omega, dist)
    }

    fn finish(labels: Vec<String>, omega: Option<usize>, dist: Vec<f64>, heights: Vec<f64>) -> Self {
        let mut space = ExtendedMetricSpace {
            labels,
            omega,
            dist,
            heights,
            triangle: true,
        };
        space.triangle = space.triangle_violation(Tolerance::default()).is_none();
        space
    }

    fn triangle_violation(&self, tol: Tolerance) -> Option<(usize, usize, usize)> {
        let finite = self.finite_indices();
        for &x in &finite {
            for &y in &finite {
                if y <= x {
                    continue;
                }
                let dxy = self.rho(x, y);
                for &z in &finite {
                    if z == x || z == y {
                        continue;
                    }
                    if !tol.le(dxy, self.rho(x, z) + self.rho(z, y)) {
                        return Some((x, y, z));
                    }
                }
            }
        }
        None
    }

    fn require_triangle(&self) -> Result<()> {
        match self.triangle_violation(Tolerance::default()) {
            None => Ok(()),
            Some((x, y, z)) => Err(Error::axiom(
                Axiom::Triangle,
                format!(
                    "ρ({0}, {1}) > ρ({0}, {2}) + ρ({2}, {1})",
                    self.labels[x], self.labels[y], self.labels[z]
                ),
            )),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, p: PointId) -> &str {
        &self.labels[p.0]
    }

    pub fn index_of(&self, label: &str) -> Option<PointId> {
        self.labels.iter().position(|l| l == label).map(PointId)
    }

    pub fn point(&self, label: &str) -> Result<PointId> {
        self.index_of(label)
            .ok_or_else(|| Error::UnknownPoint(label.to_string()))
    }

    pub fn points(&self) -> impl Iterator<Item = PointId> {
        (0..self.len()).map(PointId)
    }

    pub fn omega(&self) -> Option<PointId> {
        self.omega.map(PointId)
    }

    /// Points of `Z_ω`, in index order.
    pub fn finite_points(&self) -> Vec<PointId> {
        self.finite_indices().into_iter().map(PointId).collect()
    }

    pub(crate) fn finite_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| Some(i) != self.omega).collect()
    }

    pub(crate) fn omega_index(&self) -> Option<usize> {
        self.omega
    }

    /// Whether the triangle inequality holds on `Z_ω`. Always true for
    /// spaces built with the strict constructors.
    pub fn satisfies_triangle(&self) -> bool {
        self.triangle
    }

    pub fn check(&self, p: PointId) -> Result<()> {
        if p.0 < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownPoint(p.to_string()))
        }
    }

    pub fn dist(&self, x: PointId, y: PointId) -> ExtReal {
        ExtReal::from_f64(self.rho(x.0, y.0))
    }

    #[inline]
    pub(crate) fn rho(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.len() + j]
    }

    /// Log-domain distance; `+∞` on the diagonal, `-∞` against `ω`.
    #[inline]
    pub(crate) fn h(&self, i: usize, j: usize) -> f64 {
        self.heights[i * self.len() + j]
    }

    /// Full row-major distance matrix.
    pub fn distance_matrix(&self) -> &[f64] {
        &self.dist
    }

    pub fn height_matrix(&self) -> &[f64] {
        &self.heights
    }

    /// `h(z1, z2) = -ln ρ(z1, z2)` on `Z_ω`.
    pub fn height(&self, z1: PointId, z2: PointId) -> Result<ExtReal> {
        self.check(z1)?;
        self.check(z2)?;
        if self.omega == Some(z1.0) || self.omega == Some(z2.0) {
            return Err(Error::domain("height is undefined at the remote point"));
        }
        Ok(ExtReal::from_f64(self.h(z1.0, z2.0)))
    }

    pub fn is_admissible(&self, q: [PointId; 4]) -> Result<bool> {
        for p in q {
            self.check(p)?;
        }
        Ok(admissible(q.map(|p| p.0)))
    }

    /// Cross-ratio triple `(ρ(x,y)ρ(z,w) : ρ(x,z)ρ(y,w) : ρ(x,w)ρ(y,z))`.
    pub fn crt(&self, q: [PointId; 4]) -> Result<ProjectiveTriple> {
        if !self.is_admissible(q)? {
            return Err(Error::domain(format!(
                "quadruple ({}, {}, {}, {}) is not admissible",
                self.label(q[0]),
                self.label(q[1]),
                self.label(q[2]),
                self.label(q[3])
            )));
        }
        Ok(self.crt_unchecked(q.map(|p| p.0)))
    }

    fn scaled(&self, i: usize, j: usize) -> Scaled {
        if i != j && (self.omega == Some(i) || self.omega == Some(j)) {
            Scaled { coef: 1.0, order: 1 }
        } else {
            Scaled {
                coef: self.rho(i, j),
                order: 0,
            }
        }
    }

    fn pairings(&self, [x, y, z, w]: [usize; 4]) -> [Scaled; 3] {
        [
            self.scaled(x, y).mul(self.scaled(z, w)),
            self.scaled(x, z).mul(self.scaled(y, w)),
            self.scaled(x, w).mul(self.scaled(y, z)),
        ]
    }

    /// Cross-ratio triple of an admissible index quadruple. Powers of `∞`
    /// are factored out before normalizing.
    pub(crate) fn crt_unchecked(&self, q: [usize; 4]) -> ProjectiveTriple {
        let p = self.pairings(q);
        let top = p
            .iter()
            .filter(|s| s.coef > 0.0)
            .map(|s| s.order)
            .max()
            .unwrap_or(0);
        let e = p.map(|s| if s.order == top { s.coef } else { 0.0 });
        ProjectiveTriple::new(e[0], e[1], e[2]).expect("admissible quadruples give a point of Σ")
    }

    /// Classical cross ratio `[x,y,z,w] = ρ(x,z)ρ(y,w) / (ρ(x,y)ρ(z,w))`.
    pub fn classical_cross_ratio(&self, q: [PointId; 4]) -> Result<ExtReal> {
        self.crt(q)?;
        let idx = q.map(|p| p.0);
        let [den, num, _] = self.pairings(idx);
        for s in [den, num] {
            if s.coef == 0.0 && s.order > 0 {
                return Err(Error::NumericDomain(
                    "0·∞ product in the cross ratio".into(),
                ));
            }
        }
        match (num.coef == 0.0, den.coef == 0.0) {
            (true, true) => Err(Error::NumericDomain("0/0 cross ratio".into())),
            (false, true) => Ok(ExtReal::Infinite),
            (true, false) => Ok(ExtReal::Finite(0.0)),
            _ => Ok(match num.order.cmp(&den.order) {
                std::cmp::Ordering::Greater => ExtReal::Infinite,
                std::cmp::Ordering::Less => ExtReal::Finite(0.0),
                std::cmp::Ordering::Equal => ExtReal::Finite(num.coef / den.coef),
            }),
        }
    }

    /// Every distinct triple of `Z_ω` spans an ultrametric point.
    pub fn is_ultrametric(&self, tol: Tolerance) -> bool {
        self.ultrametric_violation(tol).is_none()
    }

    pub(crate) fn ultrametric_violation(&self, tol: Tolerance) -> Option<(usize, usize, usize)> {
        let finite = self.finite_indices();
        let m = finite.len();
        for a in 0..m {
            for b in a + 1..m {
                for c in b + 1..m {
                    let (x, y, z) = (finite[a], finite[b], finite[c]);
                    let mut e = [self.rho(x, y), self.rho(x, z), self.rho(y, z)];
                    e.sort_by(|p, q| q.total_cmp(p));
                    if !tol.eq(e[0], e[1]) {
                        return Some((x, y, z));
                    }
                }
            }
        }
        None
    }

    /// Same space with every stored distance multiplied by `c > 0`.
    pub fn scaled_by(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::domain(format!("scale factor {c} must be positive")));
        }
        let dist = self.dist.iter().map(|d| d * c).collect();
        Self::new_relaxed(self.labels.clone(), self.omega, dist)
    }

    /// Relabeled copy carrying the same matrix.
    pub fn with_labels(&self, labels: Vec<String>) -> Result<Self> {
        validate_shape(&labels, self.omega, self.dist.len())?;
        Ok(ExtendedMetricSpace {
            labels,
            ..self.clone()
        })
    }
}

pub(crate) fn admissible(q: [usize; 4]) -> bool {
    q.iter()
        .all(|p| q.iter().filter(|r| *r == p).count() < 3)
}

pub fn is_admissible(q: [PointId; 4]) -> bool {
    admissible(q.map(|p| p.0))
}

fn validate_shape(labels: &[String], omega: Option<usize>, entries: usize) -> Result<()> {
    let n = labels.len();
    if n < 3 {
        return Err(Error::axiom(
            Axiom::Cardinality,
            format!("a space needs at least 3 points, got {n}"),
        ));
    }
    if entries != n * n {
        return Err(Error::domain(format!(
            "matrix has {entries} entries, expected {}",
            n * n
        )));
    }
    for (i, l) in labels.iter().enumerate() {
        if l.is_empty() {
            return Err(Error::axiom(Axiom::Labels, format!("point {i} has an empty label")));
        }
        if labels[..i].contains(l) {
            return Err(Error::axiom(Axiom::Labels, format!("duplicate label {l:?}")));
        }
    }
    if let Some(w) = omega {
        if w >= n {
            return Err(Error::UnknownPoint(format!("#{w}")));
        }
    }
    Ok(())
}

/// Labels `p0, p1, …`.
pub fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("p{i}")).collect()
}
