//! Antipodal diameter-1 metrics on the boundary, the metric derivative, and
//! the embedding `x ↦ ρ_x` of a filling into that space of metrics.

use crate::boundary::BoundaryPoint;
use crate::error::{Error, Result};
use crate::filling::{FillingTree, TreePoint};
use crate::metric::{ExtendedMetricSpace, PointId, Tolerance};
use crate::moebius::{crt_deviation, Checks, PointMap};

/// Diameter 1, and every point is at distance 1 from some other point.
pub fn is_antipodal_diam1(space: &ExtendedMetricSpace, tol: Tolerance) -> bool {
    let n = space.len();
    if space.omega().is_some() || n < 2 {
        return false;
    }
    (0..n).all(|i| {
        let far = (0..n)
            .filter(|&j| j != i)
            .map(|j| space.rho(i, j))
            .fold(0.0, f64::max);
        tol.eq(far, 1.0)
    })
}

fn check_pair(rho1: &ExtendedMetricSpace, rho2: &ExtendedMetricSpace, checks: &Checks) -> Result<()> {
    if rho1.labels() != rho2.labels() {
        return Err(Error::domain("metrics live on different point sets"));
    }
    if rho1.len() < 3 {
        return Err(Error::domain("the metric derivative needs at least three points"));
    }
    for (name, rho) in [("first", rho1), ("second", rho2)] {
        if !is_antipodal_diam1(rho, checks.tol) {
            return Err(Error::contract(format!(
                "{name} metric is not antipodal of diameter 1"
            )));
        }
    }
    let m = PointMap::identity(rho1, rho2)?;
    let stats = crt_deviation(&m, checks);
    if stats.violations > 0 {
        return Err(Error::contract(format!(
            "metrics are not Möbius equivalent (max crt deviation {:e})",
            stats.max_deviation
        )));
    }
    Ok(())
}

/// `ln (dρ1/dρ2)(ξ)` for an explicit choice of `η, η′`, without checking
/// that the two metrics are Möbius equivalent.
pub fn log_metric_derivative_with(
    rho1: &ExtendedMetricSpace,
    rho2: &ExtendedMetricSpace,
    xi: PointId,
    eta: PointId,
    eta2: PointId,
) -> Result<f64> {
    for p in [xi, eta, eta2] {
        rho1.check(p)?;
        rho2.check(p)?;
    }
    if xi == eta || xi == eta2 || eta == eta2 {
        return Err(Error::domain("ξ, η, η′ must be distinct"));
    }
    let (x, e, f) = (xi.0, eta.0, eta2.0);
    // ρ1(ξ,η) ρ1(ξ,η′) ρ2(η,η′) / (ρ1(η,η′) ρ2(ξ,η) ρ2(ξ,η′)), the normalization
    // under which ρ1 = λ(a) λ(b) ρ2 has derivative λ(ξ)².
    let value = (rho2.h(x, e) + rho2.h(x, f) - rho2.h(e, f)) - (rho1.h(x, e) + rho1.h(x, f) - rho1.h(e, f));
    if !value.is_finite() {
        return Err(Error::NumericDomain(format!(
            "zero or infinite distance among {xi}, {eta}, {eta2}"
        )));
    }
    Ok(value)
}

fn canonical_etas(n: usize, xi: usize) -> (PointId, PointId) {
    let mut others = (0..n).filter(|&i| i != xi);
    let e = others.next().expect("at least three points");
    let f = others.next().expect("at least three points");
    (PointId(e), PointId(f))
}

/// `(dρ1/dρ2)(ξ)` with `η, η′` the two least indices other than `ξ`.
pub fn metric_derivative(
    rho1: &ExtendedMetricSpace,
    rho2: &ExtendedMetricSpace,
    xi: PointId,
    checks: &Checks,
) -> Result<f64> {
    check_pair(rho1, rho2, checks)?;
    rho1.check(xi)?;
    let (e, f) = canonical_etas(rho1.len(), xi.0);
    Ok(log_metric_derivative_with(rho1, rho2, xi, e, f)?.exp())
}

/// `ln (dρ1/dρ2)(ζ)` for every point `ζ`, validating the pair once.
pub fn log_metric_derivatives(
    rho1: &ExtendedMetricSpace,
    rho2: &ExtendedMetricSpace,
    checks: &Checks,
) -> Result<Vec<f64>> {
    check_pair(rho1, rho2, checks)?;
    rho1.points()
        .map(|xi| {
            let (e, f) = canonical_etas(rho1.len(), xi.0);
            log_metric_derivative_with(rho1, rho2, xi, e, f)
        })
        .collect()
}

/// `max_ζ ln (dρ1/dρ2)(ζ)`.
pub fn dist_ma1(rho1: &ExtendedMetricSpace, rho2: &ExtendedMetricSpace, checks: &Checks) -> Result<f64> {
    let logs = log_metric_derivatives(rho1, rho2, checks)?;
    Ok(logs.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// The tree point whose Bourdon metric is `rho`.
pub fn reconstruct_point(tree: &FillingTree, rho: &ExtendedMetricSpace, tol: Tolerance) -> Result<TreePoint> {
    if rho.labels() != tree.base().labels() {
        return Err(Error::domain("metric and filling have different point sets"));
    }
    if rho.omega().is_some() {
        return Err(Error::domain("expected a bounded metric without remote point"));
    }
    if !is_antipodal_diam1(rho, tol) {
        return Err(Error::contract("metric is not antipodal of diameter 1"));
    }
    if let Some((i, j, k)) = rho.ultrametric_violation(tol) {
        return Err(Error::contract(format!(
            "metric is not ultrametric on ({}, {}, {})",
            rho.labels()[i],
            rho.labels()[j],
            rho.labels()[k]
        )));
    }
    let n = rho.len();
    let (ia, ib) = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .find(|&(i, j)| tol.eq(rho.rho(i, j), 1.0))
        .ok_or_else(|| Error::contract("no antipodal pair"))?;
    let ic = (0..n)
        .find(|&k| k != ia && k != ib)
        .ok_or_else(|| Error::contract("fewer than three boundary points"))?;
    let (ia, ib) = if tol.eq(rho.rho(ia, ic), 1.0) { (ia, ib) } else { (ib, ia) };
    let (a, b, c) = (
        tree.boundary_point(PointId(ia)),
        tree.boundary_point(PointId(ib)),
        tree.boundary_point(PointId(ic)),
    );
    let tripod = tree.boundary_tripod(a, b, c)?;
    let x = tree.toward(&tripod, a, rho.h(ib, ic));

    let bourdon = tree.bourdon_metric(&x);
    let mut worst = (0.0, 0, 0);
    for i in 0..n {
        for j in i + 1..n {
            let dev = tol.relative_deviation(bourdon.rho(i, j), rho.rho(i, j));
            if dev > worst.0 {
                worst = (dev, i, j);
            }
        }
    }
    if worst.0 > tol.rel {
        let (dev, i, j) = worst;
        return Err(Error::contract(format!(
            "no tree point has this Bourdon metric: candidate {x} misses ({}, {}) by relative {dev:e}",
            rho.labels()[i],
            rho.labels()[j]
        )));
    }
    Ok(x)
}

/// The boundary point with a given index, for callers that hold only labels.
pub fn boundary_of(tree: &FillingTree, label: &str) -> Result<BoundaryPoint> {
    Ok(tree.boundary_point(tree.base().point(label)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::default_labels;

    fn example_e() -> FillingTree {
        let inv_e = (-1.0f64).exp();
        let labels = ["a", "b", "c", "w"].map(String::from).to_vec();
        let base = ExtendedMetricSpace::from_fn(labels, Some(3), |i, j| if (i, j) == (0, 1) { inv_e } else { 1.0 })
            .unwrap();
        FillingTree::new(base).unwrap()
    }

    #[test]
    fn bourdon_metrics_are_antipodal() {
        let x = example_e();
        for t in [-1.0, 0.0, 0.3, 1.0, 2.5] {
            for a in ["a", "b", "c"] {
                let rho = x.bourdon_metric(&x.point_by_label(a, t).unwrap());
                assert!(is_antipodal_diam1(&rho, Tolerance::default()));
                assert!(rho.is_ultrametric(Tolerance::default()));
            }
        }
    }

    #[test]
    fn antipodality_failures() {
        let tol = Tolerance::default();
        let half = ExtendedMetricSpace::from_fn(default_labels(3), None, |_, _| 0.5).unwrap();
        assert!(!is_antipodal_diam1(&half, tol));
        let lonely = ExtendedMetricSpace::from_fn(default_labels(4), None, |i, j| match (i, j) {
            (0, 1) => 1.0,
            (_, 3) => 0.9,
            _ => 0.95,
        })
        .unwrap();
        assert!(!is_antipodal_diam1(&lonely, tol));
    }

    #[test]
    fn derivative_examples() {
        let x = example_e();
        let checks = Checks::default();
        let r0 = x.bourdon_metric(&x.point_by_label("a", 0.0).unwrap());
        let r1 = x.bourdon_metric(&x.point_by_label("a", 1.0).unwrap());
        let e = std::f64::consts::E;
        assert!((metric_derivative(&r1, &r0, PointId(0), &checks).unwrap() - e).abs() < 1e-12);
        assert!((metric_derivative(&r1, &r0, PointId(3), &checks).unwrap() - 1.0 / e).abs() < 1e-12);
        for p in r0.points() {
            assert!((metric_derivative(&r0, &r0, p, &checks).unwrap() - 1.0).abs() < 1e-15);
        }
        assert!((dist_ma1(&r0, &r1, &checks).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(dist_ma1(&r0, &r0, &checks).unwrap(), 0.0);
    }

    #[test]
    fn derivative_rejects_inequivalent_metrics() {
        let x = example_e();
        let checks = Checks::default();
        let r0 = x.bourdon_metric(&x.point_by_label("a", 0.0).unwrap());
        let other = ExtendedMetricSpace::from_fn(x.base().labels().to_vec(), None, |i, j| {
            if (i, j) == (0, 1) { 0.5 } else { 1.0 }
        })
        .unwrap();
        let err = metric_derivative(&r0, &other, PointId(0), &checks).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn reconstruct_examples() {
        let x = example_e();
        let tol = Tolerance::default();
        for (a, t) in [("a", 2.0), ("b", 1.5), ("c", -0.5), ("a", 0.5), ("c", 3.0)] {
            let p = x.point_by_label(a, t).unwrap();
            let q = reconstruct_point(&x, &x.bourdon_metric(&p), tol).unwrap();
            assert!(x.same_point(&p, &q).unwrap(), "{p} vs {q}");
        }
        let p = x.point_by_label("a", 2.0).unwrap();
        let rho = x.bourdon_metric(&p);
        let mut dist = rho.distance_matrix().to_vec();
        let n = rho.len();
        dist[n + 2] *= 1.0 - 1e-3;
        dist[2 * n + 1] = dist[n + 2];
        let bent = ExtendedMetricSpace::new_relaxed(rho.labels().to_vec(), None, dist).unwrap();
        assert!(matches!(reconstruct_point(&x, &bent, tol), Err(Error::Contract(_))));
    }
}
