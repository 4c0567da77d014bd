//! Möbius maps, Möbius equivalence and in-class metric changes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metric::{admissible, ExtendedMetricSpace, PointId, Tolerance};
use crate::par;

/// How admissible quadruples are enumerated by the validators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sweep {
    #[default]
    Exhaustive,
    /// A fixed number of admissible quadruples drawn from a seeded stream.
    Sampled { quadruples: usize, seed: u64 },
}

impl Sweep {
    /// Exhaustive up to `max_exhaustive` points, otherwise `quadruples` seeded samples.
    pub fn auto(n: usize, max_exhaustive: usize, quadruples: usize, seed: u64) -> Sweep {
        if n <= max_exhaustive {
            Sweep::Exhaustive
        } else {
            Sweep::Sampled { quadruples, seed }
        }
    }

    fn sample(&self, n: usize) -> Option<Vec<[usize; 4]>> {
        match *self {
            Sweep::Exhaustive => None,
            Sweep::Sampled { quadruples, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut out = Vec::with_capacity(quadruples);
                while out.len() < quadruples {
                    let q = [
                        rng.random_range(0..n),
                        rng.random_range(0..n),
                        rng.random_range(0..n),
                        rng.random_range(0..n),
                    ];
                    if admissible(q) {
                        out.push(q);
                    }
                }
                Some(out)
            }
        }
    }
}

/// Tolerance, quadruple sweep and execution mode shared by the validators.
#[derive(Debug, Clone, Copy)]
pub struct Checks {
    pub tol: Tolerance,
    pub sweep: Sweep,
    pub parallel: bool,
}

impl Default for Checks {
    fn default() -> Self {
        Checks {
            tol: Tolerance::default(),
            sweep: Sweep::Exhaustive,
            parallel: par::PARALLEL_AVAILABLE,
        }
    }
}

impl Checks {
    pub fn with_sweep(self, sweep: Sweep) -> Self {
        Checks { sweep, ..self }
    }

    pub fn sequential(self) -> Self {
        Checks {
            parallel: false,
            ..self
        }
    }
}

/// Aggregate over a quadruple sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SweepStats {
    pub checked: usize,
    pub max_deviation: f64,
    pub violations: usize,
}

impl SweepStats {
    fn merge(self, other: SweepStats) -> SweepStats {
        SweepStats {
            checked: self.checked + other.checked,
            max_deviation: self.max_deviation.max(other.max_deviation),
            violations: self.violations + other.violations,
        }
    }

    fn record(&mut self, (deviation, violated): (f64, bool)) {
        self.checked += 1;
        self.max_deviation = self.max_deviation.max(deviation);
        self.violations += usize::from(violated);
    }
}

/// Runs `f` over the admissible quadruples selected by `checks.sweep`.
pub(crate) fn sweep_quadruples<F>(n: usize, checks: &Checks, f: F) -> SweepStats
where
    F: Fn([usize; 4]) -> (f64, bool) + Send + Sync,
{
    match checks.sweep.sample(n) {
        Some(quads) => par::map_slice(&quads, checks.parallel, |q| f(*q))
            .into_iter()
            .fold(SweepStats::default(), |mut acc, r| {
                acc.record(r);
                acc
            }),
        None => par::map_indices(n, checks.parallel, |x| {
            let mut acc = SweepStats::default();
            for y in 0..n {
                for z in 0..n {
                    for w in 0..n {
                        let q = [x, y, z, w];
                        if admissible(q) {
                            acc.record(f(q));
                        }
                    }
                }
            }
            acc
        })
        .into_iter()
        .fold(SweepStats::default(), SweepStats::merge),
    }
}

/// Injective assignment from the points of one space to another.
#[derive(Debug, Clone)]
pub struct PointMap<'a> {
    source: &'a ExtendedMetricSpace,
    target: &'a ExtendedMetricSpace,
    assignment: Vec<PointId>,
}

impl<'a> PointMap<'a> {
    pub fn new(
        source: &'a ExtendedMetricSpace,
        target: &'a ExtendedMetricSpace,
        assignment: Vec<PointId>,
    ) -> Result<Self> {
        if assignment.len() != source.len() {
            return Err(Error::domain(format!(
                "map assigns {} points, source has {}",
                assignment.len(),
                source.len()
            )));
        }
        let mut seen = vec![false; target.len()];
        for &p in &assignment {
            target.check(p)?;
            if std::mem::replace(&mut seen[p.0], true) {
                return Err(Error::domain(format!(
                    "map is not injective: {} is hit twice",
                    target.label(p)
                )));
            }
        }
        Ok(PointMap {
            source,
            target,
            assignment,
        })
    }

    /// The identity between two metrics on the same labelled point set.
    pub fn identity(source: &'a ExtendedMetricSpace, target: &'a ExtendedMetricSpace) -> Result<Self> {
        if source.labels() != target.labels() {
            return Err(Error::domain("point sets differ"));
        }
        Self::new(source, target, source.points().collect())
    }

    pub fn source(&self) -> &'a ExtendedMetricSpace {
        self.source
    }

    pub fn target(&self) -> &'a ExtendedMetricSpace {
        self.target
    }

    pub fn image(&self, p: PointId) -> PointId {
        self.assignment[p.0]
    }

    pub fn assignment(&self) -> &[PointId] {
        &self.assignment
    }
}

/// L∞ deviation between source and image cross-ratio triples.
pub fn crt_deviation(m: &PointMap<'_>, checks: &Checks) -> SweepStats {
    let tol = checks.tol;
    sweep_quadruples(m.source.len(), checks, |q| {
        let before = m.source.crt_unchecked(q);
        let after = m.target.crt_unchecked(q.map(|i| m.assignment[i].0));
        let d = before.linf_distance(&after);
        (d, d > tol.rel)
    })
}

pub fn is_moebius_map(m: &PointMap<'_>, checks: &Checks) -> bool {
    crt_deviation(m, checks).violations == 0
}

pub fn are_moebius_equivalent(
    a: &ExtendedMetricSpace,
    b: &ExtendedMetricSpace,
    checks: &Checks,
) -> Result<bool> {
    let id = PointMap::identity(a, b)?;
    Ok(is_moebius_map(&id, checks))
}

/// Counts quadruples whose cross-ratio triple is not an ultrametric point.
pub fn ultrametric_crt_stats(space: &ExtendedMetricSpace, checks: &Checks) -> SweepStats {
    let tol = checks.tol;
    sweep_quadruples(space.len(), checks, |q| {
        let t = space.crt_unchecked(q);
        let mut e = t.entries();
        e.sort_by(|x, y| y.total_cmp(x));
        (e[0] - e[1], !tol.eq(e[0], e[1]))
    })
}

pub fn is_ultrametric_moebius(space: &ExtendedMetricSpace, checks: &Checks) -> bool {
    ultrametric_crt_stats(space, checks).violations == 0
}

/// Moves `omega` to infinity:
/// `ρ'(a, b) = ρ(a, b) · ρ(base, ω)² / (ρ(a, ω) ρ(b, ω))`.
///
/// The factor `ρ(base, ω)²` fixes the scale inside the Möbius class; it is 1
/// whenever `base` is antipodal to `ω` in a diameter-1 metric. The result is
/// flagged rather than rejected when it fails the triangle inequality.
pub fn send_to_infinity(
    space: &ExtendedMetricSpace,
    omega: PointId,
    base: PointId,
) -> Result<ExtendedMetricSpace> {
    space.check(omega)?;
    space.check(base)?;
    if let Some(w) = space.omega() {
        return Err(Error::domain(format!(
            "space already has remote point {}",
            space.label(w)
        )));
    }
    if omega == base {
        return Err(Error::domain("base point must differ from the point sent to infinity"));
    }
    let w = omega.0;
    let n = space.len();
    let scale = space.rho(base.0, w).powi(2);
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            dist[i * n + j] = if i == w || j == w {
                f64::INFINITY
            } else {
                space.rho(i, j) * scale / (space.rho(i, w) * space.rho(j, w))
            };
        }
    }
    ExtendedMetricSpace::new_relaxed(space.labels().to_vec(), Some(w), dist)
}

/// Pointwise conformal change `ρ'(a, b) = λ(a) λ(b) ρ(a, b)`.
///
/// On a space with a remote point, `λ` must be constant on the finite points.
pub fn rescale(space: &ExtendedMetricSpace, lambda: &[f64]) -> Result<ExtendedMetricSpace> {
    let n = space.len();
    if lambda.len() != n {
        return Err(Error::domain(format!(
            "rescaling needs {n} factors, got {}",
            lambda.len()
        )));
    }
    if let Some(bad) = lambda.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::domain(format!("rescaling factor {bad} is not positive")));
    }
    if let Some(w) = space.omega_index() {
        let finite: Vec<f64> = (0..n).filter(|&i| i != w).map(|i| lambda[i]).collect();
        if finite.iter().any(|l| *l != finite[0]) {
            return Err(Error::domain(
                "with a remote point only a constant rescaling of the finite points is Möbius",
            ));
        }
    }
    let mut dist = space.distance_matrix().to_vec();
    for i in 0..n {
        for j in 0..n {
            dist[i * n + j] *= lambda[i] * lambda[j];
        }
    }
    ExtendedMetricSpace::new_relaxed(space.labels().to_vec(), space.omega_index(), dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::default_labels;

    fn example_e() -> ExtendedMetricSpace {
        let inv_e = (-1.0f64).exp();
        let labels = ["a", "b", "c", "w"].map(String::from).to_vec();
        ExtendedMetricSpace::from_fn(labels, Some(3), |i, j| if (i, j) == (0, 1) { inv_e } else { 1.0 })
            .unwrap()
    }

    /// ρ(x,y)=t, ρ(z,w)=1/t, ρ(x,z)=s, ρ(y,w)=1/s, ρ(x,w)=r, ρ(y,z)=1/r.
    fn four_point(t: f64, s: f64, r: f64) -> ExtendedMetricSpace {
        ExtendedMetricSpace::from_fn(default_labels(4), None, |i, j| match (i, j) {
            (0, 1) => t,
            (2, 3) => 1.0 / t,
            (0, 2) => s,
            (1, 3) => 1.0 / s,
            (0, 3) => r,
            (1, 2) => 1.0 / r,
            _ => unreachable!(),
        })
        .unwrap()
    }

    #[test]
    fn identity_and_swap_are_moebius() {
        let e = example_e();
        let checks = Checks::default();
        assert!(is_moebius_map(&PointMap::identity(&e, &e).unwrap(), &checks));
        let swap = PointMap::new(&e, &e, vec![PointId(1), PointId(0), PointId(2), PointId(3)]).unwrap();
        assert!(is_moebius_map(&swap, &checks));
    }

    #[test]
    fn changed_distance_breaks_moebius() {
        let e = example_e();
        let labels = e.labels().to_vec();
        let e2 = ExtendedMetricSpace::from_fn(labels, Some(3), |i, j| if (i, j) == (0, 1) { 0.5 } else { 1.0 })
            .unwrap();
        let m = PointMap::identity(&e, &e2).unwrap();
        assert!(!is_moebius_map(&m, &Checks::default()));
    }

    #[test]
    fn non_injective_map_rejected() {
        let e = example_e();
        assert!(PointMap::new(&e, &e, vec![PointId(0), PointId(0), PointId(2), PointId(3)]).is_err());
    }

    #[test]
    fn equivalence_examples() {
        let checks = Checks::default();
        let e = example_e();
        let twice = e.scaled_by(2.0).unwrap();
        assert!(are_moebius_equivalent(&e, &e, &checks).unwrap());
        assert!(are_moebius_equivalent(&e, &twice, &checks).unwrap());

        let warped = four_point(1.1, 0.95, 1.05);
        let ones = four_point(1.0, 1.0, 1.0);
        assert!(are_moebius_equivalent(&warped, &ones, &checks).unwrap());
        assert!(is_ultrametric_moebius(&warped, &checks));
        assert!(!warped.is_ultrametric(checks.tol));

        let other = ExtendedMetricSpace::from_fn(default_labels(5), None, |_, _| 1.0).unwrap();
        assert!(are_moebius_equivalent(&e, &other, &checks).is_err());
    }

    #[test]
    fn ultrametric_moebius_examples() {
        let checks = Checks::default();
        assert!(is_ultrametric_moebius(&example_e(), &checks));
        // crt(x,y,z,w) = (ρxy ρzw : ρxz ρyw : ρxw ρyz) = (0.5 : 0.3 : 0.2)
        let s = ExtendedMetricSpace::from_fn(default_labels(4), None, |i, j| match (i, j) {
            (0, 1) => 0.5,
            (0, 2) => 0.3,
            (0, 3) => 0.2,
            _ => 0.3,
        })
        .unwrap();
        let t = s.crt([PointId(0), PointId(1), PointId(2), PointId(3)]).unwrap();
        assert!((t.entries()[0] - 0.5).abs() < 1e-15);
        assert!(!is_ultrametric_moebius(&s, &checks));
    }

    #[test]
    fn send_to_infinity_contract() {
        let checks = Checks::default();
        let e = example_e();
        assert!(send_to_infinity(&e, PointId(3), PointId(0)).is_err());

        // Bourdon-type metric on {a, b, c, w}: ρ(a,b) = 1/e, the rest 1.
        let inv_e = (-1.0f64).exp();
        let labels = e.labels().to_vec();
        let bourdon = ExtendedMetricSpace::from_fn(labels, None, |i, j| if (i, j) == (0, 1) { inv_e } else { 1.0 })
            .unwrap();
        let sent = send_to_infinity(&bourdon, PointId(3), PointId(0)).unwrap();
        assert_eq!(sent.omega(), Some(PointId(3)));
        assert!((sent.dist(PointId(0), PointId(1)).to_f64() - inv_e).abs() < 1e-15);
        assert!(sent.satisfies_triangle());
        assert!(sent.is_ultrametric(checks.tol));
        assert!(are_moebius_equivalent(&bourdon, &sent, &checks).unwrap());
    }

    #[test]
    fn rescale_examples() {
        let checks = Checks::default();
        let e = example_e();
        let same = rescale(&e, &[1.0; 4]).unwrap();
        assert_eq!(same.distance_matrix(), e.distance_matrix());
        let quad = rescale(&e, &[2.0; 4]).unwrap();
        assert_eq!(quad.dist(PointId(0), PointId(2)).to_f64(), 4.0);
        assert!(are_moebius_equivalent(&e, &quad, &checks).unwrap());
        assert!(rescale(&e, &[1.0, 0.0, 1.0, 1.0]).is_err());
        assert!(rescale(&e, &[2.0, 1.0, 1.0, 1.0]).is_err());
        // large λ on one point can break the triangle inequality; flagged, not rejected
        let bounded = four_point(1.0, 1.0, 1.0);
        let warped = rescale(&bounded, &[10.0, 0.1, 1.0, 1.0]).unwrap();
        assert!(!warped.satisfies_triangle());
        assert!(are_moebius_equivalent(&bounded, &warped, &checks).unwrap());
    }

    #[test]
    fn sampled_sweep_is_deterministic() {
        let s = four_point(1.1, 0.95, 1.05);
        let c = Checks::default().with_sweep(Sweep::Sampled { quadruples: 500, seed: 7 });
        let a = ultrametric_crt_stats(&s, &c);
        let b = ultrametric_crt_stats(&s, &c.sequential());
        assert_eq!(a, b);
        assert_eq!(a.checked, 500);
    }

    #[test]
    fn parallel_and_sequential_sweeps_agree() {
        let e = example_e();
        let c = Checks::default();
        assert_eq!(ultrametric_crt_stats(&e, &c), ultrametric_crt_stats(&e, &c.sequential()));
    }
}
