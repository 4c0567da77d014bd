//! The acceptance battery: ten seeded randomized checks with pinned
//! tolerances, each reporting pass/fail with a one-line diagnostic.

use std::collections::{HashMap, VecDeque};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::antipodal::{dist_ma1, log_metric_derivatives, reconstruct_point};
use crate::boundary::BoundaryPoint;
use crate::error::Result;
use crate::filling::{FillingTree, TreePoint};
use crate::lifting::{lift, lift_with_frame, roundtrip_isometry, signed_tripod_displacement, verify_isometric_embedding, BoundaryMap};
use crate::metric::{ExtendedMetricSpace, PointId, Tolerance};
use crate::moebius::{crt_deviation, is_ultrametric_moebius, rescale, send_to_infinity, ultrametric_crt_stats, Checks, PointMap, Sweep};
use crate::par;
use crate::random::{random_boundary_points, random_permutation, random_tree_point, random_ultrametric, SpaceShape};

#[derive(Debug, Clone, Copy)]
pub struct SuiteConfig {
    pub seed: u64,
    pub tol: Tolerance,
    pub parallel: bool,
    /// Quadruple sweeps are exhaustive up to this many points.
    pub max_exhaustive: usize,
    /// Seeded quadruple sample size above `max_exhaustive`.
    pub sampled_quadruples: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 0,
            tol: Tolerance::default(),
            parallel: par::PARALLEL_AVAILABLE,
            max_exhaustive: 12,
            sampled_quadruples: 10_000,
        }
    }
}

impl SuiteConfig {
    fn checks(&self, n: usize, stream: u64) -> Checks {
        Checks {
            tol: self.tol,
            sweep: Sweep::auto(n, self.max_exhaustive, self.sampled_quadruples, self.seed ^ stream.wrapping_mul(0xd1b5_4a32_d192_ed03)),
            parallel: false,
        }
    }

    fn rng(&self, criterion: u64, trial: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ criterion.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        rng.set_stream(trial as u64);
        rng
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub passed: bool,
    pub elapsed_seconds: f64,
    pub criteria: Vec<CriterionOutcome>,
}

pub const CRITERIA: [(u32, &str); 10] = [
    (1, "filling-boundary isometry"),
    (2, "canonical Möbius structure"),
    (3, "ultrametric boundary cross ratios"),
    (4, "antipodal metrics isometry"),
    (5, "signed tripod displacement"),
    (6, "lifting boundary maps"),
    (7, "fill and read-back round trip"),
    (8, "point reconstruction"),
    (9, "distance formula vs graph oracle"),
    (10, "validator sensitivity"),
];

pub fn run_suite(cfg: &SuiteConfig) -> SuiteReport {
    let start = Instant::now();
    let criteria: Vec<CriterionOutcome> = CRITERIA.iter().map(|&(id, _)| run_criterion(id, cfg)).collect();
    SuiteReport {
        seed: cfg.seed,
        passed: criteria.iter().all(|c| c.passed),
        elapsed_seconds: start.elapsed().as_secs_f64(),
        criteria,
    }
}

pub fn run_criterion(id: u32, cfg: &SuiteConfig) -> CriterionOutcome {
    let name = CRITERIA
        .iter()
        .find(|c| c.0 == id)
        .map(|c| c.1)
        .unwrap_or_else(|| panic!("no criterion {id}"));
    let start = Instant::now();
    let (passed, detail) = match id {
        1 => criterion_1(cfg),
        2 => criterion_2(cfg),
        3 => criterion_3(cfg),
        4 => criterion_4(cfg),
        5 => criterion_5(cfg),
        6 => criterion_6(cfg),
        7 => criterion_7(cfg),
        8 => criterion_8(cfg),
        9 => criterion_9(cfg),
        _ => criterion_10(cfg),
    };
    CriterionOutcome {
        id,
        name,
        passed,
        detail,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    }
}

/// Worst deviation and the first error seen across trials.
#[derive(Default)]
struct Tally {
    worst: f64,
    errors: usize,
    first_error: Option<String>,
}

impl Tally {
    fn collect(results: Vec<Result<f64>>) -> Tally {
        let mut t = Tally::default();
        for r in results {
            match r {
                Ok(d) => t.worst = t.worst.max(d),
                Err(e) => {
                    t.errors += 1;
                    t.first_error.get_or_insert_with(|| e.to_string());
                }
            }
        }
        t
    }

    fn errors_note(&self) -> String {
        match &self.first_error {
            None => String::new(),
            Some(e) => format!("; {} trial errors, first: {e}", self.errors),
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn c1_space(cfg: &SuiteConfig, trial: usize) -> ExtendedMetricSpace {
    let mut rng = cfg.rng(1, trial);
    let n = rng.random_range(3..=64);
    random_ultrametric(&mut rng, SpaceShape::new(n))
}

const C1_SPACES: usize = 200;

fn criterion_1(cfg: &SuiteConfig) -> (bool, String) {
    let start = Instant::now();
    let results = par::map_indices(C1_SPACES, cfg.parallel, |trial| {
        let space = c1_space(cfg, trial);
        let tree = FillingTree::with_tolerance(space.clone(), cfg.tol)?;
        let recovered = tree.boundary_metric_with_remote(&tree.default_base_point());
        let f = space.finite_points();
        let mut worst: f64 = 0.0;
        for (k, &a) in f.iter().enumerate() {
            for &b in &f[k + 1..] {
                worst = worst.max(rel(recovered.dist(a, b).to_f64(), space.dist(a, b).to_f64()));
            }
        }
        Ok(worst)
    });
    let t = Tally::collect(results);
    let secs = start.elapsed().as_secs_f64();
    let passed = t.errors == 0 && t.worst <= cfg.tol.rel && secs <= 30.0;
    (
        passed,
        format!(
            "{C1_SPACES} spaces, max relative error {:.3e} (limit {:e}), {secs:.2} s (limit 30 s){}",
            t.worst,
            cfg.tol.rel,
            t.errors_note()
        ),
    )
}

struct BourdonPairStats {
    crt: f64,
    crt_violations: usize,
    rescale: f64,
    non_ultrametric: usize,
    quadruples: usize,
}

fn bourdon_pairs(cfg: &SuiteConfig) -> Vec<Result<BourdonPairStats>> {
    par::map_indices(50, cfg.parallel, |trial| {
        let mut rng = cfg.rng(2, trial);
        let n = rng.random_range(4..=40);
        let tree = FillingTree::with_tolerance(random_ultrametric(&mut rng, SpaceShape::new(n)), cfg.tol)?;
        let checks = cfg.checks(n, trial as u64);
        let mut s = BourdonPairStats {
            crt: 0.0,
            crt_violations: 0,
            rescale: 0.0,
            non_ultrametric: 0,
            quadruples: 0,
        };
        let ends = tree.boundary_points();
        for _ in 0..5 {
            let x = random_tree_point(&tree, &mut rng, 2.0);
            let y = random_tree_point(&tree, &mut rng, 2.0);
            let rx = tree.bourdon_metric(&x);
            let ry = tree.bourdon_metric(&y);
            let stats = crt_deviation(&PointMap::identity(&rx, &ry)?, &checks);
            s.crt = s.crt.max(stats.max_deviation);
            s.crt_violations += stats.violations;
            for r in [&rx, &ry] {
                let u = ultrametric_crt_stats(r, &checks);
                s.non_ultrametric += u.violations;
                s.quadruples += u.checked;
            }
            let lambda: Vec<f64> = ends.iter().map(|&z| (0.5 * tree.busemann(z, &x, &y)).exp()).collect();
            let scaled = rescale(&rx, &lambda)?;
            for i in 0..n {
                for j in i + 1..n {
                    let (p, q) = (PointId(i), PointId(j));
                    s.rescale = s.rescale.max(rel(scaled.dist(p, q).to_f64(), ry.dist(p, q).to_f64()));
                }
            }
        }
        Ok(s)
    })
}

fn criterion_2(cfg: &SuiteConfig) -> (bool, String) {
    let mut crt: f64 = 0.0;
    let mut violations = 0;
    let mut resc: f64 = 0.0;
    let mut errors = Vec::new();
    for r in bourdon_pairs(cfg) {
        match r {
            Ok(s) => {
                crt = crt.max(s.crt);
                violations += s.crt_violations;
                resc = resc.max(s.rescale);
            }
            Err(e) => errors.push(e.to_string()),
        }
    }
    let passed = errors.is_empty() && violations == 0 && crt <= cfg.tol.rel && resc <= cfg.tol.rel;
    (
        passed,
        format!(
            "50 fillings x 5 pairs: max crt deviation {crt:.3e}, max rescaling error {resc:.3e}{}",
            errors.first().map(|e| format!("; error: {e}")).unwrap_or_default()
        ),
    )
}

fn criterion_3(cfg: &SuiteConfig) -> (bool, String) {
    let mut bad = 0;
    let mut total = 0;
    let mut errors = Vec::new();
    for r in bourdon_pairs(cfg) {
        match r {
            Ok(s) => {
                bad += s.non_ultrametric;
                total += s.quadruples;
            }
            Err(e) => errors.push(e.to_string()),
        }
    }
    (
        errors.is_empty() && bad == 0,
        format!(
            "{bad} of {total} boundary cross-ratio triples are not ultrametric{}",
            errors.first().map(|e| format!("; error: {e}")).unwrap_or_default()
        ),
    )
}

fn criterion_4(cfg: &SuiteConfig) -> (bool, String) {
    let results = par::map_indices(100, cfg.parallel, |trial| -> Result<(f64, f64)> {
        let mut rng = cfg.rng(4, trial);
        let n = rng.random_range(3..=32);
        let tree = FillingTree::with_tolerance(random_ultrametric(&mut rng, SpaceShape::new(n)), cfg.tol)?;
        let checks = cfg.checks(n, trial as u64);
        let ends = tree.boundary_points();
        let (mut dist_err, mut busemann_err): (f64, f64) = (0.0, 0.0);
        for _ in 0..10 {
            let x = random_tree_point(&tree, &mut rng, 2.0);
            let y = random_tree_point(&tree, &mut rng, 2.0);
            let rx = tree.bourdon_metric(&x);
            let ry = tree.bourdon_metric(&y);
            dist_err = dist_err.max((dist_ma1(&rx, &ry, &checks)? - tree.distance(&x, &y)).abs());
            let logs = log_metric_derivatives(&ry, &rx, &checks)?;
            for (z, l) in ends.iter().zip(logs) {
                busemann_err = busemann_err.max((l - tree.busemann(*z, &x, &y)).abs());
            }
        }
        Ok((dist_err, busemann_err))
    });
    let (mut d, mut b) = (0.0f64, 0.0f64);
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok((x, y)) => {
                d = d.max(x);
                b = b.max(y);
            }
            Err(e) => errors.push(e.to_string()),
        }
    }
    (
        errors.is_empty() && d <= cfg.tol.rel && b <= cfg.tol.rel,
        format!(
            "100 fillings x 10 pairs: max |d_Ma1 - d| {d:.3e}, max |ln dρ_y/dρ_x - B| {b:.3e}{}",
            errors.first().map(|e| format!("; error: {e}")).unwrap_or_default()
        ),
    )
}

/// Signed distance from `Trip(a,b,c1)` to `Trip(a,b,c2)`, positive toward
/// `b`, computed from probe points far out on the rays and tree geodesics.
fn probe_displacement(
    tree: &FillingTree,
    a: BoundaryPoint,
    b: BoundaryPoint,
    c1: BoundaryPoint,
    c2: BoundaryPoint,
) -> f64 {
    let (lo, hi) = tree.height_range();
    let depth = 2.0 * lo.abs().max(hi.abs()) + 10.0;
    let pa = tree.ray_probe(a, depth);
    let pb = tree.ray_probe(b, depth);
    let u1 = tree.tripod(&pa, &pb, &tree.ray_probe(c1, depth));
    let u2 = tree.tripod(&pa, &pb, &tree.ray_probe(c2, depth));
    let d = tree.distance(&u1, &u2);
    let toward_b = tree
        .tolerance()
        .eq(tree.distance(&u1, &pb), d + tree.distance(&u2, &pb));
    if toward_b {
        d
    } else {
        -d
    }
}

fn criterion_5(cfg: &SuiteConfig) -> (bool, String) {
    let results = par::map_indices(50, cfg.parallel, |trial| -> Result<(f64, usize)> {
        let mut rng = cfg.rng(5, trial);
        let n = rng.random_range(4..=20);
        let mut shape = SpaceShape::new(n);
        if trial % 2 == 0 {
            // coarse grid: many tied merge heights, many zero displacements
            shape = shape.on_grid(2.0);
        }
        let tree = FillingTree::with_tolerance(random_ultrametric(&mut rng, shape), cfg.tol)?;
        let mut worst: f64 = 0.0;
        let mut zeros = 0;
        for k in 0..10 {
            let pts = random_boundary_points(&tree, &mut rng, 4);
            let (a, b, c1) = (pts[0], pts[1], pts[2]);
            let c2 = if k % 5 == 0 { c1 } else { pts[3] };
            let got = signed_tripod_displacement(&tree, a, b, c1, c2)?;
            let expected = probe_displacement(&tree, a, b, c1, c2);
            if expected == 0.0 {
                zeros += 1;
            }
            worst = worst.max((got - expected).abs());
        }
        Ok((worst, zeros))
    });
    let mut worst: f64 = 0.0;
    let mut zeros = 0;
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok((w, z)) => {
                worst = worst.max(w);
                zeros += z;
            }
            Err(e) => errors.push(e.to_string()),
        }
    }
    (
        errors.is_empty() && worst <= cfg.tol.rel && zeros > 0,
        format!(
            "500 quadruples ({zeros} with zero displacement): max deviation {worst:.3e}{}",
            errors.first().map(|e| format!("; error: {e}")).unwrap_or_default()
        ),
    )
}

type KnownIsometry = Box<dyn Fn(&FillingTree, &TreePoint) -> Result<TreePoint> + Send + Sync>;

/// A pair of fillings with a boundary Möbius map between them and, when
/// known, the isometry that should come out of lifting it.
struct LiftCase {
    source: FillingTree,
    target: FillingTree,
    assignment: Vec<PointId>,
    known: Option<KnownIsometry>,
}

fn heights_of(space: &ExtendedMetricSpace) -> Vec<f64> {
    space.height_matrix().to_vec()
}

fn lift_case(cfg: &SuiteConfig, trial: usize, rng: &mut ChaCha8Rng) -> Result<LiftCase> {
    let n = rng.random_range(5..=14);
    let base = random_ultrametric(rng, SpaceShape::new(n));
    let w = base.omega().expect("generated with a remote point").0;
    Ok(match trial % 4 {
        0 => {
            // relabel by a permutation and scale by c: [z, t] ↦ [πz, t - ln c]
            let pi = random_permutation(rng, n);
            let ln_c: f64 = rng.random_range(-2.0..2.0);
            let h = heights_of(&base);
            let mut h2 = vec![0.0; n * n];
            let mut labels = vec![String::new(); n];
            for i in 0..n {
                labels[pi[i]] = format!("q{i}");
                for j in 0..n {
                    h2[pi[i] * n + pi[j]] = if i == j { f64::INFINITY } else { h[i * n + j] - ln_c };
                }
            }
            let target = ExtendedMetricSpace::from_heights(labels, Some(pi[w]), h2)?;
            let pi2 = pi.clone();
            LiftCase {
                source: FillingTree::with_tolerance(base, cfg.tol)?,
                target: FillingTree::with_tolerance(target, cfg.tol)?,
                assignment: pi.iter().map(|&p| PointId(p)).collect(),
                known: Some(Box::new(move |t, x| t.point(PointId(pi2[x.anchor().0]), x.height() - ln_c))),
            }
        }
        1 => {
            // the filling of a subspace sits inside the filling of the whole
            let mut keep: Vec<usize> = (0..n).filter(|&i| i != w).collect();
            let k = rng.random_range(2..=keep.len());
            let perm = random_permutation(rng, keep.len());
            keep = perm[..k].iter().map(|&p| keep[p]).collect();
            keep.push(w);
            keep.sort_unstable();
            let m = keep.len();
            let mut h = vec![0.0; m * m];
            for (a, &i) in keep.iter().enumerate() {
                for (b, &j) in keep.iter().enumerate() {
                    h[a * m + b] = base.h(i, j);
                }
            }
            let labels = keep.iter().map(|&i| base.labels()[i].clone()).collect();
            let sub_omega = keep.iter().position(|&i| i == w);
            let sub = ExtendedMetricSpace::from_heights(labels, sub_omega, h)?;
            let keep2 = keep.clone();
            LiftCase {
                source: FillingTree::with_tolerance(sub, cfg.tol)?,
                target: FillingTree::with_tolerance(base, cfg.tol)?,
                assignment: keep.iter().map(|&i| PointId(i)).collect(),
                known: Some(Box::new(move |t, x| t.point(PointId(keep2[x.anchor().0]), x.height()))),
            }
        }
        2 => {
            // same boundary, a different point sent to infinity
            let tree = FillingTree::with_tolerance(base.clone(), cfg.tol)?;
            let o = random_tree_point(&tree, rng, 2.0);
            let rho = tree.bourdon_metric(&o);
            let finite = base.finite_points();
            let r = finite[rng.random_range(0..finite.len())];
            let antipode = rho
                .points()
                .find(|&p| p != r && cfg.tol.eq(rho.dist(p, r).to_f64(), 1.0))
                .expect("Bourdon metrics are antipodal");
            let rerooted = send_to_infinity(&rho, r, antipode)?;
            LiftCase {
                source: tree,
                target: FillingTree::with_tolerance(rerooted, cfg.tol)?,
                assignment: (0..n).map(PointId).collect(),
                known: None,
            }
        }
        _ => {
            // swap the two leaves of a cherry: [z, t] ↦ [σz, t]
            let finite = base.finite_indices();
            let cherry = finite.iter().enumerate().find_map(|(k, &i)| {
                finite[k + 1..].iter().find_map(|&j| {
                    let hij = base.h(i, j);
                    finite
                        .iter()
                        .filter(|&&z| z != i && z != j)
                        .all(|&z| base.h(i, z) < hij)
                        .then_some((i, j))
                })
            });
            let mut sigma: Vec<usize> = (0..n).collect();
            if let Some((i, j)) = cherry {
                sigma.swap(i, j);
            }
            let sigma2 = sigma.clone();
            let tree = FillingTree::with_tolerance(base, cfg.tol)?;
            LiftCase {
                source: tree.clone(),
                target: tree,
                assignment: sigma.iter().map(|&p| PointId(p)).collect(),
                known: Some(Box::new(move |t, x| t.point(PointId(sigma2[x.anchor().0]), x.height()))),
            }
        }
    })
}

#[derive(Default)]
struct LiftStats {
    deviation: f64,
    coherence_failures: usize,
    known_mismatches: usize,
    frame_mismatches: usize,
    frames: usize,
    identity_mismatches: usize,
    inverse_mismatches: usize,
}

fn lift_trial(cfg: &SuiteConfig, trial: usize) -> Result<LiftStats> {
    let mut rng = cfg.rng(6, trial);
    let case = lift_case(cfg, trial, &mut rng)?;
    let checks = cfg.checks(case.source.boundary_len().max(case.target.boundary_len()), trial as u64);
    let (src, tgt) = (&case.source, &case.target);
    let f = BoundaryMap::new(src, tgt, case.assignment.clone(), &checks)?;
    let pairs: Vec<(TreePoint, TreePoint)> = (0..100)
        .map(|_| (random_tree_point(src, &mut rng, 2.0), random_tree_point(src, &mut rng, 2.0)))
        .collect();
    let report = verify_isometric_embedding(&f, &pairs, false)?;
    let mut s = LiftStats {
        deviation: report.max_relative_deviation,
        coherence_failures: report.coherence_failures,
        ..LiftStats::default()
    };

    let identity = BoundaryMap::identity(src, src, &checks)?;
    let inverse = if f.is_surjective() { Some(f.inverse(&checks)?) } else { None };
    for (x, _) in &pairs {
        let fx = lift(&f, x)?;
        if let Some(known) = &case.known {
            if !tgt.same_point(&fx, &known(tgt, x)?)? {
                s.known_mismatches += 1;
            }
        }
        if !src.same_point(&lift(&identity, x)?, x)? {
            s.identity_mismatches += 1;
        }
        if let Some(g) = &inverse {
            if !src.same_point(&lift(g, &fx)?, x)? {
                s.inverse_mismatches += 1;
            }
        }
    }

    let ends = src.boundary_points();
    for (x, _) in pairs.iter().take(5) {
        let reference = lift(&f, x)?;
        let lines: Vec<(BoundaryPoint, BoundaryPoint)> = ends
            .iter()
            .flat_map(|&a| ends.iter().map(move |&b| (a, b)))
            .filter(|&(a, b)| src.on_line(a, b, x))
            .collect();
        for _ in 0..20 {
            let (a, b) = lines[rng.random_range(0..lines.len())];
            let others: Vec<BoundaryPoint> = ends.iter().copied().filter(|&c| c != a && c != b).collect();
            let c = others[rng.random_range(0..others.len())];
            s.frames += 1;
            if !tgt.same_point(&lift_with_frame(&f, x, a, b, c)?, &reference)? {
                s.frame_mismatches += 1;
            }
        }
    }
    Ok(s)
}

fn criterion_6(cfg: &SuiteConfig) -> (bool, String) {
    let results = par::map_indices(50, cfg.parallel, |trial| lift_trial(cfg, trial));
    let mut total = LiftStats::default();
    let mut errors = Vec::new();
    for (trial, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => {
                total.deviation = total.deviation.max(s.deviation);
                total.coherence_failures += s.coherence_failures;
                total.known_mismatches += s.known_mismatches;
                total.frame_mismatches += s.frame_mismatches;
                total.frames += s.frames;
                total.identity_mismatches += s.identity_mismatches;
                total.inverse_mismatches += s.inverse_mismatches;
            }
            Err(e) => errors.push(format!("trial {trial}: {e}")),
        }
    }
    let t = &total;
    let passed = errors.is_empty()
        && t.deviation <= cfg.tol.rel
        && t.coherence_failures == 0
        && t.known_mismatches == 0
        && t.frame_mismatches == 0
        && t.identity_mismatches == 0
        && t.inverse_mismatches == 0;
    (
        passed,
        format!(
            "50 maps x 100 pairs: max relative deviation {:.3e}; mismatches: ray coherence {}, known isometry {}, \
             frames {}/{}, identity {}, inverse {}{}",
            t.deviation,
            t.coherence_failures,
            t.known_mismatches,
            t.frame_mismatches,
            t.frames,
            t.identity_mismatches,
            t.inverse_mismatches,
            errors.first().map(|e| format!("; error: {e}")).unwrap_or_default()
        ),
    )
}

fn criterion_7(cfg: &SuiteConfig) -> (bool, String) {
    let results = par::map_indices(C1_SPACES, cfg.parallel, |trial| -> Result<bool> {
        let space = c1_space(cfg, trial);
        let checks = cfg.checks(space.len(), trial as u64);
        Ok(roundtrip_isometry(&space, &checks, 10, cfg.seed ^ trial as u64)?.passed)
    });
    let mut failed = 0;
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(true) => {}
            Ok(false) => failed += 1,
            Err(e) => errors.push(e.to_string()),
        }
    }
    (
        failed == 0 && errors.is_empty(),
        format!(
            "{} of {C1_SPACES} round trips failed{}",
            failed + errors.len(),
            errors.first().map(|e| format!("; error: {e}")).unwrap_or_default()
        ),
    )
}

fn criterion_8(cfg: &SuiteConfig) -> (bool, String) {
    let results = par::map_indices(50, cfg.parallel, |trial| -> Result<f64> {
        let mut rng = cfg.rng(8, trial);
        let n = rng.random_range(3..=40);
        let tree = FillingTree::with_tolerance(random_ultrametric(&mut rng, SpaceShape::new(n)), cfg.tol)?;
        let mut misses = 0.0;
        for _ in 0..10 {
            let x = random_tree_point(&tree, &mut rng, 2.0);
            let back = reconstruct_point(&tree, &tree.bourdon_metric(&x), cfg.tol)?;
            if !tree.same_point(&back, &x)? {
                misses += 1.0;
            }
        }
        Ok(misses)
    });
    let mut misses = 0.0;
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(m) => misses += m,
            Err(e) => errors.push(e.to_string()),
        }
    }
    (
        misses == 0.0 && errors.is_empty(),
        format!(
            "500 points: {misses} reconstructed elsewhere, {} errors{}",
            errors.len(),
            errors.first().map(|e| format!("; first: {e}")).unwrap_or_default()
        ),
    )
}

/// Unit-step graph on the grid points `[z, k·step]` of a filling, with its
/// own identification of grid points: `[z, t] = [z', t]` iff `t ≤ h(z, z')`.
struct GridGraph {
    step: f64,
    ids: HashMap<(usize, i64), usize>,
    adj: Vec<Vec<usize>>,
}

impl GridGraph {
    fn build(space: &ExtendedMetricSpace, step: f64, lo: i64, hi: i64) -> GridGraph {
        let finite = space.finite_indices();
        let rep = |z: usize, k: i64| {
            let t = k as f64 * step;
            finite
                .iter()
                .copied()
                .find(|&y| y == z || space.h(z, y) >= t)
                .expect("z represents itself")
        };
        let mut g = GridGraph {
            step,
            ids: HashMap::new(),
            adj: Vec::new(),
        };
        for &z in &finite {
            for k in lo..hi {
                let u = g.node(rep(z, k), k);
                let v = g.node(rep(z, k + 1), k + 1);
                if !g.adj[u].contains(&v) {
                    g.adj[u].push(v);
                    g.adj[v].push(u);
                }
            }
        }
        g
    }

    fn node(&mut self, z: usize, k: i64) -> usize {
        let next = self.adj.len();
        let id = *self.ids.entry((z, k)).or_insert(next);
        if id == next {
            self.adj.push(Vec::new());
        }
        id
    }

    fn locate(&self, space: &ExtendedMetricSpace, z: usize, k: i64) -> usize {
        let t = k as f64 * self.step;
        let r = space
            .finite_indices()
            .into_iter()
            .find(|&y| y == z || space.h(z, y) >= t)
            .expect("z represents itself");
        self.ids[&(r, k)]
    }

    fn bfs(&self, from: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.adj.len()];
        dist[from] = 0;
        let mut queue = VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            for &v in &self.adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}

fn criterion_9(cfg: &SuiteConfig) -> (bool, String) {
    let start = Instant::now();
    let step = 2f64.powi(-6);
    let bound = 2f64.powi(-5);
    let results = par::map_indices(40, cfg.parallel, |trial| -> Result<f64> {
        let mut rng = cfg.rng(9, trial);
        let n = rng.random_range(3..=8);
        let space = random_ultrametric(&mut rng, SpaceShape::new(n).on_grid(step));
        let tree = FillingTree::with_tolerance(space.clone(), cfg.tol)?;
        let (lo, hi) = tree.height_range();
        let (klo, khi) = (((lo - 2.0) / step).floor() as i64, ((hi + 2.0) / step).ceil() as i64);
        let graph = GridGraph::build(&space, step, klo, khi);
        let finite = space.finite_indices();
        let mut worst: f64 = 0.0;
        for _ in 0..10 {
            let (z1, z2) = (finite[rng.random_range(0..finite.len())], finite[rng.random_range(0..finite.len())]);
            let k1 = rng.random_range(klo + 64..=khi - 64);
            let k2 = rng.random_range(klo + 64..=khi - 64);
            let x = tree.point(PointId(z1), k1 as f64 * step)?;
            let y = tree.point(PointId(z2), k2 as f64 * step)?;
            let hops = graph.bfs(graph.locate(&space, z1, k1))[graph.locate(&space, z2, k2)];
            worst = worst.max((tree.distance(&x, &y) - hops as f64 * step).abs());
        }
        Ok(worst)
    });
    let t = Tally::collect(results);
    let secs = start.elapsed().as_secs_f64();
    (
        t.errors == 0 && t.worst <= bound && secs <= 20.0,
        format!(
            "40 grid fillings x 10 pairs: max deviation {:.3e} (bound {bound}), {secs:.2} s (limit 20 s){}",
            t.worst,
            t.errors_note()
        ),
    )
}

/// Brute-force ultrametric test on the finite points, independent of the
/// library validators.
fn oracle_is_ultrametric(dist: &[f64], n: usize, omega: Option<usize>) -> bool {
    let finite: Vec<usize> = (0..n).filter(|&i| Some(i) != omega).collect();
    for (a, &i) in finite.iter().enumerate() {
        for (b, &j) in finite.iter().enumerate().skip(a + 1) {
            for &k in &finite[b + 1..] {
                let mut d = [dist[i * n + j], dist[i * n + k], dist[j * n + k]];
                d.sort_by(f64::total_cmp);
                if d[2] - d[1] > 1e-9 * d[2] {
                    return false;
                }
            }
        }
    }
    true
}

fn criterion_10(cfg: &SuiteConfig) -> (bool, String) {
    let results = par::map_indices(100, cfg.parallel, |trial| -> Result<(bool, bool)> {
        let mut rng = cfg.rng(10, trial);
        let n = rng.random_range(3..=24);
        let space = random_ultrametric(&mut rng, SpaceShape::new(n));
        let finite = space.finite_indices();
        let i = finite[rng.random_range(0..finite.len())];
        let j = loop {
            let j = finite[rng.random_range(0..finite.len())];
            if j != i {
                break j;
            }
        };
        let factor = rng.random_range(1.01..=1.5);
        let mut dist = space.distance_matrix().to_vec();
        dist[i * n + j] *= factor;
        dist[j * n + i] *= factor;
        let truth = oracle_is_ultrametric(&dist, n, space.omega_index());
        let perturbed = ExtendedMetricSpace::new_relaxed(space.labels().to_vec(), space.omega_index(), dist)?;
        let checks = Checks {
            sweep: Sweep::Exhaustive,
            ..cfg.checks(n, trial as u64)
        };
        let flagged = !perturbed.is_ultrametric(cfg.tol) || !is_ultrametric_moebius(&perturbed, &checks);
        Ok((truth, flagged))
    });
    let (mut false_accepts, mut false_rejects, mut broken, mut errors) = (0, 0, 0, Vec::new());
    for r in results {
        match r {
            Ok((truth, flagged)) => {
                if !truth {
                    broken += 1;
                }
                if !truth && !flagged {
                    false_accepts += 1;
                }
                if truth && flagged {
                    false_rejects += 1;
                }
            }
            Err(e) => errors.push(e.to_string()),
        }
    }
    (
        errors.is_empty() && false_accepts == 0 && false_rejects == 0,
        format!(
            "100 perturbations ({broken} break the ultrametric inequality): {false_accepts} false accepts, \
             {false_rejects} false rejects{}",
            errors.first().map(|e| format!("; error: {e}")).unwrap_or_default()
        ),
    )
}
