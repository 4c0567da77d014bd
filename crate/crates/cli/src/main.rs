use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use ultratree::antipodal::{dist_ma1, is_antipodal_diam1};
use ultratree::io::{
    export_dendrogram, fit_ultrametric, parse_label_map, parse_space, parse_tree_point, parse_tree_points,
    Encoding, SpaceDocument, TreePointDocument,
};
use ultratree::lifting::{lift, roundtrip_isometry, BoundaryMap};
use ultratree::metric::is_ultrametric_point;
use ultratree::moebius::{is_ultrametric_moebius, ultrametric_crt_stats};
use ultratree::suite::{run_suite, SuiteConfig};
use ultratree::{Checks, ExtendedMetricSpace, FillingTree, Sweep, Tolerance};

#[derive(Parser)]
#[command(name = "ultratree", version, about = "Ultrametric spaces, filling trees and boundary maps")]
struct Cli {
    /// Relative tolerance for all comparisons.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tolerance: f64,
    /// Seed for sampled quadruples and random draws.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Sample this many quadruples when an exhaustive sweep would check more.
    #[arg(long, global = true)]
    sample: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Check the axioms and report ultrametricity.
    Validate { space: PathBuf },
    /// Cross-ratio triple of four points.
    Crt { space: PathBuf, points: Vec<String> },
    /// Summary of the filling tree with a dendrogram above a cut height.
    FillInfo {
        space: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        cut: Option<f64>,
    },
    /// Distance between two tree points given as label:t.
    Dist { space: PathBuf, p: String, q: String },
    /// Bourdon metric on the boundary seen from a tree point.
    BoundaryMetric { space: PathBuf, basepoint: String },
    /// Images of tree points under the lift of a boundary map.
    Lift {
        src: PathBuf,
        dst: PathBuf,
        map: PathBuf,
        points: PathBuf,
    },
    /// Distance between the Bourdon metrics of two tree points.
    Ma1Dist { space: PathBuf, p: String, q: String },
    /// Fill, read the boundary back, refill and certify the isometry.
    Roundtrip {
        space: PathBuf,
        #[arg(long, default_value_t = 50)]
        pairs: usize,
    },
    /// Largest ultrametric below a metric.
    FitUltrametric {
        metric: PathBuf,
        #[arg(long, value_enum, default_value_t = EncodingArg::Distances)]
        encoding: EncodingArg,
    },
    /// Run the acceptance battery.
    Suite,
}

#[derive(Clone, Copy, ValueEnum)]
enum EncodingArg {
    Distances,
    Heights,
}

impl From<EncodingArg> for Encoding {
    fn from(e: EncodingArg) -> Self {
        match e {
            EncodingArg::Distances => Encoding::Distances,
            EncodingArg::Heights => Encoding::Heights,
        }
    }
}

struct Ctx {
    tol: Tolerance,
    seed: u64,
    sample: Option<usize>,
}

impl Ctx {
    fn checks(&self, n: usize) -> Checks {
        let sweep = match self.sample {
            Some(k) if n.saturating_pow(4) > k => Sweep::Sampled {
                quadruples: k,
                seed: self.seed,
            },
            _ => Sweep::Exhaustive,
        };
        Checks {
            tol: self.tol,
            sweep,
            ..Checks::default()
        }
    }
}

fn read_space(path: &Path) -> Result<ExtendedMetricSpace> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_space(&text).with_context(|| format!("loading {}", path.display()))
}

fn read_tree(path: &Path, tol: Tolerance) -> Result<FillingTree> {
    Ok(FillingTree::with_tolerance(read_space(path)?, tol)?)
}

/// Command output and whether the command's own check passed.
struct Outcome {
    value: Value,
    ok: bool,
}

impl From<Value> for Outcome {
    fn from(value: Value) -> Self {
        Outcome { value, ok: true }
    }
}

fn run(cli: &Cli) -> Result<Outcome> {
    let ctx = Ctx {
        tol: Tolerance::new(cli.tolerance),
        seed: cli.seed,
        sample: cli.sample,
    };
    Ok(match &cli.command {
        Command::Validate { space } => {
            let s = read_space(space)?;
            let checks = ctx.checks(s.len());
            json!({
                "points": s.len(),
                "omega": s.omega().map(|w| s.label(w).to_string()),
                "ultrametric": s.is_ultrametric(ctx.tol),
                "ultrametric_moebius": is_ultrametric_moebius(&s, &checks),
            })
            .into()
        }
        Command::Crt { space, points } => {
            let s = read_space(space)?;
            let [a, b, c, d] = points.as_slice() else {
                bail!("crt takes exactly four point labels");
            };
            let q = [s.point(a)?, s.point(b)?, s.point(c)?, s.point(d)?];
            let t = s.crt(q)?;
            let cross = s.classical_cross_ratio(q).map(|r| r.to_string());
            json!({
                "crt": t.entries(),
                "ultrametric_point": is_ultrametric_point(&t, ctx.tol),
                "cross_ratio": cross.unwrap_or_else(|e| e.to_string()),
            })
            .into()
        }
        Command::FillInfo { space, cut } => {
            let tree = read_tree(space, ctx.tol)?;
            let (lo, hi) = tree.height_range();
            let cut = cut.unwrap_or(lo);
            json!({
                "anchors": tree.anchors().map(|a| tree.base().label(a).to_string()).collect::<Vec<_>>(),
                "omega": tree.base().label(tree.omega()),
                "boundary_points": tree.boundary_len(),
                "min_merge_height": lo,
                "max_merge_height": hi,
                "cut": cut,
                "dendrogram": export_dendrogram(&tree, cut)?,
            })
            .into()
        }
        Command::Dist { space, p, q } => {
            let tree = read_tree(space, ctx.tol)?;
            let x = parse_tree_point(&tree, p)?;
            let y = parse_tree_point(&tree, q)?;
            json!({
                "p": TreePointDocument::from_point(&tree, &x),
                "q": TreePointDocument::from_point(&tree, &y),
                "distance": tree.distance(&x, &y),
            })
            .into()
        }
        Command::BoundaryMetric { space, basepoint } => {
            let tree = read_tree(space, ctx.tol)?;
            let x = parse_tree_point(&tree, basepoint)?;
            let rho = tree.bourdon_metric(&x);
            json!({
                "basepoint": TreePointDocument::from_point(&tree, &x),
                "antipodal_diameter_1": is_antipodal_diam1(&rho, ctx.tol),
                "metric": SpaceDocument::from_space(&rho, Encoding::Distances),
            })
            .into()
        }
        Command::Lift { src, dst, map, points } => {
            let source = read_tree(src, ctx.tol)?;
            let target = read_tree(dst, ctx.tol)?;
            let pairs = parse_label_map(&fs::read_to_string(map).with_context(|| format!("reading {}", map.display()))?)?;
            let checks = ctx.checks(source.boundary_len());
            let f = BoundaryMap::from_labels(&source, &target, &pairs, &checks)?;
            let text = fs::read_to_string(points).with_context(|| format!("reading {}", points.display()))?;
            let images = parse_tree_points(&source, &text)?
                .iter()
                .map(|x| {
                    Ok(json!({
                        "point": TreePointDocument::from_point(&source, x),
                        "image": TreePointDocument::from_point(&target, &lift(&f, x)?),
                    }))
                })
                .collect::<Result<Vec<_>>>()?;
            json!({ "lifts": images }).into()
        }
        Command::Ma1Dist { space, p, q } => {
            let tree = read_tree(space, ctx.tol)?;
            let x = parse_tree_point(&tree, p)?;
            let y = parse_tree_point(&tree, q)?;
            let d = dist_ma1(&tree.bourdon_metric(&x), &tree.bourdon_metric(&y), &ctx.checks(tree.boundary_len()))?;
            json!({ "ma1_distance": d, "tree_distance": tree.distance(&x, &y) }).into()
        }
        Command::Roundtrip { space, pairs } => {
            let s = read_space(space)?;
            let r = roundtrip_isometry(&s, &ctx.checks(s.len()), *pairs, ctx.seed)?;
            Outcome {
                ok: r.passed,
                value: json!({
                    "passed": r.passed,
                    "boundary_max_relative_error": r.boundary_max_relative_error,
                    "pairs_checked": r.embedding.pairs_checked,
                    "max_relative_deviation": r.embedding.max_relative_deviation,
                    "coherence_checks": r.embedding.coherence_checks,
                    "coherence_failures": r.embedding.coherence_failures,
                    "coordinate_mismatches": r.coordinate_mismatches,
                }),
            }
        }
        Command::FitUltrametric { metric, encoding } => {
            let s = read_space(metric)?;
            let fit = fit_ultrametric(&s)?;
            let stats = ultrametric_crt_stats(&fit, &ctx.checks(fit.len()));
            json!({
                "quadruples_checked": stats.checked,
                "space": SpaceDocument::from_space(&fit, (*encoding).into()),
            })
            .into()
        }
        Command::Suite => {
            let report = run_suite(&SuiteConfig {
                seed: ctx.seed,
                tol: ctx.tol,
                ..SuiteConfig::default()
            });
            Outcome {
                ok: report.passed,
                value: serde_json::to_value(&report)?,
            }
        }
    })
}

fn render_text(command: &Command, v: &Value) -> String {
    if let Command::Suite = command {
        let mut out = String::new();
        for c in v["criteria"].as_array().into_iter().flatten() {
            let mark = if c["passed"].as_bool() == Some(true) { "PASS" } else { "FAIL" };
            out.push_str(&format!(
                "[{mark}] {:>2} {}: {}\n",
                c["id"],
                c["name"].as_str().unwrap_or_default(),
                c["detail"].as_str().unwrap_or_default()
            ));
        }
        out.push_str(&format!(
            "seed {}: {} in {:.2} s\n",
            v["seed"],
            if v["passed"].as_bool() == Some(true) { "passed" } else { "FAILED" },
            v["elapsed_seconds"].as_f64().unwrap_or_default()
        ));
        return out;
    }
    let mut out = String::new();
    if let Value::Object(map) = v {
        for (k, val) in map {
            let shown = match val {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            out.push_str(&format!("{k}: {shown}\n"));
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            match cli.format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&outcome.value).expect("values serialize")),
                Format::Text => print!("{}", render_text(&cli.command, &outcome.value)),
            }
            if outcome.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
