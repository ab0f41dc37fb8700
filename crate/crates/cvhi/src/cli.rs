//! Command line front end. Exit codes: 0 success, 1 bad input, 2 solver
//! exhausted its budget (a best-effort result file is still written),
//! 3 verification or hypothesis check raised flags.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde_json::json;

use crate::error::{Error, Result};
use crate::gap::{self, GapOptions, GapValue};
use crate::hypotheses::{self, OperatorAudit, ProfileSource};
use crate::instances;
use crate::io::{self, GapReportDto, GapValueDto, HypothesisSummaryDto, TraceSummaryDto};
use crate::oracle::{self, OracleOptions};
use crate::outer::{self, OuterParams};
use crate::problem::CoupledProblem;

const EXIT_OK: i32 = 0;
const EXIT_INPUT: i32 = 1;
const EXIT_NONCONVERGENCE: i32 = 2;
const EXIT_VERIFY: i32 = 3;

#[derive(Parser)]
#[command(
    name = "cvhi",
    version,
    about = "Certified solver for coupled variational-hemivariational inequalities"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve a problem file and write a gap-certified result
    Solve(SolveArgs),
    /// Recompute a result's certificates from scratch and compare
    Verify(VerifyArgs),
    /// Enumerate the solution set on a grid, independent of the solver
    Oracle(OracleArgs),
    /// Audit the standing hypotheses and the a-priori solution bound
    Check(CheckArgs),
    /// Generate problem files, single or as a suite
    Gen(GenArgs),
    /// Solve a batch of problem files and print a CSV summary
    Bench(BenchArgs),
}

#[derive(Args)]
struct SolveArgs {
    problem: PathBuf,
    /// Certified joint gap required to declare convergence
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    /// Jacobi blend factor in (0, 1]
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Defaults to the problem path with extension result.json
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    problem: PathBuf,
    result: PathBuf,
    /// Override the tolerance recorded in the result file
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct OracleArgs {
    problem: PathBuf,
    /// Grid nodes per axis before budget shrinking
    #[arg(long, default_value_t = 41)]
    grid: usize,
    /// Acceptance threshold; defaults to a grid-resolution bound
    #[arg(long)]
    tol: Option<f64>,
    /// Half-width used to clip unbounded axes
    #[arg(long, default_value_t = 10.0)]
    radius: f64,
    #[arg(long, default_value_t = 2_000_000)]
    max_cells: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to the problem path with extension oracle.json
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    problem: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GenArgs {
    /// Write the standard suite (library, pathological, seeded random) here
    #[arg(long, conflicts_with = "output")]
    suite: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Space dimensions as "n_v,n_e"; a single number squares
    #[arg(long, default_value = "1,1")]
    dims: String,
    #[arg(long, default_value_t = 2)]
    pieces: usize,
    /// Coupling strength in [0, 1)
    #[arg(long, default_value_t = 0.5)]
    kappa: f64,
    /// Defaults to stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Problem files or directories of them
    #[arg(required = true, num_args = 1..)]
    paths: Vec<PathBuf>,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_outer: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fill the wall_time_ms column; off by default so output is reproducible
    #[arg(long)]
    timing: bool,
}

pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INPUT,
            };
            let _ = e.print();
            return code;
        }
    };
    if let Ok(threads) = std::env::var("CVHI_THREADS") {
        if let Ok(n) = threads.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
    let outcome = match &cli.cmd {
        Cmd::Solve(a) => cmd_solve(a),
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::Oracle(a) => cmd_oracle(a),
        Cmd::Check(a) => cmd_check(a),
        Cmd::Gen(a) => cmd_gen(a),
        Cmd::Bench(a) => cmd_bench(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

fn read_problem(path: &Path) -> Result<(Vec<u8>, CoupledProblem)> {
    let bytes = fs::read(path)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    let p = io::parse_problem(&bytes)?;
    Ok((bytes, p))
}

fn cmd_solve(a: &SolveArgs) -> Result<i32> {
    let bytes = fs::read(&a.problem)
        .map_err(|e| Error::Input(format!("{}: {e}", a.problem.display())))?;
    let digest = io::digest(&bytes);
    let file = io::parse_problem_file(&bytes)?;
    let p = io::problem_from_file(&file)?;
    let d = file.solver.as_ref();
    let tol = a.tol.or(d.and_then(|s| s.tol)).unwrap_or(1e-7);
    let max_outer = a.max_outer.or(d.and_then(|s| s.max_outer)).unwrap_or(500);
    let alpha = a.damping.or(d.and_then(|s| s.damping)).unwrap_or(0.5);
    let seed = a.seed.or(d.and_then(|s| s.seed)).unwrap_or(0);

    let mut params = OuterParams {
        alpha,
        max_outer,
        joint_tol: tol,
        seed,
        ..Default::default()
    };
    params.inner.gap_tol = tol * 0.1;
    params.invariance = hypotheses::invariance_radius(&p).ok();
    let hyp = hypotheses::audit(&p, seed)
        .ok()
        .map(|r| HypothesisSummaryDto::of(&r));
    let out_path = a
        .output
        .clone()
        .unwrap_or_else(|| a.problem.with_extension("result.json"));

    match outer::solve(&p, &params) {
        Ok(sol) => {
            let r = io::result_of_solution(&sol, digest, seed, tol, hyp);
            fs::write(&out_path, io::serialize_result(&r)?)?;
            println!(
                "certified  gap1={:.3e} gap2={:.3e} outer={} -> {}",
                sol.gap1.value,
                sol.gap2.value,
                sol.outer_iters,
                out_path.display()
            );
            Ok(EXIT_OK)
        }
        Err(Error::NonConvergence {
            outer_iters,
            best_gap,
            best_u,
            best_w,
        }) => {
            let u = DVector::from_vec(best_u);
            let w = DVector::from_vec(best_w);
            let gopts = GapOptions {
                cert_tol: tol,
                seed,
                ..Default::default()
            };
            if let Ok((g1, g2)) = gap::primal_pair(&p, &u, &w, &gopts) {
                let r = io::ResultFile {
                    format_version: io::FORMAT_VERSION,
                    tool_version: env!("CARGO_PKG_VERSION").to_string(),
                    input_digest: digest,
                    status: "nonconverged".into(),
                    seed,
                    tol,
                    u: u.iter().cloned().collect(),
                    w: w.iter().cloned().collect(),
                    gaps: GapReportDto {
                        primal1: GapValueDto::of(&g1),
                        primal2: GapValueDto::of(&g2),
                        minty1: None,
                        minty2: None,
                    },
                    trace: TraceSummaryDto {
                        outer_iters,
                        inner_iters_total: 0,
                        invariance_violations: 0,
                    },
                    hypotheses: hyp,
                };
                fs::write(&out_path, io::serialize_result(&r)?)?;
            }
            eprintln!(
                "nonconverged after {outer_iters} outer sweeps, best joint gap {best_gap:.3e}"
            );
            Ok(EXIT_NONCONVERGENCE)
        }
        Err(e) => Err(e),
    }
}

fn gap_matches(what: &str, stored: &GapValueDto, got: &GapValue, failures: &mut Vec<String>) {
    let sv = stored.value_or_inf();
    let ok = if sv.is_finite() && got.value.is_finite() {
        (sv - got.value).abs() <= 1e-12 * (1.0 + got.value.abs())
    } else {
        sv.is_finite() == got.value.is_finite()
    };
    if !ok {
        failures.push(format!(
            "{what}: stored value {sv:e} does not reproduce (recomputed {:e})",
            got.value
        ));
    }
    if stored.certified != got.certified {
        failures.push(format!(
            "{what}: stored certification flag {} does not reproduce ({})",
            stored.certified, got.certified
        ));
    }
}

fn cmd_verify(a: &VerifyArgs) -> Result<i32> {
    let pbytes = fs::read(&a.problem)
        .map_err(|e| Error::Input(format!("{}: {e}", a.problem.display())))?;
    let rbytes = fs::read(&a.result)
        .map_err(|e| Error::Input(format!("{}: {e}", a.result.display())))?;
    let r = io::parse_result(&rbytes)?;
    let p = io::parse_problem(&pbytes)?;

    let mut failures = Vec::new();
    let digest = io::digest(&pbytes);
    if digest != r.input_digest {
        failures.push(format!(
            "input digest mismatch: problem file is {digest}, result records {}",
            r.input_digest
        ));
    }
    if r.u.len() != p.layout.n_v || r.w.len() != p.layout.n_e {
        failures.push(format!(
            "result pair is {}+{} dimensional, problem expects {}+{}",
            r.u.len(),
            r.w.len(),
            p.layout.n_v,
            p.layout.n_e
        ));
        for f in &failures {
            eprintln!("verify: {f}");
        }
        return Ok(EXIT_VERIFY);
    }

    let u = DVector::from_vec(r.u.clone());
    let w = DVector::from_vec(r.w.clone());
    let gopts = GapOptions {
        cert_tol: r.tol,
        seed: r.seed,
        ..Default::default()
    };
    let (g1, g2) = match gap::primal_pair(&p, &u, &w, &gopts) {
        Ok(pair) => pair,
        Err(Error::Precondition(msg)) => {
            failures.push(format!("stored pair is infeasible: {msg}"));
            for f in &failures {
                eprintln!("verify: {f}");
            }
            return Ok(EXIT_VERIFY);
        }
        Err(e) => return Err(e),
    };
    gap_matches("gap1", &r.gaps.primal1, &g1, &mut failures);
    gap_matches("gap2", &r.gaps.primal2, &g2, &mut failures);

    if r.status != "certified" {
        failures.push(format!("result status is '{}'", r.status));
    }
    if !(g1.certified && g2.certified) {
        failures.push("recomputed gaps are not certified".into());
    }
    let joint = g1.value.max(g2.value);
    let tol = a.tol.unwrap_or(r.tol);
    if !(joint <= tol) {
        failures.push(format!("joint gap {joint:.3e} exceeds tolerance {tol:.1e}"));
    }

    if failures.is_empty() {
        println!("verified  joint gap {joint:.3e} <= {tol:.1e}");
        Ok(EXIT_OK)
    } else {
        for f in &failures {
            eprintln!("verify: {f}");
        }
        Ok(EXIT_VERIFY)
    }
}

fn cmd_oracle(a: &OracleArgs) -> Result<i32> {
    let (bytes, p) = read_problem(&a.problem)?;
    let digest = io::digest(&bytes);
    let opts = OracleOptions {
        nodes_per_axis: a.grid,
        max_cells: a.max_cells,
        radius: a.radius,
        accept_tol: a.tol,
        gap: GapOptions {
            seed: a.seed,
            ..Default::default()
        },
        ..Default::default()
    };
    let out = oracle::enumerate_solutions(&p, &opts)?;
    let bound = hypotheses::solution_bound(&p).ok();
    let radius = bound.map(|b| b.r_solution);
    let probes = oracle::solution_set_probes(&p, &out, &opts, radius)?;
    let file = io::oracle_file(&out, Some(&probes), digest, a.seed, radius);
    let out_path = a
        .output
        .clone()
        .unwrap_or_else(|| a.problem.with_extension("oracle.json"));
    fs::write(&out_path, io::serialize_oracle(&file)?)?;
    println!(
        "oracle  hits={} near_misses={} nodes={}x{} accept_tol={:.3e} -> {}",
        file.hits.len(),
        file.near_misses,
        file.grid.nodes_u,
        file.grid.nodes_w,
        file.grid.accept_tol,
        out_path.display()
    );
    Ok(EXIT_OK)
}

fn source_name(s: ProfileSource) -> &'static str {
    match s {
        ProfileSource::Given => "given",
        ProfileSource::Derived => "derived",
        ProfileSource::Missing => "missing",
    }
}

fn operator_json(o: &OperatorAudit) -> serde_json::Value {
    json!({
        "growth_constant": o.growth_constant,
        "growth_sampled_ok": o.growth_sampled_ok,
        "monotone_min_eig": o.monotone_min_eig,
        "pseudomonotone_by_construction": o.pseudomonotone_by_construction,
        "pseudomonotone_witness": o.pseudomonotone_witness.as_ref().map(|wit| json!({
            "parameter": wit.parameter.as_slice(),
            "x": wit.x.as_slice(),
            "y": wit.y.as_slice(),
            "premise": wit.premise,
            "conclusion": wit.conclusion,
        })),
        "coercivity": {
            "source": source_name(o.coercivity.source),
            "consistent": o.coercivity.consistent,
            "worst_margin": o.coercivity.worst_margin,
            "trend_ok": o.coercivity.trend_ok,
            "probes": o.coercivity.probes.len(),
        },
    })
}

fn cmd_check(a: &CheckArgs) -> Result<i32> {
    let (_, p) = read_problem(&a.problem)?;
    let rep = hypotheses::audit(&p, a.seed)?;
    let bound = hypotheses::solution_bound(&p);
    let flagged = rep.op_a.pseudomonotone_witness.is_some()
        || rep.op_b.pseudomonotone_witness.is_some()
        || !rep.all_consistent
        || matches!(bound, Err(Error::NoFiniteBound(_)));
    let (bound_json, bound_error) = match &bound {
        Ok(b) => (
            json!({
                "t_star": b.t_star,
                "s_star": b.s_star,
                "r_solution": b.r_solution,
                "slope_product": b.slope_product,
                "invariance_radius": b.invariance_radius,
            }),
            serde_json::Value::Null,
        ),
        Err(e) => (serde_json::Value::Null, json!(e.to_string())),
    };
    let doc = json!({
        "all_consistent": rep.all_consistent,
        "slope_product": rep.slope_product,
        "op_a": operator_json(&rep.op_a),
        "op_b": operator_json(&rep.op_b),
        "j_growth": rep.j_growth,
        "h_growth": rep.h_growth,
        "psi_minorant": { "alpha": rep.psi_minorant.0, "beta": rep.psi_minorant.1 },
        "theta_minorant": { "alpha": rep.theta_minorant.0, "beta": rep.theta_minorant.1 },
        "bound": bound_json,
        "bound_error": bound_error,
        "flagged": flagged,
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(if flagged { EXIT_VERIFY } else { EXIT_OK })
}

fn parse_dims(text: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let bad = || Error::Input(format!("dims must be \"n\" or \"n_v,n_e\", got \"{text}\""));
    match parts.as_slice() {
        [n] => {
            let n = n.parse().map_err(|_| bad())?;
            Ok((n, n))
        }
        [v, e] => Ok((v.parse().map_err(|_| bad())?, e.parse().map_err(|_| bad())?)),
        _ => Err(bad()),
    }
}

/// Suite recipe: dims cycle through the four small shapes, piece counts
/// through 0..=3, coupling strength over five rungs below 1.
fn suite_params(seed: u64) -> ((usize, usize), usize, f64) {
    let dims = [(1, 1), (2, 1), (1, 2), (2, 2)][(seed % 4) as usize];
    let pieces = (seed % 4) as usize;
    let kappa = 0.8 * ((seed - 1) % 5) as f64 / 4.0;
    (dims, pieces, kappa)
}

fn cmd_gen(a: &GenArgs) -> Result<i32> {
    if let Some(dir) = &a.suite {
        fs::create_dir_all(dir)?;
        let mut count = 0usize;
        for (name, p) in instances::library().into_iter().chain(instances::pathological()) {
            fs::write(dir.join(format!("{name}.json")), io::serialize_problem(&p)?)?;
            count += 1;
        }
        for seed in 1..=50u64 {
            let (dims, pieces, kappa) = suite_params(seed);
            let p = instances::random_instance(seed, dims, pieces, kappa)?;
            fs::write(
                dir.join(format!("random_s{seed:02}.json")),
                io::serialize_problem(&p)?,
            )?;
            count += 1;
        }
        println!("wrote {count} instances to {}", dir.display());
        return Ok(EXIT_OK);
    }
    let dims = parse_dims(&a.dims)?;
    let p = instances::random_instance(a.seed, dims, a.pieces, a.kappa)?;
    let text = io::serialize_problem(&p)?;
    match &a.output {
        Some(path) => {
            fs::write(path, text)?;
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(EXIT_OK)
}

fn bench_one(path: &Path, a: &BenchArgs) -> Result<(&'static str, usize, usize, f64, f64)> {
    let (_, p) = read_problem(path)?;
    let mut params = OuterParams {
        joint_tol: a.tol,
        max_outer: a.max_outer,
        seed: a.seed,
        ..Default::default()
    };
    params.inner.gap_tol = a.tol * 0.1;
    params.invariance = hypotheses::invariance_radius(&p).ok();
    match outer::solve(&p, &params) {
        Ok(sol) => Ok((
            "certified",
            sol.outer_iters,
            sol.trace.inner_iters_total,
            sol.gap1.value,
            sol.gap2.value,
        )),
        Err(Error::NonConvergence {
            outer_iters,
            best_gap,
            ..
        }) => Ok(("nonconverged", outer_iters, 0, best_gap, best_gap)),
        Err(e) => Err(e),
    }
}

fn cmd_bench(a: &BenchArgs) -> Result<i32> {
    let mut files = Vec::new();
    for path in &a.paths {
        if path.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(path)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    let name = f.file_name().map(|s| s.to_string_lossy().into_owned());
                    let name = name.as_deref().unwrap_or("");
                    name.ends_with(".json")
                        && !name.ends_with(".result.json")
                        && !name.ends_with(".oracle.json")
                })
                .collect();
            entries.sort();
            files.extend(entries);
        } else {
            files.push(path.clone());
        }
    }
    println!("instance,status,outer_iters,inner_iters_total,final_gap1,final_gap2,wall_time_ms");
    for f in &files {
        let name = f
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let started = Instant::now();
        let row = bench_one(f, a);
        let ms = if a.timing {
            started.elapsed().as_millis()
        } else {
            0
        };
        match row {
            Ok((status, outer, inner, g1, g2)) => {
                println!("{name},{status},{outer},{inner},{g1:.6e},{g2:.6e},{ms}");
            }
            Err(_) => println!("{name},error,0,0,nan,nan,{ms}"),
        }
    }
    Ok(EXIT_OK)
}
