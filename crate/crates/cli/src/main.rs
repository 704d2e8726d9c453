//! `mctrack`: regime analysis, DP oracle runs, Martinet sweeps and kappa
//! checks from JSON input files.
//!
//! Exit codes: 0 ok, 1 runtime failure (or kappa disagreement), 2 schema or
//! usage error, 3 degenerate problem, 4 point is not Martinet.

mod svg;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use mctrack_core::geometry::{kappa_bracket, kappa_flow, Point};
use mctrack_core::martinet::{
    arc_cost_bound, fit_kappa, log_spaced_desc, min_feasible_c, synthesize_crossing, MartinetModel,
};
use mctrack_core::oracle_dp::{armc_dp, path_rows, rmc_dp, DPGrid, DPSolution};
use mctrack_core::reduced_oc::{classify, predict_mc, ReducedProblem, Regime, RegimeReport};
use mctrack_core::schema::{martinet_from_json, FrameFile, ProblemFile};
use mctrack_core::Error;

#[derive(Parser, Debug)]
#[command(name = "mctrack", version, about = "Motion complexity of drifted curve tracking")]
struct Cli {
    /// Directory for CSV, JSON and SVG outputs.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Overrides the T = T_Gamma band (analyze, oracle).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Suppress stdout summaries.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classify the time regime and print the asymptotic constant.
    Analyze { problem: PathBuf },
    /// Brute-force DP cost against the closed-form prediction.
    Oracle {
        problem: PathBuf,
        /// Comma-separated eps values.
        #[arg(long, value_delimiter = ',', required = true, value_parser = positive)]
        eps: Vec<f64>,
        /// Time steps x z-nodes, e.g. 512x512.
        #[arg(long, value_parser = parse_grid, default_value = "256x256")]
        grid: (usize, usize),
        /// r-nodes for the 2-D oracle (T = T_Gamma problems).
        #[arg(long, default_value_t = 16)]
        nr: usize,
    },
    /// Crossing sweep over eps with a log fit for kappa.
    Martinet {
        model: PathBuf,
        /// lo:hi:n, log-spaced and run from hi down to lo; n >= 5.
        #[arg(long, value_parser = parse_range)]
        eps_range: (f64, f64, usize),
        /// c as a multiple of the feasibility threshold.
        #[arg(long, default_value_t = 10.0, value_parser = positive)]
        c_factor: f64,
    },
    /// kappa at a Martinet point by the bracket and flow formulas.
    Kappa {
        frame: PathBuf,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        point: Point,
    },
}

fn positive(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got '{s}'")),
    }
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected NxM, got '{s}'"))?;
    let n: usize = a.trim().parse().map_err(|_| format!("bad grid size '{a}'"))?;
    let m: usize = b.trim().parse().map_err(|_| format!("bad grid size '{b}'"))?;
    if n < 16 || m < 16 {
        return Err(format!("grid {n}x{m} is below the 16x16 minimum"));
    }
    Ok((n, m))
}

fn parse_range(s: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected lo:hi:n, got '{s}'"));
    }
    let (lo, hi) = (positive(parts[0])?, positive(parts[1])?);
    let n: usize = parts[2].trim().parse().map_err(|_| format!("bad count '{}'", parts[2]))?;
    if !(lo < hi) {
        return Err(format!("need lo < hi, got {lo} and {hi}"));
    }
    if n < 5 {
        return Err(format!("a sweep needs at least 5 points, got {n}"));
    }
    Ok((lo, hi, n))
}

fn parse_point(s: &str) -> Result<Point, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| format!("bad coordinate '{x}'")))
        .collect::<Result<_, _>>()?;
    <[f64; 3]>::try_from(v).map_err(|_| format!("expected x,y,z, got '{s}'"))
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = match &e {
            Error::Degenerate(_) => 3,
            Error::NotMartinet { .. } => 4,
            Error::InvalidInput(_)
            | Error::Syntax { .. }
            | Error::UnknownIdentifier { .. }
            | Error::InvalidTable(_)
            | Error::Frame(_)
            | Error::MissingB => 2,
            _ => 1,
        };
        Failure { code, msg: e.to_string() }
    }
}

fn io_fail(path: &Path, e: std::io::Error) -> Failure {
    Failure { code: 2, msg: format!("{}: {e}", path.display()) }
}

struct Ctx {
    out: PathBuf,
    tol: Option<f64>,
    quiet: bool,
}

impl Ctx {
    fn say(&self, line: &str) {
        if !self.quiet {
            println!("{line}");
        }
    }

    fn write(&self, name: &str, body: &str) -> Result<PathBuf, Failure> {
        fs::create_dir_all(&self.out).map_err(|e| io_fail(&self.out, e))?;
        let path = self.out.join(name);
        fs::write(&path, body).map_err(|e| io_fail(&path, e))?;
        Ok(path)
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_fail(path, e))
}

fn load_problem(path: &Path, ctx: &Ctx) -> Result<(ReducedProblem, f64), Failure> {
    let file = ProblemFile::from_json(&read(path)?)?;
    let tol = ctx.tol.unwrap_or(file.tol_t());
    Ok((file.build()?, tol))
}

fn opt(v: Option<f64>) -> String {
    v.map_or("none".into(), |x| format!("{x:?}"))
}

fn analyze(ctx: &Ctx, path: &Path) -> Result<u8, Failure> {
    let (p, tol) = load_problem(path, ctx)?;
    let rep = classify(&p, tol)?;
    ctx.say(&format!("regime={} constant={:?}", rep.regime, rep.constant));
    ctx.say(&format!("order={} T_Gamma={}", rep.order, rep.t_gamma.map_or("inf".into(), |t| format!("{t:?}"))));
    let d = &rep.diagnostics;
    match rep.regime {
        Regime::DriftSlow => {
            let omega: Vec<String> = d.omega.iter().map(|(a, b)| format!("[{a:?},{b:?}]")).collect();
            ctx.say(&format!("H_inf={} Omega={}", opt(d.h_inf), omega.join(" ")));
        }
        Regime::DriftFast => ctx.say(&format!("argmin_z={} min_ratio={}", opt(d.argmin_z), opt(d.min_ratio))),
        Regime::DriftExact => {}
    }
    let json = serde_json::to_string_pretty(&rep).expect("report serializes");
    ctx.write("analyze.json", &(json + "\n"))?;
    Ok(0)
}

fn dp_for(rep: &RegimeReport, p: &ReducedProblem, eps: f64, grid: &DPGrid) -> Result<DPSolution, Failure> {
    Ok(match rep.regime {
        Regime::DriftExact => armc_dp(p, eps, grid, true)?,
        _ => rmc_dp(p, eps, grid)?,
    })
}

fn oracle(ctx: &Ctx, path: &Path, eps: &[f64], (n_t, n_z): (usize, usize), nr: usize) -> Result<u8, Failure> {
    let (p, tol) = load_problem(path, ctx)?;
    let rep = classify(&p, tol)?;
    let grid = DPGrid::new(n_t, n_z)?.with_r(nr)?;
    let mut csv = String::from("eps (1),dp_cost (MC units),predicted (MC units),ratio (dp/predicted)\n");
    for &e in eps {
        let sol = dp_for(&rep, &p, e, &grid)?;
        let pred = predict_mc(&rep, e);
        if sol.feasible {
            let ratio = sol.cost / pred;
            writeln!(csv, "{e},{},{pred},{ratio}", sol.cost).expect("string write");
            ctx.say(&format!("eps={e} dp_cost={} predicted={pred} ratio={ratio}", sol.cost));
            let mut rows = String::from("t (time),z (height),v (control)\n");
            for (t, z, v) in path_rows(&sol) {
                writeln!(rows, "{t},{z},{}", v.map_or(String::new(), |v| v.to_string())).expect("string write");
            }
            ctx.write(&format!("oracle_path_eps{e}.csv"), &rows)?;
        } else {
            writeln!(csv, "{e},infeasible,{pred},infeasible").expect("string write");
            eprintln!("warning: eps={e}: grid too coarse, no feasible path");
        }
    }
    ctx.write("oracle.csv", &csv)?;
    Ok(0)
}

fn martinet(ctx: &Ctx, path: &Path, (lo, hi, n): (f64, f64, usize), c_factor: f64) -> Result<u8, Failure> {
    let m: MartinetModel = martinet_from_json(&read(path)?)?;
    let eps = log_spaced_desc(lo, hi, n);
    // Rows run in parallel; collect keeps input order.
    let runs: Vec<_> = eps
        .par_iter()
        .map(|&e| {
            let c = c_factor * min_feasible_c(&m, e);
            (e, c, synthesize_crossing(&m, e, c))
        })
        .collect();
    let mut csv = String::from(
        "eps (1),c (control level),cost_arc1 (L1),cost_arc2 (L1),cost_arc3 (L1),total (L1),bound (L1 per arc)\n",
    );
    let mut points = Vec::new();
    for (e, c, run) in runs {
        match run {
            Ok(tr) => {
                let costs: Vec<f64> = tr.arcs.iter().map(|a| a.cost).collect();
                writeln!(csv, "{e},{c},{},{},{},{},{}", costs[0], costs[1], costs[2], tr.total, arc_cost_bound(&m, e))
                    .expect("string write");
                points.push((e, tr.total / e));
            }
            Err(err) => {
                writeln!(csv, "{e},{c},skipped,skipped,skipped,skipped,{}", arc_cost_bound(&m, e)).expect("string write");
                eprintln!("warning: eps={e}: {err}");
            }
        }
    }
    ctx.write("martinet_sweep.csv", &csv)?;
    let fit = fit_kappa(&points)?;
    ctx.write("martinet_fit.svg", &svg::fit_plot(&points, &fit))?;
    ctx.say(&format!(
        "kappa_est={:?} model_kappa={:?} residual={:?} intercept={:?} points={}",
        fit.kappa,
        m.kappa,
        fit.residual,
        fit.intercept,
        points.len()
    ));
    Ok(0)
}

fn kappa(ctx: &Ctx, path: &Path, q: Point) -> Result<u8, Failure> {
    let fp = FrameFile::from_json(&read(path)?)?.build()?;
    let kb = kappa_bracket(&fp, q)?;
    let kf = kappa_flow(&fp, q)?;
    let delta = (kb - kf).abs();
    let agree = delta <= 1e-5;
    ctx.say(&format!("kappa_bracket={kb:?} kappa_flow={kf:?} delta={delta:?} agree={agree}"));
    Ok(if agree { 0 } else { 1 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Ctx { out: cli.out, tol: cli.tol, quiet: cli.quiet };
    let res = match &cli.cmd {
        Command::Analyze { problem } => analyze(&ctx, problem),
        Command::Oracle { problem, eps, grid, nr } => oracle(&ctx, problem, eps, *grid, *nr),
        Command::Martinet { model, eps_range, c_factor } => martinet(&ctx, model, *eps_range, *c_factor),
        Command::Kappa { frame, point } => kappa(&ctx, frame, *point),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
