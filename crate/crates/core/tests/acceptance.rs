//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines always reach stdout; exits non-zero on an
//! unexpected failure.

mod common;

use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use common::{exact, fast, problem, slow, trig_profiles};
use mctrack_core::geometry::{kappa_bracket, kappa_bracket_with, kappa_flow, kappa_flow_with, normal_form_parts, Box3, FramedProblem, OneForm3, VectorField3};
use mctrack_core::martinet::{self, MartinetModel};
use mctrack_core::ode::rk4_fixed;
use mctrack_core::oracle_dp::{armc_dp, rmc_dp, structure_check, DPGrid, DPSolution};
use mctrack_core::reduced_oc::{self as roc, Regime, DEFAULT_TOL_T};
use mctrack_core::expr::{Expr, Var};
use mctrack_core::Error;
use rand::{rngs::StdRng, Rng, SeedableRng};

/// Criteria that cannot hold as stated; see the README.
const KNOWN_UNATTAINABLE: &[u32] = &[9];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target.abs()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

/// DP solutions shared between criteria 1/2 and 6.
struct Shared {
    fast_sol: DPSolution,
    slow_sol: DPSolution,
}

fn crit1(sh: &mut Option<Shared>) -> Outcome {
    let p = fast();
    let rep = roc::classify(&p, DEFAULT_TOL_T).unwrap();
    let (sol, dt) = timed(|| rmc_dp(&p, 1.0, &DPGrid::new(512, 512).unwrap()).unwrap());
    let pred = roc::predict_mc(&rep, 1.0);
    let pass = rep.regime == Regime::DriftFast
        && rep.constant == 1.0
        && within(sol.cost, pred, 0.05)
        && dt < Duration::from_secs(10);
    let detail = format!("regime={} constant={} dp={:.6} runtime={:.2?}", rep.regime, rep.constant, sol.cost, dt);
    let slow_sol = sh.take().map(|s| s.slow_sol);
    *sh = Some(Shared { fast_sol: sol, slow_sol: slow_sol.unwrap_or_else(empty_solution) });
    outcome(pass, detail)
}

fn empty_solution() -> DPSolution {
    DPSolution { cost: f64::NAN, raw_cost: f64::NAN, feasible: false, t: vec![], z: vec![], r: None, v: vec![], dz: 0.0, dt: 0.0 }
}

fn crit2(sh: &mut Option<Shared>) -> Outcome {
    let start = Instant::now();
    let p = slow();
    let h_true = 2.0 * (-0.3f64).exp();
    let ladder = roc::h_infinity_ladder(&p).unwrap().h;
    let free = roc::h_infinity_free_flow(&p).unwrap();
    let rep = roc::classify(&p, DEFAULT_TOL_T).unwrap();
    // Omega = [0, 2 - H_inf), so |Omega| = 2 - H_inf.
    let analytic = 2.0 * (1.0 - (2.0 - h_true));
    let sol = rmc_dp(&p, 1.0, &DPGrid::new(512, 512).unwrap()).unwrap();
    let dt = start.elapsed();
    let pass = (ladder - h_true).abs() <= 1e-3
        && (free - h_true).abs() <= 1e-3
        && rep.regime == Regime::DriftSlow
        && (rep.constant - analytic).abs() <= 2e-4
        && (rep.constant - 0.96328).abs() <= 2e-4
        && within(sol.cost, rep.constant, 0.05)
        && dt < Duration::from_secs(30);
    let detail = format!(
        "H_ladder={ladder:.6} H_free={free:.6} (2e^-0.3={h_true:.6}) constant={:.6} dp={:.6} runtime={dt:.2?}",
        rep.constant, sol.cost
    );
    match sh {
        Some(s) => s.slow_sol = sol,
        None => *sh = Some(Shared { fast_sol: empty_solution(), slow_sol: sol }),
    }
    outcome(pass, detail)
}

fn crit3() -> Outcome {
    let p = exact();
    let rep = roc::classify(&p, DEFAULT_TOL_T).unwrap();
    let target = 1.0 - 2f64.ln();
    let eps = 0.05;
    let (sol, dt) = timed(|| armc_dp(&p, eps, &DPGrid::new(512, 512).unwrap(), true).unwrap());
    let scaled = sol.cost * eps;
    let pass = rep.regime == Regime::DriftExact && (rep.constant - target).abs() <= 1e-8 && within(scaled, target, 0.10);
    outcome(pass, format!("constant={:.10} (1-ln2={target:.10}) dp*eps={scaled:.6} runtime={dt:.2?}", rep.constant))
}

fn crit4() -> Outcome {
    let mut rng = StdRng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..10 {
        let (a0, alpha) = trig_profiles(&mut rng);
        let tg = problem(&a0, &alpha, None, 1.0, 1.0).t_gamma().unwrap();
        let check = |t: f64| -> Result<f64, Error> {
            let p = problem(&a0, &alpha, None, 1.0, t);
            let inv = p.inv_alpha_integral(0.0, 1.0)?;
            let rep = roc::classify(&p, DEFAULT_TOL_T)?;
            let dual = match rep.regime {
                Regime::DriftFast => 2.0 * (roc::i_substar(&p)?.0 - inv),
                _ => 2.0 * (inv - roc::i_star(&p)?),
            };
            Ok((rep.constant - dual).abs())
        };
        for t in [1.5 * tg, 0.6 * tg] {
            match check(t) {
                Ok(d) => worst = worst.max(d),
                Err(_) => failures += 1,
            }
        }
    }
    outcome(failures == 0 && worst <= 1e-8, format!("20 cases, max |primal - dual| = {worst:.2e}, errors = {failures}"))
}

fn crit5() -> Outcome {
    let p = slow();
    let mut rng = StdRng::seed_from_u64(5);
    let end = |h: f64, c: f64| roc::shoot(&p, h, c).unwrap().end();
    let mut violations = 0;
    for _ in 0..20 {
        let (h1, h2): (f64, f64) = (rng.gen_range(0.5..2.5), rng.gen_range(0.5..2.5));
        let (lo, hi) = (h1.min(h2), h1.max(h2));
        for c in [0.5, 1.0, 2.0, 4.0] {
            if end(lo, c) > end(hi, c) + 1e-10 {
                violations += 1;
            }
        }
    }
    for h in [0.8, 1.2, 1.6, 2.0] {
        let ends: Vec<f64> = [0.5, 1.0, 2.0, 4.0].iter().map(|&c| end(h, c)).collect();
        violations += ends.windows(2).filter(|w| w[0] > w[1] + 1e-10).count();
    }
    let ladder = roc::h_infinity_ladder(&p).unwrap();
    violations += ladder.rungs.windows(2).filter(|w| w[1].1 > w[0].1 + 1e-10).count();
    outcome(violations == 0, format!("violations = {violations} (ladder rungs = {})", ladder.rungs.len()))
}

fn crit6(sh: &Option<Shared>) -> Outcome {
    let Some(sh) = sh else { return outcome(false, "criteria 1/2 did not run".into()) };
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, sol, p) in [("fast", &sh.fast_sol, fast()), ("slow", &sh.slow_sol, slow())] {
        let r = structure_check(sol, &p).unwrap();
        pass &= r.max_down_cells <= 1.0 && r.wrong_sign_fraction <= 0.02;
        parts.push(format!("{name}: down={} cells wrong-sign={:.4}", r.max_down_cells, r.wrong_sign_fraction));
    }
    outcome(pass, parts.join(", "))
}

fn crit7() -> Outcome {
    let p = slow();
    let grid = DPGrid::new(128, 128).unwrap();
    let scaled: Vec<f64> = [1.0, 0.5, 0.25].iter().map(|&e| rmc_dp(&p, e, &grid).unwrap().cost * e * e).collect();
    let spread = scaled.iter().map(|v| ((v - scaled[0]) / scaled[0]).abs()).fold(0.0, f64::max);
    outcome(spread <= 1e-12, format!("cost*eps^2 = {scaled:?}, max relative spread = {spread:.1e}"))
}

fn frame(gamma: &str, omega_scale: Option<&str>) -> FramedProblem {
    let (x1, x2, om) = normal_form_parts(gamma);
    let bbox = Box3 { x: (-1.0, 1.0), y: (-1.0, 1.0), z: (-1.0, 1.0) };
    let mut omega = OneForm3::parse([&om[0], &om[1], &om[2]]).unwrap();
    if let Some(f) = omega_scale {
        omega = omega.scale(&xyz(f));
    }
    FramedProblem::new(
        VectorField3::parse(["0", "0", "1"]).unwrap(),
        VectorField3::parse([&x1[0], &x1[1], &x1[2]]).unwrap(),
        VectorField3::parse([&x2[0], &x2[1], &x2[2]]).unwrap(),
        omega,
        (-0.5, 0.5),
        bbox,
    )
    .unwrap()
}

fn crit8() -> Outcome {
    let q = [0.0; 3];
    let mut worst: f64 = 0.0;
    let mut kappas = Vec::new();
    for gamma in ["z + x", "3*z", "2*sin(z) + 0.5*y"] {
        let fp = frame(gamma, None);
        let kb = kappa_bracket(&fp, q).unwrap();
        let mut vals = vec![kb, kappa_flow(&fp, q).unwrap()];
        let scaled = frame(gamma, Some("1 + 0.3*sin(x + z)"));
        vals.push(kappa_bracket(&scaled, q).unwrap());
        vals.push(kappa_flow(&scaled, q).unwrap());
        let w = fp.default_w();
        for ext in [
            w.add(&fp.x1.scale(&xyz("0.5*x"))),
            w.add(&fp.x2.scale(&xyz("0.5*y"))),
        ] {
            vals.push(kappa_bracket_with(&fp, q, &ext).unwrap());
            vals.push(kappa_flow_with(&fp, q, &ext).unwrap());
        }
        if gamma == "3*z" {
            let ext = w.add(&fp.x1.scale(&Expr::Num(0.5)));
            vals.push(kappa_bracket_with(&fp, q, &ext).unwrap());
            vals.push(kappa_flow_with(&fp, q, &ext).unwrap());
        }
        worst = vals.iter().map(|v| (v - kb).abs()).fold(worst, f64::max);
        kappas.push(kb);
    }
    outcome(worst <= 1e-6, format!("kappa = {kappas:?}, max deviation = {worst:.2e}"))
}

fn crit9() -> Outcome {
    let m = MartinetModel::canonical();
    let start = Instant::now();
    let eps = martinet::log_spaced_desc(0.02, 0.2, 8);
    let rows = martinet::sweep(&m, &eps, 10.0).unwrap();
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.eps, r.total / r.eps)).collect();
    let fit = martinet::fit_kappa(&pts).unwrap();
    let ratios: Vec<f64> = rows.iter().map(|r| r.cost_arc1.max(r.cost_arc3) / r.bound).collect();
    let bounded = ratios.iter().all(|&r| r <= 1.3);
    // Rows run from large to small eps; the ratio must not grow as eps shrinks.
    let settling = ratios.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let infeasible = eps.iter().all(|&e| {
        let c = 0.5 * martinet::min_feasible_c(&m, e);
        // Near eps = 0.02 the cycle max is -3e-13 and round-off can fake a
        // positive apex; arc 2 then refuses instead.
        matches!(martinet::synthesize_crossing(&m, e, c), Err(Error::Infeasible(_) | Error::ArcSignLoss { .. }))
    });
    let dt = start.elapsed();
    let fit_ok = within(fit.kappa, 1.0, 0.15);
    let pass = fit_ok && bounded && settling && infeasible && dt < Duration::from_secs(60);
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    outcome(
        pass,
        format!(
            "kappa_est={:.4} (fit {}) arc/bound in [{lo:.3}, {hi:.3}] (bounded {bounded}, settling {settling}) infeasible@0.5x {infeasible} runtime={dt:.2?}",
            fit.kappa,
            if fit_ok { "ok" } else { "off" }
        ),
    )
}

fn crit10() -> Outcome {
    let mut rng = StdRng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let m = MartinetModel::new(
            rng.gen_range(0.5..2.0),
            rng.gen_range(0.5..2.0),
            sign * rng.gen_range(0.5..4.0),
            rng.gen_range(0.0..TAU),
        )
        .unwrap();
        let (eps, c) = (rng.gen_range(0.05..0.3), rng.gen_range(1.0..100.0));
        let (z0, th0) = (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..TAU));
        let t = rng.gen_range(0.001..0.02);
        let n = (t / 1e-6f64).ceil() as usize;
        let num = rk4_fixed(|s, z| Ok(martinet::crossing_rhs(&m, c, eps, th0, s, z)), 0.0, z0, t, n).unwrap();
        worst = worst.max((num - martinet::closed_form_z(&m, t, c, eps, z0, th0)).abs());
    }

    // Two trajectories differ by a pure exponential; fit its rate.
    let m = MartinetModel::canonical();
    let (eps, c) = (0.1, 1e3);
    let lam = m.lambda(c, eps);
    let rhs = |s: f64, z: f64| Ok(martinet::crossing_rhs(&m, c, eps, 0.0, s, z));
    let samples: Vec<(f64, f64)> = (1..=20)
        .map(|k| {
            let t = 0.005 * k as f64;
            let n = (t / 1e-6f64).round() as usize;
            let a = rk4_fixed(rhs, 0.0, 0.5, t, n).unwrap();
            let b = rk4_fixed(rhs, 0.0, -0.5, t, n).unwrap();
            (t, (a - b).abs().ln())
        })
        .collect();
    let nf = samples.len() as f64;
    let (mt, my) = samples.iter().fold((0.0, 0.0), |(a, b), &(t, y)| (a + t / nf, b + y / nf));
    let sxy: f64 = samples.iter().map(|&(t, y)| (t - mt) * (y - my)).sum();
    let sxx: f64 = samples.iter().map(|&(t, _)| (t - mt).powi(2)).sum();
    let rate = -sxy / sxx;
    outcome(
        worst <= 1e-8 && within(rate, lam, 0.10),
        format!("max |closed - rk4| = {worst:.2e}, rate = {rate:.4} (eps kappa c/2 = {lam})"),
    )
}

fn crit11() -> Outcome {
    let p = problem("1", "2", Some("2"), 1.0, 2.0);
    let grid = DPGrid::new(96, 96).unwrap().with_r(24).unwrap();
    let (diffs, dt) = timed(|| {
        [0.4, 0.2, 0.1]
            .iter()
            .map(|&e| {
                let with = armc_dp(&p, e, &grid, true).unwrap().cost;
                let without = armc_dp(&p, e, &grid, false).unwrap().cost;
                (with - without) * e
            })
            .collect::<Vec<f64>>()
    });
    let bound = 1.5 * diffs[0].abs();
    let pass = diffs.iter().all(|d| d.is_finite() && d.abs() <= bound) && dt < Duration::from_secs(120);
    outcome(pass, format!("(with - without) * eps = {diffs:.4?} runtime={dt:.2?}"))
}

fn main() {
    let mut shared = None;
    let results: Vec<(u32, Outcome)> = vec![
        (1, crit1(&mut shared)),
        (2, crit2(&mut shared)),
        (3, crit3()),
        (4, crit4()),
        (5, crit5()),
        (6, crit6(&shared)),
        (7, crit7()),
        (8, crit8()),
        (9, crit9()),
        (10, crit10()),
        (11, crit11()),
    ];
    let mut unexpected = Vec::new();
    for (id, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        let note = if !o.pass && KNOWN_UNATTAINABLE.contains(id) { " [known unattainable]" } else { "" };
        println!("criterion {id:>2}: {tag} {}{note}", o.detail);
        if !o.pass && !KNOWN_UNATTAINABLE.contains(id) {
            unexpected.push(*id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("failing criteria: {unexpected:?}");
        std::process::exit(1);
    }
}

fn xyz(s: &str) -> Expr {
    Expr::parse(s, &[Var::X, Var::Y, Var::Z]).unwrap()
}
