//! Crossing a Martinet point: the z-dynamics on the cylinder `r = eps`
//! under a constant angular control, its limit cycle, the three-arc
//! crossing synthesis, and the log fit that recovers kappa from a sweep.
//!
//! Phases are written with `psi = theta + theta_tilde`, the angle that
//! actually enters the dynamics.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::rk4_step;
use crate::reduced_oc::{measure_complement, superlevel_set, ReducedProblem};
use crate::scalar_fields::{bisect_monotone, grid_golden_min, integrate};

const STEPS_PER_PERIOD: f64 = 64.0;
/// Arc 1 gives up after this many relaxation times `1/lambda`.
const RELAX_LIMIT: f64 = 40.0;
const MAX_SAMPLES: usize = 2048;
const RATIO_CAP: f64 = 1e12;

fn default_entry() -> f64 {
    -0.25
}

fn default_exit() -> f64 {
    0.25
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartinetModel {
    pub a: f64,
    pub kappa: f64,
    pub alpha1_tilde: f64,
    pub theta_tilde: f64,
    #[serde(default = "default_entry")]
    pub z_entry: f64,
    #[serde(default = "default_exit")]
    pub z_exit: f64,
}

impl MartinetModel {
    pub fn new(a: f64, kappa: f64, alpha1_tilde: f64, theta_tilde: f64) -> Result<MartinetModel> {
        let m = MartinetModel { a, kappa, alpha1_tilde, theta_tilde, z_entry: default_entry(), z_exit: default_exit() };
        m.validate()?;
        Ok(m)
    }

    /// a = 1, kappa = 1, alpha1_tilde = 4, theta_tilde = 0.
    pub fn canonical() -> MartinetModel {
        MartinetModel::new(1.0, 1.0, 4.0, 0.0).expect("valid constants")
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.a, self.kappa, self.alpha1_tilde, self.theta_tilde, self.z_entry, self.z_exit]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidInput("Martinet model has non-finite fields".into()));
        }
        if !(self.a > 0.0) || !(self.kappa > 0.0) {
            return Err(Error::InvalidInput(format!("need a > 0 and kappa > 0, got a = {}, kappa = {}", self.a, self.kappa)));
        }
        if self.alpha1_tilde == 0.0 {
            return Err(Error::InvalidInput("alpha1_tilde must be nonzero".into()));
        }
        if !(self.z_entry < 0.0 && self.z_exit > 0.0) {
            return Err(Error::InvalidInput(format!("need z_entry < 0 < z_exit, got {} and {}", self.z_entry, self.z_exit)));
        }
        Ok(())
    }

    /// Contraction rate `eps kappa c / 2`.
    pub fn lambda(&self, c: f64, eps: f64) -> f64 {
        eps * self.kappa * c / 2.0
    }

    fn forcing(&self, c: f64, eps: f64) -> f64 {
        eps * eps * c * self.alpha1_tilde / 2.0
    }
}

/// `z' = -a - (eps c / 2) kappa z + (eps^2 / 2) c alpha1_tilde cos(psi)`
/// with `psi = (c/eps) t + theta0 + theta_tilde`.
pub fn crossing_rhs(m: &MartinetModel, c: f64, eps: f64, theta0: f64, t: f64, z: f64) -> f64 {
    let psi = c / eps * t + theta0 + m.theta_tilde;
    -m.a - m.lambda(c, eps) * z + m.forcing(c, eps) * psi.cos()
}

/// Periodic particular solution at phase `theta`.
pub fn limit_cycle_z(m: &MartinetModel, theta: f64, c: f64, eps: f64) -> f64 {
    let psi = theta + m.theta_tilde;
    let e2 = eps * eps;
    -2.0 * m.a / (eps * m.kappa * c)
        + m.alpha1_tilde * e2 * eps / (4.0 + m.kappa * m.kappa * e2 * e2) * (m.kappa * e2 * psi.cos() + 2.0 * psi.sin())
}

/// Exact solution of [`crossing_rhs`] from `z(0) = z0`.
pub fn closed_form_z(m: &MartinetModel, t: f64, c: f64, eps: f64, z0: f64, theta0: f64) -> f64 {
    let theta_t = c / eps * t + theta0;
    limit_cycle_z(m, theta_t, c, eps) + (-m.lambda(c, eps) * t).exp() * (z0 - limit_cycle_z(m, theta0, c, eps))
}

/// Largest z on the limit cycle.
pub fn cycle_max(m: &MartinetModel, c: f64, eps: f64) -> f64 {
    let e2 = eps * eps;
    -2.0 * m.a / (eps * m.kappa * c) + m.alpha1_tilde.abs() * e2 * eps / (4.0 + m.kappa * m.kappa * e2 * e2).sqrt()
}

/// theta at which the limit cycle peaks.
pub fn apex_theta(m: &MartinetModel, eps: f64) -> f64 {
    let psi = 2f64.atan2(m.kappa * eps * eps) + if m.alpha1_tilde < 0.0 { PI } else { 0.0 };
    psi - m.theta_tilde
}

/// `8 a / (|alpha1_tilde| kappa) eps^-4`.
pub fn min_feasible_c(m: &MartinetModel, eps: f64) -> f64 {
    8.0 * m.a / (m.alpha1_tilde.abs() * m.kappa) * eps.powi(-4)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArcTrace {
    pub t_start: f64,
    pub duration: f64,
    /// Constant controls `(v1, v2)` on the arc.
    pub v: [f64; 2],
    pub cost: f64,
    /// Decimated `(t, r, theta, z)` samples.
    pub path: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthesisTrace {
    pub eps: f64,
    pub c: f64,
    pub arcs: Vec<ArcTrace>,
    pub total: f64,
}

impl SynthesisTrace {
    pub fn end_z(&self, arc: usize) -> f64 {
        self.arcs[arc].path.last().expect("non-empty arc")[3]
    }
}

struct Sampler {
    stride: usize,
    count: usize,
    path: Vec<[f64; 4]>,
}

impl Sampler {
    fn new(expected_steps: f64) -> Sampler {
        let stride = (expected_steps / MAX_SAMPLES as f64).ceil().max(1.0) as usize;
        Sampler { stride, count: 0, path: Vec::new() }
    }

    fn push(&mut self, s: [f64; 4]) {
        if self.count % self.stride == 0 {
            self.path.push(s);
        }
        self.count += 1;
    }

    fn finish(mut self, s: [f64; 4]) -> Vec<[f64; 4]> {
        if self.path.last() != Some(&s) {
            self.path.push(s);
        }
        self.path
    }
}

/// Three-arc crossing at level `c`: (1) `v = (0, c)` from the prescribed
/// negative start until the first positive local maximum of z, (2)
/// `v = (c, 0)` for `2 eps / c`, taking theta to -theta and lowering z by
/// `2 a eps / c`, (3) the time reversal of arc 1 (drift `+a`, phase running
/// backwards) until `z = z_exit`.
///
/// `c` is not checked against [`min_feasible_c`]: below the true
/// threshold arc 1 never reaches z > 0 and the run fails with
/// `Infeasible`.
pub fn synthesize_crossing(m: &MartinetModel, eps: f64, c: f64) -> Result<SynthesisTrace> {
    m.validate()?;
    if !(eps > 0.0 && c > 0.0 && eps.is_finite() && c.is_finite()) {
        return Err(Error::InvalidInput(format!("need eps, c > 0, got eps = {eps}, c = {c}")));
    }
    let lam = m.lambda(c, eps);
    let omega = c / eps;
    let h = 2.0 * PI / omega / STEPS_PER_PERIOD;

    // Arc 1.
    let z0 = -0.5 * (2.0 * m.a / (m.kappa * c * eps) + m.alpha1_tilde.abs() * eps / (m.kappa * c));
    let th0 = apex_theta(m, eps);
    let mut f1 = |t: f64, z: f64| Ok(crossing_rhs(m, c, eps, th0, t, z));
    let mut s1 = Sampler::new(RELAX_LIMIT / lam / h / 4.0);
    let (mut t, mut z) = (0.0, z0);
    let mut rising = false;
    s1.push([0.0, eps, th0, z0]);
    let t1 = loop {
        if t > RELAX_LIMIT / lam {
            return Err(Error::Infeasible(format!(
                "arc 1 never reaches z > 0 at c = {c:e} (limit-cycle max {:e})",
                cycle_max(m, c, eps)
            )));
        }
        let zn = rk4_step(&mut f1, t, z, h)?;
        let tn = t + h;
        if rising && zn <= z && z > 0.0 {
            break (t, z);
        }
        rising = zn > z;
        (t, z) = (tn, zn);
        s1.push([t, eps, th0 + omega * t, z]);
    };
    let (t1, z1) = t1;
    let th1 = th0 + omega * t1;
    let arc1 = ArcTrace { t_start: 0.0, duration: t1, v: [0.0, c], cost: c * t1, path: s1.finish([t1, eps, th1, z1]) };

    // Arc 2.
    let d2 = 2.0 * eps / c;
    let z2 = z1 - m.a * d2;
    if !(z2 > 0.0) {
        return Err(Error::ArcSignLoss { z: z2 });
    }
    let arc2 = ArcTrace {
        t_start: t1,
        duration: d2,
        v: [c, 0.0],
        cost: 2.0 * eps,
        path: vec![[t1, eps, th1, z1], [t1 + d2, eps, -th1, z2]],
    };

    // Arc 3.
    let th3 = -th1;
    let forcing = m.forcing(c, eps);
    let mut f3 = |t: f64, z: f64| {
        let psi = th3 - omega * t + m.theta_tilde;
        Ok(m.a + lam * z - forcing * psi.cos())
    };
    let expected = ((m.z_exit / z2).ln().max(1.0) + 1.0) / lam;
    let mut s3 = Sampler::new(expected / h);
    let t3_start = t1 + d2;
    let (mut t, mut z) = (0.0, z2);
    s3.push([t3_start, eps, th3, z2]);
    let limit = 10.0 * expected + RELAX_LIMIT / lam;
    let t3 = loop {
        if t > limit {
            return Err(Error::Infeasible(format!("arc 3 does not reach z_exit = {}", m.z_exit)));
        }
        let zn = rk4_step(&mut f3, t, z, h)?;
        if zn >= m.z_exit {
            break t + h * (m.z_exit - z) / (zn - z);
        }
        t += h;
        z = zn;
        s3.push([t3_start + t, eps, th3 - omega * t, z]);
    };
    let arc3 = ArcTrace {
        t_start: t3_start,
        duration: t3,
        v: [0.0, c],
        cost: c * t3,
        path: s3.finish([t3_start + t3, eps, th3 - omega * t3, m.z_exit]),
    };
    let total = arc1.cost + arc2.cost + arc3.cost;
    Ok(SynthesisTrace { eps, c, arcs: vec![arc1, arc2, arc3], total })
}

/// `(2/(kappa eps)) ln(kappa |z_t2| / (eps |alpha1_tilde|))`.
pub fn gronwall_lower_bound(m: &MartinetModel, z_t2: f64, eps: f64, c: f64) -> Result<f64> {
    if z_t2 == 0.0 || !(c * eps * eps > 1.0) {
        return Err(Error::InvalidInput(format!("need z_t2 != 0 and c eps^2 > 1 (z_t2 = {z_t2}, c = {c}, eps = {eps})")));
    }
    Ok(2.0 / (m.kappa * eps) * (m.kappa * z_t2.abs() / (eps * m.alpha1_tilde.abs())).ln())
}

/// Per-arc upper bound `-(2/(kappa eps)) ln eps`.
pub fn arc_cost_bound(m: &MartinetModel, eps: f64) -> f64 {
    -2.0 / (m.kappa * eps) * eps.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub c: f64,
    pub cost_arc1: f64,
    pub cost_arc2: f64,
    pub cost_arc3: f64,
    pub total: f64,
    /// [`arc_cost_bound`] at this eps.
    pub bound: f64,
}

/// `n` values from `hi` down to `lo`, evenly spaced in log.
pub fn log_spaced_desc(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![hi];
    }
    let (a, b) = (hi.ln(), lo.ln());
    let mut out: Vec<f64> = (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect();
    (out[0], out[n - 1]) = (hi, lo);
    out
}

/// One synthesis per eps at `c = c_factor * min_feasible_c`, in parallel.
pub fn sweep(m: &MartinetModel, eps: &[f64], c_factor: f64) -> Result<Vec<SweepRow>> {
    eps.par_iter()
        .map(|&e| {
            let c = c_factor * min_feasible_c(m, e);
            let tr = synthesize_crossing(m, e, c)?;
            Ok(SweepRow {
                eps: e,
                c,
                cost_arc1: tr.arcs[0].cost,
                cost_arc2: tr.arcs[1].cost,
                cost_arc3: tr.arcs[2].cost,
                total: tr.total,
                bound: arc_cost_bound(m, e),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KappaFit {
    pub kappa: f64,
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
}

/// Least squares of `cost eps^2` on `-ln eps`; `kappa = 4 / slope`.
/// `cost` is on the motion-complexity scale (total L1 norm over eps).
pub fn fit_kappa(points: &[(f64, f64)]) -> Result<KappaFit> {
    if points.len() < 5 {
        return Err(Error::InvalidInput(format!("fit needs at least 5 points, got {}", points.len())));
    }
    if points.windows(2).any(|w| !(w[1].0 < w[0].0)) || points.iter().any(|p| !(p.0 > 0.0) || !p.1.is_finite()) {
        return Err(Error::InvalidInput("sweep eps must be positive and strictly decreasing".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| -p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1 * p.0 * p.0).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 1e-300) {
        return Err(Error::DegenerateFit("no spread in -ln eps".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    if !(slope > 0.0) {
        return Err(Error::DegenerateFit(format!("slope {slope} is not positive")));
    }
    let intercept = my - slope * mx;
    let ss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(KappaFit { kappa: 4.0 / slope, slope, intercept, residual: (ss / n).sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregate {
    pub value: f64,
    /// No Martinet points: the drift-regime analysis applies instead.
    pub empty: bool,
}

/// `-(ln eps / eps^2) sum 4/kappa_i`.
pub fn aggregate_multi(kappas: &[f64], eps: f64) -> Result<Aggregate> {
    if let Some(&k) = kappas.iter().find(|k| !(**k > 0.0)) {
        return Err(Error::NonPositiveKappa(k));
    }
    let s: f64 = kappas.iter().map(|k| 4.0 / k).sum();
    Ok(Aggregate { value: -eps.ln() / (eps * eps) * s, empty: kappas.is_empty() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoodDriftReport {
    pub z_star: f64,
    pub h_inf: f64,
    pub omega: Vec<(f64, f64)>,
    /// integral of 1/alpha over the complement of Omega.
    pub outside_integral: f64,
    pub inside: bool,
}

/// For a zero of alpha at `z*` with `a0(z*) > 0`, locate `Omega(H_inf)`
/// with the ratio capped at 1e12 and report whether `z*` is interior.
/// `tol` is the largest |alpha| accepted as a zero.
pub fn good_drift_omega_check(p: &ReducedProblem, tol: f64) -> Result<GoodDriftReport> {
    let (z_star, amin) = grid_golden_min(|z| Ok(p.alpha.eval(z)?.abs()), 0.0, p.z_f, 4096, 1e-12)?;
    if amin > tol {
        return Err(Error::ConfigurationMismatch(format!(
            "alpha is bounded away from 0 (min {amin:e}); use classify"
        )));
    }
    if !(p.a0.eval(z_star)? > 0.0) {
        return Err(Error::ConfigurationMismatch(format!(
            "a0({z_star}) <= 0: a Sigma-minus point, handled by the crossing synthesis"
        )));
    }
    if !(p.t < p.t_gamma()?) {
        return Err(Error::ConfigurationMismatch("needs T < T_Gamma".into()));
    }
    let ratio = |z: f64| -> Result<f64> {
        let (a0, al) = (p.a0.eval(z)?, p.alpha.eval(z)?.abs());
        Ok(if a0 >= RATIO_CAP * al { RATIO_CAP } else { a0 / al })
    };
    let time_free = |h: f64| -> Result<f64> {
        let mut total = 0.0;
        for (a, b) in superlevel_set(ratio, h, 0.0, p.z_f)? {
            total += integrate(|z| Ok(1.0 / p.a0.eval(z)?), a, b, 1e-12)?;
        }
        Ok(total)
    };
    let h_inf = bisect_monotone(|h| Ok(time_free(h)? - p.t), 0.0, RATIO_CAP * 0.5, 1e-13)?;
    let omega = superlevel_set(ratio, h_inf, 0.0, p.z_f)?;
    let inside = omega.iter().any(|&(a, b)| a < z_star && z_star < b);
    let mut outside_integral = 0.0;
    for (a, b) in measure_complement(&omega, p.z_f) {
        outside_integral += integrate(|z| Ok(1.0 / p.alpha.eval(z)?), a, b, 1e-10)?;
    }
    Ok(GoodDriftReport { z_star, h_inf, omega, outside_integral, inside })
}
