//! The reduced one-dimensional problem: minimise the L1 norm of `v` for
//! `z' = a0(z) - alpha(z) v`, `z(0) = 0`, `z(T) = z_f`.
//!
//! The shooting layer works with the threshold feedback of the maximum
//! principle: bang (`v = -c`, i.e. `z' = a0 + c alpha`) where
//! `a0/alpha < H`, coast (`v = 0`) where `a0/alpha >= H`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::time_t_gamma;
use crate::ode::{dopri5_step, Tolerances};
use crate::scalar_fields::{bisect_monotone, grid, grid_golden_min, integrate, ScalarField};

/// Points used for every grid scan over `[0, z_f]`.
pub const SCAN_POINTS: usize = 4096;
const QUAD_TOL: f64 = 1e-12;
const MAX_SWITCHES: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedProblem {
    pub a0: ScalarField,
    pub alpha: ScalarField,
    pub b: Option<ScalarField>,
    pub z_f: f64,
    pub t: f64,
}

impl ReducedProblem {
    pub fn new(a0: ScalarField, alpha: ScalarField, b: Option<ScalarField>, z_f: f64, t: f64) -> Result<Self> {
        if !(z_f.is_finite() && z_f > 0.0) {
            return Err(Error::InvalidInput(format!("z_f = {z_f} must be finite and positive")));
        }
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::InvalidInput(format!("T = {t} must be finite and positive")));
        }
        for (name, f) in [("a0", Some(&a0)), ("alpha", Some(&alpha)), ("b", b.as_ref())] {
            if let Some(f) = f {
                if !(f.contains(0.0) && f.contains(z_f)) {
                    let (lo, hi) = f.domain();
                    return Err(Error::InvalidInput(format!(
                        "{name} is defined on [{lo}, {hi}], which does not cover [0, {z_f}]"
                    )));
                }
            }
        }
        Ok(ReducedProblem { a0, alpha, b, z_f, t })
    }

    /// Step-2 mode needs alpha > 0 along the whole curve.
    pub fn check_step2(&self) -> Result<()> {
        for z in grid(0.0, self.z_f, SCAN_POINTS) {
            let a = self.alpha.eval(z)?;
            if !(a > 0.0) {
                return Err(Error::InvalidInput(format!("alpha({z}) = {a} is not positive")));
            }
        }
        Ok(())
    }

    pub fn ratio(&self, z: f64) -> Result<f64> {
        let a = self.alpha.eval_extended(z)?;
        if a == 0.0 {
            return Err(Error::EvalDomain(format!("alpha vanishes at z = {z}")));
        }
        Ok(self.a0.eval_extended(z)? / a)
    }

    /// (min, max) of a0/alpha from the grid scan.
    pub fn ratio_range(&self) -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for z in grid(0.0, self.z_f, SCAN_POINTS) {
            let r = self.ratio(z)?;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        Ok((lo, hi))
    }

    pub fn t_gamma(&self) -> Result<f64> {
        time_t_gamma(&self.a0, self.z_f)
    }

    /// integral of 1/alpha over [a, b].
    pub fn inv_alpha_integral(&self, a: f64, b: f64) -> Result<f64> {
        integrate(|z| Ok(1.0 / self.alpha.eval(z)?), a, b, QUAD_TOL)
    }
}

/// Threshold feedback in the stored sign convention `z' = a0 - alpha v`.
/// Ties (`H == a0/alpha`) coast.
pub fn feedback_v(z: f64, h: f64, c: f64, p: &ReducedProblem) -> Result<f64> {
    Ok(if h > p.ratio(z)? { -c } else { 0.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwitchedTrajectory {
    pub t: Vec<f64>,
    pub z: Vec<f64>,
    /// Control on the step that starts at the same index.
    pub v: Vec<f64>,
    pub switches: Vec<f64>,
    /// L1 norm of the control.
    pub cost: f64,
    /// integral over [0, T] of a0(z)/alpha(z) along the trajectory.
    pub drift_ratio_integral: f64,
}

impl SwitchedTrajectory {
    /// E_c(H) = z(T).
    pub fn end(&self) -> f64 {
        *self.z.last().expect("trajectory has at least one sample")
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Guard {
    Fail,
    Saturate,
}

/// Integrate the switched system for threshold `h` and authority `c`.
pub fn shoot(p: &ReducedProblem, h: f64, c: f64) -> Result<SwitchedTrajectory> {
    integrate_switched(p, h, c, Guard::Fail, true)
}

/// E_c(H) with the guard saturating instead of failing; only the sign of
/// `E - z_f` matters to the callers.
fn end_value(p: &ReducedProblem, h: f64, c: f64) -> Result<f64> {
    Ok(integrate_switched(p, h, c, Guard::Saturate, false)?.end())
}

fn integrate_switched(p: &ReducedProblem, h_thr: f64, c: f64, guard: Guard, record: bool) -> Result<SwitchedTrajectory> {
    if !(c > 0.0) {
        return Err(Error::InvalidInput(format!("c = {c} must be positive")));
    }
    let tol = Tolerances::default();
    let bang_at = |z: f64| -> Result<bool> { Ok(p.ratio(z)? < h_thr) };
    let rhs = |bang: bool| {
        move |_t: f64, y: [f64; 2]| -> Result<[f64; 2]> {
            let a0 = p.a0.eval_extended(y[0])?;
            let al = p.alpha.eval_extended(y[0])?;
            let zdot = if bang { a0 + c * al } else { a0 };
            Ok([zdot, a0 / al])
        }
    };
    let t_end = p.t;
    let (mut t, mut y) = (0.0, [0.0, 0.0]);
    let mut bang = bang_at(0.0)?;
    let mut bang_time = 0.0;
    let mut step = t_end / 64.0;
    let mut out = SwitchedTrajectory {
        t: vec![0.0],
        z: vec![0.0],
        v: vec![],
        switches: vec![],
        cost: 0.0,
        drift_ratio_integral: 0.0,
    };
    while t < t_end {
        step = step.min(t_end - t);
        if step <= 1e-15 * t_end.max(t) {
            // Round-off at the end of the horizon.
            if t_end - t <= 1e-13 * t_end {
                break;
            }
            // Past z_f only the sign of E - z_f is needed; a stalled step
            // there is a singularity of the data beyond the target.
            if guard == Guard::Saturate && y[0] > p.z_f {
                break;
            }
            return Err(Error::NonConvergence { a: t, b: t_end });
        }
        let mut f = rhs(bang);
        let (yn, err) = match dopri5_step(&mut f, t, y, step) {
            Ok(v) => v,
            Err(_) if guard == Guard::Saturate && y[0] > p.z_f => break,
            Err(e) => return Err(e),
        };
        let (r0, next0) = tol.assess(y[0], yn[0], err[0], step);
        let (r1, next1) = tol.assess(y[1], yn[1], err[1], step);
        if r0.max(r1) > 1.0 || !yn[0].is_finite() {
            step = next0.min(next1);
            continue;
        }
        let next = next0.min(next1);
        let (t_new, y_new, taken) = if bang_at(yn[0])? != bang {
            // Bisect on the step fraction, well past the 1e-12 time target:
            // at large c a time error dt moves E by c * dt. Keep the right end.
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            let mut y_hi = yn;
            while hi - lo > 4.0 * f64::EPSILON {
                let mid = 0.5 * (lo + hi);
                let (ym, _) = dopri5_step(&mut f, t, y, mid * step)?;
                if bang_at(ym[0])? != bang {
                    hi = mid;
                    y_hi = ym;
                } else {
                    lo = mid;
                }
            }
            if hi < 1.0 {
                let (yh, _) = dopri5_step(&mut f, t, y, hi * step)?;
                y_hi = yh;
            }
            (t + hi * step, y_hi, hi * step)
        } else {
            (t + step, yn, step)
        };
        if bang {
            bang_time += taken;
        }
        if record {
            out.v.push(if bang { -c } else { 0.0 });
            out.t.push(t_new);
            out.z.push(y_new[0]);
        }
        t = t_new;
        y = y_new;
        let now = bang_at(y[0])?;
        if now != bang {
            bang = now;
            out.switches.push(t);
            if out.switches.len() > MAX_SWITCHES {
                return Err(Error::Degenerate(format!(
                    "switching set chatters at H = {h_thr} (more than {MAX_SWITCHES} switches)"
                )));
            }
        }
        if y[0] < -p.z_f || y[0] > 2.0 * p.z_f {
            match guard {
                Guard::Fail => return Err(Error::BlowUp { t, z: y[0] }),
                Guard::Saturate => break,
            }
        }
        step = next;
    }
    if !record {
        out.t.push(t);
        out.z.push(y[0]);
    }
    out.v.push(if bang { -c } else { 0.0 });
    out.cost = c * bang_time;
    out.drift_ratio_integral = y[1];
    Ok(out)
}

/// H(c): the threshold whose trajectory ends at `z_f`.
pub fn solve_h(p: &ReducedProblem, c: f64) -> Result<f64> {
    let (rmin, rmax) = p.ratio_range()?;
    let lo0 = rmin.min(0.0) - 1.0;
    let hi0 = rmax + 1.0;
    let e_hi = end_value(p, hi0, c)?;
    if e_hi <= p.z_f {
        return Err(Error::CTooSmall { c });
    }
    let e_lo = end_value(p, lo0, c)?;
    if e_lo > p.z_f {
        return Err(Error::InvalidInput(format!(
            "free flow overshoots z_f (E = {e_lo}); solve_h needs T < T_Gamma"
        )));
    }
    let (mut lo, mut hi) = (lo0, hi0);
    let mut best = (f64::INFINITY, hi);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let e = end_value(p, mid, c)?;
        let miss = (e - p.z_f).abs();
        if miss < best.0 {
            best = (miss, mid);
        }
        if miss <= 1e-9 * p.z_f {
            return Ok(mid);
        }
        if e > p.z_f {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(best.1)
}

/// Reject problems where a0/alpha is flat on a set of positive measure.
pub fn check_nondegenerate(p: &ReducedProblem) -> Result<()> {
    let zs: Vec<f64> = grid(0.0, p.z_f, SCAN_POINTS).collect();
    let r: Vec<f64> = zs.iter().map(|&z| p.ratio(z)).collect::<Result<_>>()?;
    let scale = r.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    for k in 0..r.len() - 2 {
        let flat = |a: f64, b: f64| (a - b).abs() <= 1e-12 * scale;
        if flat(r[k], r[k + 1]) && flat(r[k + 1], r[k + 2]) {
            return Err(Error::Degenerate(format!(
                "a0/alpha is constant near z = {} (flat level set)",
                zs[k]
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ladder {
    pub h: f64,
    pub rungs: Vec<(f64, f64)>,
}

/// H_inf as the limit of H(c) along c = 1e3 * 4^k, k = 0..=12.
pub fn h_infinity_ladder(p: &ReducedProblem) -> Result<Ladder> {
    let mut rungs: Vec<(f64, f64)> = Vec::new();
    for k in 0..=12 {
        let c = 1e3 * 4f64.powi(k);
        let h = match solve_h(p, c) {
            Ok(h) => h,
            Err(Error::CTooSmall { .. }) => continue,
            Err(e) => return Err(e),
        };
        let done = rungs.last().map_or(false, |&(_, prev): &(f64, f64)| (prev - h).abs() <= 1e-6);
        rungs.push((c, h));
        if done {
            break;
        }
    }
    match rungs.last() {
        Some(&(_, h)) => Ok(Ladder { h, rungs }),
        None => Err(Error::CTooSmall { c: 1e3 * 4f64.powi(12) }),
    }
}

/// Time the free flow spends inside Omega(H) = {a0/alpha > H}.
pub fn time_free(p: &ReducedProblem, h: f64) -> Result<f64> {
    let mut total = 0.0;
    for (a, b) in omega_set(p, h)? {
        match integrate(|z| Ok(1.0 / p.a0.eval(z)?), a, b, QUAD_TOL) {
            Ok(v) if v >= 0.0 => total += v,
            Ok(_) | Err(Error::NonConvergence { .. }) => return Ok(f64::INFINITY),
            Err(e) => return Err(e),
        }
    }
    Ok(total)
}

/// H_inf from `time_free(H) = T`.
pub fn h_infinity_free_flow(p: &ReducedProblem) -> Result<f64> {
    let (rmin, rmax) = p.ratio_range()?;
    let lo = if rmin > 0.0 { rmin * (1.0 - 1e-9) - 1e-12 } else { 1e-12 * rmax.abs().max(1.0) };
    bisect_monotone(|h| Ok(time_free(p, h)? - p.t), lo, rmax, 1e-13)
}

/// Both H_inf constructions, cross-checked; returns the free-flow value.
pub fn h_infinity(p: &ReducedProblem) -> Result<f64> {
    require_slow(p)?;
    check_nondegenerate(p)?;
    let b = h_infinity_free_flow(p)?;
    let a = h_infinity_ladder(p)?.h;
    if (a - b).abs() > 1e-4 {
        return Err(Error::CrossCheck { what: "H_inf (ladder vs free-flow time)".into(), a, b });
    }
    Ok(b)
}

fn require_slow(p: &ReducedProblem) -> Result<()> {
    let tg = p.t_gamma()?;
    if p.t < tg {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("needs T < T_Gamma (T = {}, T_Gamma = {tg})", p.t)))
    }
}

/// Superlevel set {z in [a, b] : f(z) > level} as disjoint intervals.
pub fn superlevel_set<F>(f: F, level: f64, a: f64, b: f64) -> Result<Vec<(f64, f64)>>
where
    F: Fn(f64) -> Result<f64>,
{
    let zs: Vec<f64> = grid(a, b, SCAN_POINTS).collect();
    let inside: Vec<bool> = zs.iter().map(|&z| Ok(f(z)? > level)).collect::<Result<_>>()?;
    let edge = |lo: f64, hi: f64| bisect_monotone(|z| Ok(f(z)? - level), lo, hi, 1e-10);
    let mut out = Vec::new();
    let mut start = if inside[0] { Some(a) } else { None };
    for k in 1..zs.len() {
        match (inside[k - 1], inside[k]) {
            (false, true) => start = Some(edge_or(edge(zs[k - 1], zs[k]), zs[k])),
            (true, false) => {
                let end = edge_or(edge(zs[k - 1], zs[k]), zs[k - 1]);
                out.push((start.take().expect("open interval"), end));
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, b));
    }
    Ok(out)
}

fn edge_or(r: Result<f64>, fallback: f64) -> f64 {
    r.unwrap_or(fallback)
}

/// Omega(H) = {z in [0, z_f] : a0(z)/alpha(z) > H}.
pub fn omega_set(p: &ReducedProblem, h: f64) -> Result<Vec<(f64, f64)>> {
    superlevel_set(|z| p.ratio(z), h, 0.0, p.z_f)
}

pub(crate) fn measure_complement(omega: &[(f64, f64)], z_f: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut cur = 0.0;
    for &(a, b) in omega {
        if a > cur {
            out.push((cur, a));
        }
        cur = cur.max(b);
    }
    if cur < z_f {
        out.push((cur, z_f));
    }
    out
}

fn inv_alpha_over(p: &ReducedProblem, set: &[(f64, f64)]) -> Result<f64> {
    set.iter().map(|&(a, b)| p.inv_alpha_integral(a, b)).sum()
}

/// I^* = integral of 1/alpha over Omega(H_inf).
pub fn i_star(p: &ReducedProblem) -> Result<f64> {
    let h = h_infinity(p)?;
    inv_alpha_over(p, &omega_set(p, h)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioMin {
    pub argmin: f64,
    pub min: f64,
}

pub fn ratio_min(p: &ReducedProblem) -> Result<RatioMin> {
    let (argmin, min) = grid_golden_min(|z| p.ratio(z), 0.0, p.z_f, SCAN_POINTS, 1e-10)?;
    Ok(RatioMin { argmin, min })
}

fn require_positive_drift(p: &ReducedProblem) -> Result<()> {
    let mut min = f64::INFINITY;
    for z in grid(0.0, p.z_f, SCAN_POINTS) {
        min = min.min(p.a0.eval(z)?);
    }
    if min > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveDrift { min })
    }
}

/// I_* = integral of 1/alpha + (T - T_Gamma) min a0/alpha, with the argmin.
pub fn i_substar(p: &ReducedProblem) -> Result<(f64, RatioMin)> {
    require_positive_drift(p)?;
    let tg = p.t_gamma()?;
    let m = ratio_min(p)?;
    Ok((p.inv_alpha_integral(0.0, p.z_f)? + (p.t - tg) * m.min, m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    DriftFast,
    DriftExact,
    DriftSlow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Order {
    /// eps^-2
    InvEpsSquared,
    /// eps^-1
    InvEps,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        std::fmt::Debug::fmt(self, f)
    }
}

impl std::fmt::Display for Order {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Order::InvEpsSquared => "eps^-2",
            Order::InvEps => "eps^-1",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub h_inf: Option<f64>,
    pub omega: Vec<(f64, f64)>,
    pub argmin_z: Option<f64>,
    pub min_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    /// `None` stands for +inf (the drift never reaches z_f).
    pub t_gamma: Option<f64>,
    pub regime: Regime,
    pub order: Order,
    pub constant: f64,
    pub diagnostics: Diagnostics,
}

pub const DEFAULT_TOL_T: f64 = 1e-6;

/// Time regime of the leading-order asymptotics and its constant.
pub fn classify(p: &ReducedProblem, tol_t: f64) -> Result<RegimeReport> {
    p.check_step2()?;
    let tg = p.t_gamma()?;
    let t_gamma = tg.is_finite().then_some(tg);
    if tg.is_finite() && (p.t - tg).abs() <= tol_t * p.t.max(1.0) {
        return Ok(RegimeReport {
            t_gamma,
            regime: Regime::DriftExact,
            order: Order::InvEps,
            constant: exact_regime_constant(p)?,
            diagnostics: Diagnostics::default(),
        });
    }
    if p.t > tg {
        let m = ratio_min(p)?;
        let constant = 2.0 * (p.t - tg) * m.min;
        let (isub, _) = i_substar(p)?;
        let dual = 2.0 * (isub - p.inv_alpha_integral(0.0, p.z_f)?);
        cross_check("DriftFast constant (min formula vs I_*)", constant, dual)?;
        return Ok(RegimeReport {
            t_gamma,
            regime: Regime::DriftFast,
            order: Order::InvEpsSquared,
            constant,
            diagnostics: Diagnostics { argmin_z: Some(m.argmin), min_ratio: Some(m.min), ..Default::default() },
        });
    }
    let h = h_infinity(p)?;
    let omega = omega_set(p, h)?;
    let constant = 2.0 * inv_alpha_over(p, &measure_complement(&omega, p.z_f))?;
    let dual = 2.0 * (p.inv_alpha_integral(0.0, p.z_f)? - inv_alpha_over(p, &omega)?);
    cross_check("DriftSlow constant (complement vs I^*)", constant, dual)?;
    Ok(RegimeReport {
        t_gamma,
        regime: Regime::DriftSlow,
        order: Order::InvEpsSquared,
        constant,
        diagnostics: Diagnostics { h_inf: Some(h), omega, ..Default::default() },
    })
}

/// integral of b/a0 over [0, z_f], the T = T_Gamma constant.
pub fn exact_regime_constant(p: &ReducedProblem) -> Result<f64> {
    let b = p.b.as_ref().ok_or(Error::MissingB)?;
    require_positive_drift(p)?;
    integrate(|z| Ok(b.eval(z)? / p.a0.eval(z)?), 0.0, p.z_f, QUAD_TOL)
}

fn cross_check(what: &str, a: f64, b: f64) -> Result<()> {
    if (a - b).abs() <= 1e-8 {
        Ok(())
    } else {
        Err(Error::CrossCheck { what: what.into(), a, b })
    }
}

/// Leading-order prediction constant / eps^2 or constant / eps.
pub fn predict_mc(report: &RegimeReport, eps: f64) -> f64 {
    match report.order {
        Order::InvEpsSquared => report.constant / (eps * eps),
        Order::InvEps => report.constant / eps,
    }
}
