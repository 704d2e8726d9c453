use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson quadrature of `g` over `[a, b]`.
///
/// Subintervals are halved until the Richardson estimate is below their
/// share of `tol`; exceeding the depth limit is reported as
/// non-convergence, which in practice flags an integrable singularity or a
/// pole.
pub fn integrate<F>(mut g: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(a <= b) {
        return Err(Error::InvalidInput(format!("integration bounds a = {a} > b = {b}")));
    }
    if a == b {
        return Ok(0.0);
    }
    let mut eval = |z: f64| -> Result<f64> {
        let v = g(z)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonConvergence { a: z, b: z })
        }
    };
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (eval(a)?, eval(m)?, eval(b)?);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(&mut eval, a, b, fa, fm, fb, whole, tol.max(1e-300), MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson<F>(g: &mut F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (g(lm)?, g(rm)?);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    // The relative floor keeps round-off from masquerading as non-convergence.
    if delta.abs() <= 15.0 * tol || delta.abs() <= 1e-14 * (left + right).abs() {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 || m <= a || m >= b {
        return Err(Error::NonConvergence { a, b });
    }
    Ok(simpson(g, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + simpson(g, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

/// Bisection for a sign change of `f` on `[a, b]`.
///
/// Returns the midpoint of the final bracket once it is narrower than
/// `tol`, or an endpoint / midpoint where `f` is exactly zero.
pub fn bisect_monotone<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let mut flo = f(lo)?;
    let fhi = f(hi)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return Err(Error::InvalidBracket { a: lo, b: hi, fa: flo, fb: fhi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Golden-section minimisation of a unimodal `f` on `[a, b]`.
pub fn golden_min<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2)?;
        }
        if x1 >= x2 {
            break;
        }
    }
    let mut best = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    for x in [lo, hi] {
        let fx = f(x)?;
        if fx < best.1 {
            best = (x, fx);
        }
    }
    Ok(best)
}

/// Minimum of `f` over `[a, b]`: grid scan with `n` points, then golden
/// section on the cell pair around the best sample.
pub fn grid_golden_min<F>(mut f: F, a: f64, b: f64, n: usize, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let h = (b - a) / (n - 1) as f64;
    let mut best = (a, f(a)?);
    let mut best_k = 0;
    for k in 1..n {
        let x = if k == n - 1 { b } else { a + h * k as f64 };
        let v = f(x)?;
        if v < best.1 {
            best = (x, v);
            best_k = k;
        }
    }
    let lo = a + h * best_k.saturating_sub(1) as f64;
    let hi = (a + h * (best_k + 1) as f64).min(b);
    let refined = golden_min(&mut f, lo, hi, tol)?;
    Ok(if refined.1 < best.1 { refined } else { best })
}
