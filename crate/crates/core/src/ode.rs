//! Small explicit integrators: classical RK4 and an embedded
//! Dormand-Prince 5(4) step, both for scalar autonomous/non-autonomous
//! right-hand sides, plus RK4 for vector fields on R^3.

use crate::error::Result;

pub fn rk4_step<F>(f: &mut F, t: f64, y: f64, h: f64) -> Result<f64>
where
    F: FnMut(f64, f64) -> Result<f64>,
{
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * h, y + 0.5 * h * k1)?;
    let k3 = f(t + 0.5 * h, y + 0.5 * h * k2)?;
    let k4 = f(t + h, y + h * k3)?;
    Ok(y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

/// Integrate from `t0` to `t1` with `n` equal RK4 steps.
pub fn rk4_fixed<F>(mut f: F, t0: f64, y0: f64, t1: f64, n: usize) -> Result<f64>
where
    F: FnMut(f64, f64) -> Result<f64>,
{
    let h = (t1 - t0) / n as f64;
    let mut y = y0;
    for k in 0..n {
        y = rk4_step(&mut f, t0 + h * k as f64, y, h)?;
    }
    Ok(y)
}

pub fn rk4_step3<F>(f: &mut F, p: [f64; 3], h: f64) -> Result<[f64; 3]>
where
    F: FnMut([f64; 3]) -> Result<[f64; 3]>,
{
    let axpy = |a: [f64; 3], s: f64, b: [f64; 3]| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
    let k1 = f(p)?;
    let k2 = f(axpy(p, 0.5 * h, k1))?;
    let k3 = f(axpy(p, 0.5 * h, k2))?;
    let k4 = f(axpy(p, h, k3))?;
    let mut out = p;
    for i in 0..3 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand-Prince step on an `N`-dimensional state: returns the
/// 5th-order value and the embedded error estimate per component.
pub fn dopri5_step<const N: usize, F>(f: &mut F, t: f64, y: [f64; N], h: f64) -> Result<([f64; N], [f64; N])>
where
    F: FnMut(f64, [f64; N]) -> Result<[f64; N]>,
{
    let mut k = [[0.0; N]; 7];
    for s in 0..7 {
        let mut ys = y;
        for j in 0..s {
            for i in 0..N {
                ys[i] += h * A[s][j] * k[j][i];
            }
        }
        k[s] = f(t + C[s] * h, ys)?;
    }
    let mut y5 = y;
    let mut err = [0.0; N];
    for s in 0..7 {
        for i in 0..N {
            y5[i] += h * B5[s] * k[s][i];
            err[i] += h * (B5[s] - B4[s]) * k[s][i];
        }
    }
    Ok((y5, err.map(f64::abs)))
}

/// Step-size controller shared by the adaptive integrators.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-12, atol: 1e-12 }
    }
}

impl Tolerances {
    /// Error ratio (<= 1 accepts) and the suggested next step.
    pub fn assess(&self, y: f64, y_new: f64, err: f64, h: f64) -> (f64, f64) {
        let scale = self.atol + self.rtol * y.abs().max(y_new.abs());
        let ratio = err / scale;
        let factor = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
        (ratio, h * factor)
    }
}
