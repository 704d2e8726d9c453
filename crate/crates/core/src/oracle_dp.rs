//! Brute-force value iteration for the reduced problem (state `z`) and
//! the auxiliary reduced problem (state `(r, z)`), used as ground truth
//! for the closed-form constants.
//!
//! The z-nodes are transported by the drift flow from one time slice to
//! the next, so coasting is exact and every transition is node to node.
//! Both oracles minimise the raw L1 cost; the epsilon prefactors are
//! applied afterwards, so the 1-D oracle scales exactly.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ode::rk4_fixed;
use crate::reduced_oc::{exact_regime_constant, ReducedProblem};

/// Cap on the vertical control `v` in `z' = a0 - alpha v` (the 2-D oracle
/// uses the same cap on the z-speed `alpha r v / 2`).
pub const V_CAP: f64 = 64.0;
const FLOW_SUBSTEPS: usize = 8;
/// Bound on the lattice size relative to the window node count.
const MAX_WIDEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DPGrid {
    pub n_t: usize,
    pub n_z: usize,
    /// r-nodes spread evenly over [0, eps] (2-D oracle only).
    pub n_r: usize,
    /// Fixed r spacing overriding `n_r`.
    pub r_cell: Option<f64>,
}

impl DPGrid {
    pub fn new(n_t: usize, n_z: usize) -> Result<DPGrid> {
        if n_t < 16 || n_z < 16 {
            return Err(Error::InvalidInput(format!("grid {n_t}x{n_z} is below the 16x16 minimum")));
        }
        Ok(DPGrid { n_t, n_z, n_r: 16, r_cell: None })
    }

    pub fn with_r(mut self, n_r: usize) -> Result<DPGrid> {
        if n_r < 2 {
            return Err(Error::InvalidInput(format!("n_r = {n_r} needs at least 2 nodes")));
        }
        self.n_r = n_r;
        Ok(self)
    }

    pub fn with_r_cell(mut self, cell: f64) -> Result<DPGrid> {
        if !(cell > 0.0) {
            return Err(Error::InvalidInput(format!("r cell {cell} must be positive")));
        }
        self.r_cell = Some(cell);
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DPSolution {
    /// Cost including the epsilon prefactor; +inf when infeasible.
    pub cost: f64,
    /// Raw minimal L1 cost on the grid.
    pub raw_cost: f64,
    pub feasible: bool,
    pub t: Vec<f64>,
    pub z: Vec<f64>,
    /// Radial path (2-D oracle only).
    pub r: Option<Vec<f64>>,
    /// Per-step vertical control as a z-speed deficit over alpha, i.e. `v`
    /// of `z' = a0 - alpha v` (for the 2-D oracle this is `r v / 2`).
    pub v: Vec<f64>,
    /// Reference node spacing at t = 0.
    pub dz: f64,
    pub dt: f64,
}

/// Nodes `pos[k][i]`: the reference grid (spacing `dz`, 0 on a node)
/// pushed forward by the drift flow to slice k. A node is active while it
/// lies in the window `[-0.1 z_f, 1.1 z_f]` (rounded out to whole cells).
struct Lattice {
    pos: Vec<Vec<f64>>,
    alpha: Vec<Vec<f64>>,
    #[cfg_attr(not(test), allow(dead_code))]
    window: (f64, f64),
    start: usize,
    target: usize,
    dz: f64,
    dt: f64,
}

fn flow(p: &ReducedProblem, z: f64, dt: f64) -> Option<f64> {
    rk4_fixed(|_, z| p.a0.eval_extended(z), 0.0, z, dt, FLOW_SUBSTEPS).ok().filter(|z| z.is_finite())
}

impl Lattice {
    fn new(p: &ReducedProblem, grid: &DPGrid) -> Result<Lattice> {
        let m = (((grid.n_z - 1) as f64) / 1.2).round().max(1.0) as i64;
        let pad = ((0.1 * m as f64).ceil() as i64).max(1);
        let node = |i: i64| p.z_f * i as f64 / m as f64;
        let dz = p.z_f / m as f64;
        let dt = p.t / grid.n_t as f64;
        let window = (node(-pad), node(m + pad));
        for i in -pad..=m + pad {
            let a = p.alpha.eval_extended(node(i))?;
            if !(a > 0.0) {
                return Err(Error::InvalidInput(format!("alpha({}) = {a} is not positive on the DP grid", node(i))));
            }
        }

        // Reference nodes whose forward orbit can be inside the window:
        // pull the window ends back along the flow.
        let limit = MAX_WIDEN as f64 * (window.1 - window.0);
        let (mut lo, mut hi) = window;
        let (mut zl, mut zh) = (Some(window.0), Some(window.1));
        for _ in 0..grid.n_t {
            zl = zl.and_then(|z| flow(p, z, -dt)).filter(|z| (z - window.0).abs() <= limit);
            zh = zh.and_then(|z| flow(p, z, -dt)).filter(|z| (z - window.1).abs() <= limit);
            lo = lo.min(zl.unwrap_or(lo));
            hi = hi.max(zh.unwrap_or(hi));
        }
        let i_lo = (lo / dz - 1e-9).floor() as i64;
        let i_hi = (hi / dz + 1e-9).ceil() as i64;
        let xi: Vec<f64> = (i_lo..=i_hi).map(node).collect();

        let orbits: Vec<Vec<f64>> = xi
            .par_iter()
            .map(|&x| {
                let mut out = Vec::with_capacity(grid.n_t + 1);
                let mut z = Some(x);
                out.push(x);
                for _ in 0..grid.n_t {
                    z = z.and_then(|z| flow(p, z, dt));
                    out.push(z.unwrap_or(f64::NAN));
                }
                out
            })
            .collect();
        let pos: Vec<Vec<f64>> = (0..=grid.n_t).map(|k| orbits.iter().map(|o| o[k]).collect()).collect();
        let slack = 1e-9 * dz;
        let inside = |z: f64| z >= window.0 - slack && z <= window.1 + slack;
        let alpha = pos
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&z| {
                        if !inside(z) {
                            return Ok(f64::NAN);
                        }
                        let a = p.alpha.eval_extended(z)?;
                        if !(a > 0.0) {
                            return Err(Error::InvalidInput(format!("alpha({z}) = {a} is not positive on the DP grid")));
                        }
                        Ok(a)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let last = &pos[grid.n_t];
        let target = (0..last.len())
            .filter(|&i| inside(last[i]))
            .min_by(|&a, &b| (last[a] - p.z_f).abs().total_cmp(&(last[b] - p.z_f).abs()))
            .ok_or_else(|| Error::Infeasible("no lattice node ends inside the window".into()))?;
        Ok(Lattice { pos, alpha, window, start: (-i_lo) as usize, target, dz, dt })
    }

    fn len(&self) -> usize {
        self.pos[0].len()
    }

    fn active(&self, k: usize, i: usize) -> bool {
        !self.alpha[k][i].is_nan()
    }

    /// Index range of slice-(k+1) nodes within z-distance `reach` of the
    /// coast image of node i.
    fn stencil(&self, k: usize, i: usize, reach: f64) -> (usize, usize) {
        let row = &self.pos[k + 1];
        let c = row[i];
        let (mut lo, mut hi) = (i, i);
        while lo > 0 && row[lo - 1] >= c - reach {
            lo -= 1;
        }
        while hi + 1 < row.len() && row[hi + 1] <= c + reach {
            hi += 1;
        }
        (lo, hi)
    }
}

/// Minimal `integral |v| dt` of the reduced problem on the grid, scaled by
/// 2/eps^2.
pub fn rmc_dp(p: &ReducedProblem, eps: f64, grid: &DPGrid) -> Result<DPSolution> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps = {eps} must be positive")));
    }
    let lat = Lattice::new(p, grid)?;
    let n = lat.len();
    let mut values = vec![vec![(f64::INFINITY, 0.0); n]; grid.n_t + 1];
    values[grid.n_t][lat.target] = (0.0, 0.0);
    for k in (0..grid.n_t).rev() {
        let (head, tail) = values.split_at_mut(k + 1);
        let next = &tail[0];
        head[k].par_iter_mut().enumerate().for_each(|(i, out)| {
            let (v, _) = best_1d(&lat, next, k, i);
            *out = v;
        });
    }
    let raw = values[0][lat.start].0;
    if !raw.is_finite() {
        return Ok(infeasible(&lat));
    }
    let mut i = lat.start;
    let (mut t, mut z, mut v) = (vec![0.0], vec![lat.pos[0][i]], Vec::new());
    for k in 0..grid.n_t {
        let j = best_1d(&lat, &values[k + 1], k, i).1;
        v.push((lat.pos[k + 1][i] - lat.pos[k + 1][j]) / (lat.alpha[k][i] * lat.dt));
        i = j;
        t.push(lat.dt * (k + 1) as f64);
        z.push(lat.pos[k + 1][i]);
    }
    Ok(DPSolution {
        cost: 2.0 / (eps * eps) * raw,
        raw_cost: raw,
        feasible: true,
        t,
        z,
        r: None,
        v,
        dz: lat.dz,
        dt: lat.dt,
    })
}

/// Relative tolerance under which two path costs count as equal.
const TIE: f64 = 1e-12;

/// Best (cost, downward travel) from node i of slice k and the node it
/// moves to. Equal-cost moves are ranked by total downward z travel, so
/// among the many optimal L1 paths the oracle returns a monotone one.
fn best_1d(lat: &Lattice, next: &[(f64, f64)], k: usize, i: usize) -> ((f64, f64), usize) {
    if !lat.active(k, i) {
        return ((f64::INFINITY, 0.0), i);
    }
    let al = lat.alpha[k][i];
    let (lo, hi) = lat.stencil(k, i, al * V_CAP * lat.dt);
    let (z0, c) = (lat.pos[k][i], lat.pos[k + 1][i]);
    let down = |j: usize| (z0 - lat.pos[k + 1][j]).max(0.0);
    let mut best = ((next[i].0, next[i].1 + down(i)), i);
    for j in lo..=hi {
        let cand = ((lat.pos[k + 1][j] - c).abs() / al + next[j].0, next[j].1 + down(j));
        if better(cand, best.0) {
            best = (cand, j);
        }
    }
    best
}

fn better(a: (f64, f64), b: (f64, f64)) -> bool {
    if !b.0.is_finite() {
        return a.0 < b.0;
    }
    let tie = TIE * (1.0 + b.0.abs());
    a.0 < b.0 - tie || (a.0 <= b.0 + tie && a.1 < b.1)
}

fn infeasible(lat: &Lattice) -> DPSolution {
    DPSolution {
        cost: f64::INFINITY,
        raw_cost: f64::INFINITY,
        feasible: false,
        t: vec![],
        z: vec![],
        r: None,
        v: vec![],
        dz: lat.dz,
        dt: lat.dt,
    }
}

/// r-nodes for the auxiliary problem.
fn r_nodes(eps: f64, grid: &DPGrid) -> Vec<f64> {
    match grid.r_cell {
        Some(cell) => {
            let n = (eps / cell + 1e-12).floor() as usize;
            (0..=n).map(|l| l as f64 * cell).collect()
        }
        None => (0..grid.n_r).map(|l| eps * l as f64 / (grid.n_r - 1) as f64).collect(),
    }
}

/// Bracketing r-interval of `x`: `(a, x)` with `r[a] <= x < r[a + 1]`, or
/// `a = last` when x is at or beyond the top node.
fn r_slot(r: &[f64], x: f64) -> usize {
    let last = r.len() - 1;
    if x >= r[last] {
        last
    } else {
        r.partition_point(|&v| v <= x).saturating_sub(1)
    }
}

/// min over r-nodes l of |r[l] - x| + d[l], where `d` already holds the
/// node-wise distance transform and `a = r_slot(r, x)`.
fn dt_at(r: &[f64], d: &[f64], x: f64, a: usize) -> f64 {
    if a == r.len() - 1 {
        return d[a] + (x - r[a]);
    }
    if x < r[0] {
        return d[0] + (r[0] - x);
    }
    (d[a] + (x - r[a])).min(d[a + 1] + (r[a + 1] - x))
}

/// Auxiliary reduced problem in `(r, z)` with `0 <= r <= eps`:
/// `r' = b(z) [if fold_b] + w`, `z' = a0(z) - alpha(z) (r/2) v`, cost
/// `integral |w| + |v| dt`, `r = 0` at both ends. Returns the raw cost
/// divided by eps.
pub fn armc_dp(p: &ReducedProblem, eps: f64, grid: &DPGrid, fold_b: bool) -> Result<DPSolution> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps = {eps} must be positive")));
    }
    let lat = Lattice::new(p, grid)?;
    let b: Vec<Vec<f64>> = if fold_b {
        let bf = p.b.as_ref().ok_or(Error::MissingB)?;
        lat.pos
            .iter()
            .enumerate()
            .map(|(k, row)| {
                row.iter()
                    .enumerate()
                    .map(|(i, &z)| if lat.active(k, i) { bf.eval_extended(z) } else { Ok(0.0) })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?
    } else {
        vec![vec![0.0; lat.len()]; grid.n_t + 1]
    };
    let r = r_nodes(eps, grid);
    let (nr, nz) = (r.len(), lat.len());
    let mut values = vec![vec![f64::INFINITY; nr * nz]; grid.n_t + 1];
    values[grid.n_t][lat.target] = 0.0;
    for k in (0..grid.n_t).rev() {
        let d = distance_transform(&r, &values[k + 1], nz);
        let (head, _) = values.split_at_mut(k + 1);
        head[k].par_chunks_mut(nz).enumerate().for_each(|(l, row)| {
            for (i, out) in row.iter_mut().enumerate() {
                *out = best_2d(&lat, &r, &d, &b[k], k, l, i);
            }
        });
    }
    let raw = values[0][lat.start];
    if !raw.is_finite() {
        return Ok(infeasible(&lat));
    }

    // Forward re-minimisation over (l', j) pairs.
    let (mut l, mut i) = (0usize, lat.start);
    let (mut ts, mut rs, mut zs, mut vs) = (vec![0.0], vec![0.0], vec![lat.pos[0][i]], Vec::new());
    for k in 0..grid.n_t {
        let next = &values[k + 1];
        let x = r[l] + b[k][i] * lat.dt;
        let c = lat.pos[k + 1][i];
        let gain = lat.alpha[k][i] * r[l] / 2.0;
        let (lo, hi) = if r[l] > 0.0 { lat.stencil(k, i, lat.alpha[k][i] * V_CAP * lat.dt) } else { (i, i) };
        let mut best = (f64::INFINITY, l, i);
        for (l2, &r2) in r.iter().enumerate() {
            for j in lo..=hi {
                let zc = if j == i { 0.0 } else { (lat.pos[k + 1][j] - c).abs() / gain };
                let v = (r2 - x).abs() + zc + next[l2 * nz + j];
                if v < best.0 {
                    best = (v, l2, j);
                }
            }
        }
        if !best.0.is_finite() {
            return Err(Error::Infeasible(format!("path reconstruction lost feasibility at step {k}")));
        }
        vs.push((c - lat.pos[k + 1][best.2]) / (lat.alpha[k][i] * lat.dt));
        (l, i) = (best.1, best.2);
        ts.push(lat.dt * (k + 1) as f64);
        rs.push(r[l]);
        zs.push(lat.pos[k + 1][i]);
    }
    Ok(DPSolution {
        cost: raw / eps,
        raw_cost: raw,
        feasible: true,
        t: ts,
        z: zs,
        r: Some(rs),
        v: vs,
        dz: lat.dz,
        dt: lat.dt,
    })
}

/// Column-wise (fixed z-node) L1 distance transform over the r-nodes;
/// layout `[j * nr + l]`.
fn distance_transform(r: &[f64], v: &[f64], nz: usize) -> Vec<f64> {
    let nr = r.len();
    let mut d = vec![f64::INFINITY; nr * nz];
    d.par_chunks_mut(nr).enumerate().for_each(|(j, col)| {
        for l in 0..nr {
            col[l] = v[l * nz + j];
        }
        for l in 1..nr {
            col[l] = col[l].min(col[l - 1] + (r[l] - r[l - 1]));
        }
        for l in (0..nr - 1).rev() {
            col[l] = col[l].min(col[l + 1] + (r[l + 1] - r[l]));
        }
    });
    d
}

fn best_2d(lat: &Lattice, r: &[f64], d: &[f64], b: &[f64], k: usize, l: usize, i: usize) -> f64 {
    if !lat.active(k, i) {
        return f64::INFINITY;
    }
    let nr = r.len();
    let x = r[l] + b[i] * lat.dt;
    let a = r_slot(r, x);
    let col = |j: usize| dt_at(r, &d[j * nr..(j + 1) * nr], x, a);
    let mut best = col(i);
    if r[l] > 0.0 {
        let al = lat.alpha[k][i];
        let gain = al * r[l] / 2.0;
        let (lo, hi) = lat.stencil(k, i, al * V_CAP * lat.dt);
        let c = lat.pos[k + 1][i];
        for j in lo..=hi {
            let v = (lat.pos[k + 1][j] - c).abs() / gain + col(j);
            if v < best {
                best = v;
            }
        }
    }
    best
}

/// integral of b/a0 over [0, z_f]: the T = T_Gamma cost, in closed form
/// up to quadrature.
pub fn exact_cost_drift_exact(p: &ReducedProblem) -> Result<f64> {
    exact_regime_constant(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StructureReport {
    /// Largest downward z step, in reference cells.
    pub max_down_cells: f64,
    /// Share of the control mass with the wrong sign for the regime.
    pub wrong_sign_fraction: f64,
    pub control_mass: f64,
}

/// Monotonicity of z and sign of the control along a DP path: `v <= 0`
/// (speeding up) when T < T_Gamma, `v >= 0` when T > T_Gamma, up to two
/// grid-reconstruction units `2 dz / (dt alpha)`.
pub fn structure_check(sol: &DPSolution, p: &ReducedProblem) -> Result<StructureReport> {
    if !sol.feasible {
        return Err(Error::Infeasible("structure check needs a feasible solution".into()));
    }
    let tg = p.t_gamma()?;
    let mut max_down = 0.0f64;
    let (mut mass, mut wrong) = (0.0, 0.0);
    for k in 0..sol.v.len() {
        max_down = max_down.max((sol.z[k] - sol.z[k + 1]) / sol.dz);
        let v = sol.v[k];
        let tol = 2.0 * sol.dz / (sol.dt * p.alpha.eval_extended(sol.z[k])?);
        let m = v.abs() * sol.dt;
        mass += m;
        let bad = if p.t < tg {
            v > tol
        } else if p.t > tg {
            v < -tol
        } else {
            v.abs() > tol
        };
        if bad {
            wrong += m;
        }
    }
    Ok(StructureReport {
        max_down_cells: max_down,
        wrong_sign_fraction: if mass > 0.0 { wrong / mass } else { 0.0 },
        control_mass: mass,
    })
}

/// `(t, z, v)` rows of a solution path, with `v` on the step that starts
/// at `t` (empty on the last row).
pub fn path_rows(sol: &DPSolution) -> Vec<(f64, f64, Option<f64>)> {
    (0..sol.t.len()).map(|k| (sol.t[k], sol.z[k], sol.v.get(k).copied())).collect()
}
