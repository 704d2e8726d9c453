//! Frame-level geometry on R^3 in normal coordinates (the curve is the
//! z-axis): Lie brackets, d(omega), the skew operator A_q, the drift
//! decomposition and the Martinet invariant kappa.

use crate::error::{Error, Result};
use crate::expr::{self, Expr, Var};
use crate::ode::rk4_step3;
use crate::scalar_fields::{grid, integrate, ScalarField, DEFAULT_TOL};

pub type Point = [f64; 3];

/// Threshold on |d omega(X1, X2)| below which a point counts as Martinet.
pub const MARTINET_TOL: f64 = 1e-9;
/// Step of the finite-difference derivative along the flow of W.
pub const FLOW_STEP: f64 = 1e-3;

const XYZ: &[Var] = &[Var::X, Var::Y, Var::Z];

fn parse3(c: [&str; 3]) -> Result<[Expr; 3]> {
    Ok([Expr::parse(c[0], XYZ)?, Expr::parse(c[1], XYZ)?, Expr::parse(c[2], XYZ)?])
}

fn eval3(c: &[Expr; 3], p: Point) -> Result<[f64; 3]> {
    Ok([c[0].eval(p)?, c[1].eval(p)?, c[2].eval(p)?])
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField3 {
    pub c: [Expr; 3],
}

impl VectorField3 {
    pub fn new(c: [Expr; 3]) -> VectorField3 {
        VectorField3 { c }
    }

    pub fn parse(c: [&str; 3]) -> Result<VectorField3> {
        Ok(VectorField3 { c: parse3(c)? })
    }

    pub fn eval(&self, p: Point) -> Result<[f64; 3]> {
        eval3(&self.c, p)
    }

    /// Directional derivative X(f) = sum_j X_j d_j f.
    pub fn apply(&self, f: &Expr) -> Expr {
        Var::ALL
            .iter()
            .zip(&self.c)
            .fold(Expr::Num(0.0), |acc, (v, xj)| expr::add(acc, expr::mul(xj.clone(), f.diff(*v))))
    }

    /// Symbolic bracket [X, Y] = (DY) X - (DX) Y.
    pub fn bracket(&self, other: &VectorField3) -> VectorField3 {
        let comp = |i: usize| expr::sub(self.apply(&other.c[i]), other.apply(&self.c[i]));
        VectorField3 { c: [comp(0), comp(1), comp(2)] }
    }

    pub fn add(&self, other: &VectorField3) -> VectorField3 {
        let comp = |i: usize| expr::add(self.c[i].clone(), other.c[i].clone());
        VectorField3 { c: [comp(0), comp(1), comp(2)] }
    }

    pub fn scale(&self, f: &Expr) -> VectorField3 {
        let comp = |i: usize| expr::mul(f.clone(), self.c[i].clone());
        VectorField3 { c: [comp(0), comp(1), comp(2)] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OneForm3 {
    pub c: [Expr; 3],
}

impl OneForm3 {
    pub fn new(c: [Expr; 3]) -> OneForm3 {
        OneForm3 { c }
    }

    pub fn parse(c: [&str; 3]) -> Result<OneForm3> {
        Ok(OneForm3 { c: parse3(c)? })
    }

    /// The function omega(X).
    pub fn pair(&self, x: &VectorField3) -> Expr {
        (0..3).fold(Expr::Num(0.0), |acc, i| expr::add(acc, expr::mul(self.c[i].clone(), x.c[i].clone())))
    }

    /// The function d omega(X, Y) = X(omega(Y)) - Y(omega(X)) - omega([X, Y]).
    pub fn d(&self, x: &VectorField3, y: &VectorField3) -> Expr {
        expr::sub(
            expr::sub(x.apply(&self.pair(y)), y.apply(&self.pair(x))),
            self.pair(&x.bracket(y)),
        )
    }

    pub fn scale(&self, f: &Expr) -> OneForm3 {
        let comp = |i: usize| expr::mul(f.clone(), self.c[i].clone());
        OneForm3 { c: [comp(0), comp(1), comp(2)] }
    }
}

pub fn lie_bracket(x: &VectorField3, y: &VectorField3, p: Point) -> Result<[f64; 3]> {
    x.bracket(y).eval(p)
}

pub fn d_omega(omega: &OneForm3, x: &VectorField3, y: &VectorField3, p: Point) -> Result<f64> {
    omega.d(x, y).eval(p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3 {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub z: (f64, f64),
}

impl Box3 {
    pub fn contains(&self, p: Point) -> bool {
        let inside = |v: f64, (a, b): (f64, f64)| v >= a && v <= b;
        inside(p[0], self.x) && inside(p[1], self.y) && inside(p[2], self.z)
    }
}

/// Frame X0 (drift), X1, X2 (assumed g-orthonormal), one-form omega with
/// omega(X1) = omega(X2) = 0, curve {(0, 0, s) : s in [s0, s1]}.
#[derive(Debug, Clone, PartialEq)]
pub struct FramedProblem {
    pub x0: VectorField3,
    pub x1: VectorField3,
    pub x2: VectorField3,
    pub omega: OneForm3,
    pub s0: f64,
    pub s1: f64,
    pub bbox: Box3,
}

impl FramedProblem {
    pub fn new(
        x0: VectorField3,
        x1: VectorField3,
        x2: VectorField3,
        omega: OneForm3,
        (s0, s1): (f64, f64),
        bbox: Box3,
    ) -> Result<FramedProblem> {
        if !(s0 < s1) {
            return Err(Error::Frame(format!("curve segment [{s0}, {s1}] is empty")));
        }
        let fp = FramedProblem { x0, x1, x2, omega, s0, s1, bbox };
        let w1 = fp.omega.pair(&fp.x1);
        let w2 = fp.omega.pair(&fp.x2);
        for s in grid(s0, s1, 17) {
            let p = [0.0, 0.0, s];
            if !fp.bbox.contains(p) {
                return Err(Error::Frame(format!("curve point s = {s} outside the declared box")));
            }
            let (a, b) = (w1.eval(p)?, w2.eval(p)?);
            if a.abs() > 1e-9 || b.abs() > 1e-9 {
                return Err(Error::Frame(format!(
                    "omega does not annihilate X1, X2 at s = {s}: ({a:e}, {b:e})"
                )));
            }
        }
        Ok(fp)
    }

    /// Normal-form frame X1 = dx + (y g/2) dz, X2 = dy - (x g/2) dz with
    /// omega = dz - (y g/2) dx + (x g/2) dy, where `g` is an expression in
    /// x, y, z. Then d omega(X1, X2) = g on the curve.
    pub fn normal_form(gamma: &str, x0: [&str; 3], (s0, s1): (f64, f64), bbox: Box3) -> Result<FramedProblem> {
        let (x1, x2, omega) = normal_form_parts(gamma);
        FramedProblem::new(
            VectorField3::parse(x0)?,
            VectorField3::parse([&x1[0], &x1[1], &x1[2]])?,
            VectorField3::parse([&x2[0], &x2[1], &x2[2]])?,
            OneForm3::parse([&omega[0], &omega[1], &omega[2]])?,
            (s0, s1),
            bbox,
        )
    }

    fn check_point(&self, p: Point) -> Result<()> {
        if self.bbox.contains(p) {
            Ok(())
        } else {
            Err(Error::Frame(format!("point {p:?} outside the declared box")))
        }
    }

    /// Default extension W = dz / omega(dz).
    pub fn default_w(&self) -> VectorField3 {
        VectorField3::new([Expr::Num(0.0), Expr::Num(0.0), expr::div(Expr::Num(1.0), self.omega.c[2].clone())])
    }

    /// The Martinet indicator |d omega(X1, X2)| at `p`.
    pub fn alpha_at(&self, p: Point) -> Result<f64> {
        Ok(d_omega(&self.omega, &self.x1, &self.x2, p)?.abs())
    }
}

/// Component strings of the normal-form frame for a given `gamma`.
pub fn normal_form_parts(gamma: &str) -> ([String; 3], [String; 3], [String; 3]) {
    let g = format!("({gamma})");
    (
        ["1".into(), "0".into(), format!("y*{g}/2")],
        ["0".into(), "1".into(), format!("-x*{g}/2")],
        [format!("-y*{g}/2"), format!("x*{g}/2"), "1".into()],
    )
}

/// A_ij = d omega(X_j, X_i) at the curve point (0, 0, s).
pub fn skew_operator(fp: &FramedProblem, s: f64) -> Result<[[f64; 2]; 2]> {
    let p = [0.0, 0.0, s];
    fp.check_point(p)?;
    let xs = [&fp.x1, &fp.x2];
    let mut a = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            a[i][j] = d_omega(&fp.omega, xs[j], xs[i], p)?;
        }
    }
    Ok(a)
}

/// alpha(s) = |A_12|, the modulus of the eigenvalues of A at (0, 0, s).
pub fn alpha_curve(fp: &FramedProblem, s: f64) -> Result<f64> {
    Ok(skew_operator(fp, s)?[0][1].abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftProfile {
    pub a0: ScalarField,
    pub b: ScalarField,
}

/// Split X0 = a0 W + X0^Delta on the curve, with W = dz / omega(dz).
pub fn drift_profile(fp: &FramedProblem) -> Result<DriftProfile> {
    let on_curve = |e: &Expr| {
        e.substitute(Var::X, &Expr::Num(0.0))
            .substitute(Var::Y, &Expr::Num(0.0))
            .simplify()
    };
    for s in grid(fp.s0, fp.s1, 65) {
        let wz = fp.omega.c[2].eval([0.0, 0.0, s])?;
        if wz.abs() < 1e-12 {
            return Err(Error::NotTransverse { s });
        }
    }
    let a0 = fp.omega.pair(&fp.x0);
    let w = fp.default_w();
    let v = fp.x0.add(&w.scale(&expr::neg(a0.clone())));
    let dot = |a: &VectorField3, b: &VectorField3| {
        (0..3).fold(Expr::Num(0.0), |acc, i| expr::add(acc, expr::mul(a.c[i].clone(), b.c[i].clone())))
    };
    // Coordinates of X0^Delta in (X1, X2) from the 2x2 normal equations.
    let (g11, g12, g22) = (dot(&fp.x1, &fp.x1), dot(&fp.x1, &fp.x2), dot(&fp.x2, &fp.x2));
    let (r1, r2) = (dot(&fp.x1, &v), dot(&fp.x2, &v));
    let det = expr::sub(expr::mul(g11.clone(), g22.clone()), expr::mul(g12.clone(), g12.clone()));
    let u1 = expr::div(expr::sub(expr::mul(g22, r1.clone()), expr::mul(g12.clone(), r2.clone())), det.clone());
    let u2 = expr::div(expr::sub(expr::mul(g11, r2), expr::mul(g12, r1)), det);
    let (u1, u2) = (on_curve(&u1), on_curve(&u2));
    let b = expr::call(
        expr::Func::Sqrt,
        expr::add(expr::mul(u1.clone(), u1), expr::mul(u2.clone(), u2)),
    );
    Ok(DriftProfile {
        a0: ScalarField::from_expr(on_curve(&a0), fp.s0, fp.s1)?,
        b: ScalarField::from_expr(b.simplify(), fp.s0, fp.s1)?,
    })
}

/// Time for the vertical drift alone to carry the curve from 0 to `z_f`,
/// or +inf when a0 is not positive along the way.
pub fn time_t_gamma(a0: &ScalarField, z_f: f64) -> Result<f64> {
    if !(z_f > 0.0) {
        return Err(Error::InvalidInput(format!("z_f = {z_f} must be positive")));
    }
    for z in grid(0.0, z_f, 4096) {
        if a0.eval_extended(z)? <= 0.0 {
            return Ok(f64::INFINITY);
        }
    }
    match integrate(|z| Ok(1.0 / a0.eval_extended(z)?), 0.0, z_f, DEFAULT_TOL) {
        Ok(v) => Ok(v),
        Err(Error::NonConvergence { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

fn martinet_precondition(fp: &FramedProblem, q: Point) -> Result<()> {
    fp.check_point(q)?;
    let alpha = fp.alpha_at(q)?;
    if alpha > MARTINET_TOL {
        return Err(Error::NotMartinet { alpha });
    }
    Ok(())
}

/// kappa = |omega([W, Z])(q) - d omega(W, Z)(q)| with Z = [X1, X2].
pub fn kappa_bracket(fp: &FramedProblem, q: Point) -> Result<f64> {
    kappa_bracket_with(fp, q, &fp.default_w())
}

pub fn kappa_bracket_with(fp: &FramedProblem, q: Point, w: &VectorField3) -> Result<f64> {
    martinet_precondition(fp, q)?;
    let z = fp.x1.bracket(&fp.x2);
    let a = fp.omega.pair(&w.bracket(&z)).eval(q)?;
    let b = fp.omega.d(w, &z).eval(q)?;
    Ok((a - b).abs())
}

/// kappa as |d/dt omega([X1, X2])(e^{tW} q)| at t = 0, by a fourth-order
/// central difference over the RK4 flow of W.
pub fn kappa_flow(fp: &FramedProblem, q: Point) -> Result<f64> {
    kappa_flow_with(fp, q, &fp.default_w())
}

pub fn kappa_flow_with(fp: &FramedProblem, q: Point, w: &VectorField3) -> Result<f64> {
    martinet_precondition(fp, q)?;
    let phi = fp.omega.pair(&fp.x1.bracket(&fp.x2)).simplify();
    let wc = w.c.clone();
    let mut rhs = |p: Point| eval3(&wc, p);
    let h = FLOW_STEP;
    let fwd1 = rk4_step3(&mut rhs, q, h)?;
    let fwd2 = rk4_step3(&mut rhs, fwd1, h)?;
    let bwd1 = rk4_step3(&mut rhs, q, -h)?;
    let bwd2 = rk4_step3(&mut rhs, bwd1, -h)?;
    let f = |p: Point| phi.eval(p);
    let d = (-f(fwd2)? + 8.0 * f(fwd1)? - 8.0 * f(bwd1)? + f(bwd2)?) / (12.0 * h);
    Ok(d.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const BOX: Box3 = Box3 { x: (-1.0, 1.0), y: (-1.0, 1.0), z: (-1.0, 2.0) };

    fn vf(c: [&str; 3]) -> VectorField3 {
        VectorField3::parse(c).unwrap()
    }

    fn frame(gamma: &str) -> FramedProblem {
        FramedProblem::normal_form(gamma, ["0", "0", "1"], (-0.5, 0.5), BOX).unwrap()
    }

    #[test]
    fn bracket_examples() {
        let x = vf(["1", "0", "0"]);
        let y = vf(["0", "1", "x^2/2"]);
        assert_eq!(lie_bracket(&x, &y, [0.0; 3]).unwrap(), [0.0, 0.0, 0.0]);
        assert_eq!(lie_bracket(&x, &y, [1.0, 0.0, 0.0]).unwrap(), [0.0, 0.0, 1.0]);
        let z = vf(["y*z", "sin(x)", "x*y"]);
        assert_eq!(lie_bracket(&z, &z, [0.3, 0.2, 0.1]).unwrap(), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn d_omega_examples() {
        let dz = OneForm3::parse(["0", "0", "1"]).unwrap();
        let x = vf(["1", "2", "0"]);
        let y = vf(["0", "1", "3"]);
        let p = [0.4, -0.1, 0.2];
        let br = lie_bracket(&x, &y, p).unwrap();
        assert_eq!(d_omega(&dz, &x, &y, p).unwrap(), -br[2]);
        let w = OneForm3::parse(["0", "-x^2/2", "1"]).unwrap();
        let (ex, ey) = (vf(["1", "0", "0"]), vf(["0", "1", "0"]));
        assert_eq!(d_omega(&w, &ex, &ey, [1.0, 0.0, 0.0]).unwrap(), -1.0);
        assert_eq!(d_omega(&w, &x, &x, p).unwrap(), 0.0);
    }

    #[test]
    fn constant_gamma_gives_constant_alpha() {
        let fp = frame("2.5");
        for s in [-0.5, 0.0, 0.3] {
            let a = skew_operator(&fp, s).unwrap();
            // A_12 = d omega(X2, X1) = omega([X1, X2]) = -gamma here.
            assert_relative_eq!(a[0][1], -2.5, epsilon = 1e-12);
            assert_relative_eq!(a[1][0], 2.5, epsilon = 1e-12);
            assert_eq!(alpha_curve(&fp, s).unwrap(), 2.5);
        }
    }

    #[test]
    fn martinet_point_has_zero_operator() {
        let fp = frame("z + x");
        assert_eq!(skew_operator(&fp, 0.0).unwrap(), [[0.0, 0.0], [0.0, 0.0]]);
    }

    #[test]
    fn rejects_non_annihilating_form() {
        let r = FramedProblem::new(
            vf(["0", "0", "1"]),
            vf(["1", "0", "1"]),
            vf(["0", "1", "0"]),
            OneForm3::parse(["0", "0", "1"]).unwrap(),
            (0.0, 1.0),
            BOX,
        );
        assert!(matches!(r, Err(Error::Frame(_))));
    }

    fn flat_frame(x0: [&str; 3]) -> FramedProblem {
        FramedProblem::new(
            vf(x0),
            vf(["1", "0", "0"]),
            vf(["0", "1", "0"]),
            OneForm3::parse(["0", "0", "1"]).unwrap(),
            (0.0, 1.0),
            BOX,
        )
        .unwrap()
    }

    #[test]
    fn drift_profile_examples() {
        for (x0, a, b) in [
            (["0", "0", "1"], 1.0, 0.0),
            (["1", "0", "1"], 1.0, 1.0),
            (["3", "4", "2"], 2.0, 5.0),
        ] {
            let d = drift_profile(&flat_frame(x0)).unwrap();
            for s in [0.0, 0.5, 1.0] {
                assert_eq!(d.a0.eval(s).unwrap(), a);
                assert_relative_eq!(d.b.eval(s).unwrap(), b, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn drift_profile_in_normal_form() {
        // X0 = (1+z) W + z X1 on the curve, with a non-trivial gamma.
        let fp = FramedProblem::normal_form("1 + x*z", ["z", "0", "1+z"], (0.0, 1.0), BOX).unwrap();
        let d = drift_profile(&fp).unwrap();
        for s in [0.0, 0.25, 1.0] {
            assert_relative_eq!(d.a0.eval(s).unwrap(), 1.0 + s, epsilon = 1e-14);
            assert_relative_eq!(d.b.eval(s).unwrap(), s, epsilon = 1e-14);
        }
    }

    #[test]
    fn drift_profile_rejects_tangent_omega() {
        let fp = FramedProblem::new(
            vf(["0", "0", "1"]),
            vf(["1", "0", "0"]),
            vf(["0", "1", "0"]),
            OneForm3::parse(["0", "0", "z"]).unwrap(),
            (0.0, 1.0),
            BOX,
        )
        .unwrap();
        assert!(matches!(drift_profile(&fp), Err(Error::NotTransverse { .. })));
    }

    #[test]
    fn t_gamma_examples() {
        assert_relative_eq!(time_t_gamma(&ScalarField::constant(1.0, 0.0, 2.0).unwrap(), 2.0).unwrap(), 2.0);
        let a0 = ScalarField::parse("2-z", 0.0, 1.0).unwrap();
        assert_relative_eq!(time_t_gamma(&a0, 1.0).unwrap(), std::f64::consts::LN_2, epsilon = 1e-10);
        let a0 = ScalarField::parse("z-0.5", 0.0, 1.0).unwrap();
        assert_eq!(time_t_gamma(&a0, 1.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn kappa_examples() {
        for (g, k) in [("z + x", 1.0), ("3*z", 3.0)] {
            let fp = frame(g);
            assert_relative_eq!(kappa_bracket(&fp, [0.0; 3]).unwrap(), k, epsilon = 1e-12);
            assert_relative_eq!(kappa_flow(&fp, [0.0; 3]).unwrap(), k, epsilon = 1e-6);
        }
        let fp = frame("z + x");
        assert!(matches!(kappa_bracket(&fp, [0.0, 0.0, 0.1]), Err(Error::NotMartinet { .. })));
        assert!(matches!(kappa_flow(&fp, [0.0, 0.0, 0.1]), Err(Error::NotMartinet { .. })));
    }

    #[test]
    fn taylor_structure_of_alpha() {
        let fp = frame("2*z + x - 0.7*y + z^2");
        for k in 2..=5 {
            for sign in [1.0, -1.0] {
                let z = sign * 10f64.powi(-k);
                let ratio = alpha_curve(&fp, z).unwrap() / z.abs();
                assert!((ratio - 2.0).abs() <= 2.0 * 10f64.powi(-k + 1), "k = {k}: {ratio}");
            }
        }
    }

    proptest! {
        #[test]
        fn skew_symmetry_on_curve(s in -0.5f64..0.5) {
            let fp = FramedProblem::normal_form(
                "1 + z^2 + sin(x + z) + y",
                ["0.3*x", "y*z", "1 + z"],
                (-0.5, 0.5),
                BOX,
            ).unwrap();
            let a = skew_operator(&fp, s).unwrap();
            for i in 0..2 { for j in 0..2 {
                prop_assert!((a[i][j] + a[j][i]).abs() <= 1e-9);
            }}
            let g = (1.0 + s * s + s.sin()).abs();
            prop_assert!((alpha_curve(&fp, s).unwrap() - g).abs() <= 1e-8);
        }
    }
}
