//! One-variable problem data: a0, alpha and |X0^Delta| along the curve.

mod numeric;
mod table;

pub use numeric::{bisect_monotone, golden_min, grid_golden_min, integrate};
pub use table::Pchip;

use crate::error::{Error, Result};
use crate::expr::{Expr, Var};

/// Default absolute tolerance for quadrature and root finding.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum Repr {
    Expression(Expr),
    Table(Pchip),
}

/// A real function of `z` on a closed interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    lo: f64,
    hi: f64,
    repr: Repr,
}

impl ScalarField {
    pub fn parse(text: &str, lo: f64, hi: f64) -> Result<ScalarField> {
        ScalarField::from_expr(Expr::parse(text, &[Var::Z])?, lo, hi)
    }

    /// Wrap an expression; it may only depend on `z`.
    pub fn from_expr(e: Expr, lo: f64, hi: f64) -> Result<ScalarField> {
        check_interval(lo, hi)?;
        if e.uses(Var::X) || e.uses(Var::Y) {
            return Err(Error::InvalidInput("scalar field expressions may only use z".into()));
        }
        Ok(ScalarField { lo, hi, repr: Repr::Expression(e) })
    }

    pub fn constant(v: f64, lo: f64, hi: f64) -> Result<ScalarField> {
        ScalarField::from_expr(Expr::Num(v), lo, hi)
    }

    /// Monotone cubic table; the domain is the knot span.
    pub fn table(knots: Vec<f64>, values: Vec<f64>) -> Result<ScalarField> {
        let p = Pchip::new(knots, values)?;
        Ok(ScalarField { lo: p.lo(), hi: p.hi(), repr: Repr::Table(p) })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn repr(&self) -> &Repr {
        &self.repr
    }

    pub fn as_expr(&self) -> Option<&Expr> {
        match &self.repr {
            Repr::Expression(e) => Some(e),
            Repr::Table(_) => None,
        }
    }

    fn slack(&self) -> f64 {
        1e-12 * (self.hi - self.lo).max(1.0)
    }

    pub fn contains(&self, z: f64) -> bool {
        z >= self.lo - self.slack() && z <= self.hi + self.slack()
    }

    pub fn eval(&self, z: f64) -> Result<f64> {
        if !self.contains(z) {
            return Err(Error::OutOfDomain { z, lo: self.lo, hi: self.hi });
        }
        self.eval_extended(z)
    }

    /// Evaluation without the domain check: expressions are evaluated as
    /// written, tables are extended by their end values. Shooting and the
    /// DP oracle probe slightly outside `[0, z_f]`.
    pub fn eval_extended(&self, z: f64) -> Result<f64> {
        match &self.repr {
            Repr::Expression(e) => e.eval_z(z),
            Repr::Table(p) => Ok(p.eval(z)),
        }
    }

    pub fn derivative(&self, z: f64) -> Result<f64> {
        if !self.contains(z) {
            return Err(Error::OutOfDomain { z, lo: self.lo, hi: self.hi });
        }
        match &self.repr {
            Repr::Expression(e) => e.diff(Var::Z).eval_z(z),
            Repr::Table(p) => {
                let h = 1e-6 * z.abs().max(1.0);
                Ok((p.eval(z + h) - p.eval(z - h)) / (2.0 * h))
            }
        }
    }

    /// Samples on `n` equally spaced points covering `[a, b]` exactly.
    pub fn sample(&self, a: f64, b: f64, n: usize) -> Result<Vec<(f64, f64)>> {
        grid(a, b, n).map(|z| Ok((z, self.eval(z)?))).collect()
    }
}

impl std::fmt::Display for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.repr {
            Repr::Expression(e) => write!(f, "{e}"),
            Repr::Table(p) => write!(f, "table[{} knots]", p.knots().len()),
        }
    }
}

fn check_interval(lo: f64, hi: f64) -> Result<()> {
    if lo.is_finite() && hi.is_finite() && lo < hi {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("invalid domain [{lo}, {hi}]")))
    }
}

/// `n` equally spaced points from `a` to `b` inclusive; the last one is
/// exactly `b`.
pub fn grid(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    let h = (b - a) / (n.max(2) - 1) as f64;
    (0..n).map(move |k| if k + 1 == n { b } else { a + h * k as f64 })
}
