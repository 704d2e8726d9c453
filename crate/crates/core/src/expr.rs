//! Expression trees in up to three variables: parsing, evaluation,
//! symbolic differentiation and a fully parenthesised printer.
//!
//! Grammar (ASCII, case-sensitive):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | base ('^' factor)?
//! base   := number | 'pi' | var | func '(' expr ')' | '(' expr ')'
//! func   := sin | cos | exp | log | sqrt | abs
//! ```
//!
//! Unary minus is accepted on top of the documented grammar so that the
//! printer can round-trip negative literals.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    Y,
    Z,
}

impl Var {
    pub const ALL: [Var; 3] = [Var::X, Var::Y, Var::Z];

    fn index(self) -> usize {
        match self {
            Var::X => 0,
            Var::Y => 1,
            Var::Z => 2,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::Z => "z",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

fn checked(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::EvalDomain(format!("{what} produced {v}")))
    }
}

impl Expr {
    /// Parse `text` allowing only the listed variables.
    pub fn parse(text: &str, vars: &[Var]) -> Result<Expr> {
        let mut p = Parser { src: text.as_bytes(), pos: 0, vars };
        p.skip_ws();
        if p.pos >= p.src.len() {
            return Err(Error::Syntax { offset: 0, msg: "empty expression".into() });
        }
        let e = p.expr()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(Error::Syntax {
                offset: p.pos,
                msg: format!("unexpected `{}`", p.src[p.pos] as char),
            });
        }
        Ok(e)
    }

    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    /// Evaluate at `p = [x, y, z]`.
    pub fn eval(&self, p: [f64; 3]) -> Result<f64> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Pi => Ok(std::f64::consts::PI),
            Expr::Var(v) => Ok(p[v.index()]),
            Expr::Neg(a) => Ok(-a.eval(p)?),
            Expr::Add(a, b) => checked(a.eval(p)? + b.eval(p)?, "addition"),
            Expr::Sub(a, b) => checked(a.eval(p)? - b.eval(p)?, "subtraction"),
            Expr::Mul(a, b) => checked(a.eval(p)? * b.eval(p)?, "multiplication"),
            Expr::Div(a, b) => {
                let d = b.eval(p)?;
                if d == 0.0 {
                    return Err(Error::EvalDomain("division by zero".into()));
                }
                checked(a.eval(p)? / d, "division")
            }
            Expr::Pow(a, b) => {
                let base = a.eval(p)?;
                let ex = b.eval(p)?;
                checked(base.powf(ex), "power")
            }
            Expr::Call(f, a) => {
                let x = a.eval(p)?;
                match f {
                    Func::Sin => Ok(x.sin()),
                    Func::Cos => Ok(x.cos()),
                    Func::Exp => checked(x.exp(), "exp"),
                    Func::Log => {
                        if x <= 0.0 {
                            Err(Error::EvalDomain(format!("log of non-positive value {x}")))
                        } else {
                            Ok(x.ln())
                        }
                    }
                    Func::Sqrt => {
                        if x < 0.0 {
                            Err(Error::EvalDomain(format!("sqrt of negative value {x}")))
                        } else {
                            Ok(x.sqrt())
                        }
                    }
                    Func::Abs => Ok(x.abs()),
                }
            }
        }
    }

    pub fn eval_z(&self, z: f64) -> Result<f64> {
        self.eval([0.0, 0.0, z])
    }

    pub fn is_const(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Pi => true,
            Expr::Var(_) => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.is_const(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.is_const() && b.is_const()
            }
        }
    }

    pub fn uses(&self, v: Var) -> bool {
        match self {
            Expr::Num(_) | Expr::Pi => false,
            Expr::Var(w) => *w == v,
            Expr::Neg(a) | Expr::Call(_, a) => a.uses(v),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.uses(v) || b.uses(v)
            }
        }
    }

    fn as_num(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            _ => None,
        }
    }

    /// Replace every occurrence of `v` by `by`.
    pub fn substitute(&self, v: Var, by: &Expr) -> Expr {
        let s = |e: &Expr| Box::new(e.substitute(v, by));
        match self {
            Expr::Var(w) if *w == v => by.clone(),
            Expr::Num(_) | Expr::Pi | Expr::Var(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(s(a)),
            Expr::Call(f, a) => Expr::Call(*f, s(a)),
            Expr::Add(a, b) => Expr::Add(s(a), s(b)),
            Expr::Sub(a, b) => Expr::Sub(s(a), s(b)),
            Expr::Mul(a, b) => Expr::Mul(s(a), s(b)),
            Expr::Div(a, b) => Expr::Div(s(a), s(b)),
            Expr::Pow(a, b) => Expr::Pow(s(a), s(b)),
        }
    }

    /// Constant folding through the smart constructors. Note that `0*f`
    /// folds to 0 even where `f` would raise a domain error.
    pub fn simplify(&self) -> Expr {
        match self {
            Expr::Num(_) | Expr::Pi | Expr::Var(_) => self.clone(),
            Expr::Neg(a) => neg(a.simplify()),
            Expr::Add(a, b) => add(a.simplify(), b.simplify()),
            Expr::Sub(a, b) => sub(a.simplify(), b.simplify()),
            Expr::Mul(a, b) => mul(a.simplify(), b.simplify()),
            Expr::Div(a, b) => div(a.simplify(), b.simplify()),
            Expr::Pow(a, b) => pow(a.simplify(), b.simplify()),
            Expr::Call(f, a) => {
                let inner = a.simplify();
                match inner {
                    Expr::Num(_) => match Expr::Call(*f, Box::new(inner.clone())).eval([0.0; 3]) {
                        Ok(v) => Expr::Num(v),
                        Err(_) => call(*f, inner),
                    },
                    _ => call(*f, inner),
                }
            }
        }
    }

    /// Symbolic partial derivative with respect to `v`.
    pub fn diff(&self, v: Var) -> Expr {
        match self {
            Expr::Num(_) | Expr::Pi => Expr::Num(0.0),
            Expr::Var(w) => Expr::Num(if *w == v { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.diff(v)),
            Expr::Add(a, b) => add(a.diff(v), b.diff(v)),
            Expr::Sub(a, b) => sub(a.diff(v), b.diff(v)),
            Expr::Mul(a, b) => add(mul(a.diff(v), (**b).clone()), mul((**a).clone(), b.diff(v))),
            Expr::Div(a, b) => {
                let num = sub(mul(a.diff(v), (**b).clone()), mul((**a).clone(), b.diff(v)));
                div(num, pow((**b).clone(), Expr::Num(2.0)))
            }
            Expr::Pow(a, b) => {
                let da = a.diff(v);
                if !b.uses(v) {
                    // d(f^g) = g f^(g-1) f' for g free of v
                    let g = (**b).clone();
                    let gm1 = match g.as_num() {
                        Some(n) => Expr::Num(n - 1.0),
                        None => sub(g.clone(), Expr::Num(1.0)),
                    };
                    mul(mul(g, pow((**a).clone(), gm1)), da)
                } else {
                    let db = b.diff(v);
                    let inner = add(
                        mul(db, call(Func::Log, (**a).clone())),
                        div(mul((**b).clone(), da), (**a).clone()),
                    );
                    mul(self.clone(), inner)
                }
            }
            Expr::Call(f, a) => {
                let da = a.diff(v);
                let x = (**a).clone();
                let outer = match f {
                    Func::Sin => call(Func::Cos, x),
                    Func::Cos => neg(call(Func::Sin, x)),
                    Func::Exp => call(Func::Exp, x),
                    Func::Log => div(Expr::Num(1.0), x),
                    Func::Sqrt => div(Expr::Num(0.5), call(Func::Sqrt, x)),
                    Func::Abs => div(x.clone(), call(Func::Abs, x)),
                };
                mul(outer, da)
            }
        }
    }
}

// Smart constructors with the handful of 0/1 simplifications that keep
// derivative trees from exploding.

pub fn add(a: Expr, b: Expr) -> Expr {
    match (a.as_num(), b.as_num()) {
        (Some(x), Some(y)) => Expr::Num(x + y),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (a.as_num(), b.as_num()) {
        (Some(x), Some(y)) => Expr::Num(x - y),
        (Some(x), _) if x == 0.0 => neg(b),
        (_, Some(y)) if y == 0.0 => a,
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (a.as_num(), b.as_num()) {
        (Some(x), Some(y)) => Expr::Num(x * y),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::Num(0.0),
        (Some(x), _) if x == 1.0 => b,
        (_, Some(y)) if y == 1.0 => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (a.as_num(), b.as_num()) {
        (Some(x), _) if x == 0.0 => Expr::Num(0.0),
        (_, Some(y)) if y == 1.0 => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

pub fn pow(a: Expr, b: Expr) -> Expr {
    match b.as_num() {
        Some(y) if y == 0.0 => Expr::Num(1.0),
        Some(y) if y == 1.0 => a,
        _ => Expr::Pow(Box::new(a), Box::new(b)),
    }
}

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(x) => Expr::Num(-x),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

pub fn call(f: Func, a: Expr) -> Expr {
    Expr::Call(f, Box::new(a))
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                    write!(f, "(-{:?})", -v)
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::Pi => write!(f, "pi"),
            Expr::Var(v) => write!(f, "{}", v.name()),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a}+{b})"),
            Expr::Sub(a, b) => write!(f, "({a}-{b})"),
            Expr::Mul(a, b) => write!(f, "({a}*{b})"),
            Expr::Div(a, b) => write!(f, "({a}/{b})"),
            Expr::Pow(a, b) => write!(f, "({a}^{b})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    vars: &'a [Var],
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Syntax { offset: self.pos, msg: msg.into() })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == b'+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = if c == b'*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.base()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let ex = self.factor()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(ex)));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr> {
        match self.peek() {
            None => self.err("unexpected end of input"),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return self.err("expected `)`");
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(c) => self.err(format!("unexpected `{}`", c as char)),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut n = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            self.pos = start;
            return self.err("malformed number");
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
                return self.err("malformed exponent");
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Expr::Num(v)),
            _ => {
                self.pos = start;
                self.err(format!("number `{text}` is not a finite double"))
            }
        }
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii ident");
        if name == "pi" {
            return Ok(Expr::Pi);
        }
        if let Some(v) = self.vars.iter().copied().find(|v| v.name() == name) {
            return Ok(Expr::Var(v));
        }
        if let Some(f) = Func::from_name(name) {
            if self.peek() != Some(b'(') {
                return self.err(format!("expected `(` after `{name}`"));
            }
            self.pos += 1;
            let arg = self.expr()?;
            if self.peek() != Some(b')') {
                return self.err("expected `)`");
            }
            self.pos += 1;
            return Ok(call(f, arg));
        }
        Err(Error::UnknownIdentifier { offset: start, name: name.to_string() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const XYZ: &[Var] = &[Var::X, Var::Y, Var::Z];

    fn ev(s: &str, p: [f64; 3]) -> f64 {
        Expr::parse(s, XYZ).unwrap().eval(p).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1+2*3", [0.0; 3]), 7.0);
        assert_eq!(ev("2^3^2", [0.0; 3]), 512.0);
        assert_eq!(ev("8/4/2", [0.0; 3]), 1.0);
        assert_eq!(ev("-z^2", [0.0, 0.0, 3.0]), -9.0);
        assert_eq!(ev("2*-z", [0.0, 0.0, 3.0]), -6.0);
        assert_eq!(ev("1.5e2 + .5", [0.0; 3]), 150.5);
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        assert_eq!(
            Expr::parse("1+*z", &[Var::Z]).unwrap_err(),
            Error::Syntax { offset: 2, msg: "unexpected `*`".into() }
        );
        assert!(matches!(Expr::parse("(z", &[Var::Z]), Err(Error::Syntax { offset: 2, .. })));
        assert!(matches!(Expr::parse("z)", &[Var::Z]), Err(Error::Syntax { offset: 1, .. })));
        assert!(matches!(Expr::parse("   ", &[Var::Z]), Err(Error::Syntax { .. })));
        assert!(matches!(Expr::parse("sin z", &[Var::Z]), Err(Error::Syntax { .. })));
    }

    #[test]
    fn unknown_identifiers() {
        assert_eq!(
            Expr::parse("2*x", &[Var::Z]).unwrap_err(),
            Error::UnknownIdentifier { offset: 2, name: "x".into() }
        );
        assert!(matches!(Expr::parse("tan(z)", &[Var::Z]), Err(Error::UnknownIdentifier { .. })));
        assert!(matches!(Expr::parse("Z", &[Var::Z]), Err(Error::UnknownIdentifier { .. })));
    }

    #[test]
    fn domain_errors() {
        let e = |s: &str, z: f64| Expr::parse(s, &[Var::Z]).unwrap().eval_z(z);
        assert!(matches!(e("log(z)", 0.0), Err(Error::EvalDomain(_))));
        assert!(matches!(e("sqrt(z)", -1.0), Err(Error::EvalDomain(_))));
        assert!(matches!(e("1/z", 0.0), Err(Error::EvalDomain(_))));
        assert!(matches!(e("z^0.5", -1.0), Err(Error::EvalDomain(_))));
        assert!(matches!(e("exp(z)", 1000.0), Err(Error::EvalDomain(_))));
        assert_eq!(e("sqrt(z)", 0.0).unwrap(), 0.0);
    }

    #[test]
    fn derivatives_of_each_rule() {
        let d = |s: &str, v: Var, p: [f64; 3]| Expr::parse(s, XYZ).unwrap().diff(v).eval(p).unwrap();
        let p = [0.3, -0.7, 1.2];
        assert!((d("x*y*z", Var::Y, p) - 0.3 * 1.2).abs() < 1e-15);
        assert!((d("z^3", Var::Z, p) - 3.0 * 1.44).abs() < 1e-14);
        assert!((d("z^z", Var::Z, p) - 1.2f64.powf(1.2) * (1.2f64.ln() + 1.0)).abs() < 1e-14);
        assert!((d("abs(y)", Var::Y, p) + 1.0).abs() < 1e-15);
        assert!((d("sqrt(z)", Var::Z, p) - 0.5 / 1.2f64.sqrt()).abs() < 1e-15);
        assert!((d("log(z)/x", Var::X, p) + 1.2f64.ln() / 0.09).abs() < 1e-13);
        assert_eq!(d("sin(pi)", Var::Z, p), 0.0);
    }

    #[test]
    fn substitution() {
        let e = Expr::parse("x*z + y", XYZ).unwrap();
        let s = e.substitute(Var::X, &Expr::Num(2.0)).substitute(Var::Y, &Expr::Num(0.0));
        assert!(!s.uses(Var::X) && !s.uses(Var::Y));
        assert_eq!(s.eval_z(1.5).unwrap(), 3.0);
    }

    #[test]
    fn printer_round_trips_negative_literals() {
        let e = neg(Expr::Num(2.5));
        let back = Expr::parse(&e.to_string(), XYZ).unwrap();
        assert_eq!(back.eval([0.0; 3]).unwrap(), -2.5);
    }
}
