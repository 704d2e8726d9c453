//! JSON input files: reduced problems, frames and Martinet models.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::{Box3, FramedProblem, OneForm3, VectorField3};
use crate::martinet::MartinetModel;
use crate::reduced_oc::{ReducedProblem, DEFAULT_TOL_T};
use crate::scalar_fields::ScalarField;

/// A scalar profile: an expression in `z` or a PCHIP table.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Expr(String),
    Table { knots: Vec<f64>, values: Vec<f64> },
}

impl FieldSpec {
    pub fn build(&self, z_f: f64) -> Result<ScalarField> {
        match self {
            FieldSpec::Expr(s) => ScalarField::parse(s, 0.0, z_f),
            FieldSpec::Table { knots, values } => ScalarField::table(knots.clone(), values.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub a0: FieldSpec,
    pub alpha: FieldSpec,
    #[serde(default)]
    pub b: Option<FieldSpec>,
    pub z_f: f64,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "tol_T", default)]
    pub tol_t: Option<f64>,
}

fn parse_json<'a, T: Deserialize<'a>>(text: &'a str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("{what}: {e}")))
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<ProblemFile> {
        parse_json(text, "problem file")
    }

    pub fn build(&self) -> Result<ReducedProblem> {
        if !(self.z_f.is_finite() && self.z_f > 0.0) {
            return Err(Error::InvalidInput(format!("z_f = {} must be finite and positive", self.z_f)));
        }
        let b = self.b.as_ref().map(|f| f.build(self.z_f)).transpose()?;
        ReducedProblem::new(self.a0.build(self.z_f)?, self.alpha.build(self.z_f)?, b, self.z_f, self.t)
    }

    pub fn tol_t(&self) -> f64 {
        self.tol_t.unwrap_or(DEFAULT_TOL_T)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    pub s0: f64,
    pub s1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub z: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameFile {
    #[serde(rename = "X0")]
    pub x0: [String; 3],
    #[serde(rename = "X1")]
    pub x1: [String; 3],
    #[serde(rename = "X2")]
    pub x2: [String; 3],
    pub omega: [String; 3],
    pub curve: CurveSpec,
    #[serde(rename = "box")]
    pub bbox: BoxSpec,
}

fn strs(v: &[String; 3]) -> [&str; 3] {
    [&v[0], &v[1], &v[2]]
}

impl FrameFile {
    pub fn from_json(text: &str) -> Result<FrameFile> {
        parse_json(text, "frame file")
    }

    pub fn build(&self) -> Result<FramedProblem> {
        let b = self.bbox;
        let bbox = Box3 { x: (b.x[0], b.x[1]), y: (b.y[0], b.y[1]), z: (b.z[0], b.z[1]) };
        FramedProblem::new(
            VectorField3::parse(strs(&self.x0))?,
            VectorField3::parse(strs(&self.x1))?,
            VectorField3::parse(strs(&self.x2))?,
            OneForm3::parse(strs(&self.omega))?,
            (self.curve.s0, self.curve.s1),
            bbox,
        )
    }
}

pub fn martinet_from_json(text: &str) -> Result<MartinetModel> {
    let m: MartinetModel = parse_json(text, "Martinet model file")?;
    m.validate()?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn problem_with_expression_and_table() {
        let text = r#"{"a0": "2 - z", "alpha": {"knots": [0, 0.5, 1, 1.5], "values": [1, 1, 1, 1]},
                       "z_f": 1, "T": 0.3}"#;
        let f = ProblemFile::from_json(text).unwrap();
        let p = f.build().unwrap();
        assert_eq!(p.a0.eval(0.5).unwrap(), 1.5);
        assert_eq!(p.alpha.eval(0.7).unwrap(), 1.0);
        assert_eq!(f.tol_t(), DEFAULT_TOL_T);
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(ProblemFile::from_json(r#"{"a0": "1", "z_f": 1, "T": 1}"#), Err(Error::InvalidInput(_))));
        assert!(ProblemFile::from_json(r#"{"a0": "1", "alpha": "1", "z_f": 1, "T": 1, "extra": 0}"#).is_err());
        let bad = ProblemFile::from_json(r#"{"a0": "1 +* z", "alpha": "1", "z_f": 1, "T": 1}"#).unwrap();
        assert!(matches!(bad.build(), Err(Error::Syntax { .. })));
    }

    #[test]
    fn frame_file() {
        let text = r#"{"X0": ["0", "0", "1"], "X1": ["1", "0", "y*(z+x)/2"], "X2": ["0", "1", "-x*(z+x)/2"],
            "omega": ["-y*(z+x)/2", "x*(z+x)/2", "1"], "curve": {"s0": -0.5, "s1": 0.5},
            "box": {"x": [-1, 1], "y": [-1, 1], "z": [-1, 1]}}"#;
        let fp = FrameFile::from_json(text).unwrap().build().unwrap();
        assert!((crate::geometry::kappa_bracket(&fp, [0.0; 3]).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn martinet_file() {
        let m = martinet_from_json(r#"{"a": 1, "kappa": 1, "alpha1_tilde": 4, "theta_tilde": 0}"#).unwrap();
        assert_eq!(m, MartinetModel::canonical());
        assert!(martinet_from_json(r#"{"a": 1, "kappa": -1, "alpha1_tilde": 4, "theta_tilde": 0}"#).is_err());
    }
}
