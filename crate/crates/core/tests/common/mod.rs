#![allow(dead_code)]

use std::f64::consts::TAU;

use mctrack_core::reduced_oc::ReducedProblem;
use mctrack_core::scalar_fields::ScalarField;

pub fn problem(a0: &str, alpha: &str, b: Option<&str>, z_f: f64, t: f64) -> ReducedProblem {
    let f = |s: &str| ScalarField::parse(s, 0.0, z_f).unwrap();
    ReducedProblem::new(f(a0), f(alpha), b.map(f), z_f, t).unwrap()
}

/// a0 = 1, alpha = 2 on [0, 1], T = 2: DriftFast with constant 1.
pub fn fast() -> ReducedProblem {
    problem("1", "2", None, 1.0, 2.0)
}

/// a0 = 2 - z, alpha = 1 on [0, 1], T = 0.3: DriftSlow.
pub fn slow() -> ReducedProblem {
    problem("2 - z", "1", None, 1.0, 0.3)
}

/// a0 = 1 + z, b = z, T = ln 2: DriftExact with constant 1 - ln 2.
pub fn exact() -> ReducedProblem {
    problem("1 + z", "1", Some("z"), 1.0, 2f64.ln())
}

/// Random smooth trigonometric profiles: a0 in [A - B, A + B] with
/// A in [1.5, 3], B in [0, 1]; alpha in [C - D, C + D] with C in [1, 2],
/// D in [0, 0.5]. Both stay well away from zero.
pub fn trig_profiles<R: rand::Rng>(rng: &mut R) -> (String, String) {
    let a0 = format!(
        "{} + {} * sin({} * z + {})",
        rng.gen_range(1.5..3.0),
        rng.gen_range(0.0..1.0),
        rng.gen_range(1.0..4.0),
        rng.gen_range(0.0..TAU)
    );
    let alpha = format!(
        "{} + {} * cos({} * z + {})",
        rng.gen_range(1.0..2.0),
        rng.gen_range(0.0..0.5),
        rng.gen_range(1.0..4.0),
        rng.gen_range(0.0..TAU)
    );
    (a0, alpha)
}
