use crate::error::{Error, Result};

/// Shape-preserving piecewise cubic Hermite interpolant (Fritsch-Carlson
/// slopes with the usual three-point endpoint rule).
#[derive(Debug, Clone, PartialEq)]
pub struct Pchip {
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Pchip> {
        if knots.len() != values.len() {
            return Err(Error::InvalidTable(format!(
                "{} knots but {} values",
                knots.len(),
                values.len()
            )));
        }
        if knots.len() < 4 {
            return Err(Error::InvalidTable("at least 4 knots are required".into()));
        }
        if knots.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidTable("non-finite entry".into()));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidTable("knots must be strictly increasing".into()));
        }
        let n = knots.len();
        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (values[k + 1] - values[k]) / h[k]).collect();
        let mut slopes = vec![0.0; n];
        for k in 1..n - 1 {
            if delta[k - 1] * delta[k] > 0.0 {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                slopes[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
            }
        }
        slopes[0] = end_slope(h[0], h[1], delta[0], delta[1]);
        slopes[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        Ok(Pchip { knots, values, slopes })
    }

    pub fn lo(&self) -> f64 {
        self.knots[0]
    }

    pub fn hi(&self) -> f64 {
        *self.knots.last().expect("non-empty")
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Evaluate; `z` is clamped to the knot span.
    pub fn eval(&self, z: f64) -> f64 {
        let z = z.clamp(self.lo(), self.hi());
        let k = match self.knots.partition_point(|&t| t <= z) {
            0 => 0,
            i => (i - 1).min(self.knots.len() - 2),
        };
        let (x0, x1) = (self.knots[k], self.knots[k + 1]);
        let h = x1 - x0;
        let t = (z - x0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.values[k] + h * h10 * self.slopes[k] + h01 * self.values[k + 1] + h * h11 * self.slopes[k + 1]
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d * d0 <= 0.0 {
        0.0
    } else if d0 * d1 < 0.0 && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hits_knots() {
        let p = Pchip::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 1.0, 4.0, 9.0]).unwrap();
        for (k, v) in [(0.0, 0.0), (1.0, 1.0), (2.0, 4.0), (3.0, 9.0)] {
            assert_eq!(p.eval(k), v);
        }
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(Pchip::new(vec![0.0, 1.0, 2.0], vec![0.0; 3]).is_err());
        assert!(Pchip::new(vec![0.0, 1.0, 1.0, 2.0], vec![0.0; 4]).is_err());
        assert!(Pchip::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.0; 3]).is_err());
    }

    proptest! {
        // No overshoot: between two knots the interpolant stays inside the
        // range of the neighbouring values.
        #[test]
        fn no_overshoot(vals in proptest::collection::vec(-5.0f64..5.0, 6), t in 0.0f64..5.0) {
            let knots: Vec<f64> = (0..6).map(|k| k as f64).collect();
            let p = Pchip::new(knots, vals.clone()).unwrap();
            let k = (t.floor() as usize).min(4);
            let (lo, hi) = (vals[k].min(vals[k + 1]), vals[k].max(vals[k + 1]));
            let y = p.eval(t);
            prop_assert!(y >= lo - 1e-12 && y <= hi + 1e-12);
        }
    }
}
