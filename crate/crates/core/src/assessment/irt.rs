//! Three-parameter logistic item response model.

use serde::{Deserialize, Serialize};

use super::AssessError;

/// Discrimination `a`, difficulty `b`, pseudo-guessing `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrtParams {
    a: f64,
    b: f64,
    c: f64,
}

impl IrtParams {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self, AssessError> {
        if !(a.is_finite() && a > 0.0) {
            return Err(AssessError::InvalidParams(format!("discrimination a={a} must be > 0")));
        }
        if !b.is_finite() {
            return Err(AssessError::InvalidParams(format!("difficulty b={b} must be finite")));
        }
        if !(0.0..1.0).contains(&c) {
            return Err(AssessError::InvalidParams(format!("guessing c={c} must be in [0, 1)")));
        }
        Ok(IrtParams { a, b, c })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Probability that a test taker with ability `theta` answers correctly:
/// `c + (1 - c) / (1 + exp(-a (theta - b)))`.
pub fn irt_probability(theta: f64, params: &IrtParams) -> f64 {
    let s = logistic(params.a * (theta - params.b));
    // same value as c + (1 - c) s, but exact at the midpoint s = 1/2
    s + params.c * (1.0 - s)
}

/// Analytic slope `dP/dtheta = a (1 - c) s (1 - s)`.
pub fn irt_slope(theta: f64, params: &IrtParams) -> f64 {
    let s = logistic(params.a * (theta - params.b));
    params.a * (1.0 - params.c) * s * (1.0 - s)
}
