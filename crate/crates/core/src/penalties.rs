//! SCAD penalty and the per-coefficient L1 weights built from it.

use nalgebra::DVector;

use crate::error::{MestError, Result};

pub const DEFAULT_SCAD_A: f64 = 3.7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScadParams {
    lambda: f64,
    a: f64,
}

impl ScadParams {
    pub fn new(lambda: f64, a: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(MestError::InvalidPenalty(format!("lambda must be >= 0, got {lambda}")));
        }
        if !(a > 2.0 && a.is_finite()) {
            return Err(MestError::InvalidPenalty(format!("SCAD a must be > 2, got {a}")));
        }
        Ok(Self { lambda, a })
    }

    pub fn with_lambda(lambda: f64) -> Result<Self> {
        Self::new(lambda, DEFAULT_SCAD_A)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn a(&self) -> f64 {
        self.a
    }
}

/// Nonnegative, finite per-coefficient L1 weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyWeights(DVector<f64>);

impl PenaltyWeights {
    pub fn new(w: DVector<f64>) -> Result<Self> {
        if let Some(bad) = w.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(MestError::InvalidPenalty(format!(
                "weight {bad} is not a finite nonnegative number"
            )));
        }
        Ok(Self(w))
    }

    pub fn zeros(p: usize) -> Self {
        Self(DVector::zeros(p))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn get(&self, j: usize) -> f64 {
        self.0[j]
    }

    /// Multiplies every weight by `factor >= 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(&self.0 * factor)
    }

    /// `sum_j w_j |beta_j|`.
    pub fn penalty(&self, beta: &DVector<f64>) -> f64 {
        self.0.iter().zip(beta.iter()).map(|(w, b)| w * b.abs()).sum()
    }
}

pub fn scad_value(params: &ScadParams, beta: f64) -> f64 {
    let (l, a) = (params.lambda, params.a);
    let b = beta.abs();
    if b <= l {
        l * b
    } else if b <= a * l {
        // |beta| = a*lambda falls here; the closed form equals (a+1)lambda^2/2 there
        -(b * b - 2.0 * a * l * b + l * l) / (2.0 * (a - 1.0))
    } else {
        (a + 1.0) * l * l / 2.0
    }
}

pub fn scad_derivative(params: &ScadParams, beta_abs: f64) -> f64 {
    let (l, a) = (params.lambda, params.a);
    if beta_abs <= l {
        l
    } else if beta_abs <= a * l {
        (a * l - beta_abs) / (a - 1.0)
    } else {
        0.0
    }
}

/// Linearised SCAD weights `w_j = p'_lambda(|pilot_j|)`.
pub fn lla_weights(params: &ScadParams, pilot: &DVector<f64>) -> Result<PenaltyWeights> {
    if let Some(bad) = pilot.iter().find(|v| !v.is_finite()) {
        return Err(MestError::InvalidPenalty(format!("pilot estimate contains {bad}")));
    }
    PenaltyWeights::new(pilot.map(|b| scad_derivative(params, b.abs())))
}

pub fn lasso_weights(lambda: f64, p: usize) -> Result<PenaltyWeights> {
    if p == 0 {
        return Err(MestError::InvalidPenalty("p must be at least 1".into()));
    }
    PenaltyWeights::new(DVector::from_element(p, lambda))
}
