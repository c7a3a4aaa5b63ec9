//! Weighted-L1 penalised M-estimation.
//!
//! Minimises `(1/n) sum_i rho(y_i - x_i' beta) + sum_j w_j |beta_j|` by ADMM on
//! the split `z = y - X beta`. The beta-step is a weighted lasso solved by
//! cyclic coordinate descent on a cached Gram matrix; the z-step applies the
//! loss proximal map coordinatewise. Once the splitting iterates settle, an
//! active-set polish recovers the exact solution and a dual certificate
//! confirms it before the fit is reported as converged.

mod admm;
mod polish;
mod vertex;

use nalgebra::DVector;

use crate::dataset::Dataset;
use crate::error::{MestError, Result};
use crate::losses::{LossSpec, SubgradientInterval};
use crate::penalties::PenaltyWeights;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Target KKT residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial augmented-Lagrangian parameter, in units of `1/n`. Adapted
    /// during the run by residual balancing.
    pub admm_rho: f64,
    /// Final coefficients with `|beta_j| <= zero_tol` are set to exactly 0.
    pub zero_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 20_000,
            admm_rho: 1.0,
            zero_tol: 1e-6,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(MestError::InvalidOptions(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter < 1 {
            return Err(MestError::InvalidOptions("max_iter must be >= 1".into()));
        }
        if !(self.admm_rho > 0.0 && self.admm_rho.is_finite()) {
            return Err(MestError::InvalidOptions(format!(
                "admm_rho must be > 0, got {}",
                self.admm_rho
            )));
        }
        if !(self.zero_tol >= 0.0) {
            return Err(MestError::InvalidOptions("zero_tol must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub beta: DVector<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    /// Turns an unconverged fit into [`MestError::MaxIterExceeded`].
    pub fn into_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(MestError::MaxIterExceeded {
                iterations: self.iterations,
                kkt_residual: self.kkt_residual,
            })
        }
    }

    /// Indices with nonzero coefficients.
    pub fn active_set(&self) -> Vec<usize> {
        self.beta
            .iter()
            .enumerate()
            .filter(|(_, b)| **b != 0.0)
            .map(|(j, _)| j)
            .collect()
    }
}

fn check_shapes(data: &Dataset, weights: &PenaltyWeights, beta: Option<&DVector<f64>>) -> Result<()> {
    if weights.len() != data.p() {
        return Err(MestError::DimensionMismatch {
            expected: data.p(),
            got: weights.len(),
        });
    }
    if let Some(b) = beta {
        if b.len() != data.p() {
            return Err(MestError::DimensionMismatch {
                expected: data.p(),
                got: b.len(),
            });
        }
    }
    Ok(())
}

/// `Q(beta) = (1/n) sum rho(y_i - x_i' beta) + sum w_j |beta_j|`.
pub fn objective(data: &Dataset, loss: &LossSpec, weights: &PenaltyWeights, beta: &DVector<f64>) -> f64 {
    mean_loss(data, loss, beta) + weights.penalty(beta)
}

pub fn mean_loss(data: &Dataset, loss: &LossSpec, beta: &DVector<f64>) -> f64 {
    let r = data.residuals(beta);
    r.iter().map(|v| loss.value(*v)).sum::<f64>() / data.n() as f64
}

/// Residuals within this distance of a kink are treated as sitting on it.
pub(crate) fn residual_slack(data: &Dataset) -> f64 {
    1e-10 * (1.0 + data.y().amax())
}

/// Largest coordinatewise distance from 0 to the subdifferential of `Q` at
/// `beta`, computed with interval arithmetic: each residual contributes its
/// full subgradient interval `[phi_-(r_i), phi_+(r_i)]` independently.
pub fn kkt_residual(data: &Dataset, loss: &LossSpec, weights: &PenaltyWeights, beta: &DVector<f64>) -> f64 {
    let n = data.n() as f64;
    let slack = residual_slack(data);
    let r = data.residuals(beta);
    let intervals: Vec<SubgradientInterval> = r
        .iter()
        .map(|&ri| SubgradientInterval {
            lo: loss.subgradient(ri - slack).lo,
            hi: loss.subgradient(ri + slack).hi,
        })
        .collect();
    let x = data.x();
    let mut worst = 0.0_f64;
    for j in 0..data.p() {
        let (mut lo, mut hi) = (0.0, 0.0);
        for (i, s) in intervals.iter().enumerate() {
            let xij = x[(i, j)];
            if xij >= 0.0 {
                lo -= xij * s.hi;
                hi -= xij * s.lo;
            } else {
                lo -= xij * s.lo;
                hi -= xij * s.hi;
            }
        }
        let (lo, hi) = (lo / n, hi / n);
        let w = weights.get(j);
        let total = if beta[j] > 0.0 {
            SubgradientInterval { lo: lo + w, hi: hi + w }
        } else if beta[j] < 0.0 {
            SubgradientInterval { lo: lo - w, hi: hi - w }
        } else {
            SubgradientInterval { lo: lo - w, hi: hi + w }
        };
        worst = worst.max(total.distance(0.0));
    }
    worst
}

/// Global minimiser of the weighted-L1 penalised objective.
pub fn fit_penalized(
    data: &Dataset,
    loss: &LossSpec,
    weights: &PenaltyWeights,
    opts: &SolveOptions,
) -> Result<FitResult> {
    fit_penalized_from(data, loss, weights, opts, None)
}

/// As [`fit_penalized`], starting the splitting iterations at `init`.
pub fn fit_penalized_from(
    data: &Dataset,
    loss: &LossSpec,
    weights: &PenaltyWeights,
    opts: &SolveOptions,
    init: Option<&DVector<f64>>,
) -> Result<FitResult> {
    opts.validate()?;
    check_shapes(data, weights, init)?;
    if let Some(b) = init {
        if b.iter().any(|v| !v.is_finite()) {
            return Err(MestError::NonFiniteEncountered("initial point"));
        }
    }
    admm::solve(data, loss, weights, opts, init)
}

pub fn fit_unpenalized(data: &Dataset, loss: &LossSpec, opts: &SolveOptions) -> Result<FitResult> {
    if data.p() > data.n() {
        log::warn!(
            "unpenalized fit with p = {} > n = {}: the pilot estimate is not unique",
            data.p(),
            data.n()
        );
    }
    fit_penalized(data, loss, &PenaltyWeights::zeros(data.p()), opts)
}

/// Unpenalised fit on the columns in `support` (zero-based); every other
/// coefficient is exactly zero in the returned vector.
pub fn fit_oracle(data: &Dataset, loss: &LossSpec, support: &[usize], opts: &SolveOptions) -> Result<FitResult> {
    if support.is_empty() {
        return Err(MestError::Empty("oracle support"));
    }
    let mut cols = support.to_vec();
    cols.sort_unstable();
    cols.dedup();
    let sub = data.select_columns(&cols)?;
    let inner = fit_unpenalized(&sub, loss, opts)?;
    let mut beta = DVector::zeros(data.p());
    for (k, &j) in cols.iter().enumerate() {
        beta[j] = inner.beta[k];
    }
    let zeros = PenaltyWeights::zeros(data.p());
    Ok(FitResult {
        objective: objective(data, loss, &zeros, &beta),
        kkt_residual: inner.kkt_residual,
        iterations: inner.iterations,
        converged: inner.converged,
        beta,
    })
}
