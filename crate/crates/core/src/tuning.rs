//! BIC selection of the penalty level over a log-spaced grid.

use nalgebra::DVector;

use crate::dataset::Dataset;
use crate::error::{MestError, Result};
use crate::exec::Execution;
use crate::losses::LossSpec;
use crate::penalties::{lasso_weights, lla_weights, PenaltyWeights, ScadParams, DEFAULT_SCAD_A};
use crate::solver::{fit_penalized, fit_unpenalized, mean_loss, FitResult, SolveOptions};

pub const DEFAULT_GRID_POINTS: usize = 50;
pub const DEFAULT_MIN_RATIO: f64 = 1e-3;
const DEGENERATE_LOSS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaGrid {
    values: Vec<f64>,
}

impl LambdaGrid {
    /// Explicit grid; must be strictly descending and positive.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(MestError::Empty("lambda grid"));
        }
        if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(MestError::InvalidPenalty(
                "grid values must be finite and positive".into(),
            ));
        }
        if values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(MestError::InvalidPenalty("grid must be strictly descending".into()));
        }
        Ok(Self { values })
    }

    /// `n_points` values log-spaced from `max` down to `min_ratio * max`.
    pub fn log_spaced(max: f64, n_points: usize, min_ratio: f64) -> Result<Self> {
        if n_points == 0 {
            return Err(MestError::Empty("lambda grid"));
        }
        if !(min_ratio > 0.0 && min_ratio < 1.0) {
            return Err(MestError::InvalidPenalty(format!(
                "min_ratio must lie in (0,1), got {min_ratio}"
            )));
        }
        if n_points == 1 {
            return Self::new(vec![max]);
        }
        let step = min_ratio.ln() / (n_points - 1) as f64;
        Self::new((0..n_points).map(|k| max * (step * k as f64).exp()).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Number of coefficients with `|beta_j| > zero_tol`.
pub fn degrees_of_freedom(beta: &DVector<f64>, zero_tol: f64) -> usize {
    beta.iter().filter(|b| b.abs() > zero_tol).count()
}

/// `ln(mean loss) + df ln(n) / n`, with `df` the number of nonzero coefficients.
pub fn bic_score(data: &Dataset, loss: &LossSpec, beta: &DVector<f64>, zero_tol: f64) -> Result<(f64, usize)> {
    if beta.len() != data.p() {
        return Err(MestError::DimensionMismatch {
            expected: data.p(),
            got: beta.len(),
        });
    }
    let m = mean_loss(data, loss, beta);
    if !(m > DEGENERATE_LOSS) {
        return Err(MestError::DegenerateFit(m));
    }
    let df = degrees_of_freedom(beta, zero_tol);
    let n = data.n() as f64;
    Ok((m.ln() + df as f64 * n.ln() / n, df))
}

/// `max_j (1/n) |sum_i phi(y_i) x_ij|`: the smallest uniform weight at which
/// the zero vector is stationary.
pub fn lambda_max(data: &Dataset, loss: &LossSpec) -> f64 {
    let score = data.y().map(|v| loss.score(v));
    (data.x().tr_mul(&score) / data.n() as f64).amax()
}

pub fn default_grid(data: &Dataset, loss: &LossSpec) -> LambdaGrid {
    grid_with(data, loss, DEFAULT_GRID_POINTS, DEFAULT_MIN_RATIO).expect("default grid parameters are valid")
}

/// Falls back to `[1e-3, 1]` when the response gives no scale.
pub fn grid_with(data: &Dataset, loss: &LossSpec, n_points: usize, min_ratio: f64) -> Result<LambdaGrid> {
    let top = lambda_max(data, loss);
    if top > 0.0 && top.is_finite() {
        LambdaGrid::log_spaced(top, n_points, min_ratio)
    } else {
        LambdaGrid::log_spaced(1.0, n_points, 1e-3)
    }
}

/// Grid for LLA weights at `pilot`. The top is raised to `max_j |pilot_j|`
/// when needed, since below it some weights fall under lambda and the zero
/// vector need not be stationary at `lambda_max`.
pub fn lla_grid(
    data: &Dataset,
    loss: &LossSpec,
    pilot: &DVector<f64>,
    n_points: usize,
    min_ratio: f64,
) -> Result<LambdaGrid> {
    let top = lambda_max(data, loss).max(pilot.amax());
    if top > 0.0 && top.is_finite() {
        LambdaGrid::log_spaced(top, n_points, min_ratio)
    } else {
        LambdaGrid::log_spaced(1.0, n_points, 1e-3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyMethod {
    /// SCAD-derivative weights at the unpenalised pilot.
    Lla { a: f64 },
    /// Uniform weights.
    Lasso,
}

impl PenaltyMethod {
    pub fn lla() -> Self {
        Self::Lla { a: DEFAULT_SCAD_A }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BicPoint {
    pub lambda: f64,
    pub bic: f64,
    pub df: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningResult {
    pub lambda_star: f64,
    pub fit: FitResult,
    /// Successful grid points, sorted by descending lambda.
    pub bic_path: Vec<BicPoint>,
    /// The LLA pilot; `None` for the lasso.
    pub pilot: Option<FitResult>,
    /// Grid points whose fit failed or did not converge.
    pub failed: usize,
    /// Solver iterations summed over the pilot and every grid fit.
    pub total_iterations: usize,
}

pub fn select_lambda(
    data: &Dataset,
    loss: &LossSpec,
    method: PenaltyMethod,
    grid: &LambdaGrid,
    opts: &SolveOptions,
) -> Result<TuningResult> {
    select_lambda_with(data, loss, method, grid, opts, Execution::Serial)
}

/// As [`select_lambda`], fanning the grid fits out according to `exec`.
pub fn select_lambda_with(
    data: &Dataset,
    loss: &LossSpec,
    method: PenaltyMethod,
    grid: &LambdaGrid,
    opts: &SolveOptions,
    exec: Execution,
) -> Result<TuningResult> {
    let pilot = pilot_for(data, loss, method, opts)?;
    select_on_grid(data, loss, method, pilot, grid, opts, exec)
}

/// Builds the grid from the data: [`grid_with`] for the lasso and
/// [`lla_grid`] at the pilot for LLA, whose empty model is then always on
/// the path.
pub fn select_lambda_auto(
    data: &Dataset,
    loss: &LossSpec,
    method: PenaltyMethod,
    n_points: usize,
    min_ratio: f64,
    opts: &SolveOptions,
    exec: Execution,
) -> Result<TuningResult> {
    let pilot = pilot_for(data, loss, method, opts)?;
    let grid = match &pilot {
        Some(p) => lla_grid(data, loss, &p.beta, n_points, min_ratio)?,
        None => grid_with(data, loss, n_points, min_ratio)?,
    };
    select_on_grid(data, loss, method, pilot, &grid, opts, exec)
}

fn pilot_for(data: &Dataset, loss: &LossSpec, method: PenaltyMethod, opts: &SolveOptions) -> Result<Option<FitResult>> {
    match method {
        PenaltyMethod::Lla { .. } => {
            let fit = fit_unpenalized(data, loss, opts)?;
            if !fit.converged {
                log::warn!("pilot fit stopped at kkt residual {:.3e}", fit.kkt_residual);
            }
            Ok(Some(fit))
        }
        PenaltyMethod::Lasso => Ok(None),
    }
}

fn select_on_grid(
    data: &Dataset,
    loss: &LossSpec,
    method: PenaltyMethod,
    pilot: Option<FitResult>,
    grid: &LambdaGrid,
    opts: &SolveOptions,
    exec: Execution,
) -> Result<TuningResult> {
    let weights_at = |lambda: f64| -> Result<PenaltyWeights> {
        match (method, &pilot) {
            (PenaltyMethod::Lla { a }, Some(p)) => lla_weights(&ScadParams::new(lambda, a)?, &p.beta),
            _ => lasso_weights(lambda, data.p()),
        }
    };

    let lambdas = grid.values();
    let outcomes: Vec<Result<(FitResult, f64, usize)>> = exec.map(lambdas.len(), |k| {
        let fit = fit_penalized(data, loss, &weights_at(lambdas[k])?, opts)?.into_converged()?;
        let (bic, df) = bic_score(data, loss, &fit.beta, opts.zero_tol)?;
        Ok((fit, bic, df))
    });

    let mut total_iterations = pilot.as_ref().map_or(0, |p| p.iterations);
    let mut failed = 0;
    let mut path = Vec::with_capacity(lambdas.len());
    let mut best: Option<(usize, f64, FitResult)> = None;
    for (k, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok((fit, bic, df)) => {
                total_iterations += fit.iterations;
                path.push(BicPoint {
                    lambda: lambdas[k],
                    bic,
                    df,
                });
                // descending grid: strict improvement keeps ties at the larger lambda
                if best.as_ref().is_none_or(|(_, b, _)| bic < *b) {
                    best = Some((k, bic, fit));
                }
            }
            Err(e) => {
                log::debug!("lambda {} excluded: {e}", lambdas[k]);
                failed += 1;
            }
        }
    }
    let (k, _, fit) = best.ok_or(MestError::AllFitsFailed)?;
    Ok(TuningResult {
        lambda_star: lambdas[k],
        fit,
        bic_path: path,
        pilot,
        failed,
        total_iterations,
    })
}
