use nalgebra::{DMatrix, DVector};

use super::{kkt_residual, objective, polish, FitResult, SolveOptions};
use crate::dataset::Dataset;
use crate::error::{MestError, Result};
use crate::losses::{soft_threshold, LossSpec};
use crate::penalties::PenaltyWeights;

const POLISH_EVERY: usize = 25;
const BALANCE_EVERY: usize = 10;
const BALANCE_RATIO: f64 = 10.0;
const CD_MAX_SWEEPS: usize = 200;

/// Weighted lasso `min (mu/2)(b'Gb - 2 c'b) + sum w_j |b_j|` by cyclic
/// coordinate descent, keeping `G beta` up to date between calls.
struct GramLasso {
    gram: DMatrix<f64>,
    g_beta: DVector<f64>,
}

impl GramLasso {
    fn new(x: &DMatrix<f64>, beta: &DVector<f64>) -> Self {
        let gram = x.transpose() * x;
        let g_beta = &gram * beta;
        Self { gram, g_beta }
    }

    fn solve(&mut self, beta: &mut DVector<f64>, c: &DVector<f64>, weights: &PenaltyWeights, mu: f64) {
        let p = beta.len();
        let scale = self.gram.diagonal().amax().max(1.0);
        for _ in 0..CD_MAX_SWEEPS {
            let mut max_move = 0.0_f64;
            for j in 0..p {
                let gjj = self.gram[(j, j)];
                let old = beta[j];
                let new = if gjj > 0.0 {
                    let partial = c[j] - (self.g_beta[j] - gjj * old);
                    soft_threshold(partial, weights.get(j) / mu) / gjj
                } else {
                    0.0
                };
                let delta = new - old;
                if delta != 0.0 {
                    beta[j] = new;
                    self.g_beta.axpy(delta, &self.gram.column(j), 1.0);
                    max_move = max_move.max(delta.abs() * gjj.sqrt());
                }
            }
            if max_move <= 1e-13 * scale.sqrt() * (1.0 + beta.amax()) {
                break;
            }
        }
    }
}

fn hard_zero(beta: &mut DVector<f64>, zero_tol: f64) {
    for b in beta.iter_mut() {
        if b.abs() <= zero_tol {
            *b = 0.0;
        }
    }
}

pub(super) fn solve(
    data: &Dataset,
    loss: &LossSpec,
    weights: &PenaltyWeights,
    opts: &SolveOptions,
    init: Option<&DVector<f64>>,
) -> Result<FitResult> {
    let n = data.n();
    let (x, y) = (data.x(), data.y());
    let mut beta = init.cloned().unwrap_or_else(|| DVector::zeros(data.p()));
    let mut lasso = GramLasso::new(x, &beta);
    let mut xb = x * &beta;
    let mut z = y - &xb;
    let mut u = DVector::<f64>::zeros(n);
    let mut mu = opts.admm_rho / n as f64;
    let mut scratch = DVector::<f64>::zeros(n);

    let mut best: Option<(f64, DVector<f64>)> = None;

    for iter in 1..=opts.max_iter {
        // beta-step: target X beta ~ y - z - u
        scratch.copy_from(y);
        scratch -= &z;
        scratch -= &u;
        let c = x.tr_mul(&scratch);
        lasso.solve(&mut beta, &c, weights, mu);
        xb = x * &beta;

        // z-step
        let t = 1.0 / (n as f64 * mu);
        let mut dz2 = 0.0;
        for i in 0..n {
            let v = y[i] - xb[i] - u[i];
            let new = loss.prox(v, t);
            dz2 += (new - z[i]).powi(2);
            z[i] = new;
        }

        // scaled dual update, primal residual X beta + z - y
        let mut r2 = 0.0;
        for i in 0..n {
            let r = xb[i] + z[i] - y[i];
            u[i] += r;
            r2 += r * r;
        }
        if !(r2.is_finite() && dz2.is_finite()) || beta.iter().any(|b| !b.is_finite()) {
            return Err(MestError::NonFiniteEncountered("splitting iterates"));
        }

        if iter % POLISH_EVERY == 0 || iter == opts.max_iter {
            if let Some(candidate) = polish::polish(data, loss, weights, &beta, &z, opts) {
                let kkt = kkt_residual(data, loss, weights, &candidate);
                if kkt <= opts.tol {
                    return Ok(FitResult {
                        objective: objective(data, loss, weights, &candidate),
                        kkt_residual: kkt,
                        iterations: iter,
                        converged: true,
                        beta: candidate,
                    });
                }
            }
            let mut trial = beta.clone();
            hard_zero(&mut trial, opts.zero_tol);
            let obj = objective(data, loss, weights, &trial);
            if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                best = Some((obj, trial));
            }
        }

        if iter % BALANCE_EVERY == 0 {
            let primal = r2.sqrt();
            let dual = mu * dz2.sqrt();
            if primal > BALANCE_RATIO * dual {
                mu *= 2.0;
                u /= 2.0;
            } else if dual > BALANCE_RATIO * primal {
                mu /= 2.0;
                u *= 2.0;
            }
        }
    }

    let (objective, beta) = best.expect("max_iter >= 1 records an iterate");
    let kkt = kkt_residual(data, loss, weights, &beta);
    Ok(FitResult {
        objective,
        kkt_residual: kkt,
        iterations: opts.max_iter,
        converged: false,
        beta,
    })
}
