//! Refinement of a splitting iterate into an exact minimiser.
//!
//! Piecewise-linear losses are finished by vertex descent started from the
//! iterate's zero pattern and smallest residuals. For smooth losses the
//! iterate fixes a support and signs, the restricted problem is solved by
//! damped Newton, and the result is kept only when its gradient certifies
//! optimality within `tol`.

use nalgebra::{DMatrix, DVector};

use super::{vertex, SolveOptions};
use crate::dataset::Dataset;
use crate::losses::LossSpec;
use crate::penalties::PenaltyWeights;

const SUPPORT_ROUNDS: usize = 4;

pub(super) fn polish(
    data: &Dataset,
    loss: &LossSpec,
    weights: &PenaltyWeights,
    beta: &DVector<f64>,
    z: &DVector<f64>,
    opts: &SolveOptions,
) -> Option<DVector<f64>> {
    if loss.has_kink() {
        let mut vertex = vertex::descend(data, loss, weights, beta, z, opts.zero_tol)?;
        for b in vertex.iter_mut() {
            if b.abs() <= opts.zero_tol {
                *b = 0.0;
            }
        }
        return Some(vertex);
    }
    let mut support: Vec<usize> = (0..data.p()).filter(|&j| beta[j].abs() > opts.zero_tol).collect();
    let signs = beta.map(f64::signum);
    for _ in 0..SUPPORT_ROUNDS {
        let attempt = newton_candidate(data, loss, weights, beta, &support, &signs, opts)?;
        // coefficients that collapse or change sign leave the support
        let keep: Vec<usize> = support
            .iter()
            .copied()
            .filter(|&j| attempt[j].abs() > opts.zero_tol && attempt[j].signum() == signs[j])
            .collect();
        if keep.len() != support.len() {
            support = keep;
            continue;
        }
        return (smooth_certificate(data, loss, weights, &attempt) <= opts.tol).then_some(attempt);
    }
    None
}

fn restricted_objective(
    data: &Dataset,
    loss: &LossSpec,
    cols: &DMatrix<f64>,
    lin: &DVector<f64>,
    b: &DVector<f64>,
) -> f64 {
    let fitted = cols * b;
    let n = data.n() as f64;
    let loss_part: f64 = data
        .y()
        .iter()
        .zip(fitted.iter())
        .map(|(y, f)| loss.value(y - f))
        .sum::<f64>()
        / n;
    loss_part + lin.dot(b)
}

fn newton_candidate(
    data: &Dataset,
    loss: &LossSpec,
    weights: &PenaltyWeights,
    beta: &DVector<f64>,
    support: &[usize],
    signs: &DVector<f64>,
    opts: &SolveOptions,
) -> Option<DVector<f64>> {
    let mut out = DVector::zeros(data.p());
    let m = support.len();
    if m == 0 {
        return Some(out);
    }
    let n = data.n() as f64;
    let cols = data.x().select_columns(support);
    let lin = DVector::from_fn(m, |k, _| weights.get(support[k]) * signs[support[k]]);
    let mut b = DVector::from_fn(m, |k, _| beta[support[k]]);
    let mut f = restricted_objective(data, loss, &cols, &lin, &b);

    for _ in 0..100 {
        let r = data.y() - &cols * &b;
        let score = r.map(|v| loss.score(v));
        let grad = &lin - cols.tr_mul(&score) / n;
        if grad.amax() <= 1e-3 * opts.tol {
            break;
        }
        let curv = r.map(|v| loss.curvature(v));
        let mut weighted = cols.clone();
        for (i, mut row) in weighted.row_iter_mut().enumerate() {
            row *= curv[i];
        }
        let mut hess = cols.tr_mul(&weighted) / n;
        let ridge = 1e-12 * hess.diagonal().amax().max(1e-300);
        for k in 0..m {
            hess[(k, k)] += ridge;
        }
        let step = hess.cholesky()?.solve(&grad);
        let slope = grad.dot(&step);
        if !(slope > 0.0) {
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let trial = &b - &step * t;
            let ft = restricted_objective(data, loss, &cols, &lin, &trial);
            if ft <= f - 1e-4 * t * slope {
                b = trial;
                f = ft;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    for (k, &j) in support.iter().enumerate() {
        out[j] = b[k];
    }
    out.iter().all(|v| v.is_finite()).then_some(out)
}

fn smooth_certificate(data: &Dataset, loss: &LossSpec, weights: &PenaltyWeights, candidate: &DVector<f64>) -> f64 {
    let n = data.n() as f64;
    let r = data.residuals(candidate);
    let score = r.map(|v| loss.score(v));
    let grad = data.x().tr_mul(&score) / n;
    (0..data.p())
        .map(|j| {
            let w = weights.get(j);
            if candidate[j] != 0.0 {
                (w * candidate[j].signum() - grad[j]).abs()
            } else {
                (grad[j].abs() - w).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}
