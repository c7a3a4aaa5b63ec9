//! Exact minimisation for piecewise-linear losses by descent along the edges
//! of the objective's polyhedral graph.
//!
//! A vertex is fixed by `p` active hyperplanes, each either a vanishing
//! residual `y_i = x_i' beta` or a vanishing coefficient `beta_j = 0`. From a
//! vertex the steepest edge leaving one hyperplane is followed to the exact
//! minimiser along that edge (a weighted-median search over breakpoints),
//! where a new hyperplane becomes active.
//!
//! Kinks through the vertex that are not in the basis are given a side, so
//! the basis edges decide optimality exactly: when none descends, the basis
//! multipliers and the assigned sides form a dual certificate. A kink crossed
//! against its side stops the line search at `t = 0`, which is a degenerate
//! pivot. Runs of degenerate pivots use Bland's rule so they cannot cycle.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::losses::LossSpec;
use crate::penalties::PenaltyWeights;

const REFACTOR_EVERY: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Hyperplane {
    Residual(usize),
    Coefficient(usize),
}

struct Problem<'a> {
    data: &'a Dataset,
    weights: &'a PenaltyWeights,
    /// slope of rho right of the kink, divided by n
    right: f64,
    /// minus the slope left of the kink, divided by n
    left: f64,
}

impl Problem<'_> {
    fn row(&self, h: Hyperplane, out: &mut [f64]) {
        match h {
            Hyperplane::Residual(i) => {
                for (j, o) in out.iter_mut().enumerate() {
                    *o = self.data.x()[(i, j)];
                }
            }
            Hyperplane::Coefficient(j) => {
                out.fill(0.0);
                out[j] = 1.0;
            }
        }
    }

    fn rhs(&self, h: Hyperplane) -> f64 {
        match h {
            Hyperplane::Residual(i) => self.data.y()[i],
            Hyperplane::Coefficient(_) => 0.0,
        }
    }

    /// Slope of the loss term `rho(-s t)/n` for small `t > 0`, with `s = x_i'd`.
    fn residual_slope(&self, s: f64) -> f64 {
        if s < 0.0 {
            -s * self.right
        } else {
            s * self.left
        }
    }
}

/// Current vertex as seen by the line search.
struct Vertex<'a> {
    beta: &'a DVector<f64>,
    resid: &'a DVector<f64>,
    active_row: &'a [bool],
    active_coef: &'a [bool],
    /// assumed sign of each residual and coefficient, used when it is zero
    row_side: &'a [f64],
    coef_side: &'a [f64],
    r_tol: f64,
    b_tol: f64,
}

impl Problem<'_> {
    /// Kinks met along `beta + t d`, `t >= 0`, with the slope increase at each.
    fn breakpoints(&self, at: &Vertex<'_>, d: &DVector<f64>, xd: &DVector<f64>) -> Vec<(f64, f64, Hyperplane)> {
        let mut breaks = Vec::new();
        for i in 0..xd.len() {
            if at.active_row[i] || xd[i] == 0.0 {
                continue;
            }
            let jump = xd[i].abs() * (self.right + self.left);
            if at.resid[i].abs() <= at.r_tol {
                // the residual moves by -t xd
                if xd[i] * at.row_side[i] > 0.0 {
                    breaks.push((0.0, jump, Hyperplane::Residual(i)));
                }
                continue;
            }
            let t = at.resid[i] / xd[i];
            if t > 0.0 {
                breaks.push((t, jump, Hyperplane::Residual(i)));
            }
        }
        for j in 0..d.len() {
            let w = self.weights.get(j);
            if at.active_coef[j] || d[j] == 0.0 || w == 0.0 {
                continue;
            }
            let jump = 2.0 * w * d[j].abs();
            if at.beta[j].abs() <= at.b_tol {
                if d[j] * at.coef_side[j] < 0.0 {
                    breaks.push((0.0, jump, Hyperplane::Coefficient(j)));
                }
                continue;
            }
            let t = -at.beta[j] / d[j];
            if t > 0.0 {
                breaks.push((t, jump, Hyperplane::Coefficient(j)));
            }
        }
        breaks.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        breaks
    }

    /// Exact minimiser along the edge: the first breakpoint where the slope,
    /// starting at `slope0 < 0`, turns non-negative.
    fn line_search(
        &self,
        at: &Vertex<'_>,
        d: &DVector<f64>,
        xd: &DVector<f64>,
        slope0: f64,
    ) -> Option<(f64, Hyperplane)> {
        let mut slope = slope0;
        for (t, jump, plane) in self.breakpoints(at, d, xd) {
            slope += jump;
            if slope >= 0.0 {
                return Some((t, plane));
            }
        }
        None
    }

    fn first_break(&self, at: &Vertex<'_>, d: &DVector<f64>, xd: &DVector<f64>) -> Option<(f64, Hyperplane)> {
        self.breakpoints(at, d, xd).first().map(|&(t, _, plane)| (t, plane))
    }
}

/// Initial active set: zero coefficients of `beta` and the residuals closest
/// to zero.
fn guess(data: &Dataset, beta: &DVector<f64>, z: &DVector<f64>, zero_tol: f64) -> Vec<Hyperplane> {
    let mut active: Vec<Hyperplane> = (0..data.p())
        .filter(|&j| beta[j].abs() <= zero_tol)
        .map(Hyperplane::Coefficient)
        .collect();
    let need = data.p() - active.len();
    if need > data.n() {
        return (0..data.p()).map(Hyperplane::Coefficient).collect();
    }
    let r = data.residuals(beta);
    let mut order: Vec<usize> = (0..data.n()).collect();
    order.sort_by(|&a, &b| {
        (z[a] != 0.0)
            .cmp(&(z[b] != 0.0))
            .then(r[a].abs().total_cmp(&r[b].abs()))
            .then(a.cmp(&b))
    });
    active.extend(order.into_iter().take(need).map(Hyperplane::Residual));
    active
}

/// Minimiser of the penalised objective for a kinked loss, warm-started from
/// the splitting iterate. `None` when the loss has no kink or on numerical
/// breakdown.
pub(super) fn descend(
    data: &Dataset,
    loss: &LossSpec,
    weights: &PenaltyWeights,
    beta: &DVector<f64>,
    z: &DVector<f64>,
    zero_tol: f64,
) -> Option<DVector<f64>> {
    let (l, r) = loss.kink_slopes()?;
    let n = data.n() as f64;
    let problem = Problem {
        data,
        weights,
        right: r / n,
        left: -l / n,
    };
    let start = guess(data, beta, z, zero_tol);
    run(&problem, start.clone()).or_else(|| {
        let origin: Vec<Hyperplane> = (0..data.p()).map(Hyperplane::Coefficient).collect();
        if start == origin {
            None
        } else {
            run(&problem, origin)
        }
    })
}

fn run(problem: &Problem<'_>, mut active: Vec<Hyperplane>) -> Option<DVector<f64>> {
    let data = problem.data;
    let (n, p) = (data.n(), data.p());
    let x = data.x();
    let max_pivots = 20 * (n + p);
    let r_tol = 1e-12 * (1.0 + data.y().amax());
    let mut row = vec![0.0; p];
    let mut is_active_row = vec![false; n];
    let mut is_active_coef = vec![false; p];
    let mut inv = DMatrix::zeros(p, p);
    let mut beta = DVector::zeros(p);
    let mut resid = DVector::zeros(n);
    let mut row_side = vec![1.0; n];
    let mut coef_side = vec![1.0; p];
    // loss slope assigned to each row and the matching part of the gradient
    let mut g = DVector::zeros(n);
    let mut grad_loss = DVector::zeros(p);
    let mut degenerate = false;

    for pivot in 0..max_pivots {
        is_active_row.fill(false);
        is_active_coef.fill(false);
        for h in &active {
            match *h {
                Hyperplane::Residual(i) => is_active_row[i] = true,
                Hyperplane::Coefficient(j) => is_active_coef[j] = true,
            }
        }
        if pivot % REFACTOR_EVERY == 0 {
            // a periodic fresh start bounds the drift of the incremental updates
            let mut a = DMatrix::zeros(p, p);
            for (k, h) in active.iter().enumerate() {
                problem.row(*h, &mut row);
                for j in 0..p {
                    a[(k, j)] = row[j];
                }
            }
            inv = a.try_inverse()?;
            let b = DVector::from_fn(p, |k, _| problem.rhs(active[k]));
            beta = &inv * &b;
            for j in 0..p {
                if is_active_coef[j] {
                    beta[j] = 0.0;
                }
            }
            if beta.iter().any(|v| !v.is_finite()) {
                return None;
            }
            resid = data.residuals(&beta);
            g.fill(0.0);
            grad_loss.fill(0.0);
        }

        for i in 0..n {
            if !is_active_row[i] && resid[i].abs() > r_tol {
                row_side[i] = resid[i].signum();
            }
            let target = if is_active_row[i] {
                0.0
            } else if row_side[i] > 0.0 {
                -problem.right
            } else {
                problem.left
            };
            let delta = target - g[i];
            if delta != 0.0 {
                for j in 0..p {
                    grad_loss[j] += delta * x[(i, j)];
                }
                g[i] = target;
            }
        }
        let b_tol = 1e-13 * (1.0 + beta.amax());
        let mut v = grad_loss.clone();
        for j in 0..p {
            if is_active_coef[j] {
                continue;
            }
            if beta[j].abs() > b_tol {
                coef_side[j] = beta[j].signum();
            }
            v[j] += problem.weights.get(j) * coef_side[j];
        }

        // edge h in direction sigma: d = sigma * inv[:, h]
        let pi = inv.tr_mul(&v);
        let scale = 1.0 + v.amax() + problem.right + problem.left;
        let flat = 1e-13 * scale;
        let mut edges = Vec::with_capacity(2 * p);
        for (h, plane) in active.iter().enumerate() {
            for sigma in [1.0, -1.0] {
                let own = match *plane {
                    Hyperplane::Residual(_) => problem.residual_slope(sigma),
                    Hyperplane::Coefficient(j) => problem.weights.get(j),
                };
                edges.push((sigma * pi[h] + own, h, sigma));
            }
        }
        let descending = edges.iter().filter(|e| e.0 < -flat);
        let best = if degenerate {
            descending.min_by_key(|e| active[e.1])
        } else {
            descending.min_by(|a, b| a.0.total_cmp(&b.0))
        };
        let state = Vertex {
            beta: &beta,
            resid: &resid,
            active_row: &is_active_row,
            active_coef: &is_active_coef,
            row_side: &row_side,
            coef_side: &coef_side,
            r_tol,
            b_tol,
        };
        let (leave, sigma, d, xd, t, entering) = if let Some(&(slope0, leave, sigma)) = best {
            let d = inv.column(leave) * sigma;
            let xd = x * &d;
            // an unbounded edge cannot occur for a loss bounded below unless
            // the design is degenerate
            let (t, entering) = problem.line_search(&state, &d, &xd, slope0)?;
            (leave, sigma, d, xd, t, entering)
        } else {
            // optimal: among tied minimisers prefer fewer nonzero coefficients,
            // following flat edges that end on a coefficient hyperplane and
            // leave every other zero coefficient at zero
            let mut sparser = None;
            for &(slope, h, sigma) in &edges {
                if slope > flat || !matches!(active[h], Hyperplane::Residual(_)) {
                    continue;
                }
                let d = inv.column(h) * sigma;
                if (0..p).any(|j| !is_active_coef[j] && beta[j].abs() <= b_tol && d[j] != 0.0) {
                    continue;
                }
                let xd = x * &d;
                if let Some((t, plane @ Hyperplane::Coefficient(_))) = problem.first_break(&state, &d, &xd) {
                    if t > 0.0 {
                        sparser = Some((h, sigma, d, xd, t, plane));
                        break;
                    }
                }
            }
            match sparser {
                Some(step) => step,
                None => return Some(beta),
            }
        };
        degenerate = t == 0.0;

        beta.axpy(t, &d, 1.0);
        resid.axpy(-t, &xd, 1.0);
        match entering {
            Hyperplane::Residual(i) => resid[i] = 0.0,
            Hyperplane::Coefficient(j) => beta[j] = 0.0,
        }
        // the leaving hyperplane's residual or coefficient moves to one side
        match active[leave] {
            Hyperplane::Residual(i) => row_side[i] = -sigma,
            Hyperplane::Coefficient(j) => coef_side[j] = sigma,
        }

        // rank-one update of the inverse for the replaced row
        problem.row(entering, &mut row);
        let col = inv.column(leave).clone_owned();
        let a_col: f64 = row.iter().zip(col.iter()).map(|(a, c)| a * c).sum();
        if a_col.abs() < 1e-14 {
            return None;
        }
        let row_inv = DVector::from_fn(p, |k, _| (0..p).map(|j| row[j] * inv[(j, k)]).sum::<f64>());
        for k in 0..p {
            let coef = if k == leave {
                (row_inv[k] - 1.0) / a_col
            } else {
                row_inv[k] / a_col
            };
            if coef != 0.0 {
                inv.column_mut(k).axpy(-coef, &col, 1.0);
            }
        }
        active[leave] = entering;
    }
    None
}
