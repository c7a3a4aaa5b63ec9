//! Monte Carlo scenarios comparing the oracle, lasso and LLA estimators, and
//! the asymptotic-normality diagnostic for the LLA estimator's nonzero part.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{MestError, Result};
use crate::exec::Execution;
use crate::losses::{gamma_sigma2, LossSpec};
use crate::metrics::{aggregate, estimation_error, prediction_error, selection_counts, ReplicateRecord};
use crate::penalties::DEFAULT_SCAD_A;
use crate::report::{MethodKind, TableRow};
use crate::simgen::{gen_dataset, gen_holdout, ScenarioConfig};
use crate::solver::{fit_oracle, SolveOptions};
use crate::tuning::{select_lambda_auto, PenaltyMethod, DEFAULT_GRID_POINTS, DEFAULT_MIN_RATIO};

/// Share of failed fits above which a scenario is aborted.
pub const FAILURE_BUDGET: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodSpec {
    pub kind: MethodKind,
    pub loss: LossSpec,
}

impl MethodSpec {
    /// LAD for the oracle, LLA and LAD-lasso; least squares for the LS lasso.
    pub fn standard(kind: MethodKind) -> Self {
        Self::with_loss(kind, LossSpec::lad())
    }

    /// `loss` applies to the oracle and LLA; the two lasso variants keep their
    /// defining losses.
    pub fn with_loss(kind: MethodKind, loss: LossSpec) -> Self {
        let loss = match kind {
            MethodKind::LassoLS => LossSpec::least_squares(),
            MethodKind::LassoLAD => LossSpec::lad(),
            MethodKind::Oracle | MethodKind::Lla => loss,
        };
        Self { kind, loss }
    }

    pub fn all_standard() -> Vec<Self> {
        MethodKind::ALL.iter().map(|k| Self::standard(*k)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarnessOptions {
    pub solve: SolveOptions,
    pub grid_points: usize,
    pub min_ratio: f64,
    pub scad_a: f64,
    pub exec: Execution,
    /// Fit on unit-RMS columns and map coefficients back.
    pub standardize: bool,
    /// Report prediction error on a fresh draw instead of in-sample.
    pub holdout_pe: bool,
}

impl Default for HarnessOptions {
    fn default() -> Self {
        Self {
            solve: SolveOptions::default(),
            grid_points: DEFAULT_GRID_POINTS,
            min_ratio: DEFAULT_MIN_RATIO,
            scad_a: DEFAULT_SCAD_A,
            exec: Execution::default(),
            standardize: false,
            holdout_pe: false,
        }
    }
}

/// A method's coefficient estimate for one dataset.
pub fn estimate(method: &MethodSpec, data: &Dataset, support: &[usize], opts: &HarnessOptions) -> Result<DVector<f64>> {
    if opts.standardize {
        let (scaled, scales) = data.standardized();
        let raw = estimate_raw(method, &scaled, support, opts)?;
        let mut beta = raw.component_div(&DVector::from_vec(scales));
        // scaling can push an exact zero's neighbours across zero_tol; keep zeros exact
        for (b, r) in beta.iter_mut().zip(raw.iter()) {
            if *r == 0.0 {
                *b = 0.0;
            }
        }
        Ok(beta)
    } else {
        estimate_raw(method, data, support, opts)
    }
}

fn estimate_raw(method: &MethodSpec, data: &Dataset, support: &[usize], opts: &HarnessOptions) -> Result<DVector<f64>> {
    let penalty = match method.kind {
        MethodKind::Oracle => {
            return Ok(fit_oracle(data, &method.loss, support, &opts.solve)?
                .into_converged()?
                .beta);
        }
        MethodKind::Lla => PenaltyMethod::Lla { a: opts.scad_a },
        MethodKind::LassoLS | MethodKind::LassoLAD => PenaltyMethod::Lasso,
    };
    let tuned = select_lambda_auto(
        data,
        &method.loss,
        penalty,
        opts.grid_points,
        opts.min_ratio,
        &opts.solve,
        Execution::Serial,
    )?;
    Ok(tuned.fit.beta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub rows: Vec<TableRow>,
    /// `records[m][r]`: method `m`, replicate `r`; `None` where the fit failed.
    pub records: Vec<Vec<Option<ReplicateRecord>>>,
    pub failed_fits: usize,
    pub total_fits: usize,
}

pub fn replicate_records(
    config: &ScenarioConfig,
    methods: &[MethodSpec],
    replicate: usize,
    opts: &HarnessOptions,
) -> Result<Vec<Result<ReplicateRecord>>> {
    let rep = gen_dataset(config, replicate)?;
    let holdout = if opts.holdout_pe {
        Some(gen_holdout(config, replicate)?)
    } else {
        None
    };
    Ok(methods
        .iter()
        .map(|m| {
            let beta = estimate(m, &rep.data, &rep.support, opts)?;
            let (c, ic) = selection_counts(&beta, &rep.support, opts.solve.zero_tol);
            Ok(ReplicateRecord {
                ee: estimation_error(&beta, &rep.beta0)?,
                pe: prediction_error(holdout.as_ref().unwrap_or(&rep.data), &beta)?,
                c,
                ic,
            })
        })
        .collect())
}

/// Runs every replicate of `config` for each method and aggregates one row
/// per method. Output depends only on `config` and `methods`.
pub fn run_scenario(config: &ScenarioConfig, methods: &[MethodSpec], opts: &HarnessOptions) -> Result<ScenarioOutcome> {
    config.validate()?;
    if methods.is_empty() {
        return Err(MestError::Empty("method list"));
    }
    if config.replicates == 0 {
        return Err(MestError::Empty("replicates"));
    }
    let per_replicate = opts
        .exec
        .map(config.replicates, |r| replicate_records(config, methods, r, opts));

    let mut records = vec![Vec::with_capacity(config.replicates); methods.len()];
    let mut failed = 0;
    for rep in per_replicate {
        for (m, outcome) in rep?.into_iter().enumerate() {
            match outcome {
                Ok(rec) => records[m].push(Some(rec)),
                Err(e) => {
                    log::warn!("{} failed on {}: {e}", methods[m].kind, config.id());
                    failed += 1;
                    records[m].push(None);
                }
            }
        }
    }
    let total = config.replicates * methods.len();
    if failed as f64 > FAILURE_BUDGET * total as f64 {
        return Err(MestError::FailureBudgetExceeded { failed, total });
    }

    let mut rows = Vec::with_capacity(methods.len());
    for (m, method) in methods.iter().enumerate() {
        let ok: Vec<ReplicateRecord> = records[m].iter().flatten().copied().collect();
        let s = aggregate(&ok, config.p, config.k())?;
        rows.push(TableRow {
            scenario: config.id(),
            n: config.n,
            p: config.p,
            k: config.k(),
            method: method.kind,
            ee: s.ee_median,
            pe: s.pe_median,
            c: s.c_mean,
            ic: s.ic_mean,
            cp: s.cp,
            replicates: s.replicates,
        });
    }
    Ok(ScenarioOutcome {
        rows,
        records,
        failed_fits: failed,
        total_fits: total,
    })
}

/// `s_n^2 = sigma^2 gamma^(-power) u' D11^{-1} u`.
pub fn sn_squared(sigma2: f64, gamma: f64, gamma_power: i32, d11: &DMatrix<f64>, u: &DVector<f64>) -> Result<f64> {
    if d11.nrows() != u.len() || !d11.is_square() {
        return Err(MestError::DimensionMismatch {
            expected: d11.nrows(),
            got: u.len(),
        });
    }
    let chol = d11
        .clone()
        .cholesky()
        .ok_or_else(|| MestError::InvalidData("D11 is not positive definite".into()))?;
    let quad = u.dot(&chol.solve(u));
    Ok(sigma2 * gamma.powi(-gamma_power) * quad)
}

/// One-sample Kolmogorov-Smirnov distance to the standard normal.
pub fn ks_statistic_normal(samples: &[f64]) -> Result<f64> {
    use statrs::distribution::{ContinuousCDF, Normal};
    if samples.is_empty() {
        return Err(MestError::Empty("ks samples"));
    }
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() as f64;
    Ok(s.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = std.cdf(v);
            (f - i as f64 / m).max((i as f64 + 1.0) / m - f)
        })
        .fold(0.0, f64::max))
}

/// Asymptotic 1% critical value of the KS statistic.
pub fn ks_critical_1pct(m: usize) -> f64 {
    1.63 / (m as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalityOptions {
    pub harness: HarnessOptions,
    pub loss: LossSpec,
    /// Exponent of `gamma` in `s_n^2`; 1 as stated for the theorem, 2 for the
    /// classical M-estimator sandwich.
    pub gamma_power: i32,
}

impl Default for NormalityOptions {
    fn default() -> Self {
        Self {
            harness: HarnessOptions::default(),
            loss: LossSpec::lad(),
            gamma_power: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalityReport {
    pub ks_stat: f64,
    pub critical_value: f64,
    /// Standardised statistics from replicates whose support was recovered.
    pub samples: Vec<f64>,
    /// Statistics from replicates with a wrong support, kept apart.
    pub unrecovered: Vec<f64>,
    pub gamma: f64,
    pub sigma2: f64,
    pub gamma_power: i32,
}

impl NormalityReport {
    pub fn passes(&self) -> bool {
        self.ks_stat < self.critical_value
    }
}

/// `sqrt(n) u'(beta_hat_(1) - beta0_(1)) / s_n` across replicates, compared to N(0,1).
pub fn normality_check(
    config: &ScenarioConfig,
    u: &DVector<f64>,
    replicates: usize,
    opts: &NormalityOptions,
) -> Result<NormalityReport> {
    let mut reports = normality_check_powers(config, u, replicates, opts, &[opts.gamma_power])?;
    Ok(reports.remove(0))
}

/// As [`normality_check`] for several exponents of `gamma` in `s_n^2`,
/// sharing one set of fits. `opts.gamma_power` is ignored.
pub fn normality_check_powers(
    config: &ScenarioConfig,
    u: &DVector<f64>,
    replicates: usize,
    opts: &NormalityOptions,
    powers: &[i32],
) -> Result<Vec<NormalityReport>> {
    if replicates == 0 {
        return Err(MestError::Empty("replicates"));
    }
    if powers.is_empty() {
        return Err(MestError::Empty("gamma powers"));
    }
    config.validate()?;
    let k = config.k();
    if u.len() != k {
        return Err(MestError::DimensionMismatch {
            expected: k,
            got: u.len(),
        });
    }
    let un = u.norm();
    if !(un > 0.0 && un <= 1.0 + 1e-12) {
        return Err(MestError::InvalidScenario(format!(
            "direction must satisfy 0 < |u| <= 1, got {un}"
        )));
    }
    if powers.iter().any(|p| !matches!(p, 1 | 2)) {
        return Err(MestError::InvalidScenario("gamma power must be 1 or 2".into()));
    }
    let f = gamma_sigma2(&opts.loss, config.dist)?;
    let method = MethodSpec::with_loss(MethodKind::Lla, opts.loss);
    let support = config.support();

    let stats: Vec<Result<(Vec<f64>, bool)>> = opts.harness.exec.map(replicates, |r| {
        let rep = gen_dataset(config, r)?;
        let beta = estimate(&method, &rep.data, &rep.support, &opts.harness)?;
        let recovered = (0..config.p).all(|j| (beta[j].abs() > opts.harness.solve.zero_tol) == (j < k));
        let x1 = rep.data.x().select_columns(&support);
        let n = config.n as f64;
        let d11 = x1.tr_mul(&x1) / n;
        let diff = DVector::from_fn(k, |j, _| beta[j] - rep.beta0[j]);
        let centred = n.sqrt() * u.dot(&diff);
        let per_power = powers
            .iter()
            .map(|&pw| Ok(centred / sn_squared(f.sigma2, f.gamma, pw, &d11, u)?.sqrt()))
            .collect::<Result<Vec<f64>>>()?;
        Ok((per_power, recovered))
    });
    let stats = stats.into_iter().collect::<Result<Vec<_>>>()?;

    powers
        .iter()
        .enumerate()
        .map(|(i, &gamma_power)| {
            let mut samples = Vec::with_capacity(replicates);
            let mut unrecovered = Vec::new();
            for (t, ok) in &stats {
                if *ok {
                    samples.push(t[i]);
                } else {
                    unrecovered.push(t[i]);
                }
            }
            Ok(NormalityReport {
                ks_stat: ks_statistic_normal(&samples)?,
                critical_value: ks_critical_1pct(samples.len()),
                samples,
                unrecovered,
                gamma: f.gamma,
                sigma2: f.sigma2,
                gamma_power,
            })
        })
        .collect()
}
