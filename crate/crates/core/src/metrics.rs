//! Per-replicate accuracy measures and their Monte Carlo summaries.

use nalgebra::DVector;

use crate::dataset::Dataset;
use crate::error::{MestError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateRecord {
    /// `||beta_hat - beta0||_2`
    pub ee: f64,
    /// `||y - X beta_hat||^2 / n`
    pub pe: f64,
    /// true zeros estimated as zero
    pub c: usize,
    /// true nonzeros estimated as zero
    pub ic: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsSummary {
    pub ee_median: f64,
    pub pe_median: f64,
    pub c_mean: f64,
    pub ic_mean: f64,
    /// `c_mean / (p - k)`; 1 when there are no true zeros.
    pub cp: f64,
    pub replicates: usize,
}

pub fn estimation_error(beta_hat: &DVector<f64>, beta0: &DVector<f64>) -> Result<f64> {
    if beta_hat.len() != beta0.len() {
        return Err(MestError::DimensionMismatch {
            expected: beta0.len(),
            got: beta_hat.len(),
        });
    }
    Ok((beta_hat - beta0).norm())
}

pub fn prediction_error(data: &Dataset, beta_hat: &DVector<f64>) -> Result<f64> {
    if beta_hat.len() != data.p() {
        return Err(MestError::DimensionMismatch {
            expected: data.p(),
            got: beta_hat.len(),
        });
    }
    Ok(data.residuals(beta_hat).norm_squared() / data.n() as f64)
}

/// `(c, ic)`: zeroed coefficients outside and inside the true support.
pub fn selection_counts(beta_hat: &DVector<f64>, support: &[usize], zero_tol: f64) -> (usize, usize) {
    let mut in_support = vec![false; beta_hat.len()];
    for &j in support {
        in_support[j] = true;
    }
    beta_hat
        .iter()
        .zip(in_support)
        .filter(|(b, _)| b.abs() <= zero_tol)
        .fold(
            (0, 0),
            |(c, ic), (_, inside)| if inside { (c, ic + 1) } else { (c + 1, ic) },
        )
}

/// Median with the even-count convention of averaging the central pair.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

pub fn aggregate(records: &[ReplicateRecord], p: usize, k: usize) -> Result<MetricsSummary> {
    if records.is_empty() {
        return Err(MestError::Empty("replicate records"));
    }
    let m = records.len() as f64;
    let ee: Vec<f64> = records.iter().map(|r| r.ee).collect();
    let pe: Vec<f64> = records.iter().map(|r| r.pe).collect();
    // integer sums keep the means independent of record order
    let c_total: usize = records.iter().map(|r| r.c).sum();
    let ic_total: usize = records.iter().map(|r| r.ic).sum();
    let c_mean = c_total as f64 / m;
    let zeros = p.saturating_sub(k);
    Ok(MetricsSummary {
        ee_median: median(&ee),
        pe_median: median(&pe),
        c_mean,
        ic_mean: ic_total as f64 / m,
        cp: if zeros == 0 { 1.0 } else { c_mean / zeros as f64 },
        replicates: records.len(),
    })
}
