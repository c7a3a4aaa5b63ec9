//! Synthetic data for the variable-selection experiments: AR(1) Gaussian
//! designs, a sparse coefficient vector and three error laws.
//!
//! Every random quantity comes from a ChaCha8 stream seeded through
//! [`derive_seed`], a SplitMix64 finaliser. A replicate's data therefore depends
//! only on `(config.seed, replicate_index)`, never on thread scheduling.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{Continuous, ContinuousCDF, Normal, StudentsT};

use crate::dataset::Dataset;
use crate::error::{MestError, Result};

/// Error laws for the regression noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorDist {
    StdNormal,
    StudentT5,
    /// `0.9 N(0,1) + 0.1 N(0,9)`.
    NormalMixture,
}

const MIX_WEIGHT: f64 = 0.1;
const MIX_SD: f64 = 3.0;

impl ErrorDist {
    pub const ALL: [ErrorDist; 3] = [Self::StdNormal, Self::StudentT5, Self::NormalMixture];

    pub fn pdf(&self, x: f64) -> f64 {
        let std = Normal::new(0.0, 1.0).unwrap();
        match self {
            Self::StdNormal => std.pdf(x),
            Self::StudentT5 => StudentsT::new(0.0, 1.0, 5.0).unwrap().pdf(x),
            Self::NormalMixture => (1.0 - MIX_WEIGHT) * std.pdf(x) + MIX_WEIGHT * std.pdf(x / MIX_SD) / MIX_SD,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let std = Normal::new(0.0, 1.0).unwrap();
        match self {
            Self::StdNormal => std.cdf(x),
            Self::StudentT5 => StudentsT::new(0.0, 1.0, 5.0).unwrap().cdf(x),
            Self::NormalMixture => (1.0 - MIX_WEIGHT) * std.cdf(x) + MIX_WEIGHT * std.cdf(x / MIX_SD),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Self::StdNormal => 1.0,
            Self::StudentT5 => 5.0 / 3.0,
            Self::NormalMixture => (1.0 - MIX_WEIGHT) + MIX_WEIGHT * MIX_SD * MIX_SD,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::StdNormal => rng.sample(StandardNormal),
            Self::StudentT5 => {
                let z: f64 = rng.sample(StandardNormal);
                let chi2: f64 = (0..5)
                    .map(|_| {
                        let g: f64 = rng.sample(StandardNormal);
                        g * g
                    })
                    .sum();
                z / (chi2 / 5.0).sqrt()
            }
            Self::NormalMixture => {
                let wide = rng.random::<f64>() < MIX_WEIGHT;
                let z: f64 = rng.sample(StandardNormal);
                if wide {
                    MIX_SD * z
                } else {
                    z
                }
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::StdNormal => "normal",
            Self::StudentT5 => "t5",
            Self::NormalMixture => "mixture",
        }
    }
}

impl fmt::Display for ErrorDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ErrorDist {
    type Err = MestError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" | "n01" | "gaussian" => Ok(Self::StdNormal),
            "t5" | "t" => Ok(Self::StudentT5),
            "mixture" | "mix" => Ok(Self::NormalMixture),
            other => Err(MestError::InvalidScenario(format!("unknown error law '{other}'"))),
        }
    }
}

/// Dimension rule `p = [2 sqrt(n)]`, read as round-half-up (200 -> 28,
/// 500 -> 45, 700 -> 53).
pub fn default_dimension(n: usize) -> usize {
    (2.0 * (n as f64).sqrt() + 0.5).floor() as usize
}

/// Nonzero part of the true coefficient vector.
pub const DEFAULT_BETA_NONZERO: [f64; 4] = [-2.0, 2.5, 3.0, -1.0];

/// One Monte Carlo scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub beta_nonzero: Vec<f64>,
    pub dist: ErrorDist,
    pub seed: u64,
    pub replicates: usize,
    /// Forces all errors to zero, so that `y = X beta0` exactly.
    pub noise_free: bool,
}

impl ScenarioConfig {
    pub fn new(n: usize, dist: ErrorDist, seed: u64) -> Self {
        Self {
            n,
            p: default_dimension(n),
            rho: 0.5,
            beta_nonzero: DEFAULT_BETA_NONZERO.to_vec(),
            dist,
            seed,
            replicates: 500,
            noise_free: false,
        }
    }

    pub fn with_replicates(mut self, replicates: usize) -> Self {
        self.replicates = replicates;
        self
    }

    pub fn k(&self) -> usize {
        self.beta_nonzero.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(MestError::InvalidScenario("n must be at least 1".into()));
        }
        if self.p < self.k() || self.p == 0 {
            return Err(MestError::InvalidScenario(format!(
                "p = {} is smaller than the number of nonzero coefficients {}",
                self.p,
                self.k()
            )));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(MestError::InvalidScenario(format!(
                "|rho| must be < 1, got {}",
                self.rho
            )));
        }
        if self.beta_nonzero.iter().any(|b| !b.is_finite()) {
            return Err(MestError::InvalidScenario("non-finite coefficient".into()));
        }
        Ok(())
    }

    /// Stable identifier such as `normal_n200`.
    pub fn id(&self) -> String {
        format!("{}_n{}", self.dist.label(), self.n)
    }

    /// Full-length true coefficient vector.
    pub fn beta0(&self) -> DVector<f64> {
        let mut b = DVector::zeros(self.p);
        for (j, v) in self.beta_nonzero.iter().enumerate() {
            b[j] = *v;
        }
        b
    }

    /// Zero-based indices of the true nonzero coefficients.
    pub fn support(&self) -> Vec<usize> {
        (0..self.k()).collect()
    }
}

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Substream seed for a numbered child of `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix64(seed ^ mix64(index))
}

const DESIGN_STREAM: u64 = 0xd5;
const ERROR_STREAM: u64 = 0xe7;
const HOLDOUT_STREAM: u64 = 0x40;

/// `Sigma_ij = rho^|i-j|`.
pub fn ar1_covariance(p: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| rho.powi(i.abs_diff(j) as i32))
}

/// `n` rows drawn i.i.d. from `N(0, Sigma_AR1)` through the lower Cholesky factor.
pub fn gen_design(n: usize, p: usize, rho: f64, seed: u64) -> DMatrix<f64> {
    let chol = ar1_covariance(p, rho)
        .cholesky()
        .expect("AR(1) covariance with |rho| < 1 is positive definite");
    let lower = chol.l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DMatrix::from_row_iterator(n, p, (0..n * p).map(|_| rng.sample::<f64, _>(StandardNormal)));
    z * lower.transpose()
}

pub fn gen_errors(n: usize, dist: ErrorDist, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_iterator(n, (0..n).map(|_| dist.sample(&mut rng)))
}

/// One generated replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct Replicate {
    pub data: Dataset,
    pub beta0: DVector<f64>,
    pub support: Vec<usize>,
}

pub fn replicate_seed(config: &ScenarioConfig, replicate_index: usize) -> u64 {
    derive_seed(config.seed, replicate_index as u64)
}

/// `y = X beta0 + eps` for one replicate.
pub fn gen_dataset(config: &ScenarioConfig, replicate_index: usize) -> Result<Replicate> {
    config.validate()?;
    let sub = replicate_seed(config, replicate_index);
    let x = gen_design(config.n, config.p, config.rho, derive_seed(sub, DESIGN_STREAM));
    let beta0 = config.beta0();
    let mut y = &x * &beta0;
    if !config.noise_free {
        y += gen_errors(config.n, config.dist, derive_seed(sub, ERROR_STREAM));
    }
    Ok(Replicate {
        data: Dataset::new(x, y)?,
        beta0,
        support: config.support(),
    })
}

/// A fresh draw from the same law as replicate `replicate_index`, for
/// out-of-sample prediction error.
pub fn gen_holdout(config: &ScenarioConfig, replicate_index: usize) -> Result<Dataset> {
    let sub = derive_seed(replicate_seed(config, replicate_index), HOLDOUT_STREAM);
    let held = ScenarioConfig {
        seed: sub,
        ..config.clone()
    };
    Ok(gen_dataset(&held, 0)?.data)
}
