//! Convex loss family: value, one-sided derivatives, proximal maps, and the
//! population score functionals used by the asymptotic-normality diagnostic.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{MestError, Result};
use crate::simgen::ErrorDist;

/// Loss kinds with their parameters.
///
/// `Lq` is normalised as `|r|^q / q`, so that `q = 1` is the absolute loss and
/// `q = 2` coincides with `LeastSquares` (`r^2 / 2`) and with the quadratic
/// branch of the Huber loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    Lad,
    Quantile { alpha: f64 },
    Huber { c: f64 },
    Lq { q: f64 },
    LeastSquares,
}

/// A validated loss. Construct through [`LossSpec::new`] or the named
/// constructors; the parameters are checked once and never again.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    kind: LossKind,
}

/// Closed interval `[lo, hi]` of one-sided derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubgradientInterval {
    pub lo: f64,
    pub hi: f64,
}

impl SubgradientInterval {
    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    /// Distance from `v` to the interval (zero inside).
    pub fn distance(&self, v: f64) -> f64 {
        if v < self.lo {
            self.lo - v
        } else if v > self.hi {
            v - self.hi
        } else {
            0.0
        }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }
}

impl LossSpec {
    pub fn new(kind: LossKind) -> Result<Self> {
        match kind {
            LossKind::Quantile { alpha } if !(alpha > 0.0 && alpha < 1.0) => Err(MestError::InvalidLoss(format!(
                "quantile level must lie in (0,1), got {alpha}"
            ))),
            LossKind::Huber { c } if !(c > 0.0 && c.is_finite()) => Err(MestError::InvalidLoss(format!(
                "huber threshold must be positive, got {c}"
            ))),
            LossKind::Lq { q } if !(1.0..=2.0).contains(&q) => Err(MestError::InvalidLoss(format!(
                "Lq exponent must lie in [1,2], got {q}"
            ))),
            _ => Ok(Self { kind }),
        }
    }

    pub fn lad() -> Self {
        Self { kind: LossKind::Lad }
    }

    pub fn least_squares() -> Self {
        Self {
            kind: LossKind::LeastSquares,
        }
    }

    pub fn quantile(alpha: f64) -> Result<Self> {
        Self::new(LossKind::Quantile { alpha })
    }

    pub fn huber(c: f64) -> Result<Self> {
        Self::new(LossKind::Huber { c })
    }

    pub fn lq(q: f64) -> Result<Self> {
        Self::new(LossKind::Lq { q })
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    /// Canonical form: `Lq(1)` behaves as LAD, `Lq(2)` as least squares.
    fn canonical(&self) -> LossKind {
        match self.kind {
            LossKind::Lq { q: 1.0 } => LossKind::Lad,
            LossKind::Lq { q: 2.0 } => LossKind::LeastSquares,
            k => k,
        }
    }

    /// True when the derivative jumps at zero (LAD, quantile, `Lq(1)`).
    pub fn has_kink(&self) -> bool {
        matches!(self.canonical(), LossKind::Lad | LossKind::Quantile { .. })
    }

    /// Left and right slopes at the kink of a piecewise-linear loss.
    pub(crate) fn kink_slopes(&self) -> Option<(f64, f64)> {
        match self.canonical() {
            LossKind::Lad => Some((-1.0, 1.0)),
            LossKind::Quantile { alpha } => Some((alpha - 1.0, alpha)),
            _ => None,
        }
    }

    /// Bound on `|phi|` over the real line, when finite.
    pub fn score_bound(&self) -> Option<f64> {
        match self.canonical() {
            LossKind::Lad => Some(1.0),
            LossKind::Quantile { alpha } => Some(alpha.max(1.0 - alpha)),
            LossKind::Huber { c } => Some(c),
            _ => None,
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        loss_value(self, r)
    }

    pub fn subgradient(&self, r: f64) -> SubgradientInterval {
        loss_subgradient(self, r)
    }

    /// One representative derivative: the midpoint of the subgradient
    /// interval. For LAD at zero this is 0, elsewhere it is `sign`.
    pub fn score(&self, r: f64) -> f64 {
        let s = loss_subgradient(self, r);
        0.5 * (s.lo + s.hi)
    }

    /// Second derivative where it exists; zero on the linear pieces.
    pub(crate) fn curvature(&self, r: f64) -> f64 {
        match self.canonical() {
            LossKind::Lad | LossKind::Quantile { .. } => 0.0,
            LossKind::Huber { c } => {
                if r.abs() <= c {
                    1.0
                } else {
                    0.0
                }
            }
            LossKind::LeastSquares => 1.0,
            LossKind::Lq { q } => {
                let a = r.abs().max(1e-12);
                ((q - 1.0) * a.powf(q - 2.0)).min(1e12)
            }
        }
    }

    pub fn prox(&self, v: f64, t: f64) -> f64 {
        loss_prox(self, v, t)
    }
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LossKind::Lad => write!(f, "lad"),
            LossKind::Quantile { alpha } => write!(f, "quantile:{alpha}"),
            LossKind::Huber { c } => write!(f, "huber:{c}"),
            LossKind::Lq { q } => write!(f, "lq:{q}"),
            LossKind::LeastSquares => write!(f, "ls"),
        }
    }
}

impl FromStr for LossSpec {
    type Err = MestError;

    /// Parses `lad`, `ls`, `huber:C`, `quantile:A`, `lq:Q`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s.as_str(), None),
        };
        let param = |what: &str| -> Result<f64> {
            let a = arg.ok_or_else(|| MestError::InvalidLoss(format!("{name} needs :{what}")))?;
            a.parse::<f64>()
                .map_err(|_| MestError::InvalidLoss(format!("cannot parse {what} from '{a}'")))
        };
        match name {
            "lad" | "l1" if arg.is_none() => Ok(Self::lad()),
            "ls" | "ols" if arg.is_none() => Ok(Self::least_squares()),
            "huber" => Self::huber(param("c")?),
            "quantile" => Self::quantile(param("alpha")?),
            "lq" => Self::lq(param("q")?),
            _ => Err(MestError::InvalidLoss(format!("unknown loss '{s}'"))),
        }
    }
}

pub fn loss_value(spec: &LossSpec, r: f64) -> f64 {
    match spec.canonical() {
        LossKind::Lad => r.abs(),
        LossKind::Quantile { alpha } => {
            if r >= 0.0 {
                alpha * r
            } else {
                (alpha - 1.0) * r
            }
        }
        LossKind::Huber { c } => {
            let a = r.abs();
            if a <= c {
                0.5 * r * r
            } else {
                c * a - 0.5 * c * c
            }
        }
        LossKind::Lq { q } => r.abs().powf(q) / q,
        LossKind::LeastSquares => 0.5 * r * r,
    }
}

pub fn loss_subgradient(spec: &LossSpec, r: f64) -> SubgradientInterval {
    match spec.canonical() {
        LossKind::Lad => {
            if r > 0.0 {
                SubgradientInterval::point(1.0)
            } else if r < 0.0 {
                SubgradientInterval::point(-1.0)
            } else {
                SubgradientInterval { lo: -1.0, hi: 1.0 }
            }
        }
        LossKind::Quantile { alpha } => {
            if r > 0.0 {
                SubgradientInterval::point(alpha)
            } else if r < 0.0 {
                SubgradientInterval::point(alpha - 1.0)
            } else {
                SubgradientInterval {
                    lo: alpha - 1.0,
                    hi: alpha,
                }
            }
        }
        LossKind::Huber { c } => SubgradientInterval::point(r.clamp(-c, c)),
        LossKind::Lq { q } => SubgradientInterval::point(r.signum() * r.abs().powf(q - 1.0)),
        LossKind::LeastSquares => SubgradientInterval::point(r),
    }
}

/// Soft-thresholding operator `sign(v) * max(|v| - t, 0)`.
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// `argmin_z t * rho(z) + (z - v)^2 / 2`.
pub fn loss_prox(spec: &LossSpec, v: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    match spec.canonical() {
        LossKind::Lad => soft_threshold(v, t),
        LossKind::Quantile { alpha } => {
            if v > t * alpha {
                v - t * alpha
            } else if v < -t * (1.0 - alpha) {
                v + t * (1.0 - alpha)
            } else {
                0.0
            }
        }
        LossKind::Huber { c } => {
            if v.abs() <= c * (1.0 + t) {
                v / (1.0 + t)
            } else {
                v - t * c * v.signum()
            }
        }
        LossKind::LeastSquares => v / (1.0 + t),
        LossKind::Lq { q } => lq_prox(q, v, t),
    }
}

/// Solves `t * a^(q-1) + a = |v|` for `a` in `[0, |v|]` by Newton steps kept
/// inside a shrinking bisection bracket.
fn lq_prox(q: f64, v: f64, t: f64) -> f64 {
    let target = v.abs();
    if target == 0.0 || t == 0.0 {
        return v;
    }
    let h = |a: f64| t * a.powf(q - 1.0) + a - target;
    let tol = 1e-12 * target.max(1.0);
    let (mut lo, mut hi) = (0.0_f64, target);
    let mut a = target / (1.0 + t);
    for _ in 0..200 {
        let ha = h(a);
        if ha.abs() <= tol {
            break;
        }
        if ha > 0.0 {
            hi = a;
        } else {
            lo = a;
        }
        let slope = t * (q - 1.0) * a.powf(q - 2.0) + 1.0;
        let newton = a - ha / slope;
        a = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * target {
            break;
        }
    }
    v.signum() * a
}

/// How a `(gamma, sigma^2)` pair was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionalSource {
    ClosedForm,
    MonteCarlo,
}

/// Slope `gamma` of `G(t) = E[phi(eps + t)]` at zero and `sigma^2 = E[phi(eps)^2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreFunctionals {
    pub gamma: f64,
    pub sigma2: f64,
    pub source: FunctionalSource,
}

pub const FUNCTIONAL_DRAWS: usize = 1_000_000;
const FUNCTIONAL_STEP: f64 = 1e-3;
const FUNCTIONAL_SEED: u64 = 0x5eed_9a33_a51e_0001;

/// Population functionals of the score under an error law.
pub fn gamma_sigma2(spec: &LossSpec, dist: ErrorDist) -> Result<ScoreFunctionals> {
    let f0 = dist.pdf(0.0);
    let cdf0 = dist.cdf(0.0);
    match spec.canonical() {
        LossKind::Lad => {
            let mean = 1.0 - 2.0 * cdf0;
            if mean.abs() > 1e-12 {
                return Err(MestError::NonCenteredScore(mean));
            }
            Ok(ScoreFunctionals {
                gamma: 2.0 * f0,
                sigma2: 1.0,
                source: FunctionalSource::ClosedForm,
            })
        }
        LossKind::Quantile { alpha } => {
            let mean = alpha - cdf0;
            if mean.abs() > 1e-12 {
                return Err(MestError::NonCenteredScore(mean));
            }
            Ok(ScoreFunctionals {
                gamma: f0,
                sigma2: alpha * alpha * (1.0 - cdf0) + (1.0 - alpha).powi(2) * cdf0,
                source: FunctionalSource::ClosedForm,
            })
        }
        LossKind::LeastSquares => Ok(ScoreFunctionals {
            gamma: 1.0,
            sigma2: dist.variance(),
            source: FunctionalSource::ClosedForm,
        }),
        LossKind::Huber { .. } | LossKind::Lq { .. } => {
            gamma_sigma2_monte_carlo(spec, dist, FUNCTIONAL_DRAWS, FUNCTIONAL_SEED)
        }
    }
}

/// Monte Carlo route: `sigma^2` by the sample second moment of the score and
/// `gamma` by a central difference of `G` on common random numbers.
pub fn gamma_sigma2_monte_carlo(spec: &LossSpec, dist: ErrorDist, draws: usize, seed: u64) -> Result<ScoreFunctionals> {
    if draws == 0 {
        return Err(MestError::Empty("monte carlo draws"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = FUNCTIONAL_STEP;
    let (mut sum, mut sum_sq, mut diff) = (0.0, 0.0, 0.0);
    for _ in 0..draws {
        let e = dist.sample(&mut rng);
        let s = spec.score(e);
        sum += s;
        sum_sq += s * s;
        diff += spec.score(e + h) - spec.score(e - h);
    }
    let m = draws as f64;
    let mean = sum / m;
    let sigma2 = sum_sq / m;
    let sd = (sigma2 - mean * mean).max(0.0).sqrt();
    if mean.abs() > 5.0 * sd / m.sqrt() + 1e-12 {
        return Err(MestError::NonCenteredScore(mean));
    }
    Ok(ScoreFunctionals {
        gamma: diff / (m * 2.0 * h),
        sigma2,
        source: FunctionalSource::MonteCarlo,
    })
}
