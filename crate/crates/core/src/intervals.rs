//! Interval families for a binomial proportion.
//!
//! Every family is materialized as a table of limits for `k = 0..=n`. The
//! Wald family additionally exposes the two roots of its boundary quadratic
//! `(p - k/n)^2 = theta (k/n)(1 - k/n)` on the count scale: for `p` in
//! `(0, 1)`, count `k` is covered exactly when
//! `t_minus_count(p) <= k <= t_plus_count(p)`.

use crate::binom_core::{upper_tail_quantile, Probability, TrialCount};
use crate::error::{Error, Result};

/// Parameters of one Wald analysis: `n`, the nominal non-coverage `delta`,
/// the critical value `z` and `theta = z^2 / n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalSpec {
    pub n: TrialCount,
    pub delta: f64,
    pub z: f64,
    pub theta: f64,
    /// `theta < 3`, under which the Wald limits are strictly increasing in `k`.
    pub theorem_valid: bool,
}

impl IntervalSpec {
    /// `z^2 / 3`; the exact-minimum formula needs `n` above this.
    pub fn min_trials_bound(&self) -> f64 {
        self.z * self.z / 3.0
    }

    pub(crate) fn require_theorem(&self) -> Result<()> {
        if self.theorem_valid {
            Ok(())
        } else {
            Err(Error::Precondition {
                n: self.n.get(),
                theta: self.theta,
                bound: self.min_trials_bound(),
            })
        }
    }

    fn check_count(&self, k: i64) -> Result<u64> {
        let n = self.n.get();
        if k < 0 || k as u64 > n {
            return Err(Error::Domain(format!("count k = {k} outside 0..={n}")));
        }
        Ok(k as u64)
    }

    fn wald_half_width(&self, k: u64) -> f64 {
        let n = self.n.get();
        let nf = n as f64;
        // k(n - k) is symmetric in k <-> n - k, so L(k) = 1 - U(n - k).
        self.z * ((k * (n - k)) as f64 / (nf * nf * nf)).sqrt()
    }
}

pub fn make_spec(n: TrialCount, delta: f64) -> Result<IntervalSpec> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let z = upper_tail_quantile(delta / 2.0)?;
    let theta = z * z / n.get() as f64;
    Ok(IntervalSpec {
        n,
        delta,
        z,
        theta,
        theorem_valid: theta < 3.0,
    })
}

/// Wald lower limit `k/n - z sqrt((k/n)(1 - k/n)/n)`. Not clipped to `[0, 1]`.
pub fn wald_lower(spec: &IntervalSpec, k: i64) -> Result<f64> {
    let k = spec.check_count(k)?;
    Ok(k as f64 / spec.n.get() as f64 - spec.wald_half_width(k))
}

/// Wald upper limit `k/n + z sqrt((k/n)(1 - k/n)/n)`. Not clipped to `[0, 1]`.
pub fn wald_upper(spec: &IntervalSpec, k: i64) -> Result<f64> {
    let k = spec.check_count(k)?;
    Ok(k as f64 / spec.n.get() as f64 + spec.wald_half_width(k))
}

fn surd(theta: f64, p: f64) -> f64 {
    (theta * (theta + 4.0 * p * (1.0 - p))).sqrt()
}

/// Smaller root of the boundary quadratic, on the count scale `[0, n]`.
pub fn t_minus_count(spec: &IntervalSpec, p: Probability) -> f64 {
    let p = p.get();
    let theta = spec.theta;
    // Conjugate of (2p + theta - surd) / (2(1 + theta)); no cancellation near p = 0.
    spec.n.get() as f64 * 2.0 * p * p / (2.0 * p + theta + surd(theta, p))
}

/// Larger root of the boundary quadratic, on the count scale `[0, n]`.
pub fn t_plus_count(spec: &IntervalSpec, p: Probability) -> f64 {
    let p = p.get();
    let theta = spec.theta;
    spec.n.get() as f64 * (2.0 * p + theta + surd(theta, p)) / (2.0 * (1.0 + theta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Lower,
    Upper,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Lower => "lower",
            Side::Upper => "upper",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    Wald,
    Wilson,
    AgrestiCoull,
    Custom,
}

impl FamilyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FamilyKind::Wald => "wald",
            FamilyKind::Wilson => "wilson",
            FamilyKind::AgrestiCoull => "agresti-coull",
            FamilyKind::Custom => "custom",
        }
    }
}

/// Result of [`verify_monotone`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonotoneCheck {
    pub monotone: bool,
    /// Smallest `k` at which `lower` or `upper` fails to increase from `k` to `k + 1`.
    pub first_violation: Option<usize>,
}

/// A materialized map `k -> [lower(k), upper(k)]` for `k = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalFamily {
    name: String,
    kind: FamilyKind,
    n: TrialCount,
    lower: Vec<f64>,
    upper: Vec<f64>,
    monotone_lower: bool,
    monotone_upper: bool,
}

impl IntervalFamily {
    /// Builds a family from explicit limit tables of equal length `n + 1`.
    /// Monotonicity is measured, not assumed.
    pub fn from_limits(name: impl Into<String>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        Self::build(name.into(), FamilyKind::Custom, lower, upper)
    }

    fn build(name: String, kind: FamilyKind, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.len() < 2 {
            return Err(Error::Domain(format!(
                "limit tables must have equal length n + 1 >= 2 (got {} and {})",
                lower.len(),
                upper.len()
            )));
        }
        for (k, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::Domain(format!(
                    "invalid interval at k = {k}: [{lo}, {hi}]"
                )));
            }
        }
        let n = TrialCount::new(lower.len() as u64 - 1)?;
        let monotone_lower = first_non_increase(&lower).is_none();
        let monotone_upper = first_non_increase(&upper).is_none();
        Ok(Self {
            name,
            kind,
            n,
            lower,
            upper,
            monotone_lower,
            monotone_upper,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn n(&self) -> TrialCount {
        self.n
    }

    pub fn lower(&self, k: usize) -> f64 {
        self.lower[k]
    }

    pub fn upper(&self, k: usize) -> f64 {
        self.upper[k]
    }

    pub fn lower_limits(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper_limits(&self) -> &[f64] {
        &self.upper
    }

    pub fn monotone_lower(&self) -> bool {
        self.monotone_lower
    }

    pub fn monotone_upper(&self) -> bool {
        self.monotone_upper
    }

    pub fn is_monotone(&self) -> bool {
        self.monotone_lower && self.monotone_upper
    }

    pub fn limit(&self, k: usize, side: Side) -> f64 {
        match side {
            Side::Lower => self.lower[k],
            Side::Upper => self.upper[k],
        }
    }

    /// All limits strictly inside `(0, 1)` with their provenance, sorted by
    /// value, then `k`, then lower before upper.
    pub fn breakpoints(&self) -> Vec<(f64, usize, Side)> {
        let mut out: Vec<(f64, usize, Side)> = Vec::new();
        for k in 0..self.lower.len() {
            for side in [Side::Lower, Side::Upper] {
                let v = self.limit(k, side);
                if v > 0.0 && v < 1.0 {
                    out.push((v, k, side));
                }
            }
        }
        out.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        out
    }
}

/// First `k` where the limit sequence, clipped to `[0, 1]`, fails to increase.
/// Ties are allowed only at the clip values 0 and 1: raw limits outside
/// `[0, 1]` never act as breakpoints, so only their position relative to the
/// unit interval matters.
fn first_non_increase(values: &[f64]) -> Option<usize> {
    values.windows(2).position(|w| {
        let (a, b) = (w[0].clamp(0.0, 1.0), w[1].clamp(0.0, 1.0));
        b < a || (b == a && a > 0.0 && a < 1.0)
    })
}

/// Checks that both limit sequences increase strictly inside `(0, 1)` and
/// never decrease once clipped to `[0, 1]`. Ties inside `(0, 1)` count as
/// violations. The raw Wald lower limit dips below zero at `k = 1` while
/// `L(0) = 0`; clipping is what makes the limits monotone in the sense that
/// matters for coverage on `(0, 1)`.
pub fn verify_monotone(family: &IntervalFamily) -> MonotoneCheck {
    let first = match (
        first_non_increase(&family.lower),
        first_non_increase(&family.upper),
    ) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    MonotoneCheck {
        monotone: first.is_none(),
        first_violation: first,
    }
}

pub fn make_wald_family(spec: &IntervalSpec) -> IntervalFamily {
    let n = spec.n.get() as i64;
    let lower = (0..=n)
        .map(|k| wald_lower(spec, k).expect("k in range"))
        .collect();
    let upper = (0..=n)
        .map(|k| wald_upper(spec, k).expect("k in range"))
        .collect();
    IntervalFamily::build("wald".into(), FamilyKind::Wald, lower, upper)
        .expect("Wald limits are finite and ordered")
}

/// Score (Wilson) interval. The lower limit is evaluated as
/// `x^2 / (x + theta/2 + sqrt(theta x (1 - x) + theta^2 / 4))`, which is the
/// textbook form after rationalizing; the upper limit uses the reflection
/// `upper(k) = 1 - lower(n - k)`.
pub fn make_wilson_family(spec: &IntervalSpec) -> IntervalFamily {
    let n = spec.n.get();
    let nf = n as f64;
    let theta = spec.theta;
    let lower_at = |k: u64| {
        let x = k as f64 / nf;
        let center = x + theta / 2.0;
        let half = (theta * x * (1.0 - x) + theta * theta / 4.0).sqrt();
        x * x / (center + half)
    };
    let lower: Vec<f64> = (0..=n).map(lower_at).collect();
    let upper: Vec<f64> = (0..=n).map(|k| 1.0 - lower_at(n - k)).collect();
    IntervalFamily::build("wilson".into(), FamilyKind::Wilson, lower, upper)
        .expect("Wilson limits are finite and ordered")
}

/// Agresti-Coull: the Wald form applied to `k + z^2/2` successes out of `n + z^2`.
pub fn make_agresti_coull_family(spec: &IntervalSpec) -> IntervalFamily {
    let n = spec.n.get();
    let z2 = spec.z * spec.z;
    let adjusted_n = n as f64 + z2;
    let (lower, upper): (Vec<f64>, Vec<f64>) = (0..=n)
        .map(|k| {
            let center = (k as f64 + z2 / 2.0) / adjusted_n;
            let half = spec.z * (center * (1.0 - center) / adjusted_n).sqrt();
            (center - half, center + half)
        })
        .unzip();
    IntervalFamily::build(
        "agresti-coull".into(),
        FamilyKind::AgrestiCoull,
        lower,
        upper,
    )
    .expect("Agresti-Coull limits are finite and ordered")
}
