//! Coverage probability of interval families and exact minimum coverage.
//!
//! For a family whose limits are strictly increasing in `k`, the set of
//! counts whose interval covers `p` (the acceptance set) is a contiguous
//! range `[a, b]`, and it only changes when `p` crosses a limit value
//! `lower(k)` or `upper(k)` in `(0, 1)`, a breakpoint. Between two
//! consecutive breakpoints the coverage is `Pr{a <= K <= b | p}` for a fixed
//! range, which is unimodal in `p`, so its smallest values on a piece sit at
//! the piece ends. Minimizing over the breakpoints with the acceptance set
//! taken just below, at and just above each breakpoint is therefore exact for
//! the pieces bounded by two breakpoints. That argument is an engineering one;
//! [`grid_oracle_min`] checks it numerically.
//!
//! The two outermost pieces `(0, first breakpoint)` and `(last breakpoint, 1)`
//! are bounded by a breakpoint on one side only. Their limits at that
//! breakpoint are evaluated, their far ends are not. For the Wald interval the
//! interval of `k = 0` is the single point `{0}`, so coverage tends to zero as
//! `p -> 0+` (and symmetrically as `p -> 1-`). The minima computed by
//! [`min_coverage_theorem1`] and [`min_coverage_boundary_scan`] are therefore
//! minima over `[first breakpoint, last breakpoint]`, one-sided limits
//! included; over all of `(0, 1)` the Wald infimum is zero.
//!
//! For the Wald family [`min_coverage_theorem1`] computes the same quantity
//! from closed-form candidates: at `p = L(k)` the acceptance set just below is
//! `[ceil(T-), k - 1]` and at `p = U(k)` the set just above is
//! `[k + 1, floor(T+)]`, where `T-` and `T+` are the count-scale roots of the
//! boundary quadratic. The open-endpoint variant uses the sets at the
//! breakpoint itself.

use crate::binom_core::{binom_range_prob, log_binom_pmf, neumaier_sum, Probability, TrialCount};
use crate::error::{Error, Result};
use crate::intervals::{
    t_minus_count, t_plus_count, verify_monotone, wald_lower, wald_upper, IntervalFamily,
    IntervalSpec, Side,
};
use rand::SeedableRng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

/// Whether an interval `[L, U]` covers `p` with `L <= p <= U` (closed) or
/// `L < p < U` (open).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EndpointRule {
    Closed,
    Open,
}

impl EndpointRule {
    pub fn as_str(self) -> &'static str {
        match self {
            EndpointRule::Closed => "closed",
            EndpointRule::Open => "open",
        }
    }

    /// The closed-variant value is an infimum that need not be attained.
    pub fn statistic(self) -> &'static str {
        match self {
            EndpointRule::Closed => "infimum",
            EndpointRule::Open => "minimum",
        }
    }
}

/// Which acceptance set was evaluated at a breakpoint `p*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Approach {
    /// The set in force for `p` slightly below `p*`.
    Below,
    /// The set at `p*` itself under the endpoint rule.
    At,
    /// The set in force for `p` slightly above `p*`.
    Above,
}

impl Approach {
    pub fn as_str(self) -> &'static str {
        match self {
            Approach::Below => "below",
            Approach::At => "at",
            Approach::Above => "above",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Theorem1,
    BoundaryScan,
    Grid,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Theorem1 => "theorem1",
            Method::BoundaryScan => "boundary_scan",
            Method::Grid => "grid",
        }
    }
}

/// Tolerance for snapping a root to an integer before taking floor/ceiling,
/// expressed per trial: a value within `coefficient * n` of an integer is
/// replaced by that integer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapTolerance(pub f64);

impl SnapTolerance {
    pub const DEFAULT_COEFFICIENT: f64 = 1e-9;
    pub const ENV_VAR: &'static str = "BINOCOV_EPS_INT";

    pub fn epsilon(self, n: TrialCount) -> f64 {
        self.0 * n.get() as f64
    }

    pub fn snap(self, value: f64, n: TrialCount) -> f64 {
        let nearest = value.round();
        if (value - nearest).abs() <= self.epsilon(n) {
            nearest
        } else {
            value
        }
    }

    /// Parses a decimal tolerance coefficient; must be finite and non-negative.
    pub fn parse(text: &str) -> Result<Self> {
        let v: f64 = text
            .trim()
            .parse()
            .map_err(|_| Error::Domain(format!("invalid snap tolerance `{text}`")))?;
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Domain(format!(
                "snap tolerance must be finite and >= 0, got {v}"
            )));
        }
        Ok(Self(v))
    }

    /// Reads `BINOCOV_EPS_INT` when set, else the default.
    pub fn from_env() -> Result<Self> {
        match std::env::var(Self::ENV_VAR) {
            Ok(text) => Self::parse(&text),
            Err(_) => Ok(Self::default()),
        }
    }
}

impl Default for SnapTolerance {
    fn default() -> Self {
        Self(Self::DEFAULT_COEFFICIENT)
    }
}

/// One evaluated candidate: the probability of the count range `[a, b]` at
/// `p_eval`. Breakpoint candidates carry the `(k, side)` of the limit
/// `p_eval` equals; grid candidates carry `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateEval {
    pub source: Option<(usize, Side)>,
    pub approach: Option<Approach>,
    pub variant: EndpointRule,
    pub p_eval: f64,
    pub a: i64,
    pub b: i64,
    pub prob: f64,
}

impl CandidateEval {
    pub fn k(&self) -> Option<usize> {
        self.source.map(|(k, _)| k)
    }

    pub fn side(&self) -> Option<Side> {
        self.source.map(|(_, s)| s)
    }

    fn order_key(&self) -> (usize, Side, Option<Approach>) {
        let (k, side) = self.source.unwrap_or((usize::MAX, Side::Upper));
        (k, side, self.approach)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinCoverageReport {
    pub value: f64,
    pub argmin: CandidateEval,
    pub candidates: Vec<CandidateEval>,
    pub method: Method,
    pub variant: EndpointRule,
}

/// Smallest probability; ties go to the smallest `k`, lower before upper.
fn select_min(candidates: &[CandidateEval]) -> Option<CandidateEval> {
    candidates.iter().copied().reduce(|best, c| {
        if c.prob < best.prob || (c.prob == best.prob && c.order_key() < best.order_key()) {
            c
        } else {
            best
        }
    })
}

fn report(
    n: TrialCount,
    candidates: Vec<CandidateEval>,
    method: Method,
    variant: EndpointRule,
) -> Result<MinCoverageReport> {
    let argmin = select_min(&candidates).ok_or(Error::EmptyCandidateSet { n: n.get() })?;
    Ok(MinCoverageReport {
        value: argmin.prob,
        argmin,
        candidates,
        method,
        variant,
    })
}

/// Counts whose interval covers a given `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AcceptanceSet {
    /// Contiguous `a..=b`; empty when `b < a`.
    Range { a: i64, b: i64 },
    /// Explicit sorted counts, used when the family is not monotone.
    Scattered(Vec<usize>),
}

impl AcceptanceSet {
    /// Smallest and largest member, or an empty `(0, -1)` range.
    pub fn bounds(&self) -> (i64, i64) {
        match self {
            AcceptanceSet::Range { a, b } => (*a, *b),
            AcceptanceSet::Scattered(ks) => match (ks.first(), ks.last()) {
                (Some(&lo), Some(&hi)) => (lo as i64, hi as i64),
                _ => (0, -1),
            },
        }
    }

    pub fn contains(&self, k: usize) -> bool {
        match self {
            AcceptanceSet::Range { a, b } => (*a..=*b).contains(&(k as i64)),
            AcceptanceSet::Scattered(ks) => ks.binary_search(&k).is_ok(),
        }
    }

    fn probability(&self, n: TrialCount, p: Probability) -> Probability {
        match self {
            AcceptanceSet::Range { a, b } => binom_range_prob(n, *a, *b, p),
            AcceptanceSet::Scattered(ks) => {
                let mut terms: Vec<f64> = ks
                    .iter()
                    .map(|&k| log_binom_pmf(n, k as i64, p).expect("k <= n").exp())
                    .collect();
                terms.sort_unstable_by(|x, y| y.total_cmp(x));
                Probability::saturating(neumaier_sum(&terms))
            }
        }
    }
}

/// Acceptance range for monotone limit tables, from four strictness choices.
fn monotone_range(
    family: &IntervalFamily,
    p: f64,
    upper_strict: bool,
    lower_strict: bool,
) -> AcceptanceSet {
    // first k with U(k) >= p (or > p when strict)
    let a = if upper_strict {
        family.upper_limits().partition_point(|&u| u <= p)
    } else {
        family.upper_limits().partition_point(|&u| u < p)
    };
    // one past the last k with L(k) <= p (or < p when strict)
    let end = if lower_strict {
        family.lower_limits().partition_point(|&l| l < p)
    } else {
        family.lower_limits().partition_point(|&l| l <= p)
    };
    AcceptanceSet::Range {
        a: a as i64,
        b: end as i64 - 1,
    }
}

/// The acceptance set at `p` under `rule`. Uses binary search over the limit
/// tables when the family is monotone and a linear scan otherwise.
pub fn acceptance_set(family: &IntervalFamily, p: f64, rule: EndpointRule) -> AcceptanceSet {
    if family.is_monotone() {
        match rule {
            EndpointRule::Closed => monotone_range(family, p, false, false),
            EndpointRule::Open => monotone_range(family, p, true, true),
        }
    } else {
        let covers = |k: usize| {
            let (lo, hi) = (family.lower(k), family.upper(k));
            match rule {
                EndpointRule::Closed => lo <= p && p <= hi,
                EndpointRule::Open => lo < p && p < hi,
            }
        };
        AcceptanceSet::Scattered(
            (0..=family.n().get() as usize)
                .filter(|&k| covers(k))
                .collect(),
        )
    }
}

/// Coverage probability `Pr{L <= p <= U | p}` (closed) or `Pr{L < p < U | p}` (open).
pub fn coverage_at(family: &IntervalFamily, p: f64, rule: EndpointRule) -> Result<Probability> {
    let p = Probability::interior(p)?;
    Ok(acceptance_set(family, p.get(), rule).probability(family.n(), p))
}

pub fn theorem1_candidates(
    spec: &IntervalSpec,
    variant: EndpointRule,
) -> Result<Vec<CandidateEval>> {
    theorem1_candidates_with(spec, variant, SnapTolerance::default())
}

/// Closed-form candidates for the minimum Wald coverage, ordered by `k` with
/// the lower-side candidate first. Requires `theta < 3`.
pub fn theorem1_candidates_with(
    spec: &IntervalSpec,
    variant: EndpointRule,
    snap: SnapTolerance,
) -> Result<Vec<CandidateEval>> {
    spec.require_theorem()?;
    let n = spec.n;
    let mut slots = Vec::new();
    for k in 0..=n.get() as i64 {
        let lower = wald_lower(spec, k)?;
        if lower > 0.0 && lower < 1.0 {
            slots.push((k, Side::Lower, lower));
        }
        let upper = wald_upper(spec, k)?;
        if upper > 0.0 && upper < 1.0 {
            slots.push((k, Side::Upper, upper));
        }
    }
    let candidates = slots
        .par_iter()
        .map(|&(k, side, p_eval)| {
            let p = Probability::interior(p_eval).expect("filtered to (0, 1)");
            let (a, b, approach) = match side {
                Side::Lower => {
                    let root = snap.snap(t_minus_count(spec, p), n);
                    match variant {
                        EndpointRule::Closed => (root.ceil() as i64, k - 1, Approach::Below),
                        EndpointRule::Open => (root.floor() as i64 + 1, k - 1, Approach::At),
                    }
                }
                Side::Upper => {
                    let root = snap.snap(t_plus_count(spec, p), n);
                    match variant {
                        EndpointRule::Closed => (k + 1, root.floor() as i64, Approach::Above),
                        EndpointRule::Open => (k + 1, root.ceil() as i64 - 1, Approach::At),
                    }
                }
            };
            CandidateEval {
                source: Some((k as usize, side)),
                approach: Some(approach),
                variant,
                p_eval,
                a,
                b,
                prob: binom_range_prob(n, a, b, p).get(),
            }
        })
        .collect();
    Ok(candidates)
}

pub fn min_coverage_theorem1(
    spec: &IntervalSpec,
    variant: EndpointRule,
) -> Result<MinCoverageReport> {
    min_coverage_theorem1_with(spec, variant, SnapTolerance::default())
}

/// Minimum over the closed-form Wald candidates. Fails when `theta >= 3`, and
/// with [`Error::EmptyCandidateSet`] when no Wald limit lies in `(0, 1)`
/// (`n = 2` at the usual confidence levels).
pub fn min_coverage_theorem1_with(
    spec: &IntervalSpec,
    variant: EndpointRule,
    snap: SnapTolerance,
) -> Result<MinCoverageReport> {
    let candidates = theorem1_candidates_with(spec, variant, snap)?;
    report(spec.n, candidates, Method::Theorem1, variant)
}

fn require_monotone(family: &IntervalFamily) -> Result<()> {
    match verify_monotone(family).first_violation {
        None => Ok(()),
        Some(k) => Err(Error::NotMonotone {
            family: family.name().to_string(),
            k,
        }),
    }
}

/// Minimum over every breakpoint of the coverage of the acceptance sets just
/// below, at and just above it, all evaluated at the breakpoint itself. The
/// one-sided sets come from strict versus non-strict comparisons against the
/// limit table, so `p` is never perturbed.
pub fn min_coverage_boundary_scan(
    family: &IntervalFamily,
    variant: EndpointRule,
) -> Result<MinCoverageReport> {
    require_monotone(family)?;
    let n = family.n();
    let mut points: Vec<(f64, usize, Side)> = family.breakpoints();
    // coincident limits switch together; keep the first (k, side) as label
    points.dedup_by(|later, first| later.0 == first.0);
    let candidates: Vec<CandidateEval> = points
        .par_iter()
        .flat_map_iter(|&(p_star, k, side)| {
            let p = Probability::interior(p_star).expect("breakpoints lie in (0, 1)");
            let sets = [
                (Approach::Below, monotone_range(family, p_star, false, true)),
                (Approach::At, acceptance_set(family, p_star, variant)),
                (Approach::Above, monotone_range(family, p_star, true, false)),
            ];
            sets.into_iter().map(move |(approach, set)| {
                let (a, b) = set.bounds();
                CandidateEval {
                    source: Some((k, side)),
                    approach: Some(approach),
                    variant,
                    p_eval: p_star,
                    a,
                    b,
                    prob: set.probability(n, p).get(),
                }
            })
        })
        .collect();
    report(n, candidates, Method::BoundaryScan, variant)
}

pub fn grid_oracle_min(
    family: &IntervalFamily,
    variant: EndpointRule,
    grid_step: f64,
    pad: f64,
) -> Result<MinCoverageReport> {
    grid_oracle_min_within(family, variant, grid_step, pad, 0.0, 1.0)
}

/// Dense-grid approximation of the minimum coverage: evaluates the uniform
/// grid `grid_step, 2 grid_step, ...` and the points `b - pad`, `b + pad` for
/// every breakpoint `b`, keeping only points strictly inside `(lo, hi)`
/// intersected with `(0, 1)`. The result is an upper bound on the infimum over
/// that range and converges to it as `grid_step` and `pad` shrink. The report
/// keeps no candidate list, only the argmin.
pub fn grid_oracle_min_within(
    family: &IntervalFamily,
    variant: EndpointRule,
    grid_step: f64,
    pad: f64,
    lo: f64,
    hi: f64,
) -> Result<MinCoverageReport> {
    if !(grid_step > 0.0 && grid_step < 1.0) {
        return Err(Error::Domain(format!(
            "grid step must lie in (0, 1), got {grid_step}"
        )));
    }
    if !(pad >= 0.0 && pad.is_finite()) || lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
        return Err(Error::Domain(format!(
            "invalid grid pad {pad} or range ({lo}, {hi})"
        )));
    }
    let inside = |p: f64| p > lo.max(0.0) && p < hi.min(1.0);
    let mut points: Vec<f64> = (1..)
        .map(|i| i as f64 * grid_step)
        .take_while(|&p| p < 1.0)
        .filter(|&p| inside(p))
        .collect();
    for (b, _, _) in family.breakpoints() {
        points.extend([b - pad, b + pad].into_iter().filter(|&p| inside(p)));
    }
    let n = family.n();
    let evals: Vec<CandidateEval> = points
        .par_iter()
        .map(|&p_eval| {
            let set = acceptance_set(family, p_eval, variant);
            let (a, b) = set.bounds();
            let p = Probability::interior(p_eval).expect("grid point in (0, 1)");
            CandidateEval {
                source: None,
                approach: None,
                variant,
                p_eval,
                a,
                b,
                prob: set.probability(n, p).get(),
            }
        })
        .collect();
    let argmin = evals
        .iter()
        .copied()
        .reduce(|best, c| if c.prob < best.prob { c } else { best })
        .ok_or(Error::EmptyCandidateSet { n: n.get() })?;
    Ok(MinCoverageReport {
        value: argmin.prob,
        argmin,
        candidates: Vec::new(),
        method: Method::Grid,
        variant,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub trials: u64,
    pub covered: u64,
    pub estimate: f64,
    pub standard_error: f64,
}

/// Simulates `trials` binomial counts at `p` with a ChaCha8 stream seeded from
/// `seed` and reports the covered fraction with its binomial standard error.
pub fn monte_carlo_coverage(
    family: &IntervalFamily,
    p: f64,
    trials: u64,
    seed: u64,
    variant: EndpointRule,
) -> Result<MonteCarloEstimate> {
    let p = Probability::interior(p)?;
    if trials == 0 {
        return Err(Error::Domain("Monte Carlo needs at least one trial".into()));
    }
    let set = acceptance_set(family, p.get(), variant);
    let sampler = Binomial::new(family.n().get(), p.get())
        .map_err(|e| Error::Domain(format!("binomial sampler: {e}")))?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let covered = (0..trials)
        .filter(|_| set.contains(sampler.sample(&mut rng) as usize))
        .count() as u64;
    let estimate = covered as f64 / trials as f64;
    Ok(MonteCarloEstimate {
        trials,
        covered,
        estimate,
        standard_error: (estimate * (1.0 - estimate) / trials as f64).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSample {
    pub p: f64,
    pub coverage: f64,
    pub piece_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveBreakpoint {
    pub value: f64,
    pub k: usize,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageCurve {
    pub samples: Vec<CurveSample>,
    pub breakpoints: Vec<CurveBreakpoint>,
}

impl CoverageCurve {
    /// Distinct breakpoint values in increasing order.
    pub fn cut_points(&self) -> Vec<f64> {
        let mut cuts: Vec<f64> = self.breakpoints.iter().map(|b| b.value).collect();
        cuts.dedup();
        cuts
    }
}

/// Samples coverage at `samples_per_piece` evenly spaced interior points of
/// each open piece between consecutive breakpoints (including the two outer
/// pieces that touch 0 and 1).
pub fn coverage_curve(
    family: &IntervalFamily,
    samples_per_piece: usize,
    variant: EndpointRule,
) -> Result<CoverageCurve> {
    if samples_per_piece == 0 {
        return Err(Error::Domain("samples_per_piece must be at least 1".into()));
    }
    let breakpoints: Vec<CurveBreakpoint> = family
        .breakpoints()
        .into_iter()
        .map(|(value, k, side)| CurveBreakpoint { value, k, side })
        .collect();
    let mut edges = vec![0.0];
    for bp in &breakpoints {
        if *edges.last().unwrap() != bp.value {
            edges.push(bp.value);
        }
    }
    edges.push(1.0);
    let mut points = Vec::new();
    for (piece_index, w) in edges.windows(2).enumerate() {
        let width = w[1] - w[0];
        for j in 1..=samples_per_piece {
            let p = w[0] + width * j as f64 / (samples_per_piece + 1) as f64;
            // pieces narrower than a few ulps can round onto their edges
            if p > w[0] && p < w[1] {
                points.push((p, piece_index));
            }
        }
    }
    let samples = points
        .par_iter()
        .map(|&(p, piece_index)| {
            let coverage = coverage_at(family, p, variant)
                .expect("interior point")
                .get();
            CurveSample {
                p,
                coverage,
                piece_index,
            }
        })
        .collect();
    Ok(CoverageCurve {
        samples,
        breakpoints,
    })
}
