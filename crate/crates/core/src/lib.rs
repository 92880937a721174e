//! Exact coverage analysis for binomial proportion confidence intervals.
//!
//! The centerpiece is a finite-evaluation formula for the minimum coverage of
//! the Wald interval ([`coverage::min_coverage_theorem1`]). It is cross-checked
//! by a generic breakpoint scan that works for any interval family with
//! monotone limits, a dense-grid oracle, and a Monte Carlo estimator.

pub mod binom_core;
pub mod coverage;
pub mod error;
pub mod intervals;

pub use binom_core::{
    binom_range_prob, log_binom_pmf, normal_upper_tail, upper_tail_quantile, Probability,
    TrialCount,
};
pub use coverage::{
    acceptance_set, coverage_at, coverage_curve, grid_oracle_min, grid_oracle_min_within,
    min_coverage_boundary_scan, min_coverage_theorem1, min_coverage_theorem1_with,
    monte_carlo_coverage, theorem1_candidates, theorem1_candidates_with, AcceptanceSet, Approach,
    CandidateEval, CoverageCurve, CurveBreakpoint, CurveSample, EndpointRule, Method,
    MinCoverageReport, MonteCarloEstimate, SnapTolerance,
};
pub use error::{Error, Result};
pub use intervals::{
    make_agresti_coull_family, make_spec, make_wald_family, make_wilson_family, t_minus_count,
    t_plus_count, verify_monotone, wald_lower, wald_upper, FamilyKind, IntervalFamily,
    IntervalSpec, MonotoneCheck, Side,
};
