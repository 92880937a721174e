//! Built-in invariant suites behind `binocov verify`.

use std::collections::HashMap;
use std::fmt::Write as _;

use binocov::{
    coverage_at, make_wald_family, min_coverage_boundary_scan, min_coverage_theorem1_with,
    monte_carlo_coverage, t_minus_count, t_plus_count, theorem1_candidates_with, verify_monotone,
    wald_lower, wald_upper, EndpointRule, Error, IntervalSpec, MinCoverageReport, Probability,
    Side, SnapTolerance,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{FormatArg, VerifyArgs};
use crate::commands::spec_for;
use crate::output::{fmt_real, Envelope, Provenance, Real, Tolerances};
use crate::{exit, CliError, Outcome};

pub const AGREEMENT_TOL: f64 = 1e-12;
pub const ROOT_TOL_PER_TRIAL: f64 = 1e-8;
pub const SYMMETRY_TOL: f64 = 1e-12;
pub const MC_STANDARD_ERRORS: f64 = 4.0;

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub checked: u64,
    pub failed: u64,
    pub first_counterexample: Option<String>,
}

/// Per-case outcome: `None` is skipped, `Some(Ok)` passed, `Some(Err(msg))` failed.
type Check = Option<Result<(), String>>;

fn tally(name: &'static str, checks: Vec<Check>) -> SuiteResult {
    let mut checked = 0;
    let mut failed = 0;
    let mut first = None;
    for c in checks.into_iter().flatten() {
        checked += 1;
        if let Err(msg) = c {
            failed += 1;
            first.get_or_insert(msg);
        }
    }
    SuiteResult {
        name,
        passed: failed == 0,
        checked,
        failed,
        first_counterexample: first,
    }
}

fn grid(n_max: u64, deltas: &[f64], n_min: u64) -> Vec<(u64, f64)> {
    (n_min..=n_max)
        .flat_map(|n| deltas.iter().map(move |&d| (n, d)))
        .collect()
}

fn spec(n: u64, delta: f64) -> IntervalSpec {
    spec_for(n, delta).expect("validated inputs")
}

fn wald_monotone(cases: &[(u64, f64)]) -> SuiteResult {
    let checks = cases
        .par_iter()
        .map(|&(n, d)| {
            let s = spec(n, d);
            if !s.theorem_valid {
                return None;
            }
            let check = verify_monotone(&make_wald_family(&s));
            Some(match check.first_violation {
                None => Ok(()),
                Some(k) => Err(format!(
                    "n = {n}, delta = {d}: Wald limits not increasing at k = {k}"
                )),
            })
        })
        .collect();
    tally("wald_monotone", checks)
}

fn min_or_empty(r: Result<MinCoverageReport, Error>) -> Result<Option<f64>, String> {
    match r {
        Ok(r) => Ok(Some(r.value)),
        Err(Error::EmptyCandidateSet { .. }) => Ok(None),
        Err(e) => Err(e.to_string()),
    }
}

fn agreement(cases: &[(u64, f64)], snap: SnapTolerance) -> SuiteResult {
    let checks = cases
        .par_iter()
        .flat_map_iter(|&(n, d)| {
            [EndpointRule::Closed, EndpointRule::Open]
                .into_iter()
                .map(move |variant| {
                    let s = spec(n, d);
                    if !s.theorem_valid {
                        return None;
                    }
                    let theorem = min_or_empty(min_coverage_theorem1_with(&s, variant, snap));
                    let scan =
                        min_or_empty(min_coverage_boundary_scan(&make_wald_family(&s), variant));
                    let ctx = format!("n = {n}, delta = {d}, {}", variant.as_str());
                    Some(match (theorem, scan) {
                        (Ok(Some(t)), Ok(Some(b))) if (t - b).abs() <= AGREEMENT_TOL => Ok(()),
                        (Ok(None), Ok(None)) => Ok(()),
                        (t, b) => Err(format!("{ctx}: theorem1 {t:?} vs boundary_scan {b:?}")),
                    })
                })
        })
        .collect();
    tally("theorem_scan_agreement", checks)
}

/// Root identities, plus: every theorem candidate's count range equals the
/// boundary scan's range for the same breakpoint and approach.
fn roots_and_snap(cases: &[(u64, f64)], snap: SnapTolerance) -> SuiteResult {
    let checks = cases
        .par_iter()
        .flat_map_iter(|&(n, d)| {
            let s = spec(n, d);
            let mut out: Vec<Check> = Vec::new();
            if !s.theorem_valid {
                return out;
            }
            let tol = ROOT_TOL_PER_TRIAL * n as f64;
            for k in 0..=n as i64 {
                let lower = wald_lower(&s, k).expect("k in range");
                if lower > 0.0 && lower < 1.0 {
                    let t = t_plus_count(&s, Probability::interior(lower).unwrap());
                    out.push(Some(if (t - k as f64).abs() <= tol {
                        Ok(())
                    } else {
                        Err(format!("n = {n}, delta = {d}: t_plus(L({k})) = {t}"))
                    }));
                }
                let upper = wald_upper(&s, k).expect("k in range");
                if upper > 0.0 && upper < 1.0 {
                    let t = t_minus_count(&s, Probability::interior(upper).unwrap());
                    out.push(Some(if (t - k as f64).abs() <= tol {
                        Ok(())
                    } else {
                        Err(format!("n = {n}, delta = {d}: t_minus(U({k})) = {t}"))
                    }));
                }
            }
            let family = make_wald_family(&s);
            for variant in [EndpointRule::Closed, EndpointRule::Open] {
                let Ok(scan) = min_coverage_boundary_scan(&family, variant) else { continue };
                let ranges: HashMap<(u64, &'static str), (i64, i64)> = scan
                    .candidates
                    .iter()
                    .filter_map(|c| Some(((c.p_eval.to_bits(), c.approach?.as_str()), normalize(c.a, c.b))))
                    .collect();
                let theorem = theorem1_candidates_with(&s, variant, snap).unwrap_or_default();
                for c in theorem {
                    let Some(approach) = c.approach else { continue };
                    let Some(&expected) = ranges.get(&(c.p_eval.to_bits(), approach.as_str())) else {
                        continue;
                    };
                    let got = normalize(c.a, c.b);
                    let (k, side) = c.source.expect("theorem candidates carry a source");
                    out.push(Some(if got == expected {
                        Ok(())
                    } else {
                        Err(format!(
                            "n = {n}, delta = {d}, {}: k = {k} {} range {}..={} but limit table gives {}..={}",
                            variant.as_str(),
                            side_name(side),
                            got.0,
                            got.1,
                            expected.0,
                            expected.1
                        ))
                    }));
                }
            }
            out
        })
        .collect();
    tally("root_identity_snap", checks)
}

fn normalize(a: i64, b: i64) -> (i64, i64) {
    if b < a {
        (0, -1)
    } else {
        (a, b)
    }
}

fn side_name(side: Side) -> &'static str {
    side.as_str()
}

fn variant_ordering(cases: &[(u64, f64)], snap: SnapTolerance) -> SuiteResult {
    let checks = cases
        .par_iter()
        .map(|&(n, d)| {
            let s = spec(n, d);
            if !s.theorem_valid {
                return None;
            }
            let closed = min_coverage_theorem1_with(&s, EndpointRule::Closed, snap).ok()?;
            let open = min_coverage_theorem1_with(&s, EndpointRule::Open, snap).ok()?;
            Some(if open.value <= closed.value {
                Ok(())
            } else {
                Err(format!(
                    "n = {n}, delta = {d}: open {} > closed {}",
                    fmt_real(open.value),
                    fmt_real(closed.value)
                ))
            })
        })
        .collect();
    tally("variant_ordering", checks)
}

fn below_nominal(cases: &[(u64, f64)], snap: SnapTolerance) -> SuiteResult {
    let checks = cases
        .par_iter()
        .map(|&(n, d)| {
            let s = spec(n, d);
            if !s.theorem_valid {
                return None;
            }
            let r = min_coverage_theorem1_with(&s, EndpointRule::Closed, snap).ok()?;
            Some(if r.value < 1.0 - d {
                Ok(())
            } else {
                Err(format!(
                    "n = {n}, delta = {d}: minimum coverage {} >= {}",
                    fmt_real(r.value),
                    1.0 - d
                ))
            })
        })
        .collect();
    tally("below_nominal", checks)
}

const SYMMETRY_POINTS: [f64; 6] = [0.013, 0.1, 0.237, 0.31, 0.42, 0.5];

fn symmetry(cases: &[(u64, f64)]) -> SuiteResult {
    let checks = cases
        .par_iter()
        .flat_map_iter(|&(n, d)| {
            let family = make_wald_family(&spec(n, d));
            let mut out: Vec<Check> = Vec::new();
            for variant in [EndpointRule::Closed, EndpointRule::Open] {
                for p in SYMMETRY_POINTS {
                    let lo = coverage_at(&family, p, variant).expect("interior").get();
                    let hi = coverage_at(&family, 1.0 - p, variant)
                        .expect("interior")
                        .get();
                    out.push(Some(if (lo - hi).abs() <= SYMMETRY_TOL {
                        Ok(())
                    } else {
                        Err(format!(
                            "n = {n}, delta = {d}, {}: C({p}) = {} but C(1 - {p}) = {}",
                            variant.as_str(),
                            fmt_real(lo),
                            fmt_real(hi)
                        ))
                    }));
                }
            }
            out
        })
        .collect();
    tally("symmetry", checks)
}

/// The `(n, delta, p, trial seed)` points drawn for the Monte Carlo suite.
pub fn monte_carlo_points(
    seed: u64,
    count: u64,
    n_max: u64,
    deltas: &[f64],
) -> Vec<(u64, f64, f64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(2..=n_max);
            let d = deltas[rng.random_range(0..deltas.len())];
            let p = rng.random_range(0.01..0.99);
            (n, d, p, rng.random())
        })
        .collect()
}

fn monte_carlo(points: &[(u64, f64, f64, u64)], trials: u64) -> SuiteResult {
    let checks = points
        .par_iter()
        .map(|&(n, d, p, seed)| {
            let family = make_wald_family(&spec(n, d));
            let exact = coverage_at(&family, p, EndpointRule::Closed)
                .expect("interior")
                .get();
            let est = monte_carlo_coverage(&family, p, trials, seed, EndpointRule::Closed)
                .expect("valid inputs");
            let se = (exact * (1.0 - exact) / trials as f64).sqrt();
            let diff = (est.estimate - exact).abs();
            Some(if diff <= MC_STANDARD_ERRORS * se || diff <= 1e-12 {
                Ok(())
            } else {
                Err(format!(
                    "n = {n}, delta = {d}, p = {}: exact {} vs estimate {} ({} SE)",
                    fmt_real(p),
                    fmt_real(exact),
                    fmt_real(est.estimate),
                    diff / se
                ))
            })
        })
        .collect();
    tally("monte_carlo", checks)
}

pub fn run_suites(a: &VerifyArgs, snap: SnapTolerance) -> Vec<SuiteResult> {
    let deltas = &a.deltas.0;
    let all = grid(a.n_max, deltas, 1);
    let from2 = grid(a.n_max, deltas, 2);
    let sym_cases: Vec<(u64, f64)> = from2
        .iter()
        .copied()
        .filter(|&(n, _)| n % 7 == 2 || n <= 12)
        .collect();
    let points = monte_carlo_points(a.seed, a.mc_points, a.n_max, deltas);
    vec![
        wald_monotone(&all),
        agreement(&from2, snap),
        roots_and_snap(&from2, snap),
        variant_ordering(&from2, snap),
        below_nominal(&from2, snap),
        symmetry(&sym_cases),
        monte_carlo(&points, a.mc_trials),
    ]
}

#[derive(Serialize)]
struct VerifyInputs {
    n_max: u64,
    deltas: Vec<Real>,
    seed: u64,
    mc_points: u64,
    mc_trials: u64,
    format: &'static str,
}

#[derive(Serialize)]
struct VerifyResults {
    passed: bool,
    suites: Vec<SuiteResult>,
}

pub fn verify(a: &VerifyArgs, env_snap: SnapTolerance) -> Result<Outcome, CliError> {
    let snap = match a.eps_int {
        Some(c) if c.is_finite() && c >= 0.0 => SnapTolerance(c),
        Some(c) => {
            return Err(CliError::usage(format!(
                "--eps-int must be finite and >= 0, got {c}"
            )))
        }
        None => env_snap,
    };
    let suites = run_suites(a, snap);
    let passed = suites.iter().all(|s| s.passed);
    let mut stderr = String::new();
    if let Some(s) = suites.iter().find(|s| !s.passed) {
        writeln!(
            stderr,
            "verification failed in {}: {}",
            s.name,
            s.first_counterexample.as_deref().unwrap_or("")
        )
        .unwrap();
    }
    let stdout = match a.format {
        FormatArg::Json => Envelope {
            schema_version: crate::output::SCHEMA_VERSION,
            command: "verify",
            inputs: VerifyInputs {
                n_max: a.n_max,
                deltas: deltas_json(&a.deltas.0),
                seed: a.seed,
                mc_points: a.mc_points,
                mc_trials: a.mc_trials,
                format: "json",
            },
            results: VerifyResults { passed, suites },
            provenance: Provenance {
                method: None,
                requested_method: None,
                fallback: None,
                statistic: None,
                tolerances: Tolerances {
                    eps_int_absolute: None,
                    grid_step: None,
                    grid_pad: None,
                },
                eps_int: Real(snap.0),
            },
        }
        .to_json(),
        FormatArg::Csv => {
            let mut s = String::from("suite,passed,checked,failed,first_counterexample\n");
            for r in &suites {
                writeln!(
                    s,
                    "{},{},{},{},\"{}\"",
                    r.name,
                    r.passed,
                    r.checked,
                    r.failed,
                    r.first_counterexample
                        .as_deref()
                        .unwrap_or("")
                        .replace('"', "\"\"")
                )
                .unwrap();
            }
            s
        }
        FormatArg::Text => {
            let mut s = String::new();
            for r in &suites {
                writeln!(
                    s,
                    "{} {:<24} checked {:>7}  failed {:>5}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.checked,
                    r.failed
                )
                .unwrap();
                if let Some(c) = &r.first_counterexample {
                    writeln!(s, "     first counterexample: {c}").unwrap();
                }
            }
            writeln!(
                s,
                "{}",
                if passed {
                    "all suites passed"
                } else {
                    "verification FAILED"
                }
            )
            .unwrap();
            s
        }
    };
    Ok(Outcome {
        code: if passed {
            exit::OK
        } else {
            exit::VERIFY_FAILED
        },
        stdout,
        stderr,
    })
}

fn deltas_json(deltas: &[f64]) -> Vec<Real> {
    deltas.iter().copied().map(Real).collect()
}
