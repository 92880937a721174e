use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use binocov::{
    acceptance_set, coverage_at, coverage_curve, grid_oracle_min, make_agresti_coull_family,
    make_spec, make_wald_family, make_wilson_family, min_coverage_boundary_scan,
    min_coverage_theorem1_with, theorem1_candidates_with, AcceptanceSet, EndpointRule, Error,
    IntervalFamily, IntervalSpec, Method, MinCoverageReport, SnapTolerance, TrialCount,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{
    CandidatesArgs, Common, CoverageArgs, CurveArgs, FamilyArg, FormatArg, MethodArg,
    MinCoverageArgs, SweepArgs,
};
use crate::output::{
    candidate_csv_fields, describe_argmin, fmt_real, opt_usize, CandidateJson, Envelope,
    Provenance, Real, Tolerances,
};
use crate::{exit, CliError, Outcome};

pub const FALLBACK_GRID_STEP: f64 = 1e-4;
pub const FALLBACK_GRID_PAD: f64 = 1e-9;

impl FamilyArg {
    pub fn as_str(self) -> &'static str {
        match self {
            FamilyArg::Wald => "wald",
            FamilyArg::Wilson => "wilson",
            FamilyArg::AgrestiCoull => "agresti-coull",
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Domain(_) => exit::USAGE,
            Error::Precondition { .. }
            | Error::NotMonotone { .. }
            | Error::EmptyCandidateSet { .. } => exit::PRECONDITION,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

pub(crate) fn spec_for(n: u64, delta: f64) -> Result<IntervalSpec, CliError> {
    Ok(make_spec(TrialCount::new(n)?, delta)?)
}

pub(crate) fn build_family(spec: &IntervalSpec, family: FamilyArg) -> IntervalFamily {
    match family {
        FamilyArg::Wald => make_wald_family(spec),
        FamilyArg::Wilson => make_wilson_family(spec),
        FamilyArg::AgrestiCoull => make_agresti_coull_family(spec),
    }
}

fn method_name(m: Method) -> &'static str {
    m.as_str()
}

#[derive(Debug, Clone)]
pub(crate) struct Solved {
    pub report: MinCoverageReport,
    pub fallback: Option<String>,
}

/// How a failed exact engine is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum OnFailure {
    Error,
    Fallback,
}

/// Runs the requested engine. With `OnFailure::Fallback`, a theorem precondition
/// failure drops to the boundary scan and an empty or non-monotone scan drops
/// to the grid oracle; the reason is returned alongside the report.
pub(crate) fn solve_min(
    spec: &IntervalSpec,
    family_arg: FamilyArg,
    variant: EndpointRule,
    method: MethodArg,
    snap: SnapTolerance,
    on_failure: OnFailure,
) -> Result<Solved, CliError> {
    let family = build_family(spec, family_arg);
    let use_theorem = match method {
        MethodArg::Theorem1 => {
            if family_arg != FamilyArg::Wald {
                return Err(CliError::usage("--method theorem1 requires --family wald"));
            }
            true
        }
        MethodArg::Auto => family_arg == FamilyArg::Wald && spec.theorem_valid,
        MethodArg::BoundaryScan => false,
    };
    let fallback_allowed = on_failure == OnFailure::Fallback || method == MethodArg::Auto;
    let mut notes = Vec::new();
    let exact = if use_theorem {
        match min_coverage_theorem1_with(spec, variant, snap) {
            Err(e @ Error::Precondition { .. }) if fallback_allowed => {
                notes.push(format!("theorem1 unavailable ({e}); used boundary_scan"));
                min_coverage_boundary_scan(&family, variant)
            }
            other => other,
        }
    } else {
        min_coverage_boundary_scan(&family, variant)
    };
    let report = match exact {
        Ok(r) => r,
        Err(e @ (Error::EmptyCandidateSet { .. } | Error::NotMonotone { .. }))
            if fallback_allowed =>
        {
            notes.push(format!("{e}; used grid oracle"));
            grid_oracle_min(&family, variant, FALLBACK_GRID_STEP, FALLBACK_GRID_PAD)?
        }
        Err(e) => return Err(e.into()),
    };
    let fallback = if notes.is_empty() {
        None
    } else {
        Some(notes.join("; "))
    };
    Ok(Solved { report, fallback })
}

fn provenance(
    method: Option<&'static str>,
    requested: Option<&'static str>,
    fallback: Option<String>,
    statistic: Option<&'static str>,
    snap: SnapTolerance,
    n: Option<u64>,
) -> Provenance {
    let grid = method == Some(Method::Grid.as_str());
    Provenance {
        method,
        requested_method: requested,
        fallback,
        statistic,
        tolerances: Tolerances {
            eps_int_absolute: n.map(|n| Real(snap.0 * n as f64)),
            grid_step: grid.then_some(Real(FALLBACK_GRID_STEP)),
            grid_pad: grid.then_some(Real(FALLBACK_GRID_PAD)),
        },
        eps_int: Real(snap.0),
    }
}

#[derive(Serialize)]
struct CommonInputs {
    n: u64,
    delta: Real,
    family: &'static str,
    variant: &'static str,
}

impl CommonInputs {
    fn new(c: &Common) -> Self {
        Self {
            n: c.n,
            delta: Real(c.delta),
            family: c.family.as_str(),
            variant: EndpointRule::from(c.variant).as_str(),
        }
    }
}

fn spec_header(spec: &IntervalSpec) -> String {
    format!(
        "n = {}, delta = {}, z = {}, theta = {}\n",
        spec.n.get(),
        fmt_real(spec.delta),
        fmt_real(spec.z),
        fmt_real(spec.theta)
    )
}

// ---------------------------------------------------------------- min-coverage

#[derive(Serialize)]
struct MinCoverageInputs {
    #[serde(flatten)]
    common: CommonInputs,
    method: &'static str,
    format: &'static str,
}

#[derive(Serialize)]
struct MinCoverageResults {
    value: Real,
    statistic: &'static str,
    argmin: CandidateJson,
    candidate_count: usize,
}

pub fn min_coverage(a: &MinCoverageArgs, snap: SnapTolerance) -> Result<Outcome, CliError> {
    let spec = spec_for(a.common.n, a.common.delta)?;
    let variant = EndpointRule::from(a.common.variant);
    let solved = solve_min(
        &spec,
        a.common.family,
        variant,
        a.method,
        snap,
        OnFailure::Error,
    )?;
    let r = &solved.report;
    let stdout = match a.format {
        FormatArg::Json => Envelope {
            schema_version: crate::output::SCHEMA_VERSION,
            command: "min-coverage",
            inputs: MinCoverageInputs {
                common: CommonInputs::new(&a.common),
                method: a.method.as_str(),
                format: "json",
            },
            results: MinCoverageResults {
                value: Real(r.value),
                statistic: variant.statistic(),
                argmin: CandidateJson::from(&r.argmin),
                candidate_count: r.candidates.len(),
            },
            provenance: provenance(
                Some(method_name(r.method)),
                Some(a.method.as_str()),
                solved.fallback.clone(),
                Some(variant.statistic()),
                snap,
                Some(a.common.n),
            ),
        }
        .to_json(),
        FormatArg::Csv => {
            let mut s = String::from(
                "n,delta,family,variant,method,value,argmin_k,argmin_side,argmin_approach,p_eval,a,b,candidate_count\n",
            );
            writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                a.common.n,
                fmt_real(a.common.delta),
                a.common.family.as_str(),
                variant.as_str(),
                method_name(r.method),
                fmt_real(r.value),
                candidate_csv_fields(&r.argmin),
                r.candidates.len()
            )
            .unwrap();
            s
        }
        FormatArg::Text => {
            let mut s = format!(
                "{} interval, {} endpoints\n",
                a.common.family.as_str(),
                variant.as_str()
            );
            s.push_str(&spec_header(&spec));
            writeln!(s, "method: {}", method_name(r.method)).unwrap();
            if let Some(f) = &solved.fallback {
                writeln!(s, "fallback: {f}").unwrap();
            }
            writeln!(
                s,
                "minimum coverage ({}): {}",
                variant.statistic(),
                fmt_real(r.value)
            )
            .unwrap();
            writeln!(s, "argmin: {}", describe_argmin(r)).unwrap();
            writeln!(s, "candidates evaluated: {}", r.candidates.len()).unwrap();
            s
        }
    };
    Ok(Outcome::ok(stdout))
}

// ---------------------------------------------------------------- coverage

#[derive(Serialize)]
struct CoverageInputs {
    #[serde(flatten)]
    common: CommonInputs,
    p: Real,
    format: &'static str,
}

#[derive(Serialize)]
struct CoverageResults {
    coverage: Real,
    acceptance: AcceptanceJson,
}

#[derive(Serialize)]
struct AcceptanceJson {
    a: i64,
    b: i64,
    contiguous: bool,
    counts: Option<Vec<usize>>,
}

impl From<&AcceptanceSet> for AcceptanceJson {
    fn from(set: &AcceptanceSet) -> Self {
        let (a, b) = set.bounds();
        match set {
            AcceptanceSet::Range { .. } => Self {
                a,
                b,
                contiguous: true,
                counts: None,
            },
            AcceptanceSet::Scattered(ks) => Self {
                a,
                b,
                contiguous: false,
                counts: Some(ks.clone()),
            },
        }
    }
}

pub fn coverage(a: &CoverageArgs, snap: SnapTolerance) -> Result<Outcome, CliError> {
    if !(a.p > 0.0 && a.p < 1.0) {
        return Err(CliError::usage(format!(
            "--p must lie strictly inside (0, 1), got {}",
            a.p
        )));
    }
    let spec = spec_for(a.common.n, a.common.delta)?;
    let variant = EndpointRule::from(a.common.variant);
    let family = build_family(&spec, a.common.family);
    let value = coverage_at(&family, a.p, variant)?.get();
    let set = acceptance_set(&family, a.p, variant);
    let (lo, hi) = set.bounds();
    let stdout = match a.format {
        FormatArg::Json => Envelope {
            schema_version: crate::output::SCHEMA_VERSION,
            command: "coverage",
            inputs: CoverageInputs {
                common: CommonInputs::new(&a.common),
                p: Real(a.p),
                format: "json",
            },
            results: CoverageResults {
                coverage: Real(value),
                acceptance: AcceptanceJson::from(&set),
            },
            provenance: provenance(None, None, None, None, snap, None),
        }
        .to_json(),
        FormatArg::Csv => format!(
            "n,delta,family,variant,p,coverage,a,b,contiguous\n{},{},{},{},{},{},{},{},{}\n",
            a.common.n,
            fmt_real(a.common.delta),
            a.common.family.as_str(),
            variant.as_str(),
            fmt_real(a.p),
            fmt_real(value),
            lo,
            hi,
            matches!(set, AcceptanceSet::Range { .. })
        ),
        FormatArg::Text => {
            let mut s = format!(
                "{} interval, {} endpoints\n",
                a.common.family.as_str(),
                variant.as_str()
            );
            s.push_str(&spec_header(&spec));
            writeln!(s, "p = {}", fmt_real(a.p)).unwrap();
            writeln!(s, "coverage: {}", fmt_real(value)).unwrap();
            match &set {
                AcceptanceSet::Range { .. } if hi < lo => {
                    writeln!(s, "acceptance set: empty").unwrap()
                }
                AcceptanceSet::Range { .. } => writeln!(s, "acceptance set: {lo}..={hi}").unwrap(),
                AcceptanceSet::Scattered(ks) => writeln!(s, "acceptance set: {ks:?}").unwrap(),
            }
            s
        }
    };
    Ok(Outcome::ok(stdout))
}

// ---------------------------------------------------------------- curve

#[derive(Serialize)]
struct CurveInputs {
    #[serde(flatten)]
    common: CommonInputs,
    samples_per_piece: u64,
    format: &'static str,
    out: String,
}

#[derive(Serialize)]
struct CurveResults {
    samples: Vec<SampleJson>,
    breakpoints: Vec<BreakpointJson>,
}

#[derive(Serialize)]
struct SampleJson {
    p: Real,
    coverage: Real,
    piece_index: usize,
}

#[derive(Serialize)]
struct BreakpointJson {
    p: Real,
    k: usize,
    side: &'static str,
}

/// `dir/stem.csv` -> `dir/stem.breakpoints.csv`.
pub fn breakpoints_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}.breakpoints.csv"))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError {
        code: exit::IO,
        message: format!("cannot write {}: {e}", path.display()),
    })
}

pub fn curve(a: &CurveArgs, snap: SnapTolerance) -> Result<Outcome, CliError> {
    let spec = spec_for(a.common.n, a.common.delta)?;
    let variant = EndpointRule::from(a.common.variant);
    let family = build_family(&spec, a.common.family);
    let samples_per_piece = usize::try_from(a.samples_per_piece)
        .map_err(|_| CliError::usage("--samples-per-piece too large"))?;
    let curve = coverage_curve(&family, samples_per_piece, variant)?;
    match a.format {
        FormatArg::Json => {
            let json = Envelope {
                schema_version: crate::output::SCHEMA_VERSION,
                command: "curve",
                inputs: CurveInputs {
                    common: CommonInputs::new(&a.common),
                    samples_per_piece: a.samples_per_piece,
                    format: "json",
                    out: a.out.display().to_string(),
                },
                results: CurveResults {
                    samples: curve
                        .samples
                        .iter()
                        .map(|s| SampleJson {
                            p: Real(s.p),
                            coverage: Real(s.coverage),
                            piece_index: s.piece_index,
                        })
                        .collect(),
                    breakpoints: curve
                        .breakpoints
                        .iter()
                        .map(|b| BreakpointJson {
                            p: Real(b.value),
                            k: b.k,
                            side: b.side.as_str(),
                        })
                        .collect(),
                },
                provenance: provenance(None, None, None, None, snap, None),
            }
            .to_json();
            write_file(&a.out, &json)?;
            Ok(Outcome::ok(String::new()))
        }
        FormatArg::Csv | FormatArg::Text => {
            let mut samples = String::from("p,coverage,piece_index\n");
            for s in &curve.samples {
                writeln!(
                    samples,
                    "{},{},{}",
                    fmt_real(s.p),
                    fmt_real(s.coverage),
                    s.piece_index
                )
                .unwrap();
            }
            let mut bps = String::from("p,k,side\n");
            for b in &curve.breakpoints {
                writeln!(bps, "{},{},{}", fmt_real(b.value), b.k, b.side.as_str()).unwrap();
            }
            let bp_path = breakpoints_path(&a.out);
            write_file(&a.out, &samples)?;
            write_file(&bp_path, &bps)?;
            let stdout = if a.format == FormatArg::Text {
                format!(
                    "wrote {} samples to {} and {} breakpoints to {}\n",
                    curve.samples.len(),
                    a.out.display(),
                    curve.breakpoints.len(),
                    bp_path.display()
                )
            } else {
                String::new()
            };
            Ok(Outcome::ok(stdout))
        }
    }
}

// ---------------------------------------------------------------- candidates

#[derive(Serialize)]
struct CandidatesInputs {
    n: u64,
    delta: Real,
    variant: &'static str,
    format: &'static str,
}

#[derive(Serialize)]
struct CandidateRow {
    #[serde(flatten)]
    candidate: CandidateJson,
    is_min: bool,
}

#[derive(Serialize)]
struct CandidatesResults {
    rows: Vec<CandidateRow>,
    minimum: Option<Real>,
}

pub fn candidates(a: &CandidatesArgs, snap: SnapTolerance) -> Result<Outcome, CliError> {
    let spec = spec_for(a.n, a.delta)?;
    let variant = EndpointRule::from(a.variant);
    let rows = theorem1_candidates_with(&spec, variant, snap)?;
    let argmin = match min_coverage_theorem1_with(&spec, variant, snap) {
        Ok(r) => rows.iter().position(|c| *c == r.argmin),
        Err(Error::EmptyCandidateSet { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let minimum = argmin.map(|i| rows[i].prob);
    let stdout = match a.format {
        FormatArg::Json => Envelope {
            schema_version: crate::output::SCHEMA_VERSION,
            command: "candidates",
            inputs: CandidatesInputs {
                n: a.n,
                delta: Real(a.delta),
                variant: variant.as_str(),
                format: "json",
            },
            results: CandidatesResults {
                rows: rows
                    .iter()
                    .enumerate()
                    .map(|(i, c)| CandidateRow {
                        candidate: CandidateJson::from(c),
                        is_min: Some(i) == argmin,
                    })
                    .collect(),
                minimum: minimum.map(Real),
            },
            provenance: provenance(
                Some(Method::Theorem1.as_str()),
                None,
                None,
                Some(variant.statistic()),
                snap,
                Some(a.n),
            ),
        }
        .to_json(),
        FormatArg::Csv => {
            let mut s = String::from("k,side,approach,p_eval,a,b,prob,is_min\n");
            for (i, c) in rows.iter().enumerate() {
                writeln!(s, "{},{}", candidate_csv_fields(c), Some(i) == argmin).unwrap();
            }
            s
        }
        FormatArg::Text => {
            let mut s = format!("wald candidates, {} endpoints\n", variant.as_str());
            s.push_str(&spec_header(&spec));
            writeln!(
                s,
                "{:>6} {:>5} {:>24} {:>6} {:>6} {:>24}",
                "k", "side", "p_eval", "a", "b", "prob"
            )
            .unwrap();
            for (i, c) in rows.iter().enumerate() {
                writeln!(
                    s,
                    "{:>6} {:>5} {:>24} {:>6} {:>6} {:>24}{}",
                    opt_usize(c.k()),
                    c.side().map(|x| x.as_str()).unwrap_or(""),
                    fmt_real(c.p_eval),
                    c.a,
                    c.b,
                    fmt_real(c.prob),
                    if Some(i) == argmin {
                        "  <- minimum"
                    } else {
                        ""
                    }
                )
                .unwrap();
            }
            if argmin.is_none() {
                writeln!(s, "no interior limits; candidate set is empty").unwrap();
            }
            s
        }
    };
    Ok(Outcome::ok(stdout))
}

// ---------------------------------------------------------------- sweep

#[derive(Serialize)]
struct SweepInputs {
    n_min: u64,
    n_max: u64,
    delta: Real,
    family: &'static str,
    variant: &'static str,
    method: &'static str,
    format: &'static str,
}

#[derive(Serialize)]
struct SweepRow {
    n: u64,
    min_coverage: Real,
    argmin_k: Option<usize>,
    argmin_side: Option<&'static str>,
    method: &'static str,
    fallback: Option<String>,
}

#[derive(Serialize)]
struct SweepResults {
    rows: Vec<SweepRow>,
    non_monotone_in_n: bool,
    first_decrease_after_increase: Option<u64>,
}

/// First `n` at which the sequence decreases after having increased.
pub fn first_decrease_after_increase(values: &[(u64, f64)]) -> Option<u64> {
    let mut rose = false;
    for w in values.windows(2) {
        if w[1].1 > w[0].1 {
            rose = true;
        } else if rose && w[1].1 < w[0].1 {
            return Some(w[1].0);
        }
    }
    None
}

pub fn sweep(a: &SweepArgs, snap: SnapTolerance) -> Result<Outcome, CliError> {
    if a.n_min > a.n_max {
        return Err(CliError::usage(format!(
            "--n-min {} exceeds --n-max {}",
            a.n_min, a.n_max
        )));
    }
    if !(a.delta > 0.0 && a.delta < 1.0) {
        return Err(CliError::usage(format!(
            "delta must lie in (0, 1), got {}",
            a.delta
        )));
    }
    let variant = EndpointRule::from(a.variant);
    if a.method == MethodArg::Theorem1 && a.family != FamilyArg::Wald {
        return Err(CliError::usage("--method theorem1 requires --family wald"));
    }
    let solved: Vec<(u64, Solved)> = (a.n_min..=a.n_max)
        .into_par_iter()
        .map(|n| {
            let spec = spec_for(n, a.delta)?;
            let s = solve_min(
                &spec,
                a.family,
                variant,
                a.method,
                snap,
                OnFailure::Fallback,
            )?;
            Ok((n, s))
        })
        .collect::<Result<_, CliError>>()?;
    let series: Vec<(u64, f64)> = solved.iter().map(|(n, s)| (*n, s.report.value)).collect();
    let first_decrease = first_decrease_after_increase(&series);
    let rows: Vec<SweepRow> = solved
        .into_iter()
        .map(|(n, s)| SweepRow {
            n,
            min_coverage: Real(s.report.value),
            argmin_k: s.report.argmin.k(),
            argmin_side: s.report.argmin.side().map(|x| x.as_str()),
            method: method_name(s.report.method),
            fallback: s.fallback,
        })
        .collect();
    let stdout = match a.format {
        FormatArg::Json => Envelope {
            schema_version: crate::output::SCHEMA_VERSION,
            command: "sweep",
            inputs: SweepInputs {
                n_min: a.n_min,
                n_max: a.n_max,
                delta: Real(a.delta),
                family: a.family.as_str(),
                variant: variant.as_str(),
                method: a.method.as_str(),
                format: "json",
            },
            results: SweepResults {
                rows,
                non_monotone_in_n: first_decrease.is_some(),
                first_decrease_after_increase: first_decrease,
            },
            provenance: provenance(
                None,
                Some(a.method.as_str()),
                None,
                Some(variant.statistic()),
                snap,
                None,
            ),
        }
        .to_json(),
        FormatArg::Csv => {
            let mut s = String::from("n,min_coverage,argmin_k,argmin_side,method,fallback\n");
            for r in &rows {
                writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    r.n,
                    fmt_real(r.min_coverage.0),
                    opt_usize(r.argmin_k),
                    r.argmin_side.unwrap_or(""),
                    r.method,
                    r.fallback.as_deref().map(csv_quote).unwrap_or_default()
                )
                .unwrap();
            }
            s
        }
        FormatArg::Text => {
            let mut s = format!(
                "{} interval, {} endpoints, delta = {}\n",
                a.family.as_str(),
                variant.as_str(),
                fmt_real(a.delta)
            );
            writeln!(
                s,
                "{:>8} {:>24} {:>8} {:>6} {:>14}",
                "n", "min_coverage", "argmin_k", "side", "method"
            )
            .unwrap();
            for r in &rows {
                writeln!(
                    s,
                    "{:>8} {:>24} {:>8} {:>6} {:>14}",
                    r.n,
                    fmt_real(r.min_coverage.0),
                    opt_usize(r.argmin_k),
                    r.argmin_side.unwrap_or("-"),
                    r.method
                )
                .unwrap();
            }
            match first_decrease {
                Some(n) => writeln!(s, "minimum coverage is not monotone in n (first decrease after a rise at n = {n})"),
                None => writeln!(s, "minimum coverage is monotone over this range"),
            }
            .unwrap();
            s
        }
    };
    Ok(Outcome::ok(stdout))
}

fn csv_quote(text: &str) -> String {
    format!("\"{}\"", text.replace('"', "\"\""))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn companion_path() {
        assert_eq!(
            breakpoints_path(Path::new("/tmp/x/curve.csv")),
            PathBuf::from("/tmp/x/curve.breakpoints.csv")
        );
        assert_eq!(
            breakpoints_path(Path::new("plain")),
            PathBuf::from("plain.breakpoints.csv")
        );
    }

    #[test]
    fn decrease_detection() {
        assert_eq!(
            first_decrease_after_increase(&[(1, 0.3), (2, 0.2), (3, 0.1)]),
            None
        );
        assert_eq!(
            first_decrease_after_increase(&[(1, 0.1), (2, 0.2), (3, 0.2), (4, 0.15)]),
            Some(4)
        );
    }
}
