//! Deterministic rendering: every float is printed with 17 significant digits.

use binocov::{CandidateEval, MinCoverageReport};
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

pub const SCHEMA_VERSION: &str = "1.0.0";

/// Round-trip-safe decimal form of a float, independent of locale.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// A float that serializes as a JSON number with 17 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return serializer.serialize_none();
        }
        let raw = RawValue::from_string(fmt_real(self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(serializer)
    }
}

#[derive(Debug, Serialize)]
pub struct Envelope<I: Serialize, R: Serialize> {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub inputs: I,
    pub results: R,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub method: Option<&'static str>,
    pub requested_method: Option<&'static str>,
    pub fallback: Option<String>,
    pub statistic: Option<&'static str>,
    pub tolerances: Tolerances,
    pub eps_int: Real,
}

#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    pub eps_int_absolute: Option<Real>,
    pub grid_step: Option<Real>,
    pub grid_pad: Option<Real>,
}

impl<I: Serialize, R: Serialize> Envelope<I, R> {
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("envelope serializes");
        out.push('\n');
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidateJson {
    pub k: Option<usize>,
    pub side: Option<&'static str>,
    pub approach: Option<&'static str>,
    pub p_eval: Real,
    pub a: i64,
    pub b: i64,
    pub prob: Real,
}

impl From<&CandidateEval> for CandidateJson {
    fn from(c: &CandidateEval) -> Self {
        Self {
            k: c.k(),
            side: c.side().map(|s| s.as_str()),
            approach: c.approach.map(|a| a.as_str()),
            p_eval: Real(c.p_eval),
            a: c.a,
            b: c.b,
            prob: Real(c.prob),
        }
    }
}

pub fn opt_usize(v: Option<usize>) -> String {
    v.map(|k| k.to_string()).unwrap_or_default()
}

pub fn candidate_csv_fields(c: &CandidateEval) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        opt_usize(c.k()),
        c.side().map(|s| s.as_str()).unwrap_or(""),
        c.approach.map(|a| a.as_str()).unwrap_or(""),
        fmt_real(c.p_eval),
        c.a,
        c.b,
        fmt_real(c.prob)
    )
}

pub fn describe_argmin(report: &MinCoverageReport) -> String {
    let c = &report.argmin;
    match c.source {
        Some((k, side)) => format!(
            "k = {k}, {} limit, {} set, p = {}, counts {}..={}",
            side.as_str(),
            c.approach.map(|a| a.as_str()).unwrap_or("-"),
            fmt_real(c.p_eval),
            c.a,
            c.b
        ),
        None => format!(
            "grid point p = {}, counts {}..={}",
            fmt_real(c.p_eval),
            c.a,
            c.b
        ),
    }
}
