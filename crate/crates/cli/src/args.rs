use std::path::PathBuf;

use binocov::EndpointRule;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "binocov",
    version,
    about = "Exact coverage analysis for binomial proportion intervals"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimum coverage probability of an interval family
    MinCoverage(MinCoverageArgs),
    /// Coverage probability at one value of p
    Coverage(CoverageArgs),
    /// Coverage curve samples and breakpoints, written as CSV (or JSON)
    Curve(CurveArgs),
    /// Closed-form Wald candidate table
    Candidates(CandidatesArgs),
    /// Minimum coverage for every n in a range
    Sweep(SweepArgs),
    /// Run the built-in invariant suites
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Wald,
    Wilson,
    AgrestiCoull,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Closed,
    Open,
}

impl From<VariantArg> for EndpointRule {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Closed => EndpointRule::Closed,
            VariantArg::Open => EndpointRule::Open,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Auto,
    Theorem1,
    BoundaryScan,
}

impl MethodArg {
    pub fn as_str(self) -> &'static str {
        match self {
            MethodArg::Auto => "auto",
            MethodArg::Theorem1 => "theorem1",
            MethodArg::BoundaryScan => "boundary-scan",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Number of trials
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    /// Nominal non-coverage level (interval level is 1 - delta)
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, value_enum, default_value_t = FamilyArg::Wald)]
    pub family: FamilyArg,
    #[arg(long, value_enum, default_value_t = VariantArg::Closed)]
    pub variant: VariantArg,
}

#[derive(Debug, Clone, Args)]
pub struct MinCoverageArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
}

#[derive(Debug, Clone, Args)]
pub struct CoverageArgs {
    #[command(flatten)]
    pub common: Common,
    /// True proportion, strictly inside (0, 1)
    #[arg(long)]
    pub p: f64,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
}

#[derive(Debug, Clone, Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    pub samples_per_piece: u64,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
    /// Output file; CSV output also writes `<stem>.breakpoints.csv` next to it
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CandidatesArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, value_enum, default_value_t = VariantArg::Closed)]
    pub variant: VariantArg,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub n_min: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub n_max: u64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, value_enum, default_value_t = FamilyArg::Wald)]
    pub family: FamilyArg,
    #[arg(long, value_enum, default_value_t = VariantArg::Closed)]
    pub variant: VariantArg,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 300, value_parser = clap::value_parser!(u64).range(2..))]
    pub n_max: u64,
    /// Comma-separated delta values
    #[arg(long, default_value = "0.1,0.05,0.01", value_parser = parse_deltas)]
    pub deltas: Deltas,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Random (n, delta, p) points for the Monte Carlo suite
    #[arg(long, default_value_t = 20)]
    pub mc_points: u64,
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub mc_trials: u64,
    /// Overrides the integer-snap coefficient (fault injection)
    #[arg(long, hide = true)]
    pub eps_int: Option<f64>,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    pub format: FormatArg,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deltas(pub Vec<f64>);

/// Parses a non-empty comma-separated list of deltas, each in (0, 1).
pub fn parse_deltas(text: &str) -> Result<Deltas, String> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        let d: f64 = part
            .parse()
            .map_err(|_| format!("invalid delta `{part}`"))?;
        if !(d > 0.0 && d < 1.0) {
            return Err(format!("delta must lie in (0, 1), got {part}"));
        }
        out.push(d);
    }
    Ok(Deltas(out))
}

pub fn parse_args<I, T>(args: I) -> Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    Cli::try_parse_from(args)
}
