use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// The exact Wald minimum needs monotone limits, which holds for n > z^2/3.
    #[error(
        "theorem precondition violated: theta = {theta} >= 3; requires n > z^2/3 = {bound} (n = {n})"
    )]
    Precondition { n: u64, theta: f64, bound: f64 },

    #[error("interval family `{family}` is not monotone in k (first violation at k = {k})")]
    NotMonotone { family: String, k: usize },

    /// No limit falls strictly inside (0, 1), so there is nothing to evaluate.
    #[error("no interior breakpoints for n = {n}: every limit lies outside (0, 1)")]
    EmptyCandidateSet { n: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
