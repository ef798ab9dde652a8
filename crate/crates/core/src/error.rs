use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value violates an invariant. `key` names the offending
    /// field (dotted path) so diagnostics can point at it.
    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },

    /// Adaptive quadrature did not reach the requested tolerance.
    #[error(
        "quadrature did not converge on [{lower}, {upper}]: estimate {estimate:e}, \
         error {error:e} after {intervals} intervals"
    )]
    Quadrature {
        lower: f64,
        upper: f64,
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    /// The trajectory state became non-finite.
    #[error("integration failure in trajectory {trajectory} at t = {time}: {reason}")]
    Integration {
        trajectory: u64,
        time: f64,
        reason: String,
    },

    /// Too many trajectories of an ensemble failed.
    #[error("ensemble aborted: {failed} of {total} trajectories failed (first: {first})")]
    EnsembleAborted {
        failed: usize,
        total: usize,
        first: Box<Error>,
    },

    /// Signed weights cancel: the ratio estimator is undefined.
    #[error("sign problem at t = {time}: sum of weights {sum:e} is within 5 standard errors ({se:e}) of zero")]
    SignProblem { time: f64, sum: f64, se: f64 },

    /// Rejection sampling accepted too few proposals.
    #[error("envelope misconfiguration: acceptance {accepted} of {proposals} proposals")]
    Envelope { accepted: usize, proposals: usize },

    /// Operation is not defined for the given input.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// An operation was applied to data it is not meant for.
    #[error("misuse: {0}")]
    Misuse(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {message}")]
    Format { path: String, message: String },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
