use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the operation's domain (bad symbol, inadmissible word, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("adjacency matrix is not mixing: no positive power A^M with M <= {cap}")]
    NotMixing { cap: usize },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("numeric failure: {what} (residual {residual:e})")]
    Numeric { what: String, residual: f64 },

    #[error("potential is cohomologous to a constant (variance {variance:e})")]
    Cohomologous { variance: f64 },

    #[error("cannot certify strong separation (best lower bound {bound:e} at depth {depth})")]
    CannotCertify { bound: f64, depth: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Stable machine-readable reason string, printed by the CLI on failure.
    pub fn reason(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::NotMixing { .. } => "not_mixing",
            Error::Resource(_) => "resource",
            Error::Numeric { .. } => "numeric",
            Error::Cohomologous { .. } => "cohomologous",
            Error::CannotCertify { .. } => "cannot_certify",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Toml(_) => "toml",
        }
    }

    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Toml(_) => 2,
            Error::NotMixing { .. } => 3,
            Error::Cohomologous { .. } => 4,
            Error::CannotCertify { .. } => 5,
            Error::Numeric { .. } => 6,
            Error::Resource(_) => 7,
            Error::Domain(_) => 8,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => 9,
        }
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
