use std::fmt;

/// Labels of the structural assumptions and side conditions that the
/// checkers in this crate can report as violated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Assumption {
    H1,
    H2,
    H4,
    H5,
    Unif,
    Borne,
    Nondeg,
    Ezero,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Assumption::H1 => "H1",
            Assumption::H2 => "H2",
            Assumption::H4 => "H4",
            Assumption::H5 => "H5",
            Assumption::Unif => "unif",
            Assumption::Borne => "borne",
            Assumption::Nondeg => "nondeg",
            Assumption::Ezero => "ezero",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A checked assumption does not hold for the given problem.
    #[error("[{label}] {message}")]
    Assumption { label: Assumption, message: String },

    #[error("no such field: {0}")]
    NoSuchField(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("blow-up at t = {t}: {message}")]
    BlowUp {
        t: f64,
        message: String,
        last_state: Vec<f64>,
    },

    #[error("Jacobian blow-up at t = {t}")]
    JacobianBlowUp { t: f64 },

    #[error("no mixing detected: {0}")]
    NoMixing(String),

    #[error("inconsistent corrector: {0}")]
    InconsistentCorrector(String),

    #[error("exit-time cap too tight: {capped_fraction:.4} of paths hit T_max = {t_max}")]
    ExitCap { capped_fraction: f64, t_max: f64 },

    #[error("not a loop: endpoints {distance:.3e} apart on the torus")]
    NotALoop { distance: f64 },

    #[error("no support detected; lower theta")]
    EmptySupport,

    #[error("schema: {0}")]
    Schema(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn assumption(label: Assumption, message: impl Into<String>) -> Self {
        Error::Assumption {
            label,
            message: message.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Error::Invalid(message.into())
    }

    /// The violated assumption, if this error is an assumption failure.
    pub fn assumption_label(&self) -> Option<Assumption> {
        match self {
            Error::Assumption { label, .. } => Some(*label),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
