use serde_json::json;
use thiserror::Error;

/// Failure of a CLI run, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config keys or model parameters (exit 2).
    #[error("{0}")]
    Usage(String),
    /// Unreadable or malformed input data (exit 3).
    #[error("{0}")]
    Data(String),
    /// A numerical routine failed (exit 4).
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Numerical(_) => "numerical",
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({ "error": { "kind": self.kind(), "code": self.exit_code(), "message": self.to_string() } })
    }
}

impl From<regclock::error::Error> for CliError {
    fn from(e: regclock::error::Error) -> Self {
        use regclock::error::Error as E;
        match e {
            E::Domain(_) | E::BranchCut { .. } | E::Unsupported(_) => CliError::Usage(e.to_string()),
            E::Infeasible(_) => CliError::Data(e.to_string()),
            E::OutsideDisk { .. } | E::PrecisionLoss { .. } | E::Numerical { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_errors_map_to_exit_codes() {
        use regclock::error::Error as E;
        assert_eq!(CliError::from(E::Domain("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(E::Infeasible("x".into())).exit_code(), 3);
        assert_eq!(CliError::from(E::Numerical { context: "q", detail: "d".into() }).exit_code(), 4);
        let v = CliError::Data("bad row".into()).to_json();
        assert_eq!(v["error"]["code"], 3);
        assert_eq!(v["error"]["kind"], "data");
    }
}
