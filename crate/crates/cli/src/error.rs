use purcell::atom_env::EnvError;
use purcell::averaging::AveragingError;
use purcell::cache::CacheError;
use purcell::fdtd::FdtdError;
use purcell::fiber::FiberError;
use purcell::numerics::NumericsError;
use purcell::tcspc::TcspcError;
use thiserror::Error;

pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_INVERSION: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("convergence failure: {0}")]
    Convergence(String),
    #[error("inversion failure: {0}")]
    Inversion(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Convergence(_) => EXIT_CONVERGENCE,
            CliError::Inversion(_) => EXIT_INVERSION,
            CliError::Other(_) => EXIT_OTHER,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<CacheError> for CliError {
    fn from(e: CacheError) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<NumericsError> for CliError {
    fn from(e: NumericsError) -> Self {
        match e {
            NumericsError::Domain(_) => CliError::Config(e.to_string()),
            _ => CliError::Convergence(e.to_string()),
        }
    }
}

impl From<FiberError> for CliError {
    fn from(e: FiberError) -> Self {
        match e {
            FiberError::Numerics(n) => n.into(),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<FdtdError> for CliError {
    fn from(e: FdtdError) -> Self {
        match e {
            FdtdError::InvalidConfig(_) | FdtdError::Range(_) => CliError::Config(e.to_string()),
            FdtdError::Cache(c) => c.into(),
            _ => CliError::Convergence(e.to_string()),
        }
    }
}

impl From<EnvError> for CliError {
    fn from(e: EnvError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<TcspcError> for CliError {
    fn from(e: TcspcError) -> Self {
        match e {
            TcspcError::Numerics(n) => n.into(),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<AveragingError> for CliError {
    fn from(e: AveragingError) -> Self {
        match e {
            AveragingError::Inversion { .. } => CliError::Inversion(e.to_string()),
            AveragingError::Map(m) => m.into(),
            AveragingError::Fiber(f) => f.into(),
            AveragingError::Numerics(n) => n.into(),
            _ => CliError::Config(e.to_string()),
        }
    }
}
