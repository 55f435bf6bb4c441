//! Experiment runner and single-price tool on top of `asian_hermite`.

pub mod config;
pub mod output;
pub mod presets;
pub mod price;
pub mod run;

use thiserror::Error;

/// Environment variable holding the worker-thread count.
pub const THREADS_ENV: &str = "ASIAN_HERMITE_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] asian_hermite::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("not converged: {0}")]
    NotConverged(String),
}

impl CliError {
    /// Process exit code: 2 config, 3 numerical failure, 4 not converged.
    pub fn exit_code(&self) -> u8 {
        use asian_hermite::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Engine(E::InvalidParameter(_) | E::TimeOrdering(_) | E::DimensionMismatch(_)) => 2,
            CliError::Engine(_) => 3,
            CliError::Io(_) | CliError::Csv(_) => 3,
            CliError::NotConverged(_) => 4,
        }
    }
}

/// Shortest round-trip decimal form; stable across runs and platforms.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x}")
    }
}

/// Sizes the global rayon pool from [`THREADS_ENV`] when it is set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV}: expected a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("{THREADS_ENV}: {e}")))
}
