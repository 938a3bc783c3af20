//! Exit-code classification and the machine-readable failure record.

use std::fmt;

use quenchwave::drive::DriveError;
use quenchwave::limit::LimitError;
use quenchwave::particle::SimError;
use quenchwave::spectral::SpectralError;
use quenchwave::wave::WaveError;
use quenchwave::ModelError;
use serde::Serialize;

pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Invalid or inconsistent user input.
#[derive(Debug)]
pub struct ConfigError(String);

impl ConfigError {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn is_config(err: &(dyn std::error::Error + 'static)) -> bool {
    if err.is::<ConfigError>() || err.is::<ModelError>() || err.is::<DriveError>() {
        return true;
    }
    if let Some(e) = err.downcast_ref::<SimError>() {
        return matches!(
            e,
            SimError::StepTooLarge { .. }
                | SimError::InvalidScenario(_)
                | SimError::InterfacePosition(_)
                | SimError::ExplicitLength { .. }
                | SimError::ConstraintMismatch { .. }
                | SimError::Model(_)
                | SimError::Drive(_)
        );
    }
    if let Some(e) = err.downcast_ref::<WaveError>() {
        return wave_is_config(e);
    }
    if let Some(e) = err.downcast_ref::<SpectralError>() {
        return match e {
            SpectralError::Wave(w) => wave_is_config(w),
            other => matches!(
                other,
                SpectralError::ZeroSpeed(_)
                    | SpectralError::InvalidWindow(_)
                    | SpectralError::NotCoupled
                    | SpectralError::Width(_)
            ),
        };
    }
    if let Some(e) = err.downcast_ref::<LimitError>() {
        return matches!(e, LimitError::InconsistentState(_) | LimitError::Step(_));
    }
    false
}

fn wave_is_config(e: &WaveError) -> bool {
    matches!(e, WaveError::ZeroSpeed(_) | WaveError::Model(_))
}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(is_config) {
        EXIT_CONFIG
    } else {
        EXIT_NUMERICAL
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub error: &'static str,
    pub exit_code: i32,
    pub message: String,
    pub chain: Vec<String>,
}

impl ErrorRecord {
    pub fn from_error(err: &anyhow::Error) -> Self {
        let exit_code = exit_code(err);
        Self::new(exit_code, err.to_string(), err.chain().skip(1).map(|e| e.to_string()).collect())
    }

    pub fn new(exit_code: i32, message: String, chain: Vec<String>) -> Self {
        let error = match exit_code {
            EXIT_CONFIG => "config",
            _ => "numerical",
        };
        Self {
            error,
            exit_code,
            message,
            chain,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("error record serializes")
    }
}
