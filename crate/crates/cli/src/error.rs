use std::fmt;

use batchstaff::scenarios::{ConfigError, ScenarioError};
use batchstaff::simkit::SimError;
use batchstaff::staffing::StaffingError;
use batchstaff::stationary::StationaryError;

/// Process exit statuses.
pub const EXIT_IO: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn io(context: &str, err: std::io::Error) -> Self {
        Self {
            code: EXIT_IO,
            message: format!("{context}: {err}"),
        }
    }
}

fn stationary_code(e: &StationaryError) -> u8 {
    match e {
        StationaryError::InvalidParameter { .. } => EXIT_CONFIG,
        StationaryError::Unstable { .. } => EXIT_INFEASIBLE,
        StationaryError::TruncationCap { .. }
        | StationaryError::Mark(_)
        | StationaryError::Quadrature(_)
        | StationaryError::Legendre(_) => EXIT_NUMERICAL,
    }
}

fn staffing_code(e: &StaffingError) -> u8 {
    match e {
        StaffingError::InvalidTarget(_)
        | StaffingError::InvalidParameter { .. }
        | StaffingError::Mark(_) => EXIT_CONFIG,
        StaffingError::Infeasible { .. } | StaffingError::NonMonotone { .. } => EXIT_INFEASIBLE,
        StaffingError::Evaluation { source, .. } => match stationary_code(source) {
            EXIT_CONFIG => EXIT_CONFIG,
            EXIT_INFEASIBLE => EXIT_INFEASIBLE,
            _ => EXIT_NUMERICAL,
        },
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::config(format!("config error: {e}"))
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        let code = match &e {
            ScenarioError::Config(_)
            | ScenarioError::InvalidInput { .. }
            | ScenarioError::WrongMode { .. }
            | ScenarioError::Data(_) => EXIT_CONFIG,
            ScenarioError::Solve { source, .. } => staffing_code(source),
            ScenarioError::Evaluate { source, .. } => stationary_code(source),
            ScenarioError::Verify { .. } => EXIT_NUMERICAL,
        };
        let mut message = e.to_string();
        if let ScenarioError::Solve {
            source: StaffingError::NonMonotone { log, .. },
            ..
        } = &e
        {
            message.push_str("\nevaluations (c, exceedance, spread):");
            for ev in log {
                message.push_str(&format!("\n  {} {:e} {:e}", ev.c, ev.exceedance, ev.spread));
            }
        }
        Self { code, message }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        let code = match e {
            SimError::EmptySample => EXIT_NUMERICAL,
            _ => EXIT_CONFIG,
        };
        Self {
            code,
            message: format!("simulation: {e}"),
        }
    }
}
