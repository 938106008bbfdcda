use std::io::Write;
use std::path::Path;

use bitangent_core::jet_json::JetInputError;
use bitangent_core::normal_forms::NormalFormError;
use bitangent_core::thermo::ThermoError;
use bitangent_core::bitangent::TraceError;
use tempfile::NamedTempFile;
use thiserror::Error;

/// Failure of a subcommand, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed input, bad options or a numerical failure: exit 1.
    #[error("{0}")]
    Input(String),
    /// A legal request with no structure to report: exit 2.
    #[error("{0}")]
    Empty(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Empty(_) => 2,
        }
    }
}

impl From<JetInputError> for CliError {
    fn from(e: JetInputError) -> Self {
        CliError::Input(format!("jet input: {e}"))
    }
}

impl From<NormalFormError> for CliError {
    fn from(e: NormalFormError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<TraceError> for CliError {
    fn from(e: TraceError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ThermoError> for CliError {
    fn from(e: ThermoError) -> Self {
        match e {
            ThermoError::Supercritical { .. } => CliError::Empty(format!("supercritical: {e}")),
            ThermoError::NoSeed(_) => CliError::Empty(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

/// Writes to `path` through a temporary file in the same directory, or to
/// stdout when no path is given.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    let Some(path) = path else {
        print!("{contents}");
        return Ok(());
    };
    let io = |e: std::io::Error| CliError::Input(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn read_input(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}
