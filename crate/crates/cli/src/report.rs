//! Output files, provenance records and the figure report.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use purcell::cache::sha256_hex;
use purcell::fdtd::SOLVER_VERSION;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Hashes tying an output to everything it was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub command: String,
    pub crate_version: String,
    pub solver_version: String,
    pub config_hash: String,
    /// Content hashes of inputs (maps, profiles, models, histograms).
    pub inputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new(command: &str, config_hash: &str) -> Self {
        Self {
            command: command.into(),
            crate_version: env!("CARGO_PKG_VERSION").into(),
            solver_version: SOLVER_VERSION.into(),
            config_hash: config_hash.into(),
            inputs: BTreeMap::new(),
            seed: None,
        }
    }

    pub fn input(mut self, name: &str, hash: impl Into<String>) -> Self {
        self.inputs.insert(name.into(), hash.into());
        self
    }
}

/// A published reference value with its one-sigma error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportValue {
    pub name: String,
    pub value: f64,
    /// Model uncertainty, when one is estimated.
    pub uncertainty: Option<f64>,
    pub measured: Option<Measured>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cells: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub values: Vec<ReportValue>,
    pub cells: Option<CellSummary>,
    pub provenance: Provenance,
    /// The only field that differs between identical re-runs.
    pub wall_clock_s: f64,
}

/// Where results go: files under a directory, or stdout.
pub struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    pub fn new(dir: Option<PathBuf>) -> Result<Self, CliError> {
        if let Some(d) = &dir {
            fs::create_dir_all(d).map_err(|e| CliError::Other(format!("{}: {e}", d.display())))?;
        }
        Ok(Self { dir })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Writes `name` under the directory, or prints it when there is none.
    pub fn emit(&self, name: &str, contents: &str) -> Result<(), CliError> {
        match &self.dir {
            Some(d) => {
                let p = d.join(name);
                fs::write(&p, contents).map_err(|e| CliError::Other(format!("{}: {e}", p.display())))?;
                log::info!("wrote {}", p.display());
            }
            None => print!("{contents}"),
        }
        Ok(())
    }

    /// A data file with a `.provenance.json` sidecar carrying its hash.
    pub fn emit_with_sidecar(&self, name: &str, contents: &str, prov: &Provenance) -> Result<(), CliError> {
        self.emit(name, contents)?;
        let sidecar = Sidecar { file: name.into(), sha256: sha256_hex(contents.as_bytes()), provenance: prov.clone() };
        let text = serde_json::to_string_pretty(&sidecar)? + "\n";
        match &self.dir {
            Some(_) => self.emit(&format!("{name}.provenance.json"), &text),
            None => {
                log::info!("provenance: {}", serde_json::to_string(&sidecar)?);
                Ok(())
            }
        }
    }

    pub fn emit_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        self.emit(name, &(serde_json::to_string_pretty(value)? + "\n"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub file: String,
    pub sha256: String,
    pub provenance: Provenance,
}

/// A result together with its provenance, for JSON outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Tagged<'a, T: Serialize> {
    pub result: &'a T,
    pub provenance: &'a Provenance,
}
