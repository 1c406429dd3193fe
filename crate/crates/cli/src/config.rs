//! Run configuration: JSON checked against the shipped schema, then
//! deserialized with unknown keys rejected.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use jsonschema::JSONSchema;
use purcell::atom_env::EnvModel;
use purcell::averaging::{AveragingOptions, Model, MultilevelSpec, Polarization};
use purcell::fdtd::{Normalization, SimulationConfig};
use purcell::fiber::FiberSpec;
use purcell::tcspc::{MixtureModel, WindowPolicy};
use purcell::Orientation;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub const SCHEMA: &str = include_str!("../schema/run-config.schema.json");

fn d_fiber() -> FiberSpec {
    FiberSpec::nanofiber(235.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "d_fiber")]
    pub fiber: FiberSpec,
    #[serde(default)]
    pub environment: EnvModel,
    /// Base FDTD run; sweeps overwrite radius, distance and orientation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepAxes>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<PathBuf>,
    #[serde(default)]
    pub build_map: bool,
    #[serde(default)]
    pub average: AverageSettings,
    #[serde(default)]
    pub inference: InferenceSettings,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub tcspc: TcspcSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

fn d_orientations() -> Vec<Orientation> {
    Orientation::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    pub radii_nm: Vec<f64>,
    pub distances_nm: Vec<f64>,
    #[serde(default = "d_orientations")]
    pub orientations: Vec<Orientation>,
    #[serde(default)]
    pub normalization: Normalization,
}

impl SweepAxes {
    /// Axes of the shipped map: radius 200-280 nm, distance 5-600 nm.
    pub fn standard() -> Self {
        Self {
            radii_nm: (0..9).map(|i| 200.0 + 10.0 * i as f64).collect(),
            distances_nm: vec![
                5.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 80.0, 100.0, 125.0, 150.0, 200.0, 250.0, 300.0, 400.0, 500.0,
                600.0,
            ],
            orientations: d_orientations(),
            normalization: Normalization::VacuumReferenced,
        }
    }

    /// Coarse 6 x 8 grid over radius 180-280 nm and distance 0-400 nm.
    pub fn fig4() -> Self {
        Self {
            radii_nm: vec![180.0, 200.0, 220.0, 240.0, 260.0, 280.0],
            distances_nm: vec![0.0, 25.0, 50.0, 100.0, 150.0, 200.0, 300.0, 400.0],
            orientations: d_orientations(),
            normalization: Normalization::VacuumReferenced,
        }
    }
}

fn d_radius() -> f64 {
    235.0
}
fn d_model() -> Model {
    Model::TwoLevel
}
fn d_polarization() -> Polarization {
    Polarization::Horizontal
}
fn d_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AverageSettings {
    #[serde(default = "d_radius")]
    pub radius_nm: f64,
    #[serde(default = "d_model")]
    pub model: Model,
    #[serde(default = "d_polarization")]
    pub polarization: Polarization,
    #[serde(default)]
    pub multilevel: MultilevelSpec,
    #[serde(default)]
    pub options: AveragingOptions,
    #[serde(default = "d_fraction")]
    pub sensitivity_fraction: f64,
}

impl Default for AverageSettings {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

fn d_measured() -> f64 {
    0.943
}
fn d_sigma() -> f64 {
    0.014
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceSettings {
    #[serde(default = "d_measured")]
    pub measured: f64,
    #[serde(default = "d_sigma")]
    pub sigma: f64,
}

impl Default for InferenceSettings {
    fn default() -> Self {
        Self { measured: d_measured(), sigma: d_sigma() }
    }
}

fn d_lo() -> f64 {
    5.0
}
fn d_hi() -> f64 {
    1200.0
}
fn d_points() -> usize {
    240
}

/// Distances from the fiber surface for profile tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "d_lo")]
    pub lo_nm: f64,
    #[serde(default = "d_hi")]
    pub hi_nm: f64,
    #[serde(default = "d_points")]
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { lo_nm: d_lo(), hi_nm: d_hi(), points: d_points() }
    }
}

fn d_mixture() -> MixtureModel {
    MixtureModel::single(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TcspcSettings {
    #[serde(default = "d_mixture")]
    pub model: MixtureModel,
    #[serde(default)]
    pub window: WindowPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<PathBuf>,
}

impl Default for TcspcSettings {
    fn default() -> Self {
        Self { model: d_mixture(), window: WindowPolicy::default(), histogram: None }
    }
}

fn compiled_schema() -> &'static JSONSchema {
    static SCHEMA_CELL: OnceLock<JSONSchema> = OnceLock::new();
    SCHEMA_CELL.get_or_init(|| {
        let schema: Value = serde_json::from_str(SCHEMA).expect("shipped schema is valid JSON");
        JSONSchema::compile(&schema).expect("shipped schema compiles")
    })
}

/// Checks `value` against the schema and deserializes it.
pub fn parse(value: Value) -> Result<RunConfig, CliError> {
    if let Err(errors) = compiled_schema().validate(&value) {
        let msgs: Vec<String> = errors.map(|e| format!("{}: {e}", e.instance_path)).collect();
        return Err(CliError::Config(format!("schema violation: {}", msgs.join("; "))));
    }
    serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse(value)
}

impl RunConfig {
    /// Hash of everything that can change a result; output location,
    /// worker count and cache directory are excluded.
    pub fn result_hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        c.threads = None;
        c.cache = None;
        purcell::cache::content_hash(&c).expect("config serializes")
    }

    pub fn simulation_base(&self) -> SimulationConfig {
        self.simulation.clone().unwrap_or_else(|| SimulationConfig::new(self.fiber, 50.0, Orientation::R))
    }
}
