//! Total emission rate of a point dipole near a dielectric cylinder from
//! the radiated power, `gamma / gamma_0 = P / P_0`, computed with a 3D Yee
//! solver and normalized by a vacuum run on the identical grid.

mod flux;
mod grid;
pub mod map;
mod solver;
mod source;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cache::{Cache, CacheError};
use crate::dipole::Orientation;
use crate::fiber::FiberSpec;

use flux::{BoxBounds, FluxBox};
use grid::{Axis, LowSide, Medium, Parity, Scatterer};
use solver::{Component, Solver};
use source::Pulse;

pub use map::{interpolate, sweep, CellFailure, DecayMap, Interpolated, MapProvenance, Normalization, SweepOptions, SweepSummary};

/// Bumped whenever a change alters numerical output; part of every cache key.
pub const SOLVER_VERSION: &str = "yee-cpml-1";
const CACHE_NAMESPACE: &str = "fdtd-run";

#[derive(Debug, Error)]
pub enum FdtdError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("fields diverged after {steps} steps (Courant factor {courant})")]
    Courant { steps: usize, courant: f64 },
    #[error("flux closure defect {defect:.4} exceeds {limit} (outer {outer:.6e}, inner {inner:.6e})")]
    Accuracy { defect: f64, limit: f64, outer: f64, inner: f64 },
    #[error("flux not converged after {steps} steps (last relative change {change:.3e})")]
    Convergence { steps: usize, change: f64 },
    #[error("query outside map: {0}")]
    Range(String),
    #[error(transparent)]
    Cache(#[from] CacheError),
}

/// What occupies the scene next to the dipole.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scene {
    /// The fiber of `SimulationConfig::fiber`.
    #[default]
    Fiber,
    /// Nothing; the grid is laid out exactly as for the fiber.
    Vacuum,
    /// Dielectric half-space of the fiber's index with its surface
    /// `distance_nm` from the dipole, normal along the dipole's `r`.
    HalfSpace,
}

fn d_grid() -> f64 {
    10.0
}
fn d_courant() -> f64 {
    0.5
}
fn d_margin() -> f64 {
    500.0
}
fn d_pml() -> usize {
    10
}
fn d_grading() -> f64 {
    4.0
}
fn d_bandwidth() -> f64 {
    0.5
}
fn d_max_steps() -> usize {
    20_000
}
fn d_tolerance() -> f64 {
    1e-5
}
fn d_samples() -> usize {
    8
}
fn d_true() -> bool {
    true
}
fn d_closure() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub fiber: FiberSpec,
    #[serde(default)]
    pub scene: Scene,
    /// Dipole distance from the fiber surface.
    pub distance_nm: f64,
    /// Dipole azimuth around the fiber axis.
    #[serde(default)]
    pub azimuth_rad: f64,
    pub orientation: Orientation,
    #[serde(default = "d_grid")]
    pub grid_nm: f64,
    #[serde(default = "d_courant")]
    pub courant: f64,
    /// Free space kept between the scatterer/dipole and the absorbing layers.
    #[serde(default = "d_margin")]
    pub margin_nm: f64,
    #[serde(default = "d_pml")]
    pub pml_cells: usize,
    /// Polynomial grading order of the PML conductivity.
    #[serde(default = "d_grading")]
    pub pml_grading: f64,
    /// Source bandwidth as a fraction of the analysis angular frequency.
    #[serde(default = "d_bandwidth")]
    pub bandwidth: f64,
    #[serde(default = "d_max_steps")]
    pub max_steps: usize,
    /// Relative change of the DFT flux below which the run has converged.
    #[serde(default = "d_tolerance")]
    pub tolerance: f64,
    /// Sub-samples per cell edge used to rasterize the permittivity.
    #[serde(default = "d_samples")]
    pub subpixel_samples: usize,
    /// Exploit the mirror planes through the dipole when the azimuth allows.
    #[serde(default = "d_true")]
    pub mirrors: bool,
    #[serde(default = "d_closure")]
    pub closure_limit: f64,
}

impl SimulationConfig {
    /// Defaults for a dipole near `fiber`.
    pub fn new(fiber: FiberSpec, distance_nm: f64, orientation: Orientation) -> Self {
        Self {
            fiber,
            scene: Scene::Fiber,
            distance_nm,
            azimuth_rad: 0.0,
            orientation,
            grid_nm: d_grid(),
            courant: d_courant(),
            margin_nm: d_margin(),
            pml_cells: d_pml(),
            pml_grading: d_grading(),
            bandwidth: d_bandwidth(),
            max_steps: d_max_steps(),
            tolerance: d_tolerance(),
            subpixel_samples: d_samples(),
            mirrors: true,
            closure_limit: d_closure(),
        }
    }

    pub fn validate(&self) -> Result<(), FdtdError> {
        let bad = |m: String| Err(FdtdError::InvalidConfig(m));
        self.fiber.validate().map_err(|e| FdtdError::InvalidConfig(e.to_string()))?;
        let max_grid = self.fiber.wavelength_nm / (30.0 * self.fiber.core_index);
        if !(self.grid_nm > 0.0 && self.grid_nm <= max_grid + 1e-9) {
            return bad(format!("grid spacing {} nm must be in (0, {max_grid:.2}] (lambda/30 in the core)", self.grid_nm));
        }
        if !(self.courant > 0.0 && self.courant <= 1.0 / 3f64.sqrt()) {
            return bad(format!("Courant factor {} must be in (0, 1/sqrt 3]", self.courant));
        }
        if !(self.distance_nm >= 0.0 && self.distance_nm.is_finite()) {
            return bad(format!("distance {} nm must be non-negative", self.distance_nm));
        }
        if !(self.margin_nm >= 10.0 * self.grid_nm) {
            return bad(format!("margin {} nm must span at least 10 cells", self.margin_nm));
        }
        if self.pml_cells < 4 {
            return bad("at least 4 PML cells required".into());
        }
        if !(self.bandwidth > 0.05 && self.bandwidth <= 1.0) {
            return bad(format!("bandwidth {} must be in (0.05, 1]", self.bandwidth));
        }
        if self.subpixel_samples == 0 || self.max_steps == 0 || !(self.tolerance > 0.0) {
            return bad("subpixel_samples, max_steps and tolerance must be positive".into());
        }
        if !self.azimuth_rad.is_finite() {
            return bad("azimuth must be finite".into());
        }
        Ok(())
    }

    /// The vacuum reference paired with this run.
    pub fn vacuum_reference(&self) -> Self {
        Self { scene: Scene::Vacuum, ..self.clone() }
    }

    fn uses_mirrors(&self) -> bool {
        self.mirrors && self.azimuth_rad.sin().abs() < 1e-9
    }
}

/// Raw outcome of one time-domain run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Radiated power per unit squared current moment, outer box.
    pub power: f64,
    pub inner_power: f64,
    pub closure_defect: f64,
    pub steps: usize,
    pub cells: [usize; 3],
    pub flux_samples: usize,
    /// Distance from the dipole to the nearest dielectric, in cells.
    pub surface_cells: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerResult {
    pub power: f64,
    pub vacuum_power: f64,
    pub ratio: f64,
    pub closure_defect: f64,
    pub vacuum_closure_defect: f64,
    pub grid_nm: f64,
    pub steps: usize,
    pub vacuum_steps: usize,
    /// Vacuum power over the continuum dipole formula `omega^2 / 12 pi`.
    pub vacuum_vs_analytic: f64,
    pub surface_cells: Option<f64>,
    pub config_hash: String,
}

struct Layout {
    solver: Solver,
    sources: Vec<(Component, usize, usize, usize, f64)>,
    boxes: [BoxBounds; 2],
    surface_cells: Option<f64>,
}

fn cells(extent: f64, delta: f64) -> usize {
    (extent / delta - 1e-9).ceil().max(0.0) as usize
}

fn build(cfg: &SimulationConfig) -> Result<Layout, FdtdError> {
    let delta = cfg.grid_nm;
    let dt = cfg.courant * delta;
    let r0 = cfg.fiber.radius_nm;
    let rho = r0 + cfg.distance_nm;
    let (st, ct) = cfg.azimuth_rad.sin_cos();
    let mirrors = cfg.uses_mirrors();
    // dipole at the origin, fiber axis at (cx, cy)
    let (cx, cy) = if mirrors { (-rho * ct.signum(), 0.0) } else { (-rho * ct, -rho * st) };
    let dir = match (cfg.orientation, mirrors) {
        (Orientation::R, true) => [ct.signum(), 0.0, 0.0],
        (Orientation::Phi, true) => [0.0, ct.signum(), 0.0],
        (Orientation::R, false) => [ct, st, 0.0],
        (Orientation::Phi, false) => [-st, ct, 0.0],
        (Orientation::Z, _) => [0.0, 0.0, 1.0],
    };
    let scatterer = match cfg.scene {
        Scene::Fiber => Scatterer::Cylinder { cx, cy, radius: r0, index: cfg.fiber.core_index },
        Scene::Vacuum => Scatterer::Vacuum,
        Scene::HalfSpace => Scatterer::HalfSpace { x0: -cfg.distance_nm, index: cfg.fiber.core_index },
    };
    // region that must sit inside the inner flux box: dipole plus fiber cross-section
    let (ex_lo, ex_hi) = ((cx - r0).min(0.0), (cx + r0).max(0.0));
    let (ey_lo, ey_hi) = ((cy - r0).min(0.0), (cy + r0).max(0.0));
    let m = cfg.margin_nm;
    let pml = cfg.pml_cells;
    let grading = cfg.pml_grading;
    let quantum = ((100.0 / delta).round() as usize).max(1);
    let round_up = |n: usize| n.div_ceil(quantum) * quantum;

    let x_half = mirrors && dir[0] != 0.0;
    let below = round_up(cells(m - ex_lo, delta));
    let above = round_up(cells(ex_hi + m, delta));
    let ox = pml as f64 + below as f64 + if x_half { 0.5 } else { 0.0 };
    let nx = pml + below + above + usize::from(x_half) + pml;
    let ax = Axis::new(nx, LowSide::Pml, pml, ox, delta, dt, grading);

    let (ay, az);
    if mirrors {
        let y_half = dir[1] != 0.0;
        let low = if y_half { LowSide::HalfPlane(Parity::Odd) } else { LowSide::Plane(Parity::Even) };
        let oy = if y_half { 0.5 } else { 0.0 };
        let ny = round_up(cells(ey_hi.max(ey_lo.abs()) + m, delta)) + usize::from(y_half) + pml;
        ay = Axis::new(ny, low, pml, oy, delta, dt, grading);
    } else {
        let below = round_up(cells(m - ey_lo, delta));
        let above = round_up(cells(ey_hi + m, delta));
        let ny = pml + below + above + pml;
        ay = Axis::new(ny, LowSide::Pml, pml, (pml + below) as f64, delta, dt, grading);
    }
    {
        let z_half = dir[2] != 0.0;
        let low = if z_half { LowSide::HalfPlane(Parity::Odd) } else { LowSide::Plane(Parity::Even) };
        let oz = if z_half { 0.5 } else { 0.0 };
        let nz = round_up(cells(m, delta)) + usize::from(z_half) + pml;
        az = Axis::new(nz, low, pml, oz, delta, dt, grading);
    }

    // sources
    let mut sources = Vec::new();
    let is = (ax.origin - if x_half { 0.5 } else { 0.0 }) as usize;
    if mirrors {
        let c = if dir[0] != 0.0 {
            Component::Ex
        } else if dir[1] != 0.0 {
            Component::Ey
        } else {
            Component::Ez
        };
        sources.push((c, is, 0, 0, 1.0));
    } else {
        let js = ay.origin as usize;
        if dir[0] != 0.0 {
            sources.push((Component::Ex, is - 1, js, 0, 0.5 * dir[0]));
            sources.push((Component::Ex, is, js, 0, 0.5 * dir[0]));
        }
        if dir[1] != 0.0 {
            sources.push((Component::Ey, is, js - 1, 0, 0.5 * dir[1]));
            sources.push((Component::Ey, is, js, 0, 0.5 * dir[1]));
        }
        if dir[2] != 0.0 {
            sources.push((Component::Ez, is, js, 0, 1.0));
        }
    }

    // flux boxes: outer two cells inside the absorbing layers, inner a third
    // of the margin further in
    let axes = [&ax, &ay, &az];
    let gap = 2usize;
    let inset = ((m / delta) / 3.0).floor().max(3.0) as usize;
    let mut outer = BoxBounds { lo: [0.0; 3], hi: [0.0; 3] };
    let mut inner = outer;
    for (a, axis) in axes.iter().enumerate() {
        let (lo, hi) = axis.interior();
        match axis.low {
            LowSide::Pml => {
                outer.lo[a] = (lo + gap) as f64;
                inner.lo[a] = (lo + gap + inset) as f64;
            }
            LowSide::Plane(_) => {
                outer.lo[a] = 0.0;
                inner.lo[a] = 0.0;
            }
            LowSide::HalfPlane(_) => {
                outer.lo[a] = 0.5;
                inner.lo[a] = 0.5;
            }
        }
        outer.hi[a] = (hi - gap) as f64;
        inner.hi[a] = (hi - gap - inset) as f64;
    }
    let need = [
        (ax.position(ex_lo), ax.position(ex_hi)),
        (ay.position(ey_lo), ay.position(ey_hi)),
        (az.position(0.0), az.position(0.0)),
    ];
    for (a, (lo, hi)) in need.iter().enumerate() {
        if !(inner.lo[a] < lo - 1.0 || axes[a].low.is_mirror()) || !(inner.hi[a] > hi + 1.0) {
            return Err(FdtdError::InvalidConfig(format!(
                "margin {} nm too small for nested flux boxes along axis {a}",
                cfg.margin_nm
            )));
        }
    }

    let medium = Medium::rasterize(&scatterer, &ax, &ay, cfg.subpixel_samples);
    let surface_cells = match cfg.scene {
        Scene::Vacuum => None,
        _ => Some(cfg.distance_nm / delta),
    };
    let solver = Solver::new(ax, ay, az, medium, cfg.courant);
    Ok(Layout { solver, sources, boxes: [outer, inner], surface_cells })
}

/// One time-domain run without vacuum pairing.
pub fn simulate(cfg: &SimulationConfig) -> Result<RunRecord, FdtdError> {
    cfg.validate()?;
    let Layout { mut solver, sources, boxes, surface_cells } = build(cfg)?;
    let pulse = Pulse::new(cfg.fiber.wavelength_nm, cfg.bandwidth, solver.dt);
    let mut outer = FluxBox::new(&solver, boxes[0]);
    let mut inner = FluxBox::new(&solver, boxes[1]);
    let omega = pulse.omega;
    let dt = solver.dt;
    let check_every = 20usize;
    let drive_end = pulse.end_step();
    let mut last = f64::NAN;
    let mut streak = 0;
    let mut change = f64::INFINITY;
    let mut steps = 0;
    let mut converged = false;
    for n in 0..cfg.max_steps {
        solver.step_h();
        let ph = Complex64::from_polar(dt, omega * (n as f64 + 0.5) * dt);
        outer.accumulate_h(&solver, ph);
        inner.accumulate_h(&solver, ph);
        solver.step_e();
        if n < drive_end {
            let current = pulse.current(n);
            for &(c, i, j, k, w) in &sources {
                solver.inject(c, i, j, k, w * current);
            }
        }
        let pe = Complex64::from_polar(dt, omega * (n as f64 + 1.0) * dt);
        outer.accumulate_e(&solver, pe);
        inner.accumulate_e(&solver, pe);
        steps = n + 1;
        if steps % check_every == 0 {
            let p = outer.power();
            if !p.is_finite() || solver.ex.iter().step_by(97).any(|v| !v.is_finite()) {
                return Err(FdtdError::Courant { steps, courant: cfg.courant });
            }
            if steps > drive_end {
                change = ((p - last) / p).abs();
                streak = if change < cfg.tolerance { streak + 1 } else { 0 };
                if streak >= 3 {
                    converged = true;
                    break;
                }
            }
            last = p;
        }
    }
    if !converged {
        return Err(FdtdError::Convergence { steps, change });
    }
    let norm = pulse.spectrum().norm_sqr();
    let p_out = outer.power() / norm;
    let p_in = inner.power() / norm;
    let defect = ((p_out - p_in) / p_out).abs();
    Ok(RunRecord {
        power: p_out,
        inner_power: p_in,
        closure_defect: defect,
        steps,
        cells: [solver.ax.n, solver.ay.n, solver.az.n],
        flux_samples: outer.samples() + inner.samples(),
        surface_cells,
    })
}

#[derive(Serialize)]
struct RunKey<'a> {
    solver: &'a str,
    config: &'a SimulationConfig,
}

/// Vacuum runs depend only on the lattice, the sources and the time stepping,
/// so equal layouts share one cache entry.
#[derive(Serialize)]
struct VacuumKey<'a> {
    solver: &'a str,
    cells: [usize; 3],
    lows: [String; 3],
    origins: [f64; 3],
    sources: &'a [(Component, usize, usize, usize, f64)],
    boxes: [([f64; 3], [f64; 3]); 2],
    grid_nm: f64,
    courant: f64,
    pml_cells: usize,
    pml_grading: f64,
    bandwidth: f64,
    wavelength_nm: f64,
    max_steps: usize,
    tolerance: f64,
}

fn cache_key_value(cfg: &SimulationConfig) -> Result<serde_json::Value, FdtdError> {
    let to_value = |v: serde_json::Result<serde_json::Value>| v.map_err(|e| FdtdError::Cache(e.into()));
    if cfg.scene != Scene::Vacuum {
        return to_value(serde_json::to_value(RunKey { solver: SOLVER_VERSION, config: cfg }));
    }
    cfg.validate()?;
    let l = build(cfg)?;
    let axes = [&l.solver.ax, &l.solver.ay, &l.solver.az];
    let key = VacuumKey {
        solver: SOLVER_VERSION,
        cells: axes.map(|a| a.n),
        lows: axes.map(|a| format!("{:?}", a.low)),
        origins: axes.map(|a| a.origin),
        sources: &l.sources,
        boxes: l.boxes.map(|b| (b.lo, b.hi)),
        grid_nm: cfg.grid_nm,
        courant: cfg.courant,
        pml_cells: cfg.pml_cells,
        pml_grading: cfg.pml_grading,
        bandwidth: cfg.bandwidth,
        wavelength_nm: cfg.fiber.wavelength_nm,
        max_steps: cfg.max_steps,
        tolerance: cfg.tolerance,
    };
    to_value(serde_json::to_value(key))
}

pub fn config_hash(cfg: &SimulationConfig) -> Result<String, FdtdError> {
    Ok(Cache::key(CACHE_NAMESPACE, &cache_key_value(cfg)?)?)
}

/// [`simulate`] through an optional cache.
pub fn simulate_cached(cfg: &SimulationConfig, cache: Option<&Cache>) -> Result<RunRecord, FdtdError> {
    let key = cache_key_value(cfg)?;
    if let Some(c) = cache {
        if let Some(hit) = c.get(CACHE_NAMESPACE, &key)? {
            return Ok(hit);
        }
    }
    let rec = simulate(cfg)?;
    if let Some(c) = cache {
        c.put(CACHE_NAMESPACE, &key, &rec)?;
    }
    Ok(rec)
}

/// Continuum radiated power of a unit current moment at angular frequency `omega`.
pub fn analytic_vacuum_power(omega: f64) -> f64 {
    omega * omega / (12.0 * PI)
}

/// Runs `cfg` and its vacuum reference and returns `P / P_0`.
pub fn run_dipole(cfg: &SimulationConfig, cache: Option<&Cache>) -> Result<PowerResult, FdtdError> {
    let rec = simulate_cached(cfg, cache)?;
    let vac = if cfg.scene == Scene::Vacuum { rec.clone() } else { simulate_cached(&cfg.vacuum_reference(), cache)? };
    for r in [&rec, &vac] {
        if r.closure_defect > cfg.closure_limit {
            return Err(FdtdError::Accuracy {
                defect: r.closure_defect,
                limit: cfg.closure_limit,
                outer: r.power,
                inner: r.inner_power,
            });
        }
    }
    let omega = 2.0 * PI / cfg.fiber.wavelength_nm;
    Ok(PowerResult {
        power: rec.power,
        vacuum_power: vac.power,
        ratio: rec.power / vac.power,
        closure_defect: rec.closure_defect,
        vacuum_closure_defect: vac.closure_defect,
        grid_nm: cfg.grid_nm,
        steps: rec.steps,
        vacuum_steps: vac.steps,
        vacuum_vs_analytic: vac.power / analytic_vacuum_power(omega),
        surface_cells: rec.surface_cells,
        config_hash: config_hash(cfg)?,
    })
}
