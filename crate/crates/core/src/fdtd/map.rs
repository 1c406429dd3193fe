//! Tabulated `gamma_i(radius, distance) / gamma_0` and its interpolation.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{config_hash, run_dipole, FdtdError, SimulationConfig, SOLVER_VERSION};
use crate::cache::{content_hash, Cache};
use crate::dipole::{Orientation, PerOrientation};

/// How the tabulated ratios are anchored at large distance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// `P / P_0` against the paired vacuum run, as computed.
    #[default]
    VacuumReferenced,
    /// Each radius column divided by its value at the farthest distance.
    FarDistance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub radius_nm: f64,
    pub distance_nm: f64,
    pub orientation: Orientation,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapProvenance {
    pub solver_version: String,
    pub crate_version: String,
    /// Run parameters shared by all cells; radius, distance and orientation
    /// are overwritten per cell.
    pub base: SimulationConfig,
    pub normalization: Normalization,
    /// Cache keys of the cells, `[orientation][radius][distance]`.
    pub cell_hashes: Vec<Vec<Vec<Option<String>>>>,
    pub failures: Vec<CellFailure>,
}

/// Ratio tables indexed `[radius][distance]`; `None` marks a failed or
/// unrequested cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayMap {
    pub radii_nm: Vec<f64>,
    pub distances_nm: Vec<f64>,
    pub gamma_z: Vec<Vec<Option<f64>>>,
    pub gamma_phi: Vec<Vec<Option<f64>>>,
    pub gamma_r: Vec<Vec<Option<f64>>>,
    pub provenance: MapProvenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub cells: usize,
    pub failed: usize,
    pub computed_s: f64,
}

impl SweepSummary {
    pub fn failure_fraction(&self) -> f64 {
        if self.cells == 0 {
            0.0
        } else {
            self.failed as f64 / self.cells as f64
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SweepOptions<'a> {
    pub cache: Option<&'a Cache>,
    pub normalization: Normalization,
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1]) && v.iter().all(|x| x.is_finite())
}

/// Runs every `(radius, distance, orientation)` cell. Failing cells are
/// recorded and left empty; the sweep continues.
pub fn sweep(
    radii: &[f64],
    distances: &[f64],
    orientations: &[Orientation],
    base: &SimulationConfig,
    opts: SweepOptions<'_>,
) -> Result<(DecayMap, SweepSummary), FdtdError> {
    if radii.is_empty() || distances.is_empty() || orientations.is_empty() {
        return Err(FdtdError::InvalidConfig("sweep axes must be non-empty".into()));
    }
    if !strictly_increasing(radii) || !strictly_increasing(distances) {
        return Err(FdtdError::InvalidConfig("sweep axes must be strictly increasing".into()));
    }
    let start = Instant::now();
    let empty = vec![vec![None; distances.len()]; radii.len()];
    let mut tables = [empty.clone(), empty.clone(), empty];
    let mut hashes = vec![vec![vec![None; distances.len()]; radii.len()]; 3];
    let mut failures = Vec::new();
    let mut jobs = Vec::new();
    for &o in orientations {
        for (ri, &r) in radii.iter().enumerate() {
            for (di, &d) in distances.iter().enumerate() {
                let mut cfg = base.clone();
                cfg.fiber.radius_nm = r;
                cfg.distance_nm = d;
                cfg.orientation = o;
                jobs.push((o, ri, di, cfg));
            }
        }
    }
    // cells are independent; results are collected in job order
    let results: Vec<_> = jobs
        .par_iter()
        .map(|(o, _, _, cfg)| {
            let res = run_dipole(cfg, opts.cache);
            match &res {
                Ok(r) => log::info!("cell r0={} d={} {o}: {:.4}", cfg.fiber.radius_nm, cfg.distance_nm, r.ratio),
                Err(e) => log::warn!("cell r0={} d={} {o} failed: {e}", cfg.fiber.radius_nm, cfg.distance_nm),
            }
            res
        })
        .collect();
    let cells = jobs.len();
    for ((o, ri, di, cfg), res) in jobs.iter().zip(results) {
        hashes[o.index()][*ri][*di] = Some(config_hash(cfg)?);
        match res {
            Ok(r) => tables[o.index()][*ri][*di] = Some(r.ratio),
            Err(FdtdError::Cache(e)) => return Err(FdtdError::Cache(e)),
            Err(e) => failures.push(CellFailure {
                radius_nm: cfg.fiber.radius_nm,
                distance_nm: cfg.distance_nm,
                orientation: *o,
                error: e.to_string(),
            }),
        }
    }
    if opts.normalization == Normalization::FarDistance {
        for t in &mut tables {
            for row in t.iter_mut() {
                if let Some(Some(far)) = row.last().copied() {
                    for v in row.iter_mut().flatten() {
                        *v /= far;
                    }
                }
            }
        }
    }
    let [gamma_z, gamma_phi, gamma_r] = tables;
    let summary = SweepSummary { cells, failed: failures.len(), computed_s: start.elapsed().as_secs_f64() };
    let map = DecayMap {
        radii_nm: radii.to_vec(),
        distances_nm: distances.to_vec(),
        gamma_z,
        gamma_phi,
        gamma_r,
        provenance: MapProvenance {
            solver_version: SOLVER_VERSION.to_string(),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            base: base.clone(),
            normalization: opts.normalization,
            cell_hashes: hashes,
            failures,
        },
    };
    Ok((map, summary))
}

/// Interpolated ratio with flags for queries beyond the distance axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interpolated {
    pub value: f64,
    /// Below the smallest tabulated distance (linear extrapolation).
    pub extrapolated: bool,
    /// Beyond the largest tabulated distance (last value held).
    pub held: bool,
}

impl DecayMap {
    pub fn table(&self, o: Orientation) -> &Vec<Vec<Option<f64>>> {
        match o {
            Orientation::Z => &self.gamma_z,
            Orientation::Phi => &self.gamma_phi,
            Orientation::R => &self.gamma_r,
        }
    }

    pub fn table_mut(&mut self, o: Orientation) -> &mut Vec<Vec<Option<f64>>> {
        match o {
            Orientation::Z => &mut self.gamma_z,
            Orientation::Phi => &mut self.gamma_phi,
            Orientation::R => &mut self.gamma_r,
        }
    }

    /// A map with the given tables and empty provenance, for analytic or
    /// imported data.
    pub fn from_tables(
        radii_nm: Vec<f64>,
        distances_nm: Vec<f64>,
        tables: PerOrientation<Vec<Vec<f64>>>,
        base: SimulationConfig,
    ) -> Result<Self, FdtdError> {
        if radii_nm.is_empty() || !strictly_increasing(&radii_nm) || distances_nm.is_empty() || !strictly_increasing(&distances_nm) {
            return Err(FdtdError::InvalidConfig("map axes must be non-empty and strictly increasing".into()));
        }
        let wrap = |t: &Vec<Vec<f64>>| -> Result<Vec<Vec<Option<f64>>>, FdtdError> {
            if t.len() != radii_nm.len() || t.iter().any(|row| row.len() != distances_nm.len()) {
                return Err(FdtdError::InvalidConfig("table shape does not match axes".into()));
            }
            Ok(t.iter().map(|row| row.iter().map(|v| Some(*v)).collect()).collect())
        };
        Ok(Self {
            gamma_z: wrap(&tables.z)?,
            gamma_phi: wrap(&tables.phi)?,
            gamma_r: wrap(&tables.r)?,
            provenance: MapProvenance {
                solver_version: "external".into(),
                crate_version: env!("CARGO_PKG_VERSION").to_string(),
                base,
                normalization: Normalization::VacuumReferenced,
                cell_hashes: vec![],
                failures: vec![],
            },
            radii_nm,
            distances_nm,
        })
    }

    /// Hash of axes and tables (not provenance), used to tag downstream results.
    pub fn content_hash(&self) -> String {
        content_hash(&(&self.radii_nm, &self.distances_nm, &self.gamma_z, &self.gamma_phi, &self.gamma_r))
            .expect("tables serialize")
    }

    pub fn is_complete(&self) -> bool {
        Orientation::ALL.iter().all(|o| self.table(*o).iter().flatten().all(|v| v.is_some()))
    }

    /// CSV with columns `radius_nm, distance_nm, gamma_z, gamma_phi, gamma_r`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("radius_nm,distance_nm,gamma_z,gamma_phi,gamma_r\n");
        let f = |v: Option<f64>| v.map_or("nan".to_string(), |x| format!("{x:.6}"));
        for (ri, r) in self.radii_nm.iter().enumerate() {
            for (di, d) in self.distances_nm.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{r},{d},{},{},{}",
                    f(self.gamma_z[ri][di]),
                    f(self.gamma_phi[ri][di]),
                    f(self.gamma_r[ri][di])
                );
            }
        }
        out
    }

    /// Whitespace matrix (rows = radius, columns = distance) for one
    /// orientation; first row and column carry the axes, as read by
    /// gnuplot's `matrix nonuniform`.
    pub fn to_gnuplot_matrix(&self, o: Orientation) -> String {
        let mut out = format!("{}", self.distances_nm.len());
        for d in &self.distances_nm {
            let _ = write!(out, " {d}");
        }
        out.push('\n');
        for (ri, r) in self.radii_nm.iter().enumerate() {
            let _ = write!(out, "{r}");
            for v in &self.table(o)[ri] {
                let _ = write!(out, " {}", v.map_or("nan".to_string(), |x| format!("{x:.6}")));
            }
            out.push('\n');
        }
        out
    }

    /// Merges cells of `other` into `self` where `self` is empty and the
    /// axes coincide.
    pub fn fill_from(&mut self, other: &DecayMap) {
        for o in Orientation::ALL {
            for (ri, r) in self.radii_nm.clone().iter().enumerate() {
                let Some(ori) = other.radii_nm.iter().position(|x| (x - r).abs() < 1e-9) else { continue };
                for (di, d) in self.distances_nm.clone().iter().enumerate() {
                    let Some(odi) = other.distances_nm.iter().position(|x| (x - d).abs() < 1e-9) else { continue };
                    if self.table(o)[ri][di].is_none() {
                        let v = other.table(o)[ori][odi];
                        self.table_mut(o)[ri][di] = v;
                    }
                }
            }
        }
    }
}

fn bracket(axis: &[f64], x: f64) -> (usize, f64) {
    if axis.len() == 1 {
        return (0, 0.0);
    }
    let i = match axis.binary_search_by(|v| v.total_cmp(&x)) {
        Ok(i) => i.min(axis.len() - 2),
        Err(i) => i.clamp(1, axis.len() - 1) - 1,
    };
    (i, (x - axis[i]) / (axis[i + 1] - axis[i]))
}

/// Bilinear interpolation in `(radius, distance)`.
pub fn interpolate(map: &DecayMap, radius: f64, distance: f64, o: Orientation) -> Result<Interpolated, FdtdError> {
    let radii = &map.radii_nm;
    let dists = &map.distances_nm;
    let (rlo, rhi) = (radii[0], radii[radii.len() - 1]);
    if !(radius >= rlo - 1e-9 && radius <= rhi + 1e-9) {
        return Err(FdtdError::Range(format!("radius {radius} nm outside [{rlo}, {rhi}]")));
    }
    if !distance.is_finite() {
        return Err(FdtdError::Range(format!("distance {distance}")));
    }
    let table = map.table(o);
    let (ri, rt) = bracket(radii, radius.clamp(rlo, rhi));
    let (dmin, dmax) = (dists[0], dists[dists.len() - 1]);
    let extrapolated = distance < dmin && dists.len() > 1;
    let held = distance > dmax;
    let (di, dt) = if held {
        (dists.len().saturating_sub(2), if dists.len() > 1 { 1.0 } else { 0.0 })
    } else {
        bracket(dists, distance)
    };
    let get = |r: usize, d: usize| -> Result<f64, FdtdError> {
        table[r][d].ok_or_else(|| FdtdError::Range(format!("no value for {o} at r0={} d={}", radii[r], dists[d])))
    };
    let r2 = (ri + 1).min(radii.len() - 1);
    let d2 = (di + 1).min(dists.len() - 1);
    let along = |r: usize| -> Result<f64, FdtdError> {
        let a = get(r, di)?;
        if d2 == di {
            return Ok(a);
        }
        Ok(a + dt * (get(r, d2)? - a))
    };
    let lo = along(ri)?;
    let value = if r2 == ri || rt == 0.0 { lo } else { lo + rt * (along(r2)? - lo) };
    Ok(Interpolated { value, extrapolated, held })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::FiberSpec;

    fn linear_map() -> DecayMap {
        let radii = vec![200.0, 250.0, 300.0];
        let dists = vec![10.0, 50.0, 100.0, 200.0];
        let f = |r: f64, d: f64| 1.0 + 0.001 * r - 0.002 * d;
        let t: Vec<Vec<f64>> = radii.iter().map(|r| dists.iter().map(|d| f(*r, *d)).collect()).collect();
        let base = SimulationConfig::new(FiberSpec::nanofiber(250.0), 50.0, Orientation::Z);
        DecayMap::from_tables(radii, dists, PerOrientation::new(t.clone(), t.clone(), t), base).unwrap()
    }

    #[test]
    fn nodes_are_exact() {
        let m = linear_map();
        let v = interpolate(&m, 250.0, 100.0, Orientation::R).unwrap();
        assert_eq!(v.value, m.gamma_r[1][2].unwrap());
        assert!(!v.extrapolated && !v.held);
    }

    #[test]
    fn midpoints_of_linear_table() {
        let m = linear_map();
        let v = interpolate(&m, 225.0, 75.0, Orientation::Z).unwrap().value;
        assert!((v - (1.0 + 0.225 - 0.15)).abs() < 1e-12);
    }

    #[test]
    fn extrapolation_and_hold_are_flagged() {
        let m = linear_map();
        let below = interpolate(&m, 200.0, 0.0, Orientation::Z).unwrap();
        assert!(below.extrapolated);
        assert!((below.value - 1.2).abs() < 1e-12);
        let above = interpolate(&m, 200.0, 400.0, Orientation::Z).unwrap();
        assert!(above.held);
        assert!((above.value - (1.2 - 0.4)).abs() < 1e-12);
        assert!(interpolate(&m, 310.0, 50.0, Orientation::Z).is_err());
    }

    #[test]
    fn csv_layout() {
        let csv = linear_map().to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("radius_nm,distance_nm,gamma_z,gamma_phi,gamma_r"));
        assert_eq!(lines.count(), 12);
    }
}
