//! Atom-surface interaction weights: the interpolated van der Waals /
//! Casimir-Polder potential, the thermal density it produces and the
//! surface-shifted absorption probability of a resonant probe.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cache::content_hash;

pub const HBAR: f64 = 1.054_571_817e-34;
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Smallest atom-surface distance kept on any radial grid.
pub const R_MIN_NM: f64 = 5.0;
/// Natural linewidth as an ordinary frequency, `1 / (2 pi 26.24 ns)`.
pub const GAMMA0_MHZ: f64 = 6.0666;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("distance {0} nm must be positive")]
    Domain(f64),
    #[error("invalid coefficients: {0}")]
    Coefficients(String),
    #[error("invalid environment: {0}")]
    Spec(String),
    #[error("radial grid: {0}")]
    Range(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Ground,
    Excited,
}

/// `C3` in J m^3 and `C4` in J m^4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VdwCoefficients {
    pub c3: f64,
    pub c4: f64,
    pub level: Level,
}

impl VdwCoefficients {
    pub fn ground() -> Self {
        Self { c3: 4.94e-49, c4: 4.47e-56, level: Level::Ground }
    }

    pub fn excited() -> Self {
        Self { c3: 7.05e-49, c4: 12.2e-56, level: Level::Excited }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.c3 > 0.0 && self.c3.is_finite() && self.c4 > 0.0 && self.c4.is_finite()) {
            return Err(EnvError::Coefficients(format!("C3={} and C4={} must be positive", self.c3, self.c4)));
        }
        Ok(())
    }

    /// Crossover length `C4 / C3` in metres.
    pub fn crossover_m(&self) -> f64 {
        self.c4 / self.c3
    }

    pub fn scaled(self, c3_factor: f64, c4_factor: f64) -> Self {
        Self { c3: self.c3 * c3_factor, c4: self.c4 * c4_factor, ..self }
    }
}

/// `-C4 / (r^3 (r + C4/C3))` in whatever consistent units the caller uses.
pub fn vdw_cp(c3: f64, c4: f64, r: f64) -> f64 {
    -c4 / (r * r * r * (r + c4 / c3))
}

/// Potential in joules at `r_nm` from the surface.
pub fn potential(coeffs: &VdwCoefficients, r_nm: f64) -> Result<f64, EnvError> {
    if !(r_nm > 0.0) {
        return Err(EnvError::Domain(r_nm));
    }
    Ok(vdw_cp(coeffs.c3, coeffs.c4, r_nm * 1e-9))
}

fn d_temperature() -> f64 {
    150.0
}
fn d_rho0() -> f64 {
    1.0
}
fn d_gamma0() -> f64 {
    GAMMA0_MHZ
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSpec {
    #[serde(default = "d_temperature")]
    pub temperature_uk: f64,
    /// Far-field density; any positive scale.
    #[serde(default = "d_rho0")]
    pub rho0: f64,
    /// Probe saturation parameter `I / I_sat`.
    #[serde(default)]
    pub saturation: f64,
    #[serde(default = "d_gamma0")]
    pub gamma0_mhz: f64,
}

impl Default for EnvSpec {
    fn default() -> Self {
        Self { temperature_uk: d_temperature(), rho0: d_rho0(), saturation: 0.0, gamma0_mhz: d_gamma0() }
    }
}

impl EnvSpec {
    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.temperature_uk > 0.0 && self.temperature_uk.is_finite()) {
            return Err(EnvError::Spec(format!("temperature {} uK must be positive", self.temperature_uk)));
        }
        if !(self.saturation >= 0.0) {
            return Err(EnvError::Spec(format!("saturation {} must be non-negative", self.saturation)));
        }
        if !(self.rho0 > 0.0 && self.gamma0_mhz > 0.0) {
            return Err(EnvError::Spec("rho0 and gamma0 must be positive".into()));
        }
        Ok(())
    }

    /// Mean kinetic energy `3/2 k_B T` in joules.
    pub fn mean_energy(&self) -> f64 {
        1.5 * BOLTZMANN * self.temperature_uk * 1e-6
    }
}

/// Relative density `1 / (1 - U_g / E)` for an attractive potential.
pub fn density(spec: &EnvSpec, u_g: f64) -> f64 {
    1.0 / (1.0 - u_g / spec.mean_energy())
}

/// Light shift `(U_e - U_g) / 2 pi hbar` in MHz and the unnormalized
/// Lorentzian excitation probability.
pub fn absorption(spec: &EnvSpec, u_g: f64, u_e: f64) -> (f64, f64) {
    let delta_mhz = (u_e - u_g) / (2.0 * PI * HBAR) * 1e-6;
    let x = delta_mhz / spec.gamma0_mhz;
    (delta_mhz, 1.0 / (1.0 + spec.saturation + 4.0 * x * x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvPoint {
    pub r_nm: f64,
    pub u_g: f64,
    pub u_e: f64,
    pub rho_rel: f64,
    pub delta_mhz: f64,
    pub p_abs: f64,
}

/// Everything needed to evaluate the weights at any distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvModel {
    #[serde(default)]
    pub spec: EnvSpec,
    #[serde(default = "VdwCoefficients::ground")]
    pub ground: VdwCoefficients,
    #[serde(default = "VdwCoefficients::excited")]
    pub excited: VdwCoefficients,
}

impl Default for EnvModel {
    fn default() -> Self {
        Self { spec: EnvSpec::default(), ground: VdwCoefficients::ground(), excited: VdwCoefficients::excited() }
    }
}

impl EnvModel {
    pub fn validate(&self) -> Result<(), EnvError> {
        self.spec.validate()?;
        self.ground.validate()?;
        self.excited.validate()
    }

    pub fn point(&self, r_nm: f64) -> Result<EnvPoint, EnvError> {
        let u_g = potential(&self.ground, r_nm)?;
        let u_e = potential(&self.excited, r_nm)?;
        let (delta_mhz, p_abs) = absorption(&self.spec, u_g, u_e);
        Ok(EnvPoint { r_nm, u_g, u_e, rho_rel: density(&self.spec, u_g), delta_mhz, p_abs })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvProfile {
    pub model: EnvModel,
    pub grid_nm: Vec<f64>,
    pub u_g: Vec<f64>,
    pub u_e: Vec<f64>,
    pub rho_rel: Vec<f64>,
    pub p_abs: Vec<f64>,
    pub delta_mhz: Vec<f64>,
}

pub fn build_profile(model: &EnvModel, grid_nm: &[f64]) -> Result<EnvProfile, EnvError> {
    model.validate()?;
    if grid_nm.is_empty() {
        return Err(EnvError::Range("empty grid".into()));
    }
    if grid_nm[0] < R_MIN_NM {
        return Err(EnvError::Range(format!("grid starts at {} nm, below the {R_MIN_NM} nm floor", grid_nm[0])));
    }
    if !grid_nm.windows(2).all(|w| w[0] < w[1]) {
        return Err(EnvError::Range("grid must be strictly increasing".into()));
    }
    let pts = grid_nm.iter().map(|r| model.point(*r)).collect::<Result<Vec<_>, _>>()?;
    Ok(EnvProfile {
        model: *model,
        grid_nm: grid_nm.to_vec(),
        u_g: pts.iter().map(|p| p.u_g).collect(),
        u_e: pts.iter().map(|p| p.u_e).collect(),
        rho_rel: pts.iter().map(|p| p.rho_rel).collect(),
        p_abs: pts.iter().map(|p| p.p_abs).collect(),
        delta_mhz: pts.iter().map(|p| p.delta_mhz).collect(),
    })
}

impl EnvProfile {
    pub fn content_hash(&self) -> String {
        content_hash(self).expect("profile serializes")
    }

    /// CSV with columns `r_nm, Ug_J, Ue_J, rho_rel, delta_MHz, p_abs`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r_nm,Ug_J,Ue_J,rho_rel,delta_MHz,p_abs\n");
        for i in 0..self.grid_nm.len() {
            let _ = writeln!(
                out,
                "{},{:.6e},{:.6e},{:.9},{:.6},{:.9}",
                self.grid_nm[i], self.u_g[i], self.u_e[i], self.rho_rel[i], self.delta_mhz[i], self.p_abs[i]
            );
        }
        out
    }
}

/// `n` points from `lo` to `hi` inclusive, evenly spaced.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn asymptotes() {
        let g = VdwCoefficients::ground();
        let near = potential(&g, 1e-3).unwrap() * (1e-12f64).powi(3);
        assert!((near / -g.c3 - 1.0).abs() < 1e-4);
        let far = potential(&g, 1e7).unwrap() * (1e-2f64).powi(4);
        assert!((far / -g.c4 - 1.0).abs() < 1e-4);
        assert_eq!(potential(&g, 0.0), Err(EnvError::Domain(0.0)));
    }

    #[test]
    fn density_points() {
        let s = EnvSpec::default();
        assert_eq!(density(&s, 0.0), 1.0);
        assert!((density(&s, -s.mean_energy()) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn absorption_points() {
        let s = EnvSpec::default();
        assert_eq!(absorption(&s, -1e-28, -1e-28), (0.0, 1.0));
        let half = s.gamma0_mhz / 2.0 * 2.0 * PI * HBAR * 1e6;
        let (d, p) = absorption(&s, 0.0, half);
        assert!((d - s.gamma0_mhz / 2.0).abs() < 1e-12);
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn grid_floor_enforced() {
        let m = EnvModel::default();
        assert!(matches!(build_profile(&m, &[4.0, 10.0]), Err(EnvError::Range(_))));
        assert!(matches!(build_profile(&m, &[10.0, 10.0]), Err(EnvError::Range(_))));
        let p = build_profile(&m, &linear_grid(5.0, 1200.0, 240)).unwrap();
        assert_eq!(p.to_csv().lines().count(), 241);
    }
}
