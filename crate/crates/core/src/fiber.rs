//! Fundamental HE11 mode of a step-index nanofiber and the orientation-resolved
//! emission-enhancement factor `alpha_i(r) = gamma_wg,i(r) / gamma_0`.
//!
//! Field amplitudes follow the circular-basis convention: `e_r` carries an
//! implicit factor `i` and is reported as a real number, `e_phi` and `e_z`
//! are real. For the quasi-linearly polarized mode the intensities summed
//! over both polarizations equal the squares of these amplitudes at every
//! azimuth, so `alpha_i` is proportional to `|e_i|^2`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dipole::{Orientation, PerOrientation};
use crate::numerics::{find_root, integrate, j012, k012, NumericsError, RootBracket};

/// First zero of `J_0`, the cutoff of the TE01/TM01/HE21 family.
pub const SECOND_MODE_CUTOFF_V: f64 = 2.404_825_557_695_773;
const SCAN_STEPS: usize = 2000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FiberError {
    #[error("invalid fiber: {0}")]
    InvalidSpec(String),
    #[error("no guided HE11 root for {0:?}")]
    NoMode(FiberSpec),
    #[error("distance {0} nm is outside the fiber exterior")]
    Distance(f64),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSpec {
    pub radius_nm: f64,
    pub core_index: f64,
    #[serde(default = "vacuum_index")]
    pub clad_index: f64,
    pub wavelength_nm: f64,
}

fn vacuum_index() -> f64 {
    1.0
}

impl FiberSpec {
    /// Silica index at the Rb D2 line.
    pub const SILICA_INDEX: f64 = 1.45367;
    pub const D2_WAVELENGTH_NM: f64 = 780.241;

    pub fn new(radius_nm: f64, core_index: f64, clad_index: f64, wavelength_nm: f64) -> Result<Self, FiberError> {
        let spec = Self { radius_nm, core_index, clad_index, wavelength_nm };
        spec.validate()?;
        Ok(spec)
    }

    /// Vacuum-clad silica nanofiber at the D2 wavelength.
    pub fn nanofiber(radius_nm: f64) -> Self {
        Self {
            radius_nm,
            core_index: Self::SILICA_INDEX,
            clad_index: 1.0,
            wavelength_nm: Self::D2_WAVELENGTH_NM,
        }
    }

    /// The fiber used to pin the absolute scale of `alpha`: 230 nm radius at 780 nm.
    pub fn calibration_reference() -> Self {
        Self { radius_nm: 230.0, core_index: Self::SILICA_INDEX, clad_index: 1.0, wavelength_nm: 780.0 }
    }

    pub fn validate(&self) -> Result<(), FiberError> {
        let ok = self.radius_nm.is_finite()
            && self.radius_nm > 0.0
            && self.wavelength_nm.is_finite()
            && self.wavelength_nm > 0.0
            && self.clad_index >= 1.0
            && self.core_index.is_finite()
            && self.core_index > self.clad_index;
        if ok {
            Ok(())
        } else {
            Err(FiberError::InvalidSpec(format!(
                "need radius > 0, wavelength > 0 and core index > clad index >= 1, got {self:?}"
            )))
        }
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength_nm
    }

    pub fn numerical_aperture(&self) -> f64 {
        (self.core_index.powi(2) - self.clad_index.powi(2)).sqrt()
    }

    pub fn v_number(&self) -> f64 {
        self.wavenumber() * self.radius_nm * self.numerical_aperture()
    }

    pub fn is_single_mode(&self) -> bool {
        self.v_number() < SECOND_MODE_CUTOFF_V
    }

    /// Largest radius for which only HE11 is guided.
    pub fn single_mode_cutoff_radius(&self) -> f64 {
        SECOND_MODE_CUTOFF_V / (self.wavenumber() * self.numerical_aperture())
    }
}

/// Solved HE11 mode. Lengths in nm, wavenumbers in 1/nm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidedMode {
    pub spec: FiberSpec,
    pub k: f64,
    pub beta: f64,
    /// Transverse wavenumber inside the core, `sqrt(k^2 n1^2 - beta^2)`.
    pub h: f64,
    /// Evanescent decay constant outside, `sqrt(beta^2 - k^2 n2^2)`.
    pub q: f64,
    /// Hybrid-mode mixing parameter `s`.
    pub s: f64,
    pub v_number: f64,
    pub single_mode: bool,
    /// Relative dispersion residual at `beta`.
    pub residual: f64,
    /// Power carried by one quasi-linear polarization for unit `e_z` amplitude on axis scale.
    pub power: f64,
}

/// Cylindrical electric-field amplitudes of the mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeField {
    pub e_r: f64,
    pub e_phi: f64,
    pub e_z: f64,
}

impl ModeField {
    pub fn intensity(&self) -> f64 {
        self.e_r * self.e_r + self.e_phi * self.e_phi + self.e_z * self.e_z
    }

    pub fn component(&self, o: Orientation) -> f64 {
        match o {
            Orientation::Z => self.e_z,
            Orientation::Phi => self.e_phi,
            Orientation::R => self.e_r,
        }
    }
}

struct Characteristic {
    k: f64,
    n1: f64,
    n2: f64,
    a: f64,
}

impl Characteristic {
    fn hq(&self, beta: f64) -> (f64, f64) {
        let h = (self.k * self.k * self.n1 * self.n1 - beta * beta).max(0.0).sqrt();
        let q = (beta * beta - self.k * self.k * self.n2 * self.n2).max(0.0).sqrt();
        (h, q)
    }

    /// `(J1'(u)/(u J1(u)), K1'(w)/(w K1(w)))`.
    fn log_derivatives(u: f64, w: f64) -> (f64, f64) {
        let [j0, j1, _] = j012(u);
        let [k0, k1, _] = k012(w);
        let jp = j0 - j1 / u;
        let kp = -k0 - k1 / w;
        (jp / (u * j1), kp / (w * k1))
    }

    /// Left- and right-hand sides of the l = 1 hybrid-mode equation.
    fn sides(&self, beta: f64) -> (f64, f64) {
        let (h, q) = self.hq(beta);
        let (u, w) = (h * self.a, q * self.a);
        let (jh, kh) = Self::log_derivatives(u, w);
        let ratio = (self.n2 / self.n1).powi(2);
        let lhs = (jh + kh) * (jh + ratio * kh);
        let t = 1.0 / (u * u) + 1.0 / (w * w);
        let rhs = (beta / (self.k * self.n1)).powi(2) * t * t;
        (lhs, rhs)
    }

    fn residual(&self, beta: f64) -> f64 {
        let (lhs, rhs) = self.sides(beta);
        let scale = lhs.abs() + rhs.abs();
        if scale == 0.0 {
            0.0
        } else {
            (lhs - rhs) / scale
        }
    }
}

/// Relative residual of the HE11 characteristic equation at `beta`.
pub fn dispersion_residual(spec: &FiberSpec, beta: f64) -> f64 {
    Characteristic {
        k: spec.wavenumber(),
        n1: spec.core_index,
        n2: spec.clad_index,
        a: spec.radius_nm,
    }
    .residual(beta)
}

/// Solves the fundamental HE11 mode.
///
/// Scans `(k n2, k n1)` for sign changes of the relative residual, refines
/// each with the bracketed root finder, discards pole crossings and keeps
/// the root with the largest `beta`.
pub fn solve_he11(spec: &FiberSpec) -> Result<GuidedMode, FiberError> {
    spec.validate()?;
    let ch = Characteristic {
        k: spec.wavenumber(),
        n1: spec.core_index,
        n2: spec.clad_index,
        a: spec.radius_nm,
    };
    let lo = ch.k * ch.n2;
    let hi = ch.k * ch.n1;
    let span = hi - lo;
    let node = |i: usize| lo + span * (i as f64 + 0.5) / (SCAN_STEPS as f64 + 1.0);

    let mut best: Option<f64> = None;
    let mut prev_beta = node(0);
    let mut prev = ch.residual(prev_beta);
    for i in 1..=SCAN_STEPS {
        let beta = node(i);
        let cur = ch.residual(beta);
        if prev.is_finite() && cur.is_finite() && prev.signum() != cur.signum() {
            let root = find_root(|b| ch.residual(b), RootBracket::new(prev_beta, beta, 1e-14));
            if let Ok(root) = root {
                if ch.residual(root).abs() < 1e-9 {
                    best = Some(best.map_or(root, |b: f64| b.max(root)));
                }
            }
        }
        prev = cur;
        prev_beta = beta;
    }
    let beta = best.ok_or(FiberError::NoMode(*spec))?;
    let (h, q) = ch.hq(beta);
    let (u, w) = (h * ch.a, q * ch.a);
    let (jh, kh) = Characteristic::log_derivatives(u, w);
    let s = (1.0 / (u * u) + 1.0 / (w * w)) / (jh + kh);
    let mut mode = GuidedMode {
        spec: *spec,
        k: ch.k,
        beta,
        h,
        q,
        s,
        v_number: spec.v_number(),
        single_mode: spec.is_single_mode(),
        residual: ch.residual(beta),
        power: 0.0,
    };
    mode.power = mode.compute_power()?;
    Ok(mode)
}

impl GuidedMode {
    fn a(&self) -> f64 {
        self.spec.radius_nm
    }

    fn exterior_scale(&self) -> f64 {
        let [_, j1, _] = j012(self.h * self.a());
        let [_, k1, _] = k012(self.q * self.a());
        j1 / k1
    }

    /// Electric field at distance `rho` from the fiber axis.
    pub fn field_at_axis_distance(&self, rho: f64) -> ModeField {
        let s = self.s;
        if rho < self.a() {
            let [j0, j1, j2] = j012(self.h * rho);
            let pre = self.beta / (2.0 * self.h);
            ModeField {
                e_r: pre * ((1.0 - s) * j0 - (1.0 + s) * j2),
                e_phi: -pre * ((1.0 - s) * j0 + (1.0 + s) * j2),
                e_z: j1,
            }
        } else {
            let [k0, k1, k2] = k012(self.q * rho);
            let c = self.exterior_scale();
            let pre = self.beta / (2.0 * self.q) * c;
            ModeField {
                e_r: pre * ((1.0 - s) * k0 + (1.0 + s) * k2),
                e_phi: -pre * ((1.0 - s) * k0 - (1.0 + s) * k2),
                e_z: c * k1,
            }
        }
    }

    /// Evanescent electric field at distance `r` outside the surface.
    pub fn evanescent_field(&self, r: f64) -> Result<ModeField, FiberError> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(FiberError::Distance(r));
        }
        Ok(self.field_at_axis_distance(self.a() + r))
    }

    /// Time-averaged axial power of one quasi-linear polarization
    /// (units with `epsilon_0 = c = 1`).
    fn compute_power(&self) -> Result<f64, FiberError> {
        let (a, s, h, q, beta, k) = (self.a(), self.s, self.h, self.q, self.beta, self.k);
        let n1sq = self.spec.core_index.powi(2);
        let n2sq = self.spec.clad_index.powi(2);
        let s1 = beta * beta * s / (k * k * n1sq);
        let s2 = beta * beta * s / (k * k * n2sq);
        let core = |r: f64| {
            let [j0, _, j2] = j012(h * r);
            let fr = 0.5 * ((1.0 - s) * j0 - (1.0 + s) * j2);
            let ft = 0.5 * ((1.0 - s) * j0 + (1.0 + s) * j2);
            let gr = 0.5 * ((1.0 - s1) * j0 + (1.0 + s1) * j2);
            let gt = 0.5 * ((1.0 - s1) * j0 - (1.0 + s1) * j2);
            n1sq / (h * h) * (fr * gt + ft * gr) * r
        };
        let c = self.exterior_scale() / q;
        let clad = |r: f64| {
            let [k0, _, k2] = k012(q * r);
            let fr = 0.5 * ((1.0 - s) * k0 + (1.0 + s) * k2);
            let ft = 0.5 * ((1.0 - s) * k0 - (1.0 + s) * k2);
            let gr = 0.5 * ((1.0 - s2) * k0 - (1.0 + s2) * k2);
            let gt = 0.5 * ((1.0 - s2) * k0 + (1.0 + s2) * k2);
            n2sq * c * c * (fr * gt + ft * gr) * r
        };
        let end = a + 40.0 / q;
        let scale = integrate(core, 0.0, a, 1e-3)?.abs() + integrate(clad, a, end, 1e-3)?.abs();
        let inner = integrate(core, 0.0, a, 1e-12 * scale)?;
        let outer = integrate(clad, a, end, 1e-12 * scale)?;
        Ok(0.5 * PI * beta * k * (inner + outer))
    }

    /// `alpha_i` at distance `r` from the surface without the calibration
    /// constant: `(3 lambda^2 / 8 pi) |e_i|^2 / P`, summed over both
    /// propagation directions and polarizations.
    pub fn alpha_unscaled(&self, r: f64) -> Result<PerOrientation<f64>, FiberError> {
        let f = self.evanescent_field(r)?;
        let lam = self.spec.wavelength_nm;
        let pre = 3.0 * lam * lam / (8.0 * PI * self.power);
        Ok(PerOrientation::new(pre * f.e_z * f.e_z, pre * f.e_phi * f.e_phi, pre * f.e_r * f.e_r))
    }

    /// Calibrated `alpha_i` at distance `r` from the surface.
    pub fn alpha(&self, r: f64) -> Result<PerOrientation<f64>, FiberError> {
        let c = alpha_calibration();
        Ok(self.alpha_unscaled(r)?.map(|v| c * v))
    }

    /// Orientation-mean of the calibrated `alpha`.
    pub fn alpha_mean(&self, r: f64) -> Result<f64, FiberError> {
        let a = self.alpha(r)?;
        Ok((a.z + a.phi + a.r) / 3.0)
    }

    /// Closed-form shape `exp(-2 q r) / (r0 + r)` scaled to match the
    /// orientation-mean `alpha` at the surface. Meant for `q (r0 + r) > 1`.
    pub fn alpha_asymptotic(&self, r: f64) -> Result<f64, FiberError> {
        if !(r >= 0.0) {
            return Err(FiberError::Distance(r));
        }
        let a = self.a();
        let surface = self.alpha_mean(0.0)?;
        Ok(surface * a / (a + r) * (-2.0 * self.q * r).exp())
    }
}

/// Scale factor applied to the first-principles `alpha` so that the
/// orientation-mean value at the surface of the reference fiber is 0.2.
/// Absolute `alpha` values are convention-dependent; ratios are not.
pub fn alpha_calibration() -> f64 {
    static CAL: OnceLock<f64> = OnceLock::new();
    *CAL.get_or_init(|| {
        let mode = solve_he11(&FiberSpec::calibration_reference()).expect("reference fiber guides HE11");
        let a = mode.alpha_unscaled(0.0).expect("surface is exterior");
        ALPHA_SURFACE_TARGET / ((a.z + a.phi + a.r) / 3.0)
    })
}

/// Orientation-mean `alpha` at the surface of the reference fiber.
pub const ALPHA_SURFACE_TARGET: f64 = 0.2;

/// `alpha_i(r)` tabulated on a radial grid of distances from the surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaProfile {
    pub radius_nm: f64,
    pub q: f64,
    pub calibration: f64,
    pub distances_nm: Vec<f64>,
    pub alpha_z: Vec<f64>,
    pub alpha_phi: Vec<f64>,
    pub alpha_r: Vec<f64>,
}

/// Evaluates the calibrated `alpha_i` on `grid` (distances from the surface, nm).
pub fn alpha_profile(mode: &GuidedMode, grid: &[f64]) -> Result<AlphaProfile, FiberError> {
    let mut z = Vec::with_capacity(grid.len());
    let mut phi = Vec::with_capacity(grid.len());
    let mut r = Vec::with_capacity(grid.len());
    for &d in grid {
        let a = mode.alpha(d)?;
        z.push(a.z);
        phi.push(a.phi);
        r.push(a.r);
    }
    Ok(AlphaProfile {
        radius_nm: mode.spec.radius_nm,
        q: mode.q,
        calibration: alpha_calibration(),
        distances_nm: grid.to_vec(),
        alpha_z: z,
        alpha_phi: phi,
        alpha_r: r,
    })
}

impl AlphaProfile {
    pub fn series(&self, o: Orientation) -> &[f64] {
        match o {
            Orientation::Z => &self.alpha_z,
            Orientation::Phi => &self.alpha_phi,
            Orientation::R => &self.alpha_r,
        }
    }

    /// Log-linear interpolation at distance `d`; `None` outside the grid.
    pub fn at(&self, d: f64) -> Option<PerOrientation<f64>> {
        let g = &self.distances_nm;
        if g.is_empty() || d < g[0] || d > g[g.len() - 1] {
            return None;
        }
        let i = match g.binary_search_by(|x| x.total_cmp(&d)) {
            Ok(i) => {
                return Some(PerOrientation::new(self.alpha_z[i], self.alpha_phi[i], self.alpha_r[i]));
            }
            Err(i) => i - 1,
        };
        let t = (d - g[i]) / (g[i + 1] - g[i]);
        let lerp = |v: &[f64]| (v[i].ln() * (1.0 - t) + v[i + 1].ln() * t).exp();
        Some(PerOrientation::new(lerp(&self.alpha_z), lerp(&self.alpha_phi), lerp(&self.alpha_r)))
    }
}
