//! Ensemble-averaged decay rates seen through the guided mode: the
//! two-level and multilevel weighted averages, the sensitivity scan and the
//! inversion from a measured rate to the fiber radius.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atom_env::{EnvError, EnvModel, R_MIN_NM};
use crate::dipole::{Orientation, PerOrientation};
use crate::fdtd::{interpolate, DecayMap, FdtdError};
use crate::fiber::{solve_he11, FiberError, FiberSpec, GuidedMode};
use crate::numerics::{find_root, integrate, NumericsError, RootBracket};

#[derive(Debug, Error)]
pub enum AveragingError {
    #[error("invalid averaging input: {0}")]
    Invalid(String),
    #[error("decay map: {0}")]
    Map(#[from] FdtdError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Fiber(#[from] FiberError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("no radius in [{lo}, {hi}] nm reproduces {target:.4} (model spans {min:.4} to {max:.4})")]
    Inversion { target: f64, lo: f64, hi: f64, min: f64, max: f64 },
}

/// Probe polarization in the lab. The fiber runs along `z`; the probe
/// propagates perpendicular to it and the vertical axis is `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    /// Along the fiber: pure `z` dipoles.
    Horizontal,
    /// Across the fiber: `r` and `phi` dipoles mixed by the atom's azimuth.
    Vertical,
}

impl Polarization {
    pub const ALL: [Polarization; 2] = [Polarization::Horizontal, Polarization::Vertical];

    pub fn as_str(self) -> &'static str {
        match self {
            Polarization::Horizontal => "horizontal",
            Polarization::Vertical => "vertical",
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Polarization {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "horizontal" | "h" => Ok(Polarization::Horizontal),
            "vertical" | "v" => Ok(Polarization::Vertical),
            _ => Err(format!("unknown polarization '{s}' (expected horizontal or vertical)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    TwoLevel,
    Multilevel,
}

/// Branching between pi and sigma emission and the ground-state
/// populations by `|m_F|` = 2, 1, 0 that produce it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultilevelSpec {
    pub p_pi: f64,
    pub p_sigma: f64,
    pub populations: [f64; 3],
}

impl Default for MultilevelSpec {
    fn default() -> Self {
        Self { p_pi: 0.55, p_sigma: 0.45, populations: [0.04, 0.24, 0.43] }
    }
}

impl MultilevelSpec {
    pub fn validate(&self) -> Result<(), AveragingError> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !ok(self.p_pi) || !ok(self.p_sigma) || (self.p_pi + self.p_sigma - 1.0).abs() > 1e-9 {
            return Err(AveragingError::Invalid(format!(
                "branching P_pi={} P_sigma={} must be probabilities summing to 1",
                self.p_pi, self.p_sigma
            )));
        }
        let [p2, p1, p0] = self.populations;
        if [p2, p1, p0].iter().any(|p| !ok(*p)) || (2.0 * p2 + 2.0 * p1 + p0 - 1.0).abs() > 0.02 {
            return Err(AveragingError::Invalid(format!("populations {:?} do not sum to 1 over m_F", self.populations)));
        }
        Ok(())
    }
}

/// One-at-a-time multiplicative perturbations; all 1 is the base model.
///
/// `c3` and `c4` scale both levels' coefficients. `rho_shape` scales the
/// density deficit `1 - rho/rho0`. `alpha_shape` scales the logarithmic
/// decay of the coupling away from the surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub c3: f64,
    pub c4: f64,
    pub rho_shape: f64,
    pub alpha_shape: f64,
    /// Global factor on the coupling; cancels in the ratio.
    pub alpha_scale: f64,
}

impl Default for Perturbation {
    fn default() -> Self {
        Self { c3: 1.0, c4: 1.0, rho_shape: 1.0, alpha_shape: 1.0, alpha_scale: 1.0 }
    }
}

fn d_rmin() -> f64 {
    R_MIN_NM
}
fn d_rmax() -> f64 {
    1200.0
}
fn d_tol() -> f64 {
    1e-9
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AveragingOptions {
    #[serde(default = "d_rmin")]
    pub r_min_nm: f64,
    #[serde(default = "d_rmax")]
    pub r_max_nm: f64,
    /// Relative tolerance of each radial integral.
    #[serde(default = "d_tol")]
    pub tolerance: f64,
    #[serde(default)]
    pub perturbation: Perturbation,
}

impl Default for AveragingOptions {
    fn default() -> Self {
        Self { r_min_nm: d_rmin(), r_max_nm: d_rmax(), tolerance: d_tol(), perturbation: Perturbation::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedRate {
    pub value: f64,
    pub polarization: Polarization,
    pub model: Model,
    pub radius_nm: f64,
    /// Smallest and largest `gamma / gamma_0` entering the integrand.
    pub support_min: f64,
    pub support_max: f64,
    pub map_hash: String,
    pub env_hash: String,
}

/// A linear dipole resolved on `(z, phi, r)` at the atom's azimuth.
#[derive(Debug, Clone, Copy)]
struct Projection {
    z: f64,
    phi: f64,
    r: f64,
}

impl Projection {
    fn dot(self, v: &PerOrientation<f64>) -> f64 {
        self.z * v.z + self.phi * v.phi + self.r * v.r
    }
}

/// Squared projections of the lab axes onto the local frame at azimuth
/// `phi` measured from the vertical `x`.
fn lab_axis(axis: usize, phi: f64) -> Projection {
    let (s, c) = phi.sin_cos();
    match axis {
        0 => Projection { z: 0.0, phi: s * s, r: c * c },
        1 => Projection { z: 0.0, phi: c * c, r: s * s },
        _ => Projection { z: 1.0, phi: 0.0, r: 0.0 },
    }
}

/// Azimuth samples; the integrands are trigonometric polynomials of degree
/// four in `phi`, which an eight-point periodic rule integrates exactly.
const AZIMUTHS: usize = 8;

#[derive(Debug, Clone, Copy)]
enum Emission {
    TwoLevel(Polarization),
    Multilevel(Polarization, MultilevelSpec),
}

impl Emission {
    /// `(numerator, denominator)` azimuth averages at one distance.
    fn weights(&self, gamma: &PerOrientation<f64>, alpha: &PerOrientation<f64>) -> (f64, f64) {
        let (mut num, mut den) = (0.0, 0.0);
        for n in 0..AZIMUTHS {
            let phi = std::f64::consts::TAU * n as f64 / AZIMUTHS as f64;
            let (pi_axis, sigma_axes) = match self.polarization() {
                Polarization::Horizontal => (2, [0, 1]),
                Polarization::Vertical => (0, [1, 2]),
            };
            let pi = lab_axis(pi_axis, phi);
            let (g_pi, a_pi) = (pi.dot(gamma), pi.dot(alpha));
            match self {
                Emission::TwoLevel(_) => {
                    num += g_pi * a_pi;
                    den += a_pi;
                }
                Emission::Multilevel(_, spec) => {
                    let s1 = lab_axis(sigma_axes[0], phi);
                    let s2 = lab_axis(sigma_axes[1], phi);
                    let g_s = 0.5 * (s1.dot(gamma) + s2.dot(gamma));
                    let a_s = 0.5 * (s1.dot(alpha) + s2.dot(alpha));
                    num += spec.p_pi * g_pi * a_pi + spec.p_sigma * g_s * a_s;
                    den += spec.p_pi * a_pi + spec.p_sigma * a_s;
                }
            }
        }
        (num / AZIMUTHS as f64, den / AZIMUTHS as f64)
    }

    fn polarization(&self) -> Polarization {
        match self {
            Emission::TwoLevel(p) | Emission::Multilevel(p, _) => *p,
        }
    }

    fn model(&self) -> Model {
        match self {
            Emission::TwoLevel(_) => Model::TwoLevel,
            Emission::Multilevel(..) => Model::Multilevel,
        }
    }

    fn orientations(&self) -> &'static [Orientation] {
        match self {
            Emission::TwoLevel(Polarization::Horizontal) => &[Orientation::Z],
            Emission::TwoLevel(Polarization::Vertical) => &[Orientation::Phi, Orientation::R],
            Emission::Multilevel(..) => &Orientation::ALL,
        }
    }
}

/// Evaluates averages for one decay map, environment and fiber family.
#[derive(Debug, Clone)]
pub struct Averager<'a> {
    pub map: &'a DecayMap,
    pub env: EnvModel,
    /// Fiber whose radius is replaced by the queried one.
    pub fiber: FiberSpec,
    pub options: AveragingOptions,
}

impl<'a> Averager<'a> {
    pub fn new(map: &'a DecayMap, env: EnvModel, fiber: FiberSpec) -> Self {
        Self { map, env, fiber, options: AveragingOptions::default() }
    }

    pub fn with_options(mut self, options: AveragingOptions) -> Self {
        self.options = options;
        self
    }

    fn perturbed_env(&self) -> EnvModel {
        let p = self.options.perturbation;
        EnvModel {
            ground: self.env.ground.scaled(p.c3, p.c4),
            excited: self.env.excited.scaled(p.c3, p.c4),
            ..self.env
        }
    }

    fn mode(&self, radius: f64) -> Result<GuidedMode, AveragingError> {
        let spec = FiberSpec { radius_nm: radius, ..self.fiber };
        Ok(solve_he11(&spec)?)
    }

    fn gamma(&self, radius: f64, r: f64) -> Result<PerOrientation<f64>, AveragingError> {
        let g = |o| interpolate(self.map, radius, r, o).map(|v| v.value);
        Ok(PerOrientation::new(g(Orientation::Z)?, g(Orientation::Phi)?, g(Orientation::R)?))
    }

    /// Non-negative weight `rho * p_abs` at distance `r`.
    fn env_weight(env: &EnvModel, shape: f64, r: f64) -> Result<f64, AveragingError> {
        let p = env.point(r)?;
        let rho = (1.0 - shape * (1.0 - p.rho_rel)).max(0.0);
        Ok(rho * p.p_abs)
    }

    fn alpha(&self, mode: &GuidedMode, surface_mean: f64, r: f64) -> Result<PerOrientation<f64>, AveragingError> {
        let p = self.options.perturbation;
        let a = mode.alpha(r)?;
        let shape = if p.alpha_shape == 1.0 {
            1.0
        } else {
            (mode.alpha_mean(r)? / surface_mean).powf(p.alpha_shape - 1.0)
        };
        Ok(a.map(|v| v * shape * p.alpha_scale))
    }

    fn validate_radius(&self, radius: f64) -> Result<(), AveragingError> {
        let radii = &self.map.radii_nm;
        if !(radius >= radii[0] && radius <= radii[radii.len() - 1]) {
            return Err(FdtdError::Range(format!(
                "radius {radius} nm outside map [{}, {}]",
                radii[0],
                radii[radii.len() - 1]
            ))
            .into());
        }
        let o = &self.options;
        if !(o.r_min_nm >= R_MIN_NM && o.r_max_nm > o.r_min_nm && o.tolerance > 0.0) {
            return Err(AveragingError::Invalid(format!("radial bounds [{}, {}] nm", o.r_min_nm, o.r_max_nm)));
        }
        Ok(())
    }

    fn average(&self, emission: Emission, radius: f64) -> Result<AveragedRate, AveragingError> {
        self.validate_radius(radius)?;
        let env = self.perturbed_env();
        env.validate()?;
        let mode = self.mode(radius)?;
        let surface_mean = mode.alpha_mean(0.0)?;
        let rho_shape = self.options.perturbation.rho_shape;
        let (lo, hi) = (self.options.r_min_nm, self.options.r_max_nm);
        let mut knots = vec![lo];
        knots.extend(self.map.distances_nm.iter().copied().filter(|d| *d > lo && *d < hi));
        knots.push(hi);

        let failure = std::cell::RefCell::new(None);
        let eval = |r: f64, part: usize| -> f64 {
            let res = (|| {
                let w = Self::env_weight(&env, rho_shape, r)? * (radius + r);
                let (num, den) = emission.weights(&self.gamma(radius, r)?, &self.alpha(&mode, surface_mean, r)?);
                Ok::<_, AveragingError>(w * if part == 0 { num } else { den })
            })();
            res.unwrap_or_else(|e| {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            })
        };
        let mut totals = [0.0; 2];
        for part in 0..2 {
            let mut scale = 0.0;
            for w in knots.windows(2) {
                scale += integrate(|r| eval(r, part), w[0], w[1], f64::MAX).unwrap_or(0.0).abs();
            }
            let tol = (scale * self.options.tolerance).max(f64::MIN_POSITIVE) / knots.len() as f64;
            for w in knots.windows(2) {
                match integrate(|r| eval(r, part), w[0], w[1], tol) {
                    Ok(v) => totals[part] += v,
                    Err(e) => return Err(failure.take().unwrap_or_else(|| e.into())),
                }
            }
        }
        if let Some(e) = failure.take() {
            return Err(e);
        }
        if !(totals[1] > 0.0) {
            return Err(AveragingError::Invalid("weights vanish over the integration range".into()));
        }
        let (mut gmin, mut gmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for &r in &knots {
            let g = self.gamma(radius, r)?;
            for o in emission.orientations() {
                gmin = gmin.min(g.get(*o));
                gmax = gmax.max(g.get(*o));
            }
        }
        Ok(AveragedRate {
            value: totals[0] / totals[1],
            polarization: emission.polarization(),
            model: emission.model(),
            radius_nm: radius,
            support_min: gmin,
            support_max: gmax,
            map_hash: self.map.content_hash(),
            env_hash: crate::cache::content_hash(&env).expect("env serializes"),
        })
    }

    pub fn two_level(&self, polarization: Polarization, radius: f64) -> Result<AveragedRate, AveragingError> {
        self.average(Emission::TwoLevel(polarization), radius)
    }

    pub fn multilevel(
        &self,
        spec: &MultilevelSpec,
        polarization: Polarization,
        radius: f64,
    ) -> Result<AveragedRate, AveragingError> {
        spec.validate()?;
        self.average(Emission::Multilevel(polarization, *spec), radius)
    }

    pub fn rate(
        &self,
        model: Model,
        spec: &MultilevelSpec,
        polarization: Polarization,
        radius: f64,
    ) -> Result<AveragedRate, AveragingError> {
        match model {
            Model::TwoLevel => self.two_level(polarization, radius),
            Model::Multilevel => self.multilevel(spec, polarization, radius),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Parameter {
    C3,
    C4,
    RhoShape,
    AlphaShape,
}

impl Parameter {
    pub const ALL: [Parameter; 4] = [Parameter::C3, Parameter::C4, Parameter::RhoShape, Parameter::AlphaShape];

    pub fn as_str(self) -> &'static str {
        match self {
            Parameter::C3 => "C3",
            Parameter::C4 => "C4",
            Parameter::RhoShape => "rho_shape",
            Parameter::AlphaShape => "alpha_shape",
        }
    }

    fn apply(self, p: &mut Perturbation, factor: f64) {
        match self {
            Parameter::C3 => p.c3 = factor,
            Parameter::C4 => p.c4 = factor,
            Parameter::RhoShape => p.rho_shape = factor,
            Parameter::AlphaShape => p.alpha_shape = factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub parameter: Parameter,
    pub factor: f64,
    pub value: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub base: f64,
    pub rows: Vec<SensitivityRow>,
    pub max_abs_delta: f64,
}

impl SensitivityReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("parameter,factor,value,delta\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{:.6},{:+.6}\n", r.parameter.as_str(), r.factor, r.value, r.delta));
        }
        out
    }
}

/// One-at-a-time `1 +- fraction` scalings of each parameter.
pub fn sensitivity(
    averager: &Averager<'_>,
    model: Model,
    spec: &MultilevelSpec,
    polarization: Polarization,
    radius: f64,
    fraction: f64,
) -> Result<SensitivityReport, AveragingError> {
    let base = averager.rate(model, spec, polarization, radius)?.value;
    let mut rows = Vec::new();
    for param in Parameter::ALL {
        for factor in [1.0 - fraction, 1.0 + fraction] {
            let mut opts = averager.options;
            param.apply(&mut opts.perturbation, factor);
            let value = averager.clone().with_options(opts).rate(model, spec, polarization, radius)?.value;
            rows.push(SensitivityRow { parameter: param, factor, value, delta: value - base });
        }
    }
    let max_abs_delta = rows.iter().map(|r| r.delta.abs()).fold(0.0, f64::max);
    Ok(SensitivityReport { base, rows, max_abs_delta })
}

/// Largest `|delta|` over all `2^4` joint corners `1 +- fraction`.
pub fn corner_scan(
    averager: &Averager<'_>,
    polarization: Polarization,
    radius: f64,
    fraction: f64,
) -> Result<f64, AveragingError> {
    let base = averager.two_level(polarization, radius)?.value;
    let mut worst: f64 = 0.0;
    for mask in 0..16u32 {
        let mut opts = averager.options;
        for (bit, param) in Parameter::ALL.iter().enumerate() {
            let sign = if mask >> bit & 1 == 1 { 1.0 } else { -1.0 };
            param.apply(&mut opts.perturbation, 1.0 + sign * fraction);
        }
        let v = averager.clone().with_options(opts).two_level(polarization, radius)?.value;
        worst = worst.max((v - base).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusEstimate {
    /// Smallest radius reproducing `measured`.
    pub radius_nm: f64,
    /// Every crossing on the radius axis; more than one when the forward
    /// model is not monotonic.
    pub roots_nm: Vec<f64>,
    /// Radii reproducing `measured - sigma` and `measured + sigma`, when
    /// those lie within the map.
    pub bounds_nm: (Option<f64>, Option<f64>),
    pub uncertainty_nm: Option<f64>,
    pub measured: f64,
    pub measured_sigma: f64,
    /// Forward model sampled on the map's radius axis.
    pub scan: Vec<(f64, f64)>,
    pub map_hash: String,
}

/// Radius at which the horizontal two-level average equals `measured`.
pub fn infer_radius(averager: &Averager<'_>, measured: f64, sigma: f64) -> Result<RadiusEstimate, AveragingError> {
    if !measured.is_finite() || !(sigma >= 0.0) {
        return Err(AveragingError::Invalid(format!("measurement {measured} +- {sigma}")));
    }
    let radii = averager.map.radii_nm.clone();
    let forward = |r: f64| averager.two_level(Polarization::Horizontal, r).map(|a| a.value);
    let scan: Vec<(f64, f64)> = radii.iter().map(|r| Ok((*r, forward(*r)?))).collect::<Result<_, AveragingError>>()?;
    let (lo, hi) = (radii[0], radii[radii.len() - 1]);
    let roots = |target: f64| -> Result<Vec<f64>, AveragingError> {
        let mut found = Vec::new();
        for w in scan.windows(2) {
            let (a, b) = (w[0].1 - target, w[1].1 - target);
            if a == 0.0 {
                found.push(w[0].0);
            } else if a * b < 0.0 {
                let mut failure = None;
                let root = find_root(
                    |r| {
                        forward(r).map(|v| v - target).unwrap_or_else(|e| {
                            failure.get_or_insert(e);
                            f64::NAN
                        })
                    },
                    RootBracket::new(w[0].0, w[1].0, 1e-9),
                );
                if let Some(e) = failure {
                    return Err(e);
                }
                found.push(root?);
            }
        }
        if scan.last().is_some_and(|s| s.1 == target) {
            found.push(hi);
        }
        if found.is_empty() {
            let min = scan.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
            let max = scan.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
            return Err(AveragingError::Inversion { target, lo, hi, min, max });
        }
        Ok(found)
    };
    let roots_nm = roots(measured)?;
    let radius_nm = roots_nm[0];
    if roots_nm.len() > 1 {
        log::warn!("{measured} is reproduced at {} radii {roots_nm:?}; reporting the smallest", roots_nm.len());
    }
    let lower = roots(measured - sigma).ok().map(|r| r[0]);
    let upper = roots(measured + sigma).ok().map(|r| r[0]);
    let uncertainty_nm = match (lower, upper) {
        (Some(a), Some(b)) => Some(0.5 * (a - b).abs()),
        (Some(a), None) | (None, Some(a)) => Some((a - radius_nm).abs()),
        (None, None) => None,
    };
    Ok(RadiusEstimate {
        radius_nm,
        roots_nm,
        bounds_nm: (lower, upper),
        uncertainty_nm,
        measured,
        measured_sigma: sigma,
        scan,
        map_hash: averager.map.content_hash(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdtd::SimulationConfig;

    fn map_with(f: impl Fn(Orientation, f64, f64) -> f64) -> DecayMap {
        let radii = vec![200.0, 230.0, 260.0];
        let dists = vec![5.0, 20.0, 50.0, 100.0, 200.0, 400.0, 800.0];
        let t = |o| radii.iter().map(|r| dists.iter().map(|d| f(o, *r, *d)).collect()).collect();
        let base = SimulationConfig::new(FiberSpec::nanofiber(230.0), 50.0, Orientation::Z);
        let tables = PerOrientation::new(t(Orientation::Z), t(Orientation::Phi), t(Orientation::R));
        DecayMap::from_tables(radii, dists, tables, base).unwrap()
    }

    fn averager(map: &DecayMap) -> Averager<'_> {
        Averager::new(map, EnvModel::default(), FiberSpec::nanofiber(230.0))
    }

    #[test]
    fn constant_map_averages_to_constant() {
        let map = map_with(|_, _, _| 1.3);
        let a = averager(&map);
        for p in Polarization::ALL {
            assert!((a.two_level(p, 230.0).unwrap().value - 1.3).abs() < 1e-12);
            assert!((a.multilevel(&MultilevelSpec::default(), p, 230.0).unwrap().value - 1.3).abs() < 1e-12);
        }
    }

    #[test]
    fn full_pi_branching_is_two_level() {
        let map = map_with(|o, r, d| 1.0 + 0.3 * o.index() as f64 * (-d / 80.0).exp() + 1e-3 * (r - 230.0));
        let a = averager(&map);
        let spec = MultilevelSpec { p_pi: 1.0, p_sigma: 0.0, ..Default::default() };
        for p in Polarization::ALL {
            let two = a.two_level(p, 240.0).unwrap().value;
            let multi = a.multilevel(&spec, p, 240.0).unwrap().value;
            assert!((two - multi).abs() < 1e-12, "{p}: {two} vs {multi}");
        }
    }

    #[test]
    fn alpha_prefactor_cancels() {
        let map = map_with(|o, _, d| 1.0 + 0.5 * (o.index() as f64 - 1.0) * (-d / 60.0).exp());
        let a = averager(&map);
        let base = a.two_level(Polarization::Vertical, 230.0).unwrap().value;
        let mut opts = AveragingOptions::default();
        opts.perturbation.alpha_scale = 1.2;
        let scaled = a.clone().with_options(opts).two_level(Polarization::Vertical, 230.0).unwrap().value;
        assert!((base - scaled).abs() < 1e-12);
    }

    #[test]
    fn radius_outside_map_is_rejected() {
        let map = map_with(|_, _, _| 1.0);
        assert!(matches!(averager(&map).two_level(Polarization::Horizontal, 300.0), Err(AveragingError::Map(_))));
    }

    #[test]
    fn invalid_branching_is_rejected() {
        let spec = MultilevelSpec { p_pi: 0.6, p_sigma: 0.6, ..Default::default() };
        assert!(spec.validate().is_err());
        assert!(MultilevelSpec::default().validate().is_ok());
    }
}
