//! Synthetic time-correlated photon counting: histograms drawn from a
//! mixture of exponential decays, the windowed fit used on measured data,
//! and the check that a narrow rate mixture fits to its mean rate.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cache::content_hash;
use crate::numerics::{fit_exp_offset, integrate, FitProblem, FitResult, NumericsError};

/// Natural lifetime of the transition in ns.
pub const TAU0_NS: f64 = 26.24;
pub const RNG_ALGORITHM: &str = "ChaCha20";

#[derive(Debug, Error)]
pub enum TcspcError {
    #[error("invalid mixture: {0}")]
    Model(String),
    #[error("invalid histogram: {0}")]
    Histogram(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// One decay channel: rate in units of the natural rate and its share of
/// the detected photon rate at switch-off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateComponent {
    pub rate: f64,
    pub weight: f64,
}

/// Residual probe light after switch-off, `I(t) = ratio^(t / duration)`,
/// which keeps re-exciting atoms for a few ns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Extinction {
    pub ratio: f64,
    pub duration_ns: f64,
}

impl Default for Extinction {
    fn default() -> Self {
        Self { ratio: 1.0 / 170.0, duration_ns: 20.0 }
    }
}

impl Extinction {
    fn time_constant(&self) -> f64 {
        self.duration_ns / (1.0 / self.ratio).ln()
    }
}

fn d_bin() -> f64 {
    1.0
}
fn d_bins() -> usize {
    600
}
fn d_photons() -> f64 {
    26_000.0
}
fn d_background() -> f64 {
    0.5
}
fn d_tau0() -> f64 {
    TAU0_NS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureModel {
    pub components: Vec<RateComponent>,
    /// Expected signal photons summed over all time; the default gives about
    /// a thousand counts in the first 1 ns bin.
    #[serde(default = "d_photons")]
    pub photons: f64,
    /// Dark counts per bin, 500 counts/s accumulated over 10^6 cycles.
    #[serde(default = "d_background")]
    pub background_per_bin: f64,
    #[serde(default = "d_bin")]
    pub bin_ns: f64,
    #[serde(default = "d_bins")]
    pub bins: usize,
    #[serde(default = "d_tau0")]
    pub tau0_ns: f64,
    #[serde(default)]
    pub extinction: Option<Extinction>,
}

impl MixtureModel {
    pub fn single(rate: f64) -> Self {
        Self::new(vec![RateComponent { rate, weight: 1.0 }])
    }

    pub fn new(components: Vec<RateComponent>) -> Self {
        Self {
            components,
            photons: d_photons(),
            background_per_bin: d_background(),
            bin_ns: d_bin(),
            bins: d_bins(),
            tau0_ns: d_tau0(),
            extinction: None,
        }
    }

    /// Rates `mean * (1 + eps)` with `eps` on a midpoint grid over
    /// `[-spread, spread]`, equally weighted.
    pub fn uniform_spread(mean: f64, spread: f64, samples: usize) -> Self {
        let n = samples.max(1);
        let comps = (0..n)
            .map(|i| {
                let eps = if n == 1 { 0.0 } else { -spread + 2.0 * spread * (i as f64 + 0.5) / n as f64 };
                RateComponent { rate: mean * (1.0 + eps), weight: 1.0 }
            })
            .collect();
        Self::new(comps)
    }

    pub fn validate(&self) -> Result<(), TcspcError> {
        let bad = |m: String| Err(TcspcError::Model(m));
        if self.components.is_empty() {
            return bad("no rate components".into());
        }
        if self.components.iter().any(|c| !(c.rate > 0.0 && c.rate.is_finite() && c.weight >= 0.0 && c.weight.is_finite())) {
            return bad("rates must be positive and weights non-negative".into());
        }
        if !(self.total_weight() > 0.0) {
            return bad("weights sum to zero".into());
        }
        if !(self.photons >= 0.0 && self.background_per_bin >= 0.0 && self.bin_ns > 0.0 && self.tau0_ns > 0.0) {
            return bad("photons, background, bin width and lifetime must be non-negative".into());
        }
        if self.bins < 2 {
            return bad("at least two bins required".into());
        }
        if let Some(e) = self.extinction {
            if !(e.ratio > 0.0 && e.ratio < 1.0 && e.duration_ns > 0.0) {
                return bad(format!("extinction {e:?}"));
            }
        }
        Ok(())
    }

    fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    /// Amplitude-weighted mean rate in units of the natural rate.
    pub fn mean_rate(&self) -> f64 {
        self.components.iter().map(|c| c.weight * c.rate).sum::<f64>() / self.total_weight()
    }

    /// Expected signal counts in `[a, b)` ns (no background). The photon
    /// budget fixes the time integral of the curve without extinction.
    fn signal_between(&self, a: f64, b: f64) -> Result<f64, TcspcError> {
        let g0 = 1.0 / self.tau0_ns;
        let norm: f64 = self.components.iter().map(|c| c.weight / (c.rate * g0)).sum();
        let plain: f64 = self
            .components
            .iter()
            .map(|c| {
                let g = c.rate * g0;
                c.weight * ((-g * a).exp() - (-g * b).exp()) / g
            })
            .sum();
        let Some(ext) = self.extinction else {
            return Ok(self.photons * plain / norm);
        };
        // excited population fed by the residual drive, relative to the
        // steady state: P(t) = e^{-g t} + g (e^{-t/T} - e^{-g t}) / (g - 1/T)
        let tc = ext.time_constant();
        let extra = integrate(
            |t| {
                self.components
                    .iter()
                    .map(|c| {
                        let g = c.rate * g0;
                        let fed = if (g - 1.0 / tc).abs() < 1e-12 {
                            g * t * (-g * t).exp()
                        } else {
                            g * ((-t / tc).exp() - (-g * t).exp()) / (g - 1.0 / tc)
                        };
                        c.weight * fed
                    })
                    .sum()
            },
            a,
            b,
            1e-12,
        )?;
        Ok(self.photons * (plain + extra) / norm)
    }

    /// Expected counts per bin including background.
    pub fn expected(&self) -> Result<Vec<f64>, TcspcError> {
        self.validate()?;
        (0..self.bins)
            .map(|i| {
                let a = i as f64 * self.bin_ns;
                Ok(self.signal_between(a, a + self.bin_ns)? + self.background_per_bin)
            })
            .collect()
    }

    pub fn content_hash(&self) -> String {
        content_hash(self).expect("model serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramProvenance {
    pub model_hash: String,
    pub seed: u64,
    pub rng: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayHistogram {
    pub bin_ns: f64,
    pub counts: Vec<u64>,
    pub tau0_ns: f64,
    pub provenance: Option<HistogramProvenance>,
}

/// Poisson counts around the model's expected curve.
pub fn synthesize(model: &MixtureModel, seed: u64) -> Result<DecayHistogram, TcspcError> {
    let expected = model.expected()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let counts = expected
        .iter()
        .map(|&m| if m > 0.0 { Poisson::new(m).map(|p| p.sample(&mut rng) as u64).unwrap_or(0) } else { 0 })
        .collect();
    Ok(DecayHistogram {
        bin_ns: model.bin_ns,
        counts,
        tau0_ns: model.tau0_ns,
        provenance: Some(HistogramProvenance { model_hash: model.content_hash(), seed, rng: RNG_ALGORITHM.into() }),
    })
}

impl DecayHistogram {
    /// Bin start times in ns.
    pub fn times(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|i| i as f64 * self.bin_ns).collect()
    }

    pub fn span_ns(&self) -> f64 {
        self.counts.len() as f64 * self.bin_ns
    }

    /// CSV with columns `t_ns, counts`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_ns,counts\n");
        for (t, c) in self.times().iter().zip(&self.counts) {
            let _ = writeln!(out, "{t},{c}");
        }
        out
    }

    pub fn from_csv(text: &str, tau0_ns: f64) -> Result<Self, TcspcError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut times = Vec::new();
        let mut counts = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| TcspcError::Histogram(e.to_string()))?;
            let parse = |i: usize| -> Result<f64, TcspcError> {
                rec.get(i)
                    .ok_or_else(|| TcspcError::Histogram("expected two columns".into()))?
                    .parse::<f64>()
                    .map_err(|e| TcspcError::Histogram(e.to_string()))
            };
            let (t, c) = (parse(0)?, parse(1)?);
            if !(c >= 0.0) || c.fract() != 0.0 {
                return Err(TcspcError::Histogram(format!("count {c} is not a non-negative integer")));
            }
            times.push(t);
            counts.push(c as u64);
        }
        if times.len() < 2 {
            return Err(TcspcError::Histogram("need at least two bins".into()));
        }
        let bin_ns = times[1] - times[0];
        if !(bin_ns > 0.0) || times.windows(2).any(|w| ((w[1] - w[0]) - bin_ns).abs() > 1e-6 * bin_ns) {
            return Err(TcspcError::Histogram("bins must be uniform and increasing".into()));
        }
        if times[0].abs() > 1e-9 {
            return Err(TcspcError::Histogram("first bin must start at t = 0 (pulse switch-off)".into()));
        }
        Ok(Self { bin_ns, counts, tau0_ns, provenance: None })
    }
}

fn d_start() -> f64 {
    1.0
}
fn d_end() -> f64 {
    3.0
}
fn d_skip() -> f64 {
    20.0
}
fn d_background_after() -> f64 {
    12.0
}
fn d_gate() -> (f64, f64) {
    (0.9, 1.5)
}

/// Fit window in natural lifetimes after switch-off, the background region
/// and the reduced chi-square acceptance gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowPolicy {
    #[serde(default = "d_start")]
    pub start_lifetimes: f64,
    #[serde(default = "d_end")]
    pub end_lifetimes: f64,
    /// Data before this time are never fitted.
    #[serde(default = "d_skip")]
    pub skip_ns: f64,
    /// Background is the mean of bins after this many lifetimes.
    #[serde(default = "d_background_after")]
    pub background_after_lifetimes: f64,
    #[serde(default = "d_gate")]
    pub chi2_gate: (f64, f64),
}

impl Default for WindowPolicy {
    fn default() -> Self {
        Self {
            start_lifetimes: d_start(),
            end_lifetimes: d_end(),
            skip_ns: d_skip(),
            background_after_lifetimes: d_background_after(),
            chi2_gate: d_gate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowScanPoint {
    pub start_lifetimes: f64,
    pub end_lifetimes: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub fit: FitResult,
    /// Fitted rate over the natural rate.
    pub gamma_ratio: f64,
    pub gamma_ratio_sigma: f64,
    pub accepted: bool,
    pub scan: Vec<WindowScanPoint>,
    /// Largest relative deviation of the scanned rates from the main fit.
    pub scan_spread: f64,
}

fn background_level(hist: &DecayHistogram, policy: &WindowPolicy) -> Result<f64, TcspcError> {
    let span = hist.span_ns();
    if span < 4.0 * hist.tau0_ns {
        return Err(TcspcError::Histogram(format!(
            "histogram spans {span} ns, less than four lifetimes ({} ns)",
            4.0 * hist.tau0_ns
        )));
    }
    let after = (policy.background_after_lifetimes * hist.tau0_ns).min(0.75 * span);
    let late: Vec<f64> =
        hist.times().iter().zip(&hist.counts).filter(|(t, _)| **t >= after).map(|(_, c)| *c as f64).collect();
    Ok(late.iter().sum::<f64>() / late.len() as f64)
}

fn fit_window(hist: &DecayHistogram, offset: f64, policy: &WindowPolicy, start: f64, end: f64) -> Result<FitResult, TcspcError> {
    let lo = (start * hist.tau0_ns).max(policy.skip_ns);
    let hi = end * hist.tau0_ns;
    let t: Vec<f64> = hist.times();
    let c: Vec<f64> = hist.counts.iter().map(|c| *c as f64).collect();
    let problem = FitProblem::poisson(t, c, offset)?;
    Ok(fit_exp_offset(&problem, (lo, hi - 1e-9))?)
}

/// Fixed-offset exponential fit over the policy window plus a scan of
/// nearby windows within one to three lifetimes.
pub fn fit_decay(hist: &DecayHistogram, policy: &WindowPolicy) -> Result<DecayFit, TcspcError> {
    if !(policy.start_lifetimes < policy.end_lifetimes) {
        return Err(TcspcError::Histogram("fit window is empty".into()));
    }
    let offset = background_level(hist, policy)?;
    let fit = fit_window(hist, offset, policy, policy.start_lifetimes, policy.end_lifetimes)?;
    let mut scan = Vec::new();
    for ds in [0.0, 0.25, 0.5] {
        for de in [0.0, -0.25, -0.5] {
            let (s, e) = (policy.start_lifetimes + ds, policy.end_lifetimes + de);
            if e - s < 1.0 {
                continue;
            }
            let f = fit_window(hist, offset, policy, s, e)?;
            scan.push(WindowScanPoint { start_lifetimes: s, end_lifetimes: e, rate: f.rate * hist.tau0_ns });
        }
    }
    let gamma_ratio = fit.rate * hist.tau0_ns;
    let scan_spread = scan.iter().map(|p| (p.rate / gamma_ratio - 1.0).abs()).fold(0.0, f64::max);
    let (glo, ghi) = policy.chi2_gate;
    Ok(DecayFit {
        accepted: fit.reduced_chi2 >= glo && fit.reduced_chi2 <= ghi,
        gamma_ratio,
        gamma_ratio_sigma: fit.rate_sigma * hist.tau0_ns,
        fit,
        scan,
        scan_spread,
    })
}

/// Rate fitted to the exact expected curve of `model` (no counting noise).
pub fn fit_expected(model: &MixtureModel, policy: &WindowPolicy) -> Result<f64, TcspcError> {
    let expected = model.expected()?;
    let t: Vec<f64> = (0..model.bins).map(|i| i as f64 * model.bin_ns).collect();
    let problem = FitProblem::poisson(t, expected, model.background_per_bin)?;
    let lo = (policy.start_lifetimes * model.tau0_ns).max(policy.skip_ns);
    let hi = policy.end_lifetimes * model.tau0_ns - 1e-9;
    Ok(fit_exp_offset(&problem, (lo, hi))?.rate * model.tau0_ns)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixturePoint {
    pub spread: f64,
    pub mean_rate: f64,
    pub fitted_rate: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureReport {
    pub points: Vec<MixturePoint>,
    /// Smallest scanned spread whose fitted rate misses the mean by more
    /// than `threshold`.
    pub breakdown_spread: Option<f64>,
    pub threshold: f64,
}

/// Fits the exact curve of uniform rate spreads `mean (1 + eps)`,
/// `|eps| <= spread`, and compares with the mean rate.
pub fn validate_mixture_theorem(
    mean: f64,
    spreads: &[f64],
    policy: &WindowPolicy,
    threshold: f64,
) -> Result<MixtureReport, TcspcError> {
    let mut points = Vec::new();
    for &spread in spreads {
        if !(0.0..=0.3).contains(&spread) {
            return Err(TcspcError::Model(format!("spread {spread} outside [0, 0.3]")));
        }
        let mut model = MixtureModel::uniform_spread(mean, spread, 201);
        model.background_per_bin = 0.0;
        let fitted = fit_expected(&model, policy)?;
        let mean_rate = model.mean_rate();
        points.push(MixturePoint { spread, mean_rate, fitted_rate: fitted, deviation: fitted / mean_rate - 1.0 });
    }
    let breakdown_spread = points.iter().find(|p| p.deviation.abs() > threshold).map(|p| p.spread);
    Ok(MixtureReport { points, breakdown_spread, threshold })
}
