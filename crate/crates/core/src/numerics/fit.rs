use serde::{Deserialize, Serialize};

use super::{NumericsError, Result};

const MIN_POINTS: usize = 10;

/// Weighted data for the model `A exp(-rate t) + offset`, with `offset`
/// held fixed during the fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitProblem {
    pub abscissae: Vec<f64>,
    pub ordinates: Vec<f64>,
    /// Inverse variances.
    pub weights: Vec<f64>,
    pub offset: f64,
}

impl FitProblem {
    pub fn new(abscissae: Vec<f64>, ordinates: Vec<f64>, weights: Vec<f64>, offset: f64) -> Result<Self> {
        if abscissae.len() != ordinates.len() || abscissae.len() != weights.len() {
            return Err(NumericsError::Domain("fit sequences differ in length".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(NumericsError::Domain("fit weights must be finite and non-negative".into()));
        }
        if abscissae.iter().chain(&ordinates).any(|v| !v.is_finite()) || !offset.is_finite() {
            return Err(NumericsError::Domain("fit data must be finite".into()));
        }
        Ok(Self { abscissae, ordinates, weights, offset })
    }

    /// Poisson weights `1 / max(count, 1)`.
    pub fn poisson(abscissae: Vec<f64>, counts: Vec<f64>, offset: f64) -> Result<Self> {
        let weights = counts.iter().map(|c| 1.0 / c.max(1.0)).collect();
        Self::new(abscissae, counts, weights, offset)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Amplitude at `t = 0`.
    pub amplitude: f64,
    pub rate: f64,
    /// One-sigma rate uncertainty (change in rate that moves chi^2 by one).
    pub rate_sigma: f64,
    pub offset: f64,
    pub reduced_chi2: f64,
    pub window: (f64, f64),
    pub points: usize,
}

/// Weighted nonlinear least squares for `(A, rate)` over the abscissae in
/// `window` (inclusive), by Levenberg–Marquardt from a log-linear start.
pub fn fit_exp_offset(problem: &FitProblem, window: (f64, f64)) -> Result<FitResult> {
    let (t_lo, t_hi) = window;
    if !(t_lo < t_hi) {
        return Err(NumericsError::Domain(format!("empty fit window ({t_lo}, {t_hi})")));
    }
    let idx: Vec<usize> = (0..problem.abscissae.len())
        .filter(|&i| problem.abscissae[i] >= t_lo && problem.abscissae[i] <= t_hi)
        .collect();
    if idx.len() < MIN_POINTS {
        return Err(NumericsError::Domain(format!(
            "fit window holds {} points, need at least {MIN_POINTS}",
            idx.len()
        )));
    }
    let t0 = problem.abscissae[idx[0]];
    let ts: Vec<f64> = idx.iter().map(|&i| problem.abscissae[i] - t0).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| problem.ordinates[i] - problem.offset).collect();
    let ws: Vec<f64> = idx.iter().map(|&i| problem.weights[i]).collect();

    let (mut amp, mut rate) = log_linear_start(&ts, &ys, &ws)?;
    let chi2 = |amp: f64, rate: f64| -> f64 {
        ts.iter()
            .zip(&ys)
            .zip(&ws)
            .map(|((t, y), w)| {
                let r = y - amp * (-rate * t).exp();
                w * r * r
            })
            .sum()
    };

    let mut current = chi2(amp, rate);
    let mut lambda = 1e-3;
    let mut converged = false;
    for _ in 0..500 {
        let (jtj, jtr) = normal_equations(&ts, &ys, &ws, amp, rate);
        let mut step = None;
        for _ in 0..40 {
            let a = [
                [jtj[0][0] * (1.0 + lambda), jtj[0][1]],
                [jtj[1][0], jtj[1][1] * (1.0 + lambda)],
            ];
            let (da, dr) = solve2(a, jtr)?;
            let trial = chi2(amp + da, rate + dr);
            if trial.is_finite() && trial <= current {
                step = Some((da, dr, trial));
                lambda = (lambda * 0.3).max(1e-12);
                break;
            }
            lambda *= 10.0;
        }
        let Some((da, dr, trial)) = step else {
            converged = true;
            break;
        };
        amp += da;
        rate += dr;
        let small = da.abs() <= 1e-13 * amp.abs() && dr.abs() <= 1e-13 * rate.abs();
        let flat = current - trial <= 1e-15 * current.max(f64::MIN_POSITIVE);
        current = trial;
        if small || flat {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(NumericsError::Convergence { iterations: 500 });
    }
    if !(rate > 0.0) || !amp.is_finite() {
        return Err(NumericsError::FitDegenerate(format!("non-physical fit, rate = {rate}")));
    }

    let (jtj, _) = normal_equations(&ts, &ys, &ws, amp, rate);
    let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
    if !(det.abs() > 0.0) {
        return Err(NumericsError::FitDegenerate("singular normal equations".into()));
    }
    let rate_var = jtj[0][0] / det;
    let dof = (idx.len() - 2) as f64;
    Ok(FitResult {
        amplitude: amp * (rate * t0).exp(),
        rate,
        rate_sigma: rate_var.max(0.0).sqrt(),
        offset: problem.offset,
        reduced_chi2: current / dof,
        window,
        points: idx.len(),
    })
}

fn log_linear_start(ts: &[f64], ys: &[f64], ws: &[f64]) -> Result<(f64, f64)> {
    // weighted regression of ln(y) on t; the weight of ln(y) is w * y^2
    let (mut s, mut st, mut stt, mut sl, mut stl) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((t, y), w) in ts.iter().zip(ys).zip(ws) {
        if *y > 0.0 {
            let wl = w * y * y;
            let l = y.ln();
            s += wl;
            st += wl * t;
            stt += wl * t * t;
            sl += wl * l;
            stl += wl * t * l;
        }
    }
    let det = s * stt - st * st;
    if !(det.abs() > 0.0) || !(s > 0.0) {
        return Err(NumericsError::FitDegenerate("no positive signal above the offset".into()));
    }
    let slope = (s * stl - st * sl) / det;
    let intercept = (sl - slope * st) / s;
    let rate = if slope < 0.0 { -slope } else { 1.0 / (ts.last().copied().unwrap_or(1.0).max(1e-300)) };
    Ok((intercept.exp(), rate))
}

fn normal_equations(ts: &[f64], ys: &[f64], ws: &[f64], amp: f64, rate: f64) -> ([[f64; 2]; 2], [f64; 2]) {
    let mut jtj = [[0.0; 2]; 2];
    let mut jtr = [0.0; 2];
    for ((t, y), w) in ts.iter().zip(ys).zip(ws) {
        let e = (-rate * t).exp();
        let ja = e;
        let jr = -amp * t * e;
        let r = y - amp * e;
        jtj[0][0] += w * ja * ja;
        jtj[0][1] += w * ja * jr;
        jtj[1][1] += w * jr * jr;
        jtr[0] += w * ja * r;
        jtr[1] += w * jr * r;
    }
    jtj[1][0] = jtj[0][1];
    (jtj, jtr)
}

fn solve2(a: [[f64; 2]; 2], b: [f64; 2]) -> Result<(f64, f64)> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let scale = a[0][0].abs() * a[1][1].abs();
    if !(det.abs() > 1e-300) || !(det.abs() > 1e-14 * scale) {
        return Err(NumericsError::FitDegenerate("singular normal equations".into()));
    }
    Ok(((b[0] * a[1][1] - b[1] * a[0][1]) / det, (a[0][0] * b[1] - a[1][0] * b[0]) / det))
}
