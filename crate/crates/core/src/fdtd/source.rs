use std::f64::consts::PI;

use num_complex::Complex64;

/// Modulated Gaussian `g(t) = exp(-(t - t0)^2 / 2 tau^2) sin(w0 (t - t0))`,
/// applied as the current `(g(t_{n+1}) - g(t_n)) / dt` so the injected
/// charge sums to zero.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Pulse {
    pub omega: f64,
    pub tau: f64,
    pub t0: f64,
    pub dt: f64,
}

impl Pulse {
    pub(crate) fn new(wavelength: f64, bandwidth: f64, dt: f64) -> Self {
        let omega = 2.0 * PI / wavelength;
        let tau = 1.0 / (bandwidth * omega);
        Self { omega, tau, t0: 6.0 * tau, dt }
    }

    fn envelope(&self, t: f64) -> f64 {
        let u = (t - self.t0) / self.tau;
        (-0.5 * u * u).exp() * (self.omega * (t - self.t0)).sin()
    }

    /// Current moment between steps `n` and `n + 1`.
    pub(crate) fn current(&self, n: usize) -> f64 {
        let t = n as f64 * self.dt;
        (self.envelope(t + self.dt) - self.envelope(t)) / self.dt
    }

    /// Step after which the drive is negligible.
    pub(crate) fn end_step(&self) -> usize {
        (2.0 * self.t0 / self.dt).ceil() as usize
    }

    /// DFT of the drive at the analysis frequency.
    pub(crate) fn spectrum(&self) -> Complex64 {
        (0..self.end_step())
            .map(|n| Complex64::from_polar(self.dt, self.omega * (n as f64 + 0.5) * self.dt) * self.current(n))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_net_charge_and_nonzero_line() {
        let p = Pulse::new(780.0, 0.5, 5.0);
        let net: f64 = (0..p.end_step()).map(|n| p.current(n)).sum::<f64>() * p.dt;
        assert!(net.abs() < 1e-6);
        assert!(p.spectrum().norm() > 1.0);
    }
}
