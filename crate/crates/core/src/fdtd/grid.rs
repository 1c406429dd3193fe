use std::ops::Range;

/// Field symmetry across a mirror plane, stated for the tangential electric field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Parity {
    /// Tangential E even, normal E odd (magnetic wall).
    Even,
    /// Tangential E odd, normal E even (electric wall).
    Odd,
}

impl Parity {
    pub(crate) fn sign(self) -> f32 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// Treatment of the low end of an axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LowSide {
    /// Absorbing layer backed by a conducting wall at position 0.
    Pml,
    /// Mirror plane through integer lattice position 0.
    Plane(Parity),
    /// Mirror plane through half-integer position 1/2; integer components
    /// at index 0 are ghosts mirrored from index 1.
    HalfPlane(Parity),
}

impl LowSide {
    pub(crate) fn is_mirror(self) -> bool {
        !matches!(self, LowSide::Pml)
    }
}

/// One grid axis. Integer components at index `j` sit at lattice position
/// `j`, half components at `j + 1/2`; a conducting wall closes position `n`.
#[derive(Debug, Clone)]
pub(crate) struct Axis {
    pub n: usize,
    pub low: LowSide,
    pub pml: usize,
    /// Lattice position of the physical origin.
    pub origin: f64,
    pub delta: f64,
    /// CPML recursion coefficients at integer (`e`) and half (`h`) positions.
    pub be: Vec<f32>,
    pub ce: Vec<f32>,
    pub bh: Vec<f32>,
    pub ch: Vec<f32>,
    pub e_pml: Vec<Range<usize>>,
    pub h_pml: Vec<Range<usize>>,
}

impl Axis {
    pub(crate) fn new(n: usize, low: LowSide, pml: usize, origin: f64, delta: f64, dt: f64, grading: f64) -> Self {
        let sigma_max = 0.8 * (grading + 1.0) / delta;
        let low_pml = matches!(low, LowSide::Pml);
        let depth = |p: f64| -> f64 {
            if pml == 0 {
                return 0.0;
            }
            let lo = if low_pml { (pml as f64 - p).max(0.0) } else { 0.0 };
            let hi = (p - (n - pml) as f64).max(0.0);
            (lo.max(hi) / pml as f64).min(1.0)
        };
        let coeffs = |p: f64| -> (f32, f32) {
            let sigma = sigma_max * depth(p).powf(grading);
            let b = (-sigma * dt).exp();
            (b as f32, (b - 1.0) as f32)
        };
        let (mut be, mut ce, mut bh, mut ch) = (vec![], vec![], vec![], vec![]);
        for j in 0..n {
            let (b, c) = coeffs(j as f64);
            be.push(b);
            ce.push(c);
            let (b, c) = coeffs(j as f64 + 0.5);
            bh.push(b);
            ch.push(c);
        }
        let e_pml = ranges_where(&ce);
        let h_pml = ranges_where(&ch);
        Self { n, low, pml, origin, delta, be, ce, bh, ch, e_pml, h_pml }
    }

    pub(crate) fn coord_int(&self, j: usize) -> f64 {
        (j as f64 - self.origin) * self.delta
    }

    pub(crate) fn coord_half(&self, j: usize) -> f64 {
        (j as f64 + 0.5 - self.origin) * self.delta
    }

    /// Lattice position of a physical coordinate.
    pub(crate) fn position(&self, x: f64) -> f64 {
        x / self.delta + self.origin
    }

    /// First and one-past-last lattice positions free of absorbing layers.
    pub(crate) fn interior(&self) -> (usize, usize) {
        let lo = if matches!(self.low, LowSide::Pml) { self.pml } else { 0 };
        (lo, self.n - self.pml)
    }

    /// Whether the integer component at index 0 is updated by the solver.
    pub(crate) fn first_integer_active(&self) -> bool {
        matches!(self.low, LowSide::Plane(Parity::Even))
    }
}

fn ranges_where(c: &[f32]) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = None;
    for (j, v) in c.iter().enumerate() {
        match (start, *v != 0.0) {
            (None, true) => start = Some(j),
            (Some(s), false) => {
                out.push(s..j);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(s..c.len());
    }
    out
}

/// A z-invariant dielectric object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Scatterer {
    Vacuum,
    Cylinder { cx: f64, cy: f64, radius: f64, index: f64 },
    /// Dielectric filling `x < x0`.
    HalfSpace { x0: f64, index: f64 },
}

impl Scatterer {
    fn inside(&self, x: f64, y: f64) -> bool {
        match *self {
            Scatterer::Vacuum => false,
            Scatterer::Cylinder { cx, cy, radius, .. } => (x - cx).powi(2) + (y - cy).powi(2) < radius * radius,
            Scatterer::HalfSpace { x0, .. } => x < x0,
        }
    }

    /// Signed distance to the interface, positive outside.
    fn distance(&self, x: f64, y: f64) -> f64 {
        match *self {
            Scatterer::Vacuum => f64::INFINITY,
            Scatterer::Cylinder { cx, cy, radius, .. } => ((x - cx).hypot(y - cy)) - radius,
            Scatterer::HalfSpace { x0, .. } => x - x0,
        }
    }

    fn normal(&self, x: f64, y: f64) -> (f64, f64) {
        match *self {
            Scatterer::Cylinder { cx, cy, .. } => {
                let (dx, dy) = (x - cx, y - cy);
                let r = dx.hypot(dy);
                if r == 0.0 {
                    (1.0, 0.0)
                } else {
                    (dx / r, dy / r)
                }
            }
            _ => (1.0, 0.0),
        }
    }

    fn permittivity(&self) -> f64 {
        match *self {
            Scatterer::Vacuum => 1.0,
            Scatterer::Cylinder { index, .. } | Scatterer::HalfSpace { index, .. } => index * index,
        }
    }

    /// Inverse effective permittivity seen by a field along `dir` (0 = x,
    /// 1 = y, 2 = z) in the square cell of side `delta` centred at `(x, y)`.
    /// Partially filled cells mix the arithmetic and harmonic means
    /// according to the local interface normal.
    pub(crate) fn inverse_permittivity(&self, x: f64, y: f64, delta: f64, dir: usize, samples: usize) -> f64 {
        let eps = self.permittivity();
        let d = self.distance(x, y);
        if d > delta {
            return 1.0;
        }
        if d < -delta {
            return 1.0 / eps;
        }
        let mut hits = 0usize;
        for a in 0..samples {
            for b in 0..samples {
                let sx = x + delta * ((a as f64 + 0.5) / samples as f64 - 0.5);
                let sy = y + delta * ((b as f64 + 0.5) / samples as f64 - 0.5);
                if self.inside(sx, sy) {
                    hits += 1;
                }
            }
        }
        let f = hits as f64 / (samples * samples) as f64;
        let mean = 1.0 + f * (eps - 1.0);
        let mean_inv = (1.0 - f) + f / eps;
        let (nx, ny) = self.normal(x, y);
        let c2 = match dir {
            0 => nx * nx,
            1 => ny * ny,
            _ => 0.0,
        };
        c2 * mean_inv + (1.0 - c2) / mean
    }
}

/// Inverse permittivity tables, indexed `i * ny + j`.
#[derive(Debug, Clone)]
pub(crate) struct Medium {
    pub inv_x: Vec<f32>,
    pub inv_y: Vec<f32>,
    pub inv_z: Vec<f32>,
}

impl Medium {
    pub(crate) fn rasterize(scatterer: &Scatterer, ax: &Axis, ay: &Axis, samples: usize) -> Self {
        let (nx, ny) = (ax.n, ay.n);
        let delta = ax.delta;
        let mut inv_x = vec![1.0f32; nx * ny];
        let mut inv_y = vec![1.0f32; nx * ny];
        let mut inv_z = vec![1.0f32; nx * ny];
        if !matches!(scatterer, Scatterer::Vacuum) {
            for i in 0..nx {
                for j in 0..ny {
                    let id = i * ny + j;
                    inv_x[id] = scatterer.inverse_permittivity(ax.coord_half(i), ay.coord_int(j), delta, 0, samples) as f32;
                    inv_y[id] = scatterer.inverse_permittivity(ax.coord_int(i), ay.coord_half(j), delta, 1, samples) as f32;
                    inv_z[id] = scatterer.inverse_permittivity(ax.coord_int(i), ay.coord_int(j), delta, 2, samples) as f32;
                }
            }
        }
        Self { inv_x, inv_y, inv_z }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pml_profile_only_in_layers() {
        let a = Axis::new(40, LowSide::Pml, 10, 20.0, 10.0, 5.0, 4.0);
        assert_eq!(a.e_pml, vec![0..10, 31..40]);
        assert_eq!(a.h_pml, vec![0..10, 30..40]);
        assert!(a.be[0] < a.be[5] && a.be[5] < 1.0);
        let m = Axis::new(40, LowSide::Plane(Parity::Even), 10, 0.0, 10.0, 5.0, 4.0);
        assert_eq!(m.e_pml, vec![31..40]);
        assert_eq!(m.interior(), (0, 30));
    }

    #[test]
    fn fill_fraction_limits() {
        let c = Scatterer::Cylinder { cx: 0.0, cy: 0.0, radius: 100.0, index: 1.5 };
        assert_eq!(c.inverse_permittivity(0.0, 0.0, 10.0, 2, 8), 1.0 / 2.25);
        assert_eq!(c.inverse_permittivity(200.0, 0.0, 10.0, 0, 8), 1.0);
        // a cell centred on the boundary is half filled
        let inv = c.inverse_permittivity(100.0, 0.0, 1.0, 2, 16);
        assert!((1.0 / inv - (1.0 + 0.5 * 1.25)).abs() < 0.02);
        // normal field sees the harmonic mean
        let inv_n = c.inverse_permittivity(100.0, 0.0, 1.0, 0, 16);
        assert!((inv_n - (0.5 + 0.5 / 2.25)).abs() < 0.02);
    }
}
