//! Running single-frequency DFT of tangential fields on closed boxes and the
//! resulting time-averaged Poynting flux.

use num_complex::Complex64;

use super::grid::LowSide;
use super::solver::{Component, Solver};

/// Box bounds in lattice positions, `[x, y, z]`. Faces lie on integer
/// positions except where a bound coincides with a mirror plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct BoxBounds {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

struct Group {
    e: Component,
    h: Component,
    /// `(e index, h index below, h index above)`
    at: Vec<(usize, usize, usize)>,
    weight: Vec<f64>,
    e_acc: Vec<Complex64>,
    h_acc: Vec<Complex64>,
}

pub(crate) struct FluxBox {
    groups: Vec<Group>,
    /// Face area element times the image count of the mirror planes.
    scale: f64,
}

fn overlap(p: f64, lo: f64, hi: f64) -> f64 {
    ((p + 0.5).min(hi) - (p - 0.5).max(lo)).max(0.0)
}

fn mirror_position(low: LowSide) -> Option<f64> {
    match low {
        LowSide::Pml => None,
        LowSide::Plane(_) => Some(0.0),
        LowSide::HalfPlane(_) => Some(0.5),
    }
}

impl FluxBox {
    pub(crate) fn new(solver: &Solver, bounds: BoxBounds) -> Self {
        let (nx, ny, nz) = solver.dims();
        let axes = [&solver.ax, &solver.ay, &solver.az];
        let BoxBounds { lo, hi } = bounds;
        let mut images = 1.0;
        for a in axes {
            if a.low.is_mirror() {
                images *= 2.0;
            }
        }
        let delta = solver.ax.delta;
        let idx = |i: usize, j: usize, k: usize| (i * ny + j) * nz + k;
        let ov = |axis: usize, p: f64| overlap(p, lo[axis], hi[axis]);
        let mut groups = Vec::new();
        let mut push = |e: Component, h: Component, at: Vec<(usize, usize, usize)>, weight: Vec<f64>| {
            let n = at.len();
            groups.push(Group { e, h, at, weight, e_acc: vec![Complex64::default(); n], h_acc: vec![Complex64::default(); n] });
        };

        for axis in 0..3 {
            for (bound, sign) in [(lo[axis], -1.0), (hi[axis], 1.0)] {
                if sign < 0.0 && mirror_position(axes[axis].low) == Some(bound) {
                    continue;
                }
                assert!(bound.fract() == 0.0 && bound >= 1.0, "flux face off the lattice: {bound}");
                let f = bound as usize;
                let (mut a1, mut w1, mut a2, mut w2) = (vec![], vec![], vec![], vec![]);
                match axis {
                    0 => {
                        for j in 0..ny {
                            for k in 0..nz {
                                let w = ov(1, j as f64 + 0.5) * ov(2, k as f64);
                                if w > 0.0 {
                                    a1.push((idx(f, j, k), idx(f - 1, j, k), idx(f, j, k)));
                                    w1.push(sign * w);
                                }
                                let w = ov(1, j as f64) * ov(2, k as f64 + 0.5);
                                if w > 0.0 {
                                    a2.push((idx(f, j, k), idx(f - 1, j, k), idx(f, j, k)));
                                    w2.push(-sign * w);
                                }
                            }
                        }
                        push(Component::Ey, Component::Hz, a1, w1);
                        push(Component::Ez, Component::Hy, a2, w2);
                    }
                    1 => {
                        for i in 0..nx {
                            for k in 0..nz {
                                let w = ov(0, i as f64) * ov(2, k as f64 + 0.5);
                                if w > 0.0 {
                                    a1.push((idx(i, f, k), idx(i, f - 1, k), idx(i, f, k)));
                                    w1.push(sign * w);
                                }
                                let w = ov(0, i as f64 + 0.5) * ov(2, k as f64);
                                if w > 0.0 {
                                    a2.push((idx(i, f, k), idx(i, f - 1, k), idx(i, f, k)));
                                    w2.push(-sign * w);
                                }
                            }
                        }
                        push(Component::Ez, Component::Hx, a1, w1);
                        push(Component::Ex, Component::Hz, a2, w2);
                    }
                    _ => {
                        for i in 0..nx {
                            for j in 0..ny {
                                let w = ov(0, i as f64 + 0.5) * ov(1, j as f64);
                                if w > 0.0 {
                                    a1.push((idx(i, j, f), idx(i, j, f - 1), idx(i, j, f)));
                                    w1.push(sign * w);
                                }
                                let w = ov(0, i as f64) * ov(1, j as f64 + 0.5);
                                if w > 0.0 {
                                    a2.push((idx(i, j, f), idx(i, j, f - 1), idx(i, j, f)));
                                    w2.push(-sign * w);
                                }
                            }
                        }
                        push(Component::Ex, Component::Hy, a1, w1);
                        push(Component::Ey, Component::Hx, a2, w2);
                    }
                }
            }
        }
        Self { groups, scale: delta * delta * images }
    }

    pub(crate) fn accumulate_e(&mut self, solver: &Solver, phase: Complex64) {
        for g in &mut self.groups {
            let e = solver.field(g.e);
            for (acc, (ie, _, _)) in g.e_acc.iter_mut().zip(&g.at) {
                *acc += phase * e[*ie] as f64;
            }
        }
    }

    pub(crate) fn accumulate_h(&mut self, solver: &Solver, phase: Complex64) {
        for g in &mut self.groups {
            let h = solver.field(g.h);
            for (acc, (_, i1, i2)) in g.h_acc.iter_mut().zip(&g.at) {
                *acc += phase * (0.5 * (h[*i1] as f64 + h[*i2] as f64));
            }
        }
    }

    /// Outward time-averaged power through the box, including mirror images.
    pub(crate) fn power(&self) -> f64 {
        let mut total = 0.0;
        for g in &self.groups {
            for ((e, h), w) in g.e_acc.iter().zip(&g.h_acc).zip(&g.weight) {
                total += w * (e * h.conj()).re;
            }
        }
        0.5 * total * self.scale
    }

    pub(crate) fn samples(&self) -> usize {
        self.groups.iter().map(|g| g.at.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlap_weights() {
        assert_eq!(overlap(3.0, 0.0, 10.0), 1.0);
        assert_eq!(overlap(0.0, 0.0, 10.0), 0.5);
        assert_eq!(overlap(0.5, 0.5, 10.0), 0.5);
        assert_eq!(overlap(0.0, 0.5, 10.0), 0.0);
        assert_eq!(overlap(9.5, 0.0, 10.0), 1.0);
        assert_eq!(overlap(10.0, 0.0, 10.0), 0.5);
    }
}
