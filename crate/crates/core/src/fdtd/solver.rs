//! Yee-lattice update kernels with convolutional PML and mirror planes.
//!
//! Units: lengths in nm, `c = epsilon_0 = mu_0 = 1`, so time is measured in
//! nm and `dt = S * delta`. Storage is `(i * ny + j) * nz + k`; the fiber
//! axis runs along `z`, so the medium depends on `(i, j)` only.

use rayon::prelude::*;

use super::grid::{Axis, LowSide, Medium, Parity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub(crate) enum Component {
    Ex,
    Ey,
    Ez,
    Hx,
    Hy,
    Hz,
}

pub(crate) struct Solver {
    pub ax: Axis,
    pub ay: Axis,
    pub az: Axis,
    pub medium: Medium,
    /// `dt / delta`.
    pub s: f32,
    pub dt: f64,
    pub ex: Vec<f32>,
    pub ey: Vec<f32>,
    pub ez: Vec<f32>,
    pub hx: Vec<f32>,
    pub hy: Vec<f32>,
    pub hz: Vec<f32>,
    // CPML auxiliaries ordered xy, xz, yz, yx, zx, zy (field, derivative axis)
    pe: [Vec<f32>; 6],
    ph: [Vec<f32>; 6],
}

impl Solver {
    pub(crate) fn new(ax: Axis, ay: Axis, az: Axis, medium: Medium, courant: f64) -> Self {
        let n = ax.n * ay.n * az.n;
        let zeros = || vec![0.0f32; n];
        let dt = courant * ax.delta;
        Self {
            ax,
            ay,
            az,
            medium,
            s: courant as f32,
            dt,
            ex: zeros(),
            ey: zeros(),
            ez: zeros(),
            hx: zeros(),
            hy: zeros(),
            hz: zeros(),
            pe: std::array::from_fn(|_| zeros()),
            ph: std::array::from_fn(|_| zeros()),
        }
    }

    pub(crate) fn dims(&self) -> (usize, usize, usize) {
        (self.ax.n, self.ay.n, self.az.n)
    }

    pub(crate) fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.ay.n + j) * self.az.n + k
    }

    pub(crate) fn field(&self, c: Component) -> &[f32] {
        match c {
            Component::Ex => &self.ex,
            Component::Ey => &self.ey,
            Component::Ez => &self.ez,
            Component::Hx => &self.hx,
            Component::Hy => &self.hy,
            Component::Hz => &self.hz,
        }
    }

    /// Adds `-dt * J / eps` to an electric component; `moment` is the
    /// current moment `J * delta^3`.
    pub(crate) fn inject(&mut self, c: Component, i: usize, j: usize, k: usize, moment: f64) {
        let idx = self.index(i, j, k);
        let cell = i * self.ay.n + j;
        let d3 = self.ax.delta.powi(3);
        let (field, inv) = match c {
            Component::Ex => (&mut self.ex, self.medium.inv_x[cell]),
            Component::Ey => (&mut self.ey, self.medium.inv_y[cell]),
            Component::Ez => (&mut self.ez, self.medium.inv_z[cell]),
            _ => panic!("sources drive electric components only"),
        };
        field[idx] -= (self.dt * inv as f64 * moment / d3) as f32;
    }

    pub(crate) fn step_h(&mut self) {
        let (nx, ny, nz) = self.dims();
        let slab = ny * nz;
        let s = self.s;
        let (ax, ay, az) = (&self.ax, &self.ay, &self.az);
        let (ex, ey, ez) = (&self.ex, &self.ey, &self.ez);
        let [p_xy, p_xz, p_yz, p_yx, p_zx, p_zy] = &mut self.ph;
        (
            self.hx.par_chunks_mut(slab),
            self.hy.par_chunks_mut(slab),
            self.hz.par_chunks_mut(slab),
            p_xy.par_chunks_mut(slab),
            p_xz.par_chunks_mut(slab),
            p_yz.par_chunks_mut(slab),
            p_yx.par_chunks_mut(slab),
            p_zx.par_chunks_mut(slab),
            p_zy.par_chunks_mut(slab),
        )
            .into_par_iter()
            .enumerate()
            .for_each(|(i, (hx, hy, hz, q_xy, q_xz, q_yz, q_yx, q_zx, q_zy))| {
                let exi = &ex[i * slab..(i + 1) * slab];
                let eyi = &ey[i * slab..(i + 1) * slab];
                let ezi = &ez[i * slab..(i + 1) * slab];
                let next = (i + 1 < nx).then(|| ((i + 1) * slab, (i + 2) * slab));
                let eyn = next.map(|(a, b)| &ey[a..b]);
                let ezn = next.map(|(a, b)| &ez[a..b]);
                let x_pml = ax.h_pml.iter().any(|r| r.contains(&i));
                for j in 0..ny {
                    let r = j * nz..(j + 1) * nz;
                    let rn = (j + 1 < ny).then(|| (j + 1) * nz..(j + 2) * nz);
                    let (ex_r, ey_r, ez_r) = (&exi[r.clone()], &eyi[r.clone()], &ezi[r.clone()]);
                    let (hx_r, hy_r, hz_r) = (&mut hx[r.clone()], &mut hy[r.clone()], &mut hz[r.clone()]);
                    // Hx -= s (dEz/dy - dEy/dz)
                    // Hy -= s (dEx/dz - dEz/dx)
                    // Hz -= s (dEy/dx - dEx/dy)
                    match &rn {
                        Some(rn) => {
                            let ez_n = &ezi[rn.clone()];
                            let ex_n = &exi[rn.clone()];
                            for k in 0..nz - 1 {
                                hx_r[k] -= s * ((ez_n[k] - ez_r[k]) - (ey_r[k + 1] - ey_r[k]));
                                hz_r[k] += s * (ex_n[k] - ex_r[k]);
                            }
                            let k = nz - 1;
                            hx_r[k] -= s * ((ez_n[k] - ez_r[k]) + ey_r[k]);
                            hz_r[k] += s * (ex_n[k] - ex_r[k]);
                        }
                        None => {
                            for k in 0..nz - 1 {
                                hx_r[k] -= s * (-ez_r[k] - (ey_r[k + 1] - ey_r[k]));
                                hz_r[k] -= s * ex_r[k];
                            }
                            let k = nz - 1;
                            hx_r[k] -= s * (-ez_r[k] + ey_r[k]);
                            hz_r[k] -= s * ex_r[k];
                        }
                    }
                    for k in 0..nz - 1 {
                        hy_r[k] -= s * (ex_r[k + 1] - ex_r[k]);
                    }
                    hy_r[nz - 1] += s * ex_r[nz - 1];
                    match (eyn, ezn) {
                        (Some(eyn), Some(ezn)) => {
                            let (ey_nx, ez_nx) = (&eyn[r.clone()], &ezn[r.clone()]);
                            for k in 0..nz {
                                hy_r[k] += s * (ez_nx[k] - ez_r[k]);
                                hz_r[k] -= s * (ey_nx[k] - ey_r[k]);
                            }
                        }
                        _ => {
                            for k in 0..nz {
                                hy_r[k] -= s * ez_r[k];
                                hz_r[k] += s * ey_r[k];
                            }
                        }
                    }

                    // CPML along z: Hx += s psi_xz, Hy -= s psi_yz
                    for kr in &az.h_pml {
                        for k in kr.clone() {
                            let dey = if k + 1 < nz { ey_r[k + 1] } else { 0.0 } - ey_r[k];
                            let dex = if k + 1 < nz { ex_r[k + 1] } else { 0.0 } - ex_r[k];
                            let id = j * nz + k;
                            q_xz[id] = az.bh[k] * q_xz[id] + az.ch[k] * dey;
                            q_yz[id] = az.bh[k] * q_yz[id] + az.ch[k] * dex;
                            hx_r[k] += s * q_xz[id];
                            hy_r[k] -= s * q_yz[id];
                        }
                    }
                    // CPML along y: Hx -= s psi_xy, Hz += s psi_zy
                    if ay.h_pml.iter().any(|r| r.contains(&j)) {
                        let (b, c) = (ay.bh[j], ay.ch[j]);
                        for k in 0..nz {
                            let (ezn, exn) = match &rn {
                                Some(rn) => (ezi[rn.start + k], exi[rn.start + k]),
                                None => (0.0, 0.0),
                            };
                            let id = j * nz + k;
                            q_xy[id] = b * q_xy[id] + c * (ezn - ez_r[k]);
                            q_zy[id] = b * q_zy[id] + c * (exn - ex_r[k]);
                            hx_r[k] -= s * q_xy[id];
                            hz_r[k] += s * q_zy[id];
                        }
                    }
                    // CPML along x: Hy += s psi_yx, Hz -= s psi_zx
                    if x_pml {
                        let (b, c) = (ax.bh[i], ax.ch[i]);
                        for k in 0..nz {
                            let (ezx, eyx) = match (eyn, ezn) {
                                (Some(eyn), Some(ezn)) => (ezn[r.start + k], eyn[r.start + k]),
                                _ => (0.0, 0.0),
                            };
                            let id = j * nz + k;
                            q_yx[id] = b * q_yx[id] + c * (ezx - ez_r[k]);
                            q_zx[id] = b * q_zx[id] + c * (eyx - ey_r[k]);
                            hy_r[k] += s * q_yx[id];
                            hz_r[k] -= s * q_zx[id];
                        }
                    }
                }
            });
    }

    pub(crate) fn step_e(&mut self) {
        let (_, ny, nz) = self.dims();
        let slab = ny * nz;
        let s = self.s;
        let (ax, ay, az) = (&self.ax, &self.ay, &self.az);
        let medium = &self.medium;
        let (hx, hy, hz) = (&self.hx, &self.hy, &self.hz);
        let [p_xy, p_xz, p_yz, p_yx, p_zx, p_zy] = &mut self.pe;
        let y_first = ay.first_integer_active();
        let z_first = az.first_integer_active();
        (
            self.ex.par_chunks_mut(slab),
            self.ey.par_chunks_mut(slab),
            self.ez.par_chunks_mut(slab),
            p_xy.par_chunks_mut(slab),
            p_xz.par_chunks_mut(slab),
            p_yz.par_chunks_mut(slab),
            p_yx.par_chunks_mut(slab),
            p_zx.par_chunks_mut(slab),
            p_zy.par_chunks_mut(slab),
        )
            .into_par_iter()
            .enumerate()
            .for_each(|(i, (ex, ey, ez, q_xy, q_xz, q_yz, q_yx, q_zx, q_zy))| {
                let hxi = &hx[i * slab..(i + 1) * slab];
                let hyi = &hy[i * slab..(i + 1) * slab];
                let hzi = &hz[i * slab..(i + 1) * slab];
                let prev = (i > 0).then(|| ((i - 1) * slab, i * slab));
                let hym = prev.map(|(a, b)| &hy[a..b]);
                let hzm = prev.map(|(a, b)| &hz[a..b]);
                let x_active = i > 0 || ax.first_integer_active();
                let x_pml = ax.e_pml.iter().any(|r| r.contains(&i));
                let mut neg_hx = vec![0.0f32; nz];
                let mut neg_hz = vec![0.0f32; nz];
                let zero = vec![0.0f32; nz];
                for j in 0..ny {
                    let r = j * nz..(j + 1) * nz;
                    let (hx_r, hy_r, hz_r) = (&hxi[r.clone()], &hyi[r.clone()], &hzi[r.clone()]);
                    // rows at j - 1, or the odd mirror image of row 0
                    let (hx_p, hz_p): (&[f32], &[f32]) = if j > 0 {
                        let rp = (j - 1) * nz..j * nz;
                        (&hxi[rp.clone()], &hzi[rp])
                    } else {
                        for k in 0..nz {
                            neg_hx[k] = -hx_r[k];
                            neg_hz[k] = -hz_r[k];
                        }
                        (&neg_hx, &neg_hz)
                    };
                    let y_active = j > 0 || y_first;
                    let cell = i * ny + j;
                    let (cx, cy, cz) = (s * medium.inv_x[cell], s * medium.inv_y[cell], s * medium.inv_z[cell]);
                    let (ex_r, ey_r, ez_r) = (&mut ex[r.clone()], &mut ey[r.clone()], &mut ez[r.clone()]);

                    // Ex += cx (dHz/dy - dHy/dz)
                    if y_active {
                        for k in 1..nz {
                            ex_r[k] += cx * ((hz_r[k] - hz_p[k]) - (hy_r[k] - hy_r[k - 1]));
                        }
                        if z_first {
                            ex_r[0] += cx * ((hz_r[0] - hz_p[0]) - 2.0 * hy_r[0]);
                        }
                    }
                    // Ey += cy (dHx/dz - dHz/dx)
                    let hzm_r: &[f32] = hzm.map_or(&zero, |h| &h[r.clone()]);
                    let hym_r: &[f32] = hym.map_or(&zero, |h| &h[r.clone()]);
                    if x_active {
                        for k in 1..nz {
                            ey_r[k] += cy * ((hx_r[k] - hx_r[k - 1]) - (hz_r[k] - hzm_r[k]));
                        }
                        if z_first {
                            ey_r[0] += cy * (2.0 * hx_r[0] - (hz_r[0] - hzm_r[0]));
                        }
                    }
                    // Ez += cz (dHy/dx - dHx/dy)
                    if x_active && y_active {
                        for k in 0..nz {
                            ez_r[k] += cz * ((hy_r[k] - hym_r[k]) - (hx_r[k] - hx_p[k]));
                        }
                    }

                    // CPML along z: Ex -= cx psi_xz, Ey += cy psi_yz
                    for kr in &az.e_pml {
                        for k in kr.clone() {
                            if k == 0 {
                                continue;
                            }
                            let id = j * nz + k;
                            if y_active {
                                q_xz[id] = az.be[k] * q_xz[id] + az.ce[k] * (hy_r[k] - hy_r[k - 1]);
                                ex_r[k] -= cx * q_xz[id];
                            }
                            if x_active {
                                q_yz[id] = az.be[k] * q_yz[id] + az.ce[k] * (hx_r[k] - hx_r[k - 1]);
                                ey_r[k] += cy * q_yz[id];
                            }
                        }
                    }
                    // CPML along y: Ex += cx psi_xy, Ez -= cz psi_zy
                    if j > 0 && ay.e_pml.iter().any(|r| r.contains(&j)) {
                        let (b, c) = (ay.be[j], ay.ce[j]);
                        for k in 0..nz {
                            let id = j * nz + k;
                            let dzy = hz_r[k] - hz_p[k];
                            let dxy = hx_r[k] - hx_p[k];
                            if k > 0 || z_first {
                                q_xy[id] = b * q_xy[id] + c * dzy;
                                ex_r[k] += cx * q_xy[id];
                            }
                            if x_active {
                                q_zy[id] = b * q_zy[id] + c * dxy;
                                ez_r[k] -= cz * q_zy[id];
                            }
                        }
                    }
                    // CPML along x: Ey -= cy psi_yx, Ez += cz psi_zx
                    if x_pml && x_active {
                        let (b, c) = (ax.be[i], ax.ce[i]);
                        for k in 0..nz {
                            let id = j * nz + k;
                            if k > 0 || z_first {
                                q_yx[id] = b * q_yx[id] + c * (hz_r[k] - hzm_r[k]);
                                ey_r[k] -= cy * q_yx[id];
                            }
                            if y_active {
                                q_zx[id] = b * q_zx[id] + c * (hy_r[k] - hym_r[k]);
                                ez_r[k] += cz * q_zx[id];
                            }
                        }
                    }
                }
                apply_mirrors(ex, ey, ez, ny, nz, ay.low, az.low);
            });
    }
}

/// Fills ghost rows of half-integer mirror planes and zeroes normal fields
/// on magnetic-wall planes.
fn apply_mirrors(ex: &mut [f32], ey: &mut [f32], ez: &mut [f32], ny: usize, nz: usize, ylow: LowSide, zlow: LowSide) {
    if let LowSide::HalfPlane(p) = zlow {
        let sg = p.sign();
        for j in 0..ny {
            let b = j * nz;
            ex[b] = sg * ex[b + 1];
            ey[b] = sg * ey[b + 1];
            if p == Parity::Even {
                ez[b] = 0.0;
            }
        }
    }
    if let LowSide::HalfPlane(p) = ylow {
        let sg = p.sign();
        for k in 0..nz {
            ex[k] = sg * ex[nz + k];
            ez[k] = sg * ez[nz + k];
            if p == Parity::Even {
                ey[k] = 0.0;
            }
        }
    }
}
