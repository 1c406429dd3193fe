use proptest::prelude::*;
use purcell::atom_env::{
    absorption, build_profile, density, linear_grid, potential, vdw_cp, EnvModel, EnvSpec, VdwCoefficients,
};
use purcell::fiber::{solve_he11, FiberSpec};

// 30-digit substitution of the default constants at r = 100 nm.
const UG_100: f64 = -2.346_631_243_358_129_6e-28;
const RHO_100: f64 = 0.929_765_202_285_455_3;
const DELTA_100_MHZ: f64 = -0.320_162_729_637_514_3;
const PABS_100: f64 = 0.988_982_089_395_593_9;

#[test]
fn ground_potential_at_100_nm() {
    let u = potential(&VdwCoefficients::ground(), 100.0).unwrap();
    assert!((u / UG_100 - 1.0).abs() < 1e-12, "{u}");
    assert!((u / -2.35e-28 - 1.0).abs() < 0.01);
}

#[test]
fn density_at_100_nm() {
    let m = EnvModel::default();
    let p = m.point(100.0).unwrap();
    assert!((p.rho_rel - RHO_100).abs() < 1e-12);
    assert!((p.rho_rel - 0.930).abs() < 0.005);
}

#[test]
fn shift_and_absorption_at_100_nm() {
    let m = EnvModel::default();
    let p = m.point(100.0).unwrap();
    assert!((p.delta_mhz / DELTA_100_MHZ - 1.0).abs() < 1e-9);
    assert!((p.delta_mhz / -0.32 - 1.0).abs() < 0.05);
    assert!((p.p_abs - PABS_100).abs() < 1e-9);
}

#[test]
fn asymptotic_limits() {
    // relative departures from the two power laws are exactly r/(r+L) and
    // L/(r+L) with L = C4/C3
    for c in [VdwCoefficients::ground(), VdwCoefficients::excited()] {
        let l_nm = c.crossover_m() * 1e9;
        for r in [1.0, 1e4] {
            let u = potential(&c, r).unwrap();
            let near = u * (r * 1e-9).powi(3) / -c.c3;
            let far = u * (r * 1e-9).powi(4) / -c.c4;
            assert!((1.0 - near - r / (r + l_nm)).abs() < 1e-12);
            assert!((1.0 - far - l_nm / (r + l_nm)).abs() < 1e-12);
        }
        let r_near = 0.009 * l_nm;
        let r_far = 100.0 * l_nm;
        let near = potential(&c, r_near).unwrap() * (r_near * 1e-9).powi(3) / -c.c3;
        let far = potential(&c, r_far).unwrap() * (r_far * 1e-9).powi(4) / -c.c4;
        assert!((near - 1.0).abs() < 0.01 && (far - 1.0).abs() < 0.01);
    }
}

#[test]
fn far_end_of_profile_is_free() {
    let m = EnvModel::default();
    let p = build_profile(&m, &linear_grid(5.0, 1200.0, 400)).unwrap();
    let last = p.grid_nm.len() - 1;
    assert!(p.rho_rel[last] > 0.999);
    assert!((p.p_abs[last] - 1.0).abs() < 1e-3);
    assert!(p.rho_rel.windows(2).all(|w| w[0] < w[1]));
    assert!(p.u_g.iter().chain(&p.u_e).all(|u| *u < 0.0));
    assert!(p.p_abs.iter().all(|v| *v > 0.0 && *v <= 1.0));
}

#[test]
fn weighted_product_peaks_away_from_surface() {
    let mode = solve_he11(&FiberSpec::nanofiber(235.0)).unwrap();
    let m = EnvModel::default();
    let grid = linear_grid(5.0, 600.0, 596);
    let product: Vec<f64> = grid
        .iter()
        .map(|r| {
            let p = m.point(*r).unwrap();
            p.rho_rel * p.p_abs * mode.alpha_mean(*r).unwrap()
        })
        .collect();
    let imax = product.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert!(imax > 0 && imax < grid.len() - 1, "peak at {} nm", grid[imax]);
}

#[test]
fn saturation_caps_absorption() {
    let spec = EnvSpec { saturation: 1.5, ..Default::default() };
    let (d, p) = absorption(&spec, -1e-28, -1e-28);
    assert_eq!(d, 0.0);
    assert!((p - 0.4).abs() < 1e-15);
}

proptest! {
    #[test]
    fn potential_increases_with_distance(r in 0.5f64..5000.0, dr in 0.01f64..100.0) {
        for c in [VdwCoefficients::ground(), VdwCoefficients::excited()] {
            prop_assert!(potential(&c, r).unwrap() < potential(&c, r + dr).unwrap());
        }
    }

    #[test]
    fn transition_is_red_shifted(r in 0.5f64..1e5) {
        let p = EnvModel::default().point(r).unwrap();
        prop_assert!(p.delta_mhz < 0.0);
        prop_assert!(p.rho_rel > 0.0 && p.rho_rel <= 1.0);
    }

    #[test]
    fn dimensionless_outputs_ignore_length_units(r_nm in 1.0f64..2000.0) {
        // the same physics with lengths in nm and energies in J
        let g = VdwCoefficients::ground();
        let e = VdwCoefficients::excited();
        let spec = EnvSpec::default();
        let ug_m = vdw_cp(g.c3, g.c4, r_nm * 1e-9);
        let ue_m = vdw_cp(e.c3, e.c4, r_nm * 1e-9);
        let ug_nm = vdw_cp(g.c3 * 1e27, g.c4 * 1e36, r_nm);
        let ue_nm = vdw_cp(e.c3 * 1e27, e.c4 * 1e36, r_nm);
        prop_assert!((density(&spec, ug_m) - density(&spec, ug_nm)).abs() < 1e-12);
        let (d1, p1) = absorption(&spec, ug_m, ue_m);
        let (d2, p2) = absorption(&spec, ug_nm, ue_nm);
        prop_assert!((d1 - d2).abs() < 1e-12 * d1.abs().max(1.0));
        prop_assert!((p1 - p2).abs() < 1e-12);
    }
}
