use std::f64::consts::{FRAC_PI_2, PI};
use std::path::PathBuf;
use std::time::Instant;

use num_complex::Complex64;
use proptest::prelude::*;
use purcell::cache::Cache;
use purcell::fdtd::{interpolate, run_dipole, sweep, DecayMap, FdtdError, Scene, SimulationConfig, SweepOptions};
use purcell::fiber::FiberSpec;
use purcell::{Orientation, PerOrientation};

/// Shared cache of full-size runs, so these tests only pay for the
/// solver once per checkout.
fn data_cache() -> Cache {
    Cache::open(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/cache")).unwrap()
}

fn small(orientation: Orientation) -> SimulationConfig {
    let mut c = SimulationConfig::new(FiberSpec::nanofiber(150.0), 30.0, orientation);
    c.grid_nm = 17.0;
    c.margin_nm = 204.0;
    c.pml_cells = 6;
    c
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

/// `P / P_0` for a dipole at height `d` above a half-space of index `n`,
/// normal and parallel to the surface, from the plane-wave (Sommerfeld)
/// expansion of the reflected field. Only `s < n` contributes to the real
/// part; `s < 1` uses `s = sin t` and `1 < s < n` uses `s = cosh u`.
fn half_space_oracle(n: f64, d_nm: f64, wavelength_nm: f64) -> (f64, f64) {
    let eps = n * n;
    let kd = 2.0 * PI / wavelength_nm * d_nm;
    let coeffs = |sz: Complex64, s: f64| {
        let s2z = Complex64::new(eps - s * s, 0.0).sqrt();
        let rp = (eps * sz - s2z) / (eps * sz + s2z);
        let rs = (sz - s2z) / (sz + s2z);
        (rp, rs)
    };
    let m = 20_000;
    let propagating = |t: f64, perp: bool| {
        let (s, sz) = (t.sin(), Complex64::new(t.cos(), 0.0));
        let (rp, rs) = coeffs(sz, s);
        let phase = Complex64::new(0.0, 2.0 * kd * sz.re).exp();
        let v = if perp { s.powi(3) * rp } else { s * (rs - sz * sz * rp) };
        (v * phase).re
    };
    let evanescent = |u: f64, perp: bool| {
        let s = u.cosh();
        let sz = Complex64::new(0.0, u.sinh());
        let (rp, rs) = coeffs(sz, s);
        let decay = (-2.0 * kd * u.sinh()).exp();
        // ds / sz = -i du
        let v = if perp { s.powi(3) * rp } else { s * (rs - sz * sz * rp) };
        (v * Complex64::new(0.0, -1.0)).re * decay
    };
    let umax = n.acosh();
    let ev = |perp| if umax > 0.0 { simpson(|u| evanescent(u, perp), 0.0, umax, m) } else { 0.0 };
    let perp = simpson(|t| propagating(t, true), 0.0, FRAC_PI_2, m) + ev(true);
    let par = simpson(|t| propagating(t, false), 0.0, FRAC_PI_2, m) + ev(false);
    (1.0 + 1.5 * perp, 1.0 + 0.75 * par)
}

#[test]
fn oracle_far_limit_and_known_values() {
    let (perp, par) = half_space_oracle(1.45367, 50.0, 780.0);
    // independent evaluation of the same integrals with mpmath
    assert!((perp - 1.6666).abs() < 3e-4 && (par - 1.0922).abs() < 3e-4, "{perp} {par}");
    let (perp, par) = half_space_oracle(1.45367, 20_000.0, 780.0);
    assert!((perp - 1.0).abs() < 2e-3 && (par - 1.0).abs() < 2e-3);
    let (perp, par) = half_space_oracle(1.0, 50.0, 780.0);
    // grazing endpoint is 0/0 in the reflection coefficients
    assert!((perp - 1.0).abs() < 1e-4 && (par - 1.0).abs() < 1e-4, "{perp} {par}");
}

#[test]
fn vacuum_run_normalizes_to_one() {
    let mut cfg = SimulationConfig::new(FiberSpec::nanofiber(230.0), 50.0, Orientation::R);
    cfg.scene = Scene::Vacuum;
    let r = run_dipole(&cfg, Some(&data_cache())).unwrap();
    assert!((r.ratio - 1.0).abs() < 0.02);
    assert!((r.vacuum_vs_analytic - 1.0).abs() < 0.02, "{}", r.vacuum_vs_analytic);
    assert!(r.closure_defect < 0.02);
}

#[test]
fn half_space_matches_the_plane_wave_oracle() {
    let cache = data_cache();
    let (perp, par) = half_space_oracle(1.45367, 50.0, 780.0);
    for (o, want) in [(Orientation::R, perp), (Orientation::Z, par)] {
        let mut cfg = SimulationConfig::new(FiberSpec::nanofiber(230.0), 50.0, o);
        cfg.scene = Scene::HalfSpace;
        let got = run_dipole(&cfg, Some(&cache)).unwrap().ratio;
        assert!((got / want - 1.0).abs() < 0.01, "{o}: {got} vs {want}");
    }
}

#[test]
fn pml_thickness_leaves_vacuum_power_unchanged() {
    let cache = data_cache();
    let power = |pml| {
        let mut cfg = SimulationConfig::new(FiberSpec::nanofiber(230.0), 50.0, Orientation::Z);
        cfg.scene = Scene::Vacuum;
        cfg.pml_cells = pml;
        run_dipole(&cfg, Some(&cache)).unwrap().vacuum_power
    };
    let (p8, p12) = (power(8), power(12));
    assert!((p8 / p12 - 1.0).abs() < 0.01, "{p8} vs {p12}");
}

#[test]
fn mirror_azimuth_gives_the_same_rate() {
    let cache = data_cache();
    let mut a = SimulationConfig::new(FiberSpec::nanofiber(230.0), 50.0, Orientation::Phi);
    let r0 = run_dipole(&a, Some(&cache)).unwrap().ratio;
    a.azimuth_rad = PI;
    let r1 = run_dipole(&a, Some(&cache)).unwrap().ratio;
    assert!((r0 / r1 - 1.0).abs() < 0.01, "{r0} vs {r1}");
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let cfg = small(Orientation::R);
    let run = |n| {
        rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap().install(|| run_dipole(&cfg, None).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert!(one.ratio > 0.0 && one.closure_defect < 0.02);
}

#[test]
fn cache_hits_are_fast_and_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cache = Cache::open(dir.path()).unwrap();
    let cfg = small(Orientation::Z);
    let t0 = Instant::now();
    let first = run_dipole(&cfg, Some(&cache)).unwrap();
    let cold = t0.elapsed();
    let t1 = Instant::now();
    let second = run_dipole(&cfg, Some(&cache)).unwrap();
    let warm = t1.elapsed();
    assert_eq!(first, second);
    assert!(cold > 100 * warm, "{cold:?} vs {warm:?}");
    assert!(cache.verify().unwrap().passed());
}

#[test]
fn single_cell_sweep_equals_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cache = Cache::open(dir.path()).unwrap();
    let cfg = small(Orientation::Phi);
    let direct = run_dipole(&cfg, Some(&cache)).unwrap().ratio;
    let opts = SweepOptions { cache: Some(&cache), ..Default::default() };
    let (map, summary) = sweep(&[150.0], &[30.0], &[Orientation::Phi], &cfg, opts).unwrap();
    assert_eq!(summary.failed, 0);
    assert_eq!(map.gamma_phi[0][0], Some(direct));
    assert_eq!(map.gamma_z[0][0], None);
}

#[test]
fn failing_cells_are_recorded_not_fatal() {
    let mut cfg = small(Orientation::R);
    cfg.max_steps = 30;
    let (map, summary) = sweep(&[150.0], &[30.0, 60.0], &[Orientation::R], &cfg, SweepOptions::default()).unwrap();
    assert_eq!(summary.failed, 2);
    assert_eq!(map.provenance.failures.len(), 2);
    assert!(map.gamma_r[0].iter().all(Option::is_none));
}

#[test]
fn invalid_configs_are_rejected() {
    let base = SimulationConfig::new(FiberSpec::nanofiber(230.0), 50.0, Orientation::Z);
    let mut coarse = base.clone();
    coarse.grid_nm = 20.0;
    let mut fast = base.clone();
    fast.courant = 0.6;
    let mut tight = base;
    tight.margin_nm = 50.0;
    for cfg in [coarse, fast, tight] {
        assert!(matches!(run_dipole(&cfg, None), Err(FdtdError::InvalidConfig(_))));
    }
}

fn affine_map(a: [f64; 3]) -> DecayMap {
    let radii = vec![200.0, 215.0, 240.0, 280.0];
    let dists = vec![5.0, 20.0, 45.0, 100.0, 300.0];
    let t = |k: f64| radii.iter().map(|r| dists.iter().map(|d| a[0] + a[1] * r * k + a[2] * d).collect()).collect();
    let tables = PerOrientation::new(t(1.0), t(0.5), t(0.0));
    let base = SimulationConfig::new(FiberSpec::nanofiber(230.0), 50.0, Orientation::Z);
    DecayMap::from_tables(radii, dists, tables, base).unwrap()
}

proptest! {
    #[test]
    fn interpolation_reproduces_affine_tables(
        c in 0.5f64..2.0, ar in -1e-3f64..1e-3, ad in -1e-3f64..1e-3,
        r in 200.0f64..280.0, d in 0.0f64..300.0,
    ) {
        let map = affine_map([c, ar, ad]);
        for (o, k) in [(Orientation::Z, 1.0), (Orientation::Phi, 0.5), (Orientation::R, 0.0)] {
            let v = interpolate(&map, r, d, o).unwrap();
            prop_assert!((v.value - (c + ar * r * k + ad * d)).abs() < 1e-12);
            prop_assert_eq!(v.extrapolated, d < 5.0);
        }
    }

    #[test]
    fn out_of_range_radius_is_an_error(r in prop_oneof![100.0f64..199.9, 280.1f64..400.0]) {
        let map = affine_map([1.0, 0.0, 0.0]);
        prop_assert!(matches!(interpolate(&map, r, 50.0, Orientation::Z), Err(FdtdError::Range(_))));
    }
}
