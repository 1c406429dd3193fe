use proptest::prelude::*;
use purcell::atom_env::{EnvModel, EnvSpec};
use purcell::averaging::{
    corner_scan, infer_radius, sensitivity, Averager, AveragingError, AveragingOptions, Model, MultilevelSpec,
    Polarization,
};
use purcell::fdtd::{interpolate, DecayMap, SimulationConfig};
use purcell::fiber::{solve_he11, FiberSpec};
use purcell::{Orientation, PerOrientation};

/// Smooth synthetic map: `r` enhanced, `z` and `phi` inhibited near the
/// surface, with radius dependence in `z` and `phi`.
fn synthetic_map() -> DecayMap {
    let radii: Vec<f64> = (0..9).map(|i| 200.0 + 10.0 * i as f64).collect();
    let dists = vec![5.0, 10.0, 20.0, 40.0, 60.0, 80.0, 100.0, 150.0, 200.0, 300.0, 400.0, 600.0];
    let f = |o: Orientation, r: f64, d: f64| {
        let e = (-d / 90.0).exp();
        match o {
            Orientation::R => 1.0 + 0.6 * e,
            Orientation::Z => 1.0 - (0.15 + 0.004 * (r - 200.0)) * e,
            Orientation::Phi => 1.0 - 0.1 * e + 0.02 * (d / 300.0).sin(),
        }
    };
    let t = |o| radii.iter().map(|r| dists.iter().map(|d| f(o, *r, *d)).collect()).collect();
    let tables = PerOrientation::new(t(Orientation::Z), t(Orientation::Phi), t(Orientation::R));
    let base = SimulationConfig::new(FiberSpec::nanofiber(230.0), 50.0, Orientation::Z);
    DecayMap::from_tables(radii, dists, tables, base).unwrap()
}

fn averager(map: &DecayMap) -> Averager<'_> {
    Averager::new(map, EnvModel::default(), FiberSpec::nanofiber(235.0))
}

#[test]
fn horizontal_average_matches_trapezoid_oracle() {
    let map = synthetic_map();
    let radius = 235.0;
    let got = averager(&map).two_level(Polarization::Horizontal, radius).unwrap().value;
    let mode = solve_he11(&FiberSpec::nanofiber(radius)).unwrap();
    let env = EnvModel::default();
    let n = 40_000;
    let (lo, hi) = (5.0, 1200.0);
    let h = (hi - lo) / n as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..=n {
        let r = lo + h * i as f64;
        let p = env.point(r).unwrap();
        let w = p.rho_rel * p.p_abs * mode.alpha(r).unwrap().z * (radius + r) * if i == 0 || i == n { 0.5 } else { 1.0 };
        num += w * interpolate(&map, radius, r, Orientation::Z).unwrap().value;
        den += w;
    }
    assert!((got - num / den).abs() < 1e-6, "{got} vs {}", num / den);
}

#[test]
fn vertical_mixing_rule_by_explicit_azimuth_sum() {
    let map = synthetic_map();
    let radius = 225.0;
    let got = averager(&map).two_level(Polarization::Vertical, radius).unwrap().value;
    let mode = solve_he11(&FiberSpec::nanofiber(radius)).unwrap();
    let env = EnvModel::default();
    let (mut num, mut den) = (0.0, 0.0);
    let n = 20_000;
    let h = (1200.0 - 5.0) / n as f64;
    for i in 0..=n {
        let r = 5.0 + h * i as f64;
        let p = env.point(r).unwrap();
        let a = mode.alpha(r).unwrap();
        let g = |o| interpolate(&map, radius, r, o).unwrap().value;
        let w = p.rho_rel * p.p_abs * (radius + r) * if i == 0 || i == n { 0.5 } else { 1.0 };
        for k in 0..360 {
            let phi = (k as f64 + 0.5).to_radians();
            let (c2, s2) = (phi.cos().powi(2), phi.sin().powi(2));
            let gv = c2 * g(Orientation::R) + s2 * g(Orientation::Phi);
            let av = c2 * a.r + s2 * a.phi;
            num += w * gv * av;
            den += w * av;
        }
    }
    assert!((got - num / den).abs() < 1e-5, "{got} vs {}", num / den);
}

#[test]
fn quadrature_refinement_is_stable() {
    let map = synthetic_map();
    let a = averager(&map);
    let fine = a.clone().with_options(AveragingOptions { tolerance: 1e-12, ..Default::default() });
    for p in Polarization::ALL {
        let v1 = a.two_level(p, 240.0).unwrap().value;
        let v2 = fine.two_level(p, 240.0).unwrap().value;
        assert!((v1 / v2 - 1.0).abs() < 1e-3);
    }
}

#[test]
fn multilevel_is_a_mobius_function_of_branching() {
    // R(P) = (P N_pi + (1-P) N_s) / (P D_pi + (1-P) D_s): three evaluations
    // fix it, a fourth must agree
    let map = synthetic_map();
    let a = averager(&map);
    let r = |p: f64| {
        let spec = MultilevelSpec { p_pi: p, p_sigma: 1.0 - p, ..Default::default() };
        a.multilevel(&spec, Polarization::Vertical, 235.0).unwrap().value
    };
    let (r1, r0, rh) = (r(1.0), r(0.0), r(0.5));
    let k = (r1 - rh) / (rh - r0);
    let p = 0.3;
    let predicted = (p * r1 + (1.0 - p) * k * r0) / (p + (1.0 - p) * k);
    assert!((predicted - r(p)).abs() < 1e-9);
}

#[test]
fn sensitivity_table_and_corners() {
    let map = synthetic_map();
    let a = averager(&map);
    let spec = MultilevelSpec::default();
    let rep = sensitivity(&a, Model::TwoLevel, &spec, Polarization::Horizontal, 235.0, 0.2).unwrap();
    assert_eq!(rep.rows.len(), 8);
    let corners = corner_scan(&a, Polarization::Horizontal, 235.0, 0.2).unwrap();
    assert!(corners + 1e-12 >= rep.max_abs_delta);
    assert!(rep.to_csv().starts_with("parameter,factor,value,delta\n"));
}

#[test]
fn inversion_round_trip() {
    let map = synthetic_map();
    let a = averager(&map);
    let truth = a.two_level(Polarization::Horizontal, 235.0).unwrap().value;
    let est = infer_radius(&a, truth, 0.005).unwrap();
    assert!((est.radius_nm - 235.0).abs() < 0.05, "{est:?}");
    assert!(est.uncertainty_nm.unwrap() > 0.0);
    assert!(matches!(infer_radius(&a, 1.0, 0.01), Err(AveragingError::Inversion { .. })));
}

#[test]
fn non_monotonic_forward_model_reports_every_crossing() {
    let radii: Vec<f64> = (0..9).map(|i| 200.0 + 10.0 * i as f64).collect();
    let dists = vec![5.0, 10.0, 20.0, 40.0, 60.0, 100.0, 200.0, 600.0];
    let f = |r: f64, d: f64| 1.0 - (0.05 + 2e-4 * (r - 230.0).powi(2)) * (-d / 90.0).exp();
    let t = || radii.iter().map(|r| dists.iter().map(|d| f(*r, *d)).collect()).collect();
    let tables = PerOrientation::new(t(), t(), t());
    let base = SimulationConfig::new(FiberSpec::nanofiber(230.0), 50.0, Orientation::Z);
    let map = DecayMap::from_tables(radii, dists, tables, base).unwrap();
    let a = averager(&map);
    let truth = a.two_level(Polarization::Horizontal, 255.0).unwrap().value;
    let est = infer_radius(&a, truth, 0.001).unwrap();
    assert_eq!(est.roots_nm.len(), 2, "{est:?}");
    assert_eq!(est.radius_nm, est.roots_nm[0]);
    assert!(est.roots_nm[0] < 230.0 && (est.roots_nm[1] - 255.0).abs() < 0.05, "{:?}", est.roots_nm);
    for r in &est.roots_nm {
        let v = a.two_level(Polarization::Horizontal, *r).unwrap().value;
        assert!((v - truth).abs() < 1e-8, "{r}: {v} vs {truth}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn average_lies_within_support(radius in 200.0f64..280.0, vertical in any::<bool>()) {
        let map = synthetic_map();
        let pol = if vertical { Polarization::Vertical } else { Polarization::Horizontal };
        let v = averager(&map).two_level(pol, radius).unwrap();
        prop_assert!(v.value >= v.support_min - 1e-12 && v.value <= v.support_max + 1e-12);
    }

    #[test]
    fn far_density_scale_cancels(rho0 in 0.01f64..100.0) {
        let map = synthetic_map();
        let base = averager(&map).two_level(Polarization::Horizontal, 235.0).unwrap().value;
        let env = EnvModel { spec: EnvSpec { rho0, ..Default::default() }, ..Default::default() };
        let scaled = Averager::new(&map, env, FiberSpec::nanofiber(235.0))
            .two_level(Polarization::Horizontal, 235.0).unwrap().value;
        prop_assert!((base - scaled).abs() < 1e-12);
    }

    #[test]
    fn alpha_scale_cancels(scale in 0.1f64..10.0) {
        let map = synthetic_map();
        let a = averager(&map);
        let mut opts = AveragingOptions::default();
        opts.perturbation.alpha_scale = scale;
        let v0 = a.two_level(Polarization::Vertical, 250.0).unwrap().value;
        let v1 = a.clone().with_options(opts).two_level(Polarization::Vertical, 250.0).unwrap().value;
        prop_assert!((v0 - v1).abs() < 1e-12);
    }
}
