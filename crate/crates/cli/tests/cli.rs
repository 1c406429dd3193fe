use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use purcell::fdtd::{DecayMap, SimulationConfig};
use purcell::fiber::FiberSpec;
use purcell::{Orientation, PerOrientation};
use purcell_cli::config::{self, RunConfig, SweepAxes};
use purcell_cli::error::{EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_INVERSION};
use serde_json::{json, Value};

fn purcell(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_purcell"))
        .args(args)
        .current_dir(dir)
        .env_remove("PURCELL_CONFIG")
        .env_remove("PURCELL_OUT")
        .env_remove("PURCELL_THREADS")
        .env_remove("PURCELL_SEED")
        .env_remove("PURCELL_CACHE")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn write_json(path: &Path, v: &Value) {
    fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
}

/// Smooth map with the qualitative shape of the physical one.
fn synthetic_map() -> DecayMap {
    let radii: Vec<f64> = (0..9).map(|i| 200.0 + 10.0 * i as f64).collect();
    let dists = vec![5.0, 10.0, 20.0, 40.0, 60.0, 100.0, 150.0, 200.0, 300.0, 600.0];
    let f = |o: Orientation, r: f64, d: f64| {
        let e = (-d / 90.0).exp();
        match o {
            Orientation::R => 1.0 + 0.6 * e,
            Orientation::Z => 1.0 - (0.15 + 0.004 * (r - 200.0)) * e,
            Orientation::Phi => 1.0 - 0.1 * e,
        }
    };
    let t = |o| radii.iter().map(|r| dists.iter().map(|d| f(o, *r, *d)).collect()).collect();
    let tables = PerOrientation::new(t(Orientation::Z), t(Orientation::Phi), t(Orientation::R));
    let base = SimulationConfig::new(FiberSpec::nanofiber(230.0), 50.0, Orientation::Z);
    DecayMap::from_tables(radii, dists, tables, base).unwrap()
}

#[test]
fn serialized_configs_satisfy_the_schema() {
    let mut c = RunConfig::default();
    assert_eq!(config::parse(serde_json::to_value(&c).unwrap()).unwrap(), c);
    c.simulation = Some(SimulationConfig::new(FiberSpec::nanofiber(230.0), 50.0, Orientation::R));
    c.sweep = Some(SweepAxes::fig4());
    c.map = Some("map.json".into());
    c.seed = Some(7);
    c.threads = Some(2);
    c.tcspc.model.extinction = Some(Default::default());
    c.tcspc.histogram = Some("h.csv".into());
    assert_eq!(config::parse(serde_json::to_value(&c).unwrap()).unwrap(), c);
}

#[test]
fn shipped_example_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        config::load(&p).unwrap_or_else(|err| panic!("{}: {err}", p.display()));
        n += 1;
    }
    assert!(n >= 3);
}

#[test]
fn unknown_and_ill_typed_keys_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        json!({"fiber": {"radius_nm": 230, "core_index": 1.45, "wavelength_nm": 780, "colour": 1}}),
        json!({"average": {"polarization": "diagonal"}}),
        json!({"tcspc": {"window": {"start_lifetime": 1.0}}}),
        json!({"threads": 0}),
    ];
    for (i, c) in cases.iter().enumerate() {
        let p = dir.path().join(format!("c{i}.json"));
        write_json(&p, c);
        let out = purcell(dir.path(), &["--config", p.to_str().unwrap(), "mode-solve"]);
        assert_eq!(out.status.code(), Some(EXIT_CONFIG), "{c}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn mode_solve_reports_the_mode() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.json");
    write_json(&p, &json!({"fiber": {"radius_nm": 230, "core_index": 1.45367, "wavelength_nm": 780}}));
    let out = purcell(dir.path(), &["--config", p.to_str().unwrap(), "mode-solve"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let q = v["result"]["q_over_k"].as_f64().unwrap();
    assert!((q - 0.56).abs() < 0.01);
    assert_eq!(v["result"]["single_mode"], json!(true));
    assert_eq!(v["provenance"]["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn tcspc_round_trip_is_reproducible_for_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str, out: &str| {
        let o = purcell(dir.path(), &["--seed", "11", "--threads", threads, "--out", out, "tcspc-sim"]);
        assert!(o.status.success());
        fs::read_to_string(dir.path().join(out).join("histogram.csv")).unwrap()
    };
    let a = run("1", "a");
    let b = run("3", "b");
    assert_eq!(a, b);
    assert!(a.starts_with("t_ns,counts\n"));
    let side: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/histogram.csv.provenance.json")).unwrap()).unwrap();
    assert_eq!(side["provenance"]["seed"], json!(11));

    let fit = purcell(dir.path(), &["tcspc-fit", "--input", "a/histogram.csv"]);
    assert!(fit.status.success());
    let v: Value = serde_json::from_slice(&fit.stdout).unwrap();
    let g = v["result"]["gamma_ratio"].as_f64().unwrap();
    let s = v["result"]["gamma_ratio_sigma"].as_f64().unwrap();
    assert!((g - 1.0).abs() < 5.0 * s, "{g} +- {s}");
    assert_eq!(v["provenance"]["seed"], json!(11));
}

#[test]
fn seed_variable_mirrors_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let via_flag = purcell(dir.path(), &["--seed", "5", "tcspc-sim"]).stdout;
    let via_env = Command::new(env!("CARGO_BIN_EXE_purcell"))
        .arg("tcspc-sim")
        .env("PURCELL_SEED", "5")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
        .stdout;
    let other = purcell(dir.path(), &["--seed", "6", "tcspc-sim"]).stdout;
    assert_eq!(via_flag, via_env);
    assert_ne!(via_flag, other);
}

#[test]
fn averaging_commands_on_a_map_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("map.json"), serde_json::to_string(&synthetic_map()).unwrap()).unwrap();
    write_json(&dir.path().join("c.json"), &json!({"map": "map.json"}));
    let avg = purcell(dir.path(), &["--config", "c.json", "average"]);
    assert!(avg.status.success(), "{}", String::from_utf8_lossy(&avg.stderr));
    let v: Value = serde_json::from_slice(&avg.stdout).unwrap();
    assert_eq!(v["result"]["map_hash"], json!(synthetic_map().content_hash()));
    assert_eq!(v["provenance"]["inputs"]["decay_map"], v["result"]["map_hash"]);

    let sens = purcell(dir.path(), &["--config", "c.json", "sensitivity"]);
    assert!(sens.status.success());
    let text = String::from_utf8(sens.stdout).unwrap();
    assert!(text.starts_with("parameter,factor,value,delta\n"));
    assert_eq!(text.lines().count(), 9);

    write_json(&dir.path().join("bad.json"), &json!({"map": "map.json", "inference": {"measured": 1.5}}));
    let inv = purcell(dir.path(), &["--config", "bad.json", "infer-radius"]);
    assert_eq!(inv.status.code(), Some(EXIT_INVERSION));
}

#[test]
fn fig5_report_is_stable_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("map.json"), serde_json::to_string(&synthetic_map()).unwrap()).unwrap();
    write_json(&dir.path().join("c.json"), &json!({"map": "map.json"}));
    let run = |out: &str, threads: &str| {
        let o = purcell(dir.path(), &["--config", "c.json", "--out", out, "--threads", threads, "reproduce-fig5"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let mut v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join(out).join("fig5_report.json")).unwrap()).unwrap();
        v["wall_clock_s"] = json!(0);
        (v, fs::read_to_string(dir.path().join(out).join("fig5.csv")).unwrap())
    };
    let (a, csv_a) = run("a", "1");
    let (b, csv_b) = run("b", "2");
    assert_eq!(a, b);
    assert_eq!(csv_a, csv_b);
    let names: Vec<&str> = a["values"].as_array().unwrap().iter().map(|v| v["name"].as_str().unwrap()).collect();
    for n in ["two_level_horizontal", "two_level_vertical", "multilevel_horizontal", "multilevel_vertical", "free_space"] {
        assert!(names.contains(&n), "{names:?}");
    }
    let h = a["values"].as_array().unwrap().iter().find(|v| v["name"] == "two_level_horizontal").unwrap();
    assert_eq!(h["measured"]["value"], json!(0.943));
}

#[test]
fn missing_map_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = purcell(dir.path(), &["reproduce-fig5"]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
}

#[test]
fn unconverged_fdtd_run_exits_with_convergence_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut sim = SimulationConfig::new(FiberSpec::nanofiber(200.0), 50.0, Orientation::R);
    sim.grid_nm = 17.0;
    sim.margin_nm = 170.0;
    sim.pml_cells = 6;
    sim.max_steps = 40;
    write_json(&dir.path().join("c.json"), &json!({"simulation": sim}));
    let o = purcell(dir.path(), &["--config", "c.json", "fdtd-run"]);
    assert_eq!(o.status.code(), Some(EXIT_CONVERGENCE), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn cache_verify_and_dry_run_eviction() {
    let dir = tempfile::tempdir().unwrap();
    let cache = purcell::cache::Cache::open(dir.path().join("cache")).unwrap();
    let key = cache.put("t", &1, &vec![1.0, 2.0]).unwrap();
    cache.put("t", &2, &vec![3.0]).unwrap();
    let ok = purcell(dir.path(), &["--cache", "cache", "cache", "verify"]);
    assert!(ok.status.success());

    let dry = purcell(dir.path(), &["--cache", "cache", "cache", "evict", "--all", "--dry-run"]);
    assert!(dry.status.success());
    assert_eq!(String::from_utf8(dry.stdout).unwrap().lines().count(), 2);
    assert_eq!(cache.list().unwrap().len(), 2);

    let path = dir.path().join("cache").join(format!("{key}.json"));
    fs::write(&path, fs::read_to_string(&path).unwrap().replace("2.0", "2.5")).unwrap();
    let bad = purcell(dir.path(), &["--cache", "cache", "cache", "verify"]);
    assert!(!bad.status.success());
    assert!(String::from_utf8(bad.stdout).unwrap().contains(&key));

    let gone = purcell(dir.path(), &["--cache", "cache", "cache", "evict", "--all"]);
    assert!(gone.status.success());
    assert!(cache.list().unwrap().is_empty());
}
