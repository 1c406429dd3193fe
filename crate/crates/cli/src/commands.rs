use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use purcell::atom_env::{build_profile, linear_grid};
use purcell::averaging::{infer_radius, sensitivity, Averager, Model, Polarization};
use purcell::cache::{content_hash, sha256_hex, Cache, Eviction};
use purcell::fdtd::{run_dipole, sweep, DecayMap, SweepOptions, SweepSummary};
use purcell::fiber::{alpha_profile, solve_he11};
use purcell::tcspc::{fit_decay, synthesize, DecayHistogram};
use purcell::Orientation;
use serde::Serialize;

use crate::config::{self, RunConfig, SweepAxes};
use crate::error::CliError;
use crate::report::{CellSummary, Measured, Provenance, Report, ReportValue, Sidecar, Sink, Tagged};
use crate::args::{CacheAction, Cli, Command};

/// Largest tolerated fraction of failed sweep cells.
const MAX_FAILURE_FRACTION: f64 = 0.05;
/// Directory for multi-file outputs when `--out` is not given.
const DEFAULT_OUT: &str = "purcell-out";

const MEASURED_VERTICAL: Measured = Measured { value: 1.088, sigma: 0.015 };
const MEASURED_HORIZONTAL: Measured = Measured { value: 0.943, sigma: 0.014 };
const MEASURED_FREE_SPACE: Measured = Measured { value: 0.989, sigma: 0.012 };

struct Ctx {
    cfg: RunConfig,
    hash: String,
    cache: Option<Cache>,
}

impl Ctx {
    fn sink(&self) -> Result<Sink, CliError> {
        Sink::new(self.cfg.out.clone())
    }

    fn dir_sink(&self) -> Result<Sink, CliError> {
        Sink::new(Some(self.cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))))
    }

    fn provenance(&self, command: &str) -> Provenance {
        Provenance::new(command, &self.hash)
    }

    fn cache(&self) -> Result<&Cache, CliError> {
        self.cache.as_ref().ok_or_else(|| CliError::Config("no cache directory (use --cache or PURCELL_CACHE)".into()))
    }
}

fn setup(cli: &Cli) -> Result<Ctx, CliError> {
    let g = &cli.global;
    let mut cfg = match &g.config {
        Some(p) => config::load(p)?,
        None => RunConfig::default(),
    };
    cfg.out = g.out.clone().or(cfg.out);
    cfg.threads = g.threads.or(cfg.threads);
    cfg.seed = g.seed.or(cfg.seed);
    cfg.cache = g.cache.clone().or(cfg.cache);
    if let Command::ReproduceFig5 { build_map: true } = cli.command {
        cfg.build_map = true;
    }
    if let Some(n) = cfg.threads {
        if n == 0 {
            return Err(CliError::Config("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Other(e.to_string()))?;
    }
    cfg.fiber.validate()?;
    cfg.environment.validate()?;
    let cache = cfg.cache.as_ref().map(Cache::open).transpose()?;
    Ok(Ctx { hash: cfg.result_hash(), cfg, cache })
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Command::Schema = cli.command {
        print!("{}", config::SCHEMA);
        return Ok(());
    }
    let ctx = setup(&cli)?;
    match &cli.command {
        Command::ModeSolve => mode_solve(&ctx),
        Command::Alpha => alpha(&ctx),
        Command::EnvProfile => env_profile(&ctx),
        Command::FdtdRun => fdtd_run(&ctx),
        Command::FdtdSweep => fdtd_sweep(&ctx),
        Command::Average => average(&ctx),
        Command::Sensitivity => sensitivity_table(&ctx),
        Command::InferRadius => infer(&ctx),
        Command::TcspcSim => tcspc_sim(&ctx),
        Command::TcspcFit { input } => tcspc_fit(&ctx, input.as_deref()),
        Command::ReproduceFig4 => fig4(&ctx),
        Command::ReproduceFig5 { .. } => fig5(&ctx),
        Command::Cache { action } => cache_cmd(&ctx, action),
        Command::Schema => unreachable!(),
    }
}

fn hash_of<T: Serialize>(v: &T) -> String {
    content_hash(v).expect("value serializes")
}

fn tagged<T: Serialize>(sink: &Sink, name: &str, value: &T, prov: &Provenance) -> Result<(), CliError> {
    sink.emit_json(name, &Tagged { result: value, provenance: prov })
}

#[derive(Serialize)]
struct ModeSummary {
    radius_nm: f64,
    beta_over_k: f64,
    q_over_k: f64,
    h_over_k: f64,
    v_number: f64,
    single_mode: bool,
    single_mode_cutoff_radius_nm: f64,
    dispersion_residual: f64,
}

fn mode_solve(ctx: &Ctx) -> Result<(), CliError> {
    let spec = ctx.cfg.fiber;
    let m = solve_he11(&spec)?;
    let summary = ModeSummary {
        radius_nm: spec.radius_nm,
        beta_over_k: m.beta / m.k,
        q_over_k: m.q / m.k,
        h_over_k: m.h / m.k,
        v_number: m.v_number,
        single_mode: m.single_mode,
        single_mode_cutoff_radius_nm: spec.single_mode_cutoff_radius(),
        dispersion_residual: m.residual,
    };
    let prov = ctx.provenance("mode-solve").input("fiber", hash_of(&spec));
    tagged(&ctx.sink()?, "mode.json", &summary, &prov)
}

fn profile_grid(ctx: &Ctx) -> Result<Vec<f64>, CliError> {
    let g = ctx.cfg.grid;
    if !(g.hi_nm > g.lo_nm) || g.points < 2 {
        return Err(CliError::Config(format!("grid [{}, {}] nm with {} points", g.lo_nm, g.hi_nm, g.points)));
    }
    Ok(linear_grid(g.lo_nm, g.hi_nm, g.points))
}

fn alpha(ctx: &Ctx) -> Result<(), CliError> {
    let mode = solve_he11(&ctx.cfg.fiber)?;
    let p = alpha_profile(&mode, &profile_grid(ctx)?)?;
    let mut csv = String::from("r_nm,alpha_z,alpha_phi,alpha_r\n");
    for i in 0..p.distances_nm.len() {
        let _ = writeln!(csv, "{},{:.9e},{:.9e},{:.9e}", p.distances_nm[i], p.alpha_z[i], p.alpha_phi[i], p.alpha_r[i]);
    }
    let prov = ctx.provenance("alpha").input("fiber", hash_of(&ctx.cfg.fiber)).input("alpha_profile", hash_of(&p));
    ctx.sink()?.emit_with_sidecar("alpha.csv", &csv, &prov)
}

fn env_profile(ctx: &Ctx) -> Result<(), CliError> {
    let p = build_profile(&ctx.cfg.environment, &profile_grid(ctx)?)?;
    let prov = ctx
        .provenance("env-profile")
        .input("environment", hash_of(&ctx.cfg.environment))
        .input("env_profile", p.content_hash());
    ctx.sink()?.emit_with_sidecar("env_profile.csv", &p.to_csv(), &prov)
}

fn fdtd_run(ctx: &Ctx) -> Result<(), CliError> {
    let sim = ctx.cfg.simulation_base();
    let res = run_dipole(&sim, ctx.cache.as_ref())?;
    let prov = ctx.provenance("fdtd-run").input("simulation", res.config_hash.clone());
    tagged(&ctx.sink()?, "power.json", &res, &prov)
}

fn run_sweep(ctx: &Ctx, axes: &SweepAxes) -> Result<(DecayMap, SweepSummary), CliError> {
    let base = ctx.cfg.simulation_base();
    let opts = SweepOptions { cache: ctx.cache.as_ref(), normalization: axes.normalization };
    log::info!(
        "sweep: {} radii x {} distances x {} orientations on {} threads",
        axes.radii_nm.len(),
        axes.distances_nm.len(),
        axes.orientations.len(),
        rayon::current_num_threads()
    );
    Ok(sweep(&axes.radii_nm, &axes.distances_nm, &axes.orientations, &base, opts)?)
}

fn check_failures(s: &SweepSummary) -> Result<(), CliError> {
    if s.failure_fraction() > MAX_FAILURE_FRACTION {
        return Err(CliError::Convergence(format!(
            "{} of {} sweep cells failed (limit {:.0}%)",
            s.failed,
            s.cells,
            100.0 * MAX_FAILURE_FRACTION
        )));
    }
    Ok(())
}

fn write_map(sink: &Sink, stem: &str, map: &DecayMap, prov: &Provenance) -> Result<(), CliError> {
    sink.emit_with_sidecar(&format!("{stem}.csv"), &map.to_csv(), prov)?;
    sink.emit_json(&format!("{stem}.json"), map)
}

fn fdtd_sweep(ctx: &Ctx) -> Result<(), CliError> {
    let axes = ctx.cfg.sweep.clone().unwrap_or_else(SweepAxes::standard);
    let start = Instant::now();
    let (map, summary) = run_sweep(ctx, &axes)?;
    let prov = ctx.provenance("fdtd-sweep").input("decay_map", map.content_hash());
    let sink = ctx.dir_sink()?;
    write_map(&sink, "decay_map", &map, &prov)?;
    let report = Report {
        values: vec![],
        cells: Some(CellSummary { cells: summary.cells, failed: summary.failed }),
        provenance: prov,
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    sink.emit_json("sweep_report.json", &report)?;
    check_failures(&summary)
}

/// The configured map, or a sweep through the cache when allowed.
fn obtain_map(ctx: &Ctx, default_axes: fn() -> SweepAxes) -> Result<(DecayMap, Option<SweepSummary>), CliError> {
    if let Some(p) = &ctx.cfg.map {
        let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("map {}: {e}", p.display())))?;
        let map: DecayMap =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("map {}: {e}", p.display())))?;
        return Ok((map, None));
    }
    if !ctx.cfg.build_map {
        return Err(CliError::Config("no decay map: set `map` in the config or enable `build_map`".into()));
    }
    let axes = ctx.cfg.sweep.clone().unwrap_or_else(default_axes);
    let (map, summary) = run_sweep(ctx, &axes)?;
    check_failures(&summary)?;
    Ok((map, Some(summary)))
}

fn averager<'a>(ctx: &Ctx, map: &'a DecayMap) -> Averager<'a> {
    Averager::new(map, ctx.cfg.environment, ctx.cfg.fiber).with_options(ctx.cfg.average.options)
}

fn average(ctx: &Ctx) -> Result<(), CliError> {
    let (map, _) = obtain_map(ctx, SweepAxes::standard)?;
    let a = &ctx.cfg.average;
    let rate = averager(ctx, &map).rate(a.model, &a.multilevel, a.polarization, a.radius_nm)?;
    let prov = ctx
        .provenance("average")
        .input("decay_map", rate.map_hash.clone())
        .input("environment", rate.env_hash.clone());
    tagged(&ctx.sink()?, "average.json", &rate, &prov)
}

fn sensitivity_table(ctx: &Ctx) -> Result<(), CliError> {
    let (map, _) = obtain_map(ctx, SweepAxes::standard)?;
    let a = &ctx.cfg.average;
    let av = averager(ctx, &map);
    let rep = sensitivity(&av, a.model, &a.multilevel, a.polarization, a.radius_nm, a.sensitivity_fraction)?;
    let prov = ctx
        .provenance("sensitivity")
        .input("decay_map", map.content_hash())
        .input("environment", hash_of(&ctx.cfg.environment));
    ctx.sink()?.emit_with_sidecar("sensitivity.csv", &rep.to_csv(), &prov)
}

fn infer(ctx: &Ctx) -> Result<(), CliError> {
    let (map, _) = obtain_map(ctx, SweepAxes::standard)?;
    let inf = ctx.cfg.inference;
    let est = infer_radius(&averager(ctx, &map), inf.measured, inf.sigma)?;
    let mut csv = String::from("radius_nm,gamma_h\n");
    for (r, g) in &est.scan {
        let _ = writeln!(csv, "{r},{g:.6}");
    }
    let _ = writeln!(csv, "{:.3},{:.6}", est.radius_nm, inf.measured);
    let prov = ctx
        .provenance("infer-radius")
        .input("decay_map", est.map_hash.clone())
        .input("environment", hash_of(&ctx.cfg.environment));
    let sink = ctx.sink()?;
    if sink.dir().is_some() {
        sink.emit_with_sidecar("infer_radius.csv", &csv, &prov)?;
    }
    tagged(&sink, "infer_radius.json", &est, &prov)
}

fn tcspc_sim(ctx: &Ctx) -> Result<(), CliError> {
    let model = &ctx.cfg.tcspc.model;
    let seed = ctx.cfg.seed.unwrap_or(0);
    let hist = synthesize(model, seed)?;
    let mut prov = ctx.provenance("tcspc-sim").input("mixture_model", model.content_hash());
    prov.seed = Some(seed);
    ctx.sink()?.emit_with_sidecar("histogram.csv", &hist.to_csv(), &prov)
}

fn tcspc_fit(ctx: &Ctx, input: Option<&Path>) -> Result<(), CliError> {
    let path = input
        .map(Path::to_path_buf)
        .or_else(|| ctx.cfg.tcspc.histogram.clone())
        .ok_or_else(|| CliError::Config("no histogram (use --input or tcspc.histogram)".into()))?;
    let text = fs::read_to_string(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let hist = DecayHistogram::from_csv(&text, ctx.cfg.tcspc.model.tau0_ns)?;
    let fit = fit_decay(&hist, &ctx.cfg.tcspc.window)?;
    let mut prov = ctx.provenance("tcspc-fit").input("histogram", sha256_hex(text.as_bytes()));
    let sidecar = PathBuf::from(format!("{}.provenance.json", path.display()));
    if let Some(s) = fs::read_to_string(&sidecar).ok().and_then(|t| serde_json::from_str::<Sidecar>(&t).ok()) {
        if let Some(h) = s.provenance.inputs.get("mixture_model") {
            prov = prov.input("mixture_model", h.clone());
        }
        prov.seed = s.provenance.seed;
    }
    tagged(&ctx.sink()?, "fit.json", &fit, &prov)
}

/// Largest relative spread `(max - min) / mean` across radius over the
/// distance columns selected by `keep`.
pub fn radius_spread(map: &DecayMap, o: Orientation, keep: impl Fn(f64) -> bool) -> Option<f64> {
    let t = map.table(o);
    let mut worst: Option<f64> = None;
    for (di, d) in map.distances_nm.iter().enumerate() {
        if !keep(*d) {
            continue;
        }
        let col: Vec<f64> = t.iter().filter_map(|row| row[di]).collect();
        if col.len() < 2 {
            continue;
        }
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let spread = (col.iter().cloned().fold(f64::MIN, f64::max) - col.iter().cloned().fold(f64::MAX, f64::min)) / mean;
        worst = Some(worst.map_or(spread, |w: f64| w.max(spread)));
    }
    worst
}

fn gnuplot_script(orientations: &[Orientation]) -> String {
    let mut s = String::from(
        "# gnuplot fig4.gp\nset terminal pngcairo size 1500,450\nset output 'fig4.png'\n\
         set view map\nset xlabel 'distance from surface (nm)'\nset ylabel 'fiber radius (nm)'\n\
         set palette rgbformulae 33,13,10\n",
    );
    let _ = writeln!(s, "set multiplot layout 1,{}", orientations.len());
    for o in orientations {
        let _ = writeln!(s, "set title 'gamma_{o} / gamma_0'");
        let _ = writeln!(s, "plot 'fig4_{o}.dat' nonuniform matrix with image notitle");
    }
    s.push_str("unset multiplot\n");
    s
}

fn fig4(ctx: &Ctx) -> Result<(), CliError> {
    let axes = ctx.cfg.sweep.clone().unwrap_or_else(SweepAxes::fig4);
    let start = Instant::now();
    let (map, summary) = run_sweep(ctx, &axes)?;
    let prov = ctx.provenance("reproduce-fig4").input("decay_map", map.content_hash());
    let sink = ctx.dir_sink()?;
    write_map(&sink, "fig4_map", &map, &prov)?;
    for o in &axes.orientations {
        let mut csv = String::from("radius_nm,distance_nm,gamma\n");
        for (ri, r) in map.radii_nm.iter().enumerate() {
            for (di, d) in map.distances_nm.iter().enumerate() {
                let v = map.table(*o)[ri][di].map_or("nan".into(), |x| format!("{x:.6}"));
                let _ = writeln!(csv, "{r},{d},{v}");
            }
        }
        sink.emit_with_sidecar(&format!("fig4_{o}.csv"), &csv, &prov)?;
        sink.emit(&format!("fig4_{o}.dat"), &map.to_gnuplot_matrix(*o))?;
    }
    sink.emit("fig4.gp", &gnuplot_script(&axes.orientations))?;
    let mut values = Vec::new();
    let mut push = |name: &str, v: Option<f64>| {
        if let Some(value) = v {
            values.push(ReportValue { name: name.into(), value, uncertainty: None, measured: None });
        }
    };
    push("gamma_r_radius_spread_max", radius_spread(&map, Orientation::R, |_| true));
    push("gamma_z_radius_spread_near_surface", radius_spread(&map, Orientation::Z, |d| d <= 50.0));
    push("gamma_phi_radius_spread_near_surface", radius_spread(&map, Orientation::Phi, |d| d <= 50.0));
    let report = Report {
        values,
        cells: Some(CellSummary { cells: summary.cells, failed: summary.failed }),
        provenance: prov,
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    sink.emit_json("fig4_report.json", &report)?;
    check_failures(&summary)
}

fn fig5(ctx: &Ctx) -> Result<(), CliError> {
    let start = Instant::now();
    let (map, summary) = obtain_map(ctx, SweepAxes::standard)?;
    let a = &ctx.cfg.average;
    let av = averager(ctx, &map);
    let radius = a.radius_nm;
    let mut values = Vec::new();
    for (model, tag) in [(Model::TwoLevel, "two_level"), (Model::Multilevel, "multilevel")] {
        for pol in Polarization::ALL {
            let rate = av.rate(model, &a.multilevel, pol, radius)?;
            let rep = sensitivity(&av, model, &a.multilevel, pol, radius, a.sensitivity_fraction)?;
            let measured = match (model, pol) {
                (Model::TwoLevel, Polarization::Horizontal) => Some(MEASURED_HORIZONTAL),
                (Model::TwoLevel, Polarization::Vertical) => Some(MEASURED_VERTICAL),
                _ => None,
            };
            values.push(ReportValue {
                name: format!("{tag}_{pol}"),
                value: rate.value,
                uncertainty: Some(rep.max_abs_delta),
                measured,
            });
        }
    }
    values.push(ReportValue { name: "free_space".into(), value: 1.0, uncertainty: None, measured: Some(MEASURED_FREE_SPACE) });
    let inf = ctx.cfg.inference;
    match infer_radius(&av, inf.measured, inf.sigma) {
        Ok(est) => values.push(ReportValue {
            name: "inferred_radius_nm".into(),
            value: est.radius_nm,
            uncertainty: est.uncertainty_nm,
            measured: None,
        }),
        Err(e) => log::warn!("radius inference: {e}"),
    }
    let prov = ctx
        .provenance("reproduce-fig5")
        .input("decay_map", map.content_hash())
        .input("environment", hash_of(&ctx.cfg.environment));
    let report = Report {
        values,
        cells: summary.map(|s| CellSummary { cells: s.cells, failed: s.failed }),
        provenance: prov,
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    let mut table = String::from("quantity,predicted,model_uncertainty,measured,measured_sigma\n");
    for v in &report.values {
        let opt = |x: Option<f64>| x.map_or(String::new(), |x| format!("{x:.4}"));
        let _ = writeln!(
            table,
            "{},{:.4},{},{},{}",
            v.name,
            v.value,
            opt(v.uncertainty),
            opt(v.measured.map(|m| m.value)),
            opt(v.measured.map(|m| m.sigma))
        );
    }
    let sink = ctx.dir_sink()?;
    sink.emit_with_sidecar("fig5.csv", &table, &report.provenance)?;
    sink.emit_json("fig5_report.json", &report)
}

fn cache_cmd(ctx: &Ctx, action: &CacheAction) -> Result<(), CliError> {
    let cache = ctx.cache()?;
    match action {
        CacheAction::List => {
            let mut out = String::from("key\tnamespace\tbytes\tage_s\n");
            for e in cache.list()? {
                let _ = writeln!(out, "{}\t{}\t{}\t{:.0}", e.key, e.namespace, e.bytes, e.age_s);
            }
            print!("{out}");
        }
        CacheAction::Verify => {
            let report = cache.verify()?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.passed() {
                return Err(CliError::Other(format!("{} corrupted entries quarantined", report.quarantined.len())));
            }
        }
        CacheAction::Evict { key, older_than_days, all, dry_run } => {
            let rule = match (key, older_than_days, all) {
                (Some(k), _, _) => Eviction::Key(k),
                (_, Some(d), _) => Eviction::OlderThan(Duration::from_secs_f64(d * 86_400.0)),
                (_, _, true) => Eviction::All,
                _ => return Err(CliError::Config("evict needs --key, --older-than-days or --all".into())),
            };
            let removed = cache.evict(rule, *dry_run)?;
            let verb = if *dry_run { "would remove" } else { "removed" };
            for k in &removed {
                println!("{verb} {k}");
            }
            log::info!("{verb} {} entries", removed.len());
        }
    }
    Ok(())
}
