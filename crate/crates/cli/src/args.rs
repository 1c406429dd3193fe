use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Decay-rate modification of atoms near an optical nanofiber.
///
/// Every flag can also be set through the environment variable shown in
/// its help; flags win over variables, which win over the config file.
#[derive(Debug, Parser)]
#[command(name = "purcell", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// JSON run configuration (see schema/run-config.schema.json).
    #[arg(long, global = true, env = "PURCELL_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output directory; single-result commands print to stdout without it.
    #[arg(long, global = true, env = "PURCELL_OUT")]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on this value.
    #[arg(long, global = true, env = "PURCELL_THREADS")]
    pub threads: Option<usize>,
    /// Seed for synthetic photon data.
    #[arg(long, global = true, env = "PURCELL_SEED")]
    pub seed: Option<u64>,
    /// Directory of cached FDTD runs.
    #[arg(long, global = true, env = "PURCELL_CACHE")]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the HE11 mode of the configured fiber.
    ModeSolve,
    /// Tabulate the guided-mode coupling alpha_i versus distance.
    Alpha,
    /// Tabulate potentials, density and absorption versus distance.
    EnvProfile,
    /// One FDTD dipole run.
    FdtdRun,
    /// FDTD decay-rate map over radius, distance and orientation.
    FdtdSweep,
    /// Ensemble-averaged decay rate for one probe configuration.
    Average,
    /// One-at-a-time parameter sensitivity of the averaged rate.
    Sensitivity,
    /// Fiber radius reproducing a measured horizontal decay rate.
    InferRadius,
    /// Synthesize a photon-counting decay histogram.
    TcspcSim,
    /// Fit a decay histogram.
    TcspcFit {
        /// Histogram CSV (t_ns,counts); overrides tcspc.histogram.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Decay-rate maps for the three orientations as data and gnuplot files.
    ReproduceFig4,
    /// Predicted averaged rates next to the measured ones.
    ReproduceFig5 {
        /// Build the map through the cache when none is configured.
        #[arg(long)]
        build_map: bool,
    },
    /// Inspect or prune the FDTD cache.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
    /// Print the configuration schema.
    Schema,
}

#[derive(Debug, Subcommand)]
pub enum CacheAction {
    /// List entries with namespace, size and age.
    List,
    /// Re-hash every entry; corrupted ones are quarantined.
    Verify,
    /// Remove entries by key, by age or all of them.
    Evict {
        /// Entry key or a prefix of at least 8 characters.
        #[arg(long, conflicts_with_all = ["older_than_days", "all"])]
        key: Option<String>,
        #[arg(long, conflicts_with = "all")]
        older_than_days: Option<f64>,
        #[arg(long)]
        all: bool,
        /// Only list what would be removed.
        #[arg(long)]
        dry_run: bool,
    },
}
