//! Command-line experiment runner: presets, config files, partition
//! statistics, and the randomized gradient-check suite.

use clap::{Args, Parser, Subcommand};
use spreadfgl_core::config::{self, RunSpec};
use spreadfgl_core::error::Error;
use spreadfgl_core::federation::run_experiment;
use spreadfgl_core::graph::load_dataset;
use spreadfgl_core::partition::louvain_partition;
use spreadfgl_core::rng::Rng;
use spreadfgl_core::{gradsuite, presets, report};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "spreadfgl", version, about = "Federated graph learning simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Default)]
struct Overrides {
    /// Output directory (default: runs/<name>)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Client count M
    #[arg(long)]
    clients: Option<usize>,
    /// Edge-server count N
    #[arg(long)]
    servers: Option<usize>,
    #[arg(long, value_parser = ["local", "fedavg", "fedgl", "spreadfgl"])]
    mode: Option<String>,
    #[arg(long = "labeled-ratio")]
    labeled_ratio: Option<f64>,
    /// Candidate links per node
    #[arg(long)]
    k: Option<usize>,
    /// Imputation interval K
    #[arg(long)]
    kappa: Option<usize>,
    /// Edge-client rounds T_g
    #[arg(long)]
    rounds: Option<usize>,
    /// Local training steps T_l
    #[arg(long = "local-steps")]
    local_steps: Option<usize>,
}

impl Overrides {
    fn apply(&self, map: &mut BTreeMap<String, String>) {
        let mut set = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                map.insert(k.to_string(), v);
            }
        };
        set("seed", self.seed.map(|v| v.to_string()));
        set("clients", self.clients.map(|v| v.to_string()));
        set("servers", self.servers.map(|v| v.to_string()));
        set("mode", self.mode.clone());
        set("labeled_ratio", self.labeled_ratio.map(|v| v.to_string()));
        set("k", self.k.map(|v| v.to_string()));
        set("kappa", self.kappa.map(|v| v.to_string()));
        set("rounds", self.rounds.map(|v| v.to_string()));
        set("local_steps", self.local_steps.map(|v| v.to_string()));
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment described by a key=value config file
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a named preset (see list-presets)
    Preset {
        name: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print partition statistics for a dataset directory
    Stats {
        dataset: String,
        #[arg(long, default_value_t = 6)]
        clients: usize,
        #[arg(long, default_value_t = 1)]
        servers: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Run the randomized gradient-check suite over every model loss
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// List the available experiment presets
    ListPresets,
}

/// Resolves a dataset reference: a directory path, `$SPREADFGL_DATA/<name>`,
/// or `data/<name>`.
fn resolve_dataset(spec: &str) -> Result<PathBuf, Error> {
    let mut tried = Vec::new();
    let direct = PathBuf::from(spec);
    if direct.join("nodes.tsv").is_file() {
        return Ok(direct);
    }
    tried.push(direct.display().to_string());
    if let Ok(root) = std::env::var("SPREADFGL_DATA") {
        let p = Path::new(&root).join(spec);
        if p.join("nodes.tsv").is_file() {
            return Ok(p);
        }
        tried.push(p.display().to_string());
    }
    let p = Path::new("data").join(spec);
    if p.join("nodes.tsv").is_file() {
        return Ok(p);
    }
    tried.push(p.display().to_string());
    Err(Error::Config(format!(
        "dataset {spec:?} not found (tried: {}); see README for how to fetch datasets",
        tried.join(", ")
    )))
}

fn run_from_map(
    mut map: BTreeMap<String, String>,
    overrides: &Overrides,
    default_name: &str,
) -> Result<(), Error> {
    overrides.apply(&mut map);
    let spec: RunSpec = config::build_run_spec(&map)?;
    let data_dir = resolve_dataset(&spec.dataset)?;
    let graph = load_dataset(&data_dir)?;

    let started = Instant::now();
    let result = run_experiment(&spec.cfg, &graph)?;
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }

    let out_dir = overrides
        .out
        .clone()
        .unwrap_or_else(|| Path::new("runs").join(default_name));
    report::write_outputs(&out_dir, &spec, &result, wall_ms)?;

    println!(
        "{} on {} ({} clients, {} servers, {} rounds, seed {}):",
        spec.cfg.mode.as_str(),
        spec.dataset,
        spec.cfg.clients,
        spec.cfg.servers,
        spec.cfg.rounds,
        spec.cfg.seed
    );
    println!(
        "  test ACC {:.4}  macro-F1 {:.4}  ({} test nodes, {:.1}s)",
        result.final_metrics.acc,
        result.final_metrics.macro_f1,
        result.predictions.len(),
        wall_ms / 1e3
    );
    println!("  outputs in {}", out_dir.display());
    Ok(())
}

fn cmd_stats(dataset: &str, clients: usize, servers: usize, seed: u64) -> Result<(), Error> {
    let dir = resolve_dataset(dataset)?;
    let g = load_dataset(&dir)?;
    println!("dataset: {}", dir.display());
    println!("nodes: {}", g.node_count());
    println!("edges: {}", g.edge_count());
    println!("features: {}", g.feature_dim());
    println!("classes: {}", g.num_classes());

    let mut rng = Rng::new(seed).fork("partition");
    let p = louvain_partition(&g, clients, servers, &mut rng)?;
    let sizes: Vec<usize> = p.subgraphs.iter().map(|s| s.graph.node_count()).collect();
    let intra: usize = p.subgraphs.iter().map(|s| s.graph.edge_count()).sum();
    println!("clients: {clients} (servers: {servers}, seed: {seed})");
    println!(
        "mean client size: {}",
        sizes.iter().sum::<usize>() as f64 / clients as f64
    );
    println!("mean intra-client edges: {}", intra as f64 / clients as f64);
    println!("severed cross-subgraph edges: {}", p.severed_edges.len());
    let ok = intra + p.severed_edges.len() == g.edge_count();
    println!(
        "conservation: {} intra + {} severed = {} of {} edges {}",
        intra,
        p.severed_edges.len(),
        intra + p.severed_edges.len(),
        g.edge_count(),
        if ok { "OK" } else { "MISMATCH" }
    );
    if !ok {
        return Err(Error::InvalidArg("edge conservation violated".into()));
    }
    Ok(())
}

fn cmd_gradcheck(instances: usize, seed: u64) -> Result<(), Error> {
    let started = Instant::now();
    let lines = gradsuite::run_suite(instances, seed);
    let mut all_ok = true;
    for line in &lines {
        println!(
            "{:>17}: max rel err {:.3e} over {} entries ({} below noise floor)  {}",
            line.name,
            line.max_err,
            line.entries_checked,
            line.entries_skipped,
            if line.passed() { "PASS" } else { "FAIL" }
        );
        all_ok &= line.passed();
    }
    println!(
        "gradcheck: {} instances per family, threshold {:.0e}, {:.1}s",
        instances,
        gradsuite::THRESHOLD,
        started.elapsed().as_secs_f64()
    );
    if !all_ok {
        return Err(Error::NonFinite("gradient check failed".into()));
    }
    Ok(())
}

fn real_main() -> Result<(), Error> {
    match Cli::parse().cmd {
        Cmd::Run { config, overrides } => {
            let map = config::parse_config_file(&config)?;
            let stem = config
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "run".into());
            run_from_map(map, &overrides, &stem)
        }
        Cmd::Preset { name, overrides } => {
            let preset = presets::find(&name).ok_or_else(|| {
                Error::Config(format!("unknown preset {name:?}; see `spreadfgl list-presets`"))
            })?;
            run_from_map(preset.to_map(), &overrides, &name)
        }
        Cmd::Stats {
            dataset,
            clients,
            servers,
            seed,
        } => cmd_stats(&dataset, clients, servers, seed),
        Cmd::Gradcheck { instances, seed } => cmd_gradcheck(instances, seed),
        Cmd::ListPresets => {
            for p in presets::all() {
                println!("{}", p.name);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Parse { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
