use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use m3p_core::sim::{default_sensor, run_scenario, Scenario, ScenarioConfig};
use m3p_core::trace::TraceLog;
use m3p_core::world::load_map;
use m3p_core::UniquenessGraph;

mod plot;

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "m3p", version, about = "Active multi-hypothesis localization")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a uniqueness graph for a map
    BuildUg {
        /// Map file
        map: PathBuf,
        /// Number of graph nodes
        #[arg(short, long, default_value_t = 1000)]
        nodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output graph file (JSON)
        #[arg(long)]
        out: PathBuf,
        /// Scenario whose sensor range and field-of-view setting to use
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run a scenario; exits 0 when localized, 3 otherwise
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the scenario's master seed
        #[arg(long)]
        seed: Option<u64>,
        /// Trace output path; overrides the scenario's
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render SVG figures from a trace
    Plot {
        trace: PathBuf,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a map file
    ValidateMap { map: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<u8> {
    match cmd {
        Cmd::BuildUg {
            map,
            nodes,
            seed,
            out,
            config,
        } => build_ug(&map, nodes, seed, &out, config.as_deref()),
        Cmd::Run { config, seed, out } => run(&config, seed, out),
        Cmd::Plot { trace, out } => {
            let file =
                fs::File::open(&trace).with_context(|| format!("opening {}", trace.display()))?;
            let log = TraceLog::read_jsonl(BufReader::new(file))?;
            let written = plot::render(&log, &out)?;
            for p in written {
                println!("{}", p.display());
            }
            Ok(0)
        }
        Cmd::ValidateMap { map } => {
            let env = load_map(&map)?;
            println!(
                "ok: {} obstacles, {} landmarks, robot radius {}",
                env.obstacles().len(),
                env.landmarks().len(),
                env.robot_radius()
            );
            Ok(0)
        }
    }
}

fn build_ug(map: &Path, nodes: usize, seed: u64, out: &Path, config: Option<&Path>) -> Result<u8> {
    if nodes == 0 {
        bail!("--nodes must be at least 1");
    }
    let env = load_map(map)?;
    let sensor = match config {
        Some(c) => ScenarioConfig::load(c)?.graph_sensor(),
        None => default_sensor().with_fov(2.0 * std::f64::consts::PI),
    };
    let g = UniquenessGraph::build(&env, nodes, &sensor, &mut ChaCha8Rng::seed_from_u64(seed))?;
    write_file(out, &g.to_json())?;
    println!("{} nodes, {} edges", g.nodes().len(), g.edges().len());
    Ok(0)
}

fn run(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<u8> {
    let mut cfg = ScenarioConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if out.is_some() {
        cfg.output.trace = out;
    }
    let scenario = Scenario::from_config(cfg)?;
    let started = Instant::now();
    let result = run_scenario(&scenario)?;
    let wall = started.elapsed().as_secs_f64();
    let cfg = &scenario.config;
    if let Some(p) = &cfg.output.trace {
        write_file(p, &result.trace.to_jsonl())?;
    }
    let mut summary = serde_json::to_value(&result.summary)?;
    summary["wall_time_s"] = wall.into();
    let text = serde_json::to_string_pretty(&summary)?;
    if let Some(p) = &cfg.output.summary {
        write_file(p, &text)?;
    }
    println!("{text}");
    Ok(if result.summary.converged {
        0
    } else {
        EXIT_NOT_CONVERGED
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
