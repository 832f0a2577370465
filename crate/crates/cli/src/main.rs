use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use evoseq::campaign::{run_campaign, CampaignError, JsonlSink, StdKind, Trajectory};
use evoseq::config::{reference_config, Config, ConfigError};
use evoseq::landscape::{load_exact_landscape, position_combination_stats, write_stats_csv};
use evoseq::llm::{ChatTransport, RecordingTransport};
use evoseq::report;
use evoseq::{Sequence, VariantSpace};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "evoseq", version, about = "Directed evolution of protein sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one campaign per seed and write trajectories plus a manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated seeds; defaults to campaign.seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Run seeds concurrently.
        #[arg(long)]
        parallel_seeds: bool,
    },
    /// Top-k metrics table and best-so-far curves from trajectories.
    Report {
        #[arg(required = true)]
        trajectories: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "1,10,50")]
        k: Vec<usize>,
        /// Divide by n - 1 instead of n.
        #[arg(long)]
        sample_std: bool,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Frontier of all evaluated sequences.
    Frontier {
        #[arg(required = true)]
        trajectories: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = FrontierMode::Pareto)]
        mode: FrontierMode,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean fitness per residue combination at chosen positions.
    Stats {
        /// Exact landscape CSV (sequence,fitness).
        #[arg(long)]
        table: PathBuf,
        /// Full wild-type sequence.
        #[arg(long)]
        wild_type: String,
        /// 1-based mutable positions the table's variants cover.
        #[arg(long, value_delimiter = ',', required = true)]
        sites: Vec<usize>,
        /// 1-based positions to group by; each must be one of the sites.
        #[arg(long, value_delimiter = ',', required = true)]
        positions: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config file, or print the reference config.
    ValidateConfig {
        config: Option<PathBuf>,
        #[arg(long)]
        reference: bool,
    },
    /// Run a campaign against the live endpoint, saving every completion
    /// as a replay fixture.
    RecordFixtures {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FrontierMode {
    Pareto,
    PerDistance,
}

/// A failure with its process exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Self { code: 1, error }
    }
}

fn config_failure(e: ConfigError) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        error: e.into(),
    }
}

fn campaign_failure(e: CampaignError) -> Failure {
    let code = match e {
        CampaignError::Config(_) | CampaignError::Init(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    };
    Failure {
        code,
        error: e.into(),
    }
}

fn load_config(path: &Path) -> Result<(Config, String), Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(|error| Failure { code: EXIT_CONFIG, error })?;
    let cfg = Config::load(path).map_err(config_failure)?;
    cfg.validate().map_err(config_failure)?;
    Ok((cfg, text))
}

#[derive(Serialize)]
struct SeedResult {
    seed: u64,
    trajectory: String,
    complete: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    engine_version: &'a str,
    config_path: String,
    config_snapshot: &'a str,
    config_resolved: &'a Config,
    config_fingerprint: String,
    seeds: &'a [u64],
    output_dir: String,
    complete: bool,
    results: Vec<SeedResult>,
}

fn trajectory_name(seed: u64) -> String {
    format!("seed{seed}.jsonl")
}

fn run_seed(
    cfg: &Config,
    seed: u64,
    out: &Path,
    transport: Option<Arc<dyn ChatTransport>>,
) -> Result<(), Failure> {
    let parts = cfg.build(seed, transport).map_err(config_failure)?;
    let path = out.join(trajectory_name(seed));
    let file = File::create(&path)
        .with_context(|| format!("creating {}", path.display()))?;
    let mut sink = JsonlSink::new(BufWriter::new(file));
    let outcome = run_campaign(&parts.settings, &parts.oracle, parts.llm.as_ref(), &mut sink)
        .map_err(campaign_failure)?;
    log::info!(
        "seed {seed}: best {:?} after {} evaluations",
        outcome.metrics.best_fitness,
        outcome.metrics.evaluations
    );
    Ok(())
}

fn cmd_run(config: &Path, seeds: Vec<u64>, out: &Path, parallel: bool) -> Result<(), Failure> {
    let (cfg, snapshot) = load_config(config)?;
    let seeds = if seeds.is_empty() {
        vec![cfg.campaign.seed]
    } else {
        seeds
    };
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let outcomes: Vec<Result<(), Failure>> = if parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = seeds
                .iter()
                .map(|&seed| {
                    let cfg = &cfg;
                    s.spawn(move || run_seed(cfg, seed, out, None))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("seed worker panicked"))
                .collect()
        })
    } else {
        seeds.iter().map(|&seed| run_seed(&cfg, seed, out, None)).collect()
    };

    let results: Vec<SeedResult> = seeds
        .iter()
        .zip(&outcomes)
        .map(|(&seed, r)| SeedResult {
            seed,
            trajectory: trajectory_name(seed),
            complete: r.is_ok(),
            error: r.as_ref().err().map(|f| format!("{:#}", f.error)),
        })
        .collect();
    let manifest = RunManifest {
        engine_version: evoseq::VERSION,
        config_path: config.display().to_string(),
        config_snapshot: &snapshot,
        config_resolved: &cfg,
        config_fingerprint: cfg.fingerprint(),
        seeds: &seeds,
        output_dir: out.display().to_string(),
        complete: results.iter().all(|r| r.complete),
        results,
    };
    let mpath = out.join("manifest.json");
    std::fs::write(&mpath, serde_json::to_string_pretty(&manifest).context("manifest")?)
        .with_context(|| format!("writing {}", mpath.display()))?;

    let mut worst: Option<Failure> = None;
    for (seed, r) in seeds.iter().zip(outcomes) {
        match r {
            Ok(()) => println!("seed {seed}: {}", out.join(trajectory_name(*seed)).display()),
            Err(f) => {
                eprintln!("seed {seed} failed: {:#}", f.error);
                if worst.as_ref().is_none_or(|w| f.code > w.code) {
                    worst = Some(f);
                }
            }
        }
    }
    match worst {
        None => Ok(()),
        Some(f) => Err(Failure {
            code: f.code,
            error: anyhow::anyhow!("partial results in {}", out.display()),
        }),
    }
}

fn load_trajectories(paths: &[PathBuf]) -> anyhow::Result<Vec<Trajectory>> {
    paths
        .iter()
        .map(|p| Trajectory::load(p).map_err(anyhow::Error::from))
        .collect()
}

fn cmd_report(paths: &[PathBuf], ks: &[usize], sample: bool, out: &Path) -> anyhow::Result<()> {
    let ts = load_trajectories(paths)?;
    for (p, t) in paths.iter().zip(&ts) {
        if !t.is_complete() {
            log::warn!("{} is an incomplete trajectory", p.display());
        }
    }
    let kind = if sample { StdKind::Sample } else { StdKind::Population };
    let metrics = report::metrics_table(&ts, ks, kind)?;
    std::fs::create_dir_all(out)?;
    let mpath = out.join("metrics.csv");
    report::write_metrics_csv(File::create(&mpath)?, &metrics)?;
    let cpath = out.join("curve.csv");
    report::write_curve_csv(File::create(&cpath)?, &report::curve_rows(&ts))?;
    println!("{}\n{}", mpath.display(), cpath.display());
    Ok(())
}

fn open_out(out: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn cmd_frontier(paths: &[PathBuf], mode: FrontierMode, out: Option<&Path>) -> anyhow::Result<()> {
    let ts = load_trajectories(paths)?;
    let w = open_out(out)?;
    match mode {
        FrontierMode::Pareto => report::write_rows(w, &report::pareto_rows(&ts)?)?,
        FrontierMode::PerDistance => report::write_rows(w, &report::per_distance_rows(&ts)?)?,
    }
    Ok(())
}

fn cmd_stats(
    table: &Path,
    wild_type: &str,
    sites: &[usize],
    positions: &[usize],
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let space = VariantSpace::new("table", Sequence::new(wild_type)?, sites)?;
    let land = load_exact_landscape(table, space)?;
    let stats = position_combination_stats(&land, positions)?;
    write_stats_csv(open_out(out)?, &stats)?;
    Ok(())
}

fn cmd_validate(config: Option<&Path>, reference: bool) -> Result<(), Failure> {
    if reference {
        print!("{}", reference_config());
        return Ok(());
    }
    let Some(path) = config else {
        return Err(anyhow::anyhow!("give a config path or --reference").into());
    };
    let (cfg, _) = load_config(path)?;
    cfg.build(cfg.campaign.seed, None).map_err(config_failure)?;
    println!("{}: ok", path.display());
    Ok(())
}

fn cmd_record(config: &Path, seed: u64, out: &Path) -> Result<(), Failure> {
    let (cfg, _) = load_config(config)?;
    if !cfg.llm_enabled() {
        return Err(Failure {
            code: EXIT_CONFIG,
            error: anyhow::anyhow!("proposer.mode must be \"llm\" to record fixtures"),
        });
    }
    let mut live = cfg.clone();
    live.llm.transport = "live".into();
    let inner = live.build_transport().map_err(config_failure)?;
    let recorder = Arc::new(
        RecordingTransport::new(inner, out, &cfg.llm.model).map_err(anyhow::Error::from)?,
    );
    let result = run_seed(&live, seed, out, Some(recorder.clone()));
    let manifest = recorder.finish().map_err(anyhow::Error::from)?;
    println!("{} fixtures in {}", manifest.fixtures.len(), out.display());
    result
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result: Result<(), Failure> = match cli.command {
        Command::Run {
            config,
            seeds,
            out,
            parallel_seeds,
        } => cmd_run(&config, seeds, &out, parallel_seeds),
        Command::Report {
            trajectories,
            k,
            sample_std,
            out,
        } => cmd_report(&trajectories, &k, sample_std, &out).map_err(Failure::from),
        Command::Frontier {
            trajectories,
            mode,
            out,
        } => cmd_frontier(&trajectories, mode, out.as_deref()).map_err(Failure::from),
        Command::Stats {
            table,
            wild_type,
            sites,
            positions,
            out,
        } => cmd_stats(&table, &wild_type, &sites, &positions, out.as_deref())
            .map_err(Failure::from),
        Command::ValidateConfig { config, reference } => cmd_validate(config.as_deref(), reference),
        Command::RecordFixtures { config, seed, out } => cmd_record(&config, seed, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
