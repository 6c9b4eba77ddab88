use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use moddist::context_model::collect;
use moddist::harness::{
    emit_csv, read_delays, read_final_regret, run, run_reid_stream, Algorithm, ExperimentConfig, ReidStreamConfig,
    ScenarioMode,
};
use moddist::reid_pipeline::{calibrate_threshold, write_metrics_csv, SearchMode};

#[derive(Parser)]
#[command(name = "moddist", version, about = "Contextual-bandit module placement and distributed re-identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run only the uniform data-collection phase and write the memory log.
    Collect {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Memory log destination.
        #[arg(long, default_value = "memory.log")]
        out: PathBuf,
    },
    /// Run one experiment and write its delay and per-agent trace CSVs.
    Run {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Stream synthetic queries through the re-identification pipeline.
    Reid(ReidArgs),
    /// Pick a similarity threshold from genuine and impostor scores.
    Calibrate(CalibrateArgs),
    /// Summarize the CSVs written by `run`.
    Report {
        /// Output directory of a previous run.
        dir: PathBuf,
    },
}

/// Flags mirror the experiment file; any flag given overrides the file.
#[derive(Args)]
struct ExperimentArgs {
    /// Experiment TOML file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    topology: Option<PathBuf>,
    #[arg(long)]
    delay_model: Option<PathBuf>,
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long = "L")]
    l: Option<u16>,
    #[arg(long = "P")]
    p: Option<usize>,
    #[arg(long = "I")]
    i: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    eps_update: Option<f64>,
    #[arg(long = "T")]
    t: Option<usize>,
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    modules: Option<usize>,
    /// Slots at which learners refit bounds and regenerate policies.
    #[arg(long, value_delimiter = ',')]
    relearn_at: Vec<u64>,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => {
                let (Some(t), Some(d)) = (&self.topology, &self.delay_model) else {
                    bail!("either --config or both --topology and --delay-model are required");
                };
                ExperimentConfig::new(t, d)
            }
        };
        if let Some(v) = &self.topology {
            cfg.topology = v.clone();
        }
        if let Some(v) = &self.delay_model {
            cfg.delay_model = v.clone();
        }
        if let Some(v) = &self.algorithm {
            cfg.algorithm = v.parse::<Algorithm>()?;
        }
        if let Some(v) = &self.scenario {
            cfg.scenario = match v.as_str() {
                "static" => ScenarioMode::Static,
                "dynamic" => ScenarioMode::Dynamic,
                other => return Err(moddist::Error::Config(format!("unknown scenario `{other}`")).into()),
            };
        }
        macro_rules! set {
            ($($field:ident),*) => { $(if let Some(v) = self.$field.clone() { cfg.$field = v; })* };
        }
        set!(n, l, p, i, t, seed, output, modules);
        if self.gamma.is_some() {
            cfg.gamma = self.gamma;
        }
        if self.eps_update.is_some() {
            cfg.eps_update = self.eps_update;
        }
        if !self.relearn_at.is_empty() {
            cfg.relearn_at = self.relearn_at.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct ReidArgs {
    /// Stream TOML file; flags override it.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    identities: Option<usize>,
    #[arg(long)]
    queries: Option<usize>,
    #[arg(long)]
    cameras: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Search the merged gallery instead of per-camera shards.
    #[arg(long)]
    centralized: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the CMC/mAP CSVs.
    #[arg(long, default_value = "out/reid")]
    output: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    /// File of genuine-pair similarities, one per line.
    #[arg(long, requires = "negatives")]
    positives: Option<PathBuf>,
    /// File of impostor-pair similarities, one per line.
    #[arg(long, requires = "positives")]
    negatives: Option<PathBuf>,
    /// Without files, draw this many scores per class from N(0.96, 0.02) and N(0.80, 0.04).
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn read_scores(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.parse::<f64>().map_err(|_| moddist::Error::Parse(format!("{}: bad score `{l}`", path.display())).into()))
        .collect()
}

fn cmd_collect(exp: &ExperimentArgs, out: &Path) -> Result<()> {
    let cfg = exp.resolve()?;
    let sim = cfg.simulator()?.with_seed(cfg.seed);
    let mem = collect(&sim, cfg.n, cfg.seed, cfg.memory_capacity)?;
    let file = fs::File::create(out).map_err(|e| moddist::Error::Io { path: out.into(), source: e })?;
    mem.write_log(BufWriter::new(file))
        .map_err(|e| moddist::Error::Io { path: out.into(), source: e })?;
    println!("collected {} rounds into {}", mem.len(), out.display());
    Ok(())
}

fn cmd_run(exp: &ExperimentArgs) -> Result<()> {
    let cfg = exp.resolve()?;
    let result = run(&cfg)?;
    let written = emit_csv(&cfg.output, &result.trace)?;
    println!(
        "{} seed {}: mean delay {:.3} ms, last-quarter mean {:.3} ms",
        cfg.algorithm.name(),
        cfg.seed,
        result.trace.tail_mean_delay(1.0),
        result.trace.tail_mean_delay(0.25)
    );
    if let Some(r) = result.total_regret() {
        println!("cumulative regret {r:.3}");
    }
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_reid(args: &ReidArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| moddist::Error::Io { path: path.clone(), source: e })?;
            toml::from_str::<ReidStreamConfig>(&text).map_err(|e| moddist::Error::Config(format!("{}: {e}", path.display())))?
        }
        None => ReidStreamConfig::new(100, 1000),
    };
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = args.$field { cfg.$field = v; })* };
    }
    set!(identities, queries, cameras, dim, noise, threshold, beta, seed);
    if args.centralized {
        cfg.mode = SearchMode::Centralized;
    }
    let report = run_reid_stream(&cfg)?;
    fs::create_dir_all(&args.output).map_err(|e| moddist::Error::Io { path: args.output.clone(), source: e })?;
    let conv = args.output.join("cmc_conventional.csv");
    let fj = args.output.join("cmc_framejunk.csv");
    write_metrics_csv(&conv, &report.conventional)?;
    write_metrics_csv(&fj, &report.framejunk)?;
    println!("queries {} new identities {}", report.decisions.len(), report.new_identities);
    println!("identity accuracy {:.4}", report.identity_accuracy);
    println!("new-identity precision {:.4}", report.new_identity_precision);
    for (name, r) in [("conventional", &report.conventional), ("framejunk", &report.framejunk)] {
        println!(
            "{name}: rank-1 {:.4} mAP {:.4} ({} evaluated, {} without valid match)",
            r.rank(1),
            r.map,
            r.evaluated,
            r.excluded
        );
    }
    println!("wrote {} and {}", conv.display(), fj.display());
    Ok(())
}

fn cmd_calibrate(args: &CalibrateArgs) -> Result<()> {
    let (pos, neg) = match (&args.positives, &args.negatives) {
        (Some(p), Some(n)) => (read_scores(p)?, read_scores(n)?),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let mut draw = |m: f64, s: f64| -> Vec<f64> {
                let d = Normal::new(m, s).expect("valid normal");
                (0..args.samples).map(|_| d.sample(&mut rng).clamp(-1.0, 1.0)).collect()
            };
            (draw(0.96, 0.02), draw(0.80, 0.04))
        }
    };
    let t = calibrate_threshold(&pos, &neg)?;
    println!("threshold {t:.6}");
    Ok(())
}

fn cmd_report(dir: &Path) -> Result<()> {
    let delays = read_delays(&dir.join("delay.csv"))?;
    if delays.is_empty() {
        println!("{}: empty run", dir.display());
        return Ok(());
    }
    let tail = &delays[delays.len() - (delays.len() / 4).max(1)..];
    println!("slots {}", delays.len());
    println!("mean delay {:.3} ms", delays.iter().sum::<f64>() / delays.len() as f64);
    println!("last-quarter mean delay {:.3} ms", tail.iter().sum::<f64>() / tail.len() as f64);
    let mut traces: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| moddist::Error::Io { path: dir.into(), source: e })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("trace_agent")))
        .collect();
    traces.sort();
    for t in traces {
        match read_final_regret(&t)? {
            Some(r) => println!("{}: cumulative regret {r:.3}", t.display()),
            None => println!("{}: no regret column", t.display()),
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<moddist::Error>() {
        Some(e) => match e.category() {
            "config" => 2,
            "argument" => 3,
            "dimension" => 4,
            "training" => 5,
            "invariant" => 6,
            "parse" => 7,
            "io" => 8,
            _ => 1,
        },
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Collect { exp, out } => cmd_collect(exp, out),
        Command::Run { exp } => cmd_run(exp),
        Command::Reid(args) => cmd_reid(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Report { dir } => cmd_report(dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match e.downcast_ref::<moddist::Error>() {
                // The crate error already names its cause.
                Some(inner) => eprintln!("error [{}]: {inner}", inner.category()),
                None => eprintln!("error: {e:#}"),
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
