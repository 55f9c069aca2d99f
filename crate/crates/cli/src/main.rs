use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sgap_core::bench::bench_scaling;
use sgap_core::data::{load_dataset, save_dataset, synth_sbm, FeatureFormat, SbmParams};
use sgap_core::model::AsyncOptions;
use sgap_core::pipeline::{
    canonicalize, enumerate_space, preset, run_sgap, CostScope, RunContext, SPACE_SIZE,
};
use sgap_core::propagation::PropagationCache;
use sgap_core::search::{search, AnalyticBenchmark, SearchConfig, SgapEvaluator, DEFAULT_REF};
use sgap_core::{ArchitectureConfig, PropagateOptions, Result, SgapError, TrainConfig};

#[derive(Parser)]
#[command(name = "sgap", version, about = "Decoupled scalable GNNs and architecture search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate one architecture on a dataset directory.
    Run(RunArgs),
    /// Multi-objective search over the design space.
    Search(SearchArgs),
    /// Print the architecture JSON of a named preset.
    Preset {
        #[arg(long)]
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List canonical architectures, one JSON object per line.
    Enumerate {
        #[arg(long)]
        count_only: bool,
    },
    /// Time pre-processing propagation for several worker counts.
    Bench(BenchArgs),
    /// Write a stochastic block model dataset directory.
    Synth(SynthArgs),
}

#[derive(Args)]
struct ExecArgs {
    /// Threads for graph propagation.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Train with this many asynchronous workers instead of the
    /// deterministic full-batch trainer.
    #[arg(long)]
    train_workers: Option<usize>,
    #[arg(long, default_value_t = 64)]
    train_batch: usize,
    #[arg(long, default_value = "full")]
    cost_scope: CostScope,
}

impl ExecArgs {
    fn context<'a>(&self, cache: &'a PropagationCache) -> Result<RunContext<'a>> {
        if self.workers == 0 {
            return Err(SgapError::Validation("--workers must be positive".into()));
        }
        let async_train = match self.train_workers {
            None => None,
            Some(0) => return Err(SgapError::Validation("--train-workers must be positive".into())),
            Some(w) => Some(AsyncOptions { workers: w, batch_size: self.train_batch }),
        };
        Ok(RunContext {
            cache: Some(cache),
            propagate: PropagateOptions::with_workers(self.workers),
            cost_scope: self.cost_scope,
            async_train,
            ..RunContext::default()
        })
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    data: PathBuf,
    /// Architecture JSON file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    arch: Option<PathBuf>,
    /// Named preset instead of an architecture file.
    #[arg(long)]
    preset: Option<String>,
    /// Training configuration JSON; fields not given keep their defaults.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Overrides the seed in the training configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// EvalResult JSON destination; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-epoch CSV log.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Trained parameters in binary form.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Include wall-clock stage timings in the result.
    #[arg(long)]
    timings: bool,
    #[command(flatten)]
    exec: ExecArgs,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, required_unless_present = "analytic")]
    data: Option<PathBuf>,
    /// Use the closed-form synthetic benchmark instead of training.
    #[arg(long, conflicts_with = "data")]
    analytic: bool,
    #[arg(long, default_value_t = 60)]
    budget: usize,
    #[arg(long, default_value_t = 10)]
    init: usize,
    #[arg(long, default_value_t = 500)]
    candidates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    train: Option<PathBuf>,
    /// pareto.json destination; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV export of the final front.
    #[arg(long)]
    front_csv: Option<PathBuf>,
    #[command(flatten)]
    exec: ExecArgs,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    workers: Vec<usize>,
    /// Architecture JSON file; defaults to the pasca-v2 preset.
    #[arg(long)]
    arch: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Bin,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 400)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    blocks: usize,
    #[arg(long, default_value_t = 0.05)]
    p_in: f64,
    #[arg(long, default_value_t = 0.01)]
    p_out: f64,
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| SgapError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| SgapError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| SgapError::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn train_config(path: Option<&Path>, seed: Option<u64>) -> Result<TrainConfig> {
    let mut cfg = match path {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_run(a: &RunArgs) -> Result<()> {
    let arch: ArchitectureConfig = match (&a.arch, &a.preset) {
        (Some(p), _) => canonicalize(read_json(p)?)?,
        (None, Some(name)) => preset(name)?.config,
        (None, None) => unreachable!("clap requires one of --arch/--preset"),
    };
    let cfg = train_config(a.train.as_deref(), a.seed)?;
    let data = load_dataset(&a.data)?;
    let cache = PropagationCache::from_env();
    let ctx = a.exec.context(&cache)?;
    let mut run = run_sgap(&data, &arch, &cfg, &ctx)?;
    if !a.timings {
        run.eval.wall_times = None;
    }
    if let Some(p) = &a.log {
        run.model.write_log_csv(p)?;
    }
    if let Some(p) = &a.weights {
        run.model.write_weights(p)?;
    }
    let mut text = serde_json::to_string_pretty(&run.eval)?;
    text.push('\n');
    emit(a.out.as_deref(), &text)
}

fn cmd_search(a: &SearchArgs) -> Result<()> {
    let cfg = SearchConfig {
        budget: a.budget,
        init_samples: a.init,
        candidates: a.candidates,
        seed: a.seed,
        reference: DEFAULT_REF,
    };
    cfg.validate()?;
    let outcome = match &a.data {
        Some(dir) => {
            let train = train_config(a.train.as_deref(), Some(a.seed))?;
            let data = load_dataset(dir)?;
            let cache = PropagationCache::from_env();
            let ctx = a.exec.context(&cache)?;
            search(&mut SgapEvaluator::new(&data, train, ctx), &cfg)?
        }
        None => search(&mut AnalyticBenchmark::default(), &cfg)?,
    };
    if let Some(p) = &a.front_csv {
        outcome.write_front_csv(p)?;
    }
    emit(a.out.as_deref(), &outcome.to_json())
}

fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let arch = match &a.arch {
        Some(p) => canonicalize(read_json(p)?)?,
        None => preset("pasca-v2")?.config,
    };
    let data = load_dataset(&a.data)?;
    let report = bench_scaling(&data, &arch, &a.workers, a.repeats)?;
    print!("{}", report.to_table());
    println!("bitwise_identical\t{}", report.bitwise_identical);
    if !report.bitwise_identical {
        return Err(SgapError::Invariant(
            "propagation output differs across worker counts".into(),
        ));
    }
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let ds = synth_sbm(&SbmParams {
        n: a.n,
        blocks: a.blocks,
        p_in: a.p_in,
        p_out: a.p_out,
        d: a.dim,
        noise: a.noise,
        seed: a.seed,
    })?;
    let format = match a.format {
        FormatArg::Csv => FeatureFormat::Csv,
        FormatArg::Bin => FeatureFormat::Bin,
    };
    save_dataset(&a.out, &ds, format)?;
    println!(
        "wrote {} nodes, {} edges, {} classes to {}",
        ds.num_nodes(),
        ds.graph.nnz() / 2,
        ds.num_classes,
        a.out.display()
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(a) => cmd_run(&a),
        Command::Search(a) => cmd_search(&a),
        Command::Preset { name, out } => {
            let p = preset(&name)?;
            emit(out.as_deref(), &format!("{}\n", p.config.to_json()))
        }
        Command::Enumerate { count_only } => {
            if count_only {
                println!("{SPACE_SIZE}");
            } else {
                use std::io::Write;
                let stdout = std::io::stdout();
                let mut w = std::io::BufWriter::new(stdout.lock());
                for a in enumerate_space() {
                    if writeln!(w, "{}", a.to_json()).is_err() {
                        break;
                    }
                }
            }
            Ok(())
        }
        Command::Bench(a) => cmd_bench(&a),
        Command::Synth(a) => cmd_synth(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
