use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use coolant_core::biaslab::{
    case1_check, case2_check, fp_inflation_sim, gaussian_joint, monotonicity_scan, upper_tail, write_inflation_csv,
    InflationConfig, Tail,
};
use coolant_core::filters::{apply, FilterReport, Stage};
use coolant_core::gate::{make_synthetic_tasks, train_gate, train_stl, EpochMetrics, GateModel, MultiTaskDataset, Split, TrainConfig};
use coolant_core::molgraph::{descriptors, parse_smiles, write_smiles};
use coolant_core::nncore::AdamConfig;
use coolant_core::pipeline::bench::bench_run;
use coolant_core::pipeline::io::read_molecules;
use coolant_core::pipeline::{run_pipeline, verify_run, RunConfig, Stages, STAGES};
use coolant_core::reactor::{count_from_sizes, count_products, ProductStream, Reactant, ReactantSets, Shard};

/// Usage mistakes found after argument parsing; exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Parser)]
#[command(name = "coolant", version, about = "Immersion-coolant virtual screening pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse SMILES and print canonical form and descriptors as JSON lines.
    Parse {
        smiles: Vec<String>,
        /// CSV with a `smiles` column and optional `id`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Apply structure filters; writes id,smiles,passed,violations.
    Filter {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "pre")]
        stage: FilterStage,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Enumerate ether and ester products, or only count them.
    React {
        #[arg(long, required_unless_present = "sizes")]
        reactants: Option<PathBuf>,
        /// Count-only from list sizes: alcohols,chlorides,acids.
        #[arg(long, value_delimiter = ',', conflicts_with = "reactants")]
        sizes: Option<Vec<u64>>,
        #[arg(long, default_value = "1/1")]
        shard: Shard,
        #[arg(long)]
        count_only: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a multi-task GATE model.
    TrainGate(TrainArgs),
    /// Train a single-task baseline for one task.
    TrainStl {
        #[command(flatten)]
        train: TrainArgs,
        /// Task name or zero-based index.
        #[arg(long, default_value = "0")]
        task: String,
    },
    /// Run the lookup and surrogate stages of a pipeline config.
    TrainSurrogate(RunArgs),
    /// Run the two-stage screen of a pipeline config.
    Screen {
        #[command(flatten)]
        run: RunArgs,
        /// Also screen everything with the teacher and count misses.
        #[arg(long)]
        oracle: bool,
    },
    /// Run a pipeline config end to end.
    Run {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated subset of stages; the config toggles otherwise.
        #[arg(long, value_delimiter = ',')]
        stages: Option<Vec<String>>,
    },
    /// Disjoint-property bias tools.
    Bias {
        #[command(subcommand)]
        command: BiasCommand,
    },
    /// Per-stage throughput over the artifacts of a finished run.
    Bench {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2000)]
        limit: usize,
    },
    /// Verify a run directory and print its manifests.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FilterStage {
    Pre,
    Post,
}

#[derive(Args)]
struct TrainArgs {
    /// `smiles,task_id,value` rows.
    #[arg(long, required_unless_present = "synthetic")]
    data: Option<PathBuf>,
    /// Use a seeded synthetic set of this many molecules instead.
    #[arg(long, conflicts_with = "data")]
    synthetic: Option<usize>,
    #[arg(long, default_value_t = 2)]
    synthetic_tasks: usize,
    #[arg(long, default_value_t = 0.9)]
    rho: f64,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    /// TrainConfig JSON; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    val_fraction: f64,
    /// Weights file; a `.json` sidecar is written next to it.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch metrics as JSON lines.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Run directory for artifacts and manifests.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum BiasCommand {
    /// Monte Carlo false-positive inflation over k chained properties.
    Sim {
        #[arg(long, default_value_t = 6)]
        k: usize,
        #[arg(long, default_value_t = -0.3, allow_hyphen_values = true)]
        rho: f64,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        threshold: f64,
        #[arg(long, default_value_t = 0.0)]
        sigma_pred: f64,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 50)]
        batches: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Joint and product probability over a grid of correlations.
    Scan {
        #[arg(long, allow_hyphen_values = true)]
        t1: f64,
        #[arg(long, allow_hyphen_values = true)]
        t2: f64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        grid: Option<Vec<f64>>,
    },
    /// Evaluate both dependence cases at one point.
    Check {
        #[arg(long, allow_hyphen_values = true)]
        rho: f64,
        #[arg(long, allow_hyphen_values = true)]
        t1: f64,
        #[arg(long, allow_hyphen_values = true)]
        t2: f64,
    },
}

fn writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| p.display().to_string())?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Worker count after the `COOLANT_THREADS` cap.
fn thread_cap(requested: usize) -> Result<usize> {
    match std::env::var("COOLANT_THREADS") {
        Ok(v) => {
            let cap: usize = v.trim().parse().map_err(|_| usage(format!("COOLANT_THREADS={v:?} is not a count")))?;
            if cap == 0 {
                return Err(usage("COOLANT_THREADS must be at least 1"));
            }
            Ok(requested.clamp(1, cap))
        }
        Err(_) => Ok(requested.max(1)),
    }
}

fn load_run_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::from_file(&args.config).map_err(|e| usage(e.to_string()))?;
    cfg.threads = thread_cap(cfg.threads)?;
    Ok(cfg)
}

fn run_stages(mut cfg: RunConfig, stages: &[&str], out: &Path) -> Result<()> {
    let mut toggles = Stages::only(stages[0]).expect("known stage");
    for s in &stages[1..] {
        toggles = merge(toggles, Stages::only(s).expect("known stage"));
    }
    cfg.stages = toggles;
    finish_run(&cfg, out)
}

fn merge(a: Stages, b: Stages) -> Stages {
    Stages {
        filter: a.filter || b.filter,
        react: a.react || b.react,
        teacher: a.teacher || b.teacher,
        lookup: a.lookup || b.lookup,
        surrogate: a.surrogate || b.surrogate,
        screen: a.screen || b.screen,
        oracle: a.oracle || b.oracle,
    }
}

fn finish_run(cfg: &RunConfig, out: &Path) -> Result<()> {
    let summary = run_pipeline(cfg, out)?;
    let mut w = writer(None)?;
    for m in &summary.manifests {
        writeln!(w, "{}", json!({"stage": m.stage, "status": m.status, "counts": m.counts}))?;
    }
    Ok(())
}

fn cmd_parse(smiles: Vec<String>, input: Option<PathBuf>) -> Result<()> {
    let mut items: Vec<(String, String)> = smiles.into_iter().enumerate().map(|(i, s)| (format!("arg{}", i + 1), s)).collect();
    if let Some(p) = input {
        let rows = read_molecules(File::open(&p).with_context(|| p.display().to_string())?)?;
        items.extend(rows.into_iter().map(|(id, s, _)| (id, s)));
    }
    if items.is_empty() {
        return Err(usage("give SMILES arguments or --input"));
    }
    let mut w = writer(None)?;
    let mut failed = 0;
    for (id, s) in items {
        let line = match parse_smiles(&s) {
            Ok(g) => json!({"id": id, "input": s, "smiles": write_smiles(&g), "descriptors": descriptors(&g)}),
            Err(e) => {
                failed += 1;
                json!({"id": id, "input": s, "error": e.to_string()})
            }
        };
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    if failed > 0 {
        bail!("{failed} SMILES failed to parse");
    }
    Ok(())
}

fn cmd_filter(input: &Path, stage: FilterStage, out: Option<&Path>) -> Result<()> {
    let stage = match stage {
        FilterStage::Pre => Stage::Pre,
        FilterStage::Post => Stage::Post,
    };
    let rows = read_molecules(File::open(input).with_context(|| input.display().to_string())?)?;
    let mut w = csv::Writer::from_writer(writer(out)?);
    w.write_record(["id", "smiles", "passed", "violations"])?;
    let mut report = FilterReport::default();
    let mut parse_errors = 0;
    for (id, s, g) in rows {
        match g {
            Ok(g) => {
                let v = apply(stage, &g);
                report.record(&v);
                let names: Vec<String> = v.violations.iter().map(|x| format!("{x:?}")).collect();
                w.write_record([id, write_smiles(&g), v.passed.to_string(), names.join(";")])?;
            }
            Err(e) => {
                parse_errors += 1;
                w.write_record([id, s, "false".into(), format!("ParseError: {e}")])?;
            }
        }
    }
    w.flush()?;
    eprintln!("{}", json!({"report": report, "parse_errors": parse_errors}));
    Ok(())
}

fn read_reactants(path: &Path) -> Result<ReactantSets> {
    let rows = read_molecules(File::open(path).with_context(|| path.display().to_string())?)?;
    let parsed = rows.into_iter().filter_map(|(id, _, g)| g.ok().map(|g| Reactant::new(id, g)));
    let (sets, rejected) = ReactantSets::build(parsed);
    log::info!("{} reactants rejected", rejected.len());
    Ok(sets)
}

fn cmd_react(reactants: Option<&Path>, sizes: Option<&[u64]>, shard: Shard, count_only: bool, out: Option<&Path>) -> Result<()> {
    if let Some(s) = sizes {
        if s.len() != 3 {
            return Err(usage("--sizes takes alcohols,chlorides,acids"));
        }
        let c = count_from_sizes(s[0], s[1], s[2]);
        writeln!(writer(out)?, "{}", serde_json::to_string(&c)?)?;
        return Ok(());
    }
    let sets = read_reactants(reactants.expect("clap requires reactants"))?;
    if count_only {
        let c = count_products(&sets, shard);
        writeln!(writer(out)?, "{}", serde_json::to_string(&c)?)?;
        return Ok(());
    }
    let mut w = csv::Writer::from_writer(writer(out)?);
    w.write_record(["alcohol", "partner", "reaction", "smiles"])?;
    for p in ProductStream::new(&sets, shard) {
        let partner = &sets.partners(p.reaction)[p.parents.1];
        w.write_record([
            sets.alcohols[p.parents.0].id.as_str(),
            partner.id.as_str(),
            p.reaction.name(),
            &write_smiles(&p.product),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn train_inputs(args: &TrainArgs) -> Result<(MultiTaskDataset, TrainConfig)> {
    let ds = match (&args.data, args.synthetic) {
        (Some(p), _) => MultiTaskDataset::read_csv(File::open(p).with_context(|| p.display().to_string())?)?,
        (None, Some(n)) => make_synthetic_tasks(n, args.synthetic_tasks, args.rho, args.noise, args.seed),
        (None, None) => return Err(usage("give --data or --synthetic")),
    };
    let mut cfg = match &args.config {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p).with_context(|| p.display().to_string())?)
            .map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => TrainConfig::default(),
    };
    cfg.seed = args.seed;
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    if let Some(b) = args.batch_size {
        cfg.batch_size = b;
    }
    if let Some(lr) = args.lr {
        cfg.optimizer = AdamConfig { lr, ..cfg.optimizer };
    }
    if !(0.0..1.0).contains(&args.val_fraction) {
        return Err(usage("--val-fraction must lie in [0, 1)"));
    }
    Ok((ds, cfg))
}

fn finish_training(
    args: &TrainArgs,
    ds: &MultiTaskDataset,
    train: impl FnOnce(&Split, &mut dyn FnMut(&EpochMetrics, &GateModel)) -> Result<GateModel>,
) -> Result<()> {
    let split = Split::random(ds.len(), args.val_fraction, args.seed);
    let mut metrics = match &args.metrics {
        Some(p) => Some(BufWriter::new(File::create(p).with_context(|| p.display().to_string())?)),
        None => None,
    };
    let mut io_error = None;
    let mut observer = |m: &EpochMetrics, _: &GateModel| {
        if let Some(w) = metrics.as_mut() {
            let line = serde_json::to_string(m).expect("metrics serialize");
            if let Err(e) = writeln!(w, "{line}") {
                io_error.get_or_insert(e);
            }
        }
        log::info!("epoch {} loss {:.6}", m.epoch, m.loss);
    };
    let model = train(&split, &mut observer)?;
    if let Some(e) = io_error {
        return Err(e.into());
    }
    if let Some(mut w) = metrics {
        w.flush()?;
    }
    model.save(&args.out)?;
    Ok(())
}

fn cmd_train_gate(args: &TrainArgs) -> Result<()> {
    let (ds, cfg) = train_inputs(args)?;
    finish_training(args, &ds, |split, obs| Ok(train_gate(&ds, split, &cfg, Some(obs))?.model))
}

fn cmd_train_stl(args: &TrainArgs, task: &str) -> Result<()> {
    let (ds, cfg) = train_inputs(args)?;
    let index = match ds.task_names.iter().position(|n| n == task) {
        Some(i) => i,
        None => task
            .parse::<usize>()
            .ok()
            .filter(|&i| i < ds.task_count())
            .ok_or_else(|| usage(format!("unknown task {task}")))?,
    };
    finish_training(args, &ds, |split, obs| Ok(train_stl(&ds, index, split, &cfg, Some(obs))?.model))
}

fn cmd_bias(command: BiasCommand) -> Result<()> {
    match command {
        BiasCommand::Sim {
            k,
            rho,
            threshold,
            sigma_pred,
            samples,
            batches,
            seed,
            out,
        } => {
            if k == 0 || samples == 0 || batches == 0 {
                return Err(usage("k, samples and batches must be positive"));
            }
            let cfg = InflationConfig {
                sigma_pred,
                samples,
                batches,
                seed,
                threads: thread_cap(std::thread::available_parallelism().map_or(1, |n| n.get()))?,
                ..InflationConfig::chain(k, rho, threshold)
            };
            let points = fp_inflation_sim(&cfg)?;
            write_inflation_csv(writer(out.as_deref())?, &points)?;
        }
        BiasCommand::Scan { t1, t2, grid } => {
            let grid = grid.unwrap_or_else(|| (-9..=9).map(|i| i as f64 / 10.0).collect());
            let scan = monotonicity_scan(t1, t2, &grid)?;
            writeln!(writer(None)?, "{}", serde_json::to_string_pretty(&scan)?)?;
        }
        BiasCommand::Check { rho, t1, t2 } => {
            let same = gaussian_joint(t1, Tail::Greater, t2, Tail::Greater, rho)?;
            let opposing = gaussian_joint(t1, Tail::Greater, t2, Tail::Less, rho)?;
            let v = json!({
                "rho": rho,
                "case1": {
                    "applies": rho <= 0.0,
                    "joint": same,
                    "product": upper_tail(t1) * upper_tail(t2),
                    "holds": case1_check(rho, t1, t2)?,
                },
                "case2": {
                    "applies": rho >= 0.0,
                    "joint": opposing,
                    "product": upper_tail(t1) * upper_tail(-t2),
                    "holds": case2_check(rho, t1, t2)?,
                },
            });
            writeln!(writer(None)?, "{}", serde_json::to_string_pretty(&v)?)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Parse { smiles, input } => cmd_parse(smiles, input),
        Command::Filter { input, stage, out } => cmd_filter(&input, stage, out.as_deref()),
        Command::React {
            reactants,
            sizes,
            shard,
            count_only,
            out,
        } => cmd_react(reactants.as_deref(), sizes.as_deref(), shard, count_only, out.as_deref()),
        Command::TrainGate(args) => cmd_train_gate(&args),
        Command::TrainStl { train, task } => cmd_train_stl(&train, &task),
        Command::TrainSurrogate(args) => run_stages(load_run_config(&args)?, &["lookup", "surrogate"], &args.out),
        Command::Screen { run, oracle } => {
            let stages: &[&str] = if oracle { &["screen", "oracle"] } else { &["screen"] };
            run_stages(load_run_config(&run)?, stages, &run.out)
        }
        Command::Run { run, stages } => {
            let mut cfg = load_run_config(&run)?;
            if let Some(list) = stages {
                let mut toggles = None;
                for s in &list {
                    let one = Stages::only(s).ok_or_else(|| usage(format!("unknown stage {s}; stages are {}", STAGES.join(","))))?;
                    toggles = Some(toggles.map_or(one, |t| merge(t, one)));
                }
                if let Some(t) = toggles {
                    cfg.stages = t;
                }
            }
            finish_run(&cfg, &run.out)
        }
        Command::Bias { command } => cmd_bias(command),
        Command::Bench { out, limit } => {
            let report = bench_run(&out, limit)?;
            writeln!(writer(None)?, "{}", serde_json::to_string_pretty(&report)?)?;
            Ok(())
        }
        Command::Report { out } => {
            let manifests = verify_run(&out)?;
            writeln!(writer(None)?, "{}", serde_json::to_string_pretty(&json!({"verified": true, "manifests": manifests}))?)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
