//! Command-line driver: training, bound calibration and evaluation, the full
//! anchor-calibrate-decompose experiment, the Rademacher check suite, data
//! generation, and curve emission.
//!
//! Exit codes: 0 on success, 1 on configuration errors, 2 on numeric
//! failures (divergence and the like).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use maebound::bounds::{calibrate, BoundInputs, Calibration};
use maebound::config::{parse_widths, KvConfig};
use maebound::curves::curves_svg;
use maebound::data::{synthetic_image_corpus, write_idx};
use maebound::error::Error;
use maebound::experiment::{load_datasets, run_experiment, ExperimentConfig};
use maebound::network::{init_network, NetworkSpec};
use maebound::numerics::SeededRng;
use maebound::suite::{records_to_json_lines, run_rademacher_suite, SuiteConfig};
use maebound::training::{parse_curve_csv, train, TrainConfig};

#[derive(Parser)]
#[command(
    name = "maebound",
    about = "Norm-constrained vector-to-vector regression with calibrated MAE error bounds",
    version
)]
struct Cli {
    /// Key-value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model described by the config (`model.hidden = ...`).
    Train,
    /// Solve the two-anchor system for the bound constants c and b.
    Calibrate(CalibrateArgs),
    /// Evaluate a stored calibration at an architecture.
    Bound(BoundArgs),
    /// Run the full anchor-calibrate-decompose experiment.
    Experiment,
    /// Run the Rademacher complexity check suite.
    Rademacher(RademacherArgs),
    /// Generate synthetic data: a teacher dataset or an IDX image fixture.
    SynthData(SynthDataArgs),
    /// Render a training-log CSV as an SVG curve chart.
    EmitCurves(EmitCurvesArgs),
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    mae1: f64,
    #[arg(long)]
    mae2: f64,
    #[arg(long)]
    l1: usize,
    #[arg(long)]
    l2: usize,
    /// Output dimension q.
    #[arg(long)]
    q: usize,
    /// Input dimension d.
    #[arg(long)]
    d: usize,
    /// Training sample count N.
    #[arg(long)]
    n: usize,
    /// Differential order r.
    #[arg(long)]
    r: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda_prime: f64,
    /// Input norm bound s.
    #[arg(long, default_value_t = 1.0)]
    s: f64,
    #[arg(long, default_value_t = 0.95)]
    delta: f64,
}

#[derive(Args)]
struct BoundArgs {
    /// Calibration JSON produced by `calibrate`.
    #[arg(long)]
    calibration: PathBuf,
    /// Hidden-layer count of the architecture.
    #[arg(long)]
    depth: usize,
    /// Top hidden width.
    #[arg(long)]
    top_width: usize,
    /// Override the hidden L2 budget.
    #[arg(long)]
    lambda: Option<f64>,
    /// Override the top-row L1 budget.
    #[arg(long)]
    lambda_prime: Option<f64>,
    /// Add the finite-sample deviation term to the aggregate.
    #[arg(long)]
    include_hoeffding: bool,
}

#[derive(Args)]
struct RademacherArgs {
    /// Monte-Carlo sign draws per estimate.
    #[arg(long, default_value_t = 10_000)]
    draws: usize,
}

#[derive(Args)]
struct SynthDataArgs {
    /// Write an IDX image fixture with this many images instead of a
    /// teacher dataset.
    #[arg(long)]
    images: Option<usize>,
    #[arg(long, default_value_t = 28)]
    rows: usize,
    #[arg(long, default_value_t = 28)]
    cols: usize,
}

#[derive(Args)]
struct EmitCurvesArgs {
    /// Training-log CSV (`epoch,train_mae,test_mae,max_grad_norm`).
    #[arg(long)]
    log: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; anything else is a
            // configuration error.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numeric(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn load_config(cli: &Cli) -> Result<KvConfig, Error> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("this subcommand needs --config".into()))?;
    KvConfig::load(path)
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn run(cli: Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Train => cmd_train(&cli),
        Command::Calibrate(args) => cmd_calibrate(&cli, args),
        Command::Bound(args) => cmd_bound(&cli, args),
        Command::Experiment => cmd_experiment(&cli),
        Command::Rademacher(args) => cmd_rademacher(&cli, args),
        Command::SynthData(args) => cmd_synth_data(&cli, args),
        Command::EmitCurves(args) => cmd_emit_curves(&cli, args),
    }
}

fn cmd_train(cli: &Cli) -> Result<(), Error> {
    let kv = load_config(cli)?;
    let mut config = ExperimentConfig::from_kv(&kv)?;
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    let hidden = parse_widths(kv.require("model.hidden")?)?;
    let (train_ds, test_ds) = load_datasets(&config.source, config.master_seed)?;

    let spec = NetworkSpec::new(train_ds.input_dim, train_ds.output_dim, hidden)?
        .with_sharpness(config.sharpness)?;
    let mut init_rng = SeededRng::derived(config.master_seed, "init", 0);
    let net = init_network(spec, &mut init_rng)?;
    let train_config = TrainConfig {
        seed: maebound::numerics::derive_seed(config.master_seed, "train", 0),
        ..config.train.clone()
    };
    let (trained, log) = train(net, &train_ds, &test_ds, &train_config)?;

    let dir = out_dir(cli);
    trained.save(&dir.join("model.maeb"))?;
    log.write_csv(&dir.join("train_log.csv"))?;
    if !log.epochs.is_empty() {
        maebound::curves::emit_curves(&log, &dir, "train_log")?;
    }
    println!(
        "trained {} epochs: train MAE {:.6} -> {:.6}, test MAE {:.6} -> {:.6}",
        log.epochs.len(),
        log.initial_train_mae,
        log.final_train_mae(),
        log.initial_test_mae,
        log.final_test_mae()
    );
    println!("artifacts in {}", dir.display());
    Ok(())
}

fn cmd_calibrate(cli: &Cli, args: &CalibrateArgs) -> Result<(), Error> {
    let inputs = BoundInputs {
        output_dim: args.q,
        input_dim: args.d,
        train_samples: args.n,
        hidden_depth: 1,
        top_width: args.l1,
        differential_order: args.r,
        lambda: args.lambda,
        lambda_prime: args.lambda_prime,
        input_norm_bound: args.s,
        delta: args.delta,
    };
    let cal = calibrate(args.mae1, args.mae2, args.l1, args.l2, &inputs)?;
    let json = serde_json::to_string_pretty(&cal).expect("calibration serializes");
    println!("{json}");
    if cli.out.is_some() {
        maebound::write_atomic(&out_dir(cli).join("calibration.json"), json.as_bytes())?;
    }
    Ok(())
}

fn cmd_bound(cli: &Cli, args: &BoundArgs) -> Result<(), Error> {
    let text = std::fs::read_to_string(&args.calibration)
        .map_err(|e| Error::io(&args.calibration, e))?;
    let cal: Calibration = serde_json::from_str(&text).map_err(|e| Error::Format {
        offset: 0,
        message: format!("calibration JSON: {e}"),
    })?;
    let inputs = BoundInputs {
        hidden_depth: args.depth,
        top_width: args.top_width,
        lambda: args.lambda.unwrap_or(cal.inputs.lambda),
        lambda_prime: args.lambda_prime.unwrap_or(cal.inputs.lambda_prime),
        ..cal.inputs.clone()
    };
    let report = if args.include_hoeffding {
        maebound::bounds::mae_upper_bound_with_hoeffding(&cal, &inputs)?
    } else {
        maebound::bounds::mae_upper_bound(&cal, &inputs)?
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    println!("{json}");
    if cli.out.is_some() {
        maebound::write_atomic(&out_dir(cli).join("bound.json"), json.as_bytes())?;
    }
    Ok(())
}

fn cmd_experiment(cli: &Cli) -> Result<(), Error> {
    let kv = load_config(cli)?;
    let mut config = ExperimentConfig::from_kv(&kv)?;
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
        // The echo must describe the run actually performed.
        config.config_text = None;
    }
    let dir = out_dir(cli);
    let outcome = run_experiment(&config, Some(&dir))?;
    print!("{}", outcome.report.decomposition_csv());
    for row in &outcome.report.rows {
        if row.failed {
            eprintln!(
                "model {} failed: {}",
                row.name,
                row.error.as_deref().unwrap_or("unknown")
            );
        }
    }
    println!("report written to {}", dir.join("report.json").display());
    Ok(())
}

fn cmd_rademacher(cli: &Cli, args: &RademacherArgs) -> Result<(), Error> {
    let config = SuiteConfig {
        seed: cli.seed.unwrap_or(SuiteConfig::default().seed),
        draws: args.draws,
    };
    let records = run_rademacher_suite(&config)?;
    let lines = records_to_json_lines(&records);
    print!("{lines}");
    let failures = records.iter().filter(|r| !r.holds).count();
    if cli.out.is_some() {
        maebound::write_atomic(&out_dir(cli).join("rademacher.jsonl"), lines.as_bytes())?;
    }
    eprintln!("{} checks, {} failed", records.len(), failures);
    Ok(())
}

fn cmd_synth_data(cli: &Cli, args: &SynthDataArgs) -> Result<(), Error> {
    let dir = out_dir(cli);
    if let Some(count) = args.images {
        let seed = cli.seed.unwrap_or(1);
        let corpus = synthetic_image_corpus(count, args.rows, args.cols, seed);
        let path = dir.join("images-idx3-ubyte");
        write_idx(&corpus, &path)?;
        println!(
            "wrote {count} {}x{} images to {}",
            args.rows,
            args.cols,
            path.display()
        );
        return Ok(());
    }
    let kv = load_config(cli)?;
    let mut config = ExperimentConfig::from_kv(&kv)?;
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    let (train_ds, test_ds) = load_datasets(&config.source, config.master_seed)?;
    maebound::data::save_dataset(&train_ds, &dir.join("train.maed"))?;
    maebound::data::save_dataset(&test_ds, &dir.join("test.maed"))?;
    println!(
        "wrote {} train and {} test pairs to {}",
        train_ds.len(),
        test_ds.len(),
        dir.display()
    );
    Ok(())
}

fn cmd_emit_curves(cli: &Cli, args: &EmitCurvesArgs) -> Result<(), Error> {
    let text = std::fs::read_to_string(&args.log).map_err(|e| Error::io(&args.log, e))?;
    let (train_mae, test_mae, _) = parse_curve_csv(&text)?;
    let svg = curves_svg(&train_mae, &test_mae)?;
    let out_path = match &cli.out {
        Some(dir) => dir.join(
            args.log
                .with_extension("svg")
                .file_name()
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("curves.svg")),
        ),
        None => args.log.with_extension("svg"),
    };
    maebound::write_atomic(&out_path, svg.as_bytes())?;
    println!("wrote {}", out_path.display());
    Ok(())
}
