use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ventbench::bench::{make_cohort, run_benchmark, BenchmarkPlan, BenchmarkReport, PolicyKind};
use ventbench::latent::{generate_dataset, train_e2c, E2cModel, TransitionDataset};
use ventbench::{Config, Error, Result};

#[derive(Parser)]
#[command(name = "ventbench", version, about = "Ventilator-management benchmark for ARDS patients")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config file; missing keys fall back to defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the patient cohort as JSON.
    Cohort {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        patients: Option<usize>,
        /// Output file (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Roll out the random policy and save state-action-state triplets.
    GenerateData {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        patients: Option<usize>,
        /// Passes over the cohort.
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        /// `.csv` for text, anything else for the binary format.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the autoencoder and latent dynamics.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset from `generate-data`; generated on the fly if omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Model directory to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the benchmark.
    Run(RunArgs),
    /// Render a saved report.
    Report {
        /// `report.json` written by `run`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        format: ReportFormat,
    },
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated policy names, or `all`.
    #[arg(long, default_value = "random,max_intervention,ardsnet,smpc")]
    policies: String,
    #[arg(long)]
    patients: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long = "dt-min")]
    dt_min: Option<f64>,
    /// Samples per decision (applies to both exact and learned controllers).
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long = "H")]
    h: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Directory written by `train`.
    #[arg(long = "model-path")]
    model_path: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Run episodes on one thread.
    #[arg(long)]
    serial: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Csv,
}

fn load_config(common: &Common) -> Result<Config> {
    let mut cfg = match &common.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(seed) = common.seed {
        cfg.bench.seed = seed;
    }
    Ok(cfg)
}

fn write_out(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Cohort { common, patients, out } => {
            let cfg = load_config(&common)?;
            let cohort = make_cohort(patients.unwrap_or(cfg.bench.patients), cfg.bench.seed, &cfg.bench)?;
            write_out(out.as_deref(), &(serde_json::to_string_pretty(&cohort)? + "\n"))
        }
        Command::GenerateData {
            common,
            patients,
            runs,
            steps,
            out,
        } => {
            let cfg = load_config(&common)?;
            let cohort = make_cohort(patients.unwrap_or(cfg.bench.patients), cfg.bench.seed, &cfg.bench)?;
            let data = generate_dataset(
                &cfg,
                &cfg.bounds_table()?,
                &cohort.patients,
                runs.unwrap_or(cfg.latent.runs),
                steps.unwrap_or(cfg.env.steps),
                cfg.bench.seed,
            )?;
            data.save(&out)?;
            eprintln!("wrote {} triplets to {}", data.len(), out.display());
            Ok(())
        }
        Command::Train {
            common,
            data,
            epochs,
            out,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(e) = epochs {
                cfg.latent.epochs = e;
            }
            let data = match data {
                Some(p) => TransitionDataset::load(&p)?,
                None => {
                    let cohort = make_cohort(cfg.bench.patients, cfg.bench.seed, &cfg.bench)?;
                    generate_dataset(
                        &cfg,
                        &cfg.bounds_table()?,
                        &cohort.patients,
                        cfg.latent.runs,
                        cfg.env.steps,
                        cfg.bench.seed,
                    )?
                }
            };
            let (model, report) = train_e2c(&data, &cfg.latent, cfg.bench.seed)?;
            model.save(&out)?;
            std::fs::write(out.join("autoencoder_loss.csv"), report.autoencoder.to_csv())?;
            std::fs::write(out.join("dynamics_loss.csv"), report.dynamics.to_csv())?;
            std::fs::write(out.join("training.json"), serde_json::to_string_pretty(&report)?)?;
            eprintln!(
                "autoencoder val RMSE {:.4}, dynamics val RMSE {:.4} (persistence {:.4})",
                report.ae_val_rmse, report.dynamics_val_rmse, report.persistence_val_rmse
            );
            Ok(())
        }
        Command::Run(args) => run(args),
        Command::Report { input, format } => {
            let report = BenchmarkReport::load(&input)?;
            let text = match format {
                ReportFormat::Text => report.render_table(),
                ReportFormat::Csv => report.summary_csv()?,
            };
            write_out(None, &text)
        }
    }
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    if let Some(dt) = args.dt_min {
        cfg.env.dt_min = dt;
    }
    if let Some(k) = args.k {
        cfg.control.k_exact = k;
        cfg.control.k_learned = k;
    }
    if let Some(h) = args.h {
        cfg.control.horizon = h;
    }
    if let Some(l) = args.lambda {
        cfg.control.lambda = l;
    }
    if args.serial {
        cfg.control.parallel = false;
    }
    cfg.validate()?;
    let policies = PolicyKind::parse_list(&args.policies)?;
    let model = if policies.iter().any(|k| k.needs_model()) {
        let path = args
            .model_path
            .clone()
            .ok_or_else(|| Error::InvalidInput("E2C policies need --model-path".into()))?;
        Some(E2cModel::load(&path)?)
    } else {
        None
    };
    let cohort = make_cohort(args.patients.unwrap_or(cfg.bench.patients), cfg.bench.seed, &cfg.bench)?;
    let plan = BenchmarkPlan {
        policies,
        steps: args.steps.unwrap_or(cfg.env.steps),
        seed: cfg.bench.seed,
        parallel: !args.serial,
    };
    let (report, timings) = run_benchmark(&plan, &cohort, &cfg, model.as_ref())?;
    report.write_all(&args.out)?;
    std::fs::write(args.out.join("timings.json"), serde_json::to_string_pretty(&timings)?)?;
    print!("{}", report.render_table());
    Ok(())
}

/// Bad arguments or unusable inputs are usage errors; everything else is a
/// runtime failure.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidInput(_)
        | Error::InvalidProfile(_)
        | Error::Config(_)
        | Error::MissingModel { .. } => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
