//! `bilq`: run, compare and inspect online Q-learning experiments on
//! bilinear plants.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use bilq_core::examples;
use bilq_core::runtime::{self, example_registry, Experiment, ExperimentConfig, Mode};
use bilq_core::{Error, Result};
use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Parser)]
#[command(
    name = "bilq",
    version,
    about = "Online model-free Q-learning for bilinear systems"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Experiment configuration (TOML).
    #[arg(long, global = true, value_name = "FILE", conflicts_with = "example")]
    config: Option<PathBuf>,
    /// Built-in plant to use instead of a config file.
    #[arg(long, global = true, value_name = "NAME")]
    example: Option<String>,
    /// Exploration signal seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; falls back to the config, then $BILQ_OUT_DIR.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Horizon override.
    #[arg(long, global = true)]
    horizon: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Execute a configuration and write the run log(s) and summary.
    Run {
        /// Overrides the configured mode.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<Mode>,
    },
    /// Run model-free and model-based side by side.
    Compare,
    /// Exploration dry run: excitation diagnostics of the data matrix.
    CheckPe,
    /// Frozen-state gains at one state from data, model and Riccati oracle.
    Oracle {
        /// Comma-separated state, e.g. `1,1,1`.
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        state: Vec<f64>,
    },
    /// List or print the built-in configurations.
    Examples {
        #[command(subcommand)]
        action: Option<ExamplesAction>,
    },
}

#[derive(Debug, Subcommand)]
enum ExamplesAction {
    List,
    /// Print the full TOML configuration of an example.
    Emit {
        name: String,
    },
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    match s.replace('-', "_").as_str() {
        "model_free" => Ok(Mode::ModelFree),
        "model_based" => Ok(Mode::ModelBased),
        "both" => Ok(Mode::Both),
        other => Err(format!(
            "unknown mode `{other}` (model_free, model_based, both)"
        )),
    }
}

fn load_config(global: &GlobalArgs) -> Result<ExperimentConfig> {
    let mut config = match (&global.config, &global.example) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_toml(&text)?
        }
        (None, Some(name)) => example_registry(name)?.1,
        (None, None) => return Err(Error::Config("pass --config FILE or --example NAME".into())),
    };
    if let Some(seed) = global.seed {
        config.seed = Some(seed);
    }
    if let Some(horizon) = global.horizon {
        config.horizon = horizon;
    }
    Ok(config)
}

fn format_matrix(m: &DMatrix<f64>) -> String {
    m.row_iter()
        .map(|row| {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:>14.6e}")).collect();
            format!("  [{}]", cells.join(" "))
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn execute(
    config: ExperimentConfig,
    experiment: &Experiment,
    global: &GlobalArgs,
    mode: Mode,
) -> Result<()> {
    let (mf, mb) = match mode {
        Mode::ModelFree => (
            Some(runtime::run_online(
                &mut experiment.system.clone(),
                &experiment.settings,
            )?),
            None,
        ),
        Mode::ModelBased => (
            None,
            Some(runtime::run_model_based(
                &experiment.system,
                &experiment.settings,
            )?),
        ),
        Mode::Both => {
            let (mf, mb) = runtime::compare(experiment)?;
            (Some(mf), Some(mb))
        }
    };
    let dir = runtime::output::resolve_output_dir(global.out.as_deref(), experiment);
    let written = runtime::write_outputs(
        &dir,
        &config,
        mf.as_ref(),
        mb.as_ref(),
        experiment.dump_data,
    )?;
    for log in mf.iter().chain(mb.iter()) {
        let s = &log.summary;
        println!(
            "{}: steps={} N={} total_discounted_cost={:e} final_norm={:e} nonconverged={}{}",
            s.mode,
            s.steps,
            s.exploration_steps,
            s.total_discounted_cost,
            s.final_state_norm,
            s.nonconverged_steps,
            s.condition_x
                .map(|c| format!(" condition_X={c:e}"))
                .unwrap_or_default()
        );
    }
    for path in written.paths {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn check_pe(experiment: &Experiment) -> Result<()> {
    let report = runtime::check_pe(&mut experiment.system.clone(), &experiment.settings)?;
    println!("N = {}", report.exploration_steps);
    println!("independent samples = {}", report.independent_samples);
    println!("exploration retries = {}", report.retries);
    println!("lambda_min(X) = {:e}", report.min_eigenvalue_x);
    println!(
        "lambda_min(X equilibrated) = {:e}",
        report.normalized_min_eigenvalue_x
    );
    println!("condition_X = {:e}", report.condition_x);
    println!("richness order = {}", report.richness_order);
    println!("persistently exciting = {}", report.persistently_exciting);
    if report.persistently_exciting {
        Ok(())
    } else {
        Err(Error::NotPersistentlyExciting {
            min_eigenvalue: report.normalized_min_eigenvalue_x,
        })
    }
}

fn oracle(experiment: &Experiment, state: &[f64]) -> Result<()> {
    let state = DVector::from_column_slice(state);
    let report = runtime::oracle_report(&experiment.system, &experiment.settings, &state)?;
    println!("state = {:?}", state.as_slice());
    if let Some(c) = report.condition_x {
        println!("condition_X = {c:e}");
    }
    match &report.model_free {
        Ok(mf) => println!(
            "K model-free ({} iterations):\n{}",
            mf.iterations,
            format_matrix(&mf.gain)
        ),
        Err(e) => println!("K model-free: unavailable ({e})"),
    }
    println!(
        "K model-based ({} iterations):\n{}",
        report.model_based.iterations,
        format_matrix(&report.model_based.gain)
    );
    println!("K Riccati oracle:\n{}", format_matrix(&report.riccati_gain));
    if let Some(err) = report.model_free_vs_model_based() {
        println!("relative error model-free vs model-based = {err:e}");
    }
    println!(
        "relative error model-based vs oracle = {:e}",
        report.model_based_vs_riccati()
    );
    report.model_free.map(|_| ())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Examples { action } => match action.unwrap_or(ExamplesAction::List) {
            ExamplesAction::List => {
                for name in examples::NAMES {
                    let (sys, _) = example_registry(name)?;
                    println!("{name}\tn={} m={} N={}", sys.n(), sys.m(), sys.lifted_dim());
                }
                Ok(())
            }
            ExamplesAction::Emit { name } => {
                print!("{}", example_registry(&name)?.1.to_toml()?);
                Ok(())
            }
        },
        command => {
            let config = load_config(&cli.global)?;
            let experiment = config.resolve()?;
            match command {
                Command::Run { mode } => {
                    let mode = mode.unwrap_or(experiment.mode);
                    execute(config, &experiment, &cli.global, mode)
                }
                Command::Compare => execute(config, &experiment, &cli.global, Mode::Both),
                Command::CheckPe => check_pe(&experiment),
                Command::Oracle { state } => oracle(&experiment, &state),
                Command::Examples { .. } => unreachable!("handled above"),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
