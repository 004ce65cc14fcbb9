use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use profilersim_cli::{
    compare_command, compliance_report, list_scenarios, run_command, summary_json, validate_command, CliConfig,
    CliError, ScenarioSource,
};

#[derive(Parser)]
#[command(name = "profilersim", version, about = "Ocean profiler dive simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its trace, summary and resolved config.
    Run(RunArgs),
    /// Compare all-measuring, all-cruising and adaptive dives on one profile.
    Compare(ScenarioArgs),
    /// Print the names of the built-in scenarios.
    ListScenarios,
    /// Check a config and print it fully resolved.
    Validate(ScenarioArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Built-in scenario name or path to a TOML config.
    #[arg(long, default_value = "constant_density_dive")]
    scenario: String,
    /// Override a config value, e.g. `supervisor.dwell_s=120`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Sensor noise seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, env = "PROFILERSIM_OUT", default_value = ".")]
    out: PathBuf,
    /// Also write a gnuplot script with the four standard panels.
    #[arg(long)]
    emit_plot: bool,
}

fn execute(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = CliConfig {
                source: ScenarioSource::parse(&args.scenario.scenario),
                out_dir: args.out,
                overrides: args.scenario.set,
                emit_plot: args.emit_plot,
                seed: args.scenario.seed,
            };
            let artifacts = run_command(&cfg)?;
            if args.scenario.json {
                return summary_json(&artifacts.summary);
            }
            let mut text = artifacts.summary.to_text();
            text.push('\n');
            text.push_str(&compliance_report(&artifacts.compliance));
            for f in &artifacts.files {
                text.push_str(&format!("wrote {}\n", f.display()));
            }
            Ok(text)
        }
        Command::Compare(args) => compare_command(
            &ScenarioSource::parse(&args.scenario),
            &args.set,
            args.seed,
            args.json,
        ),
        Command::ListScenarios => Ok(list_scenarios()),
        Command::Validate(args) => {
            validate_command(&ScenarioSource::parse(&args.scenario), &args.set, args.seed)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(text) => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("profilersim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
