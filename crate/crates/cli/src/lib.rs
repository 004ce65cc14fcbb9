//! Command implementations behind the `profilersim` binary.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use profilersim_core::config::{parse_config_with_overrides, parse_override, resolved_toml};
use profilersim_core::scenario::{format_strategy_table, BUILTIN_SCENARIOS};
use profilersim_core::sensing::{format_compliance_table, woce_compliance, ComplianceRow, WoceBudget, WoceChannel};
use profilersim_core::{compare_strategies, run, trace_csv, Mode, Scenario, Summary};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioSource {
    Builtin(String),
    File(PathBuf),
}

impl ScenarioSource {
    /// Built-in names win over files of the same name.
    pub fn parse(raw: &str) -> Self {
        if BUILTIN_SCENARIOS.contains(&raw) {
            ScenarioSource::Builtin(raw.to_string())
        } else {
            ScenarioSource::File(PathBuf::from(raw))
        }
    }
}

#[derive(Debug, Clone)]
pub struct CliConfig {
    pub source: ScenarioSource,
    pub out_dir: PathBuf,
    /// Raw `key=value` strings as given on the command line.
    pub overrides: Vec<String>,
    pub emit_plot: bool,
    pub seed: Option<u64>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) | CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "simulation failed: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

pub fn load_scenario(
    source: &ScenarioSource,
    overrides: &[String],
    seed: Option<u64>,
) -> Result<Scenario, CliError> {
    let text = match source {
        ScenarioSource::Builtin(name) => format!("base = {name:?}\n"),
        ScenarioSource::File(path) => fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?,
    };
    let mut pairs = overrides
        .iter()
        .map(|raw| parse_override(raw))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(seed) = seed {
        pairs.push(("sensors.seed".to_string(), seed.to_string()));
    }
    let mut scenario =
        parse_config_with_overrides(&text, &pairs).map_err(|e| CliError::Config(one_line(&e.to_string())))?;
    if let ScenarioSource::File(path) = source {
        if !text.lines().any(|l| l.trim_start().starts_with("name")) {
            if let Some(stem) = path.file_stem() {
                scenario.name = stem.to_string_lossy().into_owned();
            }
        }
    }
    Ok(scenario)
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Files written by one `run`.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub files: Vec<PathBuf>,
    pub summary: Summary,
    pub compliance: Vec<(Mode, Vec<ComplianceRow>)>,
}

pub fn compliance_rows(summary: &Summary) -> Vec<(Mode, Vec<ComplianceRow>)> {
    let budget = WoceBudget::default();
    [Mode::Cruise, Mode::Measure]
        .into_iter()
        .map(|mode| {
            let c = summary.compliance_for(mode);
            let rows = woce_compliance(
                &budget,
                &[
                    (WoceChannel::Temperature, c.max_temperature_error),
                    (WoceChannel::Depth, c.max_depth_error),
                ],
            );
            (mode, rows)
        })
        .collect()
}

pub fn compliance_csv(rows: &[(Mode, Vec<ComplianceRow>)]) -> String {
    let mut out = String::from("mode,channel,estimate,limit,pass\n");
    for (mode, rows) in rows {
        for r in rows {
            out.push_str(&format!("{mode},{},{:e},{},{}\n", r.channel, r.estimate, r.limit, r.pass));
        }
    }
    out
}

pub fn compliance_report(rows: &[(Mode, Vec<ComplianceRow>)]) -> String {
    rows.iter()
        .map(|(mode, rows)| format!("[{mode}]\n{}", format_compliance_table(rows)))
        .collect()
}

/// Gnuplot script drawing density, gradient estimate, speed and depth
/// against time from `<name>.trace.csv` in the same directory.
pub fn plot_script(name: &str) -> String {
    let csv = format!("{name}.trace.csv");
    format!(
        r#"# gnuplot script; run from the directory holding {csv}
set datafile separator ","
set terminal pngcairo size 900,1200
set output "{name}.png"
set multiplot layout 4,1 title "{name}"
set xlabel "t, s"
set grid

set ylabel "density, kg/m^3"
plot "{csv}" using 1:6 skip 1 with lines title "true", \
     "" using 1:7 skip 1 with lines title "measured"

set ylabel "gradient estimate, kg/m^4"
plot "{csv}" using 1:8 skip 1 with lines title "grad"

set ylabel "speed, m/s"
plot "{csv}" using 1:3 skip 1 with lines title "v", \
     "" using 1:11 skip 1 with lines dashtype 2 title "v_ref"

set ylabel "depth, m"
set yrange [*:*] reverse
plot "{csv}" using 1:2 skip 1 with lines title "z"

unset multiplot
"#
    )
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn run_command(cli: &CliConfig) -> Result<RunArtifacts, CliError> {
    let scenario = load_scenario(&cli.source, &cli.overrides, cli.seed)?;
    let out = run(&scenario).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::create_dir_all(&cli.out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", cli.out_dir.display())))?;

    let name = &scenario.name;
    let compliance = compliance_rows(&out.summary);
    let mut files = Vec::new();
    let mut emit = |suffix: &str, contents: String| -> Result<(), CliError> {
        let path = cli.out_dir.join(format!("{name}.{suffix}"));
        write(&path, &contents)?;
        files.push(path);
        Ok(())
    };
    emit("trace.csv", trace_csv(&out.trace))?;
    emit("summary.txt", out.summary.to_text())?;
    emit("resolved.toml", resolved_toml(&scenario))?;
    emit("compliance.csv", compliance_csv(&compliance))?;
    if cli.emit_plot {
        emit("plot.gp", plot_script(name))?;
    }
    Ok(RunArtifacts {
        files,
        summary: out.summary,
        compliance,
    })
}

pub fn compare_command(
    source: &ScenarioSource,
    overrides: &[String],
    seed: Option<u64>,
    json: bool,
) -> Result<String, CliError> {
    let scenario = load_scenario(source, overrides, seed)?;
    let reports = compare_strategies(&scenario).map_err(|e| CliError::Runtime(e.to_string()))?;
    if json {
        serde_json::to_string_pretty(&reports).map_err(|e| CliError::Runtime(e.to_string()))
    } else {
        Ok(format_strategy_table(&reports))
    }
}

pub fn validate_command(
    source: &ScenarioSource,
    overrides: &[String],
    seed: Option<u64>,
) -> Result<String, CliError> {
    load_scenario(source, overrides, seed).map(|s| resolved_toml(&s))
}

pub fn list_scenarios() -> String {
    BUILTIN_SCENARIOS.iter().map(|n| format!("{n}\n")).collect()
}

pub fn summary_json(summary: &Summary) -> Result<String, CliError> {
    serde_json::to_string_pretty(summary).map_err(|e| CliError::Runtime(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn source_resolution() {
        assert_eq!(ScenarioSource::parse("fig4"), ScenarioSource::Builtin("fig4".into()));
        assert_eq!(
            ScenarioSource::parse("runs/a.toml"),
            ScenarioSource::File(PathBuf::from("runs/a.toml"))
        );
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config(String::new()).exit_code(), 2);
        assert_eq!(CliError::Runtime(String::new()).exit_code(), 1);
        assert_eq!(CliError::Io(String::new()).exit_code(), 1);
    }

    #[test]
    fn seed_flag_overrides_config() {
        let s = load_scenario(&ScenarioSource::Builtin("fig4".into()), &[], Some(11)).unwrap();
        assert_eq!(s.sensors.seed, 11);
        assert_eq!(s.name, "fig4");
    }

    #[test]
    fn bad_override_is_config_error() {
        let err = load_scenario(&ScenarioSource::Builtin("fig4".into()), &["nonsense".into()], None)
            .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn plot_panels() {
        let gp = plot_script("fig4");
        assert_eq!(gp.matches("\nplot ").count(), 4);
        for col in ["1:6", "1:8", "1:3", "1:2"] {
            assert!(gp.contains(col), "{col}");
        }
    }

    #[test]
    fn compliance_csv_layout() {
        let s = Scenario::fig4();
        let out = run(&s).unwrap();
        let csv = compliance_csv(&compliance_rows(&out.summary));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "mode,channel,estimate,limit,pass");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("cruise,temperature,"));
        assert!(lines[4].starts_with("measure,depth,"));
    }
}
