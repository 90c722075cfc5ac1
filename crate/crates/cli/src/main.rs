//! `satdtn` command line: run scenarios, replay logs and print link tables.
//!
//! Exit status is 0 when every scripted assertion passes, 1 when one fails
//! and 2 for usage, configuration or I/O errors.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use satdtn::orbit::OrbitEphemeris;
use satdtn::report::{self, Report};
use satdtn::scenarios::ScenarioRegistry;
use satdtn::sim::{self, ScenarioConfig, SimError};
use satdtn::{Millis, NodeId};

#[derive(Parser, Debug)]
#[command(name = "satdtn", version, about = "Store-and-forward satellite uplink simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario file or a canned scenario by name.
    Run {
        config: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Stop the run early (e.g. `900s`, `15m`; a bare number is seconds).
        #[arg(long, value_parser = parse_duration)]
        until: Option<Millis>,
        /// Write the structured report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the event log (JSON lines) here.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Skip the human-readable table.
        #[arg(long, short)]
        quiet: bool,
    },
    /// Rebuild the report from a saved event log.
    Replay {
        log: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, short)]
        quiet: bool,
    },
    /// Per-pass capacity, goodput and energy of every builtin radio profile.
    CompareProfiles {
        #[arg(long, value_parser = parse_duration, default_value = "300")]
        window: Millis,
        #[arg(long)]
        json: bool,
    },
    /// List communication windows of an ephemeris.
    PlanPasses {
        /// JSON object, `key=value` list (sat, last, period, window) or a
        /// file holding the JSON.
        #[arg(long)]
        ephemeris: String,
        #[arg(long, value_parser = parse_duration, default_value = "0")]
        from: Millis,
        #[arg(long, value_parser = parse_duration)]
        to: Millis,
        #[arg(long)]
        json: bool,
    },
    /// List the canned scenarios.
    List,
    /// Write every canned scenario as a config file into a directory.
    ExportScenarios { dir: PathBuf },
    /// Print the JSON schema of scenario configs.
    Schema,
}

/// Seconds when bare, otherwise a humantime duration. Millisecond resolution.
fn parse_duration(s: &str) -> Result<Millis, String> {
    let s = s.trim();
    let d = match s.parse::<f64>() {
        Ok(secs) if secs.is_finite() && secs >= 0.0 => Duration::from_secs_f64(secs),
        Ok(_) => return Err(format!("invalid duration {s:?}")),
        Err(_) => humantime::parse_duration(s).map_err(|e| format!("invalid duration {s:?}: {e}"))?,
    };
    Millis::try_from(d.as_millis()).map_err(|_| "duration too large".into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Run {
            config,
            seed,
            until,
            report,
            log,
            quiet,
        } => cmd_run(&config, seed, until, report.as_deref(), log.as_deref(), quiet),
        Command::Replay { log, report, quiet } => cmd_replay(&log, report.as_deref(), quiet),
        Command::CompareProfiles { window, json } => {
            let rows = report::compare_profiles(window)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&rows)?);
            } else {
                print!("{}", report::render_profiles(&rows));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::PlanPasses {
            ephemeris,
            from,
            to,
            json,
        } => {
            let eph = parse_ephemeris(&ephemeris)?;
            let rows = report::plan_passes(&eph, from, to)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&rows)?);
            } else {
                print!("{}", report::render_pass_plan(&rows));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::List => {
            for s in ScenarioRegistry::with_builtins().iter() {
                println!("{:<26} {}", s.name(), s.description());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ExportScenarios { dir } => {
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            for s in ScenarioRegistry::with_builtins().iter() {
                let path = dir.join(format!("{}.json", s.name()));
                let mut text = s.build().to_json_pretty();
                text.push('\n');
                fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Schema => {
            let schema = schemars::schema_for!(ScenarioConfig);
            println!("{}", serde_json::to_string_pretty(&schema)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load_config(arg: &str) -> Result<ScenarioConfig> {
    let path = Path::new(arg);
    if path.exists() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {arg}"))?;
        return ScenarioConfig::from_json(&text).map_err(|e| anyhow!("{arg}: {e}"));
    }
    match ScenarioRegistry::with_builtins().get(arg) {
        Some(s) => Ok(s.build()),
        None => bail!("{arg}: no such file or canned scenario"),
    }
}

fn verdict(report: &Report) -> ExitCode {
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn write_report(report: &Report, path: Option<&Path>, quiet: bool) -> Result<()> {
    if !quiet {
        print!("{}", report.render());
    }
    if let Some(p) = path {
        fs::write(p, report.to_json()).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn cmd_run(
    config: &str,
    seed: Option<u64>,
    until: Option<Millis>,
    report_path: Option<&Path>,
    log_path: Option<&Path>,
    quiet: bool,
) -> Result<ExitCode> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(u) = until {
        cfg.duration_ms = u;
    }
    let out = match log_path {
        Some(p) => {
            let file = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            let mut sink = BufWriter::new(file);
            let out = sim::run_with_sink(&cfg, &mut sink);
            if out.is_ok() {
                sink.flush().with_context(|| format!("writing {}", p.display()))?;
            }
            out
        }
        None => sim::run(&cfg),
    };
    let out = match out {
        Ok(o) => o,
        Err(SimError::Config(e)) => bail!("{config}: {e}"),
        Err(e @ SimError::Sink { .. }) => return Err(e.into()),
    };
    let report = Report::from_records(&out.records);
    write_report(&report, report_path, quiet)?;
    Ok(verdict(&report))
}

fn cmd_replay(log: &Path, report_path: Option<&Path>, quiet: bool) -> Result<ExitCode> {
    let text = fs::read_to_string(log).with_context(|| format!("reading {}", log.display()))?;
    let records = sim::parse_jsonl(&text).with_context(|| format!("parsing {}", log.display()))?;
    let report = Report::from_records(&records);
    write_report(&report, report_path, quiet)?;
    Ok(verdict(&report))
}

fn parse_ephemeris(arg: &str) -> Result<OrbitEphemeris> {
    let text = if arg.trim_start().starts_with('{') || arg.contains('=') {
        arg.to_string()
    } else {
        fs::read_to_string(arg).with_context(|| format!("reading {arg}"))?
    };
    let eph = if text.trim_start().starts_with('{') {
        serde_json::from_str::<OrbitEphemeris>(&text).context("ephemeris JSON")?
    } else {
        let mut sat = NodeId(2);
        let (mut last, mut period, mut window) = (0, None, None);
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| anyhow!("expected key=value, got {part:?}"))?;
            match k.trim() {
                "sat" | "satellite" => sat = NodeId(v.trim().parse().context("satellite id")?),
                "last" | "t0" | "T0" => last = parse_duration(v).map_err(|e| anyhow!(e))?,
                "period" | "P" => period = Some(parse_duration(v).map_err(|e| anyhow!(e))?),
                "window" | "W" => window = Some(parse_duration(v).map_err(|e| anyhow!(e))?),
                other => bail!("unknown ephemeris key {other:?}"),
            }
        }
        OrbitEphemeris {
            satellite_id: sat,
            last_passage: last,
            period: period.ok_or_else(|| anyhow!("ephemeris needs period"))?,
            window: window.ok_or_else(|| anyhow!("ephemeris needs window"))?,
        }
    };
    eph.validate()?;
    Ok(eph)
}
