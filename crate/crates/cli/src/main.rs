//! `wormsim` - scenario runner for the wormhole-prevention simulator.
//!
//! Subcommands:
//!
//! * `run <scenario>` - one discovery; prints metrics, writes the trace
//!   and a metrics CSV. Exit code 0 when the route establishes, 2 when an
//!   attack is detected, 3 on timeout.
//! * `compare <scenario>` - the same scenario with prevention off and on;
//!   writes the paired overhead CSV.
//! * `sweep <experiment>` - batch of named scenarios with seed-offset
//!   repetitions; writes per-run and aggregate CSVs.
//! * `fixtures` - the four canonical reference-topology cases; prints one
//!   verdict line each.
//!
//! The output directory is `--out`, else `$WORMSIM_OUT`, else `.`.

mod experiment;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use wormsim_core::engine::{measure_overhead, run_scenario};
use wormsim_core::fixture;
use wormsim_core::metrics::{Metrics, Outcome};
use wormsim_core::prevention::VerdictKind;
use wormsim_core::scenario::ScenarioConfig;
use wormsim_core::topology::Topology;
use wormsim_core::wormhole::WormholeMode;
use wormsim_core::OverheadComparison;

#[derive(Parser)]
#[command(name = "wormsim", version, about = "Wormhole-prevention network simulator")]
struct Cli {
    /// Output directory for traces and CSVs (default: $WORMSIM_OUT or .)
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and report its metrics
    Run { scenario: PathBuf },
    /// Run a scenario with prevention off and on, emit the paired CSV
    Compare { scenario: PathBuf },
    /// Run an experiment file: named scenarios x repetitions, paired
    Sweep { experiment: PathBuf },
    /// Run the four canonical reference cases and print their verdicts
    Fixtures,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out_dir = cli
        .out
        .or_else(|| std::env::var_os("WORMSIM_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let code = match cli.command {
        Command::Run { scenario } => cmd_run(&scenario, &out_dir),
        Command::Compare { scenario } => cmd_compare(&scenario, &out_dir),
        Command::Sweep { experiment } => experiment::cmd_sweep(&experiment, &out_dir),
        Command::Fixtures => cmd_fixtures(),
    };
    match code {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

/// Loads a scenario file and resolves any `topology =` reference relative
/// to the scenario's directory.
pub(crate) fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read scenario file `{}`", path.display()))?;
    let mut cfg = ScenarioConfig::parse_str(&text)
        .with_context(|| format!("in scenario file `{}`", path.display()))?;
    if let Some(file) = cfg.topology_file.clone() {
        let topo_path = path.parent().unwrap_or(Path::new(".")).join(&file);
        let topo_text = fs::read_to_string(&topo_path)
            .with_context(|| format!("cannot read topology file `{}`", topo_path.display()))?;
        let topo = Topology::from_text(&topo_text)
            .with_context(|| format!("in topology file `{}`", topo_path.display()))?;
        cfg.range = topo.range();
        cfg.placements = Some(
            topo.node_ids()
                .map(|id| (id, topo.position(id).unwrap()))
                .collect(),
        );
    }
    Ok(cfg)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".to_string())
}

pub(crate) fn write_out(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory `{}`", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents)
        .with_context(|| format!("cannot write `{}`", path.display()))?;
    Ok(path)
}

fn print_summary(metrics: &Metrics) {
    println!("outcome            {}", metrics.outcome.as_str());
    match metrics.rrep_total_time {
        Some(t) => println!("rrep_total_time    {t}"),
        None => println!("rrep_total_time    -"),
    }
    match metrics.route_hops {
        Some(h) => {
            let path: Vec<String> = metrics.route_path.iter().map(|n| n.to_string()).collect();
            println!("route              {h} hops, reply path {}", path.join(" -> "));
        }
        None => println!("route              none"),
    }
    println!(
        "energy             {} total ({} tx, {} rx packets)",
        metrics.energy.total(),
        metrics.energy.total_tx(),
        metrics.energy.total_rx()
    );
    println!(
        "checks             {} run, max ack collection {}",
        metrics.probe_ack_collection_times.len(),
        metrics.max_collection_time()
    );
    for v in &metrics.verdicts {
        println!("  verdict          {} at node {} ({})", v.kind, v.node, v.acks);
    }
    println!(
        "alarms             {} ({} detections, {} false positives)",
        metrics.alarms(),
        metrics.detection_count,
        metrics.false_positive_count
    );
}

fn cmd_run(scenario: &Path, out_dir: &Path) -> Result<ExitCode> {
    let cfg = load_scenario(scenario)?;
    let (metrics, trace) = run_scenario(cfg)?;
    println!("scenario           {}", scenario.display());
    print_summary(&metrics);
    let name = stem(scenario);
    let trace_path = write_out(out_dir, &format!("{name}_trace.txt"), &trace.render())?;
    let csv = format!("{}\n{}\n", Metrics::CSV_HEADER, metrics.csv_row());
    let csv_path = write_out(out_dir, &format!("{name}_metrics.csv"), &csv)?;
    println!("trace              {}", trace_path.display());
    println!("metrics            {}", csv_path.display());
    Ok(ExitCode::from(match metrics.outcome {
        Outcome::RouteEstablished => 0,
        Outcome::AttackDetected => 2,
        Outcome::Timeout => 3,
    }))
}

fn cmd_compare(scenario: &Path, out_dir: &Path) -> Result<ExitCode> {
    let cfg = load_scenario(scenario)?;
    let comparison = measure_overhead(&cfg.with_prevention(false), &cfg.with_prevention(true))?;
    let mut csv = String::from(OverheadComparison::CSV_HEADER);
    csv.push('\n');
    csv.push_str(&comparison.csv_row());
    csv.push('\n');
    print!("{csv}");
    let path = write_out(out_dir, &format!("{}_compare.csv", stem(scenario)), &csv)?;
    println!("written            {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_fixtures() -> Result<ExitCode> {
    let cases: [(&str, Option<WormholeMode>, VerdictKind); 4] = [
        ("no_wormhole", None, VerdictKind::Valid),
        (
            "hidden_passive",
            Some(WormholeMode::HiddenPassive),
            VerdictKind::IllegalNoForwarder,
        ),
        (
            "exposed_passive",
            Some(WormholeMode::ExposedPassive),
            VerdictKind::IllegalKeyMismatch,
        ),
        (
            "hidden_active",
            Some(WormholeMode::HiddenActive),
            VerdictKind::IllegalTagConflict,
        ),
    ];
    let mut all_canonical = true;
    for (name, attack, expected) in cases {
        let (metrics, _) = run_scenario(fixture::scenario(attack))?;
        let checker = fixture::canonical_checker(attack);
        let verdict = metrics.verdicts.iter().find(|v| v.node == checker);
        match verdict {
            Some(v) => {
                println!("{name} {}", v.kind);
                if v.kind != expected {
                    all_canonical = false;
                }
            }
            None => {
                println!("{name} (no check ran at node {checker})");
                all_canonical = false;
            }
        }
    }
    if all_canonical {
        Ok(ExitCode::SUCCESS)
    } else {
        bail!("fixture verdicts deviate from the canonical table")
    }
}
