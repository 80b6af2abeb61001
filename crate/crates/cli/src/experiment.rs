//! Experiment files and the `sweep` batch runner.
//!
//! Format, one `key = value` per line (`#` comments allowed):
//!
//! ```text
//! repetitions = 5                    # seed offsets 0..5, default 1
//! scenario = dense scenarios/table1.txt
//! scenario = fixture scenarios/fixture_clean.txt
//! ```
//!
//! Every scenario runs `repetitions` times with seeds `base+0..base+reps`,
//! each as a (prevention off, prevention on) pair. Rows land in
//! `sweep_runs.csv` ordered by scenario name then seed; per-name aggregates
//! (means of the paired metrics, max ack collection) land in
//! `sweep_summary.csv`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};

use wormsim_core::engine::measure_overhead;
use wormsim_core::scenario::ScenarioConfig;

pub(crate) struct ExperimentSpec {
    pub repetitions: u64,
    pub scenarios: Vec<(String, PathBuf)>,
}

pub(crate) fn parse_experiment(text: &str, base_dir: &Path) -> Result<ExperimentSpec> {
    let mut repetitions = 1u64;
    let mut scenarios: Vec<(String, PathBuf)> = Vec::new();
    let mut names = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            bail!("line {line}: expected `key = value`, got `{content}`");
        };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "repetitions" => {
                repetitions = value
                    .parse()
                    .with_context(|| format!("line {line}: bad repetitions `{value}`"))?;
                if repetitions < 1 {
                    bail!("line {line}: repetitions must be at least 1");
                }
            }
            "scenario" => {
                let Some((name, path)) = value.split_once(char::is_whitespace) else {
                    bail!("line {line}: `scenario` needs `name path`");
                };
                let name = name.trim().to_string();
                if !names.insert(name.clone()) {
                    bail!("line {line}: duplicate scenario name `{name}`");
                }
                scenarios.push((name, base_dir.join(path.trim())));
            }
            other => bail!("line {line}: unknown key `{other}`"),
        }
    }
    if scenarios.is_empty() {
        bail!("experiment lists no scenarios");
    }
    Ok(ExperimentSpec {
        repetitions,
        scenarios,
    })
}

pub(crate) const RUNS_HEADER: &str = "name,seed,hops,baseline_outcome,prevention_outcome,\
baseline_rrep_time,prevention_rrep_time,baseline_energy,prevention_energy,max_ack_collection_time";

pub(crate) const SUMMARY_HEADER: &str = "name,runs,paired,mean_baseline_rrep_time,\
mean_prevention_rrep_time,mean_baseline_energy,mean_prevention_energy,max_ack_collection_time";

pub(crate) fn cmd_sweep(experiment: &Path, out_dir: &Path) -> Result<ExitCode> {
    let text = std::fs::read_to_string(experiment)
        .with_context(|| format!("cannot read experiment file `{}`", experiment.display()))?;
    let base_dir = experiment.parent().unwrap_or(Path::new("."));
    let spec = parse_experiment(&text, base_dir)?;

    let mut runs_csv = String::from(RUNS_HEADER);
    runs_csv.push('\n');
    let mut summary_csv = String::from(SUMMARY_HEADER);
    summary_csv.push('\n');

    for (name, path) in &spec.scenarios {
        let cfg = crate::load_scenario(path)?;
        let mut paired = 0u64;
        let mut sums = [0.0f64; 4]; // baseline time, prevention time, baseline energy, prevention energy
        let mut max_collect = 0.0f64;
        for rep in 0..spec.repetitions {
            let seeded = ScenarioConfig {
                seed: cfg.seed + rep,
                ..cfg.clone()
            };
            let cmp = measure_overhead(&seeded.with_prevention(false), &seeded.with_prevention(true))?;
            runs_csv.push_str(&format!("{name},{},{}\n", seeded.seed, cmp.csv_row()));
            max_collect = max_collect.max(cmp.prevention.max_collection_time());
            if let (Some(bt), Some(pt)) = (
                cmp.baseline.rrep_total_time,
                cmp.prevention.rrep_total_time,
            ) {
                paired += 1;
                sums[0] += bt;
                sums[1] += pt;
                sums[2] += cmp.baseline.energy.total();
                sums[3] += cmp.prevention.energy.total();
            }
        }
        let mean = |total: f64| {
            if paired == 0 {
                String::new()
            } else {
                format!("{}", total / paired as f64)
            }
        };
        summary_csv.push_str(&format!(
            "{name},{},{paired},{},{},{},{},{max_collect}\n",
            spec.repetitions,
            mean(sums[0]),
            mean(sums[1]),
            mean(sums[2]),
            mean(sums[3]),
        ));
    }

    let runs_path = crate::write_out(out_dir, "sweep_runs.csv", &runs_csv)?;
    let summary_path = crate::write_out(out_dir, "sweep_summary.csv", &summary_csv)?;
    print!("{summary_csv}");
    println!("runs               {}", runs_path.display());
    println!("summary            {}", summary_path.display());
    Ok(ExitCode::SUCCESS)
}
