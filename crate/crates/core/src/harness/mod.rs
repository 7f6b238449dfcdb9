//! Measurement and experiment plumbing: metrics over traces, the canned
//! experiment presets, and file export.

pub mod export;
pub mod metrics;
pub mod presets;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::engine::{run_scenario, EngineError, ScenarioScript, SimulationTrace};
pub use export::{connectivity_csv, parse_run_csv, pgm, run_csv, write_atomic, CSV_HEADER};
pub use metrics::{
    capacity, compute_metrics, fit_tau_method1, rate_of_change, script_capacity, time_to_threshold,
    MetricsError, MetricsSeries,
};
pub use presets::{ExperimentPreset, PresetName, RunSpec, METHOD2_THRESHOLD};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
}

/// Asymptote for the exponential fit: the world's capacity, raised if the
/// run somehow touched more.
pub fn default_ce_inf(series: &MetricsSeries, capacity: Option<u64>) -> u64 {
    let observed = series.global_ce.iter().copied().max().unwrap_or(0);
    capacity.unwrap_or(0).max(observed + 1)
}

/// Everything produced by one scenario run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub trace: SimulationTrace,
    pub series: MetricsSeries,
    pub capacity: u64,
}

/// Runs a script and measures it.
pub fn run_and_measure(script: &ScenarioScript) -> Result<RunArtifacts, HarnessError> {
    let trace = run_scenario(script)?;
    let series = compute_metrics(&trace);
    Ok(RunArtifacts {
        trace,
        series,
        capacity: script_capacity(script),
    })
}

/// Writes `<stem>.csv` and `<stem>_a<id>.pgm` for every agent into `dir`.
/// Returns the CSV path.
pub fn write_run(dir: &Path, stem: &str, run: &RunArtifacts) -> Result<PathBuf, HarnessError> {
    let csv = dir.join(format!("{stem}.csv"));
    write_atomic(&csv, run_csv(&run.series, Some(run.capacity)).as_bytes())?;
    for agent in &run.trace.final_agents {
        write_atomic(&dir.join(format!("{stem}_a{}.pgm", agent.id)), &pgm(&agent.grid))?;
    }
    Ok(csv)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub group: String,
    pub runs: usize,
    /// Method-1 time constants of the runs whose fit succeeded.
    pub tau1: Vec<f64>,
    /// Method-2 threshold times of the runs that reached the threshold.
    pub t2: Vec<f64>,
}

fn mean_std(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = (v.len() > 1)
        .then(|| (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(mean), std)
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.3}"))
}

impl SummaryRow {
    pub fn tau1_mean_std(&self) -> (Option<f64>, Option<f64>) {
        mean_std(&self.tau1)
    }

    pub fn t2_mean_std(&self) -> (Option<f64>, Option<f64>) {
        mean_std(&self.t2)
    }
}

/// Aggregates per-run CSV files by group. Reads only the files, so the
/// summary can always be recomputed from what was written.
pub fn summarize(groups: &[(String, Vec<PathBuf>)], threshold: u64) -> Result<Vec<SummaryRow>, HarnessError> {
    groups
        .iter()
        .map(|(group, paths)| {
            let mut row = SummaryRow {
                group: group.clone(),
                runs: paths.len(),
                tau1: vec![],
                t2: vec![],
            };
            for p in paths {
                let (series, cap) = parse_run_csv(&fs::read_to_string(p)?)?;
                if let Ok(tau) = fit_tau_method1(&series, default_ce_inf(&series, cap)) {
                    row.tau1.push(tau);
                }
                if let Some(t) = time_to_threshold(&series, threshold) {
                    row.t2.push(t);
                }
            }
            Ok(row)
        })
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow], threshold: u64) -> String {
    let mut out = format!(
        "{CSV_HEADER}\n# method2 threshold {threshold}\n\
         group,runs,tau1_fits,tau1_mean_s,tau1_std_s,t2_reached,t2_mean_s,t2_std_s\n"
    );
    for r in rows {
        let (tm, ts) = r.tau1_mean_std();
        let (m2, s2) = r.t2_mean_std();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.group,
            r.runs,
            r.tau1.len(),
            cell(tm),
            cell(ts),
            r.t2.len(),
            cell(m2),
            cell(s2)
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone)]
pub struct PresetReport {
    pub summary: Vec<SummaryRow>,
    pub summary_path: PathBuf,
    /// Label and CSV path of every run, in preset order.
    pub runs: Vec<(String, PathBuf)>,
}

/// Runs every script of the preset (in parallel), writes per-run CSVs and
/// final maps, then `summary.csv` recomputed from those CSVs.
pub fn run_preset(preset: &ExperimentPreset, out_dir: &Path) -> Result<PresetReport, HarnessError> {
    fs::create_dir_all(out_dir)?;
    let runs: Vec<(String, String, PathBuf)> = preset
        .runs
        .par_iter()
        .map(|spec| {
            let run = run_and_measure(&spec.script)?;
            let path = write_run(out_dir, &spec.label, &run)?;
            Ok((spec.group.clone(), spec.label.clone(), path))
        })
        .collect::<Result<_, HarnessError>>()?;
    let mut groups: Vec<(String, Vec<PathBuf>)> = Vec::new();
    for (group, _, path) in &runs {
        match groups.iter_mut().find(|(g, _)| g == group) {
            Some((_, v)) => v.push(path.clone()),
            None => groups.push((group.clone(), vec![path.clone()])),
        }
    }
    let summary = summarize(&groups, METHOD2_THRESHOLD)?;
    let summary_path = out_dir.join("summary.csv");
    write_atomic(&summary_path, summary_csv(&summary, METHOD2_THRESHOLD).as_bytes())?;
    Ok(PresetReport {
        summary,
        summary_path,
        runs: runs.into_iter().map(|(_, l, p)| (l, p)).collect(),
    })
}
