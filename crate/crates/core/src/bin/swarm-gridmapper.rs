use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use swarm_gridmapper::engine::ScenarioScript;
use swarm_gridmapper::harness::{
    self, connectivity_csv, default_ce_inf, fit_tau_method1, parse_run_csv, time_to_threshold,
    write_atomic, ExperimentPreset, HarnessError, PresetName, METHOD2_THRESHOLD,
};

#[derive(Parser)]
#[command(version, about = "Decentralized swarm exploration simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run {
        scenario: PathBuf,
        /// Override the scenario's root seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write the per-tick link table.
        #[arg(long)]
        trace_connectivity: bool,
    },
    /// Run one of the canned experiments.
    Preset {
        name: PresetName,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// First seed; repeat k uses seed + k.
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Fit the exploration time constant of a run CSV.
    Fit {
        csv: PathBuf,
        /// Asymptotic cell count; defaults to the capacity recorded in the file.
        #[arg(long)]
        ce_inf: Option<u64>,
    },
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run {
            scenario,
            seed,
            out,
            trace_connectivity,
        } => {
            let mut script = ScenarioScript::load(&scenario)?;
            if let Some(s) = seed {
                script.params.seed = s;
            }
            fs::create_dir_all(&out)?;
            let stem = scenario
                .file_stem()
                .map_or_else(|| "run".to_string(), |s| s.to_string_lossy().into_owned());
            let run = harness::run_and_measure(&script)?;
            let csv = harness::write_run(&out, &stem, &run)?;
            if trace_connectivity {
                let path = out.join(format!("{stem}_connectivity.csv"));
                write_atomic(&path, connectivity_csv(&run.trace).as_bytes())?;
            }
            println!(
                "{} ticks, {} of {} cells explored, wrote {}",
                run.series.len(),
                run.series.final_ce(),
                run.capacity,
                csv.display()
            );
        }
        Command::Preset {
            name,
            repeats,
            out,
            seed,
        } => {
            let preset = ExperimentPreset::build(name, repeats, seed);
            let report = harness::run_preset(&preset, &out)?;
            print!("{}", fs::read_to_string(&report.summary_path)?);
        }
        Command::Fit { csv, ce_inf } => {
            let (series, cap) = parse_run_csv(&fs::read_to_string(&csv)?)?;
            let ce_inf = ce_inf.unwrap_or_else(|| default_ce_inf(&series, cap));
            let tau = fit_tau_method1(&series, ce_inf)?;
            println!("ce_inf = {ce_inf}");
            println!("tau = {tau:.3} s");
            match time_to_threshold(&series, METHOD2_THRESHOLD) {
                Some(t) => println!("t({METHOD2_THRESHOLD} cells) = {t:.3} s"),
                None => println!("t({METHOD2_THRESHOLD} cells) = not reached"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
