//! Load a scenario file, run it and print explored cells every 10 s.
//!
//! cargo run --example run_scenario_file -- crates/core/scenarios/cluttered_room.toml

use std::path::PathBuf;

use swarm_gridmapper::engine::{ScenarioScript, SimOptions, Simulation};

fn main() {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/cluttered_room.toml"));
    let script = match ScenarioScript::load(&path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            std::process::exit(1);
        }
    };
    let every = (10.0 / script.params.tick_s).round() as u64;
    let mut sim = Simulation::new(script, SimOptions { parallel: true, ..Default::default() }).unwrap();
    while let Some(rec) = sim.step().unwrap() {
        for e in &rec.events {
            println!("t={:>6.1}s  event {e:?}", rec.time_s);
        }
        if rec.tick % every == 0 {
            println!("t={:>6.1}s  alive {}  explored {}", rec.time_s, rec.alive_count(), rec.global_explored);
        }
    }
}
