//! Corridor whose middle room opens at 30 s: exploration stalls, then
//! jumps once the walls are gone.

use swarm_gridmapper::harness::presets::flexibility_script;
use swarm_gridmapper::harness::run_and_measure;

fn main() {
    let run = run_and_measure(&flexibility_script(42)).unwrap();
    let s = &run.series;
    for (a, b) in [(0.0, 10.0), (10.0, 20.0), (20.0, 30.0), (30.0, 40.0), (40.0, 50.0), (50.0, 60.0)] {
        println!("({a:>2}, {b:>2}] s  {:>6.1} cells/s", s.mean_rate(a, b));
    }
    let first_in = run
        .trace
        .ticks
        .iter()
        .find(|t| t.agents.iter().any(|a| a.pose.x > 3.05 && a.pose.x < 5.95))
        .map(|t| t.time_s);
    println!("first agent in the middle room at {first_in:?} s");
    println!("explored {} of {} cells", s.final_ce(), run.capacity);
}
