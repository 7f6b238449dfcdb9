//! Four agents, two switched off at 20 s, two fresh ones injected at
//! 120 s. Prints the smoothed exploration rate every 5 s.

use swarm_gridmapper::harness::presets::robustness_script;
use swarm_gridmapper::harness::{rate_of_change, run_and_measure};

fn main() {
    let run = run_and_measure(&robustness_script(42)).unwrap();
    let s = &run.series;
    let rate = rate_of_change(s, 10.0).unwrap();
    println!("  t [s]  alive  explored  rate [cells/s]");
    for i in (24..s.len()).step_by(25) {
        println!("{:>7.0}  {:>5}  {:>8}  {:>10.1}", s.times[i], s.alive_count[i], s.global_ce[i], rate[i]);
    }
    println!(
        "mean rate: 4 agents {:.1}, 2 agents {:.1}, after injection {:.1}",
        s.mean_rate(0.0, 20.0),
        s.mean_rate(20.0, 120.0),
        s.mean_rate(120.0, 160.0)
    );
}
