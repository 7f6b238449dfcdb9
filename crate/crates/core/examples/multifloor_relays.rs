//! Twelve agents on two floors. Without relays the floors never hear each
//! other; with a wired relay pair at the stairwell they do.

use swarm_gridmapper::engine::run_scenario;
use swarm_gridmapper::harness::presets::multifloor_script;

fn main() {
    for relays in [false, true] {
        let script = multifloor_script(42, relays);
        let trace = run_scenario(&script).unwrap();
        let floor_of = |id: u32| script.agents.iter().find(|a| a.id == id).unwrap().floor;
        let cross = |a: &swarm_gridmapper::engine::AgentState| {
            a.sensed_log.iter().filter(|k| floor_of(k.source) != a.floor_id).count()
        };
        let first = trace.final_agents.iter().filter_map(|a| {
            a.sensed_log
                .iter()
                .filter(|k| floor_of(k.source) != a.floor_id)
                .map(|k| k.tick)
                .min()
        });
        let total: usize = trace.final_agents.iter().map(cross).sum();
        println!(
            "relays {relays:>5}: {total} cross-floor scans held, earliest at tick {:?}",
            first.min()
        );
        let last = trace.ticks.last().unwrap();
        let per_floor = |f: u32| -> usize {
            last.agents.iter().filter(|a| a.floor == f).map(|a| a.explored).max().unwrap_or(0)
        };
        println!("  best map per floor: ground {} cells, upper {} cells", per_floor(0), per_floor(1));
    }
}
