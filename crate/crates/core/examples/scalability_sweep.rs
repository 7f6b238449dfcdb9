//! Team-size sweep in the 60 m2 room: time constant and time to 60% of
//! capacity for N = 1, 2, 4, 6, 8, averaged over a few seeds.

use rayon::prelude::*;
use swarm_gridmapper::harness::presets::{scalability_script, SCALABILITY_SIZES};
use swarm_gridmapper::harness::{default_ce_inf, fit_tau_method1, run_and_measure, time_to_threshold};

fn main() {
    let seeds: Vec<u64> = (42..45).collect();
    println!("   N   tau [s]   t60% [s]");
    for n in SCALABILITY_SIZES {
        let runs: Vec<(f64, f64)> = seeds
            .par_iter()
            .map(|&seed| {
                let run = run_and_measure(&scalability_script(n, seed)).unwrap();
                let tau = fit_tau_method1(&run.series, default_ce_inf(&run.series, Some(run.capacity))).unwrap();
                let t60 = time_to_threshold(&run.series, (0.6 * run.capacity as f64) as u64).unwrap();
                (tau, t60)
            })
            .collect();
        let k = runs.len() as f64;
        let tau = runs.iter().map(|r| r.0).sum::<f64>() / k;
        let t60 = runs.iter().map(|r| r.1).sum::<f64>() / k;
        println!("{n:>4}   {tau:>7.1}   {t60:>8.1}");
    }
}
