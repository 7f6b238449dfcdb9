//! Both time-constant estimates on a synthetic exponential series.

use swarm_gridmapper::harness::{fit_tau_method1, time_to_threshold, MetricsSeries};

fn main() {
    let (ce_inf, tau, dt) = (10_000.0, 30.0, 0.2);
    let times: Vec<f64> = (1..=1500).map(|i| i as f64 * dt).collect();
    let series = MetricsSeries {
        global_ce: times.iter().map(|t| (ce_inf * (1.0 - (-t / tau).exp())).round() as u64).collect(),
        alive_count: vec![1; times.len()],
        per_agent_ce: vec![vec![]; times.len()],
        agent_ids: vec![],
        times,
    };
    let fit = fit_tau_method1(&series, ce_inf as u64).unwrap();
    let t60 = time_to_threshold(&series, 6000).unwrap();
    println!("true tau {tau} s, fitted {fit:.3} s");
    println!("time to 60%: {t60:.3} s (closed form {:.3} s)", -tau * 0.4f64.ln());
}
