//! Exploration progress measured from a trace: explored-cell counts over
//! time, their rate of change, and the two time-constant estimates.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::engine::{EventKind, ScenarioScript, SimulationTrace};
use crate::mapping::OccupancyGrid;
use crate::world::WorldModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("need at least 3 samples strictly inside the fitting band")]
    InsufficientData,
    #[error("log-linear fit has non-negative slope {0}")]
    NonNegativeSlope(f64),
    #[error("smoothing window {window_s} s spans fewer than 2 samples")]
    WindowTooSmall { window_s: f64 },
    #[error("asymptote {ce_inf} is below the observed maximum {observed}")]
    AsymptoteTooSmall { ce_inf: u64, observed: u64 },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsSeries {
    pub times: Vec<f64>,
    pub global_ce: Vec<u64>,
    /// Column order of `per_agent_ce`.
    pub agent_ids: Vec<u32>,
    /// One row per sample; agents not yet spawned count zero.
    pub per_agent_ce: Vec<Vec<u64>>,
    pub alive_count: Vec<usize>,
}

impl MetricsSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_ce(&self) -> u64 {
        self.global_ce.last().copied().unwrap_or(0)
    }

    /// Explored count at time `t`, linearly interpolated; zero before the
    /// first sample and held after the last.
    pub fn value_at(&self, t: f64) -> f64 {
        let i = self.times.partition_point(|&x| x < t);
        if i == self.times.len() {
            return self.final_ce() as f64;
        }
        let (t1, c1) = (self.times[i], self.global_ce[i] as f64);
        let (t0, c0) = if i == 0 {
            (0.0, 0.0)
        } else {
            (self.times[i - 1], self.global_ce[i - 1] as f64)
        };
        if t1 == t0 {
            return c1;
        }
        c0 + (c1 - c0) * (t - t0) / (t1 - t0)
    }

    /// Mean growth rate over `(t0, t1]`, cells per second.
    pub fn mean_rate(&self, t0: f64, t1: f64) -> f64 {
        (self.value_at(t1) - self.value_at(t0)) / (t1 - t0)
    }
}

/// Builds the series from a trace. The global count is recomputed here from
/// each agent's newly touched cells rather than read from the trace, so it
/// doubles as an independent check on the simulator's bookkeeping.
pub fn compute_metrics(trace: &SimulationTrace) -> MetricsSeries {
    let agent_ids: Vec<u32> = trace
        .ticks
        .iter()
        .flat_map(|t| t.agents.iter().map(|a| a.id))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut union: BTreeSet<(u32, usize)> = BTreeSet::new();
    let mut s = MetricsSeries {
        agent_ids: agent_ids.clone(),
        ..Default::default()
    };
    for t in &trace.ticks {
        let mut row = vec![0; agent_ids.len()];
        for a in &t.agents {
            union.extend(a.fresh_cells.iter().map(|&c| (a.floor, c)));
            let col = agent_ids.binary_search(&a.id).expect("known agent");
            row[col] = a.explored as u64;
        }
        s.times.push(t.time_s);
        s.global_ce.push(union.len() as u64);
        s.per_agent_ce.push(row);
        s.alive_count.push(t.alive_count());
    }
    s
}

/// Fits `C(t) = C_inf (1 - exp(-t / tau))` by least squares on
/// `ln(1 - C/C_inf)` against `t`, using samples with `C/C_inf` in
/// (0.02, 0.98).
pub fn fit_tau_method1(series: &MetricsSeries, ce_inf: u64) -> Result<f64, MetricsError> {
    let observed = series.global_ce.iter().copied().max().unwrap_or(0);
    if ce_inf < observed {
        return Err(MetricsError::AsymptoteTooSmall { ce_inf, observed });
    }
    let pts: Vec<(f64, f64)> = series
        .times
        .iter()
        .zip(&series.global_ce)
        .filter_map(|(&t, &c)| {
            let frac = c as f64 / ce_inf as f64;
            (frac > 0.02 && frac < 0.98).then(|| (t, (1.0 - frac).ln()))
        })
        .collect();
    if pts.len() < 3 {
        return Err(MetricsError::InsufficientData);
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let flat = pts.iter().all(|p| p.1 == pts[0].1);
    if sxx == 0.0 || flat {
        return Err(MetricsError::InsufficientData);
    }
    let slope = sxy / sxx;
    if slope >= 0.0 {
        return Err(MetricsError::NonNegativeSlope(slope));
    }
    Ok(-1.0 / slope)
}

/// First time the global count reaches `threshold`, interpolated between
/// the bracketing samples. `None` if it never does.
pub fn time_to_threshold(series: &MetricsSeries, threshold: u64) -> Option<f64> {
    let i = series.global_ce.iter().position(|&c| c >= threshold)?;
    if i == 0 {
        return Some(series.times[0]);
    }
    let (t0, c0) = (series.times[i - 1], series.global_ce[i - 1] as f64);
    let (t1, c1) = (series.times[i], series.global_ce[i] as f64);
    Some(t0 + (t1 - t0) * (threshold as f64 - c0) / (c1 - c0))
}

/// Centered finite difference of the global count, smoothed by a centered
/// moving average spanning `window_s`. Cells per second, one value per
/// sample.
pub fn rate_of_change(series: &MetricsSeries, window_s: f64) -> Result<Vec<f64>, MetricsError> {
    let n = series.len();
    if n < 2 {
        return Ok(vec![0.0; n]);
    }
    let dt = (series.times[n - 1] - series.times[0]) / (n - 1) as f64;
    let w = (window_s / dt).round() as usize;
    if w < 2 {
        return Err(MetricsError::WindowTooSmall { window_s });
    }
    let c = |i: usize| series.global_ce[i] as f64;
    let t = |i: usize| series.times[i];
    let raw: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            (c(b) - c(a)) / (t(b) - t(a))
        })
        .collect();
    let half_lo = (w - 1) / 2;
    let half_hi = w / 2;
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(half_lo);
            let hi = (i + half_hi).min(n - 1);
            raw[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect())
}

/// Cells a sensor can ever touch: cells whose center is free, plus cells
/// whose center is occupied but which border a free-centered cell.
pub fn capacity(world: &WorldModel, resolution: f64) -> u64 {
    let grid = OccupancyGrid::new(0, world.width, world.height, resolution);
    let (rows, cols) = (grid.rows(), grid.cols());
    let free: Vec<bool> = (0..rows * cols)
        .map(|i| !world.is_occupied(grid.cell_center(grid.unflat(i))))
        .collect();
    let mut count = 0;
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            let border = (r > 0 && free[i - cols])
                || (r + 1 < rows && free[i + cols])
                || (c > 0 && free[i - 1])
                || (c + 1 < cols && free[i + 1]);
            if free[i] || border {
                count += 1;
            }
        }
    }
    count
}

/// Capacity summed over floors, measured once every scripted wall removal
/// has happened.
pub fn script_capacity(script: &ScenarioScript) -> u64 {
    script
        .worlds
        .iter()
        .map(|w| {
            let mut w = w.clone();
            for e in &script.events {
                if let EventKind::RemoveWall { wall_id } = &e.kind {
                    if w.has_wall(wall_id) {
                        w.apply_topology_event(wall_id).expect("wall exists");
                    }
                }
            }
            capacity(&w, script.params.resolution)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::DEFAULT_RESOLUTION;
    use crate::world::{ConvexPolygon, Wall};
    use crate::Vec2;
    use proptest::prelude::*;

    fn series(values: &[u64], dt: f64) -> MetricsSeries {
        MetricsSeries {
            times: (1..=values.len()).map(|i| i as f64 * dt).collect(),
            global_ce: values.to_vec(),
            ..Default::default()
        }
    }

    fn exponential(ce_inf: f64, tau: f64, dt: f64, duration: f64) -> MetricsSeries {
        let n = (duration / dt).round() as usize;
        let v: Vec<u64> = (1..=n)
            .map(|i| (ce_inf * (1.0 - (-(i as f64 * dt) / tau).exp())).round() as u64)
            .collect();
        series(&v, dt)
    }

    #[test]
    fn recovers_tau_from_synthetic_exponentials() {
        for tau in [10.0, 30.0, 90.0] {
            let s = exponential(10000.0, tau, 0.2, 8.0 * tau);
            let fit = fit_tau_method1(&s, 10000).unwrap();
            assert!((fit - tau).abs() / tau <= 0.01, "tau {tau} fit {fit}");
        }
    }

    #[test]
    fn constant_series_has_no_fit() {
        let s = series(&[500; 50], 0.2);
        assert_eq!(fit_tau_method1(&s, 1000), Err(MetricsError::InsufficientData));
    }

    #[test]
    fn decreasing_series_fits_a_nonnegative_slope() {
        let s = series(&[900, 700, 500, 300, 100], 1.0);
        assert!(matches!(fit_tau_method1(&s, 1000), Err(MetricsError::NonNegativeSlope(_))));
    }

    #[test]
    fn threshold_interpolates_between_samples() {
        let s = MetricsSeries {
            times: vec![49.8, 50.0, 50.2, 50.4],
            global_ce: vec![7800, 7900, 8100, 8300],
            ..Default::default()
        };
        assert!((time_to_threshold(&s, 8000).unwrap() - 50.1).abs() < 1e-9);
        assert_eq!(time_to_threshold(&s, 1), Some(49.8));
        assert_eq!(time_to_threshold(&s, 9000), None);
    }

    #[test]
    fn method_two_agrees_with_method_one_on_exponentials() {
        for tau in [10.0, 30.0, 90.0] {
            let s = exponential(10000.0, tau, 0.2, 8.0 * tau);
            let t = time_to_threshold(&s, 6000).unwrap();
            let expected = -tau * 0.4f64.ln();
            assert!((t - expected).abs() / expected <= 0.01);
        }
    }

    #[test]
    fn linear_series_has_constant_rate() {
        let v: Vec<u64> = (1..=200).map(|i| 20 * i).collect();
        let rate = rate_of_change(&series(&v, 0.2), 2.0).unwrap();
        assert!(rate.iter().all(|r| (r - 100.0).abs() <= 1.0));
        let flat = rate_of_change(&series(&[42; 30], 0.2), 1.0).unwrap();
        assert!(flat.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn step_rate_is_smeared_around_the_step() {
        let v: Vec<u64> = (0..40).map(|i| if i < 20 { 0 } else { 100 }).collect();
        let rate = rate_of_change(&series(&v, 1.0), 3.0).unwrap();
        // raw differences are 50 at samples 19 and 20; a 3-wide box spreads
        // each over its neighbours
        let expected: Vec<f64> = (0..40)
            .map(|i| match i {
                18 | 21 => 50.0 / 3.0,
                19 | 20 => 100.0 / 3.0,
                _ => 0.0,
            })
            .collect();
        for (r, e) in rate.iter().zip(&expected) {
            assert!((r - e).abs() < 1e-9);
        }
        assert!(matches!(
            rate_of_change(&series(&v, 1.0), 1.0),
            Err(MetricsError::WindowTooSmall { .. })
        ));
    }

    #[test]
    fn value_at_interpolates_from_the_origin() {
        let s = series(&[10, 30], 1.0);
        assert_eq!(s.value_at(0.5), 5.0);
        assert_eq!(s.value_at(1.5), 20.0);
        assert_eq!(s.value_at(9.0), 30.0);
        assert_eq!(s.mean_rate(1.0, 2.0), 20.0);
    }

    #[test]
    fn open_world_capacity_is_every_cell() {
        let w = WorldModel::open(0, 10.0, 6.0).unwrap();
        assert_eq!(capacity(&w, DEFAULT_RESOLUTION), 150 * 90);
    }

    #[test]
    fn capacity_excludes_obstacle_interiors() {
        // 1 m square on a 0.25 m lattice: 4x4 interior cells, the outer
        // ring of 12 borders free space
        let square = ConvexPolygon::new(vec![
            Vec2::new(1.0, 1.0),
            Vec2::new(2.0, 1.0),
            Vec2::new(2.0, 2.0),
            Vec2::new(1.0, 2.0),
        ])
        .unwrap();
        let w = WorldModel::new(0, 3.0, 3.0, vec![square], vec![]).unwrap();
        assert_eq!(capacity(&w, 0.25), 144 - 4);
    }

    #[test]
    fn removed_walls_count_toward_script_capacity() {
        use crate::engine::{Params, ScenarioEvent};
        let wall = Wall {
            id: "w".into(),
            start: Vec2::new(1.5, 0.0),
            end: Vec2::new(1.5, 3.0),
            thickness: 1.2,
            present: true,
        };
        let w = WorldModel::new(0, 3.0, 3.0, vec![], vec![wall]).unwrap();
        let mut script = ScenarioScript {
            worlds: vec![w.clone()],
            agents: vec![],
            relays: vec![],
            events: vec![],
            params: Params { resolution: 0.25, duration_s: 10.0, ..Params::default() },
        };
        assert!(script_capacity(&script) < 144);
        script.events.push(ScenarioEvent { time: 1.0, kind: EventKind::RemoveWall { wall_id: "w".into() } });
        assert_eq!(script_capacity(&script), 144);
    }

    proptest! {
        #[test]
        fn rate_of_monotone_series_is_nonnegative(steps in prop::collection::vec(0u64..50, 10..80), w in 2usize..6) {
            let v: Vec<u64> = steps.iter().scan(0, |acc, s| { *acc += s; Some(*acc) }).collect();
            let rate = rate_of_change(&series(&v, 0.2), w as f64 * 0.2).unwrap();
            prop_assert!(rate.iter().all(|&r| r >= 0.0));
        }

        #[test]
        fn threshold_time_lies_within_the_series(steps in prop::collection::vec(1u64..50, 2..60), frac in 0.0f64..1.0) {
            let v: Vec<u64> = steps.iter().scan(0, |acc, s| { *acc += s; Some(*acc) }).collect();
            let s = series(&v, 0.2);
            let threshold = 1 + (frac * (*v.last().unwrap() - 1) as f64) as u64;
            let t = time_to_threshold(&s, threshold).unwrap();
            prop_assert!(t >= s.times[0] - 1e-12 && t <= *s.times.last().unwrap() + 1e-12);
            prop_assert!(s.value_at(t) >= threshold as f64 - 1e-6 || t == s.times[0]);
        }
    }
}
