use std::collections::BTreeMap;

use crate::exploration::{choose_waypoint, ExplorationError};
use crate::mapping::{MappingError, OccupancyGrid, SensorModel, Thresholds};
use crate::network::{append_sensed_log, SensedLog, StateBroadcast};
use crate::world::{Pose, Scan};
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NavMode {
    GoToGoal,
    AvoidContour,
    Idle,
}

/// Bookkeeping while circling an obstacle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourState {
    /// Obstacle kept on the right while turning left, and vice versa.
    pub turn_left: bool,
    pub entry_distance: f64,
    pub entry_waypoint: Vec2,
    pub entry_tick: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnownNeighbor {
    pub position: Vec2,
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: u32,
    pub floor_id: u32,
    pub true_pose: Pose,
    pub estimated_pose: Pose,
    pub grid: OccupancyGrid,
    pub sensed_log: SensedLog,
    pub waypoint: Option<Vec2>,
    pub nav_mode: NavMode,
    pub alive: bool,
    pub speed_limit: f64,
    /// Last broadcast position of each same-floor neighbor.
    pub neighbors: BTreeMap<u32, KnownNeighbor>,
    pub contour: Option<ContourState>,
    /// Motion was cut short by geometry on the previous tick.
    pub blocked: bool,
    pub mapping_errors: Vec<MappingError>,
}

impl AgentState {
    pub fn new(id: u32, floor_id: u32, pose: Pose, grid: OccupancyGrid, speed_limit: f64) -> Self {
        Self {
            id,
            floor_id,
            true_pose: pose,
            estimated_pose: pose,
            grid,
            sensed_log: SensedLog::new(),
            waypoint: None,
            nav_mode: NavMode::GoToGoal,
            alive: true,
            speed_limit,
            neighbors: BTreeMap::new(),
            contour: None,
            blocked: false,
            mapping_errors: Vec::new(),
        }
    }

    pub fn neighbor_positions(&self) -> Vec<Vec2> {
        self.neighbors.values().map(|n| n.position).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub tick: u64,
    pub model: &'a SensorModel,
    pub thresholds: &'a Thresholds,
    pub r0: f64,
    /// Neighbor positions older than this many ticks are forgotten.
    pub stale_ticks: u64,
}

/// One pass of the collective mapping loop: integrate the agent's own scan,
/// then every scan heard from connected neighbors, then pick a new waypoint.
/// Returns flat indices of grid cells touched for the first time.
pub fn collective_mapping_step(
    agent: &mut AgentState,
    own_scan: Option<&Scan>,
    inbox: &[StateBroadcast],
    ctx: &StepContext<'_>,
) -> Result<Vec<usize>, ExplorationError> {
    let mut fresh = Vec::new();
    if let Some(scan) = own_scan {
        match agent.grid.update(scan, ctx.model) {
            Ok(mut f) => fresh.append(&mut f),
            Err(e) => agent.mapping_errors.push(e),
        }
    }
    // scans from other floors are logged but do not belong on this grid
    let same_floor = inbox.iter().filter(|b| b.scan.floor_id == agent.floor_id);
    let (mut f, mut errors) = agent.grid.fuse(same_floor.map(|b| &b.scan), ctx.model);
    fresh.append(&mut f);
    agent.mapping_errors.append(&mut errors);
    append_sensed_log(&mut agent.sensed_log, own_scan, inbox);

    for b in inbox.iter().filter(|b| b.scan.floor_id == agent.floor_id) {
        agent.neighbors.insert(
            b.sender,
            KnownNeighbor {
                position: b.pose.position(),
                tick: b.tick,
            },
        );
    }
    agent
        .neighbors
        .retain(|_, n| ctx.tick.saturating_sub(n.tick) <= ctx.stale_ticks);

    let neighbors = agent.neighbor_positions();
    agent.waypoint = choose_waypoint(
        &agent.grid,
        ctx.thresholds,
        agent.estimated_pose.position(),
        &neighbors,
        ctx.r0,
    )?;
    match (agent.waypoint, agent.nav_mode) {
        (None, _) => {
            agent.nav_mode = NavMode::Idle;
            agent.contour = None;
        }
        (Some(_), NavMode::Idle) => agent.nav_mode = NavMode::GoToGoal,
        _ => {}
    }
    Ok(fresh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::{CellIndex, DEFAULT_RESOLUTION};
    use crate::world::WorldModel;

    fn ctx<'a>(model: &'a SensorModel, thresholds: &'a Thresholds) -> StepContext<'a> {
        StepContext {
            tick: 1,
            model,
            thresholds,
            r0: 1.0,
            stale_ticks: 10,
        }
    }

    fn agent_at(x: f64, y: f64) -> AgentState {
        let grid = OccupancyGrid::new(0, 6.0, 6.0, DEFAULT_RESOLUTION);
        AgentState::new(0, 0, Pose::new(x, y, 0.0), grid, 0.3)
    }

    #[test]
    fn first_scan_yields_a_waypoint() {
        let world = WorldModel::open(0, 6.0, 6.0).unwrap();
        let mut a = agent_at(3.0, 3.0);
        let mut scan = world.cast_scan(&a.true_pose, 8, 2.0).unwrap();
        scan.timestamp = 1;
        let (m, t) = (SensorModel::default(), Thresholds::default());
        collective_mapping_step(&mut a, Some(&scan), &[], &ctx(&m, &t)).unwrap();
        assert!(a.waypoint.is_some());
        assert_eq!(a.nav_mode, NavMode::GoToGoal);
        assert_eq!(a.sensed_log.len(), 1);
    }

    #[test]
    fn neighbor_scan_maps_unvisited_region() {
        let world = WorldModel::open(0, 6.0, 6.0).unwrap();
        let mut a = agent_at(1.0, 1.0);
        let mut far = world.cast_scan(&Pose::new(5.0, 5.0, 0.3), 8, 2.0).unwrap();
        far.source_agent = 4;
        far.timestamp = 1;
        let msg = StateBroadcast {
            sender: 4,
            tick: 1,
            pose: far.origin,
            scan: far.clone(),
            waypoint: None,
        };
        let (m, t) = (SensorModel::default(), Thresholds::default());
        collective_mapping_step(&mut a, None, std::slice::from_ref(&msg), &ctx(&m, &t)).unwrap();
        let mut oracle = OccupancyGrid::new(0, 6.0, 6.0, DEFAULT_RESOLUTION);
        oracle.update(&far, &m).unwrap();
        assert_eq!(a.grid, oracle);
        let on_beam = Vec2::new(5.0, 5.0) + Vec2::new(0.3f64.cos(), 0.3f64.sin()) * 0.5;
        assert!(a.grid.is_touched(a.grid.cell_of(on_beam).unwrap()).unwrap());
        assert_eq!(a.neighbors[&4].position, Vec2::new(5.0, 5.0));
    }

    #[test]
    fn mapped_closed_room_goes_idle() {
        let mut a = agent_at(3.0, 3.0);
        for r in 0..a.grid.rows() {
            for c in 0..a.grid.cols() {
                a.grid.set_log_odds(CellIndex::new(r, c), -3.0).unwrap();
            }
        }
        let (m, t) = (SensorModel::default(), Thresholds::default());
        collective_mapping_step(&mut a, None, &[], &ctx(&m, &t)).unwrap();
        assert_eq!(a.waypoint, None);
        assert_eq!(a.nav_mode, NavMode::Idle);
    }

    #[test]
    fn stale_neighbors_are_dropped() {
        let mut a = agent_at(3.0, 3.0);
        a.neighbors.insert(9, KnownNeighbor { position: Vec2::new(1.0, 1.0), tick: 1 });
        let (m, t) = (SensorModel::default(), Thresholds::default());
        let mut c = ctx(&m, &t);
        c.tick = 11;
        collective_mapping_step(&mut a, None, &[], &c).unwrap();
        assert!(a.neighbors.contains_key(&9));
        c.tick = 12;
        collective_mapping_step(&mut a, None, &[], &c).unwrap();
        assert!(a.neighbors.is_empty());
    }
}
