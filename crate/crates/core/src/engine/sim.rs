//! The synchronous tick loop. Each tick runs a fixed phase order: scripted
//! events, sensing, connectivity and broadcast exchange, collective mapping,
//! navigation and motion, then recording.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::agent::{collective_mapping_step, AgentState, NavMode, StepContext};
use super::navigation::{integrate_motion, navigate, MotionCommand, NavParams};
use super::scenario::{EventKind, ScenarioEvent, ScenarioScript};
use super::EngineError;
use crate::mapping::OccupancyGrid;
use crate::network::{
    compute_connectivity, deliver_broadcasts, ConnectivitySnapshot, NodeId, NodePlacement,
    StateBroadcast,
};
use crate::world::{Pose, Scan, WorldModel};
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SimOptions {
    /// Evaluate per-agent phases on the rayon pool.
    pub parallel: bool,
    /// Visit agents in descending id order within each phase.
    pub reverse_order: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentRecord {
    pub id: u32,
    pub floor: u32,
    pub pose: Pose,
    pub estimated_pose: Pose,
    pub waypoint: Option<Vec2>,
    pub alive: bool,
    pub nav_mode: NavMode,
    /// Cells this agent has ever touched.
    pub explored: usize,
    /// Flat indices touched for the first time this tick.
    pub fresh_cells: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub tick: u64,
    pub time_s: f64,
    pub agents: Vec<AgentRecord>,
    pub global_explored: usize,
    pub connectivity: ConnectivitySnapshot,
    pub events: Vec<EventKind>,
}

impl TickRecord {
    pub fn alive_count(&self) -> usize {
        self.agents.iter().filter(|a| a.alive).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub tick_s: f64,
    pub ticks: Vec<TickRecord>,
    /// Agent states after the last tick, ordered by id.
    pub final_agents: Vec<AgentState>,
}

struct Slot {
    agent: AgentState,
    rng: ChaCha8Rng,
}

pub struct Simulation {
    script: ScenarioScript,
    options: SimOptions,
    worlds: BTreeMap<u32, WorldModel>,
    slots: Vec<Slot>,
    events: Vec<ScenarioEvent>,
    next_event: usize,
    network_rng: ChaCha8Rng,
    explored_union: BTreeMap<u32, Vec<bool>>,
    global_explored: usize,
    tick: u64,
    nav: NavParams,
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs `f` on every slot, honoring the visiting options, and returns the
/// results keyed by agent id.
fn each_slot<T, F>(slots: &mut [Slot], options: SimOptions, f: F) -> Result<BTreeMap<u32, T>, EngineError>
where
    T: Send,
    F: Fn(&mut Slot) -> Result<Option<T>, EngineError> + Sync + Send,
{
    let results: Vec<(u32, Result<Option<T>, EngineError>)> = if options.parallel {
        slots.par_iter_mut().map(|s| (s.agent.id, f(s))).collect()
    } else if options.reverse_order {
        slots.iter_mut().rev().map(|s| (s.agent.id, f(s))).collect()
    } else {
        slots.iter_mut().map(|s| (s.agent.id, f(s))).collect()
    };
    let mut out = BTreeMap::new();
    for (id, r) in results {
        if let Some(v) = r? {
            out.insert(id, v);
        }
    }
    Ok(out)
}

impl Simulation {
    pub fn new(script: ScenarioScript, options: SimOptions) -> Result<Self, EngineError> {
        script.validate()?;
        let p = &script.params;
        let worlds: BTreeMap<u32, WorldModel> =
            script.worlds.iter().map(|w| (w.floor_id, w.clone())).collect();
        let explored_union = worlds
            .values()
            .map(|w| {
                let g = OccupancyGrid::new(0, w.width, w.height, p.resolution);
                (w.floor_id, vec![false; g.len()])
            })
            .collect();
        let mut events = script.events.clone();
        events.sort_by(|a, b| a.time.total_cmp(&b.time));
        let mut sim = Self {
            options,
            worlds,
            slots: Vec::new(),
            events,
            next_event: 0,
            network_rng: stream(p.seed, 0),
            explored_union,
            global_explored: 0,
            tick: 0,
            nav: NavParams::new(p.d_safe, p.tick_s),
            script,
        };
        for spawn in sim.script.agents.clone() {
            sim.spawn(spawn.id, spawn.floor, spawn.pose)?;
        }
        Ok(sim)
    }

    fn spawn(&mut self, id: u32, floor: u32, pose: Pose) -> Result<(), EngineError> {
        if self.slots.iter().any(|s| s.agent.id == id) {
            return Err(EngineError::ScriptViolation(format!("agent {id} already exists")));
        }
        let world = self
            .worlds
            .get(&floor)
            .ok_or_else(|| EngineError::ScriptViolation(format!("agent {id} on unknown floor {floor}")))?;
        if world.is_occupied(pose.position()) {
            return Err(EngineError::ScriptViolation(format!(
                "agent {id} placed inside occupied space"
            )));
        }
        let p = &self.script.params;
        let grid = OccupancyGrid::new(id, world.width, world.height, p.resolution);
        let agent = AgentState::new(id, floor, pose, grid, p.speed_limit);
        let rng = stream(p.seed, 1 + u64::from(id));
        let at = self.slots.partition_point(|s| s.agent.id < id);
        self.slots.insert(at, Slot { agent, rng });
        Ok(())
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn is_finished(&self) -> bool {
        self.tick >= self.script.params.tick_count()
    }

    pub fn agents(&self) -> impl Iterator<Item = &AgentState> {
        self.slots.iter().map(|s| &s.agent)
    }

    pub fn world(&self, floor: u32) -> Option<&WorldModel> {
        self.worlds.get(&floor)
    }

    pub fn global_explored(&self) -> usize {
        self.global_explored
    }

    fn apply_events(&mut self, tick: u64) -> Result<Vec<EventKind>, EngineError> {
        let mut applied = Vec::new();
        while let Some(ev) = self.events.get(self.next_event) {
            if self.script.params.tick_of(ev.time) > tick {
                break;
            }
            let ev = ev.clone();
            self.next_event += 1;
            match &ev.kind {
                EventKind::KillAgent { id } => {
                    let slot = self
                        .slots
                        .iter_mut()
                        .find(|s| s.agent.id == *id && s.agent.alive)
                        .ok_or_else(|| EngineError::ScriptViolation(format!("no live agent {id} to kill")))?;
                    slot.agent.alive = false;
                    slot.agent.nav_mode = NavMode::Idle;
                }
                EventKind::InjectAgent { id, floor, pose } => self.spawn(*id, *floor, *pose)?,
                EventKind::RemoveWall { wall_id } => {
                    let world = self
                        .worlds
                        .values_mut()
                        .find(|w| w.has_wall(wall_id))
                        .ok_or_else(|| EngineError::ScriptViolation(format!("unknown wall {wall_id}")))?;
                    world.apply_topology_event(wall_id)?;
                }
            }
            applied.push(ev.kind);
        }
        Ok(applied)
    }

    /// Advances one tick. Returns `None` once the scripted duration is over.
    pub fn step(&mut self) -> Result<Option<TickRecord>, EngineError> {
        if self.is_finished() {
            return Ok(None);
        }
        let tick = self.tick + 1;
        let p = self.script.params.clone();
        let time_s = tick as f64 * p.tick_s;

        // (a) events
        let events = self.apply_events(tick)?;

        // (b) sense, expressed in the agent's own pose estimate
        let worlds = &self.worlds;
        let scans: BTreeMap<u32, Scan> = each_slot(&mut self.slots, self.options, |s| {
            let a = &s.agent;
            if !a.alive {
                return Ok(None);
            }
            let world = &worlds[&a.floor_id];
            let mut scan = world.cast_scan(&a.true_pose, p.beam_count, p.max_range)?;
            let skew = a.estimated_pose.heading - a.true_pose.heading;
            for b in &mut scan.beams {
                b.bearing = crate::world::normalize_angle(b.bearing + skew);
            }
            scan.origin = a.estimated_pose;
            scan.source_agent = a.id;
            scan.floor_id = a.floor_id;
            scan.timestamp = tick;
            Ok(Some(scan))
        })?;

        // (c) connectivity and exchange
        let mut placements: Vec<NodePlacement> = self
            .slots
            .iter()
            .filter(|s| s.agent.alive)
            .map(|s| NodePlacement {
                id: NodeId::Agent(s.agent.id),
                position: s.agent.true_pose.position(),
                floor: s.agent.floor_id,
            })
            .collect();
        placements.extend(
            self.script
                .relays
                .iter()
                .filter(|r| p.tick_of(r.appear_time) <= tick)
                .map(|r| NodePlacement {
                    id: NodeId::Relay(r.id),
                    position: r.position,
                    floor: r.floor_id,
                }),
        );
        let bridges = self.script.bridges();
        let snapshot = compute_connectivity(tick, &placements, &bridges, p.comm_range, p.link_mode)?;
        let outbox: Vec<StateBroadcast> = self
            .slots
            .iter()
            .filter(|s| s.agent.alive)
            .map(|s| StateBroadcast {
                sender: s.agent.id,
                tick,
                pose: s.agent.estimated_pose,
                scan: scans[&s.agent.id].clone(),
                waypoint: s.agent.waypoint,
            })
            .collect();
        let inboxes = deliver_broadcasts(&snapshot, &outbox, p.loss_prob, &mut self.network_rng)?;

        // (d) collective mapping
        let stale_ticks = (p.stale_s / p.tick_s).round() as u64;
        let fresh: BTreeMap<u32, Vec<usize>> = each_slot(&mut self.slots, self.options, |s| {
            if !s.agent.alive {
                return Ok(None);
            }
            let ctx = StepContext {
                tick,
                model: &p.sensor_model,
                thresholds: &p.thresholds,
                r0: p.r0,
                stale_ticks,
            };
            let inbox = inboxes.get(&s.agent.id).map_or(&[][..], |v| v.as_slice());
            let own = scans.get(&s.agent.id);
            let fresh = collective_mapping_step(&mut s.agent, own, inbox, &ctx)?;
            Ok(Some(fresh))
        })?;
        for (id, cells) in &fresh {
            let floor = self.slots.iter().find(|s| s.agent.id == *id).expect("agent").agent.floor_id;
            let union = self.explored_union.get_mut(&floor).expect("floor union");
            for &c in cells {
                if !union[c] {
                    union[c] = true;
                    self.global_explored += 1;
                }
            }
        }

        // (e) navigate and move
        let nav = self.nav;
        let worlds = &self.worlds;
        each_slot(&mut self.slots, self.options, |s| {
            if !s.agent.alive {
                return Ok(None::<()>);
            }
            let scan = &scans[&s.agent.id];
            let cmd = navigate(&mut s.agent, scan, tick, &nav);
            let world = &worlds[&s.agent.floor_id];
            match p.odometry_noise {
                None => {
                    let (pose, blocked) = integrate_motion(world, &s.agent.true_pose, cmd, p.tick_s);
                    s.agent.true_pose = pose;
                    s.agent.estimated_pose = pose;
                    s.agent.blocked = blocked;
                }
                Some(noise) => {
                    let ev: f64 = StandardNormal.sample(&mut s.rng);
                    let ew: f64 = StandardNormal.sample(&mut s.rng);
                    let actual = MotionCommand {
                        v: (cmd.v + noise.sigma_v * ev).max(0.0),
                        omega: cmd.omega + noise.sigma_omega * ew,
                    };
                    let before = s.agent.true_pose;
                    let (pose, blocked) = integrate_motion(world, &before, actual, p.tick_s);
                    // dead reckoning from the commanded turn and the distance
                    // the wheels actually covered
                    let travel = (pose.position() - before.position()).norm();
                    let est = s.agent.estimated_pose;
                    let mid = est.heading + cmd.omega * p.tick_s / 2.0;
                    s.agent.estimated_pose = Pose::new(
                        est.x + travel * mid.cos(),
                        est.y + travel * mid.sin(),
                        est.heading + cmd.omega * p.tick_s,
                    );
                    s.agent.true_pose = pose;
                    s.agent.blocked = blocked;
                }
            }
            Ok(None)
        })?;

        // (f) record
        self.tick = tick;
        let agents = self
            .slots
            .iter()
            .map(|s| AgentRecord {
                id: s.agent.id,
                floor: s.agent.floor_id,
                pose: s.agent.true_pose,
                estimated_pose: s.agent.estimated_pose,
                waypoint: s.agent.waypoint,
                alive: s.agent.alive,
                nav_mode: s.agent.nav_mode,
                explored: s.agent.grid.count_explored(),
                fresh_cells: fresh.get(&s.agent.id).cloned().unwrap_or_default(),
            })
            .collect();
        Ok(Some(TickRecord {
            tick,
            time_s,
            agents,
            global_explored: self.global_explored,
            connectivity: snapshot,
            events,
        }))
    }

    pub fn run(mut self) -> Result<SimulationTrace, EngineError> {
        let mut ticks = Vec::with_capacity(self.script.params.tick_count() as usize);
        while let Some(rec) = self.step()? {
            ticks.push(rec);
        }
        Ok(SimulationTrace {
            tick_s: self.script.params.tick_s,
            ticks,
            final_agents: self.slots.into_iter().map(|s| s.agent).collect(),
        })
    }
}

/// Runs a scenario start to finish on one thread.
pub fn run_scenario(script: &ScenarioScript) -> Result<SimulationTrace, EngineError> {
    Simulation::new(script.clone(), SimOptions::default())?.run()
}
