//! Scenario scripts: worlds, initial agents, relays, timed events and run
//! parameters, plus the TOML file format that carries them.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::mapping::{SensorModel, Thresholds, DEFAULT_RESOLUTION};
use crate::network::{LinkMode, NodeId, RelayNode};
use crate::world::{ConvexPolygon, Pose, Wall, WorldModel};
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometryNoise {
    /// Standard deviation of the per-tick linear speed error, m/s.
    pub sigma_v: f64,
    /// Standard deviation of the per-tick turn rate error, rad/s.
    pub sigma_omega: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub tick_s: f64,
    pub duration_s: f64,
    pub comm_range: f64,
    pub loss_prob: f64,
    pub r0: f64,
    pub beam_count: usize,
    pub max_range: f64,
    pub sensor_model: SensorModel,
    pub thresholds: Thresholds,
    pub seed: u64,
    pub resolution: f64,
    pub speed_limit: f64,
    pub d_safe: f64,
    pub stale_s: f64,
    pub link_mode: LinkMode,
    pub odometry_noise: Option<OdometryNoise>,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            tick_s: 0.2,
            duration_s: 60.0,
            comm_range: 3.0,
            loss_prob: 0.0,
            r0: 1.0,
            beam_count: 8,
            max_range: 2.0,
            sensor_model: SensorModel::default(),
            thresholds: Thresholds::default(),
            seed: 0,
            resolution: DEFAULT_RESOLUTION,
            speed_limit: 0.3,
            d_safe: 0.15,
            stale_s: 2.0,
            link_mode: LinkMode::MultiHop,
            odometry_noise: None,
        }
    }
}

impl Params {
    pub fn tick_count(&self) -> u64 {
        (self.duration_s / self.tick_s).round() as u64
    }

    /// First tick whose time is at or after `time_s`; never before tick 1.
    pub fn tick_of(&self, time_s: f64) -> u64 {
        ((time_s / self.tick_s) - 1e-9).ceil().max(1.0) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentSpawn {
    pub id: u32,
    pub floor: u32,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    KillAgent { id: u32 },
    InjectAgent { id: u32, floor: u32, pose: Pose },
    RemoveWall { wall_id: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioEvent {
    pub time: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioScript {
    pub worlds: Vec<WorldModel>,
    pub agents: Vec<AgentSpawn>,
    pub relays: Vec<RelayNode>,
    pub events: Vec<ScenarioEvent>,
    pub params: Params,
}

fn violation(msg: impl Into<String>) -> EngineError {
    EngineError::ScriptViolation(msg.into())
}

impl ScenarioScript {
    pub fn world(&self, floor: u32) -> Option<&WorldModel> {
        self.worlds.iter().find(|w| w.floor_id == floor)
    }

    /// Relay pairs wired across floors, each listed once.
    pub fn bridges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = BTreeSet::new();
        for r in &self.relays {
            if let Some(partner) = r.bridge {
                let (a, b) = (r.id.min(partner), r.id.max(partner));
                out.insert((NodeId::Relay(a), NodeId::Relay(b)));
            }
        }
        out.into_iter().collect()
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let p = &self.params;
        if !(p.tick_s > 0.0) || !(p.duration_s > 0.0) {
            return Err(violation("tick_s and duration_s must be positive"));
        }
        if !(p.comm_range > 0.0) {
            return Err(violation("comm_range must be positive"));
        }
        if !(0.0..1.0).contains(&p.loss_prob) {
            return Err(violation("loss_prob must lie in [0, 1)"));
        }
        if !(p.r0 > 0.0) {
            return Err(violation("R_0 must be positive"));
        }
        if p.beam_count == 0 || !(p.max_range > 0.0) {
            return Err(violation("beam_count must be >= 1 and max_range positive"));
        }
        if !(p.resolution > 0.0) || !(p.speed_limit > 0.0) || !(p.d_safe > 0.0) || !(p.stale_s >= 0.0) {
            return Err(violation(
                "resolution, speed_limit and d_safe must be positive, stale_s nonnegative",
            ));
        }
        p.sensor_model.validate().map_err(|e| violation(e.to_string()))?;
        p.thresholds.validate().map_err(|e| violation(e.to_string()))?;
        if let Some(n) = p.odometry_noise {
            if !(n.sigma_v >= 0.0 && n.sigma_omega >= 0.0) {
                return Err(violation("odometry noise deviations must be nonnegative"));
            }
        }

        let mut floors = BTreeSet::new();
        let mut wall_ids = BTreeSet::new();
        for w in &self.worlds {
            if !floors.insert(w.floor_id) {
                return Err(violation(format!("duplicate floor id {}", w.floor_id)));
            }
            for wall in &w.walls {
                if !wall_ids.insert(wall.id.as_str()) {
                    return Err(violation(format!("duplicate wall id `{}`", wall.id)));
                }
            }
        }

        let mut ids = BTreeSet::new();
        let check_spawn = |id: u32, floor: u32, pose: &Pose| -> Result<(), EngineError> {
            let world = self
                .world(floor)
                .ok_or_else(|| violation(format!("agent {id} placed on unknown floor {floor}")))?;
            if !(pose.x.is_finite() && pose.y.is_finite() && pose.heading.is_finite()) {
                return Err(violation(format!("agent {id} pose is not finite")));
            }
            if world.is_occupied(pose.position()) {
                return Err(violation(format!("agent {id} starts inside occupied space")));
            }
            Ok(())
        };
        for a in &self.agents {
            if !ids.insert(a.id) {
                return Err(violation(format!("duplicate agent id {}", a.id)));
            }
            check_spawn(a.id, a.floor, &a.pose)?;
        }

        let mut ordered: Vec<&ScenarioEvent> = self.events.iter().collect();
        ordered.sort_by(|a, b| a.time.total_cmp(&b.time));
        for e in ordered {
            if !(0.0..=p.duration_s).contains(&e.time) {
                return Err(violation(format!(
                    "event at t = {} s lies outside [0, {}]",
                    e.time, p.duration_s
                )));
            }
            match &e.kind {
                EventKind::KillAgent { id } => {
                    if !ids.contains(id) {
                        return Err(violation(format!("kill of unknown agent {id}")));
                    }
                }
                EventKind::InjectAgent { id, floor, pose } => {
                    if !ids.insert(*id) {
                        return Err(violation(format!("injected agent id {id} is not unique")));
                    }
                    check_spawn(*id, *floor, pose)?;
                }
                EventKind::RemoveWall { wall_id } => {
                    if !wall_ids.contains(wall_id.as_str()) {
                        return Err(violation(format!("removal of unknown wall `{wall_id}`")));
                    }
                }
            }
        }

        let mut relay_ids = BTreeSet::new();
        for r in &self.relays {
            if !relay_ids.insert(r.id) {
                return Err(violation(format!("duplicate relay id {}", r.id)));
            }
            if !floors.contains(&r.floor_id) {
                return Err(violation(format!("relay {} on unknown floor {}", r.id, r.floor_id)));
            }
            if !(r.appear_time >= 0.0) {
                return Err(violation(format!("relay {} appear_time is negative", r.id)));
            }
        }
        for r in &self.relays {
            if let Some(partner) = r.bridge {
                let other = self
                    .relays
                    .iter()
                    .find(|o| o.id == partner)
                    .ok_or_else(|| violation(format!("relay {} bridges to unknown relay {partner}", r.id)))?;
                if other.floor_id == r.floor_id {
                    return Err(violation(format!(
                        "relays {} and {partner} bridge the same floor",
                        r.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, EngineError> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| line_col(text, s.start))
                .unwrap_or((0, 0));
            EngineError::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        let script = file.into_script()?;
        script.validate()?;
        Ok(script)
    }

    pub fn load(path: &Path) -> Result<Self, EngineError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(&ScenarioFile::from_script(self))
            .expect("scenario serializes to TOML")
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

// ---- file schema ----

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    params: ParamsFile,
    worlds: Vec<WorldFile>,
    #[serde(default)]
    agents: Vec<AgentFile>,
    #[serde(default)]
    relays: Vec<RelayFile>,
    #[serde(default)]
    events: Vec<EventFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    duration_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tick_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    comm_range: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    loss_prob: Option<f64>,
    #[serde(default, rename = "R_0", skip_serializing_if = "Option::is_none")]
    r0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beam_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_range: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    resolution: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    speed_limit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d_safe: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stale_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    link_mode: Option<LinkModeFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sensor_model: Option<SensorModelFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    thresholds: Option<ThresholdsFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    odometry_noise: Option<NoiseFile>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
enum LinkModeFile {
    SingleHop,
    MultiHop,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SensorModelFile {
    l_hit: f64,
    l_miss: f64,
    l_max: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThresholdsFile {
    p_occ: f64,
    p_free: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseFile {
    sigma_v: f64,
    sigma_omega: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorldFile {
    floor_id: u32,
    extent: [f64; 2],
    #[serde(default)]
    obstacles: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    walls: Vec<WallFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WallFile {
    id: String,
    segment: [[f64; 2]; 2],
    thickness: f64,
    #[serde(default = "yes")]
    present: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentFile {
    id: u32,
    floor: u32,
    pose: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RelayFile {
    id: u32,
    floor: u32,
    position: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bridge: Option<u32>,
    #[serde(default)]
    appear_time: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
enum EventFile {
    KillAgent { time: f64, id: u32 },
    InjectAgent { time: f64, id: u32, floor: u32, pose: [f64; 3] },
    RemoveWall { time: f64, wall_id: String },
}

fn v2(p: [f64; 2]) -> Vec2 {
    Vec2::new(p[0], p[1])
}

fn pose(p: [f64; 3]) -> Pose {
    Pose::new(p[0], p[1], p[2])
}

impl ScenarioFile {
    fn into_script(self) -> Result<ScenarioScript, EngineError> {
        let d = Params::default();
        let pf = self.params;
        let params = Params {
            tick_s: pf.tick_s.unwrap_or(d.tick_s),
            duration_s: pf.duration_s,
            comm_range: pf.comm_range.unwrap_or(d.comm_range),
            loss_prob: pf.loss_prob.unwrap_or(d.loss_prob),
            r0: pf.r0.unwrap_or(d.r0),
            beam_count: pf.beam_count.unwrap_or(d.beam_count),
            max_range: pf.max_range.unwrap_or(d.max_range),
            sensor_model: pf.sensor_model.map_or(d.sensor_model, |s| SensorModel {
                l_hit: s.l_hit,
                l_miss: s.l_miss,
                l_max: s.l_max,
            }),
            thresholds: pf.thresholds.map_or(d.thresholds, |t| Thresholds {
                p_occ: t.p_occ,
                p_free: t.p_free,
            }),
            seed: pf.seed.unwrap_or(d.seed),
            resolution: pf.resolution.unwrap_or(d.resolution),
            speed_limit: pf.speed_limit.unwrap_or(d.speed_limit),
            d_safe: pf.d_safe.unwrap_or(d.d_safe),
            stale_s: pf.stale_s.unwrap_or(d.stale_s),
            link_mode: match pf.link_mode {
                Some(LinkModeFile::SingleHop) => LinkMode::SingleHop,
                Some(LinkModeFile::MultiHop) | None => LinkMode::MultiHop,
            },
            odometry_noise: pf.odometry_noise.map(|n| OdometryNoise {
                sigma_v: n.sigma_v,
                sigma_omega: n.sigma_omega,
            }),
        };
        let mut worlds = Vec::new();
        for w in self.worlds {
            let obstacles = w
                .obstacles
                .into_iter()
                .map(|poly| ConvexPolygon::new(poly.into_iter().map(v2).collect()))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| violation(format!("floor {}: {e}", w.floor_id)))?;
            let walls = w
                .walls
                .into_iter()
                .map(|wf| Wall {
                    id: wf.id,
                    start: v2(wf.segment[0]),
                    end: v2(wf.segment[1]),
                    thickness: wf.thickness,
                    present: wf.present,
                })
                .collect();
            worlds.push(
                WorldModel::new(w.floor_id, w.extent[0], w.extent[1], obstacles, walls)
                    .map_err(|e| violation(format!("floor {}: {e}", w.floor_id)))?,
            );
        }
        Ok(ScenarioScript {
            worlds,
            agents: self
                .agents
                .into_iter()
                .map(|a| AgentSpawn {
                    id: a.id,
                    floor: a.floor,
                    pose: pose(a.pose),
                })
                .collect(),
            relays: self
                .relays
                .into_iter()
                .map(|r| RelayNode {
                    id: r.id,
                    position: v2(r.position),
                    floor_id: r.floor,
                    bridge: r.bridge,
                    appear_time: r.appear_time,
                })
                .collect(),
            events: self
                .events
                .into_iter()
                .map(|e| match e {
                    EventFile::KillAgent { time, id } => ScenarioEvent {
                        time,
                        kind: EventKind::KillAgent { id },
                    },
                    EventFile::InjectAgent { time, id, floor, pose: p } => ScenarioEvent {
                        time,
                        kind: EventKind::InjectAgent { id, floor, pose: pose(p) },
                    },
                    EventFile::RemoveWall { time, wall_id } => ScenarioEvent {
                        time,
                        kind: EventKind::RemoveWall { wall_id },
                    },
                })
                .collect(),
            params,
        })
    }

    fn from_script(s: &ScenarioScript) -> Self {
        let p = &s.params;
        let xy = |v: Vec2| [v.x, v.y];
        let xyh = |p: &Pose| [p.x, p.y, p.heading];
        ScenarioFile {
            params: ParamsFile {
                duration_s: p.duration_s,
                tick_s: Some(p.tick_s),
                comm_range: Some(p.comm_range),
                loss_prob: Some(p.loss_prob),
                r0: Some(p.r0),
                beam_count: Some(p.beam_count),
                max_range: Some(p.max_range),
                seed: Some(p.seed),
                resolution: Some(p.resolution),
                speed_limit: Some(p.speed_limit),
                d_safe: Some(p.d_safe),
                stale_s: Some(p.stale_s),
                link_mode: Some(match p.link_mode {
                    LinkMode::SingleHop => LinkModeFile::SingleHop,
                    LinkMode::MultiHop => LinkModeFile::MultiHop,
                }),
                sensor_model: Some(SensorModelFile {
                    l_hit: p.sensor_model.l_hit,
                    l_miss: p.sensor_model.l_miss,
                    l_max: p.sensor_model.l_max,
                }),
                thresholds: Some(ThresholdsFile {
                    p_occ: p.thresholds.p_occ,
                    p_free: p.thresholds.p_free,
                }),
                odometry_noise: p.odometry_noise.map(|n| NoiseFile {
                    sigma_v: n.sigma_v,
                    sigma_omega: n.sigma_omega,
                }),
            },
            worlds: s
                .worlds
                .iter()
                .map(|w| WorldFile {
                    floor_id: w.floor_id,
                    extent: [w.width, w.height],
                    obstacles: w
                        .obstacles
                        .iter()
                        .map(|o| o.vertices().iter().map(|v| xy(*v)).collect())
                        .collect(),
                    walls: w
                        .walls
                        .iter()
                        .map(|wall| WallFile {
                            id: wall.id.clone(),
                            segment: [xy(wall.start), xy(wall.end)],
                            thickness: wall.thickness,
                            present: wall.present,
                        })
                        .collect(),
                })
                .collect(),
            agents: s
                .agents
                .iter()
                .map(|a| AgentFile {
                    id: a.id,
                    floor: a.floor,
                    pose: xyh(&a.pose),
                })
                .collect(),
            relays: s
                .relays
                .iter()
                .map(|r| RelayFile {
                    id: r.id,
                    floor: r.floor_id,
                    position: xy(r.position),
                    bridge: r.bridge,
                    appear_time: r.appear_time,
                })
                .collect(),
            events: s
                .events
                .iter()
                .map(|e| {
                    let time = e.time;
                    match &e.kind {
                        EventKind::KillAgent { id } => EventFile::KillAgent { time, id: *id },
                        EventKind::InjectAgent { id, floor, pose } => EventFile::InjectAgent {
                            time,
                            id: *id,
                            floor: *floor,
                            pose: xyh(pose),
                        },
                        EventKind::RemoveWall { wall_id } => EventFile::RemoveWall {
                            time,
                            wall_id: wall_id.clone(),
                        },
                    }
                })
                .collect(),
        }
    }
}
