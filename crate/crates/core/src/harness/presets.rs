//! Generated experiment scenarios. Every preset is a pure function of its
//! parameters and seed, so the same call always yields the same scripts.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{AgentSpawn, EventKind, Params, ScenarioEvent, ScenarioScript};
use crate::network::RelayNode;
use crate::world::{ConvexPolygon, Pose, Wall, WorldModel};
use crate::Vec2;

/// Team sizes swept by the scalability preset.
pub const SCALABILITY_SIZES: [usize; 5] = [1, 2, 4, 6, 8];

/// Explored-cell count used for the threshold-time estimate.
pub const METHOD2_THRESHOLD: u64 = 8000;

const PRESET_LOSS: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetName {
    Scalability,
    Robustness,
    Flexibility,
    Multifloor,
}

impl PresetName {
    pub const ALL: [PresetName; 4] = [
        PresetName::Scalability,
        PresetName::Robustness,
        PresetName::Flexibility,
        PresetName::Multifloor,
    ];
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PresetName::Scalability => "scalability",
            PresetName::Robustness => "robustness",
            PresetName::Flexibility => "flexibility",
            PresetName::Multifloor => "multifloor",
        })
    }
}

impl FromStr for PresetName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PresetName::ALL
            .into_iter()
            .find(|p| p.to_string() == s)
            .ok_or_else(|| format!("unknown preset `{s}` (expected scalability, robustness, flexibility or multifloor)"))
    }
}

/// One scripted run of a preset.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    /// Summary rows aggregate runs sharing a group, e.g. `N=4`.
    pub group: String,
    /// File stem, unique within the preset.
    pub label: String,
    pub seed: u64,
    pub script: ScenarioScript,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPreset {
    pub name: PresetName,
    pub repeats: usize,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunSpec>,
}

impl ExperimentPreset {
    /// Seeds are `base_seed, base_seed + 1, ...`, one per repeat.
    pub fn build(name: PresetName, repeats: usize, base_seed: u64) -> Self {
        let seeds: Vec<u64> = (0..repeats as u64).map(|k| base_seed + k).collect();
        let mut runs = Vec::new();
        match name {
            PresetName::Scalability => {
                for n in SCALABILITY_SIZES {
                    for &seed in &seeds {
                        runs.push(RunSpec {
                            group: format!("N={n}"),
                            label: format!("N{n}_seed{seed}"),
                            seed,
                            script: scalability_script(n, seed),
                        });
                    }
                }
            }
            PresetName::Robustness | PresetName::Flexibility | PresetName::Multifloor => {
                for &seed in &seeds {
                    let script = match name {
                        PresetName::Robustness => robustness_script(seed),
                        PresetName::Flexibility => flexibility_script(seed),
                        _ => multifloor_script(seed, true),
                    };
                    runs.push(RunSpec {
                        group: name.to_string(),
                        label: format!("{name}_seed{seed}"),
                        seed,
                        script,
                    });
                }
            }
        }
        Self {
            name,
            repeats,
            seeds,
            runs,
        }
    }
}

fn poly(points: &[(f64, f64)]) -> ConvexPolygon {
    ConvexPolygon::new(points.iter().map(|&(x, y)| Vec2::new(x, y)).collect())
        .expect("preset obstacle is convex")
}

/// 10 m x 6 m room with five irregular convex obstacles covering about 8%
/// of the floor.
pub fn scalability_world() -> WorldModel {
    let obstacles = vec![
        poly(&[(1.89, 3.45), (2.94, 3.19), (3.21, 4.15), (2.16, 4.50)]),
        poly(&[(4.39, 0.97), (5.70, 1.14), (5.00, 2.19)]),
        poly(&[(7.52, 3.50), (8.22, 3.85), (8.13, 4.64), (7.43, 4.90), (7.00, 4.20)]),
        poly(&[(6.48, 1.45), (7.36, 1.28), (7.62, 2.15), (6.74, 2.42)]),
        poly(&[(4.68, 3.95), (5.38, 3.69), (5.82, 4.22), (5.47, 4.91), (4.86, 4.83)]),
    ];
    WorldModel::new(0, 10.0, 6.0, obstacles, vec![]).expect("preset world is valid")
}

fn preset_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(u32::MAX) + 1);
    rng
}

/// `n` poses packed on a 0.35 m lattice whose lower-left slot is `corner`,
/// jittered by a few centimeters, with random headings.
fn cluster(rng: &mut ChaCha8Rng, n: usize, corner: Vec2, per_row: usize) -> Vec<Pose> {
    (0..n)
        .map(|k| {
            let (col, row) = ((k % per_row) as f64, (k / per_row) as f64);
            let jx = rng.gen_range(-0.05..0.05);
            let jy = rng.gen_range(-0.05..0.05);
            let h = rng.gen_range(-PI..PI);
            Pose::new(corner.x + 0.35 * col + jx, corner.y + 0.35 * row + jy, h)
        })
        .collect()
}

fn params(seed: u64, duration_s: f64) -> Params {
    Params {
        duration_s,
        seed,
        loss_prob: PRESET_LOSS,
        ..Params::default()
    }
}

fn spawns(floor: u32, first_id: u32, poses: &[Pose]) -> Vec<AgentSpawn> {
    poses
        .iter()
        .enumerate()
        .map(|(k, &pose)| AgentSpawn {
            id: first_id + k as u32,
            floor,
            pose,
        })
        .collect()
}

/// `n` agents released from the lower-left corner of the scalability room.
pub fn scalability_script(n: usize, seed: u64) -> ScenarioScript {
    let mut rng = preset_rng(seed);
    let poses = cluster(&mut rng, n, Vec2::new(0.5, 0.5), 4);
    ScenarioScript {
        worlds: vec![scalability_world()],
        agents: spawns(0, 0, &poses),
        relays: vec![],
        events: vec![],
        params: params(seed, 240.0),
    }
}

/// 16 m x 10 m hall used for the kill-and-inject protocol: large enough that
/// the team is still far from done when replacements arrive.
pub fn robustness_world() -> WorldModel {
    let obstacles = vec![
        poly(&[(3.0, 3.0), (4.5, 2.6), (4.8, 4.0), (3.4, 4.4)]),
        poly(&[(7.0, 6.0), (8.6, 6.3), (7.6, 7.6)]),
        poly(&[(11.0, 2.0), (12.4, 2.4), (12.2, 3.6), (10.9, 3.4)]),
        poly(&[(12.0, 7.0), (13.2, 6.6), (13.8, 7.8), (12.8, 8.6), (11.9, 8.0)]),
        poly(&[(6.5, 1.5), (7.7, 1.2), (7.9, 2.4)]),
    ];
    WorldModel::new(0, 16.0, 10.0, obstacles, vec![]).expect("preset world is valid")
}

/// Four agents; two are switched off at 20 s and two fresh ones are injected
/// at the start area at 120 s.
pub fn robustness_script(seed: u64) -> ScenarioScript {
    let mut rng = preset_rng(seed);
    let poses = cluster(&mut rng, 4, Vec2::new(0.5, 0.5), 2);
    let fresh = cluster(&mut rng, 2, Vec2::new(0.5, 0.5), 2);
    let mut events = vec![
        ScenarioEvent { time: 20.0, kind: EventKind::KillAgent { id: 2 } },
        ScenarioEvent { time: 20.0, kind: EventKind::KillAgent { id: 3 } },
    ];
    for (k, pose) in fresh.into_iter().enumerate() {
        events.push(ScenarioEvent {
            time: 120.0,
            kind: EventKind::InjectAgent { id: 4 + k as u32, floor: 0, pose },
        });
    }
    ScenarioScript {
        worlds: vec![robustness_world()],
        agents: spawns(0, 0, &poses),
        relays: vec![],
        events,
        params: params(seed, 200.0),
    }
}

/// Ids of the walls that seal the flexibility corridor's middle section.
pub const FLEXIBILITY_WALLS: [&str; 2] = ["west", "east"];

/// 9 m x 3 m corridor split into three 3 m x 3 m rooms by walls at x = 3 m
/// and x = 6 m.
pub fn flexibility_world() -> WorldModel {
    let wall = |id: &str, x: f64| Wall {
        id: id.into(),
        start: Vec2::new(x, 0.0),
        end: Vec2::new(x, 3.0),
        thickness: 0.1,
        present: true,
    };
    WorldModel::new(0, 9.0, 3.0, vec![], vec![wall("west", 3.0), wall("east", 6.0)])
        .expect("preset world is valid")
}

/// Two agents in each end room; both walls come down at 30 s.
pub fn flexibility_script(seed: u64) -> ScenarioScript {
    let mut rng = preset_rng(seed);
    let mut poses = cluster(&mut rng, 2, Vec2::new(1.0, 1.3), 2);
    poses.extend(cluster(&mut rng, 2, Vec2::new(7.6, 1.3), 2));
    let events = FLEXIBILITY_WALLS
        .iter()
        .map(|id| ScenarioEvent {
            time: 30.0,
            kind: EventKind::RemoveWall { wall_id: (*id).into() },
        })
        .collect();
    ScenarioScript {
        worlds: vec![flexibility_world()],
        agents: spawns(0, 0, &poses),
        relays: vec![],
        events,
        params: params(seed, 90.0),
    }
}

/// Upper floor of the multi-floor building.
pub fn upper_floor_world() -> WorldModel {
    let obstacles = vec![
        poly(&[(2.5, 2.0), (3.8, 1.7), (4.0, 2.9), (2.8, 3.2)]),
        poly(&[(6.0, 3.5), (7.4, 3.3), (6.9, 4.6)]),
        poly(&[(5.0, 0.8), (5.9, 0.6), (6.2, 1.5), (5.3, 1.8)]),
    ];
    WorldModel::new(1, 10.0, 6.0, obstacles, vec![]).expect("preset world is valid")
}

/// Eight agents on the ground floor and four upstairs. With `relays`, a
/// wired relay pair sits at the stairwell in the lower-left corner of both
/// floors.
pub fn multifloor_script(seed: u64, relays: bool) -> ScenarioScript {
    let mut rng = preset_rng(seed);
    let ground = cluster(&mut rng, 8, Vec2::new(0.5, 0.5), 4);
    let upper = cluster(&mut rng, 4, Vec2::new(0.5, 0.5), 4);
    let mut agents = spawns(0, 0, &ground);
    agents.extend(spawns(1, 8, &upper));
    let relay_nodes = if relays {
        vec![
            RelayNode { id: 0, position: Vec2::new(0.3, 1.2), floor_id: 0, bridge: Some(1), appear_time: 0.0 },
            RelayNode { id: 1, position: Vec2::new(0.3, 1.2), floor_id: 1, bridge: Some(0), appear_time: 0.0 },
        ]
    } else {
        vec![]
    };
    let mut lower = scalability_world();
    lower.floor_id = 0;
    ScenarioScript {
        worlds: vec![lower, upper_floor_world()],
        agents,
        relays: relay_nodes,
        events: vec![],
        params: params(seed, 120.0),
    }
}
