//! Per-agent control loop, navigation, scenario scripting and the
//! deterministic tick loop.

pub mod agent;
pub mod navigation;
pub mod scenario;
pub mod sim;

use thiserror::Error;

use crate::exploration::ExplorationError;
use crate::network::NetworkError;
use crate::world::WorldError;

pub use agent::{collective_mapping_step, AgentState, NavMode, StepContext};
pub use navigation::{integrate_motion, navigate, MotionCommand, NavParams};
pub use scenario::{AgentSpawn, EventKind, OdometryNoise, Params, ScenarioEvent, ScenarioScript};
pub use sim::{run_scenario, AgentRecord, SimOptions, Simulation, SimulationTrace, TickRecord};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("scenario violation: {0}")]
    ScriptViolation(String),
    #[error("scenario parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Exploration(#[from] ExplorationError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}
