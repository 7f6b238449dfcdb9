//! Decentralized collective mapping for swarms of small ground robots.
//!
//! Every agent keeps a private log-odds occupancy grid built only from its
//! own LiDAR scans and the scans broadcast by agents it is connected to over
//! a range-limited mesh. Each tick an agent picks its next waypoint by
//! maximizing a preference potential that favors frontier cells close to
//! itself and far from its neighbors. The [`engine`] drives the whole swarm
//! through scripted scenarios; the [`harness`] measures exploration progress.

pub mod world;
pub mod mapping;
pub mod exploration;
pub mod network;
pub mod engine;
pub mod harness;

pub type Vec2 = nalgebra::Vector2<f64>;
