//! Drive one agent to a fixed waypoint behind a pentagonal obstacle and
//! print its path every second.

use swarm_gridmapper::engine::{integrate_motion, navigate, AgentState, NavParams};
use swarm_gridmapper::mapping::{OccupancyGrid, DEFAULT_RESOLUTION};
use swarm_gridmapper::world::{ConvexPolygon, Pose, WorldModel};
use swarm_gridmapper::Vec2;

fn main() {
    let pentagon = ConvexPolygon::new(
        (0..5)
            .map(|k| {
                let a = 0.3 + k as f64 * std::f64::consts::TAU / 5.0;
                Vec2::new(5.0 + 0.9 * a.cos(), 5.0 + 0.9 * a.sin())
            })
            .collect(),
    )
    .unwrap();
    let world = WorldModel::new(0, 10.0, 10.0, vec![pentagon], vec![]).unwrap();
    let goal = Vec2::new(8.0, 5.0);
    let grid = OccupancyGrid::new(0, 10.0, 10.0, DEFAULT_RESOLUTION);
    let mut agent = AgentState::new(0, 0, Pose::new(2.0, 5.0, 0.0), grid, 0.3);
    agent.waypoint = Some(goal);
    let params = NavParams::new(0.15, 0.2);

    for tick in 1..=600 {
        let scan = world.cast_scan(&agent.true_pose, 8, 2.0).unwrap();
        let cmd = navigate(&mut agent, &scan, tick, &params);
        let (pose, blocked) = integrate_motion(&world, &agent.true_pose, cmd, 0.2);
        agent.true_pose = pose;
        agent.estimated_pose = pose;
        agent.blocked = blocked;
        if tick % 5 == 0 {
            println!("t={:>5.1}s  ({:.2}, {:.2})  {:?}", tick as f64 * 0.2, pose.x, pose.y, agent.nav_mode);
        }
        if (pose.position() - goal).norm() < 0.1 {
            println!("reached the waypoint after {:.1} s", tick as f64 * 0.2);
            return;
        }
    }
    println!("did not reach the waypoint");
}
