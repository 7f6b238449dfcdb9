//! Frontier strength, preference potential and the chosen waypoint for an
//! agent that has fused its own sweep and a teammate's, with and without
//! accounting for where that teammate stands.

use swarm_gridmapper::exploration::{choose_waypoint, frontier_field};
use swarm_gridmapper::mapping::{OccupancyGrid, SensorModel, Thresholds, DEFAULT_RESOLUTION};
use swarm_gridmapper::world::{Pose, WorldModel};

fn main() {
    let world = WorldModel::open(0, 8.0, 6.0).unwrap();
    let mut grid = OccupancyGrid::new(0, 8.0, 6.0, DEFAULT_RESOLUTION);
    let me = Pose::new(3.0, 3.0, 0.0);
    let mate = Pose::new(4.5, 3.0, 0.0);
    for pose in [me, mate] {
        let scan = world.cast_scan(&pose, 720, 2.0).unwrap();
        grid.update(&scan, &SensorModel::default()).unwrap();
    }

    let thresholds = Thresholds::default();
    let frontier = frontier_field(&grid, &thresholds);
    println!("{} frontier cells", frontier.support().len());

    let show = |label: &str, neighbors: &[swarm_gridmapper::Vec2]| {
        let w = choose_waypoint(&grid, &thresholds, me.position(), neighbors, 1.0)
            .unwrap()
            .expect("frontier exists");
        println!("{label}: ({:.2}, {:.2})", w.x, w.y);
    };
    show("ignoring the teammate      ", &[]);
    show("teammate at (4.5, 3.0)     ", &[mate.position()]);
}
