//! Cast one simulated LiDAR sweep in a room with a box and a wall.

use swarm_gridmapper::world::{ConvexPolygon, Pose, Wall, WorldModel};
use swarm_gridmapper::Vec2;

fn main() {
    let crate_box = ConvexPolygon::new(vec![
        Vec2::new(3.0, 1.0),
        Vec2::new(3.6, 1.0),
        Vec2::new(3.6, 1.6),
        Vec2::new(3.0, 1.6),
    ])
    .unwrap();
    let wall = Wall {
        id: "partition".into(),
        start: Vec2::new(1.0, 3.2),
        end: Vec2::new(4.0, 3.2),
        thickness: 0.1,
        present: true,
    };
    let world = WorldModel::new(0, 5.0, 4.0, vec![crate_box], vec![wall]).unwrap();

    let pose = Pose::new(2.0, 1.5, 0.0);
    let scan = world.cast_scan(&pose, 16, 2.0).unwrap();
    println!("sweep from ({}, {}):", pose.x, pose.y);
    for b in &scan.beams {
        let what = if b.hit { "hit" } else { "free" };
        println!("  {:>7.1} deg  {:.3} m  {what}", b.bearing.to_degrees(), b.range);
    }
}
