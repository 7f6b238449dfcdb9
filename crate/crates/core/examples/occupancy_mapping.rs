//! Build a log-odds occupancy grid from a handful of scans and print it as
//! ASCII (`#` occupied, `.` free, blank unknown).

use swarm_gridmapper::mapping::{CellIndex, CellState, OccupancyGrid, SensorModel, Thresholds};
use swarm_gridmapper::world::{ConvexPolygon, Pose, WorldModel};
use swarm_gridmapper::Vec2;

fn main() {
    let pillar = ConvexPolygon::new(vec![
        Vec2::new(2.2, 1.2),
        Vec2::new(2.8, 1.4),
        Vec2::new(2.4, 1.9),
    ])
    .unwrap();
    let world = WorldModel::new(0, 4.0, 3.0, vec![pillar], vec![]).unwrap();
    let model = SensorModel::default();
    let thresholds = Thresholds::default();
    let mut grid = OccupancyGrid::new(0, 4.0, 3.0, 0.1);

    for (k, &(x, y)) in [(0.5, 0.5), (1.0, 2.5), (3.5, 0.6), (3.4, 2.4)].iter().enumerate() {
        for turn in 0..8 {
            let mut scan = world.cast_scan(&Pose::new(x, y, turn as f64 * 0.1), 32, 2.0).unwrap();
            scan.timestamp = (k * 8 + turn) as u64;
            grid.update(&scan, &model).unwrap();
        }
    }

    for row in (0..grid.rows()).rev() {
        let line: String = (0..grid.cols())
            .map(|col| match grid.classify(CellIndex::new(row, col), &thresholds).unwrap() {
                CellState::Occupied => '#',
                CellState::Free => '.',
                CellState::Unknown => ' ',
            })
            .collect();
        println!("|{line}|");
    }
    println!("{} of {} cells explored", grid.count_explored(), grid.len());
}
