//! Range-limited links, multi-hop components and lossy broadcast delivery.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use swarm_gridmapper::network::{
    compute_connectivity, deliver_broadcasts, LinkMode, NodeId, NodePlacement, StateBroadcast,
};
use swarm_gridmapper::world::{Pose, WorldModel};
use swarm_gridmapper::Vec2;

fn main() {
    let spots = [(0, 0.5, 0.5), (1, 3.0, 0.5), (2, 5.5, 0.5), (3, 9.5, 0.5)];
    let placements: Vec<NodePlacement> = spots
        .iter()
        .map(|&(id, x, y)| NodePlacement { id: NodeId::Agent(id), position: Vec2::new(x, y), floor: 0 })
        .collect();

    for mode in [LinkMode::SingleHop, LinkMode::MultiHop] {
        let snap = compute_connectivity(1, &placements, &[], 3.0, mode).unwrap();
        let edges: Vec<String> = snap.edges().map(|(a, b)| format!("{a}-{b}")).collect();
        println!("{mode:?}: {}", edges.join(" "));
    }

    let world = WorldModel::open(0, 10.0, 1.0).unwrap();
    let outbox: Vec<StateBroadcast> = spots
        .iter()
        .map(|&(id, x, y)| {
            let pose = Pose::new(x, y, 0.0);
            let mut scan = world.cast_scan(&pose, 8, 2.0).unwrap();
            scan.source_agent = id;
            scan.timestamp = 1;
            StateBroadcast { sender: id, tick: 1, pose, scan, waypoint: None }
        })
        .collect();
    let snap = compute_connectivity(1, &placements, &[], 3.0, LinkMode::MultiHop).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let inboxes = deliver_broadcasts(&snap, &outbox, 0.3, &mut rng).unwrap();
    for (id, inbox) in &inboxes {
        let from: Vec<u32> = inbox.iter().map(|b| b.sender).collect();
        println!("agent {id} heard {from:?}");
    }
}
