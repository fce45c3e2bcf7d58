#[path = "support/lattice.rs"]
mod lattice;

use depriv_core::spatial::{adjacency_oracle, build_adjacency, Contiguity, SnapGrid};
use depriv_core::Execution;
use lattice::fixture;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn fast_build_equals_brute_force_on_random_fixtures() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let mut edges = 0;
    for i in 0..50 {
        let geoms = fixture(&mut rng, 200);
        assert!(geoms.len() <= 200);
        for contiguity in [Contiguity::Queen, Contiguity::Rook] {
            let oracle = adjacency_oracle(&geoms, SnapGrid::default(), contiguity);
            let exec = if i % 2 == 0 { Execution::Sequential } else { Execution::with_workers(4) };
            let fast = build_adjacency(&geoms, SnapGrid::default(), contiguity, exec);
            assert_eq!(fast.edges(), oracle.edges(), "fixture {i} {contiguity:?}");
            assert_eq!(fast.nodes(), oracle.nodes());
            edges += fast.edge_count();
        }
    }
    assert!(edges > 1000, "fixtures too sparse: {edges} edges");
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn rook_is_a_subgraph_of_queen() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    for _ in 0..10 {
        let geoms = fixture(&mut rng, 150);
        let queen = build_adjacency(&geoms, SnapGrid::default(), Contiguity::Queen, Execution::Sequential);
        let rook = build_adjacency(&geoms, SnapGrid::default(), Contiguity::Rook, Execution::Sequential);
        assert!(rook.edges().iter().all(|&(a, b)| queen.are_adjacent(a as usize, b as usize)));
        assert!(rook.edge_count() < queen.edge_count());
    }
}

#[test]
fn adjacency_is_symmetric_and_irreflexive() {
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    let geoms = fixture(&mut rng, 200);
    let g = build_adjacency(&geoms, SnapGrid::default(), Contiguity::Queen, Execution::Sequential);
    for i in 0..g.node_count() {
        for &j in g.neighbors(i) {
            assert_ne!(i, j as usize);
            assert!(g.neighbors(j as usize).contains(&(i as u32)));
        }
    }
}
