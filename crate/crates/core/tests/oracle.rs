mod common;

use common::{check_against_oracle, random_connected_map, random_id_map, random_row, simulate, Geometry};
use poolprop::edges::EdgeLabelMap;
use poolprop::grouping::{generate_proposals, PoolMode, PoolingConfig, Termination};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn row(ids: &[u32]) -> EdgeLabelMap {
    EdgeLabelMap::from_id_grid(ids.len(), 1, ids.to_vec()).unwrap()
}

#[test]
fn seven_cell_row_matches_hand_trace() {
    // [1,0,0,2,0,0,3]: windows {1,0,0} {0,2,0} {0,0,3} give [1,2,3] with no
    // event; that grid has no zero cell left, so pooling stops.
    let map = row(&[1, 0, 0, 2, 0, 0, 3]);
    let g = generate_proposals(&map, &PoolingConfig::default()).unwrap();
    let members: Vec<Vec<u32>> = g.proposals.iter().map(|p| p.members.clone()).collect();
    assert_eq!(members, vec![vec![1], vec![2], vec![3]]);
    assert_eq!(g.iterations, 1);
    assert_eq!(g.termination, Termination::NoZeroCells);

    let oracle = simulate(7, 1, &map.ids, Geometry::default());
    assert!(oracle.events.is_empty());
    check_against_oracle(&map, &PoolingConfig::default()).unwrap();
}

#[test]
fn oracle_reproduces_six_proposal_row() {
    let ids = [1, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0, 0];
    let run = simulate(12, 1, &ids, Geometry::default());
    let members: Vec<Vec<u32>> = run.proposals.iter().map(|p| p.members.clone()).collect();
    assert_eq!(
        members,
        vec![vec![1], vec![2], vec![3], vec![1, 2], vec![2, 3], vec![1, 2, 3]]
    );
}

#[test]
fn random_rows_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..300 {
        let w = rng.gen_range(1..=32);
        let map = random_row(&mut rng, w, 5);
        check_against_oracle(&map, &PoolingConfig::default()).unwrap();
    }
}

#[test]
fn random_grids_match_oracle_under_random_geometry() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for i in 0..150 {
        let (w, h) = (rng.gen_range(1..=16), rng.gen_range(1..=16));
        let density = rng.gen_range(0.05..0.5);
        let map = if i % 2 == 0 {
            random_connected_map(&mut rng, w, h, density, 12)
        } else {
            random_id_map(&mut rng, w, h, density, 6)
        };
        let (wh, ww) = loop {
            let p = (rng.gen_range(1..=4), rng.gen_range(1..=4));
            if p != (1, 1) {
                break p;
            }
        };
        let cfg = PoolingConfig {
            mode: if rng.gen_bool(0.5) { PoolMode::Max } else { PoolMode::Min },
            ..PoolingConfig::with_geometry(wh, ww, rng.gen_range(1..=4), rng.gen_range(1..=4))
        };
        check_against_oracle(&map, &cfg).unwrap();
    }
}
