mod common;

use std::collections::BTreeSet;

use common::sampler::*;

use proptest::prelude::*;
use ptseg::blocking::{
    concentric_blocks, grid_groups, multiscale_sample, sample_block_points, split_into_blocks, Block, BlockCell,
    Mode, SamplerConfig,
};
use ptseg::pointcloud::{assemble_features, LabeledPointCloud};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cfg(min_points: usize) -> SamplerConfig {
    SamplerConfig { min_points, ..SamplerConfig::default() }
}

fn assert_chebyshev(cloud: &LabeledPointCloud, blocks: &[Block]) {
    assert_eq!(chebyshev_violations(cloud, blocks), 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn test_blocks_partition_the_cloud(seed in any::<u64>(), n in 1usize..600, w in 0.1f32..5.5, l in 0.1f32..5.5) {
        let cloud = uniform_cloud(seed, n, w, l);
        prop_assert_eq!(partition_violations(&cloud), 0);
    }

    #[test]
    fn train_blocks_cover_interior_points_four_times(seed in any::<u64>(), w in 1.2f32..5.0, l in 1.2f32..5.0) {
        let n = 800;
        let cloud = uniform_cloud(seed, n, w, l);
        let blocks = split_into_blocks(&cloud, &cfg(1), Mode::Train).unwrap();
        assert_chebyshev(&cloud, &blocks);
        let b = cloud.bounds();
        for i in 0..n {
            let p = cloud.positions()[i];
            let count = blocks.iter().filter(|blk| blk.point_indices.contains(&i)).count();
            prop_assert!(count >= 1);
            let interior = (0..2).all(|a| p[a] - b.min[a] >= 0.5 && b.max[a] - p[a] > 0.5);
            if interior {
                prop_assert_eq!(count, 4, "point {:?}", p);
            }
        }
    }
}

#[test]
fn large_block_subset_has_no_duplicates() {
    let cloud = uniform_cloud(3, 10_000, 1.0, 1.0);
    let feats = assemble_features(&cloud, false).unwrap();
    let block = Block { point_indices: (0..10_000).collect(), cell: BlockCell::Grid { ix: 0, iy: 0 }, origin: [0.0, 0.0], scale: 0.5 };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = sample_block_points(&block, &feats, 4096, &mut rng).unwrap();
    assert_eq!(s.features.rows(), 4096);
    let distinct: BTreeSet<usize> = s.source.iter().copied().collect();
    assert_eq!(distinct.len(), 4096);
    assert!(distinct.iter().all(|&i| i < 10_000));
    // rows carry the features of their source point, XY shifted to the center
    for (r, &i) in s.source.iter().enumerate() {
        let (got, raw) = (s.features.row(r), feats.row(i));
        assert_eq!(got[0], raw[0] - 0.5);
        assert_eq!(got[1], raw[1] - 0.5);
        assert_eq!(&got[2..], &raw[2..]);
    }
}

#[test]
fn exact_size_block_is_a_permutation_and_tiny_blocks_repeat() {
    let cloud = uniform_cloud(4, 50, 1.0, 1.0);
    let feats = assemble_features(&cloud, false).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let block = Block { point_indices: (0..50).collect(), cell: BlockCell::Grid { ix: 0, iy: 0 }, origin: [0.0, 0.0], scale: 0.5 };
    let s = sample_block_points(&block, &feats, 50, &mut rng).unwrap();
    let mut sorted = s.source.clone();
    sorted.sort_unstable();
    assert_eq!(sorted, (0..50).collect::<Vec<_>>());

    let one = Block { point_indices: vec![7], ..block };
    let s = sample_block_points(&one, &feats, 4, &mut rng).unwrap();
    assert_eq!(s.source, vec![7; 4]);
}

#[test]
fn every_occupancy_pattern_of_a_three_by_three_grid() {
    assert_eq!(occupancy_violations(), 0);
}

#[test]
fn full_four_by_four_grid_group_counts() {
    let blocks: Vec<Block> = (0..4)
        .flat_map(|x| (0..4).map(move |y| Block { point_indices: vec![x * 4 + y], ..cell_block(x, y) }))
        .collect();
    assert_eq!(grid_groups(&blocks, Mode::Test).len(), 4);
    assert_eq!(grid_groups(&blocks, Mode::Train).len(), 9);
}

#[test]
fn window_counts_scale_with_area() {
    let cloud = uniform_cloud(9, 40_000, 20.0, 20.0);
    let feats = assemble_features(&cloud, false).unwrap();
    let cfg = SamplerConfig { points_per_block: 8, min_points: 1, ..SamplerConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut totals = [0usize; 3];
    for _ in 0..1000 {
        let g = multiscale_sample(&cloud, &feats, &cfg, &mut rng).unwrap();
        assert_eq!(g.blocks.len(), 3);
        for (t, b) in totals.iter_mut().zip(&g.blocks) {
            *t += b.len();
        }
        for s in &g.samples {
            assert_eq!(s.features.rows(), 8);
        }
    }
    let mid = totals[1] as f64;
    for (k, expect) in [(0usize, 0.25), (2, 4.0)] {
        let ratio = totals[k] as f64 / mid;
        assert!((ratio / expect - 1.0).abs() <= 0.15, "scale {k}: ratio {ratio}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn concentric_windows_are_nested(seed in any::<u64>(), cx in -0.5f64..4.5, cy in -0.5f64..4.5) {
        let cloud = uniform_cloud(seed, 300, 4.0, 4.0);
        let blocks = concentric_blocks(&cloud, [cx, cy], &[0.25, 0.5, 1.0]);
        assert_chebyshev(&cloud, &blocks);
        for pair in blocks.windows(2) {
            let outer: BTreeSet<usize> = pair[1].point_indices.iter().copied().collect();
            prop_assert!(pair[0].point_indices.iter().all(|i| outer.contains(i)));
        }
        // nothing within the radius is left out
        for (b, r) in blocks.iter().zip([0.25, 0.5, 1.0]) {
            let brute = cloud
                .positions()
                .iter()
                .filter(|p| (p[0] as f64 - cx).abs().max((p[1] as f64 - cy).abs()) <= r)
                .count();
            prop_assert_eq!(b.len(), brute);
        }
    }

    #[test]
    fn fixed_seed_gives_identical_groups(seed in any::<u64>()) {
        let cloud = uniform_cloud(seed, 400, 3.0, 3.0);
        let feats = assemble_features(&cloud, false).unwrap();
        let cfg = SamplerConfig { points_per_block: 16, min_points: 4, ..SamplerConfig::default() };
        let draw = || multiscale_sample(&cloud, &feats, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(draw(), draw());
    }
}
