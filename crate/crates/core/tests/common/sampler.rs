//! Exhaustive coverage checks of the block sampler.

use std::collections::BTreeMap;

use ptseg::blocking::{grid_groups, split_into_blocks, Block, BlockCell, Mode, SamplerConfig};
use ptseg::pointcloud::LabeledPointCloud;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn uniform_cloud(seed: u64, n: usize, w: f32, l: f32) -> LabeledPointCloud {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let pos: Vec<[f32; 3]> = (0..n).map(|_| [r.gen_range(0.0..w), r.gen_range(0.0..l), r.gen_range(0.0..3.0)]).collect();
    LabeledPointCloud::new(pos, None, vec![0; n], vec!["x".into()]).unwrap()
}

/// Points outside their block's Chebyshev window.
pub fn chebyshev_violations(cloud: &LabeledPointCloud, blocks: &[Block]) -> usize {
    let mut bad = 0;
    for b in blocks {
        let c = b.center();
        for &i in &b.point_indices {
            let p = cloud.positions()[i];
            let d = (p[0] as f64 - c[0]).abs().max((p[1] as f64 - c[1]).abs());
            bad += usize::from(d > b.scale);
        }
    }
    bad
}

/// Points that test-mode blocking does not place in exactly one block.
pub fn partition_violations(cloud: &LabeledPointCloud) -> usize {
    let cfg = SamplerConfig { min_points: 1, ..SamplerConfig::default() };
    let blocks = split_into_blocks(cloud, &cfg, Mode::Test).unwrap();
    let mut hits = vec![0usize; cloud.len()];
    for b in &blocks {
        for &i in &b.point_indices {
            hits[i] += 1;
        }
    }
    hits.iter().filter(|&&h| h != 1).count() + chebyshev_violations(cloud, &blocks)
}

pub fn cell_block(ix: usize, iy: usize) -> Block {
    Block { point_indices: vec![ix * 3 + iy], cell: BlockCell::Grid { ix, iy }, origin: [ix as f64, iy as f64], scale: 0.5 }
}

fn cell_of(b: &Block) -> (usize, usize) {
    match b.cell {
        BlockCell::Grid { ix, iy } => (ix, iy),
        BlockCell::Center(_) => panic!("grid block expected"),
    }
}

/// Every occupancy pattern of a 3 x 3 grid. Test mode must evaluate each
/// block in exactly one group of its own super-cell; train mode must form
/// one group per 2 x 2 window inside the occupied extent that holds two
/// or more blocks.
pub fn occupancy_violations() -> usize {
    let mut violations = 0;
    for mask in 0u32..512 {
        let present: Vec<(usize, usize)> = (0..9).filter(|k| mask >> k & 1 == 1).map(|k| (k / 3, k % 3)).collect();
        let blocks: Vec<Block> = present.iter().map(|&(x, y)| cell_block(x, y)).collect();

        let groups = grid_groups(&blocks, Mode::Test);
        let mut seen: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for g in &groups {
            violations += usize::from(g.blocks.len() != 4);
            let anchor = (cell_of(&g.blocks[0]).0 / 2 * 2, cell_of(&g.blocks[0]).1 / 2 * 2);
            for (b, &dup) in g.blocks.iter().zip(&g.duplicated) {
                let c = cell_of(b);
                // members, copied or not, come from the group's own super-cell
                violations += usize::from((c.0 / 2 * 2, c.1 / 2 * 2) != anchor);
                if !dup {
                    *seen.entry(c).or_default() += 1;
                }
            }
        }
        violations += present.iter().filter(|c| seen.get(c) != Some(&1)).count();
        violations += usize::from(seen.len() != present.len());

        let nx = present.iter().map(|c| c.0 + 1).max().unwrap_or(0);
        let ny = present.iter().map(|c| c.1 + 1).max().unwrap_or(0);
        let expected = (0..nx.saturating_sub(1).max(1))
            .flat_map(|ax| (0..ny.saturating_sub(1).max(1)).map(move |ay| (ax, ay)))
            .filter(|&(ax, ay)| {
                [(0, 0), (0, 1), (1, 0), (1, 1)].iter().filter(|&&(dx, dy)| present.contains(&(ax + dx, ay + dy))).count() >= 2
            })
            .count();
        let train = grid_groups(&blocks, Mode::Train);
        violations += usize::from(train.len() != expected);
        violations += train.iter().filter(|g| g.duplicated.iter().filter(|d| !**d).count() < 2).count();
    }
    violations
}
