//! How a room is cut into blocks for each architecture: disjoint test
//! blocks, overlapping training blocks, 2 x 2 grid groups and concentric
//! multi-scale windows.
//!
//! ```text
//! cargo run --release --example block_sampling
//! ```

use ptseg::blocking::{grid_groups, multiscale_sample, split_into_blocks, Mode, SamplerConfig};
use ptseg::pointcloud::{assemble_features, synth_scene, SceneRecipe};
use ptseg::rng::seeded;

fn main() -> ptseg::Result<()> {
    let cloud = synth_scene(&SceneRecipe { seed: 4, ..SceneRecipe::default() })?;
    let cfg = SamplerConfig { points_per_block: 512, ..SamplerConfig::default() };
    println!("room of {} points, block size {} m", cloud.len(), cfg.block_size);

    for mode in [Mode::Test, Mode::Train] {
        let blocks = split_into_blocks(&cloud, &cfg, mode)?;
        let sizes: Vec<usize> = blocks.iter().map(|b| b.len()).collect();
        let covered: usize = sizes.iter().sum();
        println!(
            "{mode:?}: {} blocks, {covered} memberships for {} points, sizes {}..{}",
            blocks.len(),
            cloud.len(),
            sizes.iter().min().unwrap_or(&0),
            sizes.iter().max().unwrap_or(&0)
        );
        let groups = grid_groups(&blocks, mode);
        let copies: usize = groups.iter().map(|g| g.duplicated.iter().filter(|d| **d).count()).sum();
        println!("  {} grid groups, {copies} slots filled by copying a neighbor", groups.len());
    }

    let feats = assemble_features(&cloud, false)?;
    let mut rng = seeded(1);
    let g = multiscale_sample(&cloud, &feats, &cfg, &mut rng)?;
    let c = g.blocks[0].center();
    print!("multi-scale draw at ({:.2}, {:.2}):", c[0], c[1]);
    for b in &g.blocks {
        print!(" r={} holds {}", b.scale, b.len());
    }
    println!();
    Ok(())
}
