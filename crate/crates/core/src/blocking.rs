//! Input-level context: splitting rooms into blocks, resampling blocks to a
//! fixed point count, 2x2 grid groups and concentric multi-scale groups.
//!
//! Every window is an axis-aligned square in XY that spans the full height.
//! Membership is the Chebyshev predicate `max(|x - cx|, |y - cy|) <= r`;
//! splitting additionally makes windows half-open on their upper side
//! (except the last row/column) so that test-mode blocks partition the room.

use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::config::{format_list, KeyValues};
use crate::error::{Error, Result};
use crate::pointcloud::LabeledPointCloud;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Test,
}

/// Where a block came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockCell {
    /// Window index along x and y in units of the stride.
    Grid { ix: usize, iy: usize },
    /// Sampled center of a multi-scale window.
    Center([f64; 2]),
}

/// Points selected by one XY window.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub point_indices: Vec<usize>,
    pub cell: BlockCell,
    /// XY of the window minimum.
    pub origin: [f64; 2],
    /// Chebyshev radius (half the window side).
    pub scale: f64,
}

impl Block {
    pub fn center(&self) -> [f64; 2] {
        [self.origin[0] + self.scale, self.origin[1] + self.scale]
    }

    /// Chebyshev distance of `(x, y)` from the window center.
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        let c = self.center();
        (x - c[0]).abs().max((y - c[1]).abs())
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.distance(x, y) <= self.scale
    }

    pub fn len(&self) -> usize {
        self.point_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.point_indices.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub block_size: f64,
    pub train_stride: f64,
    pub test_stride: f64,
    pub points_per_block: usize,
    /// Ascending Chebyshev radii of multi-scale groups.
    pub radii: Vec<f64>,
    pub min_points: usize,
    /// Center draws before multi-scale sampling gives up.
    pub max_attempts: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            block_size: 1.0,
            train_stride: 0.5,
            test_stride: 1.0,
            points_per_block: 4096,
            radii: vec![0.25, 0.5, 1.0],
            min_points: 32,
            max_attempts: 100,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, s) in [("train_stride", self.train_stride), ("test_stride", self.test_stride)] {
            if !(s > 0.0 && s <= self.block_size) {
                return Err(Error::Argument(format!(
                    "{name} must be in (0, block_size = {}], got {s}",
                    self.block_size
                )));
            }
        }
        if self.radii.is_empty() || self.radii[0] <= 0.0 || self.radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Argument(format!(
                "radii must be positive and strictly ascending, got {:?}",
                self.radii
            )));
        }
        if self.points_per_block < 1 {
            return Err(Error::Argument("points_per_block must be at least 1".into()));
        }
        if self.max_attempts < 1 {
            return Err(Error::Argument("max_attempts must be at least 1".into()));
        }
        Ok(())
    }

    pub fn stride(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Train => self.train_stride,
            Mode::Test => self.test_stride,
        }
    }

    /// Index of the scale whose points receive labels in multi-scale groups.
    pub fn labeled_scale(&self) -> usize {
        self.radii.len() / 2
    }

    /// Consumes the sampler keys of a config file.
    pub fn take_from(&mut self, kv: &mut KeyValues) -> Result<()> {
        if let Some(v) = kv.take("block_size")? {
            self.block_size = v;
        }
        if let Some(v) = kv.take("train_stride")? {
            self.train_stride = v;
        }
        if let Some(v) = kv.take("test_stride")? {
            self.test_stride = v;
        }
        if let Some(v) = kv.take("points_per_block")? {
            self.points_per_block = v;
        }
        if let Some(v) = kv.take_list("radii")? {
            self.radii = v;
        }
        if let Some(v) = kv.take("min_points")? {
            self.min_points = v;
        }
        if let Some(v) = kv.take("max_attempts")? {
            self.max_attempts = v;
        }
        Ok(())
    }

    pub fn to_config_lines(&self) -> String {
        format!(
            "block_size = {}\ntrain_stride = {}\ntest_stride = {}\npoints_per_block = {}\nradii = {}\nmin_points = {}\nmax_attempts = {}\n",
            self.block_size,
            self.train_stride,
            self.test_stride,
            self.points_per_block,
            format_list(&self.radii),
            self.min_points,
            self.max_attempts
        )
    }
}

fn windows_along(extent: f64, size: f64, stride: f64) -> usize {
    if extent <= size {
        1
    } else {
        ((extent - size) / stride).ceil() as usize + 1
    }
}

/// Window indices along one axis whose half-open span holds `v`.
fn axis_windows(v: f64, min: f64, n: usize, size: f64, stride: f64, out: &mut Vec<usize>) {
    out.clear();
    let hi = (((v - min) / stride).floor().max(0.0) as usize + 1).min(n - 1);
    let reach = (size / stride).ceil() as usize + 1;
    for i in hi.saturating_sub(reach)..=hi {
        let lo = min + i as f64 * stride;
        let up = lo + size;
        if v >= lo && (v < up || (i == n - 1 && v <= up)) {
            out.push(i);
        }
    }
}

/// Splits a cloud into XY windows of side `block_size` at multiples of the
/// mode's stride, starting at the cloud's minimum corner.
///
/// Windows with fewer than `min_points` points are dropped. In test mode the
/// surviving blocks are pairwise disjoint.
pub fn split_into_blocks(cloud: &LabeledPointCloud, cfg: &SamplerConfig, mode: Mode) -> Result<Vec<Block>> {
    if cloud.is_empty() {
        return Err(Error::Argument("cannot split an empty cloud".into()));
    }
    cfg.validate()?;
    let b = cloud.bounds();
    let (size, stride) = (cfg.block_size, cfg.stride(mode));
    let min = [b.min[0] as f64, b.min[1] as f64];
    let nx = windows_along(b.extent(0), size, stride);
    let ny = windows_along(b.extent(1), size, stride);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); nx * ny];
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (p, pos) in cloud.positions().iter().enumerate() {
        axis_windows(pos[0] as f64, min[0], nx, size, stride, &mut xs);
        axis_windows(pos[1] as f64, min[1], ny, size, stride, &mut ys);
        for &ix in &xs {
            for &iy in &ys {
                members[ix * ny + iy].push(p);
            }
        }
    }
    let r = size / 2.0;
    let blocks = members
        .into_iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty() && m.len() >= cfg.min_points)
        .map(|(k, point_indices)| {
            let (ix, iy) = (k / ny, k % ny);
            Block {
                point_indices,
                cell: BlockCell::Grid { ix, iy },
                origin: [min[0] + ix as f64 * stride, min[1] + iy as f64 * stride],
                scale: r,
            }
        })
        .collect();
    Ok(blocks)
}

/// A block resampled to a fixed number of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSample {
    /// `N x D` features with X and Y relative to the block center.
    pub features: Tensor<f64>,
    /// Cloud index of every row.
    pub source: Vec<usize>,
}

/// Draws exactly `n` rows from a block.
///
/// Blocks with at least `n` points give a uniform subset without
/// replacement; smaller blocks contribute every point once and are padded
/// with uniform draws with replacement. `features` is the cloud-level matrix
/// from [`crate::pointcloud::assemble_features`].
pub fn sample_block_points<R: Rng + ?Sized>(
    block: &Block,
    features: &Tensor<f64>,
    n: usize,
    rng: &mut R,
) -> Result<BlockSample> {
    if block.is_empty() {
        return Err(Error::Argument("cannot sample an empty block".into()));
    }
    if n < 1 {
        return Err(Error::Argument("points per block must be at least 1".into()));
    }
    let m = block.len();
    let picks: Vec<usize> = if m >= n {
        index::sample(rng, m, n).into_iter().collect()
    } else {
        let mut all: Vec<usize> = (0..m).collect();
        all.shuffle(rng);
        all.extend((m..n).map(|_| rng.gen_range(0..m)));
        all
    };
    let source: Vec<usize> = picks.iter().map(|&k| block.point_indices[k]).collect();
    Ok(BlockSample { features: localize(features, &source, block.center())?, source })
}

/// Gathers rows and shifts X, Y to be relative to `center`.
pub fn localize(features: &Tensor<f64>, rows: &[usize], center: [f64; 2]) -> Result<Tensor<f64>> {
    let mut t = features.gather_rows(rows)?;
    let d = t.cols();
    for row in t.data_mut().chunks_exact_mut(d) {
        row[0] -= center[0];
        row[1] -= center[1];
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    /// One block on its own.
    Single,
    Grid2x2,
    MultiScale,
}

/// Blocks processed together.
///
/// Grid groups hold four blocks in row-major order `(0,0), (0,1), (1,0),
/// (1,1)`; multi-scale groups hold one block per radius, ascending.
/// `samples` is empty until [`BlockGroup::resample`] runs.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGroup {
    pub kind: GroupKind,
    pub blocks: Vec<Block>,
    /// Grid slots filled by copying a neighbor because the cell was missing.
    pub duplicated: Vec<bool>,
    pub samples: Vec<BlockSample>,
}

impl BlockGroup {
    /// Redraws every block's fixed-size sample.
    pub fn resample<R: Rng + ?Sized>(&mut self, features: &Tensor<f64>, n: usize, rng: &mut R) -> Result<()> {
        self.samples = self
            .blocks
            .iter()
            .map(|b| sample_block_points(b, features, n, rng))
            .collect::<Result<_>>()?;
        Ok(())
    }
}

/// Wraps every block as its own group.
pub fn single_groups(blocks: &[Block]) -> Vec<BlockGroup> {
    blocks
        .iter()
        .map(|b| BlockGroup { kind: GroupKind::Single, blocks: vec![b.clone()], duplicated: vec![false], samples: Vec::new() })
        .collect()
}

const SLOTS: [(usize, usize); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

/// Groups grid blocks into 2x2 neighborhoods.
///
/// Train mode slides over every neighborhood and skips those with fewer
/// than two present cells. Test mode tiles the grid into disjoint
/// neighborhoods anchored at even cells and emits every non-empty tile, so
/// each block lands in exactly one group. Missing slots copy the nearest
/// present member (ties to the lower slot) and are flagged.
pub fn grid_groups(blocks: &[Block], mode: Mode) -> Vec<BlockGroup> {
    let cells: BTreeMap<(usize, usize), usize> = blocks
        .iter()
        .enumerate()
        .filter_map(|(k, b)| match b.cell {
            BlockCell::Grid { ix, iy } => Some(((ix, iy), k)),
            BlockCell::Center(_) => None,
        })
        .collect();
    let Some(nx) = cells.keys().map(|c| c.0 + 1).max() else { return Vec::new() };
    let ny = cells.keys().map(|c| c.1 + 1).max().unwrap_or(1);

    let (anchors_x, anchors_y, min_present): (Vec<usize>, Vec<usize>, usize) = match mode {
        Mode::Train => ((0..nx.saturating_sub(1).max(1)).collect(), (0..ny.saturating_sub(1).max(1)).collect(), 2),
        Mode::Test => ((0..nx).step_by(2).collect(), (0..ny).step_by(2).collect(), 1),
    };
    let mut groups = Vec::new();
    for &ax in &anchors_x {
        for &ay in &anchors_y {
            let present: Vec<Option<usize>> =
                SLOTS.iter().map(|&(dx, dy)| cells.get(&(ax + dx, ay + dy)).copied()).collect();
            if present.iter().flatten().count() < min_present {
                continue;
            }
            let mut members = Vec::with_capacity(4);
            let mut duplicated = Vec::with_capacity(4);
            for (s, p) in present.iter().enumerate() {
                match p {
                    Some(k) => {
                        members.push(blocks[*k].clone());
                        duplicated.push(false);
                    }
                    None => {
                        let nearest = (0..4)
                            .filter(|&t| present[t].is_some())
                            .min_by_key(|&t| {
                                let (a, b) = (SLOTS[s], SLOTS[t]);
                                (a.0.abs_diff(b.0) + a.1.abs_diff(b.1), t)
                            })
                            .and_then(|t| present[t])
                            .expect("at least one member");
                        members.push(blocks[nearest].clone());
                        duplicated.push(true);
                    }
                }
            }
            groups.push(BlockGroup { kind: GroupKind::Grid2x2, blocks: members, duplicated, samples: Vec::new() });
        }
    }
    groups
}

/// Concentric windows around `center`, one per radius, ascending.
pub fn concentric_blocks(cloud: &LabeledPointCloud, center: [f64; 2], radii: &[f64]) -> Vec<Block> {
    let largest = *radii.last().expect("at least one radius");
    let mut outer: Vec<(usize, f64)> = Vec::new();
    for (i, p) in cloud.positions().iter().enumerate() {
        let d = (p[0] as f64 - center[0]).abs().max((p[1] as f64 - center[1]).abs());
        if d <= largest {
            outer.push((i, d));
        }
    }
    radii
        .iter()
        .map(|&r| Block {
            point_indices: outer.iter().filter(|(_, d)| *d <= r).map(|(i, _)| *i).collect(),
            cell: BlockCell::Center(center),
            origin: [center[0] - r, center[1] - r],
            scale: r,
        })
        .collect()
}

/// One multi-scale group around a randomly drawn point.
///
/// A center is accepted when its largest window holds at least
/// `min_points` points; every window is then resampled to
/// `points_per_block` rows independently.
pub fn multiscale_sample<R: Rng + ?Sized>(
    cloud: &LabeledPointCloud,
    features: &Tensor<f64>,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<BlockGroup> {
    cfg.validate()?;
    if cloud.is_empty() {
        return Err(Error::SamplingExhausted { attempts: 0 });
    }
    for _ in 0..cfg.max_attempts {
        let p = cloud.positions()[rng.gen_range(0..cloud.len())];
        let blocks = concentric_blocks(cloud, [p[0] as f64, p[1] as f64], &cfg.radii);
        if blocks.last().map_or(0, Block::len) < cfg.min_points.max(1) {
            continue;
        }
        let n = blocks.len();
        let mut group =
            BlockGroup { kind: GroupKind::MultiScale, blocks, duplicated: vec![false; n], samples: Vec::new() };
        group.resample(features, cfg.points_per_block, rng)?;
        return Ok(group);
    }
    Err(Error::SamplingExhausted { attempts: cfg.max_attempts })
}
