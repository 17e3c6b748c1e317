//! Desk-scale experiments: an overfit run on plain rooms and the
//! context-benefit benchmark on coupled rooms. Shared by the examples and
//! the acceptance tests.

use std::path::Path;

use crate::error::{Error, Result};
use crate::models::Variant;
use crate::pointcloud::{synth_scene, LabeledPointCloud, SceneRecipe};
use crate::tensor::Real;
use crate::training::{predict_scene, EpochReport, TrainConfig, Trainer};

/// Labels of the two box classes in a coupled room.
pub const COUPLED_TARGETS: [usize; 2] = [3, 4];

/// Model widths small enough for CPU runs of a few minutes.
pub fn desk_config(variant: Variant, seed: u64) -> TrainConfig {
    let mut c = TrainConfig::new(variant);
    c.seed = seed;
    c.sampler.seed = seed;
    c.model.point_mlp_widths = vec![32, 64];
    c.model.block_feature_dim = 128;
    c.model.cu_widths = vec![64];
    c.model.rcu_hidden = 64;
    c.model.head_widths = vec![128, 64];
    c.sampler.points_per_block = 256;
    c.sampler.min_points = 16;
    c.adam.lr = 2e-3;
    c
}

/// Two furnished 4 x 4 x 3 m rooms with color, about 10k points each.
pub fn overfit_scenes(seed: u64) -> Result<Vec<LabeledPointCloud>> {
    (0..2)
        .map(|k| synth_scene(&SceneRecipe { seed: seed * 2 + k, density: 110.0, ..SceneRecipe::default() }))
        .collect()
}

pub fn overfit_config(variant: Variant, seed: u64) -> TrainConfig {
    let mut c = desk_config(variant, seed);
    c.epochs = 300;
    c.use_color = Some(true);
    c
}

#[derive(Debug, Clone)]
pub struct OverfitOutcome {
    /// Epochs run before the target was met, or the budget ran out.
    pub epochs: usize,
    /// Point accuracy of full-scene inference over the training rooms.
    pub accuracy: f64,
    pub reports: Vec<EpochReport>,
}

/// Point accuracy of [`predict_scene`] pooled over `clouds`.
pub fn scene_accuracy<T: Real>(clouds: &[LabeledPointCloud], trainer: &Trainer<T>) -> Result<f64> {
    let (mut hit, mut total) = (0usize, 0usize);
    for c in clouds {
        let pred = predict_scene(c, trainer.params(), &trainer.config().sampler, trainer.config().seed)?;
        hit += pred.iter().zip(c.labels()).filter(|(p, g)| p == g).count();
        total += c.len();
    }
    Ok(hit as f64 / total as f64)
}

/// Trains on `clouds` until full-scene accuracy reaches `target`, testing
/// every `check_every` epochs, for at most `cfg.epochs` epochs. The final
/// state is saved into `dir` when given.
pub fn run_overfit<T: Real>(
    clouds: Vec<LabeledPointCloud>,
    cfg: TrainConfig,
    target: f64,
    check_every: usize,
    dir: Option<&Path>,
) -> Result<OverfitOutcome> {
    if check_every < 1 {
        return Err(Error::Argument("check_every must be at least 1".into()));
    }
    let max = cfg.epochs;
    let mut trainer = Trainer::<T>::new(clouds.clone(), cfg)?;
    let mut accuracy = 0.0;
    while trainer.epoch() < max {
        let r = trainer.run_epoch()?;
        let e = trainer.epoch();
        // training accuracy is a cheap lower bound to wait for
        if (e % check_every == 0 || e == max) && r.accuracy >= target - 0.05 {
            accuracy = scene_accuracy(&clouds, &trainer)?;
            if accuracy >= target {
                break;
            }
        }
    }
    if let Some(d) = dir {
        trainer.save(d)?;
    }
    Ok(OverfitOutcome { epochs: trainer.epoch(), accuracy, reports: trainer.reports().to_vec() })
}

/// A 12 x 12 m coupled room without ceiling: 36 tiles of 2 x 2 m.
pub fn coupled_recipe(seed: u64) -> SceneRecipe {
    SceneRecipe {
        seed,
        extent: [12.0, 12.0, 3.0],
        ceiling: false,
        density: 40.0,
        context_coupling: true,
        ..SceneRecipe::default()
    }
}

/// `(train, test)` rooms of the context benchmark.
pub fn coupled_benchmark(seed: u64, train: usize, test: usize) -> Result<(Vec<LabeledPointCloud>, Vec<LabeledPointCloud>)> {
    let base = seed * 1000;
    let rooms = (0..(train + test) as u64)
        .map(|k| synth_scene(&coupled_recipe(base + k)))
        .collect::<Result<Vec<_>>>()?;
    let (a, b) = rooms.split_at(train);
    Ok((a.to_vec(), b.to_vec()))
}

pub fn coupled_config(variant: Variant, seed: u64) -> TrainConfig {
    let mut c = desk_config(variant, seed);
    c.epochs = 12;
    // 1 m steps keep training blocks aligned with the room's cells
    c.sampler.train_stride = 1.0;
    c
}

/// Accuracy over the points whose ground truth is one of the box classes.
pub fn coupled_accuracy(pred: &[usize], cloud: &LabeledPointCloud) -> f64 {
    let (mut hit, mut total) = (0usize, 0usize);
    for (&p, &g) in pred.iter().zip(cloud.labels()) {
        if COUPLED_TARGETS.contains(&g) {
            total += 1;
            hit += usize::from(p == g);
        }
    }
    hit as f64 / total.max(1) as f64
}

/// Trains `variant` on the training rooms and returns box-class accuracy
/// pooled over the test rooms.
pub fn run_coupled<T: Real>(
    variant: Variant,
    train: &[LabeledPointCloud],
    test: &[LabeledPointCloud],
    seed: u64,
) -> Result<f64> {
    let cfg = coupled_config(variant, seed);
    let mut trainer = Trainer::<T>::new(train.to_vec(), cfg)?;
    trainer.run(None, |_| {})?;
    let (mut hit, mut total) = (0.0, 0usize);
    for c in test {
        let pred = predict_scene(c, trainer.params(), &trainer.config().sampler, seed)?;
        let n = c.labels().iter().filter(|l| COUPLED_TARGETS.contains(l)).count();
        hit += coupled_accuracy(&pred, c) * n as f64;
        total += n;
    }
    Ok(hit / total.max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coupled_accuracy_counts_only_boxes() {
        let c = LabeledPointCloud::new(
            vec![[0.0; 3]; 4],
            None,
            vec![0, 3, 4, 4],
            LabeledPointCloud::default_class_names(7),
        )
        .unwrap();
        assert_eq!(coupled_accuracy(&[1, 3, 3, 4], &c), 2.0 / 3.0);
    }

    #[test]
    fn benchmark_rooms_hold_both_box_classes() {
        let (train, test) = coupled_benchmark(0, 2, 1).unwrap();
        assert_eq!((train.len(), test.len()), (2, 1));
        for c in train.iter().chain(&test) {
            for t in COUPLED_TARGETS {
                assert!(c.labels().contains(&t));
            }
        }
    }
}
