//! Permutation checks on block descriptors and full models.

use ptseg::models::{ModelConfig, ModelParams, Variant};
use ptseg::tensor::{Real, Tape, Tensor};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn config(variant: Variant) -> ModelConfig {
    ModelConfig {
        point_mlp_widths: vec![16, 24],
        block_feature_dim: 32,
        cu_widths: vec![12, 20],
        cu_count: if variant == Variant::Baseline { 0 } else { 2 },
        rcu_hidden: 10,
        head_widths: vec![24],
        ..ModelConfig::new(variant, 9, 5)
    }
}

/// `n x 9` rows of pairwise distinct values.
pub fn block<T: Real>(r: &mut ChaCha8Rng, n: usize) -> Tensor<T> {
    Tensor::new(vec![n, 9], (0..n * 9).map(|_| T::of_f64(r.gen_range(-1.0..1.0))).collect()).unwrap()
}

pub fn permute<T: Real>(t: &Tensor<T>, order: &[usize]) -> Tensor<T> {
    t.gather_rows(order).unwrap()
}

pub fn bits<T: Real>(t: &Tensor<T>) -> Vec<u64> {
    t.data().iter().map(|v| v.as_f64().to_bits()).collect()
}

/// Scores of every scored sample of a group.
pub fn forward<T: Real>(params: &ModelParams<T>, samples: &[Tensor<T>]) -> Vec<Tensor<T>> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let vars: Vec<_> = samples.iter().map(|s| tape.constant(s.clone())).collect();
    let kind = params.config().variant.group_kind();
    let scored = bound.forward_group(&mut tape, kind, &vars).unwrap();
    scored.into_iter().map(|(_, v)| tape.value(v).clone()).collect()
}

pub fn descriptor<T: Real>(params: &ModelParams<T>, points: &Tensor<T>) -> Tensor<T> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let x = tape.constant(points.clone());
    let prefix = if params.config().variant == Variant::MsCu { "desc0" } else { "desc" };
    let (_, pooled) = bound.block_descriptor(&mut tape, x, prefix).unwrap();
    tape.value(pooled).clone()
}

pub fn group_size(v: Variant) -> usize {
    match v {
        Variant::Baseline => 1,
        Variant::MsCu => 3,
        Variant::GRcu => 4,
    }
}

/// Pooled descriptors of `blocks` random blocks, each under `perms` row
/// shuffles; counts the shuffles whose bits differ.
pub fn descriptor_violations(seed: u64, blocks: usize, perms: usize) -> usize {
    let mut r = rng(seed);
    let params = ModelParams::<f32>::init(config(Variant::Baseline), &mut r).unwrap();
    let mut bad = 0;
    for _ in 0..blocks {
        let n = r.gen_range(1..80);
        let x = block::<f32>(&mut r, n);
        let base = bits(&descriptor(&params, &x));
        let mut order: Vec<usize> = (0..n).collect();
        for _ in 0..perms {
            order.shuffle(&mut r);
            bad += usize::from(bits(&descriptor(&params, &permute(&x, &order))) != base);
        }
    }
    bad
}

/// Permutes the rows of each sample of a group in turn; that sample's
/// scores must move the same way and every other score must stay put.
/// Returns the number of output tensors that break this.
pub fn equivariance_violations<T: Real>(variant: Variant, seed: u64) -> usize {
    let mut r = rng(seed);
    let params = ModelParams::<T>::init(config(variant), &mut r).unwrap();
    let n = 24;
    let mut bad = 0;
    for target in 0..group_size(variant) {
        let samples: Vec<Tensor<T>> = (0..group_size(variant)).map(|_| block(&mut r, n)).collect();
        let base = forward(&params, &samples);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut r);
        let mut moved = samples.clone();
        moved[target] = permute(&samples[target], &order);
        let out = forward(&params, &moved);
        for (k, (o, b)) in out.iter().zip(&base).enumerate() {
            // the multi-scale model scores the middle sample only
            let scored_sample = if variant == Variant::MsCu { 1 } else { k };
            let expect = if scored_sample == target { permute(b, &order) } else { b.clone() };
            bad += usize::from(bits(o) != bits(&expect));
        }
    }
    bad
}
