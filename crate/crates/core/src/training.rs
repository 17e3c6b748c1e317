//! Training loop, trainer checkpoints and full-scene inference.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::blocking::{
    concentric_blocks, grid_groups, multiscale_sample, sample_block_points, single_groups, split_into_blocks, Block,
    BlockGroup, BlockSample, GroupKind, Mode, SamplerConfig,
};
use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::models::{ModelConfig, ModelParams, Variant};
use crate::pointcloud::{assemble_features, FeatureLayout, LabeledPointCloud};
use crate::rng::{derive, seeded};
use crate::tensor::{read_checkpoint, write_checkpoint, Adam, AdamConfig, Real, Tape, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Groups per optimizer step.
    pub batch_groups: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub sampler: SamplerConfig,
    /// `input_dim` and `num_classes` are filled from the data by
    /// [`TrainConfig::resolve`].
    pub model: ModelConfig,
    /// Save trainer state every this many epochs; 0 disables.
    pub checkpoint_every: usize,
    /// `None` uses color when every cloud has it.
    pub use_color: Option<bool>,
    /// Multi-scale groups drawn per cloud and epoch; `None` means
    /// `points / points_per_block`.
    pub ms_groups_per_cloud: Option<usize>,
}

impl TrainConfig {
    pub fn new(variant: Variant) -> Self {
        TrainConfig {
            epochs: 10,
            batch_groups: 4,
            adam: AdamConfig::default(),
            seed: 0,
            sampler: SamplerConfig::default(),
            model: ModelConfig::new(variant, 0, 0),
            checkpoint_every: 0,
            use_color: None,
            ms_groups_per_cloud: None,
        }
    }

    pub fn variant(&self) -> Variant {
        self.model.variant
    }

    /// Parses a config file. `variant` may be given in the file or by the
    /// caller; a value in the file wins.
    pub fn from_key_values(mut kv: KeyValues, default_variant: Variant) -> Result<Self> {
        let variant = match kv.take::<String>("variant")? {
            Some(v) => v.parse()?,
            None => default_variant,
        };
        let mut c = TrainConfig::new(variant);
        if let Some(v) = kv.take("epochs")? {
            c.epochs = v;
        }
        if let Some(v) = kv.take("batch_groups")? {
            c.batch_groups = v;
        }
        if let Some(v) = kv.take("lr")? {
            c.adam.lr = v;
        }
        if let Some(v) = kv.take("beta1")? {
            c.adam.beta1 = v;
        }
        if let Some(v) = kv.take("beta2")? {
            c.adam.beta2 = v;
        }
        if let Some(v) = kv.take("eps")? {
            c.adam.eps = v;
        }
        if let Some(v) = kv.take("seed")? {
            c.seed = v;
        }
        if let Some(v) = kv.take("checkpoint_every")? {
            c.checkpoint_every = v;
        }
        if let Some(v) = kv.take_bool("use_color")? {
            c.use_color = Some(v);
        }
        if let Some(v) = kv.take("ms_groups_per_cloud")? {
            c.ms_groups_per_cloud = Some(v);
        }
        c.sampler.take_from(&mut kv)?;
        c.model.take_overrides(&mut kv)?;
        kv.finish()?;
        c.sampler.seed = c.seed;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_groups < 1 {
            return Err(Error::Config("batch_groups must be at least 1".into()));
        }
        if !(self.adam.lr >= 0.0) || !(0.0..1.0).contains(&self.adam.beta1) || !(0.0..1.0).contains(&self.adam.beta2) {
            return Err(Error::Config("adam constants out of range".into()));
        }
        if self.variant() == Variant::MsCu && self.sampler.radii.len() != self.model.num_scales {
            return Err(Error::Config(format!(
                "ms_cu needs one radius per scale: {} radii, num_scales = {}",
                self.sampler.radii.len(),
                self.model.num_scales
            )));
        }
        self.sampler.validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_config_string(&self) -> String {
        let mut s = format!(
            "variant = {}\nepochs = {}\nbatch_groups = {}\nlr = {:?}\nbeta1 = {:?}\nbeta2 = {:?}\neps = {:?}\nseed = {}\ncheckpoint_every = {}\n",
            self.variant(),
            self.epochs,
            self.batch_groups,
            self.adam.lr,
            self.adam.beta1,
            self.adam.beta2,
            self.adam.eps,
            self.seed,
            self.checkpoint_every
        );
        if let Some(c) = self.use_color {
            s += &format!("use_color = {c}\n");
        }
        if let Some(g) = self.ms_groups_per_cloud {
            s += &format!("ms_groups_per_cloud = {g}\n");
        }
        s += &self.sampler.to_config_lines();
        let m = &self.model;
        s += &format!(
            "point_mlp_widths = {}\nblock_feature_dim = {}\ncu_widths = {}\ncu_count = {}\nrcu_hidden = {}\nhead_widths = {}\nnum_scales = {}\n",
            crate::config::format_list(&m.point_mlp_widths),
            m.block_feature_dim,
            crate::config::format_list(&m.cu_widths),
            m.cu_count,
            m.rcu_hidden,
            crate::config::format_list(&m.head_widths),
            m.num_scales
        );
        s
    }

    /// Fixes input width and class count from the training clouds.
    pub fn resolve(&mut self, clouds: &[LabeledPointCloud]) -> Result<()> {
        let first = clouds.first().ok_or_else(|| Error::Data("no training clouds".into()))?;
        if let Some(c) = clouds.iter().find(|c| c.class_names() != first.class_names()) {
            return Err(Error::Data(format!(
                "class lists differ between clouds: {:?} vs {:?}",
                first.class_names(),
                c.class_names()
            )));
        }
        let all_colored = clouds.iter().all(|c| c.colors().is_some());
        let color = match self.use_color {
            None => all_colored,
            Some(true) if !all_colored => {
                return Err(Error::Config("use_color = true but some clouds have no colors".into()))
            }
            Some(c) => c,
        };
        self.use_color = Some(color);
        self.model.input_dim = FeatureLayout { use_color: color }.dim();
        self.model.num_classes = first.num_classes();
        self.sampler.seed = self.seed;
        self.model.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    /// Mean per-point cross-entropy over the epoch.
    pub loss: f64,
    pub accuracy: f64,
    pub seconds: f64,
}

impl EpochReport {
    /// Equality of everything but wall-clock time, bit for bit.
    pub fn same_numbers(&self, other: &EpochReport) -> bool {
        self.epoch == other.epoch
            && self.loss.to_bits() == other.loss.to_bits()
            && self.accuracy.to_bits() == other.accuracy.to_bits()
    }

    /// Persisted form; wall-clock time is left out so that identical runs
    /// write identical files.
    pub fn to_line(self) -> String {
        format!("{} {:?} {:?}", self.epoch, self.loss, self.accuracy)
    }

    pub fn from_line(line: &str) -> Result<Self> {
        let bad = || Error::Data(format!("bad epoch report line {line:?}"));
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(bad());
        }
        Ok(EpochReport {
            epoch: f[0].parse().map_err(|_| bad())?,
            loss: f[1].parse().map_err(|_| bad())?,
            accuracy: f[2].parse().map_err(|_| bad())?,
            seconds: 0.0,
        })
    }
}

struct GroupOutcome<T> {
    loss: f64,
    correct: usize,
    grads: Vec<Option<Vec<T>>>,
}

struct Prepared {
    cloud: LabeledPointCloud,
    features: Tensor<f64>,
    groups: Vec<BlockGroup>,
}

/// Owns the data, parameters and optimizer state of one training run.
pub struct Trainer<T: Real> {
    cfg: TrainConfig,
    data: Vec<Prepared>,
    params: ModelParams<T>,
    adam: Adam<T>,
    epoch: usize,
    reports: Vec<EpochReport>,
}

/// Index of the largest score, ties to the lower class.
pub fn argmax<T: PartialOrd>(row: &[T]) -> usize {
    let mut best = 0;
    for (j, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = j;
        }
    }
    best
}

impl<T: Real> Trainer<T> {
    pub fn new(clouds: Vec<LabeledPointCloud>, mut cfg: TrainConfig) -> Result<Self> {
        cfg.resolve(&clouds)?;
        cfg.validate()?;
        let params = ModelParams::init(cfg.model.clone(), &mut seeded(cfg.seed))?;
        Self::with_params(clouds, cfg, params)
    }

    fn with_params(clouds: Vec<LabeledPointCloud>, mut cfg: TrainConfig, params: ModelParams<T>) -> Result<Self> {
        cfg.resolve(&clouds)?;
        let use_color = cfg.use_color.unwrap_or(false);
        let kind = cfg.variant().group_kind();
        let mut data = Vec::with_capacity(clouds.len());
        for cloud in clouds {
            let features = assemble_features(&cloud, use_color)?;
            let groups = match kind {
                GroupKind::MultiScale => Vec::new(),
                GroupKind::Single => single_groups(&split_into_blocks(&cloud, &cfg.sampler, Mode::Train)?),
                GroupKind::Grid2x2 => grid_groups(&split_into_blocks(&cloud, &cfg.sampler, Mode::Train)?, Mode::Train),
            };
            data.push(Prepared { cloud, features, groups });
        }
        if kind != GroupKind::MultiScale && data.iter().all(|d| d.groups.is_empty()) {
            return Err(Error::Data("no valid block groups in any training cloud".into()));
        }
        let adam = Adam::new(cfg.adam);
        Ok(Trainer { cfg, data, params, adam, epoch: 0, reports: Vec::new() })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    pub fn into_params(self) -> ModelParams<T> {
        self.params
    }

    pub fn reports(&self) -> &[EpochReport] {
        &self.reports
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn adam(&self) -> &Adam<T> {
        &self.adam
    }

    fn epoch_groups(&self) -> Result<Vec<(usize, BlockGroup)>> {
        let e = self.epoch as u64;
        let n = self.cfg.sampler.points_per_block;
        let mut groups = Vec::new();
        if self.cfg.variant().group_kind() == GroupKind::MultiScale {
            for (ci, d) in self.data.iter().enumerate() {
                let count = self.cfg.ms_groups_per_cloud.unwrap_or((d.cloud.len() / n).max(1));
                for j in 0..count {
                    let mut rng = derive(self.cfg.seed, &[e, 0, ci as u64, j as u64]);
                    match multiscale_sample(&d.cloud, &d.features, &self.cfg.sampler, &mut rng) {
                        Ok(g) => groups.push((ci, g)),
                        Err(Error::SamplingExhausted { .. }) => break,
                        Err(err) => return Err(err),
                    }
                }
            }
            if groups.is_empty() {
                return Err(Error::Data("no cloud yields a valid multi-scale group".into()));
            }
        } else {
            for (ci, d) in self.data.iter().enumerate() {
                groups.extend(d.groups.iter().map(|g| (ci, g.clone())));
            }
        }
        groups.shuffle(&mut derive(self.cfg.seed, &[e, 1]));
        if self.cfg.variant().group_kind() != GroupKind::MultiScale {
            for (k, (ci, g)) in groups.iter_mut().enumerate() {
                g.resample(&self.data[*ci].features, n, &mut derive(self.cfg.seed, &[e, 2, k as u64]))?;
            }
        }
        Ok(groups)
    }

    /// Scored rows a group contributes to the loss.
    fn supervised_rows(&self, g: &BlockGroup) -> usize {
        let n = self.cfg.sampler.points_per_block;
        match g.kind {
            GroupKind::Grid2x2 => g.duplicated.iter().filter(|d| !**d).count() * n,
            _ => n,
        }
    }

    /// One pass over freshly sampled groups.
    pub fn run_epoch(&mut self) -> Result<EpochReport> {
        let start = Instant::now();
        let groups = self.epoch_groups()?;
        let (mut loss_sum, mut rows, mut correct) = (0.0f64, 0usize, 0usize);
        for batch in groups.chunks(self.cfg.batch_groups) {
            let total: usize = batch.iter().map(|(_, g)| self.supervised_rows(g)).sum();
            for p in self.params.tensors_mut() {
                p.zero_grad();
            }
            // groups run in parallel; gradients are summed in group order
            let results: Vec<Result<GroupOutcome<T>>> =
                batch.par_iter().map(|(ci, g)| self.group_gradients(*ci, g, total)).collect();
            for r in results {
                let out = r?;
                loss_sum += out.loss * total as f64;
                correct += out.correct;
                for (p, grad) in self.params.tensors_mut().into_iter().zip(&out.grads) {
                    if let Some(grad) = grad {
                        p.accumulate_grad(grad);
                    }
                }
            }
            rows += total;
            let mut tensors = self.params.tensors_mut();
            for t in tensors.iter_mut() {
                t.grad_mut();
            }
            self.adam.step(&mut tensors)?;
        }
        for p in self.params.tensors_mut() {
            p.zero_grad();
        }
        let report = EpochReport {
            epoch: self.epoch,
            loss: loss_sum / rows as f64,
            accuracy: correct as f64 / rows as f64,
            seconds: start.elapsed().as_secs_f64(),
        };
        if !report.loss.is_finite() {
            return Err(Error::State(format!("non-finite loss in epoch {}", self.epoch)));
        }
        self.epoch += 1;
        self.reports.push(report);
        Ok(report)
    }

    /// Forward and backward for one group: its share of the batch loss,
    /// its correctly classified rows and per-parameter gradients.
    fn group_gradients(&self, ci: usize, g: &BlockGroup, total: usize) -> Result<GroupOutcome<T>> {
        let labels = self.data[ci].cloud.labels();
        let mut tape = Tape::<T>::new();
        let bound = self.params.bind(&mut tape);
        let xs: Vec<_> = g.samples.iter().map(|s| tape.constant(s.features.cast())).collect();
        let scored = bound.forward_group(&mut tape, g.kind, &xs)?;
        let mut loss = None;
        let mut correct = 0;
        for (si, scores) in scored {
            if g.duplicated[si] {
                continue;
            }
            let truth: Vec<usize> = g.samples[si].source.iter().map(|&i| labels[i]).collect();
            let s = tape.value(scores);
            correct += (0..s.rows()).filter(|&r| argmax(s.row(r)) == truth[r]).count();
            let ce = tape.softmax_cross_entropy(scores, &truth)?;
            let term = tape.scale(ce, T::of_f64(truth.len() as f64 / total as f64));
            loss = Some(match loss {
                None => term,
                Some(acc) => tape.add(acc, term)?,
            });
        }
        let loss = loss.ok_or_else(|| Error::State("group has no supervised block".into()))?;
        let value = tape.value(loss).data()[0].as_f64();
        tape.backward(loss)?;
        let grads = bound.vars().map(|(_, v)| tape.grad(v).map(<[T]>::to_vec)).collect();
        Ok(GroupOutcome { loss: value, correct, grads })
    }

    /// Runs the remaining epochs, saving state into `dir` on the configured
    /// schedule and once at the end.
    pub fn run(&mut self, dir: Option<&Path>, mut on_epoch: impl FnMut(&EpochReport)) -> Result<()> {
        while self.epoch < self.cfg.epochs {
            let r = self.run_epoch()?;
            on_epoch(&r);
            if let Some(d) = dir {
                let every = self.cfg.checkpoint_every;
                if (every > 0 && self.epoch % every == 0) || self.epoch == self.cfg.epochs {
                    self.save(d)?;
                }
            }
        }
        Ok(())
    }

    /// Writes `model.ckpt`, `model.manifest`, `optim.ckpt`, `train.cfg` and
    /// `trainer.state` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut buf = Vec::new();
        self.params.write(&mut buf)?;
        fs::write(dir.join("model.ckpt"), buf)?;
        fs::write(dir.join("model.manifest"), self.params.config().to_manifest())?;
        fs::write(dir.join("train.cfg"), self.cfg.to_config_string())?;

        let names: Vec<String> = self
            .params
            .named()
            .iter()
            .flat_map(|(n, _)| [format!("m.{n}"), format!("v.{n}")])
            .collect();
        let mut moments = Vec::new();
        for (k, (_, t)) in self.params.named().iter().enumerate() {
            let shape = t.shape().to_vec();
            let get = |m: &[Vec<T>]| m.get(k).cloned().unwrap_or_else(|| vec![T::zero(); t.len()]);
            moments.push(Tensor::new(shape.clone(), get(self.adam.first_moments()))?);
            moments.push(Tensor::new(shape, get(self.adam.second_moments()))?);
        }
        let named: Vec<(&str, &Tensor<T>)> = names.iter().map(String::as_str).zip(&moments).collect();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &named)?;
        fs::write(dir.join("optim.ckpt"), buf)?;

        let mut state = format!("epoch = {}\nadam_step = {}\n", self.epoch, self.adam.step_count());
        for r in &self.reports {
            state += &format!("report = {}\n", r.to_line());
        }
        fs::write(dir.join("trainer.state"), state)?;
        Ok(())
    }

    /// Restores a trainer saved by [`Trainer::save`] over the same data.
    pub fn resume(clouds: Vec<LabeledPointCloud>, dir: &Path) -> Result<Self> {
        let cfg = TrainConfig::from_key_values(KeyValues::read(&dir.join("train.cfg"))?, Variant::Baseline)?;
        let model_cfg = ModelConfig::from_manifest(&fs::read_to_string(dir.join("model.manifest"))?)?;
        let params = ModelParams::read(model_cfg, fs::File::open(dir.join("model.ckpt"))?)?;
        let mut t = Self::with_params(clouds, cfg, params)?;
        if t.cfg.model != *t.params.config() {
            return Err(Error::Data("checkpoint manifest does not match train.cfg and data".into()));
        }

        let text = fs::read_to_string(dir.join("trainer.state"))?;
        let (mut epoch, mut step) = (None, None);
        for line in text.lines() {
            let Some((k, v)) = line.split_once('=') else { continue };
            match k.trim() {
                "epoch" => epoch = v.trim().parse().ok(),
                "adam_step" => step = v.trim().parse().ok(),
                "report" => t.reports.push(EpochReport::from_line(v.trim())?),
                other => return Err(Error::Data(format!("unknown trainer.state key {other}"))),
            }
        }
        t.epoch = epoch.ok_or_else(|| Error::Data("trainer.state lacks epoch".into()))?;
        let step: u64 = step.ok_or_else(|| Error::Data("trainer.state lacks adam_step".into()))?;
        if step > 0 {
            let mut moments = read_checkpoint(fs::File::open(dir.join("optim.ckpt"))?)?.into_iter();
            let (mut m, mut v) = (Vec::new(), Vec::new());
            for (name, _) in t.params.named() {
                for (prefix, dst) in [("m.", &mut m), ("v.", &mut v)] {
                    let (n, tensor) = moments.next().ok_or_else(|| Error::Data("optim.ckpt is short".into()))?;
                    if n != format!("{prefix}{name}") {
                        return Err(Error::Data(format!("optim.ckpt: expected {prefix}{name}, found {n}")));
                    }
                    dst.push(tensor.cast::<T>().into_data());
                }
            }
            t.adam.restore(step, m, v)?;
        }
        Ok(t)
    }
}

/// Trains from scratch; saves into `dir` when given.
pub fn train<T: Real>(
    clouds: Vec<LabeledPointCloud>,
    cfg: TrainConfig,
    dir: Option<&Path>,
) -> Result<(ModelParams<T>, Vec<EpochReport>)> {
    let mut t = Trainer::new(clouds, cfg)?;
    t.run(dir, |_| {})?;
    let reports = t.reports.clone();
    Ok((t.into_params(), reports))
}

/// Splits `block` into `ceil(len / n)` chunks of near-equal size. Points
/// are dealt round-robin from a shuffled order, so each chunk is a uniform
/// subset of the whole block, like the random subsets seen in training.
fn chunks<R: rand::Rng>(block: &Block, n: usize, rng: &mut R) -> Vec<Block> {
    let k = block.len().div_ceil(n).max(1);
    let mut order = block.point_indices.clone();
    order.shuffle(rng);
    (0..k)
        .map(|j| Block { point_indices: order.iter().skip(j).step_by(k).copied().collect(), ..block.clone() })
        .collect()
}

/// Labels every point of a scene.
///
/// The room is split into disjoint test blocks. Blocks larger than
/// `points_per_block` are scored in several passes so that every point is
/// seen at least once. Each scored row votes for its argmax class; padded
/// duplicates vote too and ties go to the lower class. Points outside every
/// kept block take the most frequent predicted label.
pub fn predict_scene<T: Real>(
    cloud: &LabeledPointCloud,
    params: &ModelParams<T>,
    sampler: &SamplerConfig,
    seed: u64,
) -> Result<Vec<usize>> {
    let mc = params.config();
    let use_color = mc.input_dim == FeatureLayout { use_color: true }.dim();
    if use_color && cloud.colors().is_none() {
        return Err(Error::Data("model expects colors but the cloud has none".into()));
    }
    let m = mc.num_classes;
    let n = sampler.points_per_block;
    let features = assemble_features(cloud, use_color)?;
    let blocks = split_into_blocks(cloud, sampler, Mode::Test)?;
    let mut votes = vec![0u32; cloud.len() * m];
    let mut rng = seeded(seed);

    let mut score = |kind: GroupKind, samples: &[BlockSample], skip: &[bool]| -> Result<()> {
        let mut tape = Tape::<T>::new();
        let bound = params.bind(&mut tape);
        let xs: Vec<_> = samples.iter().map(|s| tape.constant(s.features.cast())).collect();
        for (si, scores) in bound.forward_group(&mut tape, kind, &xs)? {
            if skip[si] {
                continue;
            }
            let s = tape.value(scores);
            for (r, &src) in samples[si].source.iter().enumerate() {
                votes[src * m + argmax(s.row(r))] += 1;
            }
        }
        Ok(())
    };

    match mc.variant {
        Variant::Baseline => {
            for b in &blocks {
                for c in chunks(b, n, &mut rng) {
                    let s = sample_block_points(&c, &features, n, &mut rng)?;
                    score(GroupKind::Single, &[s], &[false])?;
                }
            }
        }
        Variant::GRcu => {
            for g in grid_groups(&blocks, Mode::Test) {
                let parts: Vec<Vec<Block>> = g.blocks.iter().map(|b| chunks(b, n, &mut rng)).collect();
                let passes = parts.iter().map(Vec::len).max().unwrap_or(0);
                for p in 0..passes {
                    let samples = parts
                        .iter()
                        .map(|c| sample_block_points(&c[p % c.len()], &features, n, &mut rng))
                        .collect::<Result<Vec<_>>>()?;
                    let skip: Vec<bool> = (0..4).map(|s| g.duplicated[s] || p >= parts[s].len()).collect();
                    score(GroupKind::Grid2x2, &samples, &skip)?;
                }
            }
        }
        Variant::MsCu => {
            let labeled = mc.labeled_scale();
            for b in &blocks {
                let mut windows = concentric_blocks(cloud, b.center(), &sampler.radii);
                for w in windows.iter_mut().filter(|w| w.is_empty()) {
                    w.point_indices = vec![nearest_point(cloud, b.center())];
                }
                let skip: Vec<bool> = (0..windows.len()).map(|s| s != labeled).collect();
                for c in chunks(b, n, &mut rng) {
                    let samples = windows
                        .iter()
                        .enumerate()
                        .map(|(s, w)| {
                            let w = if s == labeled { &c } else { w };
                            sample_block_points(w, &features, n, &mut rng)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    score(GroupKind::MultiScale, &samples, &skip)?;
                }
            }
        }
    }

    let mut labels: Vec<Option<usize>> = votes
        .chunks_exact(m)
        .map(|v| if v.iter().all(|&c| c == 0) { None } else { Some(argmax(v)) })
        .collect();
    let mut freq = vec![0usize; m];
    labels.iter().flatten().for_each(|&l| freq[l] += 1);
    let fallback = argmax(&freq);
    Ok(labels.iter_mut().map(|l| l.unwrap_or(fallback)).collect())
}

fn nearest_point(cloud: &LabeledPointCloud, c: [f64; 2]) -> usize {
    let d = |p: &[f32; 3]| (p[0] as f64 - c[0]).abs().max((p[1] as f64 - c[1]).abs());
    (0..cloud.len())
        .min_by(|&a, &b| d(&cloud.positions()[a]).total_cmp(&d(&cloud.positions()[b])).then(a.cmp(&b)))
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointcloud::{synth_scene, SceneRecipe};

    #[test]
    fn chunks_partition_evenly() {
        let block = Block { point_indices: (0..23).collect(), cell: crate::blocking::BlockCell::Grid { ix: 0, iy: 0 }, origin: [0.0; 2], scale: 0.5 };
        let parts = chunks(&block, 8, &mut seeded(3));
        assert_eq!(parts.len(), 3);
        assert!(parts.iter().all(|c| (7..=8).contains(&c.len())));
        let mut all: Vec<usize> = parts.iter().flat_map(|c| c.point_indices.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, block.point_indices);
        assert_eq!(chunks(&block, 64, &mut seeded(3)).len(), 1);
    }

    fn small_cfg(variant: Variant) -> TrainConfig {
        let mut c = TrainConfig::new(variant);
        c.epochs = 2;
        c.sampler.points_per_block = 16;
        c.sampler.min_points = 8;
        c.model.point_mlp_widths = vec![8];
        c.model.block_feature_dim = 8;
        c.model.cu_widths = vec![8];
        c.model.rcu_hidden = 4;
        c.model.head_widths = vec![8];
        c.ms_groups_per_cloud = Some(6);
        c
    }

    fn scene() -> LabeledPointCloud {
        synth_scene(&SceneRecipe { extent: [2.0, 2.0, 2.0], density: 20.0, ..Default::default() }).unwrap()
    }

    #[test]
    fn config_file_round_trip_and_unknown_keys() {
        let mut c = small_cfg(Variant::MsCu);
        c.use_color = Some(false);
        let back = TrainConfig::from_key_values(KeyValues::parse(&c.to_config_string()).unwrap(), Variant::Baseline).unwrap();
        assert_eq!(back, c);
        let kv = KeyValues::parse("epochs = 3\nlearning_rate = 0.1\n").unwrap();
        assert!(matches!(TrainConfig::from_key_values(kv, Variant::Baseline), Err(Error::Config(_))));
        let kv = KeyValues::parse("epochs = 0\n").unwrap();
        assert!(TrainConfig::from_key_values(kv, Variant::Baseline).is_err());
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        for v in Variant::ALL {
            let mut c = small_cfg(v);
            c.adam.lr = 0.0;
            let mut t = Trainer::<f32>::new(vec![scene()], c).unwrap();
            let before = t.params().clone();
            t.run(None, |_| {}).unwrap();
            let same = before.named().iter().zip(t.params().named()).all(|((_, a), (_, b))| {
                a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits())
            });
            assert!(same, "{v}");
        }
    }

    #[test]
    fn predictions_cover_every_point() {
        for v in Variant::ALL {
            let c = small_cfg(v);
            let sampler = c.sampler.clone();
            let cloud = scene();
            let (params, reports) = train::<f32>(vec![cloud.clone()], c, None).unwrap();
            assert_eq!(reports.len(), 2);
            let labels = predict_scene(&cloud, &params, &sampler, 0).unwrap();
            assert_eq!(labels.len(), cloud.len());
            assert!(labels.iter().all(|&l| l < cloud.num_classes()));
        }
    }

    #[test]
    fn empty_training_set_is_a_data_error() {
        assert!(matches!(Trainer::<f32>::new(vec![], small_cfg(Variant::Baseline)), Err(Error::Data(_))));
        let mut c = small_cfg(Variant::Baseline);
        c.sampler.min_points = 1_000_000;
        assert!(matches!(Trainer::<f32>::new(vec![scene()], c), Err(Error::Data(_))));
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[1.0f32, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0f64; 4]), 0);
    }
}
