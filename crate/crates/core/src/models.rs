//! Segmentation networks: a simplified PointNet, a multi-scale variant with
//! consolidation units (MS-CU) and a 2x2 grid variant with a recurrent
//! consolidation unit (G-RCU).
//!
//! Parameters live in [`ModelParams`] as named tensors. A forward pass binds
//! them to a [`Tape`] once and runs on the resulting [`BoundParams`].

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::Rng;

use crate::blocking::GroupKind;
use crate::config::{format_list, KeyValues};
use crate::error::{Error, Result};
use crate::tensor::{
    glorot_uniform, gru_step, read_checkpoint, write_checkpoint, GruParams, GruVars, Real, Tape, Tensor, Var,
    GRU_TENSOR_NAMES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Baseline,
    MsCu,
    GRcu,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Baseline, Variant::MsCu, Variant::GRcu];

    pub fn group_kind(self) -> GroupKind {
        match self {
            Variant::Baseline => GroupKind::Single,
            Variant::MsCu => GroupKind::MultiScale,
            Variant::GRcu => GroupKind::Grid2x2,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Baseline => "baseline",
            Variant::MsCu => "ms_cu",
            Variant::GRcu => "g_rcu",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Variant::Baseline),
            "ms_cu" => Ok(Variant::MsCu),
            "g_rcu" => Ok(Variant::GRcu),
            _ => Err(Error::Config(format!("unknown variant {s:?} (expected baseline, ms_cu or g_rcu)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub variant: Variant,
    pub input_dim: usize,
    pub num_classes: usize,
    pub point_mlp_widths: Vec<usize>,
    pub block_feature_dim: usize,
    /// Layer widths inside every consolidation unit.
    pub cu_widths: Vec<usize>,
    pub cu_count: usize,
    pub rcu_hidden: usize,
    pub head_widths: Vec<usize>,
    /// Concentric windows per multi-scale group.
    pub num_scales: usize,
}

impl ModelConfig {
    pub fn new(variant: Variant, input_dim: usize, num_classes: usize) -> Self {
        ModelConfig {
            variant,
            input_dim,
            num_classes,
            point_mlp_widths: vec![64, 64, 128],
            block_feature_dim: 256,
            cu_widths: vec![256],
            cu_count: if variant == Variant::MsCu { 2 } else { 0 },
            rcu_hidden: 64,
            head_widths: vec![256, 128],
            num_scales: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.input_dim != 6 && self.input_dim != 9 {
            return bad(format!("input_dim must be 6 or 9, got {}", self.input_dim));
        }
        if self.num_classes < 2 {
            return bad(format!("num_classes must be at least 2, got {}", self.num_classes));
        }
        if self.point_mlp_widths.is_empty() || self.head_widths.is_empty() || self.cu_widths.is_empty() {
            return bad("layer width lists must be nonempty".into());
        }
        let widths = self.point_mlp_widths.iter().chain(&self.head_widths).chain(&self.cu_widths);
        if widths.chain([&self.block_feature_dim, &self.rcu_hidden]).any(|&w| w == 0) {
            return bad("layer widths must be positive".into());
        }
        if self.num_scales == 0 {
            return bad("num_scales must be at least 1".into());
        }
        Ok(())
    }

    /// Scale whose points the multi-scale model classifies.
    pub fn labeled_scale(&self) -> usize {
        self.num_scales / 2
    }

    fn descriptor_dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim];
        d.extend(&self.point_mlp_widths);
        d.push(self.block_feature_dim);
        d
    }

    /// Width of the per-point features entering the first CU (or the head).
    fn context_width(&self) -> usize {
        let f = self.block_feature_dim;
        match self.variant {
            Variant::Baseline => 2 * f,
            Variant::MsCu => f + self.num_scales * f,
            Variant::GRcu => 2 * f + self.rcu_hidden,
        }
    }

    /// Ordered `(name, shape)` of every parameter tensor.
    pub fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        let mut dense = |prefix: &str, dims: &[usize]| {
            for (k, w) in dims.windows(2).enumerate() {
                out.push((format!("{prefix}.layer{k}.w"), vec![w[0], w[1]]));
                out.push((format!("{prefix}.layer{k}.b"), vec![w[1]]));
            }
        };
        let desc = self.descriptor_dims();
        match self.variant {
            Variant::MsCu => (0..self.num_scales).for_each(|s| dense(&format!("desc{s}"), &desc)),
            _ => dense("desc", &desc),
        }
        let mut width = self.context_width();
        for c in 0..self.cu_count {
            let mut dims = vec![width];
            dims.extend(&self.cu_widths);
            dense(&format!("cu{c}"), &dims);
            width = 2 * self.cu_widths.last().unwrap();
        }
        let mut dims = vec![width];
        dims.extend(&self.head_widths);
        dims.push(self.num_classes);
        dense("head", &dims);
        if self.variant == Variant::GRcu {
            let (h, d) = (self.rcu_hidden, self.block_feature_dim);
            for name in GRU_TENSOR_NAMES {
                let shape = match &name[..1] {
                    "w" => vec![h, d],
                    "u" => vec![h, h],
                    _ => vec![h],
                };
                out.push((format!("rcu.{name}"), shape));
            }
        }
        out
    }

    /// Manifest lines that reconstruct this config exactly.
    pub fn to_manifest(&self) -> String {
        format!(
            "variant = {}\ninput_dim = {}\nnum_classes = {}\npoint_mlp_widths = {}\nblock_feature_dim = {}\ncu_widths = {}\ncu_count = {}\nrcu_hidden = {}\nhead_widths = {}\nnum_scales = {}\n",
            self.variant,
            self.input_dim,
            self.num_classes,
            format_list(&self.point_mlp_widths),
            self.block_feature_dim,
            format_list(&self.cu_widths),
            self.cu_count,
            self.rcu_hidden,
            format_list(&self.head_widths),
            self.num_scales
        )
    }

    pub fn from_manifest(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let variant: Variant = kv.take::<String>("variant")?.ok_or_else(|| Error::Config("manifest lacks variant".into()))?.parse()?;
        let need = |v: Option<usize>, k: &str| v.ok_or_else(|| Error::Config(format!("manifest lacks {k}")));
        let input_dim = need(kv.take("input_dim")?, "input_dim")?;
        let num_classes = need(kv.take("num_classes")?, "num_classes")?;
        let mut cfg = ModelConfig::new(variant, input_dim, num_classes);
        cfg.take_overrides(&mut kv)?;
        kv.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Consumes the optional architecture keys of a config file.
    pub fn take_overrides(&mut self, kv: &mut KeyValues) -> Result<()> {
        if let Some(v) = kv.take_list("point_mlp_widths")? {
            self.point_mlp_widths = v;
        }
        if let Some(v) = kv.take("block_feature_dim")? {
            self.block_feature_dim = v;
        }
        if let Some(v) = kv.take_list("cu_widths")? {
            self.cu_widths = v;
        }
        if let Some(v) = kv.take("cu_count")? {
            self.cu_count = v;
        }
        if let Some(v) = kv.take("rcu_hidden")? {
            self.rcu_hidden = v;
        }
        if let Some(v) = kv.take_list("head_widths")? {
            self.head_widths = v;
        }
        if let Some(v) = kv.take("num_scales")? {
            self.num_scales = v;
        }
        Ok(())
    }
}

/// Named parameter tensors in [`ModelConfig::layout`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    config: ModelConfig,
    tensors: Vec<(String, Tensor<T>)>,
}

impl<T: Real> ModelParams<T> {
    /// Glorot-uniform weights and zero biases.
    pub fn init<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut tensors = Vec::new();
        let layout = config.layout();
        let mut i = 0;
        while i < layout.len() {
            let (name, shape) = &layout[i];
            if name == "rcu.w_z" {
                let gru = GruParams::<T>::init(config.block_feature_dim, config.rcu_hidden, rng);
                for (n, t) in gru.named() {
                    tensors.push((format!("rcu.{n}"), t.clone()));
                }
                i += GRU_TENSOR_NAMES.len();
                continue;
            }
            let t = if shape.len() == 2 {
                glorot_uniform(shape, shape[0], shape[1], rng)
            } else {
                Tensor::zeros(shape)
            };
            tensors.push((name.clone(), t));
            i += 1;
        }
        Ok(ModelParams { config, tensors })
    }

    /// Every tensor zero.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let tensors = config.layout().into_iter().map(|(n, s)| (n, Tensor::zeros(&s))).collect();
        Ok(ModelParams { config, tensors })
    }

    /// Builds parameters from named tensors, checking names and shapes
    /// against the config.
    pub fn from_named(config: ModelConfig, named: Vec<(String, Tensor<T>)>) -> Result<Self> {
        config.validate()?;
        let layout = config.layout();
        if named.len() != layout.len() {
            return Err(Error::Data(format!("expected {} parameter tensors, got {}", layout.len(), named.len())));
        }
        for ((n, t), (ln, ls)) in named.iter().zip(&layout) {
            if n != ln || t.shape() != ls.as_slice() {
                return Err(Error::Data(format!(
                    "parameter {n} {:?} does not match expected {ln} {ls:?}",
                    t.shape()
                )));
            }
        }
        Ok(ModelParams { config, tensors: named })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn named(&self) -> &[(String, Tensor<T>)] {
        &self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.tensors.iter_mut().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.tensors.iter_mut().map(|(_, t)| t).collect()
    }

    /// Total scalar count.
    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        ModelParams {
            config: self.config.clone(),
            tensors: self.tensors.iter().map(|(n, t)| (n.clone(), t.cast())).collect(),
        }
    }

    /// Records every tensor as a trainable leaf.
    pub fn bind(&self, tape: &mut Tape<T>) -> BoundParams {
        let vars = self.tensors.iter().map(|(n, t)| (n.clone(), tape.param(t.clone()))).collect();
        BoundParams { config: self.config.clone(), vars }
    }

    /// Pairs already recorded leaves with parameter names, in layout order.
    pub fn bind_vars(&self, vars: &[Var]) -> Result<BoundParams> {
        if vars.len() != self.tensors.len() {
            return Err(Error::Argument(format!("{} vars for {} parameters", vars.len(), self.tensors.len())));
        }
        let vars = self.tensors.iter().zip(vars).map(|((n, _), v)| (n.clone(), *v)).collect();
        Ok(BoundParams { config: self.config.clone(), vars })
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let named: Vec<(&str, &Tensor<T>)> = self.tensors.iter().map(|(n, t)| (n.as_str(), t)).collect();
        write_checkpoint(out, &named)
    }

    pub fn read<R: Read>(config: ModelConfig, input: R) -> Result<Self> {
        let named = read_checkpoint(input)?.into_iter().map(|(n, t)| (n, t.cast())).collect();
        Self::from_named(config, named)
    }
}

/// Parameters recorded on a tape, addressed by name.
#[derive(Debug, Clone)]
pub struct BoundParams {
    config: ModelConfig,
    vars: Vec<(String, Var)>,
}

/// Per-block scores produced for one group: `(sample index, [N, M] scores)`.
pub type GroupScores = Vec<(usize, Var)>;

impl BoundParams {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Leaves in parameter order.
    pub fn vars(&self) -> impl Iterator<Item = (&str, Var)> {
        self.vars.iter().map(|(n, v)| (n.as_str(), *v))
    }

    pub fn var(&self, name: &str) -> Result<Var> {
        self.vars
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::State(format!("parameter {name} is not bound")))
    }

    fn gru(&self) -> Result<GruVars> {
        let v = |n: &str| self.var(&format!("rcu.{n}"));
        Ok(GruVars {
            w_z: v("w_z")?,
            w_r: v("w_r")?,
            w_h: v("w_h")?,
            u_z: v("u_z")?,
            u_r: v("u_r")?,
            u_h: v("u_h")?,
            b_z: v("b_z")?,
            b_r: v("b_r")?,
            b_h: v("b_h")?,
        })
    }

    /// Dense layers `prefix.layer0 .. prefix.layer{layers-1}`; ReLU after
    /// each, except the last one when `relu_last` is false.
    pub fn mlp<T: Real>(&self, tape: &mut Tape<T>, x: Var, prefix: &str, layers: usize, relu_last: bool) -> Result<Var> {
        self.mlp_shared(tape, x, None, prefix, layers, relu_last)
    }

    /// [`BoundParams::mlp`] over `concat_cols(x, stack_rows(shared))`; the
    /// shared columns enter the first layer once instead of once per row.
    fn mlp_shared<T: Real>(
        &self,
        tape: &mut Tape<T>,
        x: Var,
        shared: Option<Var>,
        prefix: &str,
        layers: usize,
        relu_last: bool,
    ) -> Result<Var> {
        let mut h = x;
        for k in 0..layers {
            let w = self.var(&format!("{prefix}.layer{k}.w"))?;
            let b = self.var(&format!("{prefix}.layer{k}.b"))?;
            h = match shared {
                Some(g) if k == 0 => tape.linear_shared(h, g, w, b)?,
                _ => tape.linear(h, w, b)?,
            };
            if relu_last || k + 1 < layers {
                h = tape.relu(h);
            }
        }
        Ok(h)
    }

    /// Shared per-point MLP to `D'` followed by max pooling.
    /// Returns `([N, D'] point features, [D'] block feature)`.
    pub fn block_descriptor<T: Real>(&self, tape: &mut Tape<T>, points: Var, prefix: &str) -> Result<(Var, Var)> {
        let layers = self.config.point_mlp_widths.len() + 1;
        let feats = self.mlp(tape, points, prefix, layers, true)?;
        let (pooled, _) = tape.max_pool_rows(feats)?;
        Ok((feats, pooled))
    }

    /// MLP to `F'`, pool, and append the pooled vector to every row: `[N, 2F']`.
    pub fn consolidation_unit<T: Real>(&self, tape: &mut Tape<T>, feats: Var, prefix: &str) -> Result<Var> {
        let (h, pooled) = self.cu_parts(tape, feats, None, prefix)?;
        let n = tape.value(h).rows();
        let global = tape.stack_rows(pooled, n)?;
        tape.concat_cols(&[h, global])
    }

    /// CU output as `(rows, pooled)`, the pooled half left unstacked.
    fn cu_parts<T: Real>(&self, tape: &mut Tape<T>, rows: Var, shared: Option<Var>, prefix: &str) -> Result<(Var, Var)> {
        let h = self.mlp_shared(tape, rows, shared, prefix, self.config.cu_widths.len(), true)?;
        let (pooled, _) = tape.max_pool_rows(h)?;
        Ok((h, pooled))
    }

    /// Chained CUs then the classification head, over
    /// `concat_cols(rows, stack_rows(shared))`.
    fn classify<T: Real>(&self, tape: &mut Tape<T>, rows: Var, shared: Var) -> Result<Var> {
        let (mut rows, mut shared) = (rows, shared);
        for c in 0..self.config.cu_count {
            (rows, shared) = self.cu_parts(tape, rows, Some(shared), &format!("cu{c}"))?;
        }
        self.mlp_shared(tape, rows, Some(shared), "head", self.config.head_widths.len() + 1, false)
    }

    /// Simplified PointNet: `[N, D]` points to `[N, M]` scores.
    pub fn pointnet_forward<T: Real>(&self, tape: &mut Tape<T>, points: Var) -> Result<Var> {
        let (pf, bf) = self.block_descriptor(tape, points, "desc")?;
        self.classify(tape, pf, bf)
    }

    /// Scores for the points of the labeled (middle) scale. `scales` holds
    /// one `[N, D]` sample per window, ascending radius.
    pub fn ms_cu_forward<T: Real>(&self, tape: &mut Tape<T>, scales: &[Var]) -> Result<Var> {
        if scales.len() != self.config.num_scales {
            return Err(Error::Dimension(format!(
                "expected {} scales, got {}",
                self.config.num_scales,
                scales.len()
            )));
        }
        let mut pooled = Vec::with_capacity(scales.len());
        let mut middle = None;
        for (s, &x) in scales.iter().enumerate() {
            let (pf, bf) = self.block_descriptor(tape, x, &format!("desc{s}"))?;
            if s == self.config.labeled_scale() {
                middle = Some(pf);
            }
            let d = tape.value(bf).len();
            pooled.push(tape.reshape(bf, vec![1, d])?);
        }
        let pf = middle.expect("labeled scale exists");
        let joined = tape.concat_cols(&pooled)?;
        let width = tape.value(joined).len();
        let joined = tape.reshape(joined, vec![width])?;
        self.classify(tape, pf, joined)
    }

    /// Recurrent consolidation: reads all block features, then emits one
    /// updated `[H]` feature per block while consuming zero inputs.
    pub fn rcu_forward<T: Real>(&self, tape: &mut Tape<T>, block_feats: &[Var], expected: usize) -> Result<Vec<Var>> {
        if block_feats.len() != expected {
            return Err(Error::Dimension(format!(
                "rcu expects {expected} block features, got {}",
                block_feats.len()
            )));
        }
        let gru = self.gru()?;
        let (hdim, ddim) = {
            let s = tape.value(gru.w_z).shape();
            (s[0], s[1])
        };
        let mut h = tape.constant(Tensor::zeros(&[hdim]));
        for &x in block_feats {
            h = gru_step(tape, x, h, &gru)?;
        }
        let mut out = Vec::with_capacity(expected);
        for _ in 0..expected {
            let zero = tape.constant(Tensor::zeros(&[ddim]));
            h = gru_step(tape, zero, h, &gru)?;
            out.push(h);
        }
        Ok(out)
    }

    /// Scores for the four blocks of a 2x2 group, in slot order.
    pub fn g_rcu_forward<T: Real>(&self, tape: &mut Tape<T>, blocks: &[Var]) -> Result<Vec<Var>> {
        let mut pfs = Vec::with_capacity(blocks.len());
        let mut bfs = Vec::with_capacity(blocks.len());
        for &x in blocks {
            let (pf, bf) = self.block_descriptor(tape, x, "desc")?;
            pfs.push(pf);
            bfs.push(bf);
        }
        let updated = self.rcu_forward(tape, &bfs, 4)?;
        let mut scores = Vec::with_capacity(blocks.len());
        for b in 0..blocks.len() {
            let (d, h) = (tape.value(bfs[b]).len(), tape.value(updated[b]).len());
            let orig = tape.reshape(bfs[b], vec![1, d])?;
            let upd = tape.reshape(updated[b], vec![1, h])?;
            let both = tape.concat_cols(&[orig, upd])?;
            let both = tape.reshape(both, vec![d + h])?;
            scores.push(self.classify(tape, pfs[b], both)?);
        }
        Ok(scores)
    }

    /// Runs the configured variant on one group's samples (already recorded
    /// on the tape) and returns the scored samples.
    pub fn forward_group<T: Real>(&self, tape: &mut Tape<T>, kind: GroupKind, samples: &[Var]) -> Result<GroupScores> {
        if kind != self.config.variant.group_kind() {
            return Err(Error::Argument(format!(
                "variant {} cannot process {kind:?} groups",
                self.config.variant
            )));
        }
        match self.config.variant {
            Variant::Baseline => {
                let x = *samples.first().ok_or_else(|| Error::Argument("empty group".into()))?;
                Ok(vec![(0, self.pointnet_forward(tape, x)?)])
            }
            Variant::MsCu => Ok(vec![(self.config.labeled_scale(), self.ms_cu_forward(tape, samples)?)]),
            Variant::GRcu => Ok(self.g_rcu_forward(tape, samples)?.into_iter().enumerate().collect()),
        }
    }
}

/// Parameter count by name prefix; handy for manifests and reports.
pub fn count_by_group<T: Real>(params: &ModelParams<T>) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for (n, t) in params.named() {
        let group = n.split('.').next().unwrap_or(n).to_string();
        *out.entry(group).or_insert(0) += t.len();
    }
    out
}
