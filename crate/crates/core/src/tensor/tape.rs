use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Backward rule for [`Tape::custom`]: receives the input values, the
/// output value and the upstream gradient, returns one gradient per input.
pub type BackwardFn<T> = Box<dyn Fn(&[&Tensor<T>], &Tensor<T>, &[T]) -> Vec<Vec<T>> + Send + Sync>;

enum Op<T> {
    Leaf,
    Linear { x: Var, w: Var, b: Var },
    LinearShared { x: Var, g: Var, w: Var, b: Var },
    MatVec { w: Var, x: Var },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    MaxPoolRows { x: Var, argmax: Vec<usize> },
    StackRows { g: Var },
    ConcatCols(Vec<Var>),
    Reshape(Var),
    Sum(Var),
    Scale(Var, T),
    SoftmaxCrossEntropy { logits: Var, labels: Vec<usize>, probs: Vec<T> },
    Custom { inputs: Vec<Var>, backward: BackwardFn<T> },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Records operations in execution order for reverse-mode differentiation.
///
/// Nodes are appended as operations run, so inputs always precede the nodes
/// that consume them and a single reverse sweep visits each node once.
/// Gradients of leaves created with `requires_grad` land in the leaf
/// tensor's own `grad` buffer and accumulate across `backward` calls until
/// [`Tape::zero_grad`] is called.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn grad_slot<'g, T: Real>(nodes: &[Node<T>], grads: &'g mut [Option<Vec<T>>], v: Var) -> Option<&'g mut Vec<T>> {
    if !nodes[v.0].needs_grad {
        return None;
    }
    let len = nodes[v.0].value.len();
    Some(grads[v.0].get_or_insert_with(|| vec![T::zero(); len]))
}

fn dim_err(op: &str, a: &[usize], b: &[usize]) -> Error {
    Error::Dimension(format!("{op}: incompatible shapes {a:?} and {b:?}"))
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Records a leaf; it is differentiated iff `t.requires_grad()`.
    pub fn leaf(&mut self, t: Tensor<T>) -> Var {
        let needs = t.requires_grad();
        self.push(t, Op::Leaf, needs)
    }

    /// Records a trainable leaf.
    pub fn param(&mut self, t: Tensor<T>) -> Var {
        self.leaf(t.with_grad())
    }

    /// Records a leaf that never receives a gradient.
    pub fn constant(&mut self, mut t: Tensor<T>) -> Var {
        t.set_requires_grad(false);
        self.leaf(t)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    /// Gradient accumulated on a leaf; `None` for interior nodes and for
    /// leaves no backward pass has reached.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.nodes[v.0].value.grad()
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            if matches!(n.op, Op::Leaf) {
                n.value.zero_grad();
            }
        }
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.value(x).shape(), self.value(w).shape(), self.value(b).shape());
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[0] {
            return Err(dim_err("linear", xs, ws));
        }
        if bs.len() != 1 || bs[0] != ws[1] {
            return Err(dim_err("linear bias", ws, bs));
        }
        let (n, din, dout) = (xs[0], xs[1], ws[1]);
        let (xd, wd, bd) = (self.value(x).data(), self.value(w).data(), self.value(b).data());
        let mut out = Vec::with_capacity(n * dout);
        for _ in 0..n {
            out.extend_from_slice(bd);
        }
        T::gemm_acc(n, din, dout, (xd, din, 1), (wd, dout, 1), &mut out);
        let needs = self.needs(x) || self.needs(w) || self.needs(b);
        let t = Tensor::new(vec![n, dout], out)?;
        Ok(self.push(t, Op::Linear { x, w, b }, needs))
    }

    /// `linear(concat_cols(x, stack_rows(g, N)), w, b)` without building the
    /// stacked copy: `x [N, Dx]`, `g [Dg]`, `w [Dx + Dg, Dout]`. The shared
    /// part `g · w[Dx..] + b` is computed once.
    pub fn linear_shared(&mut self, x: Var, g: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, gs, ws, bs) = (self.value(x).shape(), self.value(g).shape(), self.value(w).shape(), self.value(b).shape());
        if xs.len() != 2 || gs.len() != 1 || ws.len() != 2 || xs[1] + gs[0] != ws[0] {
            return Err(Error::Dimension(format!(
                "linear_shared: rows {xs:?} and shared {gs:?} do not match weight {ws:?}"
            )));
        }
        if bs.len() != 1 || bs[0] != ws[1] {
            return Err(dim_err("linear_shared bias", ws, bs));
        }
        let (n, dx, dout) = (xs[0], xs[1], ws[1]);
        let (xd, gd, wd) = (self.value(x).data(), self.value(g).data(), self.value(w).data());
        let mut shared = self.value(b).data().to_vec();
        for (k, &gv) in gd.iter().enumerate() {
            let wr = &wd[(dx + k) * dout..(dx + k + 1) * dout];
            for (o, &wv) in shared.iter_mut().zip(wr) {
                *o = *o + gv * wv;
            }
        }
        let mut out = Vec::with_capacity(n * dout);
        for _ in 0..n {
            out.extend_from_slice(&shared);
        }
        T::gemm_acc(n, dx, dout, (xd, dx, 1), (wd, dout, 1), &mut out);
        let needs = self.needs(x) || self.needs(g) || self.needs(w) || self.needs(b);
        let t = Tensor::new(vec![n, dout], out)?;
        Ok(self.push(t, Op::LinearShared { x, g, w, b }, needs))
    }

    /// `w [H, D] · x [D] -> [H]`.
    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var> {
        let (ws, xs) = (self.value(w).shape(), self.value(x).shape());
        if ws.len() != 2 || xs.len() != 1 || ws[1] != xs[0] {
            return Err(dim_err("matvec", ws, xs));
        }
        let (h, d) = (ws[0], ws[1]);
        let (wd, xd) = (self.value(w).data(), self.value(x).data());
        let out: Vec<T> = (0..h)
            .map(|r| wd[r * d..(r + 1) * d].iter().zip(xd).fold(T::zero(), |a, (&p, &q)| a + p * q))
            .collect();
        let needs = self.needs(w) || self.needs(x);
        Ok(self.push(Tensor::vector(out), Op::MatVec { w, x }, needs))
    }

    fn binary(&mut self, a: Var, b: Var, name: &str, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(dim_err(name, ta.shape(), tb.shape()));
        }
        let out = ta.data().iter().zip(tb.data()).map(|(&p, &q)| f(p, q)).collect();
        Tensor::new(ta.shape().to_vec(), out)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.binary(a, b, "add", |p, q| p + q)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(t, Op::Add(a, b), needs))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.binary(a, b, "sub", |p, q| p - q)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(t, Op::Sub(a, b), needs))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.binary(a, b, "mul", |p, q| p * q)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(t, Op::Mul(a, b), needs))
    }

    fn unary(&mut self, x: Var, f: impl Fn(T) -> T) -> Tensor<T> {
        let t = self.value(x);
        let out = t.data().iter().map(|&v| f(v)).collect();
        Tensor::new(t.shape().to_vec(), out).expect("shape preserved")
    }

    /// `max(0, x)`; the subgradient at 0 is 0.
    pub fn relu(&mut self, x: Var) -> Var {
        let t = self.unary(x, |v| if v > T::zero() { v } else { T::zero() });
        let needs = self.needs(x);
        self.push(t, Op::Relu(x), needs)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let t = self.unary(x, |v| {
            if v >= T::zero() {
                T::one() / (T::one() + (-v).exp())
            } else {
                let e = v.exp();
                e / (T::one() + e)
            }
        });
        let needs = self.needs(x);
        self.push(t, Op::Sigmoid(x), needs)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let t = self.unary(x, |v| v.tanh());
        let needs = self.needs(x);
        self.push(t, Op::Tanh(x), needs)
    }

    /// Column-wise maximum over the rows of `x [N, D]`.
    ///
    /// Ties go to the lowest row index. Returns the pooled `[D]` vector and
    /// the winning row of every column.
    pub fn max_pool_rows(&mut self, x: Var) -> Result<(Var, Vec<usize>)> {
        let t = self.value(x);
        if t.rank() != 2 {
            return Err(Error::Dimension(format!(
                "max_pool_rows expects a rank-2 tensor, got {:?}",
                t.shape()
            )));
        }
        let (n, d) = (t.shape()[0], t.shape()[1]);
        if n == 0 {
            return Err(Error::EmptyInput("max_pool_rows over zero rows".into()));
        }
        let data = t.data();
        let mut best = data[..d].to_vec();
        let mut argmax = vec![0usize; d];
        for i in 1..n {
            for j in 0..d {
                let v = data[i * d + j];
                if v > best[j] {
                    best[j] = v;
                    argmax[j] = i;
                }
            }
        }
        let needs = self.needs(x);
        let var = self.push(Tensor::vector(best), Op::MaxPoolRows { x, argmax: argmax.clone() }, needs);
        Ok((var, argmax))
    }

    /// Repeats the vector `g [D]` as `n` identical rows.
    pub fn stack_rows(&mut self, g: Var, n: usize) -> Result<Var> {
        if n < 1 {
            return Err(Error::Argument("stack_rows needs n >= 1".into()));
        }
        let t = self.value(g);
        if t.rank() != 1 {
            return Err(Error::Dimension(format!(
                "stack_rows expects a vector, got {:?}",
                t.shape()
            )));
        }
        let d = t.len();
        let mut out = Vec::with_capacity(n * d);
        for _ in 0..n {
            out.extend_from_slice(t.data());
        }
        let needs = self.needs(g);
        Ok(self.push(Tensor::new(vec![n, d], out)?, Op::StackRows { g }, needs))
    }

    /// Column-wise concatenation of `[N, D_i]` tensors, in argument order.
    pub fn concat_cols(&mut self, xs: &[Var]) -> Result<Var> {
        let first = xs
            .first()
            .ok_or_else(|| Error::Argument("concat_cols needs at least one input".into()))?;
        let n = self.value(*first).shape()[0];
        let mut widths = Vec::with_capacity(xs.len());
        for &x in xs {
            let s = self.value(x).shape();
            if s.len() != 2 || s[0] != n {
                return Err(dim_err("concat_cols", self.value(*first).shape(), s));
            }
            widths.push(s[1]);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(n * total);
        for i in 0..n {
            for &x in xs {
                out.extend_from_slice(self.value(x).row(i));
            }
        }
        let needs = xs.iter().any(|&x| self.needs(x));
        Ok(self.push(Tensor::new(vec![n, total], out)?, Op::ConcatCols(xs.to_vec()), needs))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let t = self.value(x).reshaped(shape)?;
        let needs = self.needs(x);
        Ok(self.push(t, Op::Reshape(x), needs))
    }

    /// Sum of all elements, as a `[1]` tensor.
    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().fold(T::zero(), |a, &v| a + v);
        let needs = self.needs(x);
        self.push(Tensor::scalar(s), Op::Sum(x), needs)
    }

    pub fn scale(&mut self, x: Var, c: T) -> Var {
        let t = self.unary(x, |v| v * c);
        let needs = self.needs(x);
        self.push(t, Op::Scale(x, c), needs)
    }

    /// Mean over rows of `-log softmax(logits)[i, labels[i]]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let t = self.value(logits);
        if t.rank() != 2 {
            return Err(Error::Dimension(format!(
                "softmax_cross_entropy expects [N, M] logits, got {:?}",
                t.shape()
            )));
        }
        let (n, m) = (t.shape()[0], t.shape()[1]);
        if labels.len() != n {
            return Err(Error::Dimension(format!(
                "softmax_cross_entropy: {} labels for {n} rows",
                labels.len()
            )));
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= m) {
            return Err(Error::Label { index, label, classes: m });
        }
        let mut probs = Vec::with_capacity(n * m);
        let mut total = T::zero();
        for (i, &label) in labels.iter().enumerate() {
            let row = t.row(i);
            let mx = row.iter().fold(T::neg_infinity(), |a, &v| a.max(v));
            let z = row.iter().fold(T::zero(), |a, &v| a + (v - mx).exp());
            let log_z = z.ln();
            total = total + (log_z - (row[label] - mx));
            probs.extend(row.iter().map(|&v| (v - mx).exp() / z));
        }
        let loss = total / T::of_f64(n as f64);
        let needs = self.needs(logits);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::SoftmaxCrossEntropy { logits, labels: labels.to_vec(), probs },
            needs,
        ))
    }

    /// Records an operation with a user-supplied backward rule.
    pub fn custom(&mut self, inputs: &[Var], value: Tensor<T>, backward: BackwardFn<T>) -> Var {
        let needs = inputs.iter().any(|&x| self.needs(x));
        self.push(value, Op::Custom { inputs: inputs.to_vec(), backward }, needs)
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::Argument(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(vec![T::one()]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].needs_grad {
                continue;
            }
            if matches!(self.nodes[i].op, Op::Leaf) {
                self.nodes[i].value.accumulate_grad(&g);
                continue;
            }
            self.propagate(i, &g, &mut grads);
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[i];
        let nodes = &self.nodes;
        match &node.op {
            Op::Leaf => {}
            Op::Linear { x, w, b } => {
                let (xs, ws) = (self.value(*x), self.value(*w));
                let (n, din, dout) = (xs.shape()[0], xs.shape()[1], ws.shape()[1]);
                if let Some(gx) = grad_slot(nodes, grads, *x) {
                    // gx += g · wᵀ
                    T::gemm_acc(n, dout, din, (g, dout, 1), (ws.data(), 1, dout), gx);
                }
                if let Some(gw) = grad_slot(nodes, grads, *w) {
                    // gw += xᵀ · g
                    T::gemm_acc(din, n, dout, (xs.data(), 1, din), (g, dout, 1), gw);
                }
                if let Some(gb) = grad_slot(nodes, grads, *b) {
                    for r in 0..n {
                        for (d, &gv) in gb.iter_mut().zip(&g[r * dout..(r + 1) * dout]) {
                            *d = *d + gv;
                        }
                    }
                }
            }
            Op::LinearShared { x, g: shared, w, b } => {
                let (xs, ws) = (self.value(*x), self.value(*w));
                let (n, dx, dout) = (xs.shape()[0], xs.shape()[1], ws.shape()[1]);
                let wd = ws.data();
                let mut colsum = vec![T::zero(); dout];
                for r in 0..n {
                    for (c, &gv) in colsum.iter_mut().zip(&g[r * dout..(r + 1) * dout]) {
                        *c = *c + gv;
                    }
                }
                if let Some(gx) = grad_slot(nodes, grads, *x) {
                    T::gemm_acc(n, dout, dx, (g, dout, 1), (&wd[..dx * dout], 1, dout), gx);
                }
                if let Some(gs) = grad_slot(nodes, grads, *shared) {
                    for (k, dst) in gs.iter_mut().enumerate() {
                        let wr = &wd[(dx + k) * dout..(dx + k + 1) * dout];
                        *dst = *dst + colsum.iter().zip(wr).fold(T::zero(), |a, (&p, &q)| a + p * q);
                    }
                }
                if let Some(gw) = grad_slot(nodes, grads, *w) {
                    T::gemm_acc(dx, n, dout, (xs.data(), 1, dx), (g, dout, 1), &mut gw[..dx * dout]);
                    for (k, &sv) in self.value(*shared).data().iter().enumerate() {
                        for (d, &cv) in gw[(dx + k) * dout..(dx + k + 1) * dout].iter_mut().zip(&colsum) {
                            *d = *d + sv * cv;
                        }
                    }
                }
                if let Some(gb) = grad_slot(nodes, grads, *b) {
                    gb.iter_mut().zip(&colsum).for_each(|(d, &c)| *d = *d + c);
                }
            }
            Op::MatVec { w, x } => {
                let (ws, xs) = (self.value(*w), self.value(*x));
                let d = ws.shape()[1];
                if let Some(gw) = grad_slot(nodes, grads, *w) {
                    for (r, &gv) in g.iter().enumerate() {
                        for (dst, &xv) in gw[r * d..(r + 1) * d].iter_mut().zip(xs.data()) {
                            *dst = *dst + gv * xv;
                        }
                    }
                }
                if let Some(gx) = grad_slot(nodes, grads, *x) {
                    for (r, &gv) in g.iter().enumerate() {
                        for (dst, &wv) in gx.iter_mut().zip(&ws.data()[r * d..(r + 1) * d]) {
                            *dst = *dst + gv * wv;
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if let Some(dst) = grad_slot(nodes, grads, v) {
                        dst.iter_mut().zip(g).for_each(|(d, &gv)| *d = *d + gv);
                    }
                }
            }
            Op::Sub(a, b) => {
                if let Some(dst) = grad_slot(nodes, grads, *a) {
                    dst.iter_mut().zip(g).for_each(|(d, &gv)| *d = *d + gv);
                }
                if let Some(dst) = grad_slot(nodes, grads, *b) {
                    dst.iter_mut().zip(g).for_each(|(d, &gv)| *d = *d - gv);
                }
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                if let Some(dst) = grad_slot(nodes, grads, *a) {
                    for ((d, &gv), &bv) in dst.iter_mut().zip(g).zip(bd) {
                        *d = *d + gv * bv;
                    }
                }
                if let Some(dst) = grad_slot(nodes, grads, *b) {
                    for ((d, &gv), &av) in dst.iter_mut().zip(g).zip(ad) {
                        *d = *d + gv * av;
                    }
                }
            }
            Op::Relu(x) => {
                let xd = self.value(*x).data();
                if let Some(dst) = grad_slot(nodes, grads, *x) {
                    for ((d, &gv), &xv) in dst.iter_mut().zip(g).zip(xd) {
                        if xv > T::zero() {
                            *d = *d + gv;
                        }
                    }
                }
            }
            Op::Sigmoid(x) => {
                let out = node.value.data();
                if let Some(dst) = grad_slot(nodes, grads, *x) {
                    for ((d, &gv), &s) in dst.iter_mut().zip(g).zip(out) {
                        *d = *d + gv * s * (T::one() - s);
                    }
                }
            }
            Op::Tanh(x) => {
                let out = node.value.data();
                if let Some(dst) = grad_slot(nodes, grads, *x) {
                    for ((d, &gv), &t) in dst.iter_mut().zip(g).zip(out) {
                        *d = *d + gv * (T::one() - t * t);
                    }
                }
            }
            Op::MaxPoolRows { x, argmax } => {
                let d = argmax.len();
                if let Some(dst) = grad_slot(nodes, grads, *x) {
                    for (j, &row) in argmax.iter().enumerate() {
                        dst[row * d + j] = dst[row * d + j] + g[j];
                    }
                }
            }
            Op::StackRows { g: src } => {
                if let Some(dst) = grad_slot(nodes, grads, *src) {
                    let d = dst.len();
                    for row in g.chunks_exact(d) {
                        dst.iter_mut().zip(row).for_each(|(a, &gv)| *a = *a + gv);
                    }
                }
            }
            Op::ConcatCols(xs) => {
                let n = node.value.shape()[0];
                let total = node.value.shape()[1];
                let mut offset = 0;
                for &x in xs {
                    let w = self.value(x).shape()[1];
                    if let Some(dst) = grad_slot(nodes, grads, x) {
                        for r in 0..n {
                            let src = &g[r * total + offset..r * total + offset + w];
                            dst[r * w..(r + 1) * w]
                                .iter_mut()
                                .zip(src)
                                .for_each(|(a, &gv)| *a = *a + gv);
                        }
                    }
                    offset += w;
                }
            }
            Op::Reshape(x) => {
                if let Some(dst) = grad_slot(nodes, grads, *x) {
                    dst.iter_mut().zip(g).for_each(|(d, &gv)| *d = *d + gv);
                }
            }
            Op::Sum(x) => {
                if let Some(dst) = grad_slot(nodes, grads, *x) {
                    dst.iter_mut().for_each(|d| *d = *d + g[0]);
                }
            }
            Op::Scale(x, c) => {
                if let Some(dst) = grad_slot(nodes, grads, *x) {
                    dst.iter_mut().zip(g).for_each(|(d, &gv)| *d = *d + gv * *c);
                }
            }
            Op::SoftmaxCrossEntropy { logits, labels, probs } => {
                let m = self.value(*logits).shape()[1];
                let coef = g[0] / T::of_f64(labels.len() as f64);
                if let Some(dst) = grad_slot(nodes, grads, *logits) {
                    for (i, &label) in labels.iter().enumerate() {
                        for j in 0..m {
                            let mut p = probs[i * m + j];
                            if j == label {
                                p = p - T::one();
                            }
                            dst[i * m + j] = dst[i * m + j] + coef * p;
                        }
                    }
                }
            }
            Op::Custom { inputs, backward } => {
                let vals: Vec<&Tensor<T>> = inputs.iter().map(|&v| self.value(v)).collect();
                let contributions = backward(&vals, &node.value, g);
                for (&v, c) in inputs.iter().zip(contributions) {
                    if let Some(dst) = grad_slot(nodes, grads, v) {
                        dst.iter_mut().zip(&c).for_each(|(d, &gv)| *d = *d + gv);
                    }
                }
            }
        }
    }
}
