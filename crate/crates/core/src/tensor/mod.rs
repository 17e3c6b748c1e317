//! Dense tensors and the reverse-mode differentiation core.
//!
//! [`Tensor`] is a plain row-major array. Computation happens on a [`Tape`],
//! which records every operation so that [`Tape::backward`] can replay them
//! in reverse and populate gradients of the leaves. The operator set is
//! deliberately small: it covers the per-point MLPs, pooling, stacking,
//! concatenation, the GRU cell and the classification loss.

mod checkpoint;
mod gradcheck;
mod gru;
mod init;
mod optim;
mod tape;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gradcheck::{grad_check, grad_check_masked, grad_check_nonsmooth, relative_error, GradCheckReport};
pub use gru::{gru_step, GruParams, GruVars, GRU_TENSOR_NAMES};
pub use init::glorot_uniform;
pub use optim::{Adam, AdamConfig};
pub use tape::{BackwardFn, Tape, Var};

use std::fmt::{Debug, Display};

use crate::error::{Error, Result};

/// Numeric precision of a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    /// Reads `PTSEG_PRECISION` (`f32` or `f64`); unset means `f32`.
    pub fn from_env() -> Result<Self> {
        match std::env::var("PTSEG_PRECISION") {
            Err(_) => Ok(Precision::F32),
            Ok(v) => v.parse(),
        }
    }
}

impl std::str::FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            other => Err(Error::Argument(format!(
                "precision must be f32 or f64, got {other:?}"
            ))),
        }
    }
}

/// Scalar type a graph is built over.
pub trait Real:
    num_traits::Float + Default + Debug + Display + Send + Sync + std::iter::Sum + 'static
{
    const PRECISION: Precision;

    fn of_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;

    /// `c[m, n] += a[m, k] · b[k, n]` over strided views (row stride, column
    /// stride) of row-major buffers.
    fn gemm_acc(m: usize, k: usize, n: usize, a: (&[Self], usize, usize), b: (&[Self], usize, usize), c: &mut [Self]);
}

/// Bounds shared by both `gemm_acc` implementations.
fn check_gemm<T>(m: usize, k: usize, n: usize, a: (&[T], usize, usize), b: (&[T], usize, usize), c: &[T]) {
    let extent = |rows: usize, cols: usize, rs: usize, cs: usize| {
        if rows == 0 || cols == 0 {
            0
        } else {
            (rows - 1) * rs + (cols - 1) * cs + 1
        }
    };
    assert!(a.0.len() >= extent(m, k, a.1, a.2), "gemm: lhs buffer too short");
    assert!(b.0.len() >= extent(k, n, b.1, b.2), "gemm: rhs buffer too short");
    assert!(c.len() >= m * n, "gemm: output buffer too short");
}

impl Real for f32 {
    const PRECISION: Precision = Precision::F32;

    fn of_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }

    fn gemm_acc(m: usize, k: usize, n: usize, a: (&[Self], usize, usize), b: (&[Self], usize, usize), c: &mut [Self]) {
        check_gemm(m, k, n, a, b, c);
        // SAFETY: every index reached through the given strides was bounds-checked above.
        unsafe {
            matrixmultiply::sgemm(
                m, k, n, 1.0, a.0.as_ptr(), a.1 as isize, a.2 as isize, b.0.as_ptr(), b.1 as isize, b.2 as isize, 1.0,
                c.as_mut_ptr(), n as isize, 1,
            )
        }
    }
}

impl Real for f64 {
    const PRECISION: Precision = Precision::F64;

    fn of_f64(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }

    fn gemm_acc(m: usize, k: usize, n: usize, a: (&[Self], usize, usize), b: (&[Self], usize, usize), c: &mut [Self]) {
        check_gemm(m, k, n, a, b, c);
        // SAFETY: as for f32.
        unsafe {
            matrixmultiply::dgemm(
                m, k, n, 1.0, a.0.as_ptr(), a.1 as isize, a.2 as isize, b.0.as_ptr(), b.1 as isize, b.2 as isize, 1.0,
                c.as_mut_ptr(), n as isize, 1,
            )
        }
    }
}

/// Row-major dense array with an optional gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
    requires_grad: bool,
    grad: Option<Vec<T>>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Dimension(format!(
                "every extent must be at least 1, got {shape:?}"
            )));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} needs {expected} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data, requires_grad: false, grad: None })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), vec![T::zero(); n]).expect("zero extent")
    }

    pub fn scalar(v: T) -> Self {
        Tensor { shape: vec![1], data: vec![v], requires_grad: false, grad: None }
    }

    pub fn vector(data: Vec<T>) -> Self {
        let n = data.len();
        Tensor::new(vec![n], data).expect("empty vector")
    }

    /// Builds an `rows x cols` matrix from row slices.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Dimension(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Tensor::new(vec![rows.len(), cols], data)
    }

    pub fn from_f64_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let conv: Vec<Vec<T>> =
            rows.iter().map(|r| r.iter().map(|&v| T::of_f64(v)).collect()).collect();
        Self::from_rows(&conv)
    }

    /// Marks the tensor as a trainable leaf.
    pub fn with_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn set_requires_grad(&mut self, on: bool) {
        self.requires_grad = on;
    }

    pub fn grad(&self) -> Option<&[T]> {
        self.grad.as_deref()
    }

    pub fn grad_mut(&mut self) -> &mut Vec<T> {
        let n = self.data.len();
        self.grad.get_or_insert_with(|| vec![T::zero(); n])
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    /// Adds `delta` elementwise into the gradient buffer, creating it if needed.
    pub fn accumulate_grad(&mut self, delta: &[T]) {
        let g = self.grad_mut();
        for (a, &b) in g.iter_mut().zip(delta) {
            *a = *a + b;
        }
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Trailing extent for rank-2 tensors, 1 for vectors.
    pub fn cols(&self) -> usize {
        if self.shape.len() >= 2 {
            self.shape[1..].iter().product()
        } else {
            1
        }
    }

    pub fn row(&self, i: usize) -> &[T] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn at(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols() + j]
    }

    pub fn reshaped(&self, shape: Vec<usize>) -> Result<Self> {
        let mut t = Tensor::new(shape, self.data.clone())?;
        t.requires_grad = self.requires_grad;
        Ok(t)
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::of_f64(v.as_f64())).collect(),
            requires_grad: self.requires_grad,
            grad: self
                .grad
                .as_ref()
                .map(|g| g.iter().map(|v| U::of_f64(v.as_f64())).collect()),
        }
    }

    /// Row-gathers `indices` into a new `[indices.len(), cols]` tensor.
    pub fn gather_rows(&self, indices: &[usize]) -> Result<Self> {
        let c = self.cols();
        let mut data = Vec::with_capacity(indices.len() * c);
        for &i in indices {
            if i >= self.rows() {
                return Err(Error::Argument(format!(
                    "row index {i} out of range for {} rows",
                    self.rows()
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Tensor::new(vec![indices.len(), c], data)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
