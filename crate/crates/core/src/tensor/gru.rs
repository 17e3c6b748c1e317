use rand::Rng;

use super::{glorot_uniform, Real, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Weights of a gated recurrent unit.
///
/// Input matrices are `[hidden, input]`, recurrent matrices `[hidden, hidden]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams<T> {
    pub w_z: Tensor<T>,
    pub w_r: Tensor<T>,
    pub w_h: Tensor<T>,
    pub u_z: Tensor<T>,
    pub u_r: Tensor<T>,
    pub u_h: Tensor<T>,
    pub b_z: Tensor<T>,
    pub b_r: Tensor<T>,
    pub b_h: Tensor<T>,
}

/// The nine GRU tensors as leaves on a tape.
#[derive(Debug, Clone, Copy)]
pub struct GruVars {
    pub w_z: Var,
    pub w_r: Var,
    pub w_h: Var,
    pub u_z: Var,
    pub u_r: Var,
    pub u_h: Var,
    pub b_z: Var,
    pub b_r: Var,
    pub b_h: Var,
}

pub const GRU_TENSOR_NAMES: [&str; 9] = ["w_z", "w_r", "w_h", "u_z", "u_r", "u_h", "b_z", "b_r", "b_h"];

impl<T: Real> GruParams<T> {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let w = || Tensor::zeros(&[hidden_dim, input_dim]);
        let u = || Tensor::zeros(&[hidden_dim, hidden_dim]);
        let b = || Tensor::zeros(&[hidden_dim]);
        GruParams { w_z: w(), w_r: w(), w_h: w(), u_z: u(), u_r: u(), u_h: u(), b_z: b(), b_r: b(), b_h: b() }
    }

    /// Glorot-uniform matrices, zero biases.
    pub fn init<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let (h, d) = (hidden_dim, input_dim);
        GruParams {
            w_z: glorot_uniform(&[h, d], d, h, rng),
            w_r: glorot_uniform(&[h, d], d, h, rng),
            w_h: glorot_uniform(&[h, d], d, h, rng),
            u_z: glorot_uniform(&[h, h], h, h, rng),
            u_r: glorot_uniform(&[h, h], h, h, rng),
            u_h: glorot_uniform(&[h, h], h, h, rng),
            b_z: Tensor::zeros(&[h]),
            b_r: Tensor::zeros(&[h]),
            b_h: Tensor::zeros(&[h]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_z.shape()[1]
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_z.shape()[0]
    }

    /// Checks the nine tensors against each other.
    pub fn validate(&self) -> Result<()> {
        let (h, d) = (self.hidden_dim(), self.input_dim());
        for (name, t) in self.named() {
            let want: &[usize] = match &name[..1] {
                "w" => &[h, d],
                "u" => &[h, h],
                _ => &[h],
            };
            if t.shape() != want {
                return Err(Error::Dimension(format!(
                    "gru {name} has shape {:?}, expected {want:?}",
                    t.shape()
                )));
            }
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, &Tensor<T>); 9] {
        [
            ("w_z", &self.w_z),
            ("w_r", &self.w_r),
            ("w_h", &self.w_h),
            ("u_z", &self.u_z),
            ("u_r", &self.u_r),
            ("u_h", &self.u_h),
            ("b_z", &self.b_z),
            ("b_r", &self.b_r),
            ("b_h", &self.b_h),
        ]
    }

    pub fn bind(&self, tape: &mut Tape<T>) -> GruVars {
        GruVars {
            w_z: tape.param(self.w_z.clone()),
            w_r: tape.param(self.w_r.clone()),
            w_h: tape.param(self.w_h.clone()),
            u_z: tape.param(self.u_z.clone()),
            u_r: tape.param(self.u_r.clone()),
            u_h: tape.param(self.u_h.clone()),
            b_z: tape.param(self.b_z.clone()),
            b_r: tape.param(self.b_r.clone()),
            b_h: tape.param(self.b_h.clone()),
        }
    }
}

fn gate<T: Real>(tape: &mut Tape<T>, w: Var, x: Var, u: Var, h: Var, b: Var) -> Result<Var> {
    let wx = tape.matvec(w, x)?;
    let uh = tape.matvec(u, h)?;
    let s = tape.add(wx, uh)?;
    tape.add(s, b)
}

/// One GRU update.
///
/// `z = σ(W_z x + U_z h + b_z)`, `r = σ(W_r x + U_r h + b_r)`,
/// `h̃ = tanh(W_h x + U_h (r ⊙ h) + b_h)`, `h' = (1 − z) ⊙ h + z ⊙ h̃`.
pub fn gru_step<T: Real>(tape: &mut Tape<T>, x: Var, h: Var, p: &GruVars) -> Result<Var> {
    let (hd, xd) = (tape.value(p.w_z).shape().to_vec(), tape.value(x).shape().to_vec());
    if xd != [hd[1]] || tape.value(h).shape() != [hd[0]] {
        return Err(Error::Dimension(format!(
            "gru_step: x {:?} and h {:?} do not match weights {:?}",
            xd,
            tape.value(h).shape(),
            hd
        )));
    }
    let z_pre = gate(tape, p.w_z, x, p.u_z, h, p.b_z)?;
    let z = tape.sigmoid(z_pre);
    let r_pre = gate(tape, p.w_r, x, p.u_r, h, p.b_r)?;
    let r = tape.sigmoid(r_pre);
    let rh = tape.mul(r, h)?;
    let c_pre = gate(tape, p.w_h, x, p.u_h, rh, p.b_h)?;
    let candidate = tape.tanh(c_pre);
    // h + z ⊙ (h̃ − h) == (1 − z) ⊙ h + z ⊙ h̃
    let delta = tape.sub(candidate, h)?;
    let gated = tape.mul(z, delta)?;
    tape.add(h, gated)
}
