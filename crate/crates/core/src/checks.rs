//! Finite-difference gradient suite over every tape operator, a GRU chain
//! and the three architectures at miniature size.

use rand::Rng;

use crate::blocking::GroupKind;
use crate::error::Result;
use crate::models::{ModelConfig, ModelParams, Variant};
use crate::rng::seeded;
use crate::tensor::{grad_check, grad_check_nonsmooth, gru_step, GradCheckReport, GruParams, GruVars, Tape, Tensor, Var};

pub const SUITE_EPS: f64 = 1e-5;
pub const OP_TOL: f64 = 1e-5;
pub const MODEL_TOL: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct SuiteEntry {
    pub name: String,
    pub report: GradCheckReport,
}

fn uniform<R: Rng>(rng: &mut R, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Values at least 0.1 away from zero.
fn off_kink<R: Rng>(rng: &mut R, shape: &[usize]) -> Tensor<f64> {
    let mut t = uniform(rng, shape);
    t.data_mut().iter_mut().for_each(|v| *v = v.signum() * (0.1 + v.abs()));
    t
}

/// Distinct entries per column, spaced well beyond the probe step.
fn spread<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Tensor<f64> {
    let mut data = vec![0.0; rows * cols];
    for c in 0..cols {
        let mut ranks: Vec<usize> = (0..rows).collect();
        for i in (1..rows).rev() {
            ranks.swap(i, rng.gen_range(0..=i));
        }
        for r in 0..rows {
            data[r * cols + c] = ranks[r] as f64 * 0.3 + rng.gen_range(0.0..0.1);
        }
    }
    Tensor::new(vec![rows, cols], data).unwrap()
}

/// `sum(out ⊙ weights)` with fixed random weights, so every output
/// element receives a distinct upstream gradient.
fn weighted_sum(tape: &mut Tape<f64>, out: Var, weights: &Tensor<f64>) -> Result<Var> {
    let w = tape.constant(weights.clone());
    let p = tape.mul(out, w)?;
    Ok(tape.sum(p))
}

/// Runs every check. Operators use tolerance [`OP_TOL`], full models
/// [`MODEL_TOL`] with probes straddling a pooling or ReLU kink excluded
/// (see [`grad_check_nonsmooth`]).
pub fn gradient_suite(seed: u64) -> Result<Vec<SuiteEntry>> {
    let mut rng = seeded(seed);
    let mut out = Vec::new();
    let mut push = |name: &str, report: GradCheckReport| out.push(SuiteEntry { name: name.into(), report });

    type Unary = fn(&mut Tape<f64>, Var) -> Result<Var>;
    let w34 = uniform(&mut rng, &[3, 4]);

    let (x, w, b) = (uniform(&mut rng, &[4, 3]), uniform(&mut rng, &[3, 5]), uniform(&mut rng, &[5]));
    let r = uniform(&mut rng, &[4, 5]);
    push(
        "linear",
        grad_check(
            |t, v| {
                let y = t.linear(v[0], v[1], v[2])?;
                weighted_sum(t, y, &r)
            },
            &[x, w, b],
            SUITE_EPS,
            OP_TOL,
        )?,
    );

    let (x, g, w, b) = (uniform(&mut rng, &[4, 3]), uniform(&mut rng, &[2]), uniform(&mut rng, &[5, 5]), uniform(&mut rng, &[5]));
    let r = uniform(&mut rng, &[4, 5]);
    push(
        "linear_shared",
        grad_check(
            |t, v| {
                let y = t.linear_shared(v[0], v[1], v[2], v[3])?;
                weighted_sum(t, y, &r)
            },
            &[x, g, w, b],
            SUITE_EPS,
            OP_TOL,
        )?,
    );

    let (w, x, r) = (uniform(&mut rng, &[4, 3]), uniform(&mut rng, &[3]), uniform(&mut rng, &[4]));
    push(
        "matvec",
        grad_check(
            |t, v| {
                let y = t.matvec(v[0], v[1])?;
                weighted_sum(t, y, &r)
            },
            &[w, x],
            SUITE_EPS,
            OP_TOL,
        )?,
    );

    let binaries: [(&str, fn(&mut Tape<f64>, Var, Var) -> Result<Var>); 3] =
        [("add", Tape::add), ("sub", Tape::sub), ("mul", Tape::mul)];
    for (name, op) in binaries {
        let (a, b) = (uniform(&mut rng, &[3, 4]), uniform(&mut rng, &[3, 4]));
        let report = grad_check(
            |t, v| {
                let y = op(t, v[0], v[1])?;
                weighted_sum(t, y, &w34)
            },
            &[a, b],
            SUITE_EPS,
            OP_TOL,
        )?;
        push(name, report);
    }

    let unaries: [(&str, Unary); 3] = [
        ("relu", |t, x| Ok(t.relu(x))),
        ("sigmoid", |t, x| Ok(t.sigmoid(x))),
        ("tanh", |t, x| Ok(t.tanh(x))),
    ];
    for (name, op) in unaries {
        let x = off_kink(&mut rng, &[3, 4]).cast::<f64>();
        let x = Tensor::new(vec![3, 4], x.data().iter().map(|v| v * 2.0).collect())?;
        let report = grad_check(
            |t, v| {
                let y = op(t, v[0])?;
                weighted_sum(t, y, &w34)
            },
            &[x],
            SUITE_EPS,
            OP_TOL,
        )?;
        push(name, report);
    }

    let x = spread(&mut rng, 5, 4);
    let r = uniform(&mut rng, &[4]);
    push(
        "max_pool_rows",
        grad_check(
            |t, v| {
                let (y, _) = t.max_pool_rows(v[0])?;
                weighted_sum(t, y, &r)
            },
            &[x],
            SUITE_EPS,
            OP_TOL,
        )?,
    );

    let g = uniform(&mut rng, &[4]);
    push(
        "stack_rows",
        grad_check(
            |t, v| {
                let y = t.stack_rows(v[0], 3)?;
                weighted_sum(t, y, &w34)
            },
            &[g],
            SUITE_EPS,
            OP_TOL,
        )?,
    );

    let (a, b) = (uniform(&mut rng, &[3, 2]), uniform(&mut rng, &[3, 2]));
    push(
        "concat_cols",
        grad_check(
            |t, v| {
                let y = t.concat_cols(&[v[0], v[1]])?;
                weighted_sum(t, y, &w34)
            },
            &[a, b],
            SUITE_EPS,
            OP_TOL,
        )?,
    );

    let x = uniform(&mut rng, &[3, 4]);
    let r = uniform(&mut rng, &[2, 6]);
    push(
        "reshape",
        grad_check(
            |t, v| {
                let y = t.reshape(v[0], vec![2, 6])?;
                weighted_sum(t, y, &r)
            },
            &[x.clone()],
            SUITE_EPS,
            OP_TOL,
        )?,
    );
    push("sum", grad_check(|t, v| Ok(t.sum(v[0])), &[x.clone()], SUITE_EPS, OP_TOL)?);
    push(
        "scale",
        grad_check(
            |t, v| {
                let y = t.scale(v[0], 1.7);
                weighted_sum(t, y, &w34)
            },
            &[x],
            SUITE_EPS,
            OP_TOL,
        )?,
    );

    let logits = uniform(&mut rng, &[5, 4]);
    let labels: Vec<usize> = (0..5).map(|_| rng.gen_range(0..4)).collect();
    push(
        "softmax_cross_entropy",
        grad_check(|t, v| t.softmax_cross_entropy(v[0], &labels), &[logits], SUITE_EPS, OP_TOL)?,
    );

    let gru = GruParams::<f64>::init(3, 4, &mut rng);
    let mut inputs: Vec<Tensor<f64>> = gru.named().iter().map(|(_, t)| (*t).clone()).collect();
    // recurrent weights from Glorot are small; widen them to exercise the gates
    for t in inputs.iter_mut().skip(3).take(3) {
        t.data_mut().iter_mut().for_each(|v| *v *= 2.0);
    }
    inputs.push(uniform(&mut rng, &[4]));
    for _ in 0..3 {
        inputs.push(uniform(&mut rng, &[3]));
    }
    push(
        "gru_step x3",
        grad_check(
            |t, v| {
                let p = GruVars { w_z: v[0], w_r: v[1], w_h: v[2], u_z: v[3], u_r: v[4], u_h: v[5], b_z: v[6], b_r: v[7], b_h: v[8] };
                let mut h = v[9];
                for &x in &v[10..13] {
                    h = gru_step(t, x, h, &p)?;
                }
                Ok(t.sum(h))
            },
            &inputs,
            SUITE_EPS,
            OP_TOL,
        )?,
    );

    for variant in Variant::ALL {
        let report = model_check(variant, &mut rng)?;
        push(&format!("model {variant}"), report);
    }
    Ok(out)
}

/// Miniature model: N = 8, D' = 16, M = 3, hidden widths 8 and 16.
pub fn miniature_config(variant: Variant) -> ModelConfig {
    ModelConfig {
        point_mlp_widths: vec![8, 16],
        block_feature_dim: 16,
        cu_widths: vec![8],
        cu_count: 1,
        rcu_hidden: 8,
        head_widths: vec![16, 8],
        ..ModelConfig::new(variant, 6, 3)
    }
}

/// Gradient check of the summed per-block cross-entropy with respect to
/// every parameter and every input block.
pub fn model_check<R: Rng>(variant: Variant, rng: &mut R) -> Result<GradCheckReport> {
    let params = ModelParams::<f64>::init(miniature_config(variant), rng)?;
    let mut inputs: Vec<Tensor<f64>> = params.named().iter().map(|(_, t)| t.clone()).collect();
    let np = inputs.len();
    let blocks = match variant {
        Variant::Baseline => 1,
        Variant::MsCu => 3,
        Variant::GRcu => 4,
    };
    for _ in 0..blocks {
        inputs.push(uniform(rng, &[8, 6]));
    }
    let labels: Vec<Vec<usize>> = (0..blocks).map(|_| (0..8).map(|_| rng.gen_range(0..3)).collect()).collect();
    let kind: GroupKind = variant.group_kind();
    grad_check_nonsmooth(
        |t, v| {
            let bound = params.bind_vars(&v[..np])?;
            let scored = bound.forward_group(t, kind, &v[np..])?;
            let mut loss = None;
            for (si, s) in scored {
                let ce = t.softmax_cross_entropy(s, &labels[si])?;
                loss = Some(match loss {
                    None => ce,
                    Some(acc) => t.add(acc, ce)?,
                });
            }
            Ok(loss.expect("at least one scored block"))
        },
        &inputs,
        SUITE_EPS,
        MODEL_TOL,
    )
}
