//! Finite-difference checks: the built-in suite, then a user-defined
//! function taped by hand.
//!
//! ```text
//! cargo run --release --example gradcheck
//! ```

use ptseg::checks::{gradient_suite, OP_TOL, SUITE_EPS};
use ptseg::tensor::{grad_check, Tensor};

fn main() -> ptseg::Result<()> {
    for e in gradient_suite(0)? {
        let r = &e.report;
        println!("{:<24} {:.2e} {}", e.name, r.worst(), if r.passed() { "ok" } else { "FAIL" });
    }

    // sum(tanh(x W + b) * x W) for a 3 x 4 input
    let x = Tensor::new(vec![3, 4], (0..12).map(|i| (i as f64 * 0.37).sin()).collect())?;
    let w = Tensor::new(vec![4, 2], (0..8).map(|i| (i as f64 * 0.91).cos() * 0.5).collect())?;
    let b = Tensor::vector(vec![0.1, -0.2]);
    let report = grad_check(
        |t, v| {
            let zero = t.constant(Tensor::zeros(&[2]));
            let h = t.linear(v[0], v[1], v[2])?;
            let a = t.tanh(h);
            let xw = t.linear(v[0], v[1], zero)?;
            let p = t.mul(a, xw)?;
            Ok(t.sum(p))
        },
        &[x, w, b],
        SUITE_EPS,
        OP_TOL,
    )?;
    println!("custom function          {:.2e} {}", report.worst(), if report.passed() { "ok" } else { "FAIL" });
    Ok(())
}
