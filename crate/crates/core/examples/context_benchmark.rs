//! Box-class accuracy of each architecture on coupled rooms, where only a
//! neighbouring cell tells the two box classes apart.
//!
//! ```text
//! cargo run --release --example context_benchmark -- [seed] [train] [test]
//! ```

use std::time::Instant;

use ptseg::models::Variant;
use ptseg::protocols::{coupled_benchmark, run_coupled};

fn main() -> ptseg::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let seed = args.first().copied().unwrap_or(0);
    let n_train = args.get(1).copied().unwrap_or(12) as usize;
    let n_test = args.get(2).copied().unwrap_or(4) as usize;
    let (train, test) = coupled_benchmark(seed, n_train, n_test)?;
    let points: usize = train.iter().map(|c| c.len()).sum();
    println!("{n_train} training rooms ({points} points), {n_test} test rooms");
    for v in Variant::ALL {
        let t = Instant::now();
        let acc = run_coupled::<f32>(v, &train, &test, seed)?;
        println!("{v:<9} box accuracy {:.3}  ({:.0}s)", acc, t.elapsed().as_secs_f64());
    }
    Ok(())
}
