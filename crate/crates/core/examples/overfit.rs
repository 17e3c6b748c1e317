//! Memorize two small furnished rooms: trains each architecture until
//! full-scene inference labels at least 99% of the training points.
//!
//! ```text
//! cargo run --release --example overfit -- [seed]
//! ```

use std::time::Instant;

use ptseg::models::Variant;
use ptseg::protocols::{overfit_config, overfit_scenes, run_overfit};

fn main() -> ptseg::Result<()> {
    let seed = std::env::args().nth(1).map_or(0, |s| s.parse().expect("integer seed"));
    let rooms = overfit_scenes(seed)?;
    let points: usize = rooms.iter().map(|c| c.len()).sum();
    println!("{} rooms, {points} points", rooms.len());
    for v in Variant::ALL {
        let t = Instant::now();
        let out = run_overfit::<f32>(rooms.clone(), overfit_config(v, seed), 0.99, 5, None)?;
        let last = out.reports.last().expect("at least one epoch");
        println!(
            "{v:<9} scene accuracy {:.4} after {} epochs (last loss {:.4}, {:.0}s)",
            out.accuracy,
            out.epochs,
            last.loss,
            t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
