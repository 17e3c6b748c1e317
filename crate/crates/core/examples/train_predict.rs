//! Library-level pipeline: synthesize rooms, train a grid + recurrent
//! model, checkpoint, reload, label a held-out room and score it.
//!
//! ```text
//! cargo run --release --example train_predict -- [variant] [epochs]
//! ```

use std::fs;

use ptseg::eval::ConfusionMatrix;
use ptseg::models::{ModelConfig, ModelParams, Variant};
use ptseg::pointcloud::{synth_scene, SceneRecipe};
use ptseg::protocols::desk_config;
use ptseg::training::{predict_scene, Trainer};

fn main() -> ptseg::Result<()> {
    let mut args = std::env::args().skip(1);
    let variant: Variant = args.next().as_deref().unwrap_or("g_rcu").parse()?;
    let epochs = args.next().map_or(10, |s| s.parse().expect("integer epoch count"));

    let rooms = (0..3)
        .map(|k| synth_scene(&SceneRecipe { seed: 100 + k, density: 60.0, ..SceneRecipe::default() }))
        .collect::<ptseg::Result<Vec<_>>>()?;
    let held_out = synth_scene(&SceneRecipe { seed: 200, density: 60.0, ..SceneRecipe::default() })?;

    let mut cfg = desk_config(variant, 0);
    cfg.epochs = epochs;
    let mut trainer = Trainer::<f32>::new(rooms, cfg)?;
    let dir = tempfile_dir()?;
    trainer.run(Some(&dir), |r| println!("epoch {} loss {:.4} accuracy {:.4}", r.epoch, r.loss, r.accuracy))?;

    // reload from disk the way the command line does
    let manifest = ModelConfig::from_manifest(&fs::read_to_string(dir.join("model.manifest"))?)?;
    let params = ModelParams::<f32>::read(manifest, fs::File::open(dir.join("model.ckpt"))?)?;
    let pred = predict_scene(&held_out, &params, &trainer.config().sampler, 0)?;

    let cm = ConfusionMatrix::new(held_out.class_names().to_vec()).accumulate(&pred, held_out.labels())?;
    let s = cm.summary()?;
    println!("held-out room: mean IoU {:.3}, overall accuracy {:.3}", s.mean_iou, s.overall_accuracy);
    for (name, iou) in held_out.class_names().iter().zip(cm.iou_per_class()) {
        println!("  {name:<10} {}", iou.map_or("absent".into(), |v| format!("{v:.3}")));
    }
    fs::remove_dir_all(&dir)?;
    Ok(())
}

fn tempfile_dir() -> ptseg::Result<std::path::PathBuf> {
    let dir = std::env::temp_dir().join(format!("ptseg-example-{}", std::process::id()));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}
