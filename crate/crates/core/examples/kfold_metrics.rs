//! Tag-based cross validation with pooled confusion counts. The "model" is
//! a height rule fitted on the training folds, which keeps the example
//! instant while exercising the same bookkeeping as a real run.
//!
//! ```text
//! cargo run --release --example kfold_metrics
//! ```

use ptseg::eval::{kfold_split, render_report, ConfusionMatrix, ReportRow};
use ptseg::pointcloud::{synth_scene, LabeledPointCloud, SceneRecipe};

/// Mean height of each class over the given clouds.
fn class_heights(clouds: &[&LabeledPointCloud], m: usize) -> Vec<f64> {
    let mut sum = vec![0.0; m];
    let mut n = vec![0usize; m];
    for c in clouds {
        for (p, &l) in c.positions().iter().zip(c.labels()) {
            sum[l] += p[2] as f64;
            n[l] += 1;
        }
    }
    sum.iter().zip(&n).map(|(s, &k)| if k > 0 { s / k as f64 } else { f64::INFINITY }).collect()
}

fn nearest_height(heights: &[f64], z: f64) -> usize {
    (0..heights.len()).min_by(|&a, &b| (heights[a] - z).abs().total_cmp(&(heights[b] - z).abs())).unwrap()
}

fn main() -> ptseg::Result<()> {
    let areas = ["area_1", "area_2", "area_3"];
    let clouds: Vec<LabeledPointCloud> = (0..6u64)
        .map(|k| Ok(synth_scene(&SceneRecipe { seed: k, density: 40.0, ..SceneRecipe::default() })?.with_tag(areas[k as usize % 3])))
        .collect::<ptseg::Result<_>>()?;
    let names = clouds[0].class_names().to_vec();
    let m = names.len();

    let mut pooled = ConfusionMatrix::new(names);
    for fold in 0..areas.len() {
        let (train, test) = kfold_split(&clouds, areas.len(), fold)?;
        let heights = class_heights(&train.iter().map(|&i| &clouds[i]).collect::<Vec<_>>(), m);
        let mut fold_matrix = ConfusionMatrix::new(clouds[0].class_names().to_vec());
        for &i in &test {
            let c = &clouds[i];
            let pred: Vec<usize> = c.positions().iter().map(|p| nearest_height(&heights, p[2] as f64)).collect();
            fold_matrix.record(&pred, c.labels())?;
        }
        println!("fold {fold} ({}): mean IoU {:.3}", areas[fold], fold_matrix.summary()?.mean_iou);
        pooled = pooled.merge(&fold_matrix)?;
    }
    print!("{}", render_report(&[ReportRow { model: "height_rule".into(), matrix: pooled }])?);
    Ok(())
}
