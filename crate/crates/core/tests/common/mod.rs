//! Shared oracles for the integration and acceptance targets.
#![allow(dead_code)]

pub mod depth;
pub mod invariance;
pub mod sampler;

use std::collections::BTreeMap;

use ptseg::pointcloud::LabeledPointCloud;
use ptseg::protocols::COUPLED_TARGETS;

/// A 1 x 1 m floor cell of a coupled room that holds a box.
pub struct BoxCell {
    pub cell: (i64, i64),
    /// Majority box class among the cell's points.
    pub label: usize,
    /// Number of box-class points in the cell.
    pub box_points: usize,
    pub features: Vec<f64>,
}

fn cell_of(p: [f32; 3]) -> (i64, i64) {
    ((p[0] as f64).floor() as i64, (p[1] as f64).floor() as i64)
}

/// Summary statistics of every point in one cell: count, mean and max
/// height, spread in x and y, fraction above the floor and mean color.
fn stats(cloud: &LabeledPointCloud, members: &[usize]) -> Vec<f64> {
    let n = members.len().max(1) as f64;
    let pos = cloud.positions();
    let mean = |a: usize| members.iter().map(|&i| pos[i][a] as f64).sum::<f64>() / n;
    let var = |a: usize, m: f64| members.iter().map(|&i| (pos[i][a] as f64 - m).powi(2)).sum::<f64>() / n;
    let (mx, my, mz) = (mean(0), mean(1), mean(2));
    let zmax = members.iter().map(|&i| pos[i][2] as f64).fold(0.0, f64::max);
    let raised = members.iter().filter(|&&i| pos[i][2] > 0.01).count() as f64 / n;
    let mut f = vec![members.len() as f64, mz, zmax, var(0, mx).sqrt(), var(1, my).sqrt(), raised];
    if let Some(c) = cloud.colors() {
        for ch in 0..3 {
            f.push(members.iter().map(|&i| c[i][ch] as f64).sum::<f64>() / n);
        }
    }
    f
}

/// Box cells of a coupled room. With `context`, the features of the other
/// cell in the same row of the box's 2 x 2 m tile are appended.
pub fn box_cells(cloud: &LabeledPointCloud, context: bool) -> Vec<BoxCell> {
    let mut members: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for (i, &p) in cloud.positions().iter().enumerate() {
        members.entry(cell_of(p)).or_default().push(i);
    }
    let mut out = Vec::new();
    for (&cell, idx) in &members {
        let mut counts = [0usize; 2];
        for &i in idx {
            if let Some(k) = COUPLED_TARGETS.iter().position(|&t| t == cloud.labels()[i]) {
                counts[k] += 1;
            }
        }
        let box_points = counts[0] + counts[1];
        if box_points == 0 {
            continue;
        }
        let label = if counts[0] >= counts[1] { COUPLED_TARGETS[0] } else { COUPLED_TARGETS[1] };
        let mut features = stats(cloud, idx);
        if context {
            let partner = (cell.0 - cell.0.rem_euclid(2) + 1 - cell.0.rem_euclid(2), cell.1);
            features.extend(stats(cloud, members.get(&partner).map_or(&[][..], |v| &v[..])));
        }
        out.push(BoxCell { cell, label, box_points, features });
    }
    out
}

/// Nearest-class-centroid classifier over standardized cell features.
/// Returns point accuracy on the box classes of `test`.
pub fn nearest_centroid_accuracy(train: &[LabeledPointCloud], test: &[LabeledPointCloud], context: bool) -> f64 {
    let train_cells: Vec<BoxCell> = train.iter().flat_map(|c| box_cells(c, context)).collect();
    let d = train_cells[0].features.len();
    let n = train_cells.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| train_cells.iter().map(|c| c.features[j]).sum::<f64>() / n).collect();
    let sd: Vec<f64> = (0..d)
        .map(|j| (train_cells.iter().map(|c| (c.features[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt().max(1e-9))
        .collect();
    let z = |f: &[f64]| -> Vec<f64> { (0..d).map(|j| (f[j] - mean[j]) / sd[j]).collect() };
    let centroids: Vec<Vec<f64>> = COUPLED_TARGETS
        .iter()
        .map(|&t| {
            let of: Vec<Vec<f64>> = train_cells.iter().filter(|c| c.label == t).map(|c| z(&c.features)).collect();
            (0..d).map(|j| of.iter().map(|f| f[j]).sum::<f64>() / of.len() as f64).collect()
        })
        .collect();
    let (mut hit, mut total) = (0usize, 0usize);
    for c in test.iter().flat_map(|c| box_cells(c, context)) {
        let f = z(&c.features);
        let dist = |k: usize| f.iter().zip(&centroids[k]).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let guess = if dist(0) <= dist(1) { COUPLED_TARGETS[0] } else { COUPLED_TARGETS[1] };
        total += c.box_points;
        if guess == c.label {
            hit += c.box_points;
        }
    }
    hit as f64 / total as f64
}

/// Metrics counted point by point from raw label arrays, never through a
/// confusion matrix.
pub struct BruteMetrics {
    /// Per class `(|pred = c and gt = c|, |pred = c or gt = c|)`, `None` when
    /// the union is empty.
    pub iou: Vec<Option<(u64, u64)>>,
    /// Per class `(|pred = c and gt = c|, |gt = c|)`, `None` when the class
    /// never occurs in ground truth.
    pub recall: Vec<Option<(u64, u64)>>,
    pub correct: u64,
    pub total: u64,
}

pub fn brute_metrics(pred: &[usize], gt: &[usize], m: usize) -> BruteMetrics {
    let mut iou = Vec::new();
    let mut recall = Vec::new();
    for c in 0..m {
        let inter = (0..pred.len()).filter(|&i| pred[i] == c && gt[i] == c).count() as u64;
        let union = (0..pred.len()).filter(|&i| pred[i] == c || gt[i] == c).count() as u64;
        let support = gt.iter().filter(|&&g| g == c).count() as u64;
        iou.push((union > 0).then_some((inter, union)));
        recall.push((support > 0).then_some((inter, support)));
    }
    let correct = pred.iter().zip(gt).filter(|(p, g)| p == g).count() as u64;
    BruteMetrics { iou, recall, correct, total: pred.len() as u64 }
}

/// Mean of the present fractions, summed in class order.
pub fn mean_of(fractions: &[Option<(u64, u64)>]) -> f64 {
    let present: Vec<f64> = fractions.iter().flatten().map(|&(a, b)| a as f64 / b as f64).collect();
    present.iter().sum::<f64>() / present.len() as f64
}

/// Random label pair with a skewed class distribution so that some classes
/// go missing from ground truth, predictions or both.
pub fn random_pair<R: rand::Rng>(rng: &mut R, m: usize, n: usize) -> (Vec<usize>, Vec<usize>) {
    let skew = |r: &mut R| {
        let a = r.gen_range(0..m);
        let b = r.gen_range(0..m);
        a.min(b)
    };
    let gt: Vec<usize> = (0..n).map(|_| skew(rng)).collect();
    let pred: Vec<usize> = gt.iter().map(|&g| if rng.gen_bool(0.6) { g } else { skew(rng) }).collect();
    (pred, gt)
}

/// Compares a confusion matrix built from `(pred, gt)` against the
/// brute-force counts; returns the mismatch count.
pub fn metric_mismatches(pred: &[usize], gt: &[usize], m: usize) -> usize {
    use ptseg::eval::ConfusionMatrix;
    let cm = ConfusionMatrix::with_classes(m).accumulate(pred, gt).unwrap();
    let brute = brute_metrics(pred, gt, m);
    let mut bad = 0;
    for c in 0..m {
        let (tp, denom) = cm.iou_fraction(c);
        let lib = cm.iou_per_class()[c];
        match brute.iou[c] {
            Some((a, b)) => bad += usize::from((tp, denom) != (a, b) || lib != Some(a as f64 / b as f64)),
            None => bad += usize::from(denom != 0 || lib.is_some()),
        }
        let acc = cm.class_accuracy()[c];
        bad += usize::from(acc != brute.recall[c].map(|(a, b)| a as f64 / b as f64));
    }
    match cm.summary() {
        Ok(s) => {
            bad += usize::from(s.mean_iou != mean_of(&brute.iou));
            bad += usize::from(s.mean_class_accuracy != mean_of(&brute.recall));
            bad += usize::from(s.overall_accuracy != brute.correct as f64 / brute.total as f64);
        }
        Err(_) => bad += usize::from(brute.total != 0),
    }
    bad
}
