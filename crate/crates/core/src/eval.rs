//! Segmentation metrics, k-fold splits and report rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::pointcloud::LabeledPointCloud;

/// Counts indexed `[ground truth][prediction]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<u64>,
    class_names: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean_iou: f64,
    pub overall_accuracy: f64,
    pub mean_class_accuracy: f64,
}

impl ConfusionMatrix {
    pub fn new(class_names: Vec<String>) -> Self {
        let m = class_names.len();
        ConfusionMatrix { counts: vec![0; m * m], class_names }
    }

    pub fn with_classes(m: usize) -> Self {
        Self::new(LabeledPointCloud::default_class_names(m))
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn at(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.num_classes() + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Returns a new matrix with the pairs counted; `self` is unchanged.
    pub fn accumulate(&self, pred: &[usize], gt: &[usize]) -> Result<ConfusionMatrix> {
        let mut out = self.clone();
        out.record(pred, gt)?;
        Ok(out)
    }

    /// In-place [`ConfusionMatrix::accumulate`]. On error nothing is counted.
    pub fn record(&mut self, pred: &[usize], gt: &[usize]) -> Result<()> {
        if pred.len() != gt.len() {
            return Err(Error::Data(format!("{} predictions for {} ground-truth labels", pred.len(), gt.len())));
        }
        let m = self.num_classes();
        if let Some(i) = (0..pred.len()).find(|&i| pred[i] >= m || gt[i] >= m) {
            return Err(Error::Data(format!(
                "label pair {i} (gt {}, pred {}) exceeds {m} classes",
                gt[i], pred[i]
            )));
        }
        for (&p, &g) in pred.iter().zip(gt) {
            self.counts[g * m + p] += 1;
        }
        Ok(())
    }

    pub fn merge(&self, other: &ConfusionMatrix) -> Result<ConfusionMatrix> {
        if self.num_classes() != other.num_classes() {
            return Err(Error::Data(format!(
                "cannot merge {}-class and {}-class matrices",
                self.num_classes(),
                other.num_classes()
            )));
        }
        let counts = self.counts.iter().zip(&other.counts).map(|(a, b)| a + b).collect();
        Ok(ConfusionMatrix { counts, class_names: self.class_names.clone() })
    }

    /// `(TP, TP + FP + FN)` of class `c`.
    pub fn iou_fraction(&self, c: usize) -> (u64, u64) {
        let m = self.num_classes();
        let tp = self.at(c, c);
        let fp: u64 = (0..m).filter(|&r| r != c).map(|r| self.at(r, c)).sum();
        let fn_: u64 = (0..m).filter(|&k| k != c).map(|k| self.at(c, k)).sum();
        (tp, tp + fp + fn_)
    }

    /// IoU per class; `None` for classes absent from both ground truth and
    /// predictions.
    pub fn iou_per_class(&self) -> Vec<Option<f64>> {
        (0..self.num_classes())
            .map(|c| match self.iou_fraction(c) {
                (_, 0) => None,
                (tp, d) => Some(tp as f64 / d as f64),
            })
            .collect()
    }

    /// Recall per class; `None` where the class never occurs in ground truth.
    pub fn class_accuracy(&self) -> Vec<Option<f64>> {
        let m = self.num_classes();
        (0..m)
            .map(|c| {
                let row: u64 = (0..m).map(|k| self.at(c, k)).sum();
                (row > 0).then(|| self.at(c, c) as f64 / row as f64)
            })
            .collect()
    }

    pub fn summary(&self) -> Result<Summary> {
        let total = self.total();
        if total == 0 {
            return Err(Error::UndefinedMetrics);
        }
        let mean = |v: Vec<Option<f64>>| {
            let present: Vec<f64> = v.into_iter().flatten().collect();
            present.iter().sum::<f64>() / present.len() as f64
        };
        let trace: u64 = (0..self.num_classes()).map(|c| self.at(c, c)).sum();
        Ok(Summary {
            mean_iou: mean(self.iou_per_class()),
            overall_accuracy: trace as f64 / total as f64,
            mean_class_accuracy: mean(self.class_accuracy()),
        })
    }
}

/// Splits clouds into `(train, test)` index lists by tag.
///
/// Distinct tags are numbered in order of first appearance and tag `t`
/// belongs to fold `t mod k`. Untagged clouds form one group each.
pub fn kfold_split(clouds: &[LabeledPointCloud], k: usize, fold: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let tags: Vec<String> = clouds
        .iter()
        .enumerate()
        .map(|(i, c)| c.tag().map_or_else(|| format!("\u{0}untagged{i}"), str::to_string))
        .collect();
    kfold_by_tags(&tags, k, fold)
}

/// [`kfold_split`] over bare tags.
pub fn kfold_by_tags(tags: &[String], k: usize, fold: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if k < 1 || fold >= k {
        return Err(Error::Argument(format!("fold {fold} is not in 0..{k}")));
    }
    let mut order: Vec<&str> = Vec::new();
    for t in tags {
        if !order.contains(&t.as_str()) {
            order.push(t);
        }
    }
    if order.len() < k {
        return Err(Error::Argument(format!("{} distinct tags cannot form {k} folds", order.len())));
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, t) in tags.iter().enumerate() {
        let group = order.iter().position(|o| o == t).expect("tag was recorded");
        if group % k == fold {
            test.push(i);
        } else {
            train.push(i);
        }
    }
    Ok((train, test))
}

/// One model's pooled results.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub model: String,
    pub matrix: ConfusionMatrix,
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "absent".to_string(), |x| format!("{x:.4}"))
}

/// Fixed-width table with one row per model and one column per class,
/// followed by `[model]` sections of `metric.class = value` lines.
pub fn render_report(rows: &[ReportRow]) -> Result<String> {
    let first = rows.first().ok_or_else(|| Error::Argument("report needs at least one model".into()))?;
    let names = first.matrix.class_names();
    if rows.iter().any(|r| r.matrix.class_names() != names) {
        return Err(Error::Data("all report rows must share one class list".into()));
    }
    let width = names.iter().map(String::len).chain([7]).max().unwrap() + 1;
    let model_w = rows.iter().map(|r| r.model.len()).chain([5]).max().unwrap() + 1;

    let mut out = String::new();
    out.push_str("# metrics computed from confusion counts pooled over all evaluated scenes\n");
    let _ = write!(out, "{:<model_w$}", "model");
    for h in ["mIoU", "OA", "mAcc"].iter().map(|s| s.to_string()).chain(names.iter().cloned()) {
        let _ = write!(out, "{h:>width$}");
    }
    out.push('\n');
    let mut sections = String::new();
    for r in rows {
        let s = r.matrix.summary()?;
        let iou = r.matrix.iou_per_class();
        let _ = write!(out, "{:<model_w$}", r.model);
        for v in [s.mean_iou, s.overall_accuracy, s.mean_class_accuracy] {
            let _ = write!(out, "{:>width$}", format!("{v:.4}"));
        }
        for v in &iou {
            let _ = write!(out, "{:>width$}", v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}")));
        }
        out.push('\n');

        let _ = writeln!(sections, "\n[{}]", r.model);
        let _ = writeln!(sections, "mean_iou = {:.4}", s.mean_iou);
        let _ = writeln!(sections, "overall_accuracy = {:.4}", s.overall_accuracy);
        let _ = writeln!(sections, "mean_class_accuracy = {:.4}", s.mean_class_accuracy);
        let _ = writeln!(sections, "points = {}", r.matrix.total());
        let _ = writeln!(sections, "classes = {}", names.join(","));
        let counts: Vec<String> = r.matrix.counts.iter().map(u64::to_string).collect();
        let _ = writeln!(sections, "confusion = {}", counts.join(","));
        for (c, name) in names.iter().enumerate() {
            let _ = writeln!(sections, "iou.{name} = {}", fmt_metric(iou[c]));
        }
        for (c, name) in names.iter().enumerate() {
            let _ = writeln!(sections, "accuracy.{name} = {}", fmt_metric(r.matrix.class_accuracy()[c]));
        }
    }
    out.push_str(&sections);
    Ok(out)
}

/// Reads the `[model]` sections of a rendered report into
/// `model -> metric -> value`; absent classes are skipped.
pub fn parse_report(text: &str) -> Result<BTreeMap<String, BTreeMap<String, f64>>> {
    let mut out: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = Some(name.to_string());
            out.entry(name.to_string()).or_default();
            continue;
        }
        let (Some(model), Some((k, v))) = (&current, line.split_once(" = ")) else { continue };
        if v == "absent" || k == "classes" || k == "confusion" {
            continue;
        }
        let value: f64 = v
            .parse()
            .map_err(|_| Error::Data(format!("report line {}: bad value {v:?}", n + 1)))?;
        out.get_mut(model).expect("section exists").insert(k.to_string(), value);
    }
    if out.is_empty() {
        return Err(Error::Data("report has no model sections".into()));
    }
    Ok(out)
}

/// Recovers the confusion matrix of every `[model]` section.
pub fn parse_report_matrices(text: &str) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    let mut current: Option<(String, Option<Vec<String>>)> = None;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = Some((name.to_string(), None));
            continue;
        }
        let Some((model, classes)) = current.as_mut() else { continue };
        if let Some(v) = line.strip_prefix("classes = ") {
            *classes = Some(v.split(',').map(str::to_string).collect());
        } else if let Some(v) = line.strip_prefix("confusion = ") {
            let names = classes
                .clone()
                .ok_or_else(|| Error::Data(format!("report line {}: confusion before classes", n + 1)))?;
            let counts: Vec<u64> = v
                .split(',')
                .map(|c| c.trim().parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Data(format!("report line {}: bad confusion counts", n + 1)))?;
            if counts.len() != names.len() * names.len() {
                return Err(Error::Data(format!(
                    "report line {}: {} counts for {} classes",
                    n + 1,
                    counts.len(),
                    names.len()
                )));
            }
            rows.push(ReportRow { model: model.clone(), matrix: ConfusionMatrix { counts, class_names: names } });
        }
    }
    if rows.is_empty() {
        return Err(Error::Data("report has no confusion matrices".into()));
    }
    Ok(rows)
}

/// Sums rows with the same model name, keeping first-appearance order.
pub fn pool_rows(rows: Vec<ReportRow>) -> Result<Vec<ReportRow>> {
    let mut out: Vec<ReportRow> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|o| o.model == r.model) {
            Some(o) => o.matrix = o.matrix.merge(&r.matrix)?,
            None => out.push(r),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_identity() {
        let cm = ConfusionMatrix::with_classes(3);
        let a = cm.accumulate(&[0; 10], &[0; 10]).unwrap();
        assert_eq!(a.at(0, 0), 10);
        assert_eq!(cm.total(), 0);
        assert_eq!(a.accumulate(&[], &[]).unwrap(), a);
        assert!(cm.accumulate(&[0, 1], &[0]).is_err());
        assert!(cm.accumulate(&[3], &[0]).is_err());
    }

    #[test]
    fn iou_arithmetic() {
        // class 0: TP 5, FP 3 (gt 1 -> pred 0), FN 2 (gt 0 -> pred 1)
        let mut pred = vec![0; 5];
        let mut gt = vec![0; 5];
        pred.extend([0, 0, 0, 1, 1]);
        gt.extend([1, 1, 1, 0, 0]);
        let cm = ConfusionMatrix::with_classes(2).accumulate(&pred, &gt).unwrap();
        assert_eq!(cm.iou_per_class()[0], Some(0.5));
    }

    #[test]
    fn two_class_hand_example() {
        let cm = ConfusionMatrix::with_classes(2).accumulate(&[0, 1], &[0, 0]).unwrap();
        assert_eq!(cm.iou_per_class(), vec![Some(0.5), Some(0.0)]);
        let s = cm.summary().unwrap();
        assert_eq!(s.overall_accuracy, 0.5);
        assert_eq!(s.mean_iou, 0.25);
        assert_eq!(s.mean_class_accuracy, 0.5);
    }

    #[test]
    fn diagonal_and_empty() {
        let cm = ConfusionMatrix::with_classes(4).accumulate(&[0, 1, 3], &[0, 1, 3]).unwrap();
        let s = cm.summary().unwrap();
        assert_eq!((s.mean_iou, s.overall_accuracy, s.mean_class_accuracy), (1.0, 1.0, 1.0));
        assert_eq!(cm.iou_per_class()[2], None);
        assert!(matches!(ConfusionMatrix::with_classes(2).summary(), Err(Error::UndefinedMetrics)));
    }

    #[test]
    fn kfold_assigns_tags_round_robin() {
        let tags: Vec<String> = (0..6).map(|i| format!("area{i}")).collect();
        let (train, test) = kfold_by_tags(&tags, 6, 0).unwrap();
        assert_eq!(test, vec![0]);
        assert_eq!(train, vec![1, 2, 3, 4, 5]);
        assert!(kfold_by_tags(&tags[..5], 6, 0).is_err());
        assert!(kfold_by_tags(&tags, 6, 6).is_err());
    }

    #[test]
    fn report_round_trip() {
        let cm = ConfusionMatrix::new(vec!["floor".into(), "wall".into(), "pole".into()])
            .accumulate(&[0, 1, 1], &[0, 1, 0])
            .unwrap();
        let text = render_report(&[ReportRow { model: "baseline".into(), matrix: cm.clone() }]).unwrap();
        let parsed = parse_report(&text).unwrap();
        let b = &parsed["baseline"];
        assert_eq!(b["iou.floor"], 0.5);
        assert_eq!(b["mean_iou"], 0.5);
        assert!(!b.contains_key("iou.pole"));
        assert!(text.lines().nth(2).unwrap().starts_with("baseline"));
        let rows = parse_report_matrices(&text).unwrap();
        assert_eq!(rows[0].matrix, cm);
        let pooled = pool_rows(vec![rows[0].clone(), rows[0].clone()]).unwrap();
        assert_eq!(pooled.len(), 1);
        assert_eq!(pooled[0].matrix.total(), 6);
    }
}
