mod common;

use proptest::prelude::*;
use ptseg::eval::{kfold_by_tags, kfold_split, ConfusionMatrix};
use ptseg::pointcloud::LabeledPointCloud;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn thousand_random_pairs_match_the_brute_force_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let m = rng.gen_range(2..=13);
        let n = rng.gen_range(1..400);
        let (pred, gt) = common::random_pair(&mut rng, m, n);
        mismatches += common::metric_mismatches(&pred, &gt, m);
    }
    assert_eq!(mismatches, 0);
}

#[test]
fn one_point_is_all_or_nothing() {
    for m in 2..6 {
        for g in 0..m {
            for p in 0..m {
                let s = ConfusionMatrix::with_classes(m).accumulate(&[p], &[g]).unwrap().summary().unwrap();
                let v = if p == g { 1.0 } else { 0.0 };
                assert_eq!((s.mean_iou, s.overall_accuracy, s.mean_class_accuracy), (v, v, v));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn split_accumulation_equals_accumulating_the_concatenation(seed in any::<u64>(), m in 2usize..14, n in 0usize..200, cut in 0usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pred, gt) = common::random_pair(&mut rng, m, n);
        let cut = cut.min(n);
        let empty = ConfusionMatrix::with_classes(m);
        let a = empty.accumulate(&pred[..cut], &gt[..cut]).unwrap();
        let both = a.accumulate(&pred[cut..], &gt[cut..]).unwrap();
        let b = empty.accumulate(&pred[cut..], &gt[cut..]).unwrap();
        let whole = empty.accumulate(&pred, &gt).unwrap();
        prop_assert_eq!(&both, &whole);
        prop_assert_eq!(&a.merge(&b).unwrap(), &whole);
        prop_assert_eq!(&b.merge(&a).unwrap(), &whole);
        prop_assert_eq!(empty.total(), 0);
    }

    #[test]
    fn iou_is_bounded_by_recall_and_precision(seed in any::<u64>(), m in 2usize..14, n in 1usize..300) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pred, gt) = common::random_pair(&mut rng, m, n);
        let cm = ConfusionMatrix::with_classes(m).accumulate(&pred, &gt).unwrap();
        for c in 0..m {
            let Some(iou) = cm.iou_per_class()[c] else { continue };
            prop_assert!((0.0..=1.0).contains(&iou));
            let tp = cm.at(c, c) as f64;
            let row: u64 = (0..m).map(|k| cm.at(c, k)).sum();
            let col: u64 = (0..m).map(|r| cm.at(r, c)).sum();
            if row > 0 {
                prop_assert!(iou <= tp / row as f64);
            }
            if col > 0 {
                prop_assert!(iou <= tp / col as f64);
            }
        }
    }

    #[test]
    fn relabeling_classes_only_reorders_metrics(seed in any::<u64>(), m in 2usize..14, n in 1usize..300) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pred, gt) = common::random_pair(&mut rng, m, n);
        let mut sigma: Vec<usize> = (0..m).collect();
        sigma.shuffle(&mut rng);
        let map = |v: &[usize]| v.iter().map(|&l| sigma[l]).collect::<Vec<_>>();
        let a = ConfusionMatrix::with_classes(m).accumulate(&pred, &gt).unwrap();
        let b = ConfusionMatrix::with_classes(m).accumulate(&map(&pred), &map(&gt)).unwrap();
        for c in 0..m {
            prop_assert_eq!(a.iou_fraction(c), b.iou_fraction(sigma[c]));
            prop_assert_eq!(a.class_accuracy()[c], b.class_accuracy()[sigma[c]]);
        }
        let (sa, sb) = (a.summary().unwrap(), b.summary().unwrap());
        prop_assert_eq!(sa.overall_accuracy, sb.overall_accuracy);
        // class order changes the summation order of the means
        prop_assert!((sa.mean_iou - sb.mean_iou).abs() < 1e-12);
        prop_assert!((sa.mean_class_accuracy - sb.mean_class_accuracy).abs() < 1e-12);
    }
}

fn tagged(tag: &str, labels: Vec<usize>) -> LabeledPointCloud {
    let n = labels.len();
    LabeledPointCloud::new(vec![[0.0; 3]; n], None, labels, LabeledPointCloud::default_class_names(4))
        .unwrap()
        .with_tag(tag)
}

#[test]
fn folds_partition_tags_and_pool_to_the_union() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let tags = ["area_1", "area_2", "area_3", "area_4", "area_5", "area_6"];
    let clouds: Vec<LabeledPointCloud> = (0..15)
        .map(|i| tagged(tags[i % 6], (0..rng.gen_range(1..50)).map(|_| rng.gen_range(0..4)).collect()))
        .collect();
    let preds: Vec<Vec<usize>> =
        clouds.iter().map(|c| c.labels().iter().map(|&l| if rng.gen_bool(0.7) { l } else { rng.gen_range(0..4) }).collect()).collect();

    let mut seen = vec![0; clouds.len()];
    let mut pooled = ConfusionMatrix::with_classes(4);
    for fold in 0..6 {
        let (train, test) = kfold_split(&clouds, 6, fold).unwrap();
        assert_eq!(train.len() + test.len(), clouds.len());
        // a fold is exactly one tag
        let fold_tags: std::collections::BTreeSet<_> = test.iter().map(|&i| clouds[i].tag().unwrap()).collect();
        assert_eq!(fold_tags.into_iter().collect::<Vec<_>>(), vec![tags[fold]]);
        assert!(train.iter().all(|&i| clouds[i].tag() != Some(tags[fold])));
        for &i in &test {
            seen[i] += 1;
            pooled.record(&preds[i], clouds[i].labels()).unwrap();
        }
    }
    assert!(seen.iter().all(|&s| s == 1));

    let mut union = ConfusionMatrix::with_classes(4);
    for (c, p) in clouds.iter().zip(&preds) {
        union.record(p, c.labels()).unwrap();
    }
    assert_eq!(pooled, union);
    assert!(kfold_split(&clouds[..5], 6, 0).is_err());
}

proptest! {
    #[test]
    fn every_cloud_is_tested_exactly_once(tag_ids in prop::collection::vec(0usize..9, 1..40), k in 1usize..7) {
        let tags: Vec<String> = tag_ids.iter().map(|t| format!("t{t}")).collect();
        let distinct = tag_ids.iter().collect::<std::collections::BTreeSet<_>>().len();
        if distinct < k {
            prop_assert!(kfold_by_tags(&tags, k, 0).is_err());
            return Ok(());
        }
        let mut seen = vec![0; tags.len()];
        for fold in 0..k {
            let (train, test) = kfold_by_tags(&tags, k, fold).unwrap();
            prop_assert_eq!(train.len() + test.len(), tags.len());
            for i in test {
                seen[i] += 1;
                // whole tag groups move together
                prop_assert!(train.iter().all(|&j| tags[j] != tags[i]));
            }
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
    }
}
