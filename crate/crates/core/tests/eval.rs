mod common;

use gazelt::eval::{
    auc_macro_ovr, average_accuracy, balanced_accuracy, group_average, mcc_multiclass,
    per_class_accuracy, report_from_scores, weighted_f1, welch_t_test, ConfusionMatrix,
    MetricsReport,
};
use gazelt::gaze::{ClassGrouping, Group};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn permute_cm(rows: &[Vec<u64>], perm: &[usize]) -> Vec<Vec<u64>> {
    let k = rows.len();
    let mut out = vec![vec![0; k]; k];
    for i in 0..k {
        for j in 0..k {
            out[perm[i]][perm[j]] = rows[i][j];
        }
    }
    out
}

#[test]
fn relabeling_leaves_summaries_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..50 {
        let k = rng.gen_range(2..7);
        let rows: Vec<Vec<u64>> = (0..k)
            .map(|_| (0..k).map(|_| rng.gen_range(1..15)).collect())
            .collect();
        let mut perm: Vec<usize> = (0..k).collect();
        perm.shuffle(&mut rng);
        let a = ConfusionMatrix::from_rows(&rows).unwrap();
        let b = ConfusionMatrix::from_rows(&permute_cm(&rows, &perm)).unwrap();
        assert!((mcc_multiclass(&a) - mcc_multiclass(&b)).abs() < 1e-12);
        assert!((weighted_f1(&a) - weighted_f1(&b)).abs() < 1e-12);
        assert!((balanced_accuracy(&a).unwrap() - balanced_accuracy(&b).unwrap()).abs() < 1e-12);
        let (pa, pb) = (per_class_accuracy(&a), per_class_accuracy(&b));
        for c in 0..k {
            assert_eq!(pa[c], pb[perm[c]]);
        }

        let n = 30;
        let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
        let scores: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..k).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let moved_labels: Vec<usize> = labels.iter().map(|&y| perm[y]).collect();
        let moved_scores: Vec<Vec<f64>> = scores
            .iter()
            .map(|s| {
                let mut out = vec![0.0; k];
                for c in 0..k {
                    out[perm[c]] = s[c];
                }
                out
            })
            .collect();
        let x = auc_macro_ovr(&scores, &labels, k).unwrap().macro_auc;
        let y = auc_macro_ovr(&moved_scores, &moved_labels, k)
            .unwrap()
            .macro_auc;
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn balanced_split_makes_balanced_and_average_accuracy_equal() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let k = rng.gen_range(2..8);
        let per = rng.gen_range(1..20);
        let labels: Vec<usize> = (0..k * per).map(|i| i / per).collect();
        let preds: Vec<usize> = labels.iter().map(|_| rng.gen_range(0..k)).collect();
        let cm = ConfusionMatrix::from_predictions(&labels, &preds, k).unwrap();
        let avg = average_accuracy(&per_class_accuracy(&cm)).unwrap();
        assert!((balanced_accuracy(&cm).unwrap() - avg).abs() < 1e-12);
    }
}

#[test]
fn subset_means_on_six_classes() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let rows = common::random_cm(&mut rng, 6, 20);
    let cm = ConfusionMatrix::from_rows(&rows).unwrap();
    let recalls = common::recall_oracle(&rows);
    let grouping = ClassGrouping(vec![
        Group::Head,
        Group::Tail,
        Group::Medium,
        Group::Head,
        Group::Medium,
        Group::Tail,
    ]);
    let g = group_average(&per_class_accuracy(&cm), &grouping).unwrap();
    let mean = |a: usize, b: usize| (recalls[a].unwrap() + recalls[b].unwrap()) / 2.0;
    assert!((g.head.unwrap() - mean(0, 3)).abs() < 1e-12);
    assert!((g.medium.unwrap() - mean(2, 4)).abs() < 1e-12);
    assert!((g.tail.unwrap() - mean(1, 5)).abs() < 1e-12);
}

#[test]
fn reversed_scores_flip_binary_auc() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        let n = 40;
        let labels: Vec<usize> = (0..n).map(|i| usize::from(i % 3 == 0)).collect();
        let s: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let fwd: Vec<Vec<f64>> = s.iter().map(|&v| vec![1.0 - v, v]).collect();
        let rev: Vec<Vec<f64>> = s.iter().map(|&v| vec![v, 1.0 - v]).collect();
        let a = auc_macro_ovr(&fwd, &labels, 2).unwrap().macro_auc;
        let b = auc_macro_ovr(&rev, &labels, 2).unwrap().macro_auc;
        assert!((a + b - 1.0).abs() < 1e-12);
    }
}

#[test]
fn random_scorer_is_at_chance() {
    let grouping = ClassGrouping(vec![Group::Head, Group::Medium, Group::Medium, Group::Tail]);
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..400).map(|i| i % 4).collect();
        let scores: Vec<Vec<f64>> = (0..400)
            .map(|_| (0..4).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let r = report_from_scores(&scores, &labels, &grouping, "balanced_test", seed).unwrap();
        assert!((r.balanced_acc.unwrap() - 0.25).abs() <= 0.08, "{r:?}");
        assert!((r.auc_macro_ovr.unwrap() - 0.5).abs() <= 0.06, "{r:?}");
    }
}

#[test]
fn oracle_scorer_is_perfect_and_report_round_trips() {
    let grouping = ClassGrouping(vec![Group::Head, Group::Medium, Group::Tail]);
    let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
    let scores: Vec<Vec<f64>> = labels
        .iter()
        .map(|&y| (0..3).map(|c| f64::from(u8::from(c == y))).collect())
        .collect();
    let r = report_from_scores(&scores, &labels, &grouping, "test", 0).unwrap();
    assert_eq!(
        (
            r.avg_acc,
            r.balanced_acc,
            r.mcc,
            r.auc_macro_ovr,
            r.weighted_f1
        ),
        (Some(1.0), Some(1.0), 1.0, Some(1.0), 1.0)
    );
    for g in Group::ALL {
        assert_eq!(r.groups.get(g), Some(1.0));
    }
    let mut buf = Vec::new();
    r.to_json(&mut buf).unwrap();
    assert_eq!(MetricsReport::from_json(buf.as_slice()).unwrap(), r);
}

#[test]
fn welch_invariances() {
    let same = welch_t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
    assert_eq!(same.t, 0.0);
    assert!((same.p - 1.0).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let a: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..1.0)).collect();
    let b: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..1.0)).collect();
    let base = welch_t_test(&a, &b).unwrap();
    let shift = |v: &[f64]| v.iter().map(|x| x + 3.25).collect::<Vec<_>>();
    let moved = welch_t_test(&shift(&a), &shift(&b)).unwrap();
    assert!((base.t - moved.t).abs() < 1e-9 && (base.p - moved.p).abs() < 1e-9);
    assert!(welch_t_test(&[2.0, 2.0], &[5.0, 5.0]).is_err());
    assert!(welch_t_test(&[1.0], &[1.0, 2.0]).is_err());
}
