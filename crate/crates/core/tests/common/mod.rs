//! Independent brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use gazelt::gaze::{FixationPoint, GazeSequence};
use rand::Rng;

/// Direct (non-separable) 2-D convolution with the outer-product Gaussian
/// kernel, zero padding.
pub fn direct_gaussian(grid: &[f64], h: usize, w: usize, sigma: f64, trunc: f64) -> Vec<f64> {
    let r = (trunc * sigma).ceil() as i64;
    let raw: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let z: f64 = raw.iter().sum();
    let k: Vec<f64> = raw.iter().map(|v| v / z).collect();
    let mut out = vec![0.0; h * w];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let mut acc = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let (sy, sx) = (y - dy, x - dx);
                    if sy < 0 || sx < 0 || sy >= h as i64 || sx >= w as i64 {
                        continue;
                    }
                    acc += k[(dy + r) as usize]
                        * k[(dx + r) as usize]
                        * grid[(sy * w as i64 + sx) as usize];
                }
            }
            out[(y * w as i64 + x) as usize] = acc;
        }
    }
    out
}

/// Window of each onset by comparison with explicit boundaries.
pub fn partition_oracle(onsets: &[f64], total: f64, n: usize) -> Vec<usize> {
    let edges: Vec<f64> = (0..=n).map(|k| total * k as f64 / n as f64).collect();
    onsets
        .iter()
        .map(|&t| {
            (0..n)
                .find(|&k| t >= edges[k] && (t < edges[k + 1] || k == n - 1))
                .expect("onset inside [0, total]")
        })
        .collect()
}

/// Connected components of the `dist <= thr` graph, as sorted index sets.
pub fn linkage_oracle(points: &[(f64, f64)], thr: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut label = vec![usize::MAX; n];
    let mut comps = Vec::new();
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut stack = vec![s];
        let mut members = Vec::new();
        label[s] = id;
        while let Some(i) = stack.pop() {
            members.push(i);
            for j in 0..n {
                let d = ((points[i].0 - points[j].0).powi(2) + (points[i].1 - points[j].1).powi(2))
                    .sqrt();
                if label[j] == usize::MAX && d <= thr {
                    label[j] = id;
                    stack.push(j);
                }
            }
        }
        members.sort_unstable();
        comps.push(members);
    }
    comps.sort();
    comps
}

pub fn random_sequence(rng: &mut impl Rng, n_points: usize, side: f64) -> GazeSequence {
    let points = (0..n_points)
        .map(|i| {
            FixationPoint::new(
                rng.gen_range(0.0..side),
                rng.gen_range(0.0..side),
                i as f64 * 300.0 + rng.gen_range(0.0..200.0),
                rng.gen_range(150.0..600.0),
            )
        })
        .collect();
    GazeSequence::from_points("rand", points)
}

pub fn random_cm(rng: &mut impl Rng, k: usize, max: u64) -> Vec<Vec<u64>> {
    (0..k)
        .map(|_| (0..k).map(|_| rng.gen_range(0..=max)).collect())
        .collect()
}

/// Expand a confusion matrix to `(truth, prediction)` pairs.
fn pairs(cm: &[Vec<u64>]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, row) in cm.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            out.extend(std::iter::repeat((i, j)).take(c as usize));
        }
    }
    out
}

/// Multiclass MCC as the correlation of one-hot truth and prediction
/// matrices over individual samples.
pub fn mcc_oracle(cm: &[Vec<u64>]) -> f64 {
    let k = cm.len();
    let samples = pairs(cm);
    let n = samples.len() as f64;
    let onehot = |c: usize| (0..k).map(move |j| if j == c { 1.0 } else { 0.0 });
    let mean_t: Vec<f64> = (0..k)
        .map(|j| samples.iter().filter(|s| s.0 == j).count() as f64 / n)
        .collect();
    let mean_p: Vec<f64> = (0..k)
        .map(|j| samples.iter().filter(|s| s.1 == j).count() as f64 / n)
        .collect();
    let (mut tp, mut tt, mut pp) = (0.0, 0.0, 0.0);
    for &(t, p) in &samples {
        for ((a, b), (mt, mp)) in onehot(t).zip(onehot(p)).zip(mean_t.iter().zip(&mean_p)) {
            tp += (a - mt) * (b - mp);
            tt += (a - mt) * (a - mt);
            pp += (b - mp) * (b - mp);
        }
    }
    if tt * pp == 0.0 {
        0.0
    } else {
        tp / (tt * pp).sqrt()
    }
}

pub fn recall_oracle(cm: &[Vec<u64>]) -> Vec<Option<f64>> {
    let samples = pairs(cm);
    (0..cm.len())
        .map(|c| {
            let of_class: Vec<_> = samples.iter().filter(|s| s.0 == c).collect();
            (!of_class.is_empty()).then(|| {
                of_class.iter().filter(|s| s.1 == c).count() as f64 / of_class.len() as f64
            })
        })
        .collect()
}

pub fn weighted_f1_oracle(cm: &[Vec<u64>]) -> f64 {
    let samples = pairs(cm);
    let n = samples.len() as f64;
    (0..cm.len())
        .map(|c| {
            let tp = samples.iter().filter(|s| s.0 == c && s.1 == c).count() as f64;
            let predicted = samples.iter().filter(|s| s.1 == c).count() as f64;
            let actual = samples.iter().filter(|s| s.0 == c).count() as f64;
            let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
            let recall = if actual > 0.0 { tp / actual } else { 0.0 };
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            f1 * actual / n
        })
        .sum()
}

/// Exhaustive positive/negative pair counting; ties count one half.
pub fn auc_oracle(scores: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let mut total = 0.0;
    let mut used = 0;
    for c in 0..k {
        let pos: Vec<f64> = scores
            .iter()
            .zip(labels)
            .filter(|(_, &y)| y == c)
            .map(|(s, _)| s[c])
            .collect();
        let neg: Vec<f64> = scores
            .iter()
            .zip(labels)
            .filter(|(_, &y)| y != c)
            .map(|(s, _)| s[c])
            .collect();
        if pos.is_empty() || neg.is_empty() {
            continue;
        }
        let mut wins = 0.0;
        for p in &pos {
            for q in &neg {
                wins += if p > q {
                    1.0
                } else if p == q {
                    0.5
                } else {
                    0.0
                };
            }
        }
        total += wins / (pos.len() * neg.len()) as f64;
        used += 1;
    }
    total / used as f64
}
