mod common;

use std::collections::BTreeMap;

use gazelt::gaze::{
    group_classes, parse_fixation_csv, synth_dataset, validate_sequence, write_fixation_csv,
    FixationPoint, Group, SynthConfig,
};
use gazelt::hva::{
    cluster_integration, generate_hva, render_map, resize_bilinear, IntegrationParams, Variant,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn shuffled_rows_group_by_image() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut rows: Vec<(String, f64, f64, f64, f64)> = (0..100)
        .map(|i| {
            let id = format!("img{}", rng.gen_range(0..3));
            (
                id,
                rng.gen_range(0..64) as f64,
                rng.gen_range(0..64) as f64,
                (i * 100) as f64,
                rng.gen_range(50..400) as f64,
            )
        })
        .collect();
    rows.shuffle(&mut rng);
    let mut csv = String::from("image_id,x_px,y_px,onset_ms,duration_ms\n");
    for (id, x, y, t, d) in &rows {
        csv.push_str(&format!("{id},{x},{y},{t},{d}\n"));
    }
    let seqs = parse_fixation_csv(csv.as_bytes()).unwrap();

    let mut oracle: BTreeMap<&str, Vec<(f64, f64, f64, f64)>> = BTreeMap::new();
    for (id, x, y, t, d) in &rows {
        oracle
            .entry(id.as_str())
            .or_default()
            .push((*x, *y, *t, *d));
    }
    assert_eq!(seqs.len(), oracle.len());
    for seq in &seqs {
        let mut want = oracle[seq.image_id.as_str()].clone();
        want.sort_by(|a, b| a.2.total_cmp(&b.2));
        let got: Vec<_> = seq
            .points
            .iter()
            .map(|p| (p.x_px, p.y_px, p.onset_ms, p.duration_ms))
            .collect();
        assert_eq!(got, want);
    }
}

#[test]
fn clamping_matches_per_point_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (h, w) = (48usize, 64usize);
    let points: Vec<FixationPoint> = (0..50)
        .map(|i| {
            let out = rng.gen_bool(0.3);
            let x = if out {
                rng.gen_range(-40.0..110.0)
            } else {
                rng.gen_range(0.0..63.0)
            };
            let y = if out {
                rng.gen_range(-40.0..90.0)
            } else {
                rng.gen_range(0.0..47.0)
            };
            FixationPoint::new(x, y, i as f64 * 10.0, 5.0)
        })
        .collect();
    let seq = gazelt::gaze::GazeSequence::from_points("a", points.clone());
    let (fixed, report) = validate_sequence(&seq, h, w);
    let mut clamped = 0;
    for (p, q) in points.iter().zip(&fixed.points) {
        let fit = |v: f64, n: usize| {
            if (0.0..n as f64).contains(&v) {
                v
            } else {
                v.clamp(0.0, (n - 1) as f64)
            }
        };
        let (x, y) = (fit(p.x_px, w), fit(p.y_px, h));
        clamped += usize::from((x, y) != (p.x_px, p.y_px));
        assert_eq!((q.x_px, q.y_px), (x, y));
    }
    assert_eq!(report.clamped_points, clamped);
}

#[test]
fn grouping_follows_permutations() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..50 {
        let counts: Vec<usize> = (0..8).map(|_| rng.gen_range(0..3000)).collect();
        let mut perm: Vec<usize> = (0..8).collect();
        perm.shuffle(&mut rng);
        let moved: Vec<usize> = perm.iter().map(|&i| counts[i]).collect();
        let (g, gm) = (group_classes(&counts), group_classes(&moved));
        for (j, &i) in perm.iter().enumerate() {
            assert_eq!(gm.group(j), g.group(i));
        }
    }
    assert_eq!(
        group_classes(&[6941, 868, 59]).0,
        vec![Group::Head, Group::Medium, Group::Tail]
    );
}

#[test]
fn synthetic_counts_span_the_imbalance() {
    let ds = synth_dataset(&SynthConfig {
        n_train: 2000,
        n_test: 16,
        n_balanced_test_per_class: 2,
        ..SynthConfig::default()
    })
    .unwrap();
    let counts = ds.manifest.class_counts();
    let (max, min) = (
        *counts.iter().max().unwrap() as f64,
        *counts.iter().min().unwrap() as f64,
    );
    assert!((min - max / 100.0).abs() <= 1.0, "{counts:?}");
    assert_eq!(counts.iter().sum::<usize>(), 2000);
}

#[test]
fn cluster_choice_ignores_input_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let key = |v: &[FixationPoint]| {
        let mut k: Vec<u64> = v.iter().map(|p| p.onset_ms as u64).collect();
        k.sort_unstable();
        k
    };
    for _ in 0..100 {
        let mut points: Vec<FixationPoint> = (0..rng.gen_range(1..15))
            .map(|i| {
                FixationPoint::new(
                    rng.gen_range(0.0..300.0),
                    rng.gen_range(0.0..300.0),
                    i as f64,
                    rng.gen_range(100.0..500.0),
                )
            })
            .collect();
        let (main, subs) = cluster_integration(&points, 60.0);
        points.shuffle(&mut rng);
        let (main2, subs2) = cluster_integration(&points, 60.0);
        assert_eq!((key(&main), key(&subs)), (key(&main2), key(&subs2)));
    }
}

#[test]
fn equal_durations_pick_the_earliest_cluster() {
    let pts = [
        FixationPoint::new(0.0, 0.0, 0.0, 100.0),
        FixationPoint::new(10.0, 0.0, 100.0, 100.0),
        FixationPoint::new(200.0, 0.0, 200.0, 100.0),
    ];
    let (main, subs) = cluster_integration(&pts, 50.0);
    assert_eq!(main.len(), 2);
    assert_eq!(subs, vec![pts[2]]);
}

#[test]
fn resize_matches_bilinear_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let grid: Vec<f64> = (0..64).map(|_| rng.gen_range(0.0..1.0)).collect();
    let out = resize_bilinear(&grid, 8, 8, 4, 4);
    for oy in 0..4 {
        for ox in 0..4 {
            let (sy, sx) = (oy as f64 * 7.0 / 3.0, ox as f64 * 7.0 / 3.0);
            let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
            let (y1, x1) = ((y0 + 1).min(7), (x0 + 1).min(7));
            let (fy, fx) = (sy - y0 as f64, sx - x0 as f64);
            let at = |y: usize, x: usize| grid[y * 8 + x];
            let v = (1.0 - fy) * ((1.0 - fx) * at(y0, x0) + fx * at(y0, x1))
                + fy * ((1.0 - fx) * at(y1, x0) + fx * at(y1, x1));
            assert!((out[oy * 4 + ox] - v).abs() < 1e-12);
        }
    }
}

#[test]
fn generated_maps_are_peak_normalized() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let params = IntegrationParams::default().scaled(0.125);
    for _ in 0..20 {
        let n = rng.gen_range(0..12);
        let seq = common::random_sequence(&mut rng, n, 64.0);
        if seq.total_duration_ms <= 0.0 {
            continue;
        }
        let set = generate_hva(&seq, 4, &params, 64, 64).unwrap();
        for m in set.integration.iter().chain(&set.disintegration) {
            assert!(m.grid.iter().all(|&v| v >= 0.0));
            assert!((m.max() - 1.0).abs() < 1e-12);
        }
    }
    let one = render_map(
        &[FixationPoint::new(40.0, 20.0, 0.0, 300.0)],
        Variant::Disintegration,
        &params,
        64,
        64,
        0,
    );
    assert_eq!(one.argmax(), (20, 40));
}

proptest! {
    #[test]
    fn fixation_csv_round_trips(raw in prop::collection::vec((0u8..4, 0.0f64..512.0, 0.0f64..512.0, 0u32..60_000, 1u32..2_000), 0..40)) {
        let points: BTreeMap<String, Vec<FixationPoint>> = raw.iter().fold(BTreeMap::new(), |mut acc, &(id, x, y, t, d)| {
            acc.entry(format!("img{id}")).or_insert_with(Vec::new).push(FixationPoint::new(x, y, f64::from(t), f64::from(d)));
            acc
        });
        let seqs: Vec<_> = points.into_iter().map(|(id, p)| gazelt::gaze::GazeSequence::from_points(id, p)).collect();
        let mut buf = Vec::new();
        write_fixation_csv(&seqs, &mut buf).unwrap();
        let back = parse_fixation_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(&back, &seqs);
        let mut again = Vec::new();
        write_fixation_csv(&back, &mut again).unwrap();
        prop_assert_eq!(again, buf);
    }
}
