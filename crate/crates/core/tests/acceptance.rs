//! Acceptance criteria; prints one PASS/FAIL line per criterion.

mod common;

use std::time::Instant;

use gazelt::distill::{bd_loss, ldam_loss, train_student, StudentTrainConfig};
use gazelt::eval::{
    auc_macro_ovr, average_accuracy, balanced_accuracy, group_average, mcc_multiclass,
    per_class_accuracy, weighted_f1, welch_t_test, ConfusionMatrix,
};
use gazelt::gaze::{synth_dataset, ClassGrouping, FixationPoint, Group, Split, SynthConfig};
use gazelt::hva::{gaussian_filter, partition_fixations, read_hva, single_linkage, write_hva};
use gazelt::pipeline::{
    ablate_kd, evaluate_student, run_gradchecks, run_student, run_teacher, sweep_table,
    sweep_windows, training_targets, Checkpoint, Dataset, RunConfig,
};
use gazelt::teacher::tval_loss;
use gazelt::tensor::{Graph, OptimConfig, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

fn report(pass: bool, detail: &str) -> Outcome {
    (pass, detail.to_string())
}

fn criterion_1_gradient_correctness() -> Outcome {
    let t0 = Instant::now();
    let entries = run_gradchecks(0).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let names: Vec<&str> = entries.iter().map(|e| e.loss.as_str()).collect();
    let worst = entries.iter().map(|e| e.max_rel_error).fold(0.0, f64::max);
    let pass = names == ["L_I-tVAL", "L_D-tVAL", "L_BD", "L_LDAM", "L_s"]
        && entries
            .iter()
            .all(|e| e.max_rel_error < 1e-4 && e.skipped < e.coordinates)
        && secs < 60.0;
    let detail = entries
        .iter()
        .map(|e| format!("{} {:.1e}", e.loss, e.max_rel_error))
        .collect::<Vec<_>>()
        .join(", ");
    report(pass, &format!("{detail}; worst {worst:.1e}; {secs:.1}s"))
}

fn tval(outputs: &[Tensor], targets: &[Tensor]) -> f64 {
    let mut g = Graph::new();
    let vars: Vec<_> = outputs.iter().map(|o| g.constant(o.clone())).collect();
    let l = tval_loss(&mut g, &vars, targets).unwrap();
    g.value(l).item()
}

fn bd(p: &[f64], q: &[f64]) -> f64 {
    let mut g = Graph::new();
    let f = g.constant(Tensor::from_vec(p.iter().map(|v| v.ln()).collect()));
    let l = bd_loss(&mut g, f, &Tensor::from_vec(q.to_vec()), 1e-12).unwrap();
    g.value(l).item()
}

fn criterion_2_loss_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let maps: Vec<Tensor> = [32, 16, 8, 4]
        .iter()
        .map(|&s| {
            Tensor::new(
                &[s, s],
                (0..s * s).map(|_| rng.gen_range(0.0..1.0)).collect(),
            )
            .unwrap()
        })
        .collect();
    let scaled: Vec<Tensor> = maps.iter().map(|m| m.map(|v| 3.7 * v)).collect();
    let negated: Vec<Tensor> = maps.iter().map(|m| m.map(|v| -v)).collect();
    let prop = tval(&scaled, &maps);
    let anti = tval(&negated, &maps);

    let dist: Vec<f64> = {
        let raw: Vec<f64> = (0..6).map(|_| rng.gen_range(0.05..1.0)).collect();
        let s: f64 = raw.iter().sum();
        raw.iter().map(|v| v / s).collect()
    };
    let bd_same = bd(&dist, &dist);
    let bd_case = bd(&[0.5, 0.5], &[0.9, 0.1]);

    let mut ce_err: f64 = 0.0;
    for _ in 0..1000 {
        let k = rng.gen_range(2..10);
        let z: Vec<f64> = (0..k).map(|_| rng.gen_range(-8.0..8.0)).collect();
        let y = rng.gen_range(0..k);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let ce = lse - z[y];
        let mut g = Graph::new();
        let zv = g.constant(Tensor::from_vec(z));
        let l = ldam_loss(&mut g, zv, y, &vec![0.0; k]).unwrap();
        ce_err = ce_err.max((g.value(l).item() - ce).abs());
    }
    let pass = prop.abs() <= 1e-12
        && (anti - 8.0).abs() <= 1e-12
        && bd_same.abs() <= 1e-12
        && (bd_case - 0.111572).abs() <= 1e-6
        && ce_err <= 1e-9;
    report(pass,
        &format!(
            "tVAL prop {prop:.1e}, antipodal {anti:.15}, BD same {bd_same:.1e}, BD case {bd_case:.6}, LDAM-CE {ce_err:.1e}"
        ),
    )
}

fn criterion_3_hva_engine() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut conv_err: f64 = 0.0;
    for _ in 0..100 {
        let grid: Vec<f64> = (0..32 * 32).map(|_| rng.gen_range(0.0..1.0)).collect();
        let sigma = rng.gen_range(0.5..4.0);
        let a = gaussian_filter(&grid, 32, 32, sigma, 4.0);
        let b = common::direct_gaussian(&grid, 32, 32, sigma, 4.0);
        conv_err = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).abs())
            .fold(conv_err, f64::max);
    }

    let mut mass_err: f64 = 0.0;
    for _ in 0..20 {
        let sigma: f64 = rng.gen_range(1.0..3.0);
        let r = (4.0 * sigma).ceil() as usize;
        let side = 2 * r + 8;
        let mut grid = vec![0.0; side * side];
        let (y, x) = (rng.gen_range(r..side - r), rng.gen_range(r..side - r));
        let weight = rng.gen_range(100.0..600.0);
        grid[y * side + x] = weight;
        let out = gaussian_filter(&grid, side, side, sigma, 4.0);
        mass_err = mass_err.max((out.iter().sum::<f64>() - weight).abs() / weight);
    }

    let mut partition_ok = 0;
    for _ in 0..200 {
        let n = rng.gen_range(1..9);
        let m = rng.gen_range(100..5000u32) as f64;
        let total = m * n as f64;
        let mut onsets: Vec<f64> = (0..rng.gen_range(0..40))
            .map(|_| rng.gen_range(0..=total as u32) as f64)
            .collect();
        onsets.sort_by(f64::total_cmp);
        let points = onsets
            .iter()
            .map(|&t| FixationPoint::new(1.0, 1.0, t, 1.0))
            .collect();
        let seq = gazelt::gaze::GazeSequence::from_points("p", points).with_total_duration(total);
        let part = partition_fixations(&seq, n).unwrap();
        let expected = common::partition_oracle(&onsets, total, n);
        let got: Vec<usize> = onsets
            .iter()
            .map(|t| {
                part.window_points
                    .iter()
                    .position(|w| w.iter().any(|p| p.onset_ms == *t))
                    .unwrap()
            })
            .collect();
        let count_ok = part.window_points.iter().map(Vec::len).sum::<usize>() == onsets.len();
        if got == expected && count_ok {
            partition_ok += 1;
        }
    }

    let mut linkage_ok = 0;
    for _ in 0..200 {
        let n = rng.gen_range(0..25);
        let thr = rng.gen_range(5.0..60.0);
        let xy: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.gen_range(0..200) as f64, rng.gen_range(0..200) as f64))
            .collect();
        let points: Vec<FixationPoint> = xy
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| FixationPoint::new(x, y, i as f64, 100.0))
            .collect();
        let mut got: Vec<Vec<usize>> = single_linkage(&points, thr)
            .iter()
            .map(|c| {
                let mut ids: Vec<usize> = c.iter().map(|p| p.onset_ms as usize).collect();
                ids.sort_unstable();
                ids
            })
            .collect();
        got.sort();
        if got == common::linkage_oracle(&xy, thr) {
            linkage_ok += 1;
        }
    }
    let pass = conv_err <= 1e-6 && mass_err <= 1e-12 && partition_ok == 200 && linkage_ok == 200;
    report(pass,
        &format!(
            "separable vs direct {conv_err:.1e}, mass {mass_err:.1e}, partition {partition_ok}/200, linkage {linkage_ok}/200"
        ),
    )
}

fn criterion_4_metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let k = rng.gen_range(2..7);
        let rows = common::random_cm(&mut rng, k, 12);
        let cm = ConfusionMatrix::from_rows(&rows).unwrap();
        let recalls = common::recall_oracle(&rows);
        worst = worst.max((mcc_multiclass(&cm) - common::mcc_oracle(&rows)).abs());
        worst = worst.max((weighted_f1(&cm) - common::weighted_f1_oracle(&rows)).abs());
        for (a, b) in per_class_accuracy(&cm).iter().zip(&recalls) {
            match (a, b) {
                (Some(a), Some(b)) => worst = worst.max((a - b).abs()),
                (None, None) => {}
                _ => worst = f64::INFINITY,
            }
        }
        let present: Vec<f64> = recalls.iter().flatten().copied().collect();
        match balanced_accuracy(&cm) {
            Ok(v) if present.len() == k => {
                worst = worst.max((v - present.iter().sum::<f64>() / k as f64).abs())
            }
            Err(_) if present.len() < k => {}
            _ => worst = f64::INFINITY,
        }
        let avg = average_accuracy(&recalls).unwrap_or(0.0);
        let avg_oracle = if present.is_empty() {
            0.0
        } else {
            present.iter().sum::<f64>() / present.len() as f64
        };
        worst = worst.max((avg - avg_oracle).abs());
        let grouping = ClassGrouping((0..k).map(|_| Group::ALL[rng.gen_range(0..3)]).collect());
        let groups = group_average(&recalls, &grouping).unwrap();
        for g in Group::ALL {
            let vals: Vec<f64> = (0..k)
                .filter(|&c| grouping.group(c) == g)
                .filter_map(|c| recalls[c])
                .collect();
            let oracle = (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
            match (groups.get(g), oracle) {
                (Some(a), Some(b)) => worst = worst.max((a - b).abs()),
                (None, None) => {}
                _ => worst = f64::INFINITY,
            }
        }
    }
    let mut auc_worst: f64 = 0.0;
    for _ in 0..100 {
        let k = rng.gen_range(2..5);
        let n = rng.gen_range(k + 2..40);
        let mut labels: Vec<usize> = (0..n)
            .map(|i| if i < k { i } else { rng.gen_range(0..k) })
            .collect();
        labels.rotate_left(rng.gen_range(0..n));
        // coarse scores so ties occur
        let scores: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..k).map(|_| rng.gen_range(0..6) as f64 / 5.0).collect())
            .collect();
        let got = auc_macro_ovr(&scores, &labels, k).unwrap().macro_auc;
        auc_worst = auc_worst.max((got - common::auc_oracle(&scores, &labels, k)).abs());
    }
    let w = welch_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    let welch_ok =
        (w.t + 1.0).abs() < 1e-12 && (w.df - 8.0).abs() < 1e-12 && (w.p - 0.3466).abs() <= 1e-3;
    let pass = worst <= 1e-9 && auc_worst <= 1e-9 && welch_ok;
    report(pass,
        &format!(
            "cm metrics max dev {worst:.1e}, AUC max dev {auc_worst:.1e}, welch t={:.4} df={:.2} p={:.4}",
            w.t, w.df, w.p
        ),
    )
}

fn criterion_5_synthetic_end_to_end() -> Outcome {
    let t0 = Instant::now();
    let cfg = RunConfig::desk();
    let synth = synth_dataset(&cfg.synth).unwrap();
    let counts = synth.manifest.class_counts();
    let groups = synth.manifest.grouping();
    let data = Dataset::from_synth(&synth).unwrap();
    let hva = data.build_hva(cfg.n_windows, &cfg.hva_params()).unwrap();
    let (teacher, _) = run_teacher(&cfg, &data, &hva).unwrap();
    let ablation = ablate_kd(&cfg, &data, &teacher).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let shape_ok = counts.len() == 8
        && groups.members(Group::Head).len() == 3
        && groups.members(Group::Medium).len() == 3
        && groups.members(Group::Tail).len() == 2
        && (counts[7] as f64 - counts[0] as f64 / 100.0).abs() <= 1.0;
    let p = ablation
        .welch
        .map_or("undefined".to_string(), |w| format!("{:.4}", w.p));
    println!("{}", ablation.summary());
    let pass = shape_ok && ablation.wins >= 4 && ablation.arms.len() == 5 && secs < 1800.0;
    report(pass,
        &format!(
            "lambda=1 beats lambda=0 on tail accuracy in {}/{} seeds, welch p = {p}, counts {counts:?}, {secs:.0}s",
            ablation.wins,
            ablation.arms.len()
        ),
    )
}

fn small_config() -> RunConfig {
    let mut cfg = RunConfig::desk();
    cfg.synth = SynthConfig {
        n_train: 300,
        n_balanced_test_per_class: 4,
        n_test: 48,
        ..cfg.synth
    };
    cfg.teacher_train.twi.epochs = 1;
    cfg.teacher_train.twd.epochs = 1;
    cfg.student_train.optim.epochs = 2;
    cfg
}

fn criterion_6_window_sweep() -> Outcome {
    let cfg = small_config();
    let data = Dataset::from_synth(&synth_dataset(&cfg.synth).unwrap()).unwrap();
    let rows = sweep_windows(&cfg, &data).unwrap();
    let table = sweep_table(&rows);
    println!("{table}");
    let windows: Vec<usize> = rows.iter().map(|r| r.n_windows).collect();
    let pass = windows == [2, 4, 8]
        && ["2 windows", "4 windows", "8 windows"]
            .iter()
            .all(|l| table.contains(l))
        && rows.iter().all(|r| r.balanced.avg_acc.is_some());
    report(pass, &format!("rows for n = {windows:?}"))
}

fn criterion_7_determinism_and_persistence() -> Outcome {
    let cfg = small_config();
    let synth = synth_dataset(&cfg.synth).unwrap();
    let data = Dataset::from_synth(&synth).unwrap();
    let run = || {
        let hva = data.build_hva(cfg.n_windows, &cfg.hva_params()).unwrap();
        let (teacher, _) = run_teacher(&cfg, &data, &hva).unwrap();
        let targets = training_targets(&data, &teacher).unwrap();
        let (student, _) = run_student(&cfg, &data, Some(&targets), 1.0, cfg.seed).unwrap();
        let bal = evaluate_student(&student, &data, Split::BalancedTest, cfg.seed).unwrap();
        let test = evaluate_student(&student, &data, Split::Test, cfg.seed).unwrap();
        (
            teacher,
            student,
            serde_json::to_string(&(bal, test)).unwrap(),
        )
    };
    let (teacher, student, first) = run();
    let (_, _, second) = run();
    let reports_equal = first == second;

    let tbytes = Checkpoint::from_teacher(&teacher, cfg.seed)
        .to_bytes()
        .unwrap();
    let t_loaded = Checkpoint::from_bytes(&tbytes)
        .unwrap()
        .into_teacher(cfg.teacher_config())
        .unwrap();
    let sbytes = Checkpoint::from_student(&student, cfg.seed)
        .to_bytes()
        .unwrap();
    let s_loaded = Checkpoint::from_bytes(&sbytes)
        .unwrap()
        .into_student(cfg.student)
        .unwrap();
    let ckpt_ok = Checkpoint::from_teacher(&t_loaded, cfg.seed)
        .to_bytes()
        .unwrap()
        == tbytes
        && Checkpoint::from_student(&s_loaded, cfg.seed)
            .to_bytes()
            .unwrap()
            == sbytes;

    let hva = data.build_hva(cfg.n_windows, &cfg.hva_params()).unwrap();
    let hva_ok = hva.values().take(20).all(|set| {
        let mut buf = Vec::new();
        write_hva(&set.integration, &mut buf).unwrap();
        let back = read_hva(buf.as_slice()).unwrap();
        let mut again = Vec::new();
        write_hva(&back, &mut again).unwrap();
        buf == again
            && back.iter().zip(&set.integration).all(|(a, b)| {
                a.grid
                    .iter()
                    .zip(&b.grid)
                    .all(|(x, y)| x.to_bits() == (*y as f32 as f64).to_bits())
            })
    });

    let snapshot = Checkpoint::from_teacher(&t_loaded, cfg.seed)
        .to_bytes()
        .unwrap();
    let samples: Vec<(Tensor, usize)> = data
        .samples(Split::Train)
        .into_iter()
        .map(|(_, x, y)| (x, y))
        .collect();
    let train = StudentTrainConfig {
        optim: OptimConfig {
            batch_size: 32,
            ..OptimConfig::constant(1e-3, 1)
        },
        ..StudentTrainConfig::default()
    };
    train_student(cfg.student, &train, &t_loaded, &samples, 9).unwrap();
    let frozen = Checkpoint::from_teacher(&t_loaded, cfg.seed)
        .to_bytes()
        .unwrap()
        == snapshot
        && t_loaded
            .twi
            .iter()
            .chain(t_loaded.twd.iter())
            .all(|(_, p)| !p.trainable);

    let pass = reports_equal && ckpt_ok && hva_ok && frozen;
    report(pass,
        &format!("reports equal {reports_equal}, checkpoint round trip {ckpt_ok}, HVA round trip {hva_ok}, teacher frozen {frozen}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("gradient correctness", criterion_1_gradient_correctness),
        ("loss identities", criterion_2_loss_identities),
        ("HVA engine", criterion_3_hva_engine),
        ("metric oracles", criterion_4_metric_oracles),
        ("synthetic end-to-end", criterion_5_synthetic_end_to_end),
        ("window sensitivity harness", criterion_6_window_sweep),
        (
            "determinism and persistence",
            criterion_7_determinism_and_persistence,
        ),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        let (pass, detail) = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        });
        failed += usize::from(!pass);
        println!(
            "[{}] {}. {name}: {detail}",
            if pass { "PASS" } else { "FAIL" },
            i + 1
        );
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
