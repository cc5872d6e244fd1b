use std::collections::BTreeMap;

use gazelt::gaze::{FixationPoint, GazeSequence};
use gazelt::hva::Variant;
use gazelt::hva::{generate_hva, IntegrationParams};
use gazelt::teacher::{train_teacher, Teacher, TeacherConfig, TeacherTrainConfig};
use gazelt::tensor::{OptimConfig, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config() -> TeacherConfig {
    TeacherConfig {
        base_channels: 4,
        distill_dim: 16,
        ..TeacherConfig::default()
    }
}

#[test]
fn shapes_for_64_pixel_input() {
    let t = Teacher::init(TeacherConfig::default(), 0).unwrap();
    let x = Tensor::full(&[1, 64, 64], 0.2);
    for variant in [Variant::Integration, Variant::Disintegration] {
        let (maps, f) = t.branch(&x, variant).unwrap();
        let shapes: Vec<Vec<usize>> = maps.iter().map(|m| m.shape().to_vec()).collect();
        assert_eq!(
            shapes,
            vec![vec![32, 32], vec![16, 16], vec![8, 8], vec![4, 4]]
        );
        assert_eq!(f.shape(), [64]);
    }
}

#[test]
fn zero_image_gives_half_everywhere() {
    let t = Teacher::init(config(), 3).unwrap();
    let (maps, _) = t
        .branch(&Tensor::zeros(&[1, 64, 64]), Variant::Integration)
        .unwrap();
    for m in maps {
        assert!(m.data().iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }
}

#[test]
fn twd_maps_are_distributions() {
    let t = Teacher::init(config(), 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = Tensor::new(
        &[1, 64, 64],
        (0..4096).map(|_| rng.gen_range(0.0..1.0)).collect(),
    )
    .unwrap();
    let (maps, _) = t.branch(&x, Variant::Disintegration).unwrap();
    for m in &maps {
        assert!((m.data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let (flat, _) = t
        .branch(&Tensor::full(&[1, 64, 64], 0.7), Variant::Disintegration)
        .unwrap();
    for m in &flat {
        let u = 1.0 / m.len() as f64;
        assert!(m.data().iter().all(|&v| (v - u).abs() < 1e-12));
    }
}

#[test]
fn forward_is_deterministic() {
    let a = Teacher::init(config(), 9).unwrap();
    let b = Teacher::init(config(), 9).unwrap();
    let x = Tensor::full(&[1, 64, 64], 0.4);
    assert_eq!(a.features(&x).unwrap(), b.features(&x).unwrap());
    assert_eq!(a, b);
}

/// Four images, each with one bright blob fixated in both windows.
fn overfit_set() -> (Vec<(String, Tensor)>, BTreeMap<String, gazelt::hva::HvaSet>) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut images = Vec::new();
    let mut hva = BTreeMap::new();
    let params = IntegrationParams::default().scaled(32.0 / 512.0);
    for i in 0..4 {
        let id = format!("img{i}");
        let spots = [(rng.gen_range(4.0..28.0), rng.gen_range(4.0..28.0))];
        let pixels = (0..1024)
            .map(|p| {
                let (y, x) = ((p / 32) as f64, (p % 32) as f64);
                let blob: f64 = spots
                    .iter()
                    .map(|&(sx, sy)| (-((x - sx).powi(2) + (y - sy).powi(2)) / 8.0).exp())
                    .sum();
                0.1 * rng.gen_range(0.0..1.0) + blob.min(1.0)
            })
            .collect();
        let (x, y) = spots[0];
        let points = (0..2)
            .map(|k| FixationPoint::new(x, y, k as f64 * 1000.0, 1000.0))
            .collect();
        let seq = GazeSequence::from_points(id.clone(), points);
        hva.insert(id.clone(), generate_hva(&seq, 2, &params, 32, 32).unwrap());
        images.push((id, Tensor::new(&[1, 32, 32], pixels).unwrap()));
    }
    (images, hva)
}

fn small() -> TeacherConfig {
    TeacherConfig {
        n_subblocks: 2,
        base_channels: 4,
        distill_dim: 8,
        map_grid: 2,
        ..TeacherConfig::default()
    }
}

#[test]
fn overfits_four_images() {
    let (images, hva) = overfit_set();
    let optim = OptimConfig {
        batch_size: 1,
        ..OptimConfig::constant(3e-2, 30)
    };
    let train = TeacherTrainConfig {
        twi: optim,
        twd: optim,
    };
    let (_, history) = train_teacher(small(), &train, &images, &hva, 0).unwrap();
    let untrained = TeacherTrainConfig {
        twi: OptimConfig {
            batch_size: 4,
            ..OptimConfig::constant(1e-12, 1)
        },
        twd: OptimConfig {
            batch_size: 4,
            ..OptimConfig::constant(1e-12, 1)
        },
    };
    let (_, initial) = train_teacher(small(), &untrained, &images, &hva, 0).unwrap();
    assert!(
        history.twi.last().unwrap() < &(0.5 * initial.twi[0]),
        "{:?} vs {}",
        history.twi,
        initial.twi[0]
    );
    assert!(*history.twd.last().unwrap() < initial.twd[0]);
}

#[test]
fn zero_epochs_keeps_initialization() {
    let (images, hva) = overfit_set();
    let zero = OptimConfig::constant(1e-3, 0);
    let (t, history) = train_teacher(
        small(),
        &TeacherTrainConfig {
            twi: zero,
            twd: zero,
        },
        &images,
        &hva,
        5,
    )
    .unwrap();
    assert!(history.twi.is_empty() && history.twd.is_empty());
    let init = Teacher::init(small(), 5).unwrap();
    for (store, fresh) in [(&t.twi, &init.twi), (&t.twd, &init.twd)] {
        for ((_, a), (_, b)) in store.iter().zip(fresh.iter()) {
            if !a.name.contains(".proj.") {
                assert_eq!(a.tensor, b.tensor, "{}", a.name);
            }
        }
    }
}

#[test]
fn missing_hva_names_the_image() {
    let (images, mut hva) = overfit_set();
    hva.remove("img2");
    let err = train_teacher(small(), &TeacherTrainConfig::default(), &images, &hva, 0).unwrap_err();
    assert!(err.to_string().contains("img2"), "{err}");
}
