//! Synthetic long-tailed image set with simulated reader gaze.
//!
//! Every class owns a fixed cell of the image and a textured patch whose
//! mean brightness and stripe orientation are class specific. Images of
//! non-head classes usually also carry a co-occurring head-class finding.
//! Simulated readers fixate the head-class finding during the first half of
//! the viewing time and the image's own finding during the second half.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{
    ClassGrouping, DatasetManifest, FixationPoint, GazeError, GazeSequence, Group, ImageRecord,
    Split,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Number of head, medium and tail classes.
    pub n_classes_per_group: [usize; 3],
    /// Ratio of the largest to the smallest training class.
    pub imbalance_factor: f64,
    pub image_size: usize,
    pub n_train: usize,
    pub n_balanced_test_per_class: usize,
    pub n_test: usize,
    pub seed: u64,
    /// Resolution the simulated gaze/HVA scales refer to; the rendered image
    /// is a downsample of it by `image_size / native_size`.
    pub native_size: usize,
    pub noise_std: f64,
    /// Probability that a non-head image also shows a head-class finding.
    pub co_finding_prob: f64,
    /// Fraction of fixations that land on a random location.
    pub glance_prob: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_classes_per_group: [3, 3, 2],
            imbalance_factor: 100.0,
            image_size: 64,
            n_train: 2000,
            n_balanced_test_per_class: 25,
            n_test: 400,
            seed: 0,
            native_size: 512,
            noise_std: 0.12,
            co_finding_prob: 0.8,
            glance_prob: 0.15,
        }
    }
}

impl SynthConfig {
    pub fn n_classes(&self) -> usize {
        self.n_classes_per_group.iter().sum()
    }

    /// Pixel scale of the rendered image relative to the native resolution.
    pub fn resolution_scale(&self) -> f64 {
        self.image_size as f64 / self.native_size as f64
    }

    fn cell_size(&self) -> usize {
        self.image_size / 4
    }

    fn placeable_patches(&self) -> usize {
        let per_axis = self.image_size / self.cell_size().max(1);
        per_axis * per_axis
    }

    fn validate(&self) -> Result<(), GazeError> {
        let err = |m: String| Err(GazeError::Config(m));
        if self.imbalance_factor < 1.0 || !self.imbalance_factor.is_finite() {
            return err(format!(
                "imbalance_factor must be >= 1, got {}",
                self.imbalance_factor
            ));
        }
        if self.image_size < 32 {
            return err(format!("image_size must be >= 32, got {}", self.image_size));
        }
        let k = self.n_classes();
        if k == 0 {
            return err("at least one class is required".into());
        }
        if k > self.placeable_patches() {
            return err(format!(
                "{k} classes but only {} patch locations fit in a {}px image",
                self.placeable_patches(),
                self.image_size
            ));
        }
        if self.n_train < k {
            return err(format!(
                "n_train {} is smaller than the class count {k}",
                self.n_train
            ));
        }
        if !(0.0..=1.0).contains(&self.co_finding_prob) || !(0.0..=1.0).contains(&self.glance_prob)
        {
            return err("probabilities must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// Generated grayscale image, row-major `image_size^2` bytes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthImage {
    pub id: String,
    pub pixels: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthDataset {
    pub manifest: DatasetManifest,
    /// Gaze for every training image, in manifest order.
    pub gaze: Vec<GazeSequence>,
    pub images: Vec<SynthImage>,
}

impl SynthDataset {
    pub fn image(&self, id: &str) -> Option<&SynthImage> {
        self.images.iter().find(|i| i.id == id)
    }
}

/// Exponential long-tail profile `n_c ∝ imbalance^(-c/(K-1))`, rounded with
/// largest remainders so the counts sum to `total` exactly.
pub fn long_tail_counts(n_classes: usize, imbalance: f64, total: usize) -> Vec<usize> {
    let weights: Vec<f64> = (0..n_classes)
        .map(|c| {
            if n_classes == 1 {
                1.0
            } else {
                imbalance.powf(-(c as f64) / (n_classes - 1) as f64)
            }
        })
        .collect();
    let scale = total as f64 / weights.iter().sum::<f64>();
    let targets: Vec<f64> = weights.iter().map(|w| w * scale).collect();
    let mut counts: Vec<usize> = targets.iter().map(|t| t.floor() as usize).collect();
    let mut order: Vec<usize> = (0..n_classes).collect();
    order.sort_by(|&a, &b| {
        let fa = targets[a] - targets[a].floor();
        let fb = targets[b] - targets[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let missing = total - counts.iter().sum::<usize>();
    for &c in order.iter().take(missing) {
        counts[c] += 1;
    }
    counts.iter_mut().for_each(|c| *c = (*c).max(1));
    counts
}

#[derive(Clone, Copy, Debug)]
struct ClassPattern {
    /// Patch center in pixels.
    cx: f64,
    cy: f64,
    brightness: f64,
    orientation: f64,
}

fn class_patterns(cfg: &SynthConfig) -> Vec<ClassPattern> {
    let k = cfg.n_classes();
    let cell = cfg.cell_size() as f64;
    let per_axis = cfg.image_size / cfg.cell_size();
    // Spread classes over the grid: stride through cells coprime with the count.
    let n_cells = per_axis * per_axis;
    let stride = (1..n_cells)
        .rev()
        .find(|s| gcd(*s, n_cells) == 1 && *s <= n_cells / 2 + 1)
        .unwrap_or(1);
    (0..k)
        .map(|c| {
            let cell_idx = (c * stride) % n_cells;
            let (row, col) = (cell_idx / per_axis, cell_idx % per_axis);
            let sign = if c < cfg.n_classes_per_group[0] {
                1.0
            } else {
                -1.0
            };
            ClassPattern {
                cx: (col as f64 + 0.5) * cell,
                cy: (row as f64 + 0.5) * cell,
                brightness: sign * (0.40 - 0.24 * c as f64 / (k.max(2) - 1) as f64),
                orientation: std::f64::consts::PI * c as f64 / k as f64,
            }
        })
        .collect()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn paint_finding(canvas: &mut [f64], size: usize, p: &ClassPattern, jitter: (f64, f64)) {
    let radius = size as f64 / 10.0;
    let (cx, cy) = (p.cx + jitter.0, p.cy + jitter.1);
    let period = radius * 0.9;
    let (dx, dy) = (p.orientation.cos(), p.orientation.sin());
    let reach = (radius * 2.5).ceil() as isize;
    for y in (cy as isize - reach).max(0)..(cy as isize + reach + 1).min(size as isize) {
        for x in (cx as isize - reach).max(0)..(cx as isize + reach + 1).min(size as isize) {
            let (u, v) = (x as f64 - cx, y as f64 - cy);
            let window = (-(u * u + v * v) / (2.0 * radius * radius)).exp();
            let stripes = 1.0 + 0.6 * (std::f64::consts::TAU * (u * dx + v * dy) / period).cos();
            canvas[y as usize * size + x as usize] += p.brightness * window * stripes;
        }
    }
}

struct Scene {
    label: usize,
    co_finding: Option<usize>,
    jitter: [(f64, f64); 2],
}

fn render(
    cfg: &SynthConfig,
    patterns: &[ClassPattern],
    scene: &Scene,
    rng: &mut ChaCha8Rng,
) -> Vec<u8> {
    let n = cfg.image_size;
    let mut canvas = vec![0.5; n * n];
    // Low-frequency background variation.
    for _ in 0..3 {
        let (bx, by) = (rng.gen_range(0.0..n as f64), rng.gen_range(0.0..n as f64));
        let amp = rng.gen_range(-0.08..0.08);
        let width = rng.gen_range(0.2..0.5) * n as f64;
        for y in 0..n {
            for x in 0..n {
                let d2 = (x as f64 - bx).powi(2) + (y as f64 - by).powi(2);
                canvas[y * n + x] += amp * (-d2 / (2.0 * width * width)).exp();
            }
        }
    }
    paint_finding(&mut canvas, n, &patterns[scene.label], scene.jitter[0]);
    if let Some(h) = scene.co_finding {
        paint_finding(&mut canvas, n, &patterns[h], scene.jitter[1]);
    }
    let noise = Normal::new(0.0, cfg.noise_std.max(1e-12)).expect("noise std");
    canvas
        .iter()
        .map(|v| ((v + noise.sample(rng)).clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect()
}

fn simulate_gaze(
    cfg: &SynthConfig,
    id: &str,
    patterns: &[ClassPattern],
    scene: &Scene,
    rng: &mut ChaCha8Rng,
) -> GazeSequence {
    let n = cfg.image_size as f64;
    let total = rng.gen_range(8_000.0..16_000.0_f64).round();
    let spread = Normal::new(0.0, n / 24.0).expect("spread");
    let own = (&patterns[scene.label], scene.jitter[0]);
    let early = match scene.co_finding {
        Some(h) => (&patterns[h], scene.jitter[1]),
        None => own,
    };
    let mut points = Vec::new();
    let mut t = rng.gen_range(0.0..200.0_f64).round();
    while t < total {
        let dwell = rng.gen_range(150.0..=600.0_f64).round();
        let (target, jitter) = if t < total / 2.0 { early } else { own };
        let (x, y) = if rng.gen_bool(cfg.glance_prob) {
            (rng.gen_range(0.0..n), rng.gen_range(0.0..n))
        } else {
            (
                target.cx + jitter.0 + spread.sample(rng),
                target.cy + jitter.1 + spread.sample(rng),
            )
        };
        let x = (x.clamp(0.0, n - 1.0) * 100.0).round() / 100.0;
        let y = (y.clamp(0.0, n - 1.0) * 100.0).round() / 100.0;
        points.push(FixationPoint::new(x, y, t, dwell.min(total - t).max(1.0)));
        t += dwell + rng.gen_range(20.0..80.0_f64).round();
    }
    // The last fixation runs to the end of viewing so the log alone fixes the duration.
    if let Some(last) = points.last_mut() {
        last.duration_ms = total - last.onset_ms;
    }
    GazeSequence::from_points(id, points)
}

/// Build a synthetic dataset. Identical configs give identical output.
pub fn synth_dataset(cfg: &SynthConfig) -> Result<SynthDataset, GazeError> {
    cfg.validate()?;
    let k = cfg.n_classes();
    let [n_head, n_medium, _] = cfg.n_classes_per_group;
    let patterns = class_patterns(cfg);
    let head_classes: Vec<usize> = (0..n_head).collect();

    let train_counts = long_tail_counts(k, cfg.imbalance_factor, cfg.n_train);
    let test_counts = long_tail_counts(k, cfg.imbalance_factor, cfg.n_test.max(k));
    let mut labels: Vec<(Split, usize)> = Vec::new();
    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for (split, counts) in [
        (Split::Train, train_counts.clone()),
        (Split::BalancedTest, vec![cfg.n_balanced_test_per_class; k]),
        (Split::Test, test_counts),
    ] {
        let mut block: Vec<(Split, usize)> = counts
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| std::iter::repeat((split, c)).take(n))
            .collect();
        block.shuffle(&mut order_rng);
        labels.extend(block);
    }

    let mut records = Vec::with_capacity(labels.len());
    let mut images = Vec::with_capacity(labels.len());
    let mut gaze = Vec::new();
    let max_jitter = cfg.cell_size() as f64 / 8.0;
    for (i, &(split, label)) in labels.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i as u64 + 1);
        let prefix = match split {
            Split::Train => "train",
            Split::BalancedTest => "bal",
            Split::Test => "test",
        };
        let id = format!("{prefix}_{i:05}");
        let co_finding =
            (label >= n_head && !head_classes.is_empty() && rng.gen_bool(cfg.co_finding_prob))
                .then(|| head_classes[rng.gen_range(0..head_classes.len())]);
        let mut jit = || {
            (
                rng.gen_range(-max_jitter..=max_jitter),
                rng.gen_range(-max_jitter..=max_jitter),
            )
        };
        let scene = Scene {
            label,
            co_finding,
            jitter: [jit(), jit()],
        };
        images.push(SynthImage {
            id: id.clone(),
            pixels: render(cfg, &patterns, &scene, &mut rng),
        });
        if split == Split::Train {
            gaze.push(simulate_gaze(cfg, &id, &patterns, &scene, &mut rng));
        }
        records.push(ImageRecord {
            path: format!("images/{id}.png").into(),
            id,
            label,
            split,
            height: cfg.image_size,
            width: cfg.image_size,
            channels: 1,
        });
    }

    let class_names = (0..k)
        .map(|c| {
            let g = if c < n_head {
                "head"
            } else if c < n_head + n_medium {
                "medium"
            } else {
                "tail"
            };
            format!("{g}_{c}")
        })
        .collect();
    let mut manifest = DatasetManifest::new(class_names, records)?;
    manifest.groups = Some(ClassGrouping(
        (0..k)
            .map(|c| {
                if c < n_head {
                    Group::Head
                } else if c < n_head + n_medium {
                    Group::Medium
                } else {
                    Group::Tail
                }
            })
            .collect(),
    ));
    Ok(SynthDataset {
        manifest,
        gaze,
        images,
    })
}
