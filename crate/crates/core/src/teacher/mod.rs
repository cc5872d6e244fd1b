//! Gaze-supervised teacher: focal-gating (TW-I) and global-context (TW-D)
//! branches trained to reproduce windowed attention maps layer by layer.

mod loss;
mod net;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::hva::{resize_map, HvaError, HvaSet, Variant};
use crate::tensor::{fit, Graph, OptimConfig, ParamStore, Tensor, TensorError};

pub use loss::{tval_loss, unit_normalized};
pub use net::{init_twd, init_twi, twd_forward, twi_forward, TeacherConfig, TeacherOutputs};

#[derive(Debug, thiserror::Error)]
pub enum TeacherError {
    #[error("no HVA maps for training image `{0}`")]
    MissingHva(String),
    #[error("image `{image}` has {found} HVA windows, the teacher has {expected} sub-blocks")]
    WindowMismatch {
        image: String,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Hva(#[from] HvaError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Both teacher branches.
#[derive(Clone, Debug, PartialEq)]
pub struct Teacher {
    pub config: TeacherConfig,
    pub twi: ParamStore,
    pub twd: ParamStore,
}

impl Teacher {
    pub fn init(config: TeacherConfig, seed: u64) -> Result<Self, TensorError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let twi = init_twi(&config, &mut rng)?;
        rng.set_stream(2);
        let twd = init_twd(&config, &mut rng)?;
        Ok(Self { config, twi, twd })
    }

    /// Set the feature standardization of both branches to the per-entry
    /// mean and inverse standard deviation of the summaries of `images`.
    pub fn calibrate(&mut self, images: &[Tensor]) -> Result<(), TensorError> {
        if images.is_empty() {
            return Ok(());
        }
        for variant in [Variant::Integration, Variant::Disintegration] {
            let mut sum: Vec<f64> = Vec::new();
            let mut sq: Vec<f64> = Vec::new();
            for image in images {
                let s = self.summary(image, variant)?;
                if sum.is_empty() {
                    sum = vec![0.0; s.len()];
                    sq = vec![0.0; s.len()];
                }
                for ((a, b), v) in sum.iter_mut().zip(sq.iter_mut()).zip(s.data()) {
                    *a += v;
                    *b += v * v;
                }
            }
            let n = images.len() as f64;
            let mean: Vec<f64> = sum.iter().map(|a| a / n).collect();
            let scale: Vec<f64> = sq
                .iter()
                .zip(&mean)
                .map(|(b, m)| {
                    let var = (b / n - m * m).max(0.0);
                    if var > 1e-12 {
                        1.0 / var.sqrt()
                    } else {
                        1.0
                    }
                })
                .collect();
            let (store, prefix) = match variant {
                Variant::Integration => (&mut self.twi, "twi"),
                Variant::Disintegration => (&mut self.twd, "twd"),
            };
            for (name, values) in [("mean", mean), ("scale", scale)] {
                let id = store
                    .find(&format!("{prefix}.proj.{name}"))
                    .ok_or_else(|| {
                        TensorError::Contract(format!("missing parameter `{prefix}.proj.{name}`"))
                    })?;
                let n = values.len();
                store.get_mut(id).tensor = Tensor::new(&[n, 1], values)?;
            }
        }
        Ok(())
    }

    fn summary(&self, image: &Tensor, variant: Variant) -> Result<Tensor, TensorError> {
        let mut g = Graph::new();
        let x = g.constant(image.clone());
        let out = match variant {
            Variant::Integration => twi_forward(&mut g, &self.twi, &self.config, x)?,
            Variant::Disintegration => twd_forward(&mut g, &self.twd, &self.config, x)?,
        };
        Ok(g.value(out.summary).clone())
    }

    /// Mark every parameter non-trainable.
    pub fn freeze(&mut self) {
        self.twi.set_trainable(false);
        self.twd.set_trainable(false);
    }

    /// Distillation features `(f_I, f_D)` of one image.
    pub fn features(&self, image: &Tensor) -> Result<(Tensor, Tensor), TensorError> {
        let (_, fi) = self.branch(image, Variant::Integration)?;
        let (_, fd) = self.branch(image, Variant::Disintegration)?;
        Ok((fi, fd))
    }

    /// Attention maps and feature of one branch, as plain tensors.
    pub fn branch(
        &self,
        image: &Tensor,
        variant: Variant,
    ) -> Result<(Vec<Tensor>, Tensor), TensorError> {
        let mut g = Graph::new();
        let x = g.constant(image.clone());
        let out = match variant {
            Variant::Integration => twi_forward(&mut g, &self.twi, &self.config, x)?,
            Variant::Disintegration => twd_forward(&mut g, &self.twd, &self.config, x)?,
        };
        let maps = out.attn_maps.iter().map(|&v| g.value(v).clone()).collect();
        Ok((maps, g.value(out.feature).clone()))
    }
}

/// Optimizer settings for the two branches, trained separately.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TeacherTrainConfig {
    pub twi: OptimConfig,
    pub twd: OptimConfig,
}

impl Default for TeacherTrainConfig {
    fn default() -> Self {
        Self {
            twi: OptimConfig::step_lr(1e-4, 100),
            twd: OptimConfig::step_lr(5e-4, 250),
        }
    }
}

/// Mean per-image loss after every epoch of each branch.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TeacherHistory {
    pub twi: Vec<f64>,
    pub twd: Vec<f64>,
}

/// HVA maps of one image resized to every layer's resolution.
fn layer_targets(
    id: &str,
    image: &Tensor,
    hva: &HvaSet,
    config: &TeacherConfig,
    variant: Variant,
) -> Result<Vec<Tensor>, TeacherError> {
    if hva.n_windows() != config.n_subblocks {
        return Err(TeacherError::WindowMismatch {
            image: id.to_string(),
            expected: config.n_subblocks,
            found: hva.n_windows(),
        });
    }
    config.check_input(image.shape())?;
    let dims = config.layer_dims(image.shape()[1], image.shape()[2]);
    hva.maps(variant)
        .iter()
        .zip(dims)
        .map(|(m, (h, w))| Ok(Tensor::new(&[h, w], resize_map(m, h, w).grid)?))
        .collect()
}

/// Train TW-I on the integration maps and TW-D on the disintegration maps,
/// then calibrate the feature standardization on the same images.
///
/// `images` pairs image ids with `(C,H,W)` tensors; every id needs an entry
/// in `hva` whose window count equals `config.n_subblocks`.
pub fn train_teacher(
    config: TeacherConfig,
    train: &TeacherTrainConfig,
    images: &[(String, Tensor)],
    hva: &BTreeMap<String, HvaSet>,
    seed: u64,
) -> Result<(Teacher, TeacherHistory), TeacherError> {
    train.twi.validate("twi")?;
    train.twd.validate("twd")?;
    let mut teacher = Teacher::init(config, seed)?;
    let mut targets_i = Vec::with_capacity(images.len());
    let mut targets_d = Vec::with_capacity(images.len());
    for (id, image) in images {
        let set = hva
            .get(id)
            .ok_or_else(|| TeacherError::MissingHva(id.clone()))?;
        targets_i.push(layer_targets(
            id,
            image,
            set,
            &config,
            Variant::Integration,
        )?);
        targets_d.push(layer_targets(
            id,
            image,
            set,
            &config,
            Variant::Disintegration,
        )?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(3);
    let twi = fit(
        &mut teacher.twi,
        &train.twi,
        images.len(),
        &mut rng,
        |g, store, i| {
            let x = g.constant(images[i].1.clone());
            let out = twi_forward(g, store, &config, x)?;
            tval_loss(g, &out.attn_maps, &targets_i[i])
        },
    )?;
    rng.set_stream(4);
    let twd = fit(
        &mut teacher.twd,
        &train.twd,
        images.len(),
        &mut rng,
        |g, store, i| {
            let x = g.constant(images[i].1.clone());
            let out = twd_forward(g, store, &config, x)?;
            tval_loss(g, &out.attn_maps, &targets_d[i])
        },
    )?;
    let plain: Vec<Tensor> = images.iter().map(|(_, x)| x.clone()).collect();
    teacher.calibrate(&plain)?;
    Ok((teacher, TeacherHistory { twi, twd }))
}
