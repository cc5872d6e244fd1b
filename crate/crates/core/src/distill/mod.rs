//! Student classifier distilled from the frozen gaze teacher.

mod loss;
mod student;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::teacher::Teacher;
use crate::tensor::{fit, Graph, OptimConfig, ParamStore, Tensor, TensorError};

pub use loss::{
    bd_loss, fuse_teacher_features, ldam_loss, margins_from_counts, student_loss, FusionParams,
    LdamParams,
};
pub use student::{init_student, student_forward, StudentConfig};

#[derive(Debug, thiserror::Error)]
pub enum DistillError {
    #[error("teacher distill dim {teacher} differs from student distill dim {student}")]
    DimMismatch { teacher: usize, student: usize },
    #[error("teacher parameter `{0}` is trainable; freeze the teacher before distillation")]
    TeacherNotFrozen(String),
    #[error("label {label} of sample {index} is out of range for {n_classes} classes")]
    Label {
        index: usize,
        label: usize,
        n_classes: usize,
    },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Student {
    pub config: StudentConfig,
    pub params: ParamStore,
}

impl Student {
    pub fn init(config: StudentConfig, seed: u64) -> Result<Self, TensorError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(5);
        Ok(Self {
            config,
            params: init_student(&config, &mut rng)?,
        })
    }

    /// Logits and distillation features of one image.
    pub fn forward(&self, image: &Tensor) -> Result<(Tensor, Tensor), TensorError> {
        let mut g = Graph::new();
        let x = g.constant(image.clone());
        let (z, f) = student_forward(&mut g, &self.params, &self.config, x)?;
        Ok((g.value(z).clone(), g.value(f).clone()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudentTrainConfig {
    pub optim: OptimConfig,
    pub fusion: FusionParams,
    pub max_margin: f64,
}

impl Default for StudentTrainConfig {
    fn default() -> Self {
        Self {
            optim: OptimConfig::constant(1e-4, 100),
            fusion: FusionParams::default(),
            max_margin: 0.5,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StudentHistory {
    /// Mean `L_s` per epoch.
    pub loss: Vec<f64>,
    pub margins: Vec<f64>,
}

/// Fused targets `J` of every image under a frozen teacher.
pub fn teacher_targets(teacher: &Teacher, images: &[&Tensor]) -> Result<Vec<Tensor>, DistillError> {
    if let Some((_, p)) = teacher
        .twi
        .iter()
        .chain(teacher.twd.iter())
        .find(|(_, p)| p.trainable)
    {
        return Err(DistillError::TeacherNotFrozen(p.name.clone()));
    }
    images
        .iter()
        .map(|image| {
            let (fi, fd) = teacher.features(image)?;
            Ok(fuse_teacher_features(&fi, &fd)?)
        })
        .collect()
}

/// Train a student on `(image, label)` pairs against a frozen teacher.
///
/// LDAM margins come from the label counts of `samples`. Teacher targets are
/// computed once up front and only when `lambda > 0`.
pub fn train_student(
    config: StudentConfig,
    train: &StudentTrainConfig,
    teacher: &Teacher,
    samples: &[(Tensor, usize)],
    seed: u64,
) -> Result<(Student, StudentHistory), DistillError> {
    if teacher.config.distill_dim != config.distill_dim {
        return Err(DistillError::DimMismatch {
            teacher: teacher.config.distill_dim,
            student: config.distill_dim,
        });
    }
    let targets = if train.fusion.lambda > 0.0 && train.optim.epochs > 0 {
        Some(teacher_targets(
            teacher,
            &samples.iter().map(|(x, _)| x).collect::<Vec<_>>(),
        )?)
    } else {
        None
    };
    train_student_with_targets(config, train, targets.as_deref(), samples, seed)
}

/// [`train_student`] with precomputed teacher targets, one per sample.
///
/// `targets` may be `None` only when `lambda == 0`.
pub fn train_student_with_targets(
    config: StudentConfig,
    train: &StudentTrainConfig,
    targets: Option<&[Tensor]>,
    samples: &[(Tensor, usize)],
    seed: u64,
) -> Result<(Student, StudentHistory), DistillError> {
    config.validate()?;
    train.optim.validate("student")?;
    train.fusion.validate()?;
    let mut counts = vec![0usize; config.n_classes];
    for (index, &(_, label)) in samples.iter().enumerate() {
        if label >= config.n_classes {
            return Err(DistillError::Label {
                index,
                label,
                n_classes: config.n_classes,
            });
        }
        counts[label] += 1;
    }
    let mut student = Student::init(config, seed)?;
    if train.optim.epochs == 0 {
        return Ok((student, StudentHistory::default()));
    }
    let ldam = margins_from_counts(&counts, train.max_margin)?;
    let uniform = Tensor::full(&[config.distill_dim], 1.0 / config.distill_dim as f64);
    let targets: Vec<&Tensor> = match targets {
        Some(t) if t.len() == samples.len() => {
            if let Some(bad) = t.iter().find(|j| j.shape() != [config.distill_dim]) {
                return Err(DistillError::DimMismatch {
                    teacher: bad.len(),
                    student: config.distill_dim,
                });
            }
            t.iter().collect()
        }
        Some(t) => {
            return Err(TensorError::Contract(format!(
                "{} targets for {} samples",
                t.len(),
                samples.len()
            ))
            .into())
        }
        None if train.fusion.lambda == 0.0 => vec![&uniform; samples.len()],
        None => {
            return Err(TensorError::Contract("lambda > 0 needs teacher targets".into()).into())
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(6);
    let loss = fit(
        &mut student.params,
        &train.optim,
        samples.len(),
        &mut rng,
        |g, store, i| {
            let (image, label) = &samples[i];
            let x = g.constant(image.clone());
            let (z, f_s) = student_forward(g, store, &config, x)?;
            student_loss(g, z, *label, f_s, targets[i], &ldam.margins, &train.fusion)
        },
    )?;
    Ok((
        student,
        StudentHistory {
            loss,
            margins: ldam.margins,
        },
    ))
}
