use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distill::{StudentConfig, StudentTrainConfig};
use crate::gaze::SynthConfig;
use crate::hva::IntegrationParams;
use crate::teacher::{TeacherConfig, TeacherTrainConfig};
use crate::tensor::OptimConfig;

use super::PipelineError;

/// Everything one pipeline run needs. Missing JSON fields take defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub n_windows: usize,
    pub hva: IntegrationParams,
    /// Multiplies the pixel-valued HVA parameters; use `image / native`
    /// size when images are downsampled from the resolution gaze was
    /// recorded at.
    pub hva_scale: f64,
    pub teacher: TeacherConfig,
    pub student: StudentConfig,
    pub teacher_train: TeacherTrainConfig,
    pub student_train: StudentTrainConfig,
    pub synth: SynthConfig,
    /// Seeds per arm of the distillation ablation.
    pub ablation_seeds: usize,
    /// Window counts compared by the sensitivity sweep.
    pub sweep_windows: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_windows: 4,
            hva: IntegrationParams::default(),
            hva_scale: 1.0,
            teacher: TeacherConfig::default(),
            student: StudentConfig::default(),
            teacher_train: TeacherTrainConfig::default(),
            student_train: StudentTrainConfig::default(),
            synth: SynthConfig::default(),
            ablation_seeds: 5,
            sweep_windows: vec![2, 4, 8],
        }
    }
}

impl RunConfig {
    /// Small-model settings sized for the synthetic set on one CPU core.
    pub fn desk() -> Self {
        let synth = SynthConfig::default();
        let desk_optim = |lr, epochs| OptimConfig {
            batch_size: 32,
            ..OptimConfig::step_lr(lr, epochs)
        };
        Self {
            hva_scale: synth.resolution_scale(),
            teacher: TeacherConfig {
                base_channels: 8,
                distill_dim: 32,
                ..TeacherConfig::default()
            },
            student: StudentConfig {
                base_channels: 4,
                distill_dim: 32,
                n_classes: synth.n_classes(),
                ..StudentConfig::default()
            },
            teacher_train: TeacherTrainConfig {
                twi: desk_optim(3e-3, 8),
                twd: desk_optim(3e-3, 8),
            },
            student_train: StudentTrainConfig {
                optim: OptimConfig {
                    batch_size: 32,
                    ..OptimConfig::constant(1e-3, 20)
                },
                ..StudentTrainConfig::default()
            },
            synth,
            ..Self::default()
        }
    }

    pub fn hva_params(&self) -> IntegrationParams {
        self.hva.scaled(self.hva_scale)
    }

    /// Teacher settings with one sub-block per time window.
    pub fn teacher_config(&self) -> TeacherConfig {
        TeacherConfig {
            n_subblocks: self.n_windows,
            ..self.teacher
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.n_windows == 0 {
            return bad("n_windows must be positive".into());
        }
        if !(self.hva_scale > 0.0 && self.hva_scale.is_finite()) {
            return bad(format!(
                "hva_scale must be positive, got {}",
                self.hva_scale
            ));
        }
        self.hva_params().validate()?;
        self.teacher_config().validate()?;
        self.student.validate()?;
        self.teacher_train.twi.validate("teacher_train.twi")?;
        self.teacher_train.twd.validate("teacher_train.twd")?;
        self.student_train.optim.validate("student_train.optim")?;
        self.student_train.fusion.validate()?;
        for (name, o) in [
            ("teacher_train.twi", &self.teacher_train.twi),
            ("teacher_train.twd", &self.teacher_train.twd),
            ("student_train.optim", &self.student_train.optim),
        ] {
            if o.epochs == 0 {
                return bad(format!("{name}: epochs must be positive"));
            }
        }
        if !(self.student_train.max_margin > 0.0) {
            return bad("student_train.max_margin must be positive".into());
        }
        if self.teacher.distill_dim != self.student.distill_dim {
            return bad(format!(
                "teacher distill_dim {} differs from student distill_dim {}",
                self.teacher.distill_dim, self.student.distill_dim
            ));
        }
        if self.ablation_seeds < 2 {
            return bad("ablation_seeds must be at least 2 for a t-test".into());
        }
        if self.sweep_windows.contains(&0) {
            return bad("sweep window counts must be positive".into());
        }
        Ok(())
    }

    pub fn from_json<R: Read>(source: R) -> Result<Self, PipelineError> {
        let cfg: Self =
            serde_json::from_reader(source).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let file = std::fs::File::open(path).map_err(|e| PipelineError::io(path, e))?;
        Self::from_json(std::io::BufReader::new(file))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// FNV-1a of the compact JSON form.
    pub fn hash(&self) -> u64 {
        fnv1a64(
            serde_json::to_string(self)
                .expect("config serializes")
                .as_bytes(),
        )
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}
