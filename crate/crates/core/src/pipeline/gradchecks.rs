use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distill::{
    bd_loss, fuse_teacher_features, init_student, ldam_loss, margins_from_counts, student_forward,
    student_loss, FusionParams, StudentConfig,
};
use crate::teacher::{init_twd, init_twi, tval_loss, twd_forward, twi_forward, TeacherConfig};
use crate::tensor::{grad_check, Graph, ParamStore, Tensor, TensorError};

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
const EPS: f64 = 1e-4;
const SIDE: usize = 32;

/// Result of one registered gradient check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckEntry {
    pub loss: String,
    pub max_rel_error: f64,
    pub coordinates: usize,
    pub skipped: usize,
}

impl GradCheckEntry {
    pub fn passed(&self) -> bool {
        self.max_rel_error < GRADCHECK_TOLERANCE && self.skipped < self.coordinates
    }
}

fn random(shape: &[usize], rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(lo..hi)).collect()).expect("shape matches")
}

fn teacher_config() -> TeacherConfig {
    TeacherConfig {
        n_subblocks: 2,
        base_channels: 2,
        in_channels: 1,
        distill_dim: 4,
        map_grid: 2,
    }
}

fn student_config() -> StudentConfig {
    StudentConfig {
        stages: 2,
        base_channels: 2,
        in_channels: 1,
        n_classes: 3,
        distill_dim: 4,
    }
}

fn entry(
    name: &str,
    f: impl Fn(&mut Graph, &ParamStore) -> Result<crate::tensor::Var, TensorError>,
    store: &mut ParamStore,
) -> Result<GradCheckEntry, TensorError> {
    let r = grad_check(f, store, EPS)?;
    Ok(GradCheckEntry {
        loss: name.to_string(),
        max_rel_error: r.max_rel_error,
        coordinates: r.coordinates,
        skipped: r.skipped,
    })
}

/// Finite-difference checks of every training loss through its full
/// forward graph on a `1x32x32` input.
pub fn run_gradchecks(seed: u64) -> Result<Vec<GradCheckEntry>, TensorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let image = random(&[1, SIDE, SIDE], &mut rng, 0.0, 1.0);
    let tcfg = teacher_config();
    let targets: Vec<Tensor> = tcfg
        .layer_dims(SIDE, SIDE)
        .into_iter()
        .map(|(h, w)| random(&[h, w], &mut rng, 0.0, 1.0))
        .collect();
    let mut out = Vec::new();

    let mut twi = init_twi(&tcfg, &mut rng)?;
    out.push(entry(
        "L_I-tVAL",
        |g, s| {
            let x = g.constant(image.clone());
            let o = twi_forward(g, s, &tcfg, x)?;
            tval_loss(g, &o.attn_maps, &targets)
        },
        &mut twi,
    )?);
    let mut twd = init_twd(&tcfg, &mut rng)?;
    out.push(entry(
        "L_D-tVAL",
        |g, s| {
            let x = g.constant(image.clone());
            let o = twd_forward(g, s, &tcfg, x)?;
            tval_loss(g, &o.attn_maps, &targets)
        },
        &mut twd,
    )?);

    let scfg = student_config();
    let j = fuse_teacher_features(
        &random(&[scfg.distill_dim], &mut rng, -1.0, 1.0),
        &random(&[scfg.distill_dim], &mut rng, -1.0, 1.0),
    )?;
    let margins = margins_from_counts(&[40, 12, 3], 0.5)?.margins;
    let label = 2;
    let mut student = init_student(&scfg, &mut rng)?;
    out.push(entry(
        "L_BD",
        |g, s| {
            let x = g.constant(image.clone());
            let (_, f_s) = student_forward(g, s, &scfg, x)?;
            bd_loss(g, f_s, &j, 1e-12)
        },
        &mut student,
    )?);
    out.push(entry(
        "L_LDAM",
        |g, s| {
            let x = g.constant(image.clone());
            let (z, _) = student_forward(g, s, &scfg, x)?;
            ldam_loss(g, z, label, &margins)
        },
        &mut student,
    )?);
    let fusion = FusionParams::default();
    out.push(entry(
        "L_s",
        |g, s| {
            let x = g.constant(image.clone());
            let (z, f_s) = student_forward(g, s, &scfg, x)?;
            student_loss(g, z, label, f_s, &j, &margins, &fusion)
        },
        &mut student,
    )?);
    Ok(out)
}
