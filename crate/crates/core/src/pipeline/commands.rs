//! One function per command-line subcommand. Each writes its artifacts
//! under `out` and returns a short human-readable summary.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;

use crate::gaze::{synth_dataset, Split};

use super::{
    ablate_kd, evaluate_student, read_hva_dir, run_gradchecks, run_student, run_teacher,
    sweep_table, sweep_windows, training_targets, write_gaze, write_hva_dir, write_synth,
    Checkpoint, Dataset, PipelineError, RunConfig, HVA_DIR,
};

pub const CONFIG_FILE: &str = "config.json";
pub const TEACHER_CHECKPOINT: &str = "teacher.ckpt";
pub const STUDENT_CHECKPOINT: &str = "student.ckpt";

fn create_dir(dir: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let f = File::create(path).map_err(|e| PipelineError::io(path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(f), value)?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    std::fs::write(path, text).map_err(|e| PipelineError::io(path, e))
}

/// Generate the synthetic dataset plus a matching `config.json`.
pub fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<String, PipelineError> {
    create_dir(out)?;
    let ds = synth_dataset(&cfg.synth)?;
    write_synth(&ds, out)?;
    let run = RunConfig {
        hva_scale: cfg.synth.resolution_scale(),
        ..cfg.clone()
    };
    write_text(&out.join(CONFIG_FILE), &run.to_json_string())?;
    Ok(format!(
        "wrote {} images ({} with gaze) to {}; train counts {:?}",
        ds.images.len(),
        ds.gaze.len(),
        out.display(),
        ds.manifest.class_counts()
    ))
}

#[derive(Serialize)]
struct IngestReport {
    n_records: usize,
    split_sizes: std::collections::BTreeMap<&'static str, usize>,
    class_counts: std::collections::BTreeMap<String, usize>,
    groups: crate::gaze::ClassGrouping,
    n_sequences: usize,
    clamped_points: usize,
}

/// Validate images, manifest and fixations; write the clamped fixation log.
pub fn cmd_ingest(data_dir: &Path, out: &Path) -> Result<String, PipelineError> {
    create_dir(out)?;
    let data = Dataset::load(data_dir)?;
    let (gaze, clamped) = data.validated_gaze()?;
    write_gaze(&gaze, &out.join(super::FIXATION_FILE))?;
    let report = IngestReport {
        n_records: data.manifest.records.len(),
        split_sizes: [Split::Train, Split::BalancedTest, Split::Test]
            .into_iter()
            .map(|s| (s.as_str(), data.manifest.split(s).count()))
            .collect(),
        class_counts: data.manifest.named_counts(),
        groups: data.manifest.grouping(),
        n_sequences: gaze.len(),
        clamped_points: clamped,
    };
    write_json(&out.join("ingest_report.json"), &report)?;
    Ok(format!(
        "{} records, {} gaze sequences, {} fixations clamped",
        report.n_records, report.n_sequences, report.clamped_points
    ))
}

pub fn cmd_hva_gen(cfg: &RunConfig, data_dir: &Path, out: &Path) -> Result<String, PipelineError> {
    let data = Dataset::load(data_dir)?;
    let hva = data.build_hva(cfg.n_windows, &cfg.hva_params())?;
    let dir = out.join(HVA_DIR);
    write_hva_dir(&hva, &dir)?;
    Ok(format!(
        "wrote {} x {} windows x 2 variants to {}",
        hva.len(),
        cfg.n_windows,
        dir.display()
    ))
}

/// Train the teacher from stored HVA maps (`hva_dir`) or freshly built ones.
pub fn cmd_train_teacher(
    cfg: &RunConfig,
    data_dir: &Path,
    hva_dir: Option<&Path>,
    out: &Path,
) -> Result<String, PipelineError> {
    create_dir(out)?;
    let data = Dataset::load(data_dir)?;
    let hva = match hva_dir {
        Some(dir) => {
            let (gaze, _) = data.validated_gaze()?;
            read_hva_dir(dir, gaze.iter().map(|s| s.image_id.as_str()))?
        }
        None => data.build_hva(cfg.n_windows, &cfg.hva_params())?,
    };
    let (teacher, history) = run_teacher(cfg, &data, &hva)?;
    Checkpoint::from_teacher(&teacher, cfg.seed).save(&out.join(TEACHER_CHECKPOINT))?;
    write_json(&out.join("teacher_history.json"), &history)?;
    Ok(format!(
        "teacher trained: final tVAL I {:.4}, D {:.4}",
        history.twi.last().copied().unwrap_or(f64::NAN),
        history.twd.last().copied().unwrap_or(f64::NAN)
    ))
}

fn load_teacher(cfg: &RunConfig, path: &Path) -> Result<crate::teacher::Teacher, PipelineError> {
    Checkpoint::load(path)?.into_teacher(cfg.teacher_config())
}

/// Train a student; the teacher checkpoint is required unless lambda is 0.
pub fn cmd_train_student(
    cfg: &RunConfig,
    data_dir: &Path,
    teacher: Option<&Path>,
    out: &Path,
) -> Result<String, PipelineError> {
    create_dir(out)?;
    let data = Dataset::load(data_dir)?;
    let lambda = cfg.student_train.fusion.lambda;
    let targets = match (teacher, lambda > 0.0) {
        (Some(path), true) => Some(training_targets(&data, &load_teacher(cfg, path)?)?),
        (None, true) => {
            return Err(PipelineError::Config(
                "lambda > 0 needs --teacher <checkpoint>".into(),
            ))
        }
        (_, false) => None,
    };
    let (student, history) = run_student(cfg, &data, targets.as_deref(), lambda, cfg.seed)?;
    Checkpoint::from_student(&student, cfg.seed).save(&out.join(STUDENT_CHECKPOINT))?;
    write_json(&out.join("student_history.json"), &history)?;
    Ok(format!(
        "student trained (lambda {lambda}): final loss {:.4}",
        history.loss.last().copied().unwrap_or(f64::NAN)
    ))
}

pub fn cmd_evaluate(
    cfg: &RunConfig,
    data_dir: &Path,
    checkpoint: &Path,
    split: Split,
    out: &Path,
) -> Result<String, PipelineError> {
    if split == Split::Train {
        return Err(PipelineError::Config(
            "evaluate accepts balanced_test or test".into(),
        ));
    }
    create_dir(out)?;
    let data = Dataset::load(data_dir)?;
    let student = Checkpoint::load(checkpoint)?.into_student(cfg.student)?;
    let report = evaluate_student(&student, &data, split, cfg.seed)?;
    let path = out.join(format!("metrics_{}.json", split.as_str()));
    write_json(&path, &report)?;
    Ok(serde_json::to_string_pretty(&report)?)
}

pub fn cmd_sweep_windows(
    cfg: &RunConfig,
    data_dir: &Path,
    out: &Path,
) -> Result<String, PipelineError> {
    create_dir(out)?;
    let data = Dataset::load(data_dir)?;
    let rows = sweep_windows(cfg, &data)?;
    let table = sweep_table(&rows);
    write_json(&out.join("sweep_windows.json"), &rows)?;
    write_text(&out.join("sweep_windows.md"), &table)?;
    Ok(table)
}

/// Distillation ablation; trains and saves a teacher unless one is given.
pub fn cmd_ablate_kd(
    cfg: &RunConfig,
    data_dir: &Path,
    teacher: Option<&Path>,
    out: &Path,
) -> Result<String, PipelineError> {
    create_dir(out)?;
    let data = Dataset::load(data_dir)?;
    let teacher = match teacher {
        Some(path) => load_teacher(cfg, path)?,
        None => {
            let hva = data.build_hva(cfg.n_windows, &cfg.hva_params())?;
            let (t, _) = run_teacher(cfg, &data, &hva)?;
            Checkpoint::from_teacher(&t, cfg.seed).save(&out.join(TEACHER_CHECKPOINT))?;
            t
        }
    };
    let report = ablate_kd(cfg, &data, &teacher)?;
    let summary = report.summary();
    write_json(&out.join("ablation.json"), &report)?;
    write_text(&out.join("ablation.md"), &summary)?;
    Ok(summary)
}

/// Run every registered gradient check; fails when any exceeds tolerance.
pub fn cmd_gradcheck(seed: u64) -> Result<String, PipelineError> {
    let entries = run_gradchecks(seed)?;
    let mut s = String::new();
    for e in &entries {
        let _ = writeln!(
            s,
            "{:<10} max rel error {:.3e} over {} coordinates ({} skipped) {}",
            e.loss,
            e.max_rel_error,
            e.coordinates,
            e.skipped,
            if e.passed() { "ok" } else { "FAILED" }
        );
    }
    if entries.iter().all(|e| e.passed()) {
        Ok(s)
    } else {
        Err(PipelineError::Failed(format!("gradient check failed\n{s}")))
    }
}
