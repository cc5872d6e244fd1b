use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::distill::{teacher_targets, train_student_with_targets, Student, StudentHistory};
use crate::eval::{report_from_scores, softmax, welch_t_test, MetricsReport, WelchResult};
use crate::gaze::Split;
use crate::hva::HvaSet;
use crate::teacher::{train_teacher, Teacher, TeacherHistory};
use crate::tensor::Tensor;

use super::{Dataset, PipelineError, RunConfig};

/// Train both teacher branches on the gazed training images.
pub fn run_teacher(
    cfg: &RunConfig,
    data: &Dataset,
    hva: &BTreeMap<String, HvaSet>,
) -> Result<(Teacher, TeacherHistory), PipelineError> {
    let images: Vec<(String, Tensor)> = data
        .samples(Split::Train)
        .into_iter()
        .filter(|(id, _, _)| hva.contains_key(id))
        .map(|(id, x, _)| (id, x))
        .collect();
    if images.is_empty() {
        return Err(PipelineError::Data("no training image has gaze".into()));
    }
    let (mut teacher, history) = train_teacher(
        cfg.teacher_config(),
        &cfg.teacher_train,
        &images,
        hva,
        cfg.seed,
    )?;
    teacher.freeze();
    Ok((teacher, history))
}

/// Fused teacher targets of every training sample, in manifest order.
pub fn training_targets(data: &Dataset, teacher: &Teacher) -> Result<Vec<Tensor>, PipelineError> {
    let samples = data.samples(Split::Train);
    Ok(teacher_targets(
        teacher,
        &samples.iter().map(|(_, x, _)| x).collect::<Vec<_>>(),
    )?)
}

/// Train a student with `lambda` and the given targets (ignored when
/// `lambda == 0`).
pub fn run_student(
    cfg: &RunConfig,
    data: &Dataset,
    targets: Option<&[Tensor]>,
    lambda: f64,
    seed: u64,
) -> Result<(Student, StudentHistory), PipelineError> {
    let mut train = cfg.student_train;
    train.fusion.lambda = lambda;
    let samples: Vec<(Tensor, usize)> = data
        .samples(Split::Train)
        .into_iter()
        .map(|(_, x, y)| (x, y))
        .collect();
    let targets = if lambda == 0.0 { None } else { targets };
    Ok(train_student_with_targets(
        cfg.student,
        &train,
        targets,
        &samples,
        seed,
    )?)
}

/// Softmax class scores of every sample.
pub fn student_scores(
    student: &Student,
    images: &[&Tensor],
) -> Result<Vec<Vec<f64>>, PipelineError> {
    images
        .iter()
        .map(|x| Ok(softmax(student.forward(x)?.0.data())))
        .collect()
}

pub fn evaluate_student(
    student: &Student,
    data: &Dataset,
    split: Split,
    seed: u64,
) -> Result<MetricsReport, PipelineError> {
    let samples = data.samples(split);
    if samples.is_empty() {
        return Err(PipelineError::Data(format!(
            "split `{}` is empty",
            split.as_str()
        )));
    }
    let scores = student_scores(
        student,
        &samples.iter().map(|(_, x, _)| x).collect::<Vec<_>>(),
    )?;
    let labels: Vec<usize> = samples.iter().map(|(_, _, y)| *y).collect();
    Ok(report_from_scores(
        &scores,
        &labels,
        &data.manifest.grouping(),
        split.as_str(),
        seed,
    )?)
}

/// One full pipeline run per window count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_windows: usize,
    pub balanced: MetricsReport,
    pub test: MetricsReport,
}

/// Rebuild HVA, teacher and student for every window count of the config.
pub fn sweep_windows(cfg: &RunConfig, data: &Dataset) -> Result<Vec<SweepRow>, PipelineError> {
    cfg.sweep_windows
        .iter()
        .map(|&n| {
            let run = RunConfig {
                n_windows: n,
                ..cfg.clone()
            };
            run.validate()?;
            log::info!("sweep: {n} windows");
            let hva = data.build_hva(n, &run.hva_params())?;
            let (teacher, _) = run_teacher(&run, data, &hva)?;
            let targets = training_targets(data, &teacher)?;
            let (student, _) = run_student(
                &run,
                data,
                Some(&targets),
                run.student_train.fusion.lambda,
                run.seed,
            )?;
            Ok(SweepRow {
                n_windows: n,
                balanced: evaluate_student(&student, data, Split::BalancedTest, run.seed)?,
                test: evaluate_student(&student, data, Split::Test, run.seed)?,
            })
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.3}"))
}

/// Markdown table: accuracy by group on the balanced split, then
/// imbalanced-split metrics.
pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut s = String::from("| windows | avg | head | medium | tail | bAcc | MCC | AUC | wF1 |\n");
    s.push_str("|---|---|---|---|---|---|---|---|---|\n");
    for r in rows {
        let (b, t) = (&r.balanced, &r.test);
        let _ = writeln!(
            s,
            "| {} windows | {} | {} | {} | {} | {} | {:.3} | {} | {:.3} |",
            r.n_windows,
            cell(b.avg_acc),
            cell(b.groups.head),
            cell(b.groups.medium),
            cell(b.groups.tail),
            cell(t.balanced_acc),
            t.mcc,
            cell(t.auc_macro_ovr),
            t.weighted_f1
        );
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationArm {
    pub seed: u64,
    pub baseline: MetricsReport,
    pub distilled: MetricsReport,
}

/// Distillation ablation: `lambda = 0` against the configured lambda.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub lambda: f64,
    pub arms: Vec<AblationArm>,
    pub tail_baseline: Vec<f64>,
    pub tail_distilled: Vec<f64>,
    /// Seeds where the distilled tail accuracy is strictly higher.
    pub wins: usize,
    /// Distilled minus baseline; absent when both samples are constant.
    pub welch: Option<WelchResult>,
}

impl AblationReport {
    pub fn summary(&self) -> String {
        let mut s = String::from("| seed | tail (lambda=0) | tail (distilled) |\n|---|---|---|\n");
        for (arm, (b, d)) in self
            .arms
            .iter()
            .zip(self.tail_baseline.iter().zip(&self.tail_distilled))
        {
            let _ = writeln!(s, "| {} | {b:.3} | {d:.3} |", arm.seed);
        }
        let _ = writeln!(s, "\nwins: {}/{}", self.wins, self.arms.len());
        match &self.welch {
            Some(w) => {
                let _ = writeln!(s, "welch: t = {:.4}, df = {:.2}, p = {:.4}", w.t, w.df, w.p);
            }
            None => s.push_str("welch: undefined (zero variance in both arms)\n"),
        }
        s
    }
}

/// Train `cfg.ablation_seeds` student pairs on cached teacher targets and
/// compare tail-group accuracy on the balanced split.
pub fn ablate_kd(
    cfg: &RunConfig,
    data: &Dataset,
    teacher: &Teacher,
) -> Result<AblationReport, PipelineError> {
    let lambda = cfg.student_train.fusion.lambda;
    if lambda == 0.0 {
        return Err(PipelineError::Config(
            "ablation needs a positive lambda".into(),
        ));
    }
    let targets = training_targets(data, teacher)?;
    let tail = |r: &MetricsReport| {
        r.groups
            .tail
            .ok_or_else(|| PipelineError::Data("balanced split has no tail-class samples".into()))
    };
    let mut arms = Vec::new();
    let (mut tail_baseline, mut tail_distilled) = (Vec::new(), Vec::new());
    for k in 0..cfg.ablation_seeds as u64 {
        let seed = cfg.seed + k;
        let (s0, _) = run_student(cfg, data, None, 0.0, seed)?;
        let baseline = evaluate_student(&s0, data, Split::BalancedTest, seed)?;
        let (s1, _) = run_student(cfg, data, Some(&targets), lambda, seed)?;
        let distilled = evaluate_student(&s1, data, Split::BalancedTest, seed)?;
        tail_baseline.push(tail(&baseline)?);
        tail_distilled.push(tail(&distilled)?);
        log::info!(
            "ablation seed {seed}: tail {:.3} -> {:.3}",
            tail_baseline.last().unwrap(),
            tail_distilled.last().unwrap()
        );
        arms.push(AblationArm {
            seed,
            baseline,
            distilled,
        });
    }
    let wins = tail_distilled
        .iter()
        .zip(&tail_baseline)
        .filter(|(d, b)| d > b)
        .count();
    let welch = welch_t_test(&tail_distilled, &tail_baseline).ok();
    Ok(AblationReport {
        lambda,
        arms,
        tail_baseline,
        tail_distilled,
        wins,
        welch,
    })
}
