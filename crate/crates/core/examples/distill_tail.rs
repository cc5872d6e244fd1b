//! Train students with and without gaze distillation from one frozen
//! teacher and compare accuracy per class group.

use gazelt::gaze::{synth_dataset, Group, Split, SynthConfig};
use gazelt::pipeline::{
    evaluate_student, run_student, run_teacher, training_targets, Dataset, RunConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::desk();
    cfg.synth = SynthConfig {
        n_train: 600,
        ..cfg.synth
    };
    cfg.teacher_train.twi.epochs = 4;
    cfg.teacher_train.twd.epochs = 4;
    cfg.student_train.optim.epochs = 8;

    let data = Dataset::from_synth(&synth_dataset(&cfg.synth)?)?;
    let hva = data.build_hva(cfg.n_windows, &cfg.hva_params())?;
    let (teacher, _) = run_teacher(&cfg, &data, &hva)?;
    let targets = training_targets(&data, &teacher)?;

    for lambda in [0.0, 1.0] {
        let (student, history) = run_student(&cfg, &data, Some(&targets), lambda, cfg.seed)?;
        let r = evaluate_student(&student, &data, Split::BalancedTest, cfg.seed)?;
        println!(
            "lambda = {lambda}: final L_s {:.3}",
            history.loss.last().copied().unwrap_or(f64::NAN)
        );
        println!("  average accuracy {:.3}", r.avg_acc.unwrap_or(f64::NAN));
        for g in Group::ALL {
            println!(
                "  {:<6} {:.3}",
                g.as_str(),
                r.groups.get(g).unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
