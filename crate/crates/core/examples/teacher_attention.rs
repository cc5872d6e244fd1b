//! Train both teacher branches on a small synthetic set and compare the
//! learned attention with the reader's maps.

use gazelt::gaze::{synth_dataset, Split, SynthConfig};
use gazelt::hva::Variant;
use gazelt::pipeline::{run_teacher, Dataset, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::desk();
    cfg.synth = SynthConfig {
        n_train: 300,
        n_balanced_test_per_class: 2,
        n_test: 16,
        ..cfg.synth
    };
    cfg.teacher_train.twi.epochs = 4;
    cfg.teacher_train.twd.epochs = 4;

    let data = Dataset::from_synth(&synth_dataset(&cfg.synth)?)?;
    let hva = data.build_hva(cfg.n_windows, &cfg.hva_params())?;
    let (teacher, history) = run_teacher(&cfg, &data, &hva)?;
    println!("TW-I tVAL per epoch {:.3?}", history.twi);
    println!("TW-D tVAL per epoch {:.3?}", history.twd);

    let (id, image, label) = data
        .samples(Split::Train)
        .into_iter()
        .find(|(id, _, _)| hva.contains_key(id))
        .expect("a gazed training image");
    let (maps, f_i) = teacher.branch(&image, Variant::Integration)?;
    println!("\n{id} (label {label}): f_I = {:.2?}", &f_i.data()[..6]);
    for (t, m) in maps.iter().enumerate() {
        let (h, w) = (m.shape()[0], m.shape()[1]);
        let peak = m
            .data()
            .iter()
            .enumerate()
            .fold(0, |b, (i, &v)| if v > m.data()[b] { i } else { b });
        println!(
            "  sub-block {t}: {h}x{w}, attention peak at ({}, {})",
            peak / w,
            peak % w
        );
    }
    Ok(())
}
