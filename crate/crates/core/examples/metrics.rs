//! Long-tail evaluation metrics on a hand-made confusion matrix.

use gazelt::eval::{
    average_accuracy, balanced_accuracy, group_average, mcc_multiclass, per_class_accuracy,
    weighted_f1, welch_t_test, ConfusionMatrix,
};
use gazelt::gaze::{group_classes, Group};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cm = ConfusionMatrix::from_rows(&[
        vec![45, 3, 2, 0],
        vec![6, 38, 4, 2],
        vec![9, 6, 30, 5],
        vec![14, 8, 6, 22],
    ])?;
    let grouping = group_classes(&[6941, 868, 420, 59]);
    let per_class = per_class_accuracy(&cm);
    let groups = group_average(&per_class, &grouping)?;

    println!("per-class accuracy {per_class:?}");
    println!("average accuracy   {:?}", average_accuracy(&per_class));
    for g in Group::ALL {
        println!("  {:<6} {:?}", g.as_str(), groups.get(g));
    }
    println!("balanced accuracy  {:.4}", balanced_accuracy(&cm)?);
    println!("MCC                {:.4}", mcc_multiclass(&cm));
    println!("weighted F1        {:.4}", weighted_f1(&cm));

    let w = welch_t_test(
        &[0.52, 0.61, 0.58, 0.66, 0.55],
        &[0.41, 0.47, 0.50, 0.39, 0.52],
    )?;
    println!("welch: t = {:.3}, df = {:.2}, p = {:.4}", w.t, w.df, w.p);
    Ok(())
}
