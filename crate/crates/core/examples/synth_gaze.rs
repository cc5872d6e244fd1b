//! Generate the synthetic long-tailed set and inspect one gaze recording.

use gazelt::gaze::{synth_dataset, Group, Split, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SynthConfig::default();
    let ds = synth_dataset(&cfg)?;
    let counts = ds.manifest.class_counts();
    let groups = ds.manifest.grouping();

    println!("{} images, {} with gaze", ds.images.len(), ds.gaze.len());
    for (k, name) in ds.manifest.class_names.iter().enumerate() {
        println!(
            "  {name:<12} {:>5} train  {}",
            counts[k],
            groups.group(k).as_str()
        );
    }
    for g in Group::ALL {
        println!("{:<6} classes {:?}", g.as_str(), groups.members(g));
    }
    for split in [Split::Train, Split::BalancedTest, Split::Test] {
        println!(
            "{:<13} {}",
            split.as_str(),
            ds.manifest.split(split).count()
        );
    }

    let seq = &ds.gaze[0];
    let label = ds.manifest.record(&seq.image_id).map(|r| r.label);
    println!(
        "\nreader gaze on {} (label {label:?}), {:.0} ms:",
        seq.image_id, seq.total_duration_ms
    );
    for p in &seq.points {
        println!(
            "  t={:>6.0} ms  ({:>5.1}, {:>5.1})  {:>4.0} ms",
            p.onset_ms, p.x_px, p.y_px, p.duration_ms
        );
    }
    Ok(())
}
