//! Render integration and disintegration maps per time window as ASCII.

use gazelt::gaze::{synth_dataset, SynthConfig};
use gazelt::hva::{generate_hva, resize_map, AttentionMap, IntegrationParams};

fn ascii(map: &AttentionMap) -> String {
    const RAMP: &[u8] = b" .:-=+*#%@";
    let small = resize_map(map, 16, 32);
    small
        .grid
        .chunks(small.width)
        .map(|row| {
            row.iter()
                .map(|&v| RAMP[((v * 9.0).round() as usize).min(9)] as char)
                .collect::<String>()
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SynthConfig::default();
    let ds = synth_dataset(&cfg)?;
    let params = IntegrationParams::default().scaled(cfg.resolution_scale());
    let seq = &ds.gaze[0];
    let set = generate_hva(seq, 4, &params, cfg.image_size, cfg.image_size)?;
    for (i, (a, b)) in set.integration.iter().zip(&set.disintegration).enumerate() {
        println!("window {i}: integration");
        println!("{}", ascii(a));
        println!("window {i}: disintegration");
        println!("{}\n", ascii(b));
    }
    Ok(())
}
