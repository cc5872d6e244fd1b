//! Finite-difference verification of every training loss.

use gazelt::pipeline::run_gradchecks;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for seed in 0..3 {
        for e in run_gradchecks(seed)? {
            println!(
                "seed {seed} {:<9} max rel error {:.2e} over {} coordinates {}",
                e.loss,
                e.max_rel_error,
                e.coordinates,
                if e.passed() { "ok" } else { "FAILED" }
            );
        }
    }
    Ok(())
}
