//! Save and reload a student checkpoint; show what the loader rejects.

use gazelt::distill::{Student, StudentConfig};
use gazelt::pipeline::Checkpoint;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = StudentConfig::default();
    let student = Student::init(cfg, 42)?;
    let bytes = Checkpoint::from_student(&student, 42).to_bytes()?;
    println!("{} tensors, {} bytes", student.params.len(), bytes.len());

    let back = Checkpoint::from_bytes(&bytes)?.into_student(cfg)?;
    let again = Checkpoint::from_student(&back, 42).to_bytes()?;
    println!("round trip bit-exact: {}", again == bytes);

    let wider = StudentConfig {
        n_classes: 10,
        ..cfg
    };
    println!(
        "other config: {}",
        Checkpoint::from_bytes(&bytes)?
            .into_student(wider)
            .unwrap_err()
    );

    let mut corrupt = bytes.clone();
    corrupt[100] ^= 1;
    println!(
        "flipped bit: {}",
        Checkpoint::from_bytes(&corrupt).unwrap_err()
    );
    println!(
        "truncated: {}",
        Checkpoint::from_bytes(&bytes[..bytes.len() - 9]).unwrap_err()
    );
    Ok(())
}
