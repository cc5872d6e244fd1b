pub mod distill;
pub mod eval;
pub mod gaze;
pub mod hva;
pub mod pipeline;
pub mod teacher;
pub mod tensor;
