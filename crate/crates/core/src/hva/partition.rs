use crate::gaze::{FixationPoint, GazeSequence};

use super::HvaError;

/// Equal-width time windows over one viewing session.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeWindowPartition {
    /// `n + 1` monotone window edges from 0 to the total duration.
    pub boundaries: Vec<f64>,
    pub window_points: Vec<Vec<FixationPoint>>,
}

impl TimeWindowPartition {
    pub fn n_windows(&self) -> usize {
        self.window_points.len()
    }
}

/// Window index for an onset: `floor(onset * n / total)`, capped at `n - 1`.
pub fn window_of(onset_ms: f64, total_ms: f64, n: usize) -> usize {
    let w = (onset_ms * n as f64 / total_ms).floor();
    if w <= 0.0 {
        0
    } else {
        (w as usize).min(n - 1)
    }
}

/// Split a sequence into `n` equal windows keyed on fixation onset.
pub fn partition_fixations(seq: &GazeSequence, n: usize) -> Result<TimeWindowPartition, HvaError> {
    if n == 0 {
        return Err(HvaError::Degenerate("window count must be positive".into()));
    }
    let total = seq.total_duration_ms;
    if !(total > 0.0) || !total.is_finite() {
        return Err(HvaError::Degenerate(format!(
            "sequence `{}` has total duration {total} ms",
            seq.image_id
        )));
    }
    let boundaries = (0..=n)
        .map(|i| {
            if i == n {
                total
            } else {
                total * i as f64 / n as f64
            }
        })
        .collect();
    let mut window_points = vec![Vec::new(); n];
    for p in &seq.points {
        window_points[window_of(p.onset_ms, total, n)].push(*p);
    }
    Ok(TimeWindowPartition {
        boundaries,
        window_points,
    })
}
