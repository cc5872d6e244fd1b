use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::GazeError;

pub const FIXATION_HEADER: [&str; 5] = ["image_id", "x_px", "y_px", "onset_ms", "duration_ms"];

/// One fixation in image pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixationPoint {
    pub x_px: f64,
    pub y_px: f64,
    pub onset_ms: f64,
    pub duration_ms: f64,
}

impl FixationPoint {
    pub fn new(x_px: f64, y_px: f64, onset_ms: f64, duration_ms: f64) -> Self {
        Self {
            x_px,
            y_px,
            onset_ms,
            duration_ms,
        }
    }

    pub fn end_ms(&self) -> f64 {
        self.onset_ms + self.duration_ms
    }

    pub fn distance(&self, other: &FixationPoint) -> f64 {
        (self.x_px - other.x_px).hypot(self.y_px - other.y_px)
    }
}

/// All fixations recorded for one image, ordered by onset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GazeSequence {
    pub image_id: String,
    /// Set when the source log distinguishes readers of the same image.
    pub reader: Option<String>,
    pub points: Vec<FixationPoint>,
    pub total_duration_ms: f64,
}

impl GazeSequence {
    /// Sorts `points` by onset and sets the total duration to the last
    /// fixation end.
    pub fn from_points(image_id: impl Into<String>, mut points: Vec<FixationPoint>) -> Self {
        points.sort_by(|a, b| a.onset_ms.total_cmp(&b.onset_ms));
        let total = points.iter().map(FixationPoint::end_ms).fold(0.0, f64::max);
        Self {
            image_id: image_id.into(),
            reader: None,
            points,
            total_duration_ms: total,
        }
    }

    pub fn with_total_duration(mut self, total_ms: f64) -> Self {
        self.total_duration_ms = total_ms;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Clamping summary from [`validate_sequence`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClampReport {
    pub clamped_points: usize,
}

/// Parse a fixation log into one sequence per image (per reader when a
/// `reader` column is present). Output is ordered by first appearance.
pub fn parse_fixation_csv<R: Read>(source: R) -> Result<Vec<GazeSequence>, GazeError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names.len() < 5 || names[..5] != FIXATION_HEADER {
        return Err(GazeError::BadHeader(names.join(",")));
    }
    let reader_col = match names.get(5) {
        None => None,
        Some(&"reader") if names.len() == 6 => Some(5),
        Some(_) => return Err(GazeError::BadHeader(names.join(","))),
    };
    let arity = names.len();

    let mut order: Vec<(String, Option<String>)> = Vec::new();
    let mut groups: BTreeMap<(String, Option<String>), Vec<FixationPoint>> = BTreeMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            csv_error(e, line)
        })?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        if row.len() != arity {
            return Err(GazeError::Parse {
                line,
                message: format!("expected {arity} fields, found {}", row.len()),
            });
        }
        let num = |i: usize| -> Result<f64, GazeError> {
            let field = &row[i];
            field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| GazeError::Parse {
                    line,
                    message: format!("`{}` is not a finite number in column {}", field, names[i]),
                })
        };
        let point = FixationPoint::new(num(1)?, num(2)?, num(3)?, num(4)?);
        if point.duration_ms <= 0.0 {
            return Err(GazeError::Validation {
                line,
                message: format!("duration_ms must be positive, got {}", point.duration_ms),
            });
        }
        if point.onset_ms < 0.0 {
            return Err(GazeError::Validation {
                line,
                message: format!("onset_ms must be nonnegative, got {}", point.onset_ms),
            });
        }
        let key = (row[0].to_string(), reader_col.map(|c| row[c].to_string()));
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(point);
    }

    Ok(order
        .into_iter()
        .map(|key| {
            let points = groups.remove(&key).unwrap_or_default();
            let mut seq = GazeSequence::from_points(key.0, points);
            seq.reader = key.1;
            seq
        })
        .collect())
}

fn csv_error(e: csv::Error, line: usize) -> GazeError {
    GazeError::Parse {
        line,
        message: e.to_string(),
    }
}

/// Write sequences in the fixation CSV layout (adds a `reader` column only
/// when some sequence carries one).
pub fn write_fixation_csv<W: Write>(sequences: &[GazeSequence], sink: W) -> Result<(), GazeError> {
    let with_reader = sequences.iter().any(|s| s.reader.is_some());
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink);
    let mut header: Vec<&str> = FIXATION_HEADER.to_vec();
    if with_reader {
        header.push("reader");
    }
    w.write_record(&header)?;
    for seq in sequences {
        for p in &seq.points {
            let mut rec = vec![
                seq.image_id.clone(),
                p.x_px.to_string(),
                p.y_px.to_string(),
                p.onset_ms.to_string(),
                p.duration_ms.to_string(),
            ];
            if with_reader {
                rec.push(seq.reader.clone().unwrap_or_default());
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Clamp every fixation into `[0, width) x [0, height)` (integer pixel
/// bounds, so the upper limit is `dim - 1`).
pub fn validate_sequence(
    seq: &GazeSequence,
    height: usize,
    width: usize,
) -> (GazeSequence, ClampReport) {
    assert!(height > 0 && width > 0, "image dims must be positive");
    let (xmax, ymax) = ((width - 1) as f64, (height - 1) as f64);
    let mut report = ClampReport::default();
    let points = seq
        .points
        .iter()
        .map(|p| {
            let in_x = p.x_px >= 0.0 && p.x_px < width as f64;
            let in_y = p.y_px >= 0.0 && p.y_px < height as f64;
            if in_x && in_y {
                return *p;
            }
            report.clamped_points += 1;
            let x = if in_x {
                p.x_px
            } else {
                p.x_px.clamp(0.0, xmax)
            };
            let y = if in_y {
                p.y_px
            } else {
                p.y_px.clamp(0.0, ymax)
            };
            FixationPoint {
                x_px: x,
                y_px: y,
                ..*p
            }
        })
        .collect();
    (
        GazeSequence {
            points,
            ..seq.clone()
        },
        report,
    )
}
