use serde::{Deserialize, Serialize};

use crate::gaze::{FixationPoint, GazeSequence};

use super::filter::{gaussian_filter, resize_bilinear};
use super::{cluster_integration, partition_fixations, HvaError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Integration,
    Disintegration,
}

impl Variant {
    pub fn code(self) -> u8 {
        match self {
            Variant::Integration => 0,
            Variant::Disintegration => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Variant::Integration),
            1 => Some(Variant::Disintegration),
            _ => None,
        }
    }

    pub fn suffix(self) -> &'static str {
        match self {
            Variant::Integration => "I",
            Variant::Disintegration => "D",
        }
    }
}

/// Clustering and smoothing parameters, in pixels of the native resolution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegrationParams {
    pub d_thr: f64,
    pub alpha_sub: f64,
    pub sigma_i: f64,
    pub sigma_d: f64,
    pub trunc_radius_sigmas: f64,
}

impl Default for IntegrationParams {
    fn default() -> Self {
        Self {
            d_thr: 64.0,
            alpha_sub: 0.5,
            sigma_i: 64.0,
            sigma_d: 128.0,
            trunc_radius_sigmas: 4.0,
        }
    }
}

impl IntegrationParams {
    /// Parameters for an image resampled by factor `r` from native resolution.
    pub fn scaled(&self, r: f64) -> Self {
        Self {
            d_thr: self.d_thr * r,
            sigma_i: self.sigma_i * r,
            sigma_d: self.sigma_d * r,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<(), HvaError> {
        if !(self.d_thr > 0.0
            && self.sigma_i > 0.0
            && self.sigma_d > 0.0
            && self.trunc_radius_sigmas > 0.0)
        {
            return Err(HvaError::Invalid(format!(
                "nonpositive HVA parameter in {self:?}"
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha_sub) {
            return Err(HvaError::Invalid(format!(
                "alpha_sub {} outside [0, 1]",
                self.alpha_sub
            )));
        }
        Ok(())
    }
}

/// Nonnegative `height x width` attention raster for one time window.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionMap {
    pub height: usize,
    pub width: usize,
    pub grid: Vec<f64>,
    pub variant: Variant,
    pub window_index: usize,
}

impl AttentionMap {
    pub fn uniform(height: usize, width: usize, variant: Variant, window_index: usize) -> Self {
        Self {
            height,
            width,
            grid: vec![1.0; height * width],
            variant,
            window_index,
        }
    }

    pub fn max(&self) -> f64 {
        self.grid.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Peak equals one, or every entry is equal (the empty-window map).
    pub fn is_normalized(&self) -> bool {
        let max = self.max();
        max == 1.0 || self.grid.iter().all(|&v| v == max)
    }

    pub fn argmax(&self) -> (usize, usize) {
        let (i, _) = self
            .grid
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
                if v > best.1 {
                    (i, v)
                } else {
                    best
                }
            });
        (i / self.width, i % self.width)
    }

    pub fn at(&self, y: usize, x: usize) -> f64 {
        self.grid[y * self.width + x]
    }

    /// Values rounded through `f32`, as stored in HVA files.
    pub fn quantized(&self) -> Self {
        Self {
            grid: self.grid.iter().map(|&v| v as f32 as f64).collect(),
            ..self.clone()
        }
    }
}

fn deposit(grid: &mut [f64], width: usize, height: usize, p: &FixationPoint, weight: f64) {
    let x = (p.x_px.max(0.0).floor() as usize).min(width - 1);
    let y = (p.y_px.max(0.0).floor() as usize).min(height - 1);
    grid[y * width + x] += weight;
}

/// Render one window's fixations as a peak-normalized heatmap.
///
/// Integration: main-cluster fixations deposit their dwell time, substitute
/// fixations `alpha_sub` times their dwell, smoothed with `sigma_i`.
/// Disintegration: every fixation deposits its dwell, smoothed with
/// `sigma_d`. An empty window yields the all-ones map.
pub fn render_map(
    points: &[FixationPoint],
    variant: Variant,
    params: &IntegrationParams,
    height: usize,
    width: usize,
    window_index: usize,
) -> AttentionMap {
    assert!(height > 0 && width > 0, "map dims must be positive");
    if points.is_empty() {
        return AttentionMap::uniform(height, width, variant, window_index);
    }
    let mut impulses = vec![0.0; height * width];
    let sigma = match variant {
        Variant::Integration => {
            let (main, subs) = cluster_integration(points, params.d_thr);
            for p in &main {
                deposit(&mut impulses, width, height, p, p.duration_ms);
            }
            for p in &subs {
                deposit(
                    &mut impulses,
                    width,
                    height,
                    p,
                    params.alpha_sub * p.duration_ms,
                );
            }
            params.sigma_i
        }
        Variant::Disintegration => {
            for p in points {
                deposit(&mut impulses, width, height, p, p.duration_ms);
            }
            params.sigma_d
        }
    };
    let mut grid = gaussian_filter(&impulses, height, width, sigma, params.trunc_radius_sigmas);
    let peak = grid.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        grid.iter_mut().for_each(|v| *v /= peak);
    } else {
        grid.iter_mut().for_each(|v| *v = 1.0);
    }
    AttentionMap {
        height,
        width,
        grid,
        variant,
        window_index,
    }
}

/// Bilinear, corner-aligned resize of a map.
pub fn resize_map(map: &AttentionMap, height: usize, width: usize) -> AttentionMap {
    AttentionMap {
        height,
        width,
        grid: resize_bilinear(&map.grid, map.height, map.width, height, width),
        ..map.clone()
    }
}

/// Integration and disintegration maps for every window of one image.
#[derive(Clone, Debug, PartialEq)]
pub struct HvaSet {
    pub image_id: String,
    pub integration: Vec<AttentionMap>,
    pub disintegration: Vec<AttentionMap>,
}

impl HvaSet {
    pub fn n_windows(&self) -> usize {
        self.integration.len()
    }

    pub fn maps(&self, variant: Variant) -> &[AttentionMap] {
        match variant {
            Variant::Integration => &self.integration,
            Variant::Disintegration => &self.disintegration,
        }
    }

    pub fn validate(&self) -> Result<(), HvaError> {
        let first = self
            .integration
            .first()
            .ok_or_else(|| HvaError::Invalid(format!("`{}` has no windows", self.image_id)))?;
        let dims = (first.height, first.width);
        if self.disintegration.len() != self.integration.len() {
            return Err(HvaError::Invalid(format!(
                "`{}`: {} integration vs {} disintegration maps",
                self.image_id,
                self.integration.len(),
                self.disintegration.len()
            )));
        }
        for m in self.integration.iter().chain(&self.disintegration) {
            if (m.height, m.width) != dims {
                return Err(HvaError::Invalid(format!(
                    "`{}`: maps differ in size",
                    self.image_id
                )));
            }
        }
        Ok(())
    }

    pub fn quantized(&self) -> Self {
        Self {
            image_id: self.image_id.clone(),
            integration: self
                .integration
                .iter()
                .map(AttentionMap::quantized)
                .collect(),
            disintegration: self
                .disintegration
                .iter()
                .map(AttentionMap::quantized)
                .collect(),
        }
    }
}

/// Partition a sequence into `n_windows` and render both map variants per window.
pub fn generate_hva(
    seq: &GazeSequence,
    n_windows: usize,
    params: &IntegrationParams,
    height: usize,
    width: usize,
) -> Result<HvaSet, HvaError> {
    params.validate()?;
    let partition = partition_fixations(seq, n_windows)?;
    let render_all = |variant| {
        partition
            .window_points
            .iter()
            .enumerate()
            .map(|(t, pts)| render_map(pts, variant, params, height, width, t))
            .collect()
    };
    Ok(HvaSet {
        image_id: seq.image_id.clone(),
        integration: render_all(Variant::Integration),
        disintegration: render_all(Variant::Disintegration),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> IntegrationParams {
        IntegrationParams::default().scaled(1.0 / 16.0)
    }

    #[test]
    fn single_fixation_peaks_at_its_pixel() {
        let p = [FixationPoint::new(100.0, 100.0, 0.0, 321.0)];
        for variant in [Variant::Integration, Variant::Disintegration] {
            let m = render_map(&p, variant, &params(), 160, 180, 0);
            assert_eq!(m.argmax(), (100, 100));
            assert_eq!(m.max(), 1.0);
        }
    }

    #[test]
    fn empty_window_is_all_ones() {
        let m = render_map(&[], Variant::Disintegration, &params(), 8, 9, 2);
        assert!(m.grid.iter().all(|&v| v == 1.0));
        assert!(m.is_normalized());
        assert_eq!(m.window_index, 2);
    }

    #[test]
    fn symmetric_impulses_give_symmetric_map() {
        let (h, w) = (40, 50);
        let pts = [
            FixationPoint::new(10.0, 20.0, 0.0, 300.0),
            FixationPoint::new((w - 1) as f64 - 10.0, 20.0, 10.0, 300.0),
        ];
        let m = render_map(&pts, Variant::Disintegration, &params(), h, w, 0);
        let mut worst: f64 = 0.0;
        for y in 0..h {
            for x in 0..w {
                worst = worst.max((m.at(y, x) - m.at(y, w - 1 - x)).abs());
            }
        }
        assert!(worst < 1e-12, "asymmetry {worst}");
    }

    #[test]
    fn substitutes_are_down_weighted() {
        let p = IntegrationParams {
            d_thr: 5.0,
            sigma_i: 1.0,
            ..IntegrationParams::default()
        };
        let pts = [
            FixationPoint::new(5.0, 5.0, 0.0, 400.0),
            FixationPoint::new(30.0, 30.0, 500.0, 400.0),
            FixationPoint::new(31.0, 30.0, 900.0, 400.0),
        ];
        let m = render_map(&pts, Variant::Integration, &p, 40, 40, 0);
        // main cluster is the pair; the lone fixation gets alpha/2 of its peak
        assert!(m.at(5, 5) < 0.5 && m.at(5, 5) > 0.2);
        assert!(m.at(30, 30) > 0.9);
    }

    #[test]
    fn generated_set_is_consistent() {
        let seq = GazeSequence::from_points(
            "img",
            (0..12)
                .map(|i| {
                    FixationPoint::new((i * 5) as f64, (i * 3) as f64, i as f64 * 250.0, 200.0)
                })
                .collect(),
        );
        let set = generate_hva(&seq, 4, &params(), 64, 64).unwrap();
        set.validate().unwrap();
        assert_eq!(set.n_windows(), 4);
        for m in set.integration.iter().chain(&set.disintegration) {
            assert!(m.grid.iter().all(|&v| v >= 0.0));
            assert!(m.is_normalized());
        }
    }
}
