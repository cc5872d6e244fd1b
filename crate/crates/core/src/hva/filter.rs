//! Separable Gaussian smoothing and bilinear resampling of rasters.

/// Normalized 1-D Gaussian taps for offsets `-r..=r`, `r = ceil(trunc * sigma)`.
pub fn gaussian_kernel(sigma: f64, trunc: f64) -> Vec<f64> {
    assert!(sigma > 0.0, "sigma must be positive");
    let radius = (trunc * sigma).ceil() as isize;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

fn convolve_rows(src: &[f64], h: usize, w: usize, taps: &[f64], out: &mut [f64]) {
    let r = (taps.len() / 2) as isize;
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        let dst = &mut out[y * w..(y + 1) * w];
        dst.iter_mut().for_each(|v| *v = 0.0);
        for (x, &v) in row.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            // scatter: each source pixel spreads over its clipped kernel span
            let lo = (x as isize - r).max(0) as usize;
            let hi = ((x as isize + r) as usize).min(w - 1);
            let t0 = (lo as isize - (x as isize - r)) as usize;
            for (d, &t) in dst[lo..=hi].iter_mut().zip(&taps[t0..]) {
                *d += v * t;
            }
        }
    }
}

fn transpose(src: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            out[x * h + y] = src[y * w + x];
        }
    }
    out
}

/// Separable Gaussian filter with zero padding; `grid` is `height x width`
/// row-major. The kernel is renormalized to unit sum along each axis.
pub fn gaussian_filter(
    grid: &[f64],
    height: usize,
    width: usize,
    sigma: f64,
    trunc: f64,
) -> Vec<f64> {
    assert_eq!(grid.len(), height * width);
    let taps = gaussian_kernel(sigma, trunc);
    let mut rows = vec![0.0; grid.len()];
    convolve_rows(grid, height, width, &taps, &mut rows);
    let cols = transpose(&rows, height, width);
    let mut out_t = vec![0.0; grid.len()];
    convolve_rows(&cols, width, height, &taps, &mut out_t);
    transpose(&out_t, width, height)
}

/// Bilinear resize with corner-aligned sampling: output pixel `i` samples
/// input coordinate `i * (in - 1) / (out - 1)`.
pub fn resize_bilinear(
    grid: &[f64],
    height: usize,
    width: usize,
    out_h: usize,
    out_w: usize,
) -> Vec<f64> {
    assert!(out_h >= 1 && out_w >= 1, "target dims must be positive");
    assert_eq!(grid.len(), height * width);
    if (out_h, out_w) == (height, width) {
        return grid.to_vec();
    }
    let coord = |i: usize, n_out: usize, n_in: usize| -> (usize, usize, f64) {
        if n_out == 1 || n_in == 1 {
            return (0, 0, 0.0);
        }
        let s = i as f64 * (n_in - 1) as f64 / (n_out - 1) as f64;
        let i0 = (s.floor() as usize).min(n_in - 1);
        let i1 = (i0 + 1).min(n_in - 1);
        (i0, i1, s - i0 as f64)
    };
    let mut out = Vec::with_capacity(out_h * out_w);
    for oy in 0..out_h {
        let (y0, y1, fy) = coord(oy, out_h, height);
        for ox in 0..out_w {
            let (x0, x1, fx) = coord(ox, out_w, width);
            let top = grid[y0 * width + x0] * (1.0 - fx) + grid[y0 * width + x1] * fx;
            let bottom = grid[y1 * width + x0] * (1.0 - fx) + grid[y1 * width + x1] * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_sums_to_one() {
        for sigma in [0.5, 3.0, 8.0, 64.0] {
            let k = gaussian_kernel(sigma, 4.0);
            assert_eq!(k.len(), 2 * (4.0 * sigma as f64).ceil() as usize + 1);
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn impulse_mass_and_radial_symmetry() {
        let sigma = 2.0;
        let n = 33;
        let mut g = vec![0.0; n * n];
        g[16 * n + 16] = 1.0;
        let out = gaussian_filter(&g, n, n, sigma, 4.0);
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (dy, dx) in [(3, 0), (0, 3), (2, 5), (5, 2)] {
            let a = out[(16 + dy) * n + 16 + dx];
            let b = out[(16 - dx) * n + 16 - dy];
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn homogeneous() {
        let g: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = gaussian_filter(&g, 8, 8, 1.5, 4.0);
        let scaled: Vec<f64> = g.iter().map(|v| v * 2.0).collect();
        let b = gaussian_filter(&scaled, 8, 8, 1.5, 4.0);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x * 2.0, *y);
        }
    }

    #[test]
    fn resize_identity_and_constant() {
        let g: Vec<f64> = (0..12).map(|i| i as f64).collect();
        assert_eq!(resize_bilinear(&g, 3, 4, 3, 4), g);
        let c = vec![0.25; 30];
        assert!(resize_bilinear(&c, 5, 6, 9, 2)
            .iter()
            .all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn resize_keeps_corners() {
        let g: Vec<f64> = (0..64).map(|i| i as f64).collect();
        let r = resize_bilinear(&g, 8, 8, 3, 3);
        assert_eq!((r[0], r[2], r[6], r[8]), (0.0, 7.0, 56.0, 63.0));
    }
}
