//! Raw forward/backward kernels on row-major slices.

/// `(m,k) x (k,n) -> (m,n)`, accumulating into `out`.
pub(crate) fn matmul_acc(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// `a^T` for an `(m,n)` matrix.
pub(crate) fn transpose(a: &[f64], m: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a[i * n + j];
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub c_in: usize,
    pub c_out: usize,
    pub h: usize,
    pub w: usize,
    pub stride: usize,
}

impl ConvGeom {
    pub fn out_h(&self) -> usize {
        (self.h - 1) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.w - 1) / self.stride + 1
    }

    /// Output columns `ox` whose input column `ox*stride + kx - 1` is in bounds.
    fn col_range(&self, kx: usize) -> (usize, usize) {
        let lo = if kx == 0 { 1 } else { 0 };
        let hi = if self.w + 1 < kx + 1 {
            0
        } else {
            ((self.w + 1 - kx - 1) / self.stride + 1).min(self.out_w())
        };
        (lo, hi.max(lo))
    }

    fn row_in(&self, oy: usize, ky: usize) -> Option<usize> {
        let iy = (oy * self.stride + ky) as isize - 1;
        (iy >= 0 && (iy as usize) < self.h).then_some(iy as usize)
    }
}

/// 3x3 convolution with zero padding 1: input `(C,H,W)`, weight `(O,C,3,3)`.
pub(crate) fn conv3x3_forward(
    x: &[f64],
    weight: &[f64],
    bias: Option<&[f64]>,
    g: ConvGeom,
) -> Vec<f64> {
    let (ho, wo) = (g.out_h(), g.out_w());
    let plane = ho * wo;
    let mut out = vec![0.0; g.c_out * plane];
    for o in 0..g.c_out {
        let out_o = &mut out[o * plane..(o + 1) * plane];
        if let Some(b) = bias {
            out_o.iter_mut().for_each(|v| *v = b[o]);
        }
        for c in 0..g.c_in {
            let x_c = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
            for ky in 0..3 {
                for kx in 0..3 {
                    let wv = weight[((o * g.c_in + c) * 3 + ky) * 3 + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    let (lo, hi) = g.col_range(kx);
                    for oy in 0..ho {
                        let Some(iy) = g.row_in(oy, ky) else { continue };
                        let in_row = &x_c[iy * g.w..(iy + 1) * g.w];
                        let out_row = &mut out_o[oy * wo..(oy + 1) * wo];
                        if g.stride == 1 {
                            let src = &in_row[lo + kx - 1..hi + kx - 1];
                            for (ov, &iv) in out_row[lo..hi].iter_mut().zip(src) {
                                *ov += wv * iv;
                            }
                        } else {
                            for ox in lo..hi {
                                out_row[ox] += wv * in_row[ox * g.stride + kx - 1];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Gradients of [`conv3x3_forward`] with respect to input, weight and bias.
pub(crate) fn conv3x3_backward(
    x: &[f64],
    weight: &[f64],
    grad_out: &[f64],
    g: ConvGeom,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (ho, wo) = (g.out_h(), g.out_w());
    let plane = ho * wo;
    let mut gx = vec![0.0; x.len()];
    let mut gw = vec![0.0; weight.len()];
    let mut gb = vec![0.0; g.c_out];
    for o in 0..g.c_out {
        let go = &grad_out[o * plane..(o + 1) * plane];
        gb[o] = go.iter().sum();
        for c in 0..g.c_in {
            let base = c * g.h * g.w;
            for ky in 0..3 {
                for kx in 0..3 {
                    let widx = ((o * g.c_in + c) * 3 + ky) * 3 + kx;
                    let wv = weight[widx];
                    let (lo, hi) = g.col_range(kx);
                    let mut acc = 0.0;
                    for oy in 0..ho {
                        let Some(iy) = g.row_in(oy, ky) else { continue };
                        let in_off = base + iy * g.w;
                        let g_row = &go[oy * wo..(oy + 1) * wo];
                        if g.stride == 1 {
                            let span = lo + kx - 1..hi + kx - 1;
                            let in_row = &x[in_off..in_off + g.w][span.clone()];
                            let gx_row = &mut gx[in_off..in_off + g.w][span];
                            for ((gxv, &iv), &gv) in
                                gx_row.iter_mut().zip(in_row).zip(&g_row[lo..hi])
                            {
                                acc += gv * iv;
                                *gxv += wv * gv;
                            }
                        } else {
                            for ox in lo..hi {
                                let ix = in_off + ox * g.stride + kx - 1;
                                acc += g_row[ox] * x[ix];
                                gx[ix] += wv * g_row[ox];
                            }
                        }
                    }
                    gw[widx] += acc;
                }
            }
        }
    }
    (gx, gw, gb)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct PoolGeom {
    pub channels: usize,
    pub h: usize,
    pub w: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl PoolGeom {
    pub fn out_h(&self) -> usize {
        (self.h + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.w + 2 * self.pad - self.kernel) / self.stride + 1
    }

    /// Clipped input span `[lo, hi)` covered by output index `o` along an axis of length `len`.
    fn span(&self, o: usize, len: usize) -> (usize, usize) {
        let start = (o * self.stride) as isize - self.pad as isize;
        let lo = start.max(0) as usize;
        let hi = ((start + self.kernel as isize).max(0) as usize).min(len);
        (lo, hi.max(lo))
    }
}

/// Average pooling with zero padding; the divisor is always `kernel^2`.
pub(crate) fn avg_pool_forward(x: &[f64], g: PoolGeom) -> Vec<f64> {
    let (ho, wo) = (g.out_h(), g.out_w());
    let inv = 1.0 / (g.kernel * g.kernel) as f64;
    let mut out = vec![0.0; g.channels * ho * wo];
    for c in 0..g.channels {
        let xc = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for oy in 0..ho {
            let (y0, y1) = g.span(oy, g.h);
            for ox in 0..wo {
                let (x0, x1) = g.span(ox, g.w);
                let mut s = 0.0;
                for iy in y0..y1 {
                    s += xc[iy * g.w + x0..iy * g.w + x1].iter().sum::<f64>();
                }
                out[(c * ho + oy) * wo + ox] = s * inv;
            }
        }
    }
    out
}

pub(crate) fn avg_pool_backward(grad_out: &[f64], g: PoolGeom) -> Vec<f64> {
    let (ho, wo) = (g.out_h(), g.out_w());
    let inv = 1.0 / (g.kernel * g.kernel) as f64;
    let mut gx = vec![0.0; g.channels * g.h * g.w];
    for c in 0..g.channels {
        let gc = &mut gx[c * g.h * g.w..(c + 1) * g.h * g.w];
        for oy in 0..ho {
            let (y0, y1) = g.span(oy, g.h);
            for ox in 0..wo {
                let (x0, x1) = g.span(ox, g.w);
                let v = grad_out[(c * ho + oy) * wo + ox] * inv;
                for iy in y0..y1 {
                    gc[iy * g.w + x0..iy * g.w + x1]
                        .iter_mut()
                        .for_each(|e| *e += v);
                }
            }
        }
    }
    gx
}
