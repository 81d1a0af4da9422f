//! Forward and reverse passes of the individual layers.
//!
//! Activations are `[channels x length]`, row-major.

use matrixmultiply::dgemm;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub in_len: usize,
    pub out_len: usize,
}

impl ConvGeom {
    fn rows(&self) -> usize {
        self.in_channels * self.kernel
    }

    fn is_pointwise(&self) -> bool {
        self.kernel == 1 && self.stride == 1 && self.padding == 0
    }
}

/// Unfolds the padded input into `[in_channels * kernel x out_len]`.
pub(crate) fn im2col(g: &ConvGeom, input: &[f64], cols: &mut Vec<f64>) {
    cols.clear();
    cols.resize(g.rows() * g.out_len, 0.0);
    let pad = g.padding as isize;
    for ci in 0..g.in_channels {
        let src = &input[ci * g.in_len..(ci + 1) * g.in_len];
        for kk in 0..g.kernel {
            let row = &mut cols[(ci * g.kernel + kk) * g.out_len..][..g.out_len];
            let offset = kk as isize - pad;
            if g.stride == 1 {
                // valid t: 0 <= t + offset < in_len
                let t_lo = (-offset).max(0) as usize;
                let t_hi = ((g.in_len as isize - offset).max(0) as usize).min(g.out_len);
                if t_lo < t_hi {
                    let s_lo = (t_lo as isize + offset) as usize;
                    row[t_lo..t_hi].copy_from_slice(&src[s_lo..s_lo + (t_hi - t_lo)]);
                }
            } else {
                for (t, r) in row.iter_mut().enumerate() {
                    let i = (t * g.stride) as isize + offset;
                    if i >= 0 && (i as usize) < g.in_len {
                        *r = src[i as usize];
                    }
                }
            }
        }
    }
}

fn col2im_add(g: &ConvGeom, dcols: &[f64], din: &mut [f64]) {
    let pad = g.padding as isize;
    for ci in 0..g.in_channels {
        let dst = &mut din[ci * g.in_len..(ci + 1) * g.in_len];
        for kk in 0..g.kernel {
            let row = &dcols[(ci * g.kernel + kk) * g.out_len..][..g.out_len];
            let offset = kk as isize - pad;
            if g.stride == 1 {
                let t_lo = (-offset).max(0) as usize;
                let t_hi = ((g.in_len as isize - offset).max(0) as usize).min(g.out_len);
                if t_lo < t_hi {
                    let s_lo = (t_lo as isize + offset) as usize;
                    for (d, r) in dst[s_lo..s_lo + (t_hi - t_lo)].iter_mut().zip(&row[t_lo..t_hi]) {
                        *d += r;
                    }
                }
            } else {
                for (t, r) in row.iter().enumerate() {
                    let i = (t * g.stride) as isize + offset;
                    if i >= 0 && (i as usize) < g.in_len {
                        dst[i as usize] += r;
                    }
                }
            }
        }
    }
}

/// `out = W * cols + b`; returns the unfolded input for reuse in backward.
pub(crate) fn conv_forward(g: &ConvGeom, weight: &[f64], bias: &[f64], input: &[f64], out: &mut Vec<f64>, cols: &mut Vec<f64>) {
    out.clear();
    out.resize(g.out_channels * g.out_len, 0.0);
    for (co, row) in out.chunks_mut(g.out_len).enumerate() {
        row.iter_mut().for_each(|v| *v = bias[co]);
    }
    let b: &[f64] = if g.is_pointwise() {
        input
    } else {
        im2col(g, input, cols);
        cols
    };
    let (m, k, n) = (g.out_channels, g.rows(), g.out_len);
    unsafe {
        dgemm(
            m, k, n,
            1.0,
            weight.as_ptr(), k as isize, 1,
            b.as_ptr(), n as isize, 1,
            1.0,
            out.as_mut_ptr(), n as isize, 1,
        );
    }
}

/// Accumulates parameter gradients and (optionally) writes the input gradient.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_backward(
    g: &ConvGeom,
    weight: &[f64],
    cols: &[f64],
    input: &[f64],
    dout: &[f64],
    dweight: Option<(&mut [f64], &mut [f64])>,
    din: Option<&mut Vec<f64>>,
    scratch: &mut Vec<f64>,
) {
    let (m, k, n) = (g.out_channels, g.rows(), g.out_len);
    let b: &[f64] = if g.is_pointwise() { input } else { cols };
    if let Some((dw, db)) = dweight {
        unsafe {
            dgemm(
                m, n, k,
                1.0,
                dout.as_ptr(), n as isize, 1,
                b.as_ptr(), 1, n as isize,
                1.0,
                dw.as_mut_ptr(), k as isize, 1,
            );
        }
        for (co, row) in dout.chunks(n).enumerate() {
            db[co] += row.iter().sum::<f64>();
        }
    }
    if let Some(din) = din {
        din.clear();
        din.resize(g.in_channels * g.in_len, 0.0);
        let target: &mut [f64] = if g.is_pointwise() {
            din
        } else {
            scratch.clear();
            scratch.resize(k * n, 0.0);
            scratch
        };
        unsafe {
            dgemm(
                k, m, n,
                1.0,
                weight.as_ptr(), 1, k as isize,
                dout.as_ptr(), n as isize, 1,
                0.0,
                target.as_mut_ptr(), n as isize, 1,
            );
        }
        if !g.is_pointwise() {
            col2im_add(g, scratch, din);
        }
    }
}

pub(crate) fn relu_forward(input: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend(input.iter().map(|&v| if v > 0.0 { v } else { 0.0 }));
}

pub(crate) fn relu_backward(input: &[f64], dout: &[f64], din: &mut Vec<f64>) {
    din.clear();
    din.extend(input.iter().zip(dout).map(|(&x, &d)| if x > 0.0 { d } else { 0.0 }));
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct PoolGeom {
    pub channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub in_len: usize,
    pub out_len: usize,
}

/// Max pooling; records the first (lowest-index) maximum of each window.
pub(crate) fn maxpool_forward(g: &PoolGeom, input: &[f64], out: &mut Vec<f64>, argmax: &mut Vec<u32>) {
    out.clear();
    argmax.clear();
    for c in 0..g.channels {
        let src = &input[c * g.in_len..(c + 1) * g.in_len];
        for t in 0..g.out_len {
            let start = t * g.stride;
            let mut best = start;
            for i in start + 1..start + g.kernel {
                if src[i] > src[best] {
                    best = i;
                }
            }
            out.push(src[best]);
            argmax.push((c * g.in_len + best) as u32);
        }
    }
}

pub(crate) fn maxpool_backward(g: &PoolGeom, argmax: &[u32], dout: &[f64], din: &mut Vec<f64>) {
    din.clear();
    din.resize(g.channels * g.in_len, 0.0);
    for (&i, &d) in argmax.iter().zip(dout) {
        din[i as usize] += d;
    }
}

pub(crate) fn avgpool_forward(g: &PoolGeom, input: &[f64], out: &mut Vec<f64>) {
    out.clear();
    let scale = 1.0 / g.kernel as f64;
    for c in 0..g.channels {
        let src = &input[c * g.in_len..(c + 1) * g.in_len];
        for t in 0..g.out_len {
            let s = t * g.stride;
            out.push(src[s..s + g.kernel].iter().sum::<f64>() * scale);
        }
    }
}

pub(crate) fn avgpool_backward(g: &PoolGeom, dout: &[f64], din: &mut Vec<f64>) {
    din.clear();
    din.resize(g.channels * g.in_len, 0.0);
    let scale = 1.0 / g.kernel as f64;
    for c in 0..g.channels {
        let dst = &mut din[c * g.in_len..(c + 1) * g.in_len];
        for t in 0..g.out_len {
            let d = dout[c * g.out_len + t] * scale;
            let s = t * g.stride;
            dst[s..s + g.kernel].iter_mut().for_each(|v| *v += d);
        }
    }
}
