//! Forward and adjoint kernels for the spatial tensor operations.

use crate::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResizeMode {
    Nearest,
    /// Half-pixel centred bilinear (`align_corners = false`).
    Bilinear,
}

/// Sparse 1-D resampling matrix: each output index blends at most two inputs.
#[derive(Clone, Debug)]
pub(crate) struct AxisWeights {
    taps: Vec<(usize, usize, f64)>,
}

impl AxisWeights {
    pub(crate) fn new(input: usize, output: usize, mode: ResizeMode) -> Self {
        let scale = input as f64 / output as f64;
        let taps = (0..output)
            .map(|o| match mode {
                ResizeMode::Nearest => {
                    let i = ((o as f64 * scale).floor() as usize).min(input - 1);
                    (i, i, 0.0)
                }
                ResizeMode::Bilinear => {
                    let src = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
                    let i0 = (src.floor() as usize).min(input - 1);
                    let i1 = (i0 + 1).min(input - 1);
                    (i0, i1, src - i0 as f64)
                }
            })
            .collect();
        Self { taps }
    }
}

pub(crate) fn resize_forward(input: &Tensor, out_h: usize, out_w: usize, mode: ResizeMode) -> Tensor {
    let (c, h, w) = input.dims3();
    let wy = AxisWeights::new(h, out_h, mode);
    let wx = AxisWeights::new(w, out_w, mode);
    let src = input.data();
    let mut out = Vec::with_capacity(c * out_h * out_w);
    for ch in 0..c {
        let plane = &src[ch * h * w..(ch + 1) * h * w];
        for &(y0, y1, ty) in &wy.taps {
            for &(x0, x1, tx) in &wx.taps {
                let top = plane[y0 * w + x0] * (1.0 - tx) + plane[y0 * w + x1] * tx;
                let bottom = plane[y1 * w + x0] * (1.0 - tx) + plane[y1 * w + x1] * tx;
                out.push(top * (1.0 - ty) + bottom * ty);
            }
        }
    }
    Tensor::new(vec![c, out_h, out_w], out).expect("resize shape")
}

pub(crate) fn resize_backward(grad: &Tensor, in_h: usize, in_w: usize, mode: ResizeMode) -> Tensor {
    let (c, out_h, out_w) = grad.dims3();
    let wy = AxisWeights::new(in_h, out_h, mode);
    let wx = AxisWeights::new(in_w, out_w, mode);
    let mut out = vec![0.0; c * in_h * in_w];
    let g = grad.data();
    for ch in 0..c {
        let plane = &mut out[ch * in_h * in_w..(ch + 1) * in_h * in_w];
        let gp = &g[ch * out_h * out_w..(ch + 1) * out_h * out_w];
        for (oy, &(y0, y1, ty)) in wy.taps.iter().enumerate() {
            for (ox, &(x0, x1, tx)) in wx.taps.iter().enumerate() {
                let v = gp[oy * out_w + ox];
                plane[y0 * in_w + x0] += v * (1.0 - ty) * (1.0 - tx);
                plane[y0 * in_w + x1] += v * (1.0 - ty) * tx;
                plane[y1 * in_w + x0] += v * ty * (1.0 - tx);
                plane[y1 * in_w + x1] += v * ty * tx;
            }
        }
    }
    Tensor::new(vec![c, in_h, in_w], out).expect("resize grad shape")
}

/// Unweighted `k×k` mean over every fully contained window.
pub(crate) fn box_filter_forward(input: &Tensor, k: usize) -> Tensor {
    let (c, h, w) = input.dims3();
    assert!(h >= k && w >= k, "box filter {k} larger than {h}x{w}");
    let (oh, ow) = (h - k + 1, w - k + 1);
    let norm = 1.0 / (k * k) as f64;
    let src = input.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let plane = &src[ch * h * w..(ch + 1) * h * w];
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = 0.0;
                for dy in 0..k {
                    let row = &plane[(y + dy) * w + x..(y + dy) * w + x + k];
                    acc += row.iter().sum::<f64>();
                }
                out.push(acc * norm);
            }
        }
    }
    Tensor::new(vec![c, oh, ow], out).expect("box filter shape")
}

pub(crate) fn box_filter_backward(grad: &Tensor, k: usize, in_h: usize, in_w: usize) -> Tensor {
    let (c, oh, ow) = grad.dims3();
    let norm = 1.0 / (k * k) as f64;
    let mut out = vec![0.0; c * in_h * in_w];
    let g = grad.data();
    for ch in 0..c {
        let plane = &mut out[ch * in_h * in_w..(ch + 1) * in_h * in_w];
        for y in 0..oh {
            for x in 0..ow {
                let v = g[(ch * oh + y) * ow + x] * norm;
                for dy in 0..k {
                    for dx in 0..k {
                        plane[(y + dy) * in_w + x + dx] += v;
                    }
                }
            }
        }
    }
    Tensor::new(vec![c, in_h, in_w], out).expect("box filter grad shape")
}

/// Forward difference along x (`axis_x = true`) or y.
pub(crate) fn diff_forward(input: &Tensor, axis_x: bool) -> Tensor {
    let (c, h, w) = input.dims3();
    let (oh, ow) = if axis_x { (h, w - 1) } else { (h - 1, w) };
    let (dy, dx) = if axis_x { (0, 1) } else { (1, 0) };
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                out.push(input.at3(ch, y + dy, x + dx) - input.at3(ch, y, x));
            }
        }
    }
    Tensor::new(vec![c, oh, ow], out).expect("diff shape")
}

pub(crate) fn diff_backward(grad: &Tensor, axis_x: bool) -> Tensor {
    let (c, oh, ow) = grad.dims3();
    let (h, w) = if axis_x { (oh, ow + 1) } else { (oh + 1, ow) };
    let (dy, dx) = if axis_x { (0, 1) } else { (1, 0) };
    let mut out = vec![0.0; c * h * w];
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                let v = grad.at3(ch, y, x);
                out[(ch * h + y + dy) * w + x + dx] += v;
                out[(ch * h + y) * w + x] -= v;
            }
        }
    }
    Tensor::new(vec![c, h, w], out).expect("diff grad shape")
}

pub(crate) fn channel_mean_forward(input: &Tensor) -> Tensor {
    let (c, h, w) = input.dims3();
    let hw = h * w;
    let mut out = vec![0.0; hw];
    for plane in input.data().chunks(hw) {
        for (o, v) in out.iter_mut().zip(plane) {
            *o += v;
        }
    }
    let inv = 1.0 / c as f64;
    out.iter_mut().for_each(|v| *v *= inv);
    Tensor::new(vec![1, h, w], out).expect("channel mean shape")
}

pub(crate) fn channel_mean_backward(grad: &Tensor, channels: usize) -> Tensor {
    let (_, h, w) = grad.dims3();
    let inv = 1.0 / channels as f64;
    let plane: Vec<f64> = grad.data().iter().map(|v| v * inv).collect();
    let mut out = Vec::with_capacity(channels * h * w);
    for _ in 0..channels {
        out.extend_from_slice(&plane);
    }
    Tensor::new(vec![channels, h, w], out).expect("channel mean grad shape")
}

pub(crate) fn concat_channels(inputs: &[&Tensor]) -> Tensor {
    let (_, h, w) = inputs[0].dims3();
    let mut channels = 0;
    let mut data = Vec::new();
    for t in inputs {
        let (c, th, tw) = t.dims3();
        assert_eq!((th, tw), (h, w), "concat spatial mismatch");
        channels += c;
        data.extend_from_slice(t.data());
    }
    Tensor::new(vec![channels, h, w], data).expect("concat shape")
}
