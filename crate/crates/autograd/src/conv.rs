//! 2-D convolution via im2col and `dgemm`.

use crate::Tensor;

/// Border handling for the implicit padding of a convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PadMode {
    Zero,
    /// Mirror without repeating the edge sample (`dcb|abcd|cba`).
    Reflect,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub stride: usize,
    pub padding: usize,
    pub pad_mode: PadMode,
}

impl ConvSpec {
    pub const fn new(stride: usize, padding: usize, pad_mode: PadMode) -> Self {
        Self {
            stride,
            padding,
            pad_mode,
        }
    }

    pub fn output_size(&self, size: usize, kernel: usize) -> usize {
        assert!(
            size + 2 * self.padding >= kernel,
            "kernel {kernel} larger than padded input {size}+2*{}",
            self.padding
        );
        (size + 2 * self.padding - kernel) / self.stride + 1
    }
}

fn source_index(i: isize, n: usize, mode: PadMode) -> Option<usize> {
    let n = n as isize;
    if (0..n).contains(&i) {
        return Some(i as usize);
    }
    match mode {
        PadMode::Zero => None,
        PadMode::Reflect => {
            let r = if i < 0 { -i } else { 2 * (n - 1) - i };
            // Padding wider than the input degrades to edge replication.
            Some(r.clamp(0, n - 1) as usize)
        }
    }
}

/// Per (kernel offset, output pixel) source index into one input channel.
struct Im2ColTable {
    entries: Vec<Option<u32>>,
    kk: usize,
    out_hw: usize,
}

impl Im2ColTable {
    fn new(h: usize, w: usize, kh: usize, kw: usize, spec: &ConvSpec) -> (Self, usize, usize) {
        let ho = spec.output_size(h, kh);
        let wo = spec.output_size(w, kw);
        let mut entries = Vec::with_capacity(kh * kw * ho * wo);
        let p = spec.padding as isize;
        let s = spec.stride as isize;
        for ki in 0..kh as isize {
            for kj in 0..kw as isize {
                for oy in 0..ho as isize {
                    let iy = source_index(oy * s + ki - p, h, spec.pad_mode);
                    for ox in 0..wo as isize {
                        let ix = source_index(ox * s + kj - p, w, spec.pad_mode);
                        entries.push(match (iy, ix) {
                            (Some(y), Some(x)) => Some((y * w + x) as u32),
                            _ => None,
                        });
                    }
                }
            }
        }
        (
            Self {
                entries,
                kk: kh * kw,
                out_hw: ho * wo,
            },
            ho,
            wo,
        )
    }

    fn im2col(&self, input: &[f64], channels: usize, hw: usize) -> Vec<f64> {
        let mut cols = vec![0.0; channels * self.kk * self.out_hw];
        for c in 0..channels {
            let plane = &input[c * hw..(c + 1) * hw];
            let dst = &mut cols[c * self.kk * self.out_hw..(c + 1) * self.kk * self.out_hw];
            for (d, e) in dst.iter_mut().zip(&self.entries) {
                if let Some(src) = e {
                    *d = plane[*src as usize];
                }
            }
        }
        cols
    }

    fn col2im(&self, cols: &[f64], channels: usize, hw: usize) -> Vec<f64> {
        let mut out = vec![0.0; channels * hw];
        for c in 0..channels {
            let plane = &mut out[c * hw..(c + 1) * hw];
            let src = &cols[c * self.kk * self.out_hw..(c + 1) * self.kk * self.out_hw];
            for (v, e) in src.iter().zip(&self.entries) {
                if let Some(dst) = e {
                    plane[*dst as usize] += v;
                }
            }
        }
        out
    }
}

/// `c[m×n] = a[m×k] · b[k×n]` (row-major, optional transposes via strides).
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_transposed: bool,
    b: &[f64],
    b_transposed: bool,
    c: &mut [f64],
    accumulate: bool,
) {
    let (rsa, csa) = if a_transposed { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_transposed { (1, k as isize) } else { (n as isize, 1) };
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: the slices cover every element addressed by the given strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            if accumulate { 1.0 } else { 0.0 },
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub(crate) fn conv2d_forward(
    input: &Tensor,
    weight: &Tensor,
    bias: Option<&Tensor>,
    spec: &ConvSpec,
) -> Tensor {
    let (c, h, w) = input.dims3();
    let [o, wc, kh, kw] = weight.shape()[..] else {
        panic!("conv2d weight must be rank 4, got {:?}", weight.shape());
    };
    assert_eq!(c, wc, "conv2d channel mismatch: input {c}, weight {wc}");
    let (table, ho, wo) = Im2ColTable::new(h, w, kh, kw, spec);
    let cols = table.im2col(input.data(), c, h * w);
    let mut out = vec![0.0; o * ho * wo];
    gemm(o, c * kh * kw, ho * wo, weight.data(), false, &cols, false, &mut out, false);
    if let Some(b) = bias {
        assert_eq!(b.len(), o, "conv2d bias length");
        for (row, &bv) in out.chunks_mut(ho * wo).zip(b.data()) {
            row.iter_mut().for_each(|v| *v += bv);
        }
    }
    Tensor::new(vec![o, ho, wo], out).expect("conv2d output shape")
}

/// Gradients with respect to input, weight and bias.
pub(crate) fn conv2d_backward(
    input: &Tensor,
    weight: &Tensor,
    grad_out: &Tensor,
    spec: &ConvSpec,
    need_input: bool,
    need_weight: bool,
) -> (Option<Tensor>, Option<Tensor>, Tensor) {
    let (c, h, w) = input.dims3();
    let [o, _, kh, kw] = weight.shape()[..] else {
        unreachable!()
    };
    let (table, ho, wo) = Im2ColTable::new(h, w, kh, kw, spec);
    let ckk = c * kh * kw;
    let ohw = ho * wo;
    let g = grad_out.data();

    let grad_bias = Tensor::new(vec![o], g.chunks(ohw).map(|r| r.iter().sum()).collect())
        .expect("bias grad shape");

    let grad_weight = need_weight.then(|| {
        let cols = table.im2col(input.data(), c, h * w);
        let mut gw = vec![0.0; o * ckk];
        gemm(o, ohw, ckk, g, false, &cols, true, &mut gw, false);
        Tensor::new(weight.shape().to_vec(), gw).expect("weight grad shape")
    });

    let grad_input = need_input.then(|| {
        let mut gcols = vec![0.0; ckk * ohw];
        gemm(ckk, o, ohw, weight.data(), true, g, false, &mut gcols, false);
        Tensor::new(vec![c, h, w], table.col2im(&gcols, c, h * w)).expect("input grad shape")
    });

    (grad_input, grad_weight, grad_bias)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(input: &Tensor, weight: &Tensor, spec: &ConvSpec) -> Tensor {
        let (c, h, w) = input.dims3();
        let [o, _, kh, kw] = weight.shape()[..] else {
            unreachable!()
        };
        let ho = spec.output_size(h, kh);
        let wo = spec.output_size(w, kw);
        let mut out = Tensor::zeros(vec![o, ho, wo]);
        for oc in 0..o {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = 0.0;
                    for ic in 0..c {
                        for ki in 0..kh {
                            for kj in 0..kw {
                                let iy = (oy * spec.stride + ki) as isize - spec.padding as isize;
                                let ix = (ox * spec.stride + kj) as isize - spec.padding as isize;
                                let (Some(y), Some(x)) = (
                                    source_index(iy, h, spec.pad_mode),
                                    source_index(ix, w, spec.pad_mode),
                                ) else {
                                    continue;
                                };
                                acc += input.at3(ic, y, x)
                                    * weight.data()[((oc * c + ic) * kh + ki) * kw + kj];
                            }
                        }
                    }
                    out.data_mut()[(oc * ho + oy) * wo + ox] = acc;
                }
            }
        }
        out
    }

    fn pseudo(shape: Vec<usize>, seed: u64) -> Tensor {
        let mut s = seed;
        Tensor::from_fn(shape, |_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
    }

    #[test]
    fn matches_naive_convolution() {
        for &(stride, pad, mode, k) in &[
            (1, 1, PadMode::Zero, 3),
            (2, 1, PadMode::Zero, 3),
            (1, 1, PadMode::Reflect, 3),
            (2, 1, PadMode::Zero, 4),
            (2, 3, PadMode::Zero, 7),
        ] {
            let spec = ConvSpec::new(stride, pad, mode);
            let x = pseudo(vec![3, 9, 7], 1);
            let wt = pseudo(vec![4, 3, k, k], 2);
            let fast = conv2d_forward(&x, &wt, None, &spec);
            let slow = naive(&x, &wt, &spec);
            assert_eq!(fast.shape(), slow.shape());
            for (a, b) in fast.data().iter().zip(slow.data()) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b} for {spec:?}");
            }
        }
    }

    #[test]
    fn reflect_index_mirrors_without_edge_repeat() {
        assert_eq!(source_index(-1, 4, PadMode::Reflect), Some(1));
        assert_eq!(source_index(4, 4, PadMode::Reflect), Some(2));
        assert_eq!(source_index(-1, 4, PadMode::Zero), None);
    }

    #[test]
    fn stride_two_rounds_up() {
        let spec = ConvSpec::new(2, 1, PadMode::Zero);
        assert_eq!(spec.output_size(3, 3), 2);
        assert_eq!(spec.output_size(48, 3), 24);
        let spec4 = ConvSpec::new(2, 1, PadMode::Zero);
        assert_eq!(spec4.output_size(3, 4), 1);
    }
}
