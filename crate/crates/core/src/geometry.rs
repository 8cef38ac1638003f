//! Rectified-stereo warping and image derivatives.
//!
//! Disparities are expressed as a fraction of image width: a value `d` at
//! pixel `x` pairs it with pixel `x - d * width` in the right view. Metric
//! depth only appears at evaluation time through [`disparity_to_depth`].

use std::fmt;

use crossdepth_autograd::{CustomOp, Graph, Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default upper bound of predicted disparities (30 % of image width).
pub const DEFAULT_MAX_DISPARITY: f64 = 0.3;

/// Disparities at or below this are treated as "no correspondence" when
/// converting to depth.
pub const DEFAULT_MIN_DISPARITY: f64 = 1e-4;

/// A `[channels, height, width]` array of finite intensities or features.
#[derive(Clone, PartialEq)]
pub struct ImagePlane(Tensor);

impl fmt::Debug for ImagePlane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (c, h, w) = self.dims();
        write!(f, "ImagePlane({c}x{h}x{w})")
    }
}

impl ImagePlane {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        let t = Tensor::new(vec![channels, height, width], data)
            .map_err(|e| Error::contract("ImagePlane", e.to_string()))?;
        Self::from_tensor(t)
    }

    pub fn from_tensor(t: Tensor) -> Result<Self> {
        let &[c, h, w] = t.shape() else {
            return Err(Error::contract(
                "ImagePlane",
                format!("expected [C, H, W], got {:?}", t.shape()),
            ));
        };
        if c < 1 || h < 2 || w < 2 {
            return Err(Error::contract(
                "ImagePlane",
                format!("need >=1 channel and >=2x2 pixels, got {c}x{h}x{w}"),
            ));
        }
        if !t.all_finite() {
            return Err(Error::contract("ImagePlane", "non-finite value"));
        }
        Ok(Self(t))
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Result<Self> {
        Self::from_tensor(Tensor::full(vec![channels, height, width], value))
    }

    /// Builds a plane from `f(c, y, x)`.
    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::new(channels, height, width, data)
    }

    /// `(channels, height, width)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        self.0.dims3()
    }

    pub fn channels(&self) -> usize {
        self.dims().0
    }

    pub fn height(&self) -> usize {
        self.dims().1
    }

    pub fn width(&self) -> usize {
        self.dims().2
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.0.at3(c, y, x)
    }

    pub fn data(&self) -> &[f64] {
        self.0.data()
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_tensor(self.0.map(f))
    }

    /// Single channel `c` as a one-channel plane.
    pub fn channel(&self, c: usize) -> ImagePlane {
        let (_, h, w) = self.dims();
        let data = self.0.data()[c * h * w..(c + 1) * h * w].to_vec();
        Self(Tensor::new(vec![1, h, w], data).expect("channel shape"))
    }

    pub fn same_size(&self, other: &ImagePlane) -> bool {
        self.height() == other.height() && self.width() == other.width()
    }
}

/// Per-pixel horizontal correspondence offset, a fraction of image width.
#[derive(Clone, Debug, PartialEq)]
pub struct DisparityMap(ImagePlane);

impl DisparityMap {
    /// Wraps a one-channel plane of non-negative values.
    pub fn new(plane: ImagePlane) -> Result<Self> {
        if plane.channels() != 1 {
            return Err(Error::contract(
                "DisparityMap",
                format!("expected 1 channel, got {}", plane.channels()),
            ));
        }
        if plane.data().iter().any(|&v| v < 0.0) {
            return Err(Error::contract("DisparityMap", "negative disparity"));
        }
        Ok(Self(plane))
    }

    /// Like [`DisparityMap::new`] and additionally enforces `value <= max`.
    pub fn with_limit(plane: ImagePlane, max: f64) -> Result<Self> {
        let map = Self::new(plane)?;
        if map.max() > max {
            return Err(Error::contract(
                "DisparityMap",
                format!("disparity {} exceeds limit {max}", map.max()),
            ));
        }
        Ok(map)
    }

    pub fn constant(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(ImagePlane::filled(1, height, width, value)?)
    }

    pub fn plane(&self) -> &ImagePlane {
        &self.0
    }

    pub fn into_plane(self) -> ImagePlane {
        self.0
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.0.get(0, y, x)
    }

    pub fn min(&self) -> f64 {
        self.0.tensor().min()
    }

    pub fn max(&self) -> f64 {
        self.0.tensor().max()
    }

    pub fn mean(&self) -> f64 {
        self.0.tensor().mean()
    }
}

/// Intrinsics and extrinsics of a rectified stereo pair needed for metric depth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StereoCalibration {
    /// Horizontal focal length in pixels at native resolution.
    pub focal_px: f64,
    /// Camera separation in meters.
    pub baseline_m: f64,
    pub native_width_px: u32,
}

impl StereoCalibration {
    pub fn new(focal_px: f64, baseline_m: f64, native_width_px: u32) -> Result<Self> {
        let calib = Self {
            focal_px,
            baseline_m,
            native_width_px,
        };
        calib.validate()?;
        Ok(calib)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal_px > 0.0 && self.focal_px.is_finite()) {
            return Err(Error::contract("StereoCalibration", "focal_px must be > 0"));
        }
        if !(self.baseline_m > 0.0 && self.baseline_m.is_finite()) {
            return Err(Error::contract("StereoCalibration", "baseline_m must be > 0"));
        }
        if self.native_width_px == 0 {
            return Err(Error::contract("StereoCalibration", "native_width_px must be > 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarpDirection {
    /// Synthesise the left view from a right-view source: sample at `x - d·W`.
    ToLeft,
    /// Synthesise the right view from a left-view source: sample at `x + d·W`.
    ToRight,
}

impl WarpDirection {
    fn sign(self) -> f64 {
        match self {
            WarpDirection::ToLeft => -1.0,
            WarpDirection::ToRight => 1.0,
        }
    }
}

/// Horizontal bilinear sampler with border clamping.
struct HorizontalWarp {
    sign: f64,
}

struct Tap {
    i0: usize,
    t: f64,
    /// False when the sample position was clamped to the border.
    interior: bool,
}

impl HorizontalWarp {
    fn tap(&self, x: usize, disparity: f64, width: usize) -> Tap {
        let pos = x as f64 + self.sign * disparity * width as f64;
        let last = (width - 1) as f64;
        let p = pos.clamp(0.0, last);
        let i0 = (p.floor() as usize).min(width - 2);
        Tap {
            i0,
            t: p - i0 as f64,
            interior: pos > 0.0 && pos < last,
        }
    }

    fn forward(&self, src: &Tensor, disp: &Tensor) -> Tensor {
        let (c, h, w) = src.dims3();
        let s = src.data();
        let d = disp.data();
        let mut out = vec![0.0; c * h * w];
        for y in 0..h {
            for x in 0..w {
                let tap = self.tap(x, d[y * w + x], w);
                for ch in 0..c {
                    let row = &s[(ch * h + y) * w..(ch * h + y + 1) * w];
                    out[(ch * h + y) * w + x] = (1.0 - tap.t) * row[tap.i0] + tap.t * row[tap.i0 + 1];
                }
            }
        }
        Tensor::new(vec![c, h, w], out).expect("warp shape")
    }
}

impl CustomOp for HorizontalWarp {
    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad: &Tensor) -> Vec<Option<Tensor>> {
        let (src, disp) = (inputs[0], inputs[1]);
        let (c, h, w) = src.dims3();
        let s = src.data();
        let d = disp.data();
        let g = grad.data();
        let mut gs = vec![0.0; c * h * w];
        let mut gd = vec![0.0; h * w];
        let slope = self.sign * w as f64;
        for y in 0..h {
            for x in 0..w {
                let tap = self.tap(x, d[y * w + x], w);
                let mut acc = 0.0;
                for ch in 0..c {
                    let base = (ch * h + y) * w;
                    let gv = g[base + x];
                    gs[base + tap.i0] += gv * (1.0 - tap.t);
                    gs[base + tap.i0 + 1] += gv * tap.t;
                    acc += gv * (s[base + tap.i0 + 1] - s[base + tap.i0]);
                }
                if tap.interior {
                    gd[y * w + x] = acc * slope;
                }
            }
        }
        vec![
            Some(Tensor::new(vec![c, h, w], gs).expect("warp grad shape")),
            Some(Tensor::new(vec![1, h, w], gd).expect("warp grad shape")),
        ]
    }
}

/// Differentiable warp of a recorded `[C, H, W]` source by a `[1, H, W]`
/// disparity.
///
/// # Panics
/// If the spatial sizes differ.
pub fn warp_var(g: &Graph, source: Var, disparity: Var, direction: WarpDirection) -> Var {
    let src = g.value(source);
    let disp = g.value(disparity);
    let (_, h, w) = src.dims3();
    assert_eq!(disp.shape(), &[1, h, w], "warp: disparity shape");
    let op = HorizontalWarp {
        sign: direction.sign(),
    };
    let out = op.forward(&src, &disp);
    g.custom(&[source, disparity], out, op)
}

/// Resamples `source` horizontally by `disparity`, bilinear with border
/// replication.
pub fn warp(source: &ImagePlane, disparity: &DisparityMap, direction: WarpDirection) -> Result<ImagePlane> {
    if !source.same_size(disparity.plane()) {
        return Err(Error::contract(
            "warp",
            format!(
                "source is {}x{}, disparity is {}x{}",
                source.height(),
                source.width(),
                disparity.height(),
                disparity.width()
            ),
        ));
    }
    let op = HorizontalWarp {
        sign: direction.sign(),
    };
    ImagePlane::from_tensor(op.forward(source.tensor(), disparity.plane().tensor()))
}

/// Forward differences `(d/dx, d/dy)`; each is one sample shorter along its axis.
pub fn image_gradients(image: &ImagePlane) -> Result<(Tensor, Tensor)> {
    // ImagePlane already guarantees >= 2 pixels per axis.
    let g = Graph::new();
    let x = g.constant(image.tensor().clone());
    let gx = g.value(g.diff_x(x));
    let gy = g.value(g.diff_y(x));
    Ok((gx.as_ref().clone(), gy.as_ref().clone()))
}

/// Metric depth from disparity; pixels with disparity `<= min_disparity`
/// get the invalid sentinel `0`.
pub fn disparity_to_depth_with(
    disparity: &DisparityMap,
    calib: &StereoCalibration,
    eval_width_px: u32,
    min_disparity: f64,
) -> Result<ImagePlane> {
    calib.validate()?;
    if eval_width_px == 0 {
        return Err(Error::contract("disparity_to_depth", "eval_width_px must be > 0"));
    }
    // Focal length scales with resolution; disparity in pixels scales the same way.
    let focal = calib.focal_px * eval_width_px as f64 / calib.native_width_px as f64;
    let numerator = focal * calib.baseline_m;
    disparity.plane().map(|d| {
        if d <= min_disparity {
            0.0
        } else {
            numerator / (d * eval_width_px as f64)
        }
    })
}

pub fn disparity_to_depth(
    disparity: &DisparityMap,
    calib: &StereoCalibration,
    eval_width_px: u32,
) -> Result<ImagePlane> {
    disparity_to_depth_with(disparity, calib, eval_width_px, DEFAULT_MIN_DISPARITY)
}

/// Inverse of [`disparity_to_depth`]; depth `0` maps to disparity `0`.
pub fn depth_to_disparity(depth_m: &ImagePlane, calib: &StereoCalibration) -> Result<DisparityMap> {
    calib.validate()?;
    if depth_m.channels() != 1 {
        return Err(Error::contract("depth_to_disparity", "depth must have 1 channel"));
    }
    let k = calib.focal_px * calib.baseline_m / calib.native_width_px as f64;
    DisparityMap::new(depth_m.map(|z| if z > 0.0 { k / z } else { 0.0 })?)
}
