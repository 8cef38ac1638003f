//! Procedural rectified stereo scenes with exact ground-truth disparity.
//!
//! A scene is a stack of fronto-parallel textured layers: a background at the
//! far end of the disparity range and a few rectangles or ellipses in front of
//! it. Textures are continuous functions attached to each surface in
//! left-view coordinates, so the right view is rendered exactly by sampling
//! each surface at `x_right + d·W`. Occlusion is resolved per pixel by keeping
//! the nearest (largest-disparity) surface.
//!
//! Layouts carry single-view depth cues: nearer shapes are larger, reach lower
//! in the frame, have coarser texture and less haze.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::png::{write_depth_mm, write_image};
use super::thermal::{simulate_thermal, ThermalParams};
use super::{DatasetManifest, Split, CALIBRATION_FILE};
use crate::geometry::{disparity_to_depth, DisparityMap, ImagePlane, StereoCalibration, DEFAULT_MAX_DISPARITY};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub seed: u64,
    /// Total scenes; the last `round(num_scenes · test_fraction)` form the test split.
    pub num_scenes: usize,
    pub test_fraction: f64,
    pub width: usize,
    pub height: usize,
    pub num_shapes: usize,
    /// `[near-background, nearest]` disparity as a fraction of width.
    pub disparity_range: [f64; 2],
    pub texture_octaves: usize,
    /// Lattice spacing of the coarsest texture octave.
    pub texture_cell_px: f64,
    pub thermal: ThermalParams,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            seed: 0,
            num_scenes: 8,
            test_fraction: 0.25,
            width: 64,
            height: 48,
            num_shapes: 4,
            disparity_range: [0.05, 0.15],
            texture_octaves: 3,
            texture_cell_px: 12.0,
            thermal: ThermalParams::default(),
        }
    }
}

/// Smallest disparity whose synthetic depth still fits the 16-bit millimetre format.
pub const MIN_SYNTH_DISPARITY: f64 = 0.01;

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.num_scenes == 0 {
            return err("num_scenes must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return err(format!("test_fraction must be in [0, 1), got {}", self.test_fraction));
        }
        if self.width < 8 || self.height < 8 {
            return err(format!("scene size {}x{} is below 8x8", self.width, self.height));
        }
        let [lo, hi] = self.disparity_range;
        if !(lo >= MIN_SYNTH_DISPARITY && lo < hi && hi <= DEFAULT_MAX_DISPARITY) {
            return err(format!(
                "disparity_range must satisfy {MIN_SYNTH_DISPARITY} <= lo < hi <= {DEFAULT_MAX_DISPARITY}, got [{lo}, {hi}]"
            ));
        }
        if self.texture_octaves == 0 || !(self.texture_cell_px >= 2.0) {
            return err("texture needs >= 1 octave and a cell of >= 2 px".into());
        }
        self.thermal.validate()
    }

    pub fn num_test_scenes(&self) -> usize {
        (self.num_scenes as f64 * self.test_fraction).round() as usize
    }

    pub fn num_train_scenes(&self) -> usize {
        self.num_scenes - self.num_test_scenes()
    }

    /// Focal length equal to the width and a 0.5 m baseline, so depth is `0.5 / d`.
    pub fn calibration(&self) -> StereoCalibration {
        StereoCalibration {
            focal_px: self.width as f64,
            baseline_m: 0.5,
            native_width_px: self.width as u32,
        }
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hash(parts: &[u64]) -> u64 {
    parts.iter().fold(0x51_7cc1_b727_220a, |h, &p| mix(h ^ p))
}

/// Multi-octave value noise blended between two colours.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Texture {
    pub seed: u64,
    pub low: [f64; 3],
    pub high: [f64; 3],
    pub octaves: usize,
    pub cell_px: f64,
    /// Blend factor towards `fog`.
    pub haze: f64,
    pub fog: [f64; 3],
}

impl Texture {
    fn lattice(&self, octave: usize, ix: i64, iy: i64) -> f64 {
        (hash(&[self.seed, octave as u64, ix as u64, iy as u64]) >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Noise value in `[0, 1]` at a continuous position.
    pub fn noise(&self, x: f64, y: f64) -> f64 {
        let fade = |t: f64| t * t * t * (t * (t * 6.0 - 15.0) + 10.0);
        let mut total = 0.0;
        let mut weight = 0.0;
        let mut amplitude = 1.0;
        let mut cell = self.cell_px;
        for o in 0..self.octaves {
            let (gx, gy) = (x / cell, y / cell);
            let (ix, iy) = (gx.floor() as i64, gy.floor() as i64);
            let (tx, ty) = (fade(gx - ix as f64), fade(gy - iy as f64));
            let top = self.lattice(o, ix, iy) * (1.0 - tx) + self.lattice(o, ix + 1, iy) * tx;
            let bottom = self.lattice(o, ix, iy + 1) * (1.0 - tx) + self.lattice(o, ix + 1, iy + 1) * tx;
            total += amplitude * (top * (1.0 - ty) + bottom * ty);
            weight += amplitude;
            amplitude *= 0.5;
            cell = (cell * 0.5).max(2.0);
        }
        total / weight
    }

    pub fn sample(&self, x: f64, y: f64) -> [f64; 3] {
        let n = self.noise(x, y);
        std::array::from_fn(|c| {
            let v = self.low[c] * (1.0 - n) + self.high[c] * n;
            v * (1.0 - self.haze) + self.fog[c] * self.haze
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Rectangle,
    Ellipse,
}

/// A fronto-parallel surface at constant disparity, in left-view pixels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    pub kind: ShapeKind,
    pub center: [f64; 2],
    pub half_extent: [f64; 2],
    pub disparity: f64,
    pub texture: Texture,
}

impl Shape {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let u = (x - self.center[0]) / self.half_extent[0];
        let v = (y - self.center[1]) / self.half_extent[1];
        match self.kind {
            ShapeKind::Rectangle => u.abs() <= 1.0 && v.abs() <= 1.0,
            ShapeKind::Ellipse => u * u + v * v <= 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneLayout {
    pub width: usize,
    pub height: usize,
    pub background_disparity: f64,
    pub background: Texture,
    pub shapes: Vec<Shape>,
}

/// One rendered scene with exact per-view disparity.
#[derive(Clone, Debug)]
pub struct SyntheticScene {
    pub vis_left: ImagePlane,
    pub vis_right: ImagePlane,
    pub tir_left: ImagePlane,
    pub tir_right: ImagePlane,
    pub disparity_left: DisparityMap,
    pub disparity_right: DisparityMap,
    /// Metric depth of the left view under [`SynthParams::calibration`].
    pub depth_left: ImagePlane,
}

const FOG: [f64; 3] = [0.72, 0.76, 0.82];

const FAR_LOW: [f64; 3] = [0.05, 0.12, 0.4];
const FAR_HIGH: [f64; 3] = [0.45, 0.7, 1.0];
const NEAR_LOW: [f64; 3] = [0.4, 0.12, 0.05];
const NEAR_HIGH: [f64; 3] = [1.0, 0.7, 0.45];

/// Texture whose palette shifts from cool to warm with nearness `t`.
fn random_texture(rng: &mut ChaCha8Rng, octaves: usize, cell_px: f64, t: f64) -> Texture {
    let mut pick = |far: [f64; 3], near: [f64; 3]| -> [f64; 3] {
        std::array::from_fn(|c| (far[c] + t * (near[c] - far[c]) + rng.random_range(-0.08..0.08)).clamp(0.0, 1.0))
    };
    let low = pick(FAR_LOW, NEAR_LOW);
    let high = pick(FAR_HIGH, NEAR_HIGH);
    let (low, high) = if rng.random_bool(0.5) { (low, high) } else { (high, low) };
    Texture {
        seed: rng.random(),
        low,
        high,
        octaves,
        cell_px,
        haze: 0.15 * (1.0 - t),
        fog: FOG,
    }
}

/// Samples the layout of scene `index`; depends only on `(params, index)`.
pub fn sample_layout(params: &SynthParams, index: usize) -> SceneLayout {
    let mut rng = ChaCha8Rng::seed_from_u64(hash(&[params.seed, index as u64, 0x5ce7e]));
    let (w, h) = (params.width as f64, params.height as f64);
    let [lo, hi] = params.disparity_range;
    let horizon = 0.35 * h;
    let cell = params.texture_cell_px;
    let background = random_texture(&mut rng, params.texture_octaves, 0.5 * cell, 0.0);
    let shapes = (0..params.num_shapes)
        .map(|_| {
            // Nearness in [0, 1] drives every cue.
            let t: f64 = rng.random();
            let bottom = horizon + t * (h - horizon) + rng.random_range(-0.04..0.04) * h;
            let half_y = (0.1 + 0.25 * t) * h * rng.random_range(0.8..1.2);
            let half_x = half_y * rng.random_range(0.6..1.6);
            Shape {
                kind: if rng.random_bool(0.5) {
                    ShapeKind::Rectangle
                } else {
                    ShapeKind::Ellipse
                },
                center: [rng.random_range(0.0..w), bottom - half_y],
                half_extent: [half_x, half_y],
                disparity: lo + t * (hi - lo),
                texture: random_texture(&mut rng, params.texture_octaves, (0.5 + t) * cell, t),
            }
        })
        .collect();
    SceneLayout {
        width: params.width,
        height: params.height,
        background_disparity: lo,
        background,
        shapes,
    }
}

/// Renders one view: the image and its disparity map.
pub fn render_view(layout: &SceneLayout, right_view: bool) -> Result<(ImagePlane, DisparityMap)> {
    let (w, h) = (layout.width, layout.height);
    let mut rgb = vec![0.0; 3 * h * w];
    let mut disp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let (yf, xf) = (y as f64, x as f64);
            // Left-view coordinate of the surface point seen at this pixel.
            let surface_x = |d: f64| if right_view { xf + d * w as f64 } else { xf };
            let mut best: (f64, &Texture) = (layout.background_disparity, &layout.background);
            for s in &layout.shapes {
                if s.disparity >= best.0 && s.contains(surface_x(s.disparity), yf) {
                    best = (s.disparity, &s.texture);
                }
            }
            let (d, tex) = best;
            let colour = tex.sample(surface_x(d), yf);
            for c in 0..3 {
                rgb[(c * h + y) * w + x] = colour[c];
            }
            disp[y * w + x] = d;
        }
    }
    Ok((
        ImagePlane::new(3, h, w, rgb)?,
        DisparityMap::new(ImagePlane::new(1, h, w, disp)?)?,
    ))
}

/// Renders a layout into a full scene; thermal noise is seeded by `seed`.
pub fn render_scene(layout: &SceneLayout, thermal: &ThermalParams, seed: u64) -> Result<SyntheticScene> {
    let (vis_left, disparity_left) = render_view(layout, false)?;
    let (vis_right, disparity_right) = render_view(layout, true)?;
    let calib = StereoCalibration {
        focal_px: layout.width as f64,
        baseline_m: 0.5,
        native_width_px: layout.width as u32,
    };
    Ok(SyntheticScene {
        tir_left: simulate_thermal(&vis_left, thermal, hash(&[seed, 1]))?,
        tir_right: simulate_thermal(&vis_right, thermal, hash(&[seed, 2]))?,
        depth_left: disparity_to_depth(&disparity_left, &calib, layout.width as u32)?,
        vis_left,
        vis_right,
        disparity_left,
        disparity_right,
    })
}

pub fn generate_scene(params: &SynthParams, index: usize) -> Result<SyntheticScene> {
    params.validate()?;
    let layout = sample_layout(params, index);
    render_scene(&layout, &params.thermal, hash(&[params.seed, index as u64, 0x7e4a1]))
}

/// Train and test scenes in memory.
pub fn generate_scenes(params: &SynthParams) -> Result<(Vec<SyntheticScene>, Vec<SyntheticScene>)> {
    params.validate()?;
    let n_train = params.num_train_scenes();
    let train = (0..n_train).map(|i| generate_scene(params, i)).collect::<Result<_>>()?;
    let test = (n_train..params.num_scenes)
        .map(|i| generate_scene(params, i))
        .collect::<Result<_>>()?;
    Ok((train, test))
}

/// Manifests of a generated on-disk corpus.
#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub train: DatasetManifest,
    pub test: DatasetManifest,
}

/// Writes a corpus in the standard dataset layout under `out_root`.
pub fn generate_synthetic_dataset(params: &SynthParams, out_root: &Path) -> Result<SyntheticCorpus> {
    params.validate()?;
    fs::create_dir_all(out_root).map_err(|e| Error::io(out_root, e))?;
    let calib = params.calibration();
    let calib_path = out_root.join(CALIBRATION_FILE);
    let text = toml::to_string(&calib).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(&calib_path, text).map_err(|e| Error::io(&calib_path, e))?;
    let params_path = out_root.join("synth_params.json");
    let json = serde_json::to_string_pretty(params).expect("params serialise");
    fs::write(&params_path, json).map_err(|e| Error::io(&params_path, e))?;

    let n_train = params.num_train_scenes();
    for i in 0..params.num_scenes {
        let scene = generate_scene(params, i)?;
        let (split, local) = if i < n_train { (Split::Train, i) } else { (Split::Test, i - n_train) };
        let dir = out_root.join(split.dir_name());
        let file = format!("{local:06}.png");
        let at = |kind: &str| -> PathBuf { dir.join(kind).join(&file) };
        write_image(&scene.tir_left, &at("tir_left"))?;
        write_image(&scene.vis_right, &at("vis_right"))?;
        write_image(&scene.vis_left, &at("vis_left"))?;
        write_image(&scene.tir_right, &at("tir_right"))?;
        write_depth_mm(&scene.depth_left, &at("depth"))?;
    }
    Ok(SyntheticCorpus {
        train: DatasetManifest::discover(out_root, Split::Train)?,
        test: DatasetManifest::discover(out_root, Split::Test)?,
    })
}
