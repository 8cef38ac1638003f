use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::ImagePlane;
use crate::{Error, Result};

/// Appearance change applied to a visible image to imitate a thermal camera.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThermalParams {
    pub invert: bool,
    pub blur_sigma_px: f64,
    pub contrast_gamma: f64,
    pub noise_std: f64,
}

impl Default for ThermalParams {
    fn default() -> Self {
        Self {
            invert: true,
            blur_sigma_px: 1.0,
            contrast_gamma: 0.7,
            noise_std: 0.02,
        }
    }
}

impl ThermalParams {
    /// Pure luminance conversion.
    pub fn identity() -> Self {
        Self {
            invert: false,
            blur_sigma_px: 0.0,
            contrast_gamma: 1.0,
            noise_std: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.blur_sigma_px >= 0.0 && self.blur_sigma_px.is_finite()) {
            return Err(Error::Config(format!("blur_sigma_px must be >= 0, got {}", self.blur_sigma_px)));
        }
        if !(self.contrast_gamma > 0.0 && self.contrast_gamma.is_finite()) {
            return Err(Error::Config(format!("contrast_gamma must be > 0, got {}", self.contrast_gamma)));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config(format!("noise_std must be >= 0, got {}", self.noise_std)));
        }
        Ok(())
    }
}

/// Normalised discrete Gaussian of radius `ceil(3σ)`; `[1.0]` for `σ = 0`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Separable Gaussian blur of every channel with border replication.
pub fn gaussian_blur(plane: &ImagePlane, sigma: f64) -> Result<ImagePlane> {
    let kernel = gaussian_kernel(sigma);
    if kernel.len() == 1 {
        return Ok(plane.clone());
    }
    let r = (kernel.len() / 2) as i64;
    let (c, h, w) = plane.dims();
    let clamp = |i: i64, n: usize| i.clamp(0, n as i64 - 1) as usize;
    let mut tmp = vec![0.0; c * h * w];
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                tmp[(ch * h + y) * w + x] = kernel
                    .iter()
                    .enumerate()
                    .map(|(k, wt)| wt * plane.get(ch, y, clamp(x as i64 + k as i64 - r, w)))
                    .sum();
            }
        }
    }
    let mut out = vec![0.0; c * h * w];
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                out[(ch * h + y) * w + x] = kernel
                    .iter()
                    .enumerate()
                    .map(|(k, wt)| wt * tmp[(ch * h + clamp(y as i64 + k as i64 - r, h)) * w + x])
                    .sum();
            }
        }
    }
    ImagePlane::new(c, h, w, out)
}

/// Rec. 601 luma of a 3-channel plane.
pub fn luminance(vis: &ImagePlane) -> Result<ImagePlane> {
    if vis.channels() != 3 {
        return Err(Error::contract(
            "luminance",
            format!("expected 3 channels, got {}", vis.channels()),
        ));
    }
    ImagePlane::from_fn(1, vis.height(), vis.width(), |_, y, x| {
        0.299 * vis.get(0, y, x) + 0.587 * vis.get(1, y, x) + 0.114 * vis.get(2, y, x)
    })
}

/// Luminance, optional inversion, blur, gamma and seeded additive noise
/// clipped to `[0, 1]`.
pub fn simulate_thermal(vis: &ImagePlane, params: &ThermalParams, seed: u64) -> Result<ImagePlane> {
    if vis.channels() != 3 {
        return Err(Error::contract(
            "simulate_thermal",
            format!("expected 3 channels, got {}", vis.channels()),
        ));
    }
    params.validate()?;
    let mut t = luminance(vis)?;
    if params.invert {
        t = t.map(|v| 1.0 - v)?;
    }
    t = gaussian_blur(&t, params.blur_sigma_px)?;
    if params.contrast_gamma != 1.0 {
        t = t.map(|v| v.clamp(0.0, 1.0).powf(params.contrast_gamma))?;
    }
    if params.noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, params.noise_std).expect("finite std");
        let data = t.data().iter().map(|v| (v + normal.sample(&mut rng)).clamp(0.0, 1.0)).collect();
        t = ImagePlane::new(1, t.height(), t.width(), data)?;
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_is_normalised_and_symmetric() {
        for sigma in [0.5, 1.0, 2.0, 3.3] {
            let k = gaussian_kernel(sigma);
            assert_eq!(k.len(), 2 * (3.0f64 * sigma).ceil() as usize + 1);
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for i in 0..k.len() / 2 {
                assert_eq!(k[i], k[k.len() - 1 - i]);
            }
        }
    }

    #[test]
    fn rejects_bad_params() {
        let bad = ThermalParams {
            contrast_gamma: 0.0,
            ..ThermalParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
