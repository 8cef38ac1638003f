//! Training objectives.
//!
//! Every term exists twice: a differentiable form that records onto a
//! [`Graph`] (used by training and gradient checks), and a plain function
//! over planes that validates its inputs and returns a scalar.

use std::collections::BTreeMap;

use crossdepth_autograd::{Graph, Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::geometry::{warp_var, DisparityMap, ImagePlane, WarpDirection};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    /// SSIM share of the photometric loss.
    pub alpha: f64,
    pub lambda_s: f64,
    pub lambda_lr: f64,
    pub lambda_v: f64,
    pub lambda_ms: f64,
    pub lambda_cyc: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 0.85,
            lambda_s: 0.1,
            lambda_lr: 1.0,
            lambda_v: 1.0,
            lambda_ms: 1.0,
            lambda_cyc: 10.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha must be in [0, 1], got {}", self.alpha)));
        }
        for (name, v) in [
            ("lambda_s", self.lambda_s),
            ("lambda_lr", self.lambda_lr),
            ("lambda_v", self.lambda_v),
            ("lambda_ms", self.lambda_ms),
            ("lambda_cyc", self.lambda_cyc),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SsimConfig {
    /// Side of the square block filter.
    pub window: usize,
    pub c1: f64,
    pub c2: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self {
            window: 3,
            c1: 0.01 * 0.01,
            c2: 0.03 * 0.03,
        }
    }
}

impl SsimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::Config(format!("SSIM window must be odd and >= 3, got {}", self.window)));
        }
        if !(self.c1 > 0.0 && self.c2 > 0.0) {
            return Err(Error::Config("SSIM stabilisers must be positive".into()));
        }
        Ok(())
    }
}

/// Generator side of the adversarial objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorLoss {
    /// `-log σ(fake)`.
    #[default]
    NonSaturating,
    /// `log(1 - σ(fake))`, the literal minimax form; negative-valued.
    Saturating,
}

/// Named loss terms of one evaluation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LossBreakdown(BTreeMap<String, f64>);

impl LossBreakdown {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: f64) {
        self.0.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    /// # Panics
    /// If the term is missing.
    pub fn value(&self, name: &str) -> f64 {
        self.get(name).unwrap_or_else(|| panic!("loss term {name} missing"))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn extend(&mut self, other: &LossBreakdown) {
        for (k, v) in other.iter() {
            self.insert(k, v);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.0.values().all(|v| v.is_finite())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::fmt::Display for LossBreakdown {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut first = true;
        for (k, v) in self.iter() {
            if !first {
                write!(f, " ")?;
            }
            first = false;
            write!(f, "{k}={v:.6}")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Differentiable forms
// ---------------------------------------------------------------------------

/// Per-pixel SSIM over the valid region of a `window × window` box filter.
pub fn ssim_var(g: &Graph, a: Var, b: Var, cfg: &SsimConfig) -> Var {
    let k = cfg.window;
    let mu_a = g.box_filter(a, k);
    let mu_b = g.box_filter(b, k);
    let mu_ab = g.mul(mu_a, mu_b);
    let mu_a2 = g.square(mu_a);
    let mu_b2 = g.square(mu_b);
    let var_a = g.sub(g.box_filter(g.square(a), k), mu_a2);
    let var_b = g.sub(g.box_filter(g.square(b), k), mu_b2);
    let cov = g.sub(g.box_filter(g.mul(a, b), k), mu_ab);

    let num = g.mul(g.affine(mu_ab, 2.0, cfg.c1), g.affine(cov, 2.0, cfg.c2));
    let den = g.mul(
        g.add_scalar(g.add(mu_a2, mu_b2), cfg.c1),
        g.add_scalar(g.add(var_a, var_b), cfg.c2),
    );
    g.div(num, den)
}

pub fn photometric_var(g: &Graph, target: Var, reprojected: Var, alpha: f64, cfg: &SsimConfig) -> Var {
    let ssim = ssim_var(g, target, reprojected, cfg);
    let ssim_term = g.mean(g.affine(ssim, -0.5, 0.5));
    let l1_term = g.mean(g.abs(g.sub(target, reprojected)));
    g.add(g.scale(ssim_term, alpha), g.scale(l1_term, 1.0 - alpha))
}

/// Edge-aware first-order smoothness of `disparity` guided by `image`.
pub fn smoothness_var(g: &Graph, disparity: Var, image: Var) -> Var {
    let weight = |d: Var| g.exp(g.neg(g.channel_mean(g.abs(d))));
    let term_x = g.mul(g.abs(g.diff_x(disparity)), weight(g.diff_x(image)));
    let term_y = g.mul(g.abs(g.diff_y(disparity)), weight(g.diff_y(image)));
    g.add(g.mean(term_x), g.mean(term_y))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StereoSide {
    Left,
    Right,
}

/// Left-right consistency for one view: `mean |d_self - ω(d_other, d_self)|`.
pub fn lr_consistency_var(g: &Graph, d_left: Var, d_right: Var, side: StereoSide) -> Var {
    let (own, other, dir) = match side {
        StereoSide::Left => (d_left, d_right, WarpDirection::ToLeft),
        StereoSide::Right => (d_right, d_left, WarpDirection::ToRight),
    };
    let projected = warp_var(g, other, own, dir);
    g.mean(g.abs(g.sub(own, projected)))
}

fn mean_over(g: &Graph, terms: &[Var]) -> Var {
    assert!(!terms.is_empty());
    let mut acc = terms[0];
    for &t in &terms[1..] {
        acc = g.add(acc, t);
    }
    g.scale(acc, 1.0 / terms.len() as f64)
}

/// Generator objective averaged over scales and patches.
pub fn generator_var(g: &Graph, fake_logits: &[Var], mode: GeneratorLoss) -> Var {
    let per_scale: Vec<Var> = fake_logits
        .iter()
        .map(|&f| match mode {
            GeneratorLoss::NonSaturating => g.mean(g.softplus(g.neg(f))),
            GeneratorLoss::Saturating => g.neg(g.mean(g.softplus(f))),
        })
        .collect();
    mean_over(g, &per_scale)
}

/// Discriminator objective `-[log σ(real) + log(1 - σ(fake))]`, averaged over
/// scales and patches.
pub fn discriminator_var(g: &Graph, real_logits: &[Var], fake_logits: &[Var]) -> Var {
    assert_eq!(real_logits.len(), fake_logits.len());
    let per_scale: Vec<Var> = real_logits
        .iter()
        .zip(fake_logits)
        .map(|(&r, &f)| g.add(g.mean(g.softplus(g.neg(r))), g.mean(g.softplus(f))))
        .collect();
    mean_over(g, &per_scale)
}

fn mean_abs_diff(g: &Graph, a: Var, b: Var) -> Var {
    g.mean(g.abs(g.sub(a, b)))
}

pub fn reconstruction_var(g: &Graph, recon_tir_left: Var, tir_left: Var, recon_vis_right: Var, vis_right: Var) -> Var {
    g.add(
        mean_abs_diff(g, recon_tir_left, tir_left),
        mean_abs_diff(g, recon_vis_right, vis_right),
    )
}

/// Cross-spectrum reconstructions compared against the opposite-view real
/// image warped into their view.
///
/// `cross_tir_right` is the TIR reconstruction from right-view features and
/// is compared with `ω(tir_left, d_right → right)`; `cross_vis_left` is the VIS
/// reconstruction from left-view features, compared with `ω(vis_right, d_left → left)`.
pub fn warp_reconstruction_var(
    g: &Graph,
    cross_tir_right: Var,
    cross_vis_left: Var,
    tir_left: Var,
    vis_right: Var,
    d_left: Var,
    d_right: Var,
) -> Var {
    let tir_at_right = warp_var(g, tir_left, d_right, WarpDirection::ToRight);
    let vis_at_left = warp_var(g, vis_right, d_left, WarpDirection::ToLeft);
    g.add(
        mean_abs_diff(g, cross_tir_right, tir_at_right),
        mean_abs_diff(g, cross_vis_left, vis_at_left),
    )
}

pub fn cycle_var(g: &Graph, d_left: Var, d_right: Var, d_left_hat: Var, d_right_hat: Var) -> Var {
    g.add(mean_abs_diff(g, d_left, d_left_hat), mean_abs_diff(g, d_right, d_right_hat))
}

/// Components of the stereo objective, each averaged over disparity scales.
#[derive(Clone, Copy, Debug)]
pub struct StereoTerms {
    pub p_l: Var,
    pub p_r: Var,
    pub s_l: Var,
    pub s_r: Var,
    pub lr_l: Var,
    pub lr_r: Var,
    pub total: Var,
}

impl StereoTerms {
    pub fn breakdown(&self, g: &Graph, prefix: &str) -> LossBreakdown {
        let mut b = LossBreakdown::new();
        for (name, v) in [
            ("p_l", self.p_l),
            ("p_r", self.p_r),
            ("s_l", self.s_l),
            ("s_r", self.s_r),
            ("lr_l", self.lr_l),
            ("lr_r", self.lr_r),
        ] {
            b.insert(format!("{prefix}{name}"), g.value(v).item());
        }
        b
    }
}

/// Scale-averaged smoothness and left-right terms shared by both stereo objectives.
fn regularisers(g: &Graph, left: Var, right: Var, scales: &[(Var, Var)]) -> (Var, Var, Var, Var) {
    let s_l: Vec<Var> = scales.iter().map(|&(dl, _)| smoothness_var(g, dl, left)).collect();
    let s_r: Vec<Var> = scales.iter().map(|&(_, dr)| smoothness_var(g, dr, right)).collect();
    let lr_l: Vec<Var> = scales
        .iter()
        .map(|&(dl, dr)| lr_consistency_var(g, dl, dr, StereoSide::Left))
        .collect();
    let lr_r: Vec<Var> = scales
        .iter()
        .map(|&(dl, dr)| lr_consistency_var(g, dl, dr, StereoSide::Right))
        .collect();
    (
        mean_over(g, &s_l),
        mean_over(g, &s_r),
        mean_over(g, &lr_l),
        mean_over(g, &lr_r),
    )
}

/// VIS stereo objective over full-resolution disparity scales.
pub fn vis_total_var(
    g: &Graph,
    left: Var,
    right: Var,
    scales: &[(Var, Var)],
    w: &LossWeights,
    cfg: &SsimConfig,
) -> StereoTerms {
    assert!(!scales.is_empty(), "at least one disparity scale");
    let p_l: Vec<Var> = scales
        .iter()
        .map(|&(dl, _)| photometric_var(g, left, warp_var(g, right, dl, WarpDirection::ToLeft), w.alpha, cfg))
        .collect();
    let p_r: Vec<Var> = scales
        .iter()
        .map(|&(_, dr)| photometric_var(g, right, warp_var(g, left, dr, WarpDirection::ToRight), w.alpha, cfg))
        .collect();
    let p_l = mean_over(g, &p_l);
    let p_r = mean_over(g, &p_r);
    let (s_l, s_r, lr_l, lr_r) = regularisers(g, left, right, scales);
    let total = g.add(
        g.add(p_l, p_r),
        g.add(
            g.scale(g.add(s_l, s_r), w.lambda_s),
            g.scale(g.add(lr_l, lr_r), w.lambda_lr),
        ),
    );
    StereoTerms {
        p_l,
        p_r,
        s_l,
        s_r,
        lr_l,
        lr_r,
        total,
    }
}

/// Recorded inputs of the cross-spectrum objective.
#[derive(Clone, Debug)]
pub struct CrossSpectrumVars {
    pub tir_left: Var,
    pub vis_right: Var,
    /// Full-resolution `(d_left, d_right)` per disparity scale, finest first.
    pub scales: Vec<(Var, Var)>,
    pub fake_logits: Vec<Var>,
    /// `R_T(f^l_T)`.
    pub recon_tir_left: Var,
    /// `R_V(f^r_T)`.
    pub recon_vis_right: Var,
    /// `R_T(f^r_T)`.
    pub cross_tir_right: Var,
    /// `R_V(f^l_T)`.
    pub cross_vis_left: Var,
}

#[derive(Clone, Copy, Debug)]
pub struct CrossSpectrumTerms {
    pub gan_g: Var,
    pub rec: Var,
    pub wrec: Var,
    /// `gan_g + rec + wrec`.
    pub tr: Var,
    pub s_l: Var,
    pub s_r: Var,
    pub lr_l: Var,
    pub lr_r: Var,
    /// `tr + λ_s (s_l + s_r) + λ_lr (lr_l + lr_r)`.
    pub ms: Var,
}

impl CrossSpectrumTerms {
    pub fn breakdown(&self, g: &Graph) -> LossBreakdown {
        let mut b = LossBreakdown::new();
        for (name, v) in [
            ("gan_g", self.gan_g),
            ("rec", self.rec),
            ("wrec", self.wrec),
            ("tr", self.tr),
            ("ms_s_l", self.s_l),
            ("ms_s_r", self.s_r),
            ("ms_lr_l", self.lr_l),
            ("ms_lr_r", self.lr_r),
            ("ms", self.ms),
        ] {
            b.insert(name, g.value(v).item());
        }
        b
    }
}

pub fn cross_spectrum_var(
    g: &Graph,
    inputs: &CrossSpectrumVars,
    generator: GeneratorLoss,
    w: &LossWeights,
) -> CrossSpectrumTerms {
    assert!(!inputs.scales.is_empty(), "at least one disparity scale");
    let gan_g = generator_var(g, &inputs.fake_logits, generator);
    let rec = reconstruction_var(
        g,
        inputs.recon_tir_left,
        inputs.tir_left,
        inputs.recon_vis_right,
        inputs.vis_right,
    );
    let wrec: Vec<Var> = inputs
        .scales
        .iter()
        .map(|&(dl, dr)| {
            warp_reconstruction_var(
                g,
                inputs.cross_tir_right,
                inputs.cross_vis_left,
                inputs.tir_left,
                inputs.vis_right,
                dl,
                dr,
            )
        })
        .collect();
    let wrec = mean_over(g, &wrec);
    let tr = g.add(g.add(gan_g, rec), wrec);
    let (s_l, s_r, lr_l, lr_r) = regularisers(g, inputs.tir_left, inputs.vis_right, &inputs.scales);
    let ms = g.add(
        tr,
        g.add(
            g.scale(g.add(s_l, s_r), w.lambda_s),
            g.scale(g.add(lr_l, lr_r), w.lambda_lr),
        ),
    );
    CrossSpectrumTerms {
        gan_g,
        rec,
        wrec,
        tr,
        s_l,
        s_r,
        lr_l,
        lr_r,
        ms,
    }
}

// ---------------------------------------------------------------------------
// Plain scalar forms
// ---------------------------------------------------------------------------

fn same_shape(op: &'static str, a: &ImagePlane, b: &ImagePlane) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::contract(op, format!("shape {:?} vs {:?}", a.dims(), b.dims())));
    }
    Ok(())
}

fn same_size(op: &'static str, a: &ImagePlane, b: &ImagePlane) -> Result<()> {
    if !a.same_size(b) {
        return Err(Error::contract(
            op,
            format!("size {}x{} vs {}x{}", a.height(), a.width(), b.height(), b.width()),
        ));
    }
    Ok(())
}

fn constant(g: &Graph, p: &ImagePlane) -> Var {
    g.constant(p.tensor().clone())
}

fn scalar(g: &Graph, v: Var) -> f64 {
    g.value(v).item()
}

/// Per-pixel SSIM; the output is `window - 1` pixels smaller on each axis.
pub fn ssim_map(a: &ImagePlane, b: &ImagePlane, cfg: &SsimConfig) -> Result<Tensor> {
    same_shape("ssim_map", a, b)?;
    cfg.validate()?;
    if a.height() < cfg.window || a.width() < cfg.window {
        return Err(Error::contract("ssim_map", "image smaller than the SSIM window"));
    }
    let g = Graph::new();
    let v = ssim_var(&g, constant(&g, a), constant(&g, b), cfg);
    Ok(g.value(v).as_ref().clone())
}

pub fn photometric_loss(target: &ImagePlane, reprojected: &ImagePlane, w: &LossWeights, cfg: &SsimConfig) -> Result<f64> {
    same_shape("photometric_loss", target, reprojected)?;
    w.validate()?;
    cfg.validate()?;
    if target.height() < cfg.window || target.width() < cfg.window {
        return Err(Error::contract("photometric_loss", "image smaller than the SSIM window"));
    }
    let g = Graph::new();
    let v = photometric_var(&g, constant(&g, target), constant(&g, reprojected), w.alpha, cfg);
    Ok(scalar(&g, v))
}

pub fn smoothness_loss(disparity: &DisparityMap, image: &ImagePlane) -> Result<f64> {
    same_size("smoothness_loss", disparity.plane(), image)?;
    let g = Graph::new();
    let v = smoothness_var(&g, constant(&g, disparity.plane()), constant(&g, image));
    Ok(scalar(&g, v))
}

pub fn lr_consistency_loss(d_left: &DisparityMap, d_right: &DisparityMap, side: StereoSide) -> Result<f64> {
    same_shape("lr_consistency_loss", d_left.plane(), d_right.plane())?;
    let g = Graph::new();
    let v = lr_consistency_var(&g, constant(&g, d_left.plane()), constant(&g, d_right.plane()), side);
    Ok(scalar(&g, v))
}

/// A rectified stereo pair of images.
#[derive(Clone, Copy, Debug)]
pub struct StereoPair<'a> {
    pub left: &'a ImagePlane,
    pub right: &'a ImagePlane,
}

/// VIS stereo objective; `disparities` are full-resolution `(left, right)`
/// maps per scale. The breakdown holds `p_l, p_r, s_l, s_r, lr_l, lr_r, total`.
pub fn vis_total_loss(
    pair: StereoPair<'_>,
    disparities: &[(DisparityMap, DisparityMap)],
    w: &LossWeights,
    cfg: &SsimConfig,
) -> Result<LossBreakdown> {
    same_shape("vis_total_loss", pair.left, pair.right)?;
    if disparities.is_empty() {
        return Err(Error::contract("vis_total_loss", "no disparity scales"));
    }
    for (dl, dr) in disparities {
        same_size("vis_total_loss", dl.plane(), pair.left)?;
        same_size("vis_total_loss", dr.plane(), pair.left)?;
    }
    w.validate()?;
    cfg.validate()?;
    let g = Graph::new();
    let scales: Vec<(Var, Var)> = disparities
        .iter()
        .map(|(dl, dr)| (constant(&g, dl.plane()), constant(&g, dr.plane())))
        .collect();
    let terms = vis_total_var(&g, constant(&g, pair.left), constant(&g, pair.right), &scales, w, cfg);
    let mut b = terms.breakdown(&g, "");
    b.insert("total", scalar(&g, terms.total));
    Ok(b)
}

fn check_logits(op: &'static str, real: &[Tensor], fake: &[Tensor]) -> Result<()> {
    if real.is_empty() || fake.is_empty() {
        return Err(Error::contract(op, "empty logit list"));
    }
    if real.len() != fake.len() {
        return Err(Error::contract(op, format!("{} real vs {} fake scales", real.len(), fake.len())));
    }
    if real.iter().chain(fake).any(|t| t.is_empty() || !t.all_finite()) {
        return Err(Error::contract(op, "empty or non-finite logits"));
    }
    Ok(())
}

/// `(generator loss, discriminator loss)` for per-scale patch logits.
pub fn adversarial_losses(real_logits: &[Tensor], fake_logits: &[Tensor], mode: GeneratorLoss) -> Result<(f64, f64)> {
    check_logits("adversarial_losses", real_logits, fake_logits)?;
    let g = Graph::new();
    let real: Vec<Var> = real_logits.iter().map(|t| g.constant(t.clone())).collect();
    let fake: Vec<Var> = fake_logits.iter().map(|t| g.constant(t.clone())).collect();
    let gen = generator_var(&g, &fake, mode);
    let disc = discriminator_var(&g, &real, &fake);
    Ok((scalar(&g, gen), scalar(&g, disc)))
}

pub fn reconstruction_loss(
    recon_tir_left: &ImagePlane,
    tir_left: &ImagePlane,
    recon_vis_right: &ImagePlane,
    vis_right: &ImagePlane,
) -> Result<f64> {
    same_shape("reconstruction_loss", recon_tir_left, tir_left)?;
    same_shape("reconstruction_loss", recon_vis_right, vis_right)?;
    let g = Graph::new();
    let v = reconstruction_var(
        &g,
        constant(&g, recon_tir_left),
        constant(&g, tir_left),
        constant(&g, recon_vis_right),
        constant(&g, vis_right),
    );
    Ok(scalar(&g, v))
}

/// Cross reconstructions of a TIR-left / VIS-right pair.
#[derive(Clone, Copy, Debug)]
pub struct CrossReconstructions<'a> {
    /// TIR-style image decoded from right-view (VIS) features.
    pub tir_right: &'a ImagePlane,
    /// VIS-style image decoded from left-view (TIR) features.
    pub vis_left: &'a ImagePlane,
}

pub fn warp_reconstruction_loss(
    cross: CrossReconstructions<'_>,
    tir_left: &ImagePlane,
    vis_right: &ImagePlane,
    d_left: &DisparityMap,
    d_right: &DisparityMap,
) -> Result<f64> {
    same_shape("warp_reconstruction_loss", cross.tir_right, tir_left)?;
    same_shape("warp_reconstruction_loss", cross.vis_left, vis_right)?;
    same_size("warp_reconstruction_loss", tir_left, vis_right)?;
    same_size("warp_reconstruction_loss", d_left.plane(), tir_left)?;
    same_size("warp_reconstruction_loss", d_right.plane(), tir_left)?;
    let g = Graph::new();
    let v = warp_reconstruction_var(
        &g,
        constant(&g, cross.tir_right),
        constant(&g, cross.vis_left),
        constant(&g, tir_left),
        constant(&g, vis_right),
        constant(&g, d_left.plane()),
        constant(&g, d_right.plane()),
    );
    Ok(scalar(&g, v))
}

/// Everything the cross-spectrum objective consumes.
#[derive(Clone, Copy, Debug)]
pub struct CrossSpectrumInputs<'a> {
    pub tir_left: &'a ImagePlane,
    pub vis_right: &'a ImagePlane,
    pub disparities: &'a [(DisparityMap, DisparityMap)],
    pub fake_logits: &'a [Tensor],
    pub recon_tir_left: &'a ImagePlane,
    pub recon_vis_right: &'a ImagePlane,
    pub cross: CrossReconstructions<'a>,
    pub generator: GeneratorLoss,
}

/// Feature-transfer and cross-spectrum stereo objective. The breakdown holds
/// `gan_g, rec, wrec, tr, ms_s_l, ms_s_r, ms_lr_l, ms_lr_r, ms`.
pub fn cross_spectrum_loss(inputs: &CrossSpectrumInputs<'_>, w: &LossWeights) -> Result<LossBreakdown> {
    let op = "cross_spectrum_loss";
    same_size(op, inputs.tir_left, inputs.vis_right)?;
    same_shape(op, inputs.recon_tir_left, inputs.tir_left)?;
    same_shape(op, inputs.recon_vis_right, inputs.vis_right)?;
    same_shape(op, inputs.cross.tir_right, inputs.tir_left)?;
    same_shape(op, inputs.cross.vis_left, inputs.vis_right)?;
    if inputs.disparities.is_empty() {
        return Err(Error::contract(op, "no disparity scales"));
    }
    for (dl, dr) in inputs.disparities {
        same_size(op, dl.plane(), inputs.tir_left)?;
        same_size(op, dr.plane(), inputs.tir_left)?;
    }
    check_logits(op, inputs.fake_logits, inputs.fake_logits)?;
    w.validate()?;

    let g = Graph::new();
    let vars = CrossSpectrumVars {
        tir_left: constant(&g, inputs.tir_left),
        vis_right: constant(&g, inputs.vis_right),
        scales: inputs
            .disparities
            .iter()
            .map(|(dl, dr)| (constant(&g, dl.plane()), constant(&g, dr.plane())))
            .collect(),
        fake_logits: inputs.fake_logits.iter().map(|t| g.constant(t.clone())).collect(),
        recon_tir_left: constant(&g, inputs.recon_tir_left),
        recon_vis_right: constant(&g, inputs.recon_vis_right),
        cross_tir_right: constant(&g, inputs.cross.tir_right),
        cross_vis_left: constant(&g, inputs.cross.vis_left),
    };
    let terms = cross_spectrum_var(&g, &vars, inputs.generator, w);
    Ok(terms.breakdown(&g))
}

pub fn cycle_consistency_loss(
    d_left: &DisparityMap,
    d_right: &DisparityMap,
    d_left_hat: &DisparityMap,
    d_right_hat: &DisparityMap,
) -> Result<f64> {
    let op = "cycle_consistency_loss";
    same_shape(op, d_left.plane(), d_right.plane())?;
    same_shape(op, d_left.plane(), d_left_hat.plane())?;
    same_shape(op, d_left.plane(), d_right_hat.plane())?;
    let g = Graph::new();
    let v = cycle_var(
        &g,
        constant(&g, d_left.plane()),
        constant(&g, d_right.plane()),
        constant(&g, d_left_hat.plane()),
        constant(&g, d_right_hat.plane()),
    );
    Ok(scalar(&g, v))
}

/// `λ_v L_v + λ_ms L_ms + λ_cyc L_cyc`.
pub fn total_loss(l_v: f64, l_ms: f64, l_cyc: f64, w: &LossWeights) -> Result<f64> {
    if !(l_v.is_finite() && l_ms.is_finite() && l_cyc.is_finite()) {
        return Err(Error::contract("total_loss", format!("non-finite component ({l_v}, {l_ms}, {l_cyc})")));
    }
    w.validate()?;
    Ok(w.lambda_v * l_v + w.lambda_ms * l_ms + w.lambda_cyc * l_cyc)
}
