//! Encoders, the shared disparity decoder, spectrum reconstructors and
//! per-scale patch discriminators.
//!
//! All components are plain descriptions of parameter ids inside one
//! [`ParamStore`] owned by the [`NetworkBundle`]. A forward pass binds those
//! parameters onto a [`Graph`]; which of them receive gradients is decided by
//! the graph's trainable set.
//!
//! Feature scale `k` (0-based) has resolution `ceil(H / 2^(k+1)) × ceil(W / 2^(k+1))`.
//! Disparity scale `s` has resolution `H / 2^s`, so scale 0 is full resolution.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crossdepth_autograd::{ConvSpec, Graph, PadMode, ParamId, ParamStore, ResizeMode, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geometry::{DisparityMap, ImagePlane, DEFAULT_MAX_DISPARITY};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    /// Stem plus plain strided conv stages; `base_channels` wide.
    Tiny,
    /// Residual basic blocks with ResNet-18 widths (no batch norm).
    Resnet18,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spectrum {
    Vis,
    Tir,
}

impl Spectrum {
    pub fn channels(self) -> usize {
        match self {
            Spectrum::Vis => 3,
            Spectrum::Tir => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub encoder: EncoderKind,
    /// Number of feature scales and discriminators.
    pub num_scales: usize,
    pub num_disparity_scales: usize,
    pub base_channels: usize,
    pub input_width: usize,
    pub input_height: usize,
    pub max_disparity: f64,
    /// Standard deviation of the Gaussian init of non-encoder weights.
    pub init_std: f64,
    /// Checkpoint whose VIS encoder initialises both encoders (resnet18 only).
    pub pretrained_encoder: Option<PathBuf>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderKind::Tiny,
            num_scales: 5,
            num_disparity_scales: 4,
            base_channels: 16,
            input_width: 64,
            input_height: 48,
            max_disparity: DEFAULT_MAX_DISPARITY,
            init_std: 0.02,
            pretrained_encoder: None,
        }
    }
}

fn halve(n: usize) -> usize {
    n.div_ceil(2)
}

/// Output size of a 4×4, stride-2, pad-1 convolution.
fn patch_stride(n: usize) -> Option<usize> {
    (n >= 2).then(|| (n + 2 - 4) / 2 + 1)
}

impl NetworkConfig {
    /// Full-capacity settings: ResNet-18 encoder at 512×320.
    pub fn full_scale() -> Self {
        Self {
            encoder: EncoderKind::Resnet18,
            input_width: 512,
            input_height: 320,
            base_channels: 64,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.num_scales < 2 {
            return err(format!("num_scales must be >= 2, got {}", self.num_scales));
        }
        if self.num_disparity_scales == 0 || self.num_disparity_scales > self.num_scales {
            return err(format!(
                "num_disparity_scales must be in 1..={}, got {}",
                self.num_scales, self.num_disparity_scales
            ));
        }
        if self.encoder == EncoderKind::Resnet18 && self.num_scales != 5 {
            return err("the resnet18 encoder has exactly 5 feature scales".into());
        }
        if self.base_channels < 4 {
            return err(format!("base_channels must be >= 4, got {}", self.base_channels));
        }
        let unit = 1usize << (self.num_scales - 1);
        if self.input_width % unit != 0 || self.input_height % unit != 0 {
            return err(format!(
                "input size {}x{} must be divisible by {unit}",
                self.input_width, self.input_height
            ));
        }
        if self.input_width / unit < 2 || self.input_height / unit < 2 {
            return err(format!(
                "input size {}x{} is too small for {} scales",
                self.input_width, self.input_height, self.num_scales
            ));
        }
        if !(self.max_disparity > 0.0 && self.max_disparity.is_finite()) {
            return err(format!("max_disparity must be > 0, got {}", self.max_disparity));
        }
        if !(self.init_std > 0.0 && self.init_std.is_finite()) {
            return err(format!("init_std must be > 0, got {}", self.init_std));
        }
        if self.pretrained_encoder.is_some() && self.encoder == EncoderKind::Tiny {
            return err("pretrained encoder weights require the resnet18 encoder".into());
        }
        for (k, [_, h, w]) in self.logit_shapes().iter().enumerate() {
            if *h == 0 || *w == 0 {
                return err(format!("discriminator {k} has an empty logit map"));
            }
        }
        Ok(())
    }

    pub fn encoder_channels(&self) -> Vec<usize> {
        match self.encoder {
            EncoderKind::Tiny => {
                let b = self.base_channels;
                (0..self.num_scales).map(|k| if k == 0 { b } else { b << (k - 1) }).collect()
            }
            EncoderKind::Resnet18 => vec![64, 64, 128, 256, 512],
        }
    }

    pub fn decoder_channels(&self) -> Vec<usize> {
        let base = match self.encoder {
            EncoderKind::Tiny => (self.base_channels / 2).max(4),
            EncoderKind::Resnet18 => 16,
        };
        (0..self.num_scales).map(|k| base << k).collect()
    }

    /// `[C, H, W]` of every feature scale.
    pub fn pyramid_shapes(&self) -> Vec<[usize; 3]> {
        let channels = self.encoder_channels();
        let (mut h, mut w) = (self.input_height, self.input_width);
        channels
            .into_iter()
            .map(|c| {
                h = halve(h);
                w = halve(w);
                [c, h, w]
            })
            .collect()
    }

    /// Native `[1, H, W]` of every disparity scale, finest first.
    pub fn disparity_shapes(&self) -> Vec<[usize; 3]> {
        let mut out = vec![[1, self.input_height, self.input_width]];
        out.extend(
            self.pyramid_shapes()
                .iter()
                .take(self.num_disparity_scales - 1)
                .map(|&[_, h, w]| [1, h, w]),
        );
        out
    }

    /// Number of strided stages of discriminator `k` (0-based).
    pub fn discriminator_depth(k: usize) -> usize {
        3usize.saturating_sub(k).max(1)
    }

    /// `[1, H, W]` of every discriminator's patch logits; a zero extent marks
    /// an input too small for the schedule.
    pub fn logit_shapes(&self) -> Vec<[usize; 3]> {
        self.pyramid_shapes()
            .iter()
            .enumerate()
            .map(|(k, &[_, mut h, mut w])| {
                for _ in 0..Self::discriminator_depth(k) {
                    h = patch_stride(h).unwrap_or(0);
                    w = patch_stride(w).unwrap_or(0);
                }
                [1, h, w]
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
struct Conv {
    weight: ParamId,
    bias: ParamId,
    spec: ConvSpec,
}

impl Conv {
    fn forward(&self, g: &Graph, store: &ParamStore, x: Var) -> Var {
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        g.conv2d(x, w, Some(b), self.spec)
    }
}

#[derive(Clone, Copy)]
enum Init {
    /// He-normal, `std = sqrt(2 / fan_in)`.
    Kaiming,
    /// Residual-branch output layer: He-normal scaled down.
    KaimingScaled(f64),
    Normal(f64),
}

struct ParamBuilder<'a> {
    store: &'a mut ParamStore,
    rng: ChaCha8Rng,
    prefix: String,
    ids: Vec<ParamId>,
}

impl<'a> ParamBuilder<'a> {
    fn new(store: &'a mut ParamStore, seed: u64, prefix: &str) -> Self {
        Self {
            store,
            rng: ChaCha8Rng::seed_from_u64(seed ^ fnv1a(prefix)),
            prefix: prefix.to_owned(),
            ids: Vec::new(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn conv(
        &mut self,
        name: &str,
        input: usize,
        output: usize,
        kernel: usize,
        stride: usize,
        pad_mode: PadMode,
        init: Init,
    ) -> Conv {
        let fan_in = (input * kernel * kernel) as f64;
        let std = match init {
            Init::Kaiming => (2.0 / fan_in).sqrt(),
            Init::KaimingScaled(s) => s * (2.0 / fan_in).sqrt(),
            Init::Normal(s) => s,
        };
        let normal = Normal::new(0.0, std).expect("finite std");
        let shape = vec![output, input, kernel, kernel];
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| normal.sample(&mut self.rng)).collect();
        let weight = self.store.insert(
            format!("{}.{name}.weight", self.prefix),
            Tensor::new(shape, data).expect("weight shape"),
        );
        let bias = self
            .store
            .insert(format!("{}.{name}.bias", self.prefix), Tensor::zeros(vec![output]));
        self.ids.extend([weight, bias]);
        Conv {
            weight,
            bias,
            spec: ConvSpec::new(stride, kernel / 2, pad_mode),
        }
    }

    fn finish(self) -> Vec<ParamId> {
        self.ids
    }
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

#[derive(Clone, Debug)]
struct BasicBlock {
    conv1: Conv,
    conv2: Conv,
    shortcut: Option<Conv>,
}

impl BasicBlock {
    fn forward(&self, g: &Graph, store: &ParamStore, x: Var) -> Var {
        let h = g.relu(self.conv1.forward(g, store, x));
        let h = self.conv2.forward(g, store, h);
        let skip = match &self.shortcut {
            Some(s) => s.forward(g, store, x),
            None => x,
        };
        g.relu(g.add(h, skip))
    }
}

#[derive(Clone, Debug)]
enum EncoderArch {
    Tiny { stages: Vec<(Conv, Conv)> },
    Resnet { stem: Conv, layers: Vec<Vec<BasicBlock>> },
}

/// Image → multi-scale feature pyramid.
#[derive(Clone, Debug)]
pub struct Encoder {
    spectrum: Spectrum,
    arch: EncoderArch,
}

impl Encoder {
    fn build(cfg: &NetworkConfig, spectrum: Spectrum, store: &mut ParamStore, seed: u64) -> (Self, Vec<ParamId>) {
        let prefix = match spectrum {
            Spectrum::Vis => "encoder_vis",
            Spectrum::Tir => "encoder_tir",
        };
        let mut pb = ParamBuilder::new(store, seed, prefix);
        let channels = cfg.encoder_channels();
        let arch = match cfg.encoder {
            EncoderKind::Tiny => {
                let mut stages = Vec::new();
                let mut input = spectrum.channels();
                for (k, &c) in channels.iter().enumerate() {
                    let down = pb.conv(&format!("stage{k}.down"), input, c, 3, 2, PadMode::Zero, Init::Kaiming);
                    let refine = pb.conv(&format!("stage{k}.conv"), c, c, 3, 1, PadMode::Zero, Init::Kaiming);
                    stages.push((down, refine));
                    input = c;
                }
                EncoderArch::Tiny { stages }
            }
            EncoderKind::Resnet18 => {
                let stem = pb.conv("stem", spectrum.channels(), channels[0], 7, 2, PadMode::Zero, Init::Kaiming);
                let mut layers = Vec::new();
                let mut input = channels[0];
                for (k, &c) in channels.iter().enumerate().skip(1) {
                    let mut blocks = Vec::new();
                    for b in 0..2 {
                        let stride = if b == 0 { 2 } else { 1 };
                        let name = format!("layer{k}.{b}");
                        let conv1 = pb.conv(&format!("{name}.conv1"), input, c, 3, stride, PadMode::Zero, Init::Kaiming);
                        let conv2 = pb.conv(
                            &format!("{name}.conv2"),
                            c,
                            c,
                            3,
                            1,
                            PadMode::Zero,
                            Init::KaimingScaled(0.5),
                        );
                        let shortcut = (stride != 1 || input != c).then(|| {
                            pb.conv(&format!("{name}.shortcut"), input, c, 1, stride, PadMode::Zero, Init::Kaiming)
                        });
                        blocks.push(BasicBlock { conv1, conv2, shortcut });
                        input = c;
                    }
                    layers.push(blocks);
                }
                EncoderArch::Resnet { stem, layers }
            }
        };
        (Self { spectrum, arch }, pb.finish())
    }

    pub fn spectrum(&self) -> Spectrum {
        self.spectrum
    }

    fn forward(&self, g: &Graph, store: &ParamStore, image: Var) -> Vec<Var> {
        match &self.arch {
            EncoderArch::Tiny { stages } => {
                let mut x = image;
                stages
                    .iter()
                    .map(|(down, refine)| {
                        x = g.relu(down.forward(g, store, x));
                        x = g.relu(refine.forward(g, store, x));
                        x
                    })
                    .collect()
            }
            EncoderArch::Resnet { stem, layers } => {
                let mut x = g.relu(stem.forward(g, store, image));
                let mut out = vec![x];
                for blocks in layers {
                    for b in blocks {
                        x = b.forward(g, store, x);
                    }
                    out.push(x);
                }
                out
            }
        }
    }
}

/// Coarse-to-fine decoder with skip connections from the feature pyramid.
#[derive(Clone, Debug)]
struct UNetDecoder {
    /// Per level (finest first): conv before upsampling, conv after the skip concat.
    levels: Vec<(Conv, Conv)>,
    /// `(level, head)` output convolutions.
    heads: Vec<(usize, Conv)>,
}

impl UNetDecoder {
    fn build(pb: &mut ParamBuilder<'_>, cfg: &NetworkConfig, head_levels: usize, head_channels: usize) -> Self {
        let enc = cfg.encoder_channels();
        let dec = cfg.decoder_channels();
        let init = Init::Normal(cfg.init_std);
        let n = cfg.num_scales;
        let mut levels = Vec::with_capacity(n);
        for i in 0..n {
            let input = if i == n - 1 { enc[n - 1] } else { dec[i + 1] };
            let before = pb.conv(&format!("level{i}.up"), input, dec[i], 3, 1, PadMode::Reflect, init);
            let skip = if i > 0 { enc[i - 1] } else { 0 };
            let after = pb.conv(&format!("level{i}.fuse"), dec[i] + skip, dec[i], 3, 1, PadMode::Reflect, init);
            levels.push((before, after));
        }
        let heads = (0..head_levels)
            .map(|i| (i, pb.conv(&format!("head{i}"), dec[i], head_channels, 3, 1, PadMode::Reflect, init)))
            .collect();
        Self { levels, heads }
    }

    /// Raw head outputs, finest level first.
    fn forward(&self, g: &Graph, store: &ParamStore, pyramid: &[Var], full: (usize, usize)) -> Vec<Var> {
        let n = self.levels.len();
        assert_eq!(pyramid.len(), n, "pyramid length");
        let mut x = pyramid[n - 1];
        let mut outputs = vec![None; n];
        for i in (0..n).rev() {
            let (before, after) = &self.levels[i];
            x = g.elu(before.forward(g, store, x));
            let (h, w) = if i > 0 {
                let s = g.shape(pyramid[i - 1]);
                (s[1], s[2])
            } else {
                full
            };
            x = g.resize(x, h, w, ResizeMode::Nearest);
            if i > 0 {
                x = g.concat(&[x, pyramid[i - 1]]);
            }
            x = g.elu(after.forward(g, store, x));
            if let Some((_, head)) = self.heads.iter().find(|(lvl, _)| *lvl == i) {
                outputs[i] = Some(head.forward(g, store, x));
            }
        }
        outputs.into_iter().flatten().collect()
    }
}

/// Shared decoder producing `num_disparity_scales` maps in `[0, max_disparity]`.
#[derive(Clone, Debug)]
pub struct DepthDecoder {
    net: UNetDecoder,
    max_disparity: f64,
}

/// Decoder from a feature pyramid back to an image of one spectrum.
#[derive(Clone, Debug)]
pub struct Reconstructor {
    net: UNetDecoder,
}

/// Strided-convolution patch classifier for one feature scale.
#[derive(Clone, Debug)]
pub struct Discriminator {
    stages: Vec<Conv>,
    classifier: Conv,
}

impl Discriminator {
    fn build(pb: &mut ParamBuilder<'_>, cfg: &NetworkConfig, k: usize) -> Self {
        let init = Init::Normal(cfg.init_std);
        let b = cfg.base_channels;
        let mut input = cfg.encoder_channels()[k];
        let mut stages = Vec::new();
        for j in 0..NetworkConfig::discriminator_depth(k) {
            let out = (b << j).min(8 * b);
            let mut conv = pb.conv(&format!("stage{j}"), input, out, 4, 2, PadMode::Zero, init);
            conv.spec.padding = 1;
            stages.push(conv);
            input = out;
        }
        let classifier = pb.conv("classifier", input, 1, 3, 1, PadMode::Zero, init);
        Self { stages, classifier }
    }

    fn forward(&self, g: &Graph, store: &ParamStore, features: Var) -> Var {
        let mut x = features;
        for s in &self.stages {
            x = g.leaky_relu(s.forward(g, store, x), 0.2);
        }
        self.classifier.forward(g, store, x)
    }
}

/// Identifies a parameter group of the bundle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Component {
    EncoderVis,
    EncoderTir,
    DepthDecoder,
    ReconVis,
    ReconTir,
    Discriminator(usize),
}

/// Multi-scale features of one image, finest first.
#[derive(Clone, Debug, PartialEq)]
pub struct FeaturePyramid {
    pub scales: Vec<Tensor>,
}

/// Every trainable component, sharing one parameter store.
#[derive(Clone, Debug)]
pub struct NetworkBundle {
    config: NetworkConfig,
    store: ParamStore,
    encoder_vis: Encoder,
    encoder_tir: Encoder,
    depth_decoder: DepthDecoder,
    recon_vis: Reconstructor,
    recon_tir: Reconstructor,
    discriminators: Vec<Discriminator>,
    groups: BTreeMap<Component, Vec<ParamId>>,
}

impl NetworkBundle {
    /// Deterministically initialised bundle. Encoders use He-normal init;
    /// every other weight is `N(0, init_std²)`; all biases start at zero.
    pub fn build(cfg: &NetworkConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut store = ParamStore::new();
        let mut groups = BTreeMap::new();

        let (encoder_vis, ids) = Encoder::build(cfg, Spectrum::Vis, &mut store, seed);
        groups.insert(Component::EncoderVis, ids);
        let (encoder_tir, ids) = Encoder::build(cfg, Spectrum::Tir, &mut store, seed);
        groups.insert(Component::EncoderTir, ids);

        let mut pb = ParamBuilder::new(&mut store, seed, "depth_decoder");
        let net = UNetDecoder::build(&mut pb, cfg, cfg.num_disparity_scales, 1);
        groups.insert(Component::DepthDecoder, pb.finish());
        let depth_decoder = DepthDecoder {
            net,
            max_disparity: cfg.max_disparity,
        };

        let mut recon = |spectrum: Spectrum, prefix: &str, component: Component| {
            let mut pb = ParamBuilder::new(&mut store, seed, prefix);
            let net = UNetDecoder::build(&mut pb, cfg, 1, spectrum.channels());
            groups.insert(component, pb.finish());
            Reconstructor { net }
        };
        let recon_vis = recon(Spectrum::Vis, "recon_vis", Component::ReconVis);
        let recon_tir = recon(Spectrum::Tir, "recon_tir", Component::ReconTir);

        let discriminators = (0..cfg.num_scales)
            .map(|k| {
                let mut pb = ParamBuilder::new(&mut store, seed, &format!("discriminator{k}"));
                let d = Discriminator::build(&mut pb, cfg, k);
                groups.insert(Component::Discriminator(k), pb.finish());
                d
            })
            .collect();

        let mut bundle = Self {
            config: cfg.clone(),
            store,
            encoder_vis,
            encoder_tir,
            depth_decoder,
            recon_vis,
            recon_tir,
            discriminators,
            groups,
        };
        if let Some(path) = &cfg.pretrained_encoder {
            let pretrained = crate::checkpoint::load_checkpoint(path)?;
            bundle.load_pretrained_encoders(&pretrained.bundle)?;
        }
        Ok(bundle)
    }

    /// Copies the VIS encoder of `source` into both encoders. The TIR stem
    /// receives the channel mean of the VIS stem weights.
    pub fn load_pretrained_encoders(&mut self, source: &NetworkBundle) -> Result<()> {
        for (id, name, value) in source.store.iter() {
            let Some(rest) = name.strip_prefix("encoder_vis.") else { continue };
            let _ = id;
            for (prefix, spectrum) in [("encoder_vis.", Spectrum::Vis), ("encoder_tir.", Spectrum::Tir)] {
                let target_name = format!("{prefix}{rest}");
                let Some(target) = self.store.find(&target_name) else {
                    return Err(Error::Config(format!("pretrained parameter {name} has no counterpart")));
                };
                let mut v = value.clone();
                let target_shape = self.store.get(target).shape().to_vec();
                if spectrum == Spectrum::Tir && v.shape() != target_shape.as_slice() && v.shape().len() == 4 {
                    v = mean_input_channels(&v);
                }
                self.store
                    .set(target, v)
                    .map_err(|e| Error::Config(format!("pretrained encoder: {e}")))?;
            }
        }
        Ok(())
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn num_discriminators(&self) -> usize {
        self.discriminators.len()
    }

    pub fn params(&self, component: Component) -> &[ParamId] {
        self.groups.get(&component).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn components(&self) -> impl Iterator<Item = Component> + '_ {
        self.groups.keys().copied()
    }

    fn encoder(&self, spectrum: Spectrum) -> &Encoder {
        match spectrum {
            Spectrum::Vis => &self.encoder_vis,
            Spectrum::Tir => &self.encoder_tir,
        }
    }

    fn reconstructor(&self, spectrum: Spectrum) -> &Reconstructor {
        match spectrum {
            Spectrum::Vis => &self.recon_vis,
            Spectrum::Tir => &self.recon_tir,
        }
    }

    fn full_size(&self) -> (usize, usize) {
        (self.config.input_height, self.config.input_width)
    }

    // -- graph-level forward passes ------------------------------------------------

    pub fn encode_var(&self, g: &Graph, spectrum: Spectrum, image: Var) -> Vec<Var> {
        self.encoder(spectrum).forward(g, &self.store, image)
    }

    /// Disparities at their native scale resolution, finest first.
    pub fn decode_disparity_var(&self, g: &Graph, pyramid: &[Var]) -> Vec<Var> {
        let dd = &self.depth_decoder;
        dd.net
            .forward(g, &self.store, pyramid, self.full_size())
            .into_iter()
            .map(|raw| g.scale(g.sigmoid(raw), dd.max_disparity))
            .collect()
    }

    /// Every disparity scale bilinearly resized to full resolution, finest first.
    pub fn full_resolution_disparities(&self, g: &Graph, pyramid: &[Var]) -> Vec<Var> {
        let (h, w) = self.full_size();
        self.decode_disparity_var(g, pyramid)
            .into_iter()
            .map(|d| g.resize(d, h, w, ResizeMode::Bilinear))
            .collect()
    }

    pub fn reconstruct_var(&self, g: &Graph, spectrum: Spectrum, pyramid: &[Var]) -> Var {
        let r = self.reconstructor(spectrum);
        let raw = r.net.forward(g, &self.store, pyramid, self.full_size());
        g.sigmoid(raw[0])
    }

    /// Patch logits of every discriminator on its matching feature scale.
    pub fn discriminate_var(&self, g: &Graph, pyramid: &[Var]) -> Vec<Var> {
        assert_eq!(pyramid.len(), self.discriminators.len(), "pyramid length");
        self.discriminators
            .iter()
            .zip(pyramid)
            .map(|(d, &f)| d.forward(g, &self.store, f))
            .collect()
    }

    // -- validated inference ---------------------------------------------------------

    fn check_pyramid(&self, op: &'static str, pyramid: &FeaturePyramid) -> Result<()> {
        let expected = self.config.pyramid_shapes();
        if pyramid.scales.len() != expected.len() {
            return Err(Error::contract(
                op,
                format!("pyramid has {} scales, expected {}", pyramid.scales.len(), expected.len()),
            ));
        }
        for (k, (t, e)) in pyramid.scales.iter().zip(&expected).enumerate() {
            if t.shape() != e {
                return Err(Error::contract(op, format!("scale {k} has shape {:?}, expected {e:?}", t.shape())));
            }
        }
        Ok(())
    }

    fn pyramid_vars(&self, g: &Graph, pyramid: &FeaturePyramid) -> Vec<Var> {
        pyramid.scales.iter().map(|t| g.constant(t.clone())).collect()
    }

    pub fn encode(&self, spectrum: Spectrum, image: &ImagePlane) -> Result<FeaturePyramid> {
        let (c, h, w) = image.dims();
        if c != spectrum.channels() || (h, w) != self.full_size() {
            return Err(Error::contract(
                "encode",
                format!(
                    "{spectrum:?} encoder expects {}x{}x{}, got {c}x{h}x{w}",
                    spectrum.channels(),
                    self.config.input_height,
                    self.config.input_width
                ),
            ));
        }
        let g = Graph::new();
        let x = g.constant(image.tensor().clone());
        let scales = self
            .encode_var(&g, spectrum, x)
            .into_iter()
            .map(|v| g.value(v).as_ref().clone())
            .collect();
        Ok(FeaturePyramid { scales })
    }

    /// Disparity maps at native scale resolution, finest first.
    pub fn decode_disparity(&self, pyramid: &FeaturePyramid) -> Result<Vec<DisparityMap>> {
        self.check_pyramid("decode_disparity", pyramid)?;
        let g = Graph::new();
        let vars = self.pyramid_vars(&g, pyramid);
        self.decode_disparity_var(&g, &vars)
            .into_iter()
            .map(|v| DisparityMap::new(ImagePlane::from_tensor(g.value(v).as_ref().clone())?))
            .collect()
    }

    /// Finest disparity of `image` through the given spectrum's encoder.
    pub fn predict_disparity(&self, spectrum: Spectrum, image: &ImagePlane) -> Result<DisparityMap> {
        let pyramid = self.encode(spectrum, image)?;
        Ok(self.decode_disparity(&pyramid)?.remove(0))
    }

    pub fn reconstruct(&self, spectrum: Spectrum, pyramid: &FeaturePyramid) -> Result<ImagePlane> {
        self.check_pyramid("reconstruct", pyramid)?;
        let g = Graph::new();
        let vars = self.pyramid_vars(&g, pyramid);
        ImagePlane::from_tensor(g.value(self.reconstruct_var(&g, spectrum, &vars)).as_ref().clone())
    }

    pub fn discriminate(&self, pyramid: &FeaturePyramid) -> Result<Vec<Tensor>> {
        self.check_pyramid("discriminate", pyramid)?;
        let g = Graph::new();
        let vars = self.pyramid_vars(&g, pyramid);
        Ok(self
            .discriminate_var(&g, &vars)
            .into_iter()
            .map(|v| g.value(v).as_ref().clone())
            .collect())
    }

    /// [`NetworkBundle::discriminate`] over a batch; samples never interact.
    pub fn discriminate_batch(&self, batch: &[FeaturePyramid]) -> Result<Vec<Vec<Tensor>>> {
        batch.iter().map(|p| self.discriminate(p)).collect()
    }

    /// SHA-256 over names, shapes and values of the selected parameters
    /// (all parameters when `component` is `None`).
    pub fn parameter_digest(&self, component: Option<Component>) -> [u8; 32] {
        let mut hasher = Sha256::new();
        let ids: Vec<ParamId> = match component {
            Some(c) => self.params(c).to_vec(),
            None => self.store.ids().collect(),
        };
        for id in ids {
            let t = self.store.get(id);
            hasher.update(self.store.name(id).as_bytes());
            for &d in t.shape() {
                hasher.update((d as u64).to_le_bytes());
            }
            for v in t.data() {
                hasher.update(v.to_le_bytes());
            }
        }
        hasher.finalize().into()
    }
}

fn mean_input_channels(w: &Tensor) -> Tensor {
    let [o, c, kh, kw] = w.shape()[..] else { unreachable!() };
    let mut out = vec![0.0; o * kh * kw];
    for oc in 0..o {
        for ic in 0..c {
            for k in 0..kh * kw {
                out[oc * kh * kw + k] += w.data()[(oc * c + ic) * kh * kw + k] / c as f64;
            }
        }
    }
    Tensor::new(vec![o, 1, kh, kw], out).expect("stem shape")
}
