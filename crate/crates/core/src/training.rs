//! The alternating optimisation loop.
//!
//! Each step of a `full` run performs
//!
//! 1. a VIS stereo update of the VIS encoder and the shared decoder,
//! 2. a transfer update of the thermal encoder and both reconstructors
//!    (the decoder joins only when `train_decoder_in_transfer` is set), whose
//!    objective includes the depth cycle through warped, spectrum-swapped views,
//! 3. `disc_update_ratio` updates of the per-scale discriminators on detached
//!    features.
//!
//! Every parameter group owns its own Adam state. Sampling uses independent
//! seeded streams so that switching the transfer branch off leaves the VIS
//! updates untouched.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crossdepth_autograd::{Adam, AdamConfig, Graph, ParamId, Tensor, Var};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::save_checkpoint;
use crate::data::{DatasetSample, SyntheticScene};
use crate::geometry::{warp_var, DisparityMap, ImagePlane, WarpDirection};
use crate::losses::{
    cross_spectrum_var, cycle_var, discriminator_var, vis_total_var, CrossSpectrumVars, GeneratorLoss, LossBreakdown,
    LossWeights, SsimConfig,
};
use crate::networks::{Component, NetworkBundle, NetworkConfig, Spectrum};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// VIS stereo updates only.
    Vis,
    /// VIS, transfer and discriminator updates.
    #[default]
    Full,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Vis => "vis",
            Phase::Full => "full",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Overrides `epochs` when set.
    pub steps: Option<u64>,
    pub seed: u64,
    pub phase: Phase,
    pub weights: LossWeights,
    pub ssim: SsimConfig,
    pub generator_loss: GeneratorLoss,
    pub disc_update_ratio: usize,
    pub train_decoder_in_transfer: bool,
    /// Progress callback period; every step is still logged to disk.
    pub log_every: u64,
    /// Periodic checkpoint period in steps; `0` disables.
    pub checkpoint_every: u64,
    pub network: NetworkConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-4,
            beta1: 0.9,
            beta2: 0.999,
            batch_size: 1,
            epochs: 1,
            steps: None,
            seed: 0,
            phase: Phase::Full,
            weights: LossWeights::default(),
            ssim: SsimConfig::default(),
            generator_loss: GeneratorLoss::NonSaturating,
            disc_update_ratio: 1,
            train_decoder_in_transfer: false,
            log_every: 50,
            checkpoint_every: 0,
            network: NetworkConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return err(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return err("Adam betas must lie in [0, 1)".into());
        }
        if self.epochs == 0 {
            return err("epochs must be >= 1".into());
        }
        if self.batch_size != 1 {
            return err(format!("only batch_size 1 is supported, got {}", self.batch_size));
        }
        if self.disc_update_ratio == 0 {
            return err("disc_update_ratio must be >= 1".into());
        }
        self.weights.validate()?;
        self.ssim.validate()?;
        self.network.validate()
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            ..AdamConfig::default()
        }
    }
}

/// Source-domain stereo pair.
#[derive(Clone, Debug)]
pub struct VisStereoSample {
    pub vis_left: ImagePlane,
    pub vis_right: ImagePlane,
}

impl VisStereoSample {
    pub fn new(vis_left: ImagePlane, vis_right: ImagePlane) -> Result<Self> {
        if vis_left.channels() != 3 || vis_left.dims() != vis_right.dims() {
            return Err(Error::contract(
                "VisStereoSample",
                format!("need two 3-channel images of one size, got {:?} and {:?}", vis_left.dims(), vis_right.dims()),
            ));
        }
        Ok(Self { vis_left, vis_right })
    }
}

/// Target-domain pair: thermal left, visible right.
#[derive(Clone, Debug)]
pub struct CrossSpectrumSample {
    pub tir_left: ImagePlane,
    pub vis_right: ImagePlane,
    pub gt_depth: Option<ImagePlane>,
}

impl CrossSpectrumSample {
    pub fn new(tir_left: ImagePlane, vis_right: ImagePlane, gt_depth: Option<ImagePlane>) -> Result<Self> {
        let ok = tir_left.channels() == 1
            && vis_right.channels() == 3
            && tir_left.same_size(&vis_right)
            && gt_depth.as_ref().is_none_or(|d| d.channels() == 1 && d.same_size(&tir_left));
        if !ok {
            return Err(Error::contract(
                "CrossSpectrumSample",
                format!(
                    "need 1-channel TIR and 3-channel VIS of one size, got {:?} and {:?}",
                    tir_left.dims(),
                    vis_right.dims()
                ),
            ));
        }
        Ok(Self {
            tir_left,
            vis_right,
            gt_depth,
        })
    }
}

impl From<&SyntheticScene> for VisStereoSample {
    fn from(s: &SyntheticScene) -> Self {
        Self {
            vis_left: s.vis_left.clone(),
            vis_right: s.vis_right.clone(),
        }
    }
}

impl From<&SyntheticScene> for CrossSpectrumSample {
    fn from(s: &SyntheticScene) -> Self {
        Self {
            tir_left: s.tir_left.clone(),
            vis_right: s.vis_right.clone(),
            gt_depth: Some(s.depth_left.clone()),
        }
    }
}

impl TryFrom<&DatasetSample> for VisStereoSample {
    type Error = Error;
    fn try_from(s: &DatasetSample) -> Result<Self> {
        let left = s.vis_left.clone().ok_or_else(|| Error::Load {
            entry: s.id.clone(),
            msg: "a VIS stereo sample needs vis_left".into(),
        })?;
        Self::new(left, s.vis_right.clone())
    }
}

impl TryFrom<&DatasetSample> for CrossSpectrumSample {
    type Error = Error;
    fn try_from(s: &DatasetSample) -> Result<Self> {
        Self::new(s.tir_left.clone(), s.vis_right.clone(), s.depth.clone())
    }
}

fn constant(g: &Graph, p: &ImagePlane) -> Var {
    g.constant(p.tensor().clone())
}

/// Re-estimates both disparities from spectrum-swapped, warp-synthesised
/// views: `ω(T_L, d_r → right)` through the thermal encoder and
/// `ω(V_R, d_l → left)` through the VIS encoder. Returns finest-scale
/// `(d̂_l, d̂_r)`; gradients flow through both warps.
pub fn cycle_pass_var(
    g: &Graph,
    bundle: &NetworkBundle,
    tir_left: Var,
    vis_right: Var,
    d_left: Var,
    d_right: Var,
) -> (Var, Var) {
    let tir_right = warp_var(g, tir_left, d_right, WarpDirection::ToRight);
    let vis_left = warp_var(g, vis_right, d_left, WarpDirection::ToLeft);
    let f_vis_left = bundle.encode_var(g, Spectrum::Vis, vis_left);
    let f_tir_right = bundle.encode_var(g, Spectrum::Tir, tir_right);
    let d_left_hat = bundle.full_resolution_disparities(g, &f_vis_left)[0];
    let d_right_hat = bundle.full_resolution_disparities(g, &f_tir_right)[0];
    (d_left_hat, d_right_hat)
}

/// Inference form of [`cycle_pass_var`].
pub fn cycle_pass(
    bundle: &NetworkBundle,
    target: &CrossSpectrumSample,
    d_left: &DisparityMap,
    d_right: &DisparityMap,
) -> Result<(DisparityMap, DisparityMap)> {
    let cfg = bundle.config();
    let size = (cfg.input_height, cfg.input_width);
    for (what, h, w) in [
        ("tir_left", target.tir_left.height(), target.tir_left.width()),
        ("d_left", d_left.height(), d_left.width()),
        ("d_right", d_right.height(), d_right.width()),
    ] {
        if (h, w) != size {
            return Err(Error::contract("cycle_pass", format!("{what} is {h}x{w}, expected {}x{}", size.0, size.1)));
        }
    }
    let g = Graph::new();
    let (l, r) = cycle_pass_var(
        &g,
        bundle,
        constant(&g, &target.tir_left),
        constant(&g, &target.vis_right),
        constant(&g, d_left.plane()),
        constant(&g, d_right.plane()),
    );
    let plane = |v: Var| DisparityMap::new(ImagePlane::from_tensor(g.value(v).as_ref().clone())?);
    Ok((plane(l)?, plane(r)?))
}

/// Detached encoder features: VIS-source ("real") and thermal ("fake").
#[derive(Clone, Debug)]
pub struct FeatureBatch {
    pub real: Vec<Tensor>,
    pub fake: Vec<Tensor>,
}

/// A network bundle together with its optimiser state.
pub struct Trainer {
    bundle: NetworkBundle,
    cfg: TrainConfig,
    vis_opt: Adam,
    transfer_opt: Adam,
    disc_opts: Vec<Adam>,
    steps: u64,
}

impl Trainer {
    /// Fresh bundle initialised from `cfg.seed`.
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let bundle = NetworkBundle::build(&cfg.network, cfg.seed)?;
        Self::with_bundle(bundle, cfg)
    }

    pub fn with_bundle(bundle: NetworkBundle, mut cfg: TrainConfig) -> Result<Self> {
        cfg.network = bundle.config().clone();
        cfg.validate()?;
        let adam = cfg.adam();
        let ids = |cs: &[Component]| -> Vec<ParamId> { cs.iter().flat_map(|&c| bundle.params(c).to_vec()).collect() };
        let vis_opt = Adam::new(adam, ids(&[Component::EncoderVis, Component::DepthDecoder]));
        let transfer_opt = Adam::new(adam, Self::transfer_ids(&bundle, &cfg));
        let disc_opts = (0..bundle.num_discriminators())
            .map(|k| Adam::new(adam, bundle.params(Component::Discriminator(k)).to_vec()))
            .collect();
        Ok(Self {
            bundle,
            cfg,
            vis_opt,
            transfer_opt,
            disc_opts,
            steps: 0,
        })
    }

    fn transfer_ids(bundle: &NetworkBundle, cfg: &TrainConfig) -> Vec<ParamId> {
        let mut comps = vec![Component::EncoderTir, Component::ReconVis, Component::ReconTir];
        if cfg.train_decoder_in_transfer {
            comps.push(Component::DepthDecoder);
        }
        comps.iter().flat_map(|&c| bundle.params(c).to_vec()).collect()
    }

    pub fn bundle(&self) -> &NetworkBundle {
        &self.bundle
    }

    /// Direct parameter access; optimiser state is kept.
    pub fn bundle_mut(&mut self) -> &mut NetworkBundle {
        &mut self.bundle
    }

    pub fn into_bundle(self) -> NetworkBundle {
        self.bundle
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    /// Completed training steps.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    fn check_size(&self, op: &'static str, p: &ImagePlane) -> Result<()> {
        let n = self.bundle.config();
        if (p.height(), p.width()) != (n.input_height, n.input_width) {
            return Err(Error::contract(
                op,
                format!("image is {}x{}, network expects {}x{}", p.width(), p.height(), n.input_width, n.input_height),
            ));
        }
        Ok(())
    }

    fn ensure_finite(&self, b: &LossBreakdown) -> Result<()> {
        if b.all_finite() {
            Ok(())
        } else {
            Err(Error::NonFiniteLoss {
                step: self.steps + 1,
                terms: b.to_string(),
            })
        }
    }

    /// One VIS stereo update; returns the pre-update terms
    /// `p_l, p_r, s_l, s_r, lr_l, lr_r, l_v`.
    pub fn vis_step(&mut self, sample: &VisStereoSample) -> Result<LossBreakdown> {
        self.check_size("vis_step", &sample.vis_left)?;
        let (breakdown, grads) = {
            let g = Graph::with_trainable(self.vis_opt.group().iter().copied());
            let b = &self.bundle;
            let left = constant(&g, &sample.vis_left);
            let right = constant(&g, &sample.vis_right);
            let f_l = b.encode_var(&g, Spectrum::Vis, left);
            let f_r = b.encode_var(&g, Spectrum::Vis, right);
            let scales: Vec<(Var, Var)> = b
                .full_resolution_disparities(&g, &f_l)
                .into_iter()
                .zip(b.full_resolution_disparities(&g, &f_r))
                .collect();
            let terms = vis_total_var(&g, left, right, &scales, &self.cfg.weights, &self.cfg.ssim);
            let mut breakdown = terms.breakdown(&g, "");
            breakdown.insert("l_v", g.value(terms.total).item());
            self.ensure_finite(&breakdown)?;
            let loss = g.scale(terms.total, self.cfg.weights.lambda_v);
            let grads = g.backward(loss);
            (breakdown, g.param_grads(&grads))
        };
        self.vis_opt.step(self.bundle.store_mut(), &grads);
        Ok(breakdown)
    }

    /// One transfer update followed by `disc_update_ratio` discriminator
    /// updates; returns the pre-update terms
    /// `gan_g, rec, wrec, tr, ms_*, ms, cyc, gan_d`.
    pub fn transfer_step(&mut self, target: &CrossSpectrumSample, source: &VisStereoSample) -> Result<LossBreakdown> {
        let (mut breakdown, features) = self.generator_update(target, source)?;
        for k in 0..self.cfg.disc_update_ratio {
            let gan_d = self.discriminator_update(&features)?;
            if k == 0 {
                breakdown.insert("gan_d", gan_d);
            }
        }
        Ok(breakdown)
    }

    /// The generator half of [`Trainer::transfer_step`]: updates the thermal
    /// encoder and reconstructors (plus the decoder when unfrozen) and
    /// returns detached features for the discriminators.
    pub fn generator_update(
        &mut self,
        target: &CrossSpectrumSample,
        source: &VisStereoSample,
    ) -> Result<(LossBreakdown, FeatureBatch)> {
        self.check_size("transfer_step", &target.tir_left)?;
        self.check_size("transfer_step", &source.vis_left)?;
        let w = self.cfg.weights;
        let (breakdown, grads, features) = {
            let g = Graph::with_trainable(self.transfer_opt.group().iter().copied());
            let b = &self.bundle;
            let tir_left = constant(&g, &target.tir_left);
            let vis_right = constant(&g, &target.vis_right);
            let real = b.encode_var(&g, Spectrum::Vis, constant(&g, &source.vis_left));
            let f_l = b.encode_var(&g, Spectrum::Tir, tir_left);
            let f_r = b.encode_var(&g, Spectrum::Vis, vis_right);
            let scales: Vec<(Var, Var)> = b
                .full_resolution_disparities(&g, &f_l)
                .into_iter()
                .zip(b.full_resolution_disparities(&g, &f_r))
                .collect();
            let vars = CrossSpectrumVars {
                tir_left,
                vis_right,
                scales: scales.clone(),
                fake_logits: b.discriminate_var(&g, &f_l),
                recon_tir_left: b.reconstruct_var(&g, Spectrum::Tir, &f_l),
                recon_vis_right: b.reconstruct_var(&g, Spectrum::Vis, &f_r),
                cross_tir_right: b.reconstruct_var(&g, Spectrum::Tir, &f_r),
                cross_vis_left: b.reconstruct_var(&g, Spectrum::Vis, &f_l),
            };
            let terms = cross_spectrum_var(&g, &vars, self.cfg.generator_loss, &w);
            let (d_l, d_r) = scales[0];
            let (d_l_hat, d_r_hat) = cycle_pass_var(&g, b, tir_left, vis_right, d_l, d_r);
            let cyc = cycle_var(&g, d_l, d_r, d_l_hat, d_r_hat);

            let mut breakdown = terms.breakdown(&g);
            breakdown.insert("cyc", g.value(cyc).item());
            self.ensure_finite(&breakdown)?;
            let loss = g.add(g.scale(terms.ms, w.lambda_ms), g.scale(cyc, w.lambda_cyc));
            let grads = g.backward(loss);
            let snapshot = |vs: &[Var]| -> Vec<Tensor> { vs.iter().map(|&v| g.value(v).as_ref().clone()).collect() };
            let features = FeatureBatch {
                real: snapshot(&real),
                fake: snapshot(&f_l),
            };
            (breakdown, g.param_grads(&grads), features)
        };
        self.transfer_opt.step(self.bundle.store_mut(), &grads);
        Ok((breakdown, features))
    }

    /// One update of every discriminator; returns the pre-update `gan_d`.
    pub fn discriminator_update(&mut self, features: &FeatureBatch) -> Result<f64> {
        let (value, grads) = {
            let ids = self.disc_opts.iter().flat_map(|o| o.group().to_vec());
            let g = Graph::with_trainable(ids);
            let consts = |ts: &[Tensor]| -> Vec<Var> { ts.iter().map(|t| g.constant(t.clone())).collect() };
            let real_logits = self.bundle.discriminate_var(&g, &consts(&features.real));
            let fake_logits = self.bundle.discriminate_var(&g, &consts(&features.fake));
            let loss = discriminator_var(&g, &real_logits, &fake_logits);
            let value = g.value(loss).item();
            if !value.is_finite() {
                let mut b = LossBreakdown::new();
                b.insert("gan_d", value);
                self.ensure_finite(&b)?;
            }
            let grads = g.backward(loss);
            (value, g.param_grads(&grads))
        };
        for opt in &mut self.disc_opts {
            opt.step(self.bundle.store_mut(), &grads);
        }
        Ok(value)
    }

    /// One scheduled step: a VIS update, then (in the full phase) a transfer
    /// update. `total` follows `λ_v L_v + λ_ms L_ms + λ_cyc L_cyc`.
    pub fn train_step(
        &mut self,
        vis: &VisStereoSample,
        transfer: Option<(&CrossSpectrumSample, &VisStereoSample)>,
    ) -> Result<LossBreakdown> {
        let w = self.cfg.weights;
        let mut b = self.vis_step(vis)?;
        let mut total = w.lambda_v * b.value("l_v");
        if let Some((target, source)) = transfer {
            let t = self.transfer_step(target, source)?;
            total += w.lambda_ms * t.value("ms") + w.lambda_cyc * t.value("cyc");
            b.extend(&t);
        }
        b.insert("total", total);
        self.steps += 1;
        Ok(b)
    }
}

/// Endless seeded reshuffling of `0..len`.
struct Sampler {
    rng: ChaCha8Rng,
    order: Vec<usize>,
    pos: usize,
}

impl Sampler {
    fn new(len: usize, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            rng,
            order: (0..len).collect(),
            pos: len,
        }
    }

    fn next(&mut self) -> usize {
        if self.pos == self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        self.pos += 1;
        self.order[self.pos - 1]
    }
}

/// One line of the loss log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub step: u64,
    pub phase: Phase,
    #[serde(flatten)]
    pub terms: LossBreakdown,
}

#[derive(Clone, Debug)]
pub struct TrainingOutcome {
    pub final_checkpoint: PathBuf,
    pub log_path: PathBuf,
    pub steps: u64,
    pub last: LossBreakdown,
}

pub const LOG_FILE: &str = "logs/train.jsonl";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";

/// [`run_training_with`] without a progress callback.
pub fn run_training(
    cfg: &TrainConfig,
    source: &[VisStereoSample],
    target: &[CrossSpectrumSample],
    out_dir: &Path,
) -> Result<TrainingOutcome> {
    run_training_with(cfg, source, target, out_dir, |_| {})
}

/// Trains a fresh bundle, writing `logs/train.jsonl`, periodic
/// `checkpoints/step_NNNNNNNN.ckpt` and `final.ckpt` under `out_dir`.
/// `on_log` sees every `log_every`-th record.
pub fn run_training_with(
    cfg: &TrainConfig,
    source: &[VisStereoSample],
    target: &[CrossSpectrumSample],
    out_dir: &Path,
    on_log: impl FnMut(&LogRecord),
) -> Result<TrainingOutcome> {
    let trainer = Trainer::new(cfg.clone())?;
    train_bundle(trainer, source, target, out_dir, on_log).map(|(outcome, _)| outcome)
}

/// Runs the schedule on an existing trainer; returns the trained bundle too.
pub fn train_bundle(
    mut trainer: Trainer,
    source: &[VisStereoSample],
    target: &[CrossSpectrumSample],
    out_dir: &Path,
    mut on_log: impl FnMut(&LogRecord),
) -> Result<(TrainingOutcome, NetworkBundle)> {
    let cfg = trainer.config().clone();
    if source.is_empty() {
        return Err(Error::contract("run_training", "the source dataset is empty"));
    }
    if cfg.phase == Phase::Full && target.is_empty() {
        return Err(Error::contract("run_training", "the target dataset is empty"));
    }
    let per_epoch = match cfg.phase {
        Phase::Vis => source.len(),
        Phase::Full => target.len(),
    } as u64;
    let total_steps = cfg.steps.unwrap_or(per_epoch * cfg.epochs as u64);

    let log_path = out_dir.join(LOG_FILE);
    let ckpt_dir = out_dir.join("checkpoints");
    for dir in [out_dir.join("logs"), ckpt_dir.clone()] {
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let file = File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let mut log = BufWriter::new(file);

    let mut vis_sampler = Sampler::new(source.len(), cfg.seed, 1);
    let mut real_sampler = Sampler::new(source.len(), cfg.seed, 2);
    let mut target_sampler = Sampler::new(target.len(), cfg.seed, 3);
    let mut last = LossBreakdown::new();

    for step in 1..=total_steps {
        let vis = &source[vis_sampler.next()];
        let transfer = (cfg.phase == Phase::Full).then(|| (&target[target_sampler.next()], &source[real_sampler.next()]));
        let terms = match trainer.train_step(vis, transfer) {
            Ok(t) => t,
            Err(e @ Error::NonFiniteLoss { .. }) => {
                log.flush().map_err(|err| Error::io(&log_path, err))?;
                let path = ckpt_dir.join("last_good.ckpt");
                save_checkpoint(trainer.bundle(), Some(&cfg), trainer.steps(), &path)?;
                return Err(e);
            }
            Err(e) => return Err(e),
        };
        let record = LogRecord {
            step,
            phase: cfg.phase,
            terms,
        };
        serde_json::to_writer(&mut log, &record).expect("log record serialises");
        writeln!(log).map_err(|e| Error::io(&log_path, e))?;
        if cfg.log_every > 0 && (step % cfg.log_every == 0 || step == total_steps) {
            on_log(&record);
        }
        if cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 {
            let path = ckpt_dir.join(format!("step_{step:08}.ckpt"));
            save_checkpoint(trainer.bundle(), Some(&cfg), step, &path)?;
        }
        last = record.terms;
    }
    log.flush().map_err(|e| Error::io(&log_path, e))?;

    let final_checkpoint = out_dir.join(FINAL_CHECKPOINT);
    save_checkpoint(trainer.bundle(), Some(&cfg), trainer.steps(), &final_checkpoint)?;
    Ok((
        TrainingOutcome {
            final_checkpoint,
            log_path,
            steps: total_steps,
            last,
        },
        trainer.into_bundle(),
    ))
}

/// Parses a loss log written by [`run_training`].
pub fn read_log(path: &Path) -> Result<Vec<LogRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .map(|line| {
            serde_json::from_str(line).map_err(|e| Error::Load {
                entry: path.display().to_string(),
                msg: e.to_string(),
            })
        })
        .collect()
}
