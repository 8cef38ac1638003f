//! Command-line front end: `synth`, `train`, `evaluate` and `infer`.
//!
//! Settings resolve as defaults, then the `--config` TOML file, then flags
//! (each flag also reads a `CROSSDEPTH_*` environment variable). Every command
//! writes the resolved configuration to `run_config.toml` in its output
//! directory; passing that file back through `--config` repeats the run.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use crossdepth_autograd::{resize, ResizeMode};
use serde::{Deserialize, Serialize};

use crate::checkpoint::load_checkpoint;
use crate::data::png::write_disparity_u16;
use crate::data::{
    colorize, generate_synthetic_dataset, load_dataset, read_image, write_image, ImageSize, Split, SynthParams,
};
use crate::evaluation::{evaluate_model, DepthRange, EvalOptions, EvalView, MetricsReport};
use crate::geometry::{DisparityMap, ImagePlane};
use crate::networks::{NetworkBundle, Spectrum};
use crate::training::{run_training_with, CrossSpectrumSample, Phase, TrainConfig, VisStereoSample};

pub const RUN_CONFIG_FILE: &str = "run_config.toml";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Device {
    #[default]
    Cpu,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataPaths {
    /// Visible stereo corpus for the VIS updates.
    pub source: Option<PathBuf>,
    /// Thermal/visible corpus for transfer and evaluation.
    pub target: Option<PathBuf>,
    pub split: Split,
    pub checkpoint: Option<PathBuf>,
    pub tir_left: Option<PathBuf>,
    pub vis_right: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    pub depth_range: DepthRange,
    pub view: EvalView,
    pub dump_depth: bool,
}

/// Everything a command needs, after merging file and flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// When set, seeds both the generator and the trainer.
    pub seed: Option<u64>,
    pub device: Device,
    pub synth: SynthParams,
    pub training: TrainConfig,
    pub data: DataPaths,
    pub evaluation: EvalSettings,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    fn apply_seed(&mut self) {
        if let Some(seed) = self.seed {
            self.synth.seed = seed;
            self.training.seed = seed;
        }
    }

    /// Writes the configuration to `dir/run_config.toml`.
    pub fn echo(&self, dir: &Path) -> anyhow::Result<PathBuf> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(RUN_CONFIG_FILE);
        let text = toml::to_string_pretty(self).context("serialising the resolved config")?;
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    fn out_dir(&self) -> anyhow::Result<PathBuf> {
        self.data.out.clone().context("no output directory; pass --out")
    }
}

#[derive(Debug, Parser)]
#[command(name = "crossdepth", version, about = "Unsupervised thermal/visible stereo depth estimation")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, env = "CROSSDEPTH_CONFIG")]
    pub config: Option<PathBuf>,
    /// Seed for scene generation, initialisation and sampling.
    #[arg(long, global = true, env = "CROSSDEPTH_SEED")]
    pub seed: Option<u64>,
    #[arg(long, global = true, env = "CROSSDEPTH_DEVICE", value_enum)]
    pub device: Option<Device>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic stereo corpus with simulated thermal images.
    Synth(SynthArgs),
    /// Train the networks.
    Train(TrainArgs),
    /// Score a checkpoint against ground-truth depth.
    Evaluate(EvaluateArgs),
    /// Predict disparity for one thermal-left / visible-right pair.
    Infer(InferArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, env = "CROSSDEPTH_SCENES")]
    pub scenes: Option<usize>,
    /// Image size as WIDTHxHEIGHT.
    #[arg(long, env = "CROSSDEPTH_SIZE", value_parser = parse_size)]
    pub size: Option<ImageSize>,
    #[arg(long, env = "CROSSDEPTH_TEST_FRACTION")]
    pub test_fraction: Option<f64>,
    #[arg(long, env = "CROSSDEPTH_SHAPES")]
    pub shapes: Option<usize>,
    #[arg(long, env = "CROSSDEPTH_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PhaseArg {
    Vis,
    Full,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, env = "CROSSDEPTH_PHASE", value_enum)]
    pub phase: Option<PhaseArg>,
    #[arg(long, env = "CROSSDEPTH_STEPS")]
    pub steps: Option<u64>,
    #[arg(long, env = "CROSSDEPTH_EPOCHS")]
    pub epochs: Option<usize>,
    /// One corpus serving as both source and target.
    #[arg(long, env = "CROSSDEPTH_SYNTHETIC", conflicts_with_all = ["source", "target"])]
    pub synthetic: Option<PathBuf>,
    #[arg(long, env = "CROSSDEPTH_SOURCE")]
    pub source: Option<PathBuf>,
    #[arg(long, env = "CROSSDEPTH_TARGET")]
    pub target: Option<PathBuf>,
    #[arg(long, env = "CROSSDEPTH_LR")]
    pub learning_rate: Option<f64>,
    #[arg(long, env = "CROSSDEPTH_LAMBDA_CYC")]
    pub lambda_cyc: Option<f64>,
    #[arg(long, env = "CROSSDEPTH_CHECKPOINT_EVERY")]
    pub checkpoint_every: Option<u64>,
    #[arg(long, env = "CROSSDEPTH_LOG_EVERY")]
    pub log_every: Option<u64>,
    #[arg(long, env = "CROSSDEPTH_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ViewArg {
    CrossSpectrum,
    Vis,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, env = "CROSSDEPTH_CHECKPOINT")]
    pub checkpoint: Option<PathBuf>,
    /// Dataset root holding the split to score.
    #[arg(long, env = "CROSSDEPTH_DATA", alias = "synthetic")]
    pub data: Option<PathBuf>,
    #[arg(long, env = "CROSSDEPTH_SPLIT")]
    pub split: Option<Split>,
    #[arg(long, env = "CROSSDEPTH_VIEW", value_enum)]
    pub view: Option<ViewArg>,
    #[arg(long, env = "CROSSDEPTH_MIN_DEPTH")]
    pub min_depth: Option<f64>,
    #[arg(long, env = "CROSSDEPTH_MAX_DEPTH")]
    pub max_depth: Option<f64>,
    /// Also write a colour-mapped depth PNG per image under `OUT/depth/`.
    #[arg(long)]
    pub dump_depth: bool,
    #[arg(long, env = "CROSSDEPTH_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long, env = "CROSSDEPTH_CHECKPOINT")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub tir_left: Option<PathBuf>,
    #[arg(long)]
    pub vis_right: Option<PathBuf>,
    #[arg(long, env = "CROSSDEPTH_OUT")]
    pub out: Option<PathBuf>,
}

fn parse_size(s: &str) -> Result<ImageSize, String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("bad size {s:?}: {e}"));
    Ok(ImageSize {
        width: parse(w)?,
        height: parse(h)?,
    })
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

/// Merges the config file and the flags of `cli`.
pub fn resolve(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    set_opt(&mut cfg.seed, cli.seed);
    set(&mut cfg.device, cli.device);
    match &cli.command {
        Command::Synth(a) => {
            set(&mut cfg.synth.num_scenes, a.scenes);
            if let Some(size) = a.size {
                cfg.synth.width = size.width;
                cfg.synth.height = size.height;
            }
            set(&mut cfg.synth.test_fraction, a.test_fraction);
            set(&mut cfg.synth.num_shapes, a.shapes);
            set_opt(&mut cfg.data.out, a.out.clone());
        }
        Command::Train(a) => {
            let t = &mut cfg.training;
            set(
                &mut t.phase,
                a.phase.map(|p| match p {
                    PhaseArg::Vis => Phase::Vis,
                    PhaseArg::Full => Phase::Full,
                }),
            );
            set_opt(&mut t.steps, a.steps);
            set(&mut t.epochs, a.epochs);
            set(&mut t.learning_rate, a.learning_rate);
            set(&mut t.weights.lambda_cyc, a.lambda_cyc);
            set(&mut t.checkpoint_every, a.checkpoint_every);
            set(&mut t.log_every, a.log_every);
            if a.synthetic.is_some() {
                cfg.data.source = a.synthetic.clone();
                cfg.data.target = a.synthetic.clone();
            }
            set_opt(&mut cfg.data.source, a.source.clone());
            set_opt(&mut cfg.data.target, a.target.clone());
            set_opt(&mut cfg.data.out, a.out.clone());
        }
        Command::Evaluate(a) => {
            set_opt(&mut cfg.data.checkpoint, a.checkpoint.clone());
            set_opt(&mut cfg.data.target, a.data.clone());
            set(&mut cfg.data.split, a.split);
            let e = &mut cfg.evaluation;
            set(
                &mut e.view,
                a.view.map(|v| match v {
                    ViewArg::CrossSpectrum => EvalView::CrossSpectrum,
                    ViewArg::Vis => EvalView::Vis,
                }),
            );
            set(&mut e.depth_range.min_m, a.min_depth);
            set(&mut e.depth_range.max_m, a.max_depth);
            e.dump_depth |= a.dump_depth;
            set_opt(&mut cfg.data.out, a.out.clone());
        }
        Command::Infer(a) => {
            set_opt(&mut cfg.data.checkpoint, a.checkpoint.clone());
            set_opt(&mut cfg.data.tir_left, a.tir_left.clone());
            set_opt(&mut cfg.data.vis_right, a.vis_right.clone());
            set_opt(&mut cfg.data.out, a.out.clone());
        }
    }
    cfg.apply_seed();
    Ok(cfg)
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from<I, T>(args: I) -> anyhow::Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run(Cli::try_parse_from(args)?)
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = resolve(&cli)?;
    match cli.command {
        Command::Synth(_) => cmd_synth(&cfg),
        Command::Train(_) => cmd_train(&cfg),
        Command::Evaluate(_) => cmd_evaluate(&cfg),
        Command::Infer(_) => cmd_infer(&cfg),
    }
}

/// Entry point of the binary.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

pub fn cmd_synth(cfg: &RunConfig) -> anyhow::Result<()> {
    let out = cfg.out_dir()?;
    cfg.synth.validate()?;
    let corpus = generate_synthetic_dataset(&cfg.synth, &out)?;
    cfg.echo(&out)?;
    let c = &corpus.train.calibration;
    println!("corpus     {}", out.display());
    println!("size       {}x{}", cfg.synth.width, cfg.synth.height);
    println!("train      {} scenes", corpus.train.len());
    println!("test       {} scenes", corpus.test.len());
    println!(
        "calibration focal {} px, baseline {} m, width {} px",
        c.focal_px, c.baseline_m, c.native_width_px
    );
    Ok(())
}

fn require_dir(path: &Option<PathBuf>, what: &str) -> anyhow::Result<PathBuf> {
    let path = path.clone().with_context(|| format!("no {what} dataset given"))?;
    ensure!(path.is_dir(), "{what} dataset {} does not exist", path.display());
    Ok(path)
}

pub fn cmd_train(cfg: &RunConfig) -> anyhow::Result<()> {
    let out = cfg.out_dir()?;
    let train = &cfg.training;
    train.validate()?;
    let size = ImageSize {
        width: train.network.input_width,
        height: train.network.input_height,
    };
    let source_root = require_dir(&cfg.data.source.clone().or(cfg.data.target.clone()), "source")?;
    let source = load_dataset(&source_root, Split::Train, Some(size))
        .with_context(|| format!("loading {}", source_root.display()))?
        .iter()
        .map(VisStereoSample::try_from)
        .collect::<crate::Result<Vec<_>>>()?;
    let target = match train.phase {
        Phase::Vis => Vec::new(),
        Phase::Full => {
            let root = require_dir(&cfg.data.target.clone().or(cfg.data.source.clone()), "target")?;
            load_dataset(&root, Split::Train, Some(size))
                .with_context(|| format!("loading {}", root.display()))?
                .iter()
                .map(CrossSpectrumSample::try_from)
                .collect::<crate::Result<Vec<_>>>()?
        }
    };
    cfg.echo(&out)?;
    let outcome = run_training_with(train, &source, &target, &out, |r| {
        let pick = |k: &str| r.terms.get(k).map(|v| format!(" {k}={v:.5}")).unwrap_or_default();
        eprintln!("step {:>6}{}{}{}", r.step, pick("l_v"), pick("cyc"), pick("total"));
    })?;
    println!("steps      {}", outcome.steps);
    println!("checkpoint {}", outcome.final_checkpoint.display());
    println!("log        {}", outcome.log_path.display());
    println!("final      {}", outcome.last);
    Ok(())
}

pub fn cmd_evaluate(cfg: &RunConfig) -> anyhow::Result<()> {
    let out = cfg.out_dir()?;
    let ck_path = cfg.data.checkpoint.clone().context("no checkpoint given")?;
    let checkpoint = load_checkpoint(&ck_path).with_context(|| format!("loading checkpoint {}", ck_path.display()))?;
    let root = require_dir(&cfg.data.target, "evaluation")?;
    let net = checkpoint.bundle.config();
    let size = ImageSize {
        width: net.input_width,
        height: net.input_height,
    };
    let samples = load_dataset(&root, cfg.data.split, Some(size))?;
    ensure!(!samples.is_empty(), "split {} of {} is empty", cfg.data.split, root.display());
    let calib = crate::data::read_calibration(&root)?;
    let dump = out.join("depth");
    let opts = EvalOptions {
        range: cfg.evaluation.depth_range,
        view: cfg.evaluation.view,
        dump_dir: cfg.evaluation.dump_depth.then_some(dump.as_path()),
    };
    cfg.echo(&out)?;
    let report = evaluate_model(&checkpoint.bundle, &samples, &calib, &opts)?;
    let path = out.join("report.json");
    report.write_json(&path)?;
    println!("{}", MetricsReport::table_header());
    println!("{}", report.aggregate.table_row());
    println!(
        "{} images, {} valid pixels, report {}",
        report.aggregate.num_images,
        report.aggregate.valid_pixels,
        path.display()
    );
    Ok(())
}

fn resize_plane(p: &ImagePlane, height: usize, width: usize) -> anyhow::Result<ImagePlane> {
    if (p.height(), p.width()) == (height, width) {
        return Ok(p.clone());
    }
    Ok(ImagePlane::from_tensor(resize(p.tensor(), height, width, ResizeMode::Bilinear))?)
}

pub fn cmd_infer(cfg: &RunConfig) -> anyhow::Result<()> {
    let out = cfg.out_dir()?;
    let ck_path = cfg.data.checkpoint.clone().context("no checkpoint given")?;
    let tir_path = cfg.data.tir_left.clone().context("no --tir-left image given")?;
    let vis_path = cfg.data.vis_right.clone().context("no --vis-right image given")?;
    let tir = read_image(&tir_path, 1).with_context(|| format!("thermal input {}", tir_path.display()))?;
    let vis = read_image(&vis_path, 3).with_context(|| format!("visible input {}", vis_path.display()))?;
    if !tir.same_size(&vis) {
        bail!(
            "input sizes differ: {}x{} thermal vs {}x{} visible",
            tir.width(),
            tir.height(),
            vis.width(),
            vis.height()
        );
    }
    let bundle: NetworkBundle = load_checkpoint(&ck_path)
        .with_context(|| format!("loading checkpoint {}", ck_path.display()))?
        .bundle;
    let net = bundle.config();
    let input = resize_plane(&tir, net.input_height, net.input_width)?;
    let low = bundle.predict_disparity(Spectrum::Tir, &input)?;
    // Width-fraction disparity carries over to the native resolution unchanged.
    let disparity = DisparityMap::with_limit(resize_plane(low.plane(), tir.height(), tir.width())?, net.max_disparity)?;

    cfg.echo(&out)?;
    let disp_path = out.join("disparity.png");
    let preview_path = out.join("preview.png");
    write_disparity_u16(&disparity, &disp_path)?;
    write_image(&colorize(disparity.plane())?, &preview_path)?;
    println!(
        "disparity  min {:.5} max {:.5} mean {:.5} (fraction of width)",
        disparity.min(),
        disparity.max(),
        disparity.mean()
    );
    println!("written    {} {}", disp_path.display(), preview_path.display());
    Ok(())
}
