//! Runs the complete schedule (visible stereo, adversarial transfer and
//! cycle consistency) with logs and checkpoints written to a directory.
//!
//! `cargo run --release --example train_full -- [STEPS] [OUT_DIR]`

use std::path::PathBuf;

use crossdepth::data::{generate_scenes, SynthParams};
use crossdepth::training::{run_training_with, CrossSpectrumSample, Phase, TrainConfig, VisStereoSample};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(20);
    let tmp = tempfile::tempdir()?;
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| tmp.path().to_path_buf());

    let (train, _) = generate_scenes(&SynthParams {
        num_scenes: 16,
        ..SynthParams::default()
    })?;
    let source: Vec<VisStereoSample> = train.iter().map(Into::into).collect();
    let target: Vec<CrossSpectrumSample> = train.iter().map(Into::into).collect();
    let cfg = TrainConfig {
        phase: Phase::Full,
        steps: Some(steps),
        log_every: 5,
        checkpoint_every: 10,
        ..TrainConfig::default()
    };

    let outcome = run_training_with(&cfg, &source, &target, &out, |r| {
        println!(
            "step {:>4}: l_v {:.4} ms {:.4} cyc {:.4} gan_d {:.4}",
            r.step,
            r.terms.value("l_v"),
            r.terms.value("ms"),
            r.terms.value("cyc"),
            r.terms.value("gan_d")
        );
    })?;
    println!("final checkpoint {}", outcome.final_checkpoint.display());
    println!("log {}", outcome.log_path.display());
    Ok(())
}
