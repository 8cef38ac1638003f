//! Trains the visible-light stereo branch in memory and reports the loss.
//!
//! `cargo run --release --example train_vis -- [STEPS]`

use crossdepth::data::{generate_scenes, SynthParams};
use crossdepth::evaluation::disparity_abs_rel;
use crossdepth::networks::Spectrum;
use crossdepth::training::{Phase, TrainConfig, Trainer, VisStereoSample};

fn main() -> anyhow::Result<()> {
    let steps: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(60);
    let params = SynthParams {
        num_scenes: 24,
        test_fraction: 0.25,
        ..SynthParams::default()
    };
    let (train, test) = generate_scenes(&params)?;
    let samples: Vec<VisStereoSample> = train.iter().map(Into::into).collect();
    let mut trainer = Trainer::new(TrainConfig {
        phase: Phase::Vis,
        ..TrainConfig::default()
    })?;

    for step in 0..steps {
        let b = trainer.vis_step(&samples[step % samples.len()])?;
        if step % 10 == 0 || step + 1 == steps {
            println!("step {step:>4}: l_v {:.4}", b.value("l_v"));
        }
    }
    let mut err = 0.0;
    for scene in &test {
        let pred = trainer.bundle().predict_disparity(Spectrum::Vis, &scene.vis_left)?;
        err += disparity_abs_rel(&pred, &scene.disparity_left)?;
    }
    println!("held-out disparity abs rel {:.4}", err / test.len() as f64);
    Ok(())
}
