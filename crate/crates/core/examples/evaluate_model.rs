//! Scores predictors on a held-out synthetic split: the ground truth itself,
//! a constant guess, and an untrained network.

use crossdepth::data::{generate_scenes, DatasetSample, SynthParams};
use crossdepth::evaluation::{evaluate_model, evaluate_with, EvalOptions, MetricsReport};
use crossdepth::geometry::{depth_to_disparity, DisparityMap};
use crossdepth::networks::{NetworkBundle, NetworkConfig};

fn main() -> anyhow::Result<()> {
    let params = SynthParams {
        num_scenes: 12,
        test_fraction: 0.5,
        ..SynthParams::default()
    };
    let calib = params.calibration();
    let (_, test) = generate_scenes(&params)?;
    let samples: Vec<DatasetSample> =
        test.iter().enumerate().map(|(i, s)| DatasetSample::from_scene(format!("{i:06}"), s)).collect();
    let opts = EvalOptions::default();

    let oracle = evaluate_with(&samples, &calib, &opts, |s| depth_to_disparity(s.depth.as_ref().unwrap(), &calib))?;
    let constant = evaluate_with(&samples, &calib, &opts, |s| {
        DisparityMap::constant(s.tir_left.height(), s.tir_left.width(), 0.1)
    })?;
    let untrained = evaluate_model(&NetworkBundle::build(&NetworkConfig::default(), 0)?, &samples, &calib, &opts)?;

    println!("{:>10} {}", "", MetricsReport::table_header());
    for (name, report) in [("oracle", oracle), ("constant", constant), ("untrained", untrained)] {
        println!("{name:>10} {}", report.aggregate.table_row());
    }
    Ok(())
}
