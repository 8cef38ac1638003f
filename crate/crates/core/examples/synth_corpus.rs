//! Generates a small synthetic stereo corpus on disk and reads it back.
//!
//! `cargo run --example synth_corpus -- [OUT_DIR]`

use std::path::PathBuf;

use crossdepth::data::{generate_synthetic_dataset, load_dataset, read_calibration, Split, SynthParams};

fn main() -> anyhow::Result<()> {
    let tmp = tempfile::tempdir()?;
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| tmp.path().join("corpus"));
    let params = SynthParams {
        num_scenes: 6,
        test_fraction: 1.0 / 3.0,
        seed: 11,
        ..SynthParams::default()
    };
    let corpus = generate_synthetic_dataset(&params, &out)?;
    println!("wrote {} train and {} test scenes to {}", corpus.train.len(), corpus.test.len(), out.display());

    let calib = read_calibration(&out)?;
    println!("calibration: focal {} px, baseline {} m", calib.focal_px, calib.baseline_m);
    for sample in load_dataset(&out, Split::Test, None)? {
        let depth = sample.depth.as_ref().expect("synthetic scenes carry depth");
        let valid: Vec<f64> = depth.data().iter().copied().filter(|&z| z > 0.0).collect();
        let (near, far) = valid.iter().fold((f64::MAX, 0.0f64), |(lo, hi), &z| (lo.min(z), hi.max(z)));
        println!(
            "{}: {}x{} thermal, depth {near:.2}..{far:.2} m",
            sample.id,
            sample.tir_left.width(),
            sample.tir_left.height()
        );
    }
    Ok(())
}
