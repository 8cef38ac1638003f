//! Predicts disparity for a thermal-left / visible-right pair and writes it
//! as a 16-bit PNG plus a colour preview.
//!
//! `cargo run --example infer_pair -- [CHECKPOINT] [OUT_DIR]`

use std::path::PathBuf;

use crossdepth::checkpoint::load_checkpoint;
use crossdepth::data::{colorize, generate_scene, write_disparity_u16, write_image, SynthParams};
use crossdepth::networks::{NetworkBundle, NetworkConfig, Spectrum};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let bundle = match args.next() {
        Some(path) => load_checkpoint(PathBuf::from(path).as_path())?.bundle,
        None => NetworkBundle::build(&NetworkConfig::default(), 0)?,
    };
    let tmp = tempfile::tempdir()?;
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| tmp.path().to_path_buf());

    let scene = generate_scene(&SynthParams::default(), 5)?;
    let disparity = bundle.predict_disparity(Spectrum::Tir, &scene.tir_left)?;
    write_disparity_u16(&disparity, &out.join("disparity.png"))?;
    write_image(&colorize(disparity.plane())?, &out.join("preview.png"))?;
    println!(
        "disparity {:.4}..{:.4} (mean {:.4}) written to {}",
        disparity.min(),
        disparity.max(),
        disparity.mean(),
        out.display()
    );
    Ok(())
}
