//! Turns a visible image into a simulated thermal one under a few settings.
//!
//! `cargo run --example thermal_simulation -- [OUT_DIR]`

use std::path::PathBuf;

use crossdepth::data::{generate_scene, simulate_thermal, write_image, SynthParams, ThermalParams};

fn stats(data: &[f64]) -> (f64, f64) {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn main() -> anyhow::Result<()> {
    let tmp = tempfile::tempdir()?;
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| tmp.path().to_path_buf());
    let scene = generate_scene(&SynthParams::default(), 0)?;
    write_image(&scene.vis_left, &out.join("vis_left.png"))?;

    let settings = [
        ("identity", ThermalParams::identity()),
        ("default", ThermalParams::default()),
        (
            "blurry",
            ThermalParams {
                blur_sigma_px: 2.5,
                noise_std: 0.05,
                ..ThermalParams::default()
            },
        ),
    ];
    for (name, params) in settings {
        let tir = simulate_thermal(&scene.vis_left, &params, 7)?;
        let (mean, std) = stats(tir.data());
        let path = out.join(format!("tir_{name}.png"));
        write_image(&tir, &path)?;
        println!("{name:>8}: mean {mean:.3} std {std:.3} -> {}", path.display());
    }
    Ok(())
}
