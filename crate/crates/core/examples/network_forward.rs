//! Builds every network and runs one image through each of them.

use crossdepth::data::{generate_scene, SynthParams};
use crossdepth::networks::{NetworkBundle, NetworkConfig, Spectrum};

fn main() -> anyhow::Result<()> {
    let cfg = NetworkConfig::default();
    let bundle = NetworkBundle::build(&cfg, 0)?;
    for component in bundle.components() {
        let count: usize = bundle.params(component).iter().map(|&id| bundle.store().get(id).len()).sum();
        println!("{component:?}: {count} weights");
    }

    let scene = generate_scene(&SynthParams::default(), 0)?;
    let pyramid = bundle.encode(Spectrum::Tir, &scene.tir_left)?;
    for (k, t) in pyramid.scales.iter().enumerate() {
        println!("feature scale {k}: {:?}", t.shape());
    }
    for (k, d) in bundle.decode_disparity(&pyramid)?.iter().enumerate() {
        println!("disparity scale {k}: {}x{}, mean {:.4}", d.width(), d.height(), d.mean());
    }
    let recon = bundle.reconstruct(Spectrum::Vis, &pyramid)?;
    println!("cross reconstruction: {} channels", recon.channels());
    for (k, logits) in bundle.discriminate(&pyramid)?.iter().enumerate() {
        println!("discriminator {k}: logits {:?}", logits.shape());
    }
    Ok(())
}
