//! Evaluates each objective on hand-made inputs.

use crossdepth::data::{generate_scene, SynthParams};
use crossdepth::geometry::DisparityMap;
use crossdepth::losses::{
    adversarial_losses, cycle_consistency_loss, total_loss, vis_total_loss, GeneratorLoss, LossWeights, SsimConfig,
    StereoPair,
};
use crossdepth_autograd::Tensor;

fn main() -> anyhow::Result<()> {
    let scene = generate_scene(&SynthParams::default(), 1)?;
    let (h, w) = (scene.vis_left.height(), scene.vis_left.width());
    let weights = LossWeights::default();
    let pair = StereoPair {
        left: &scene.vis_left,
        right: &scene.vis_right,
    };

    let truth = vec![(scene.disparity_left.clone(), scene.disparity_right.clone())];
    let flat = DisparityMap::constant(h, w, 0.1)?;
    let guess = vec![(flat.clone(), flat.clone())];
    for (name, disparities) in [("true disparity", truth), ("flat guess", guess)] {
        let b = vis_total_loss(pair, &disparities, &weights, &SsimConfig::default())?;
        let terms: Vec<String> = b.iter().map(|(k, v)| format!("{k}={v:.4}")).collect();
        println!("{name:>15}: {}", terms.join(" "));
    }

    let zeros = vec![Tensor::zeros(&[1, 4, 4])];
    let (gen, disc) = adversarial_losses(&zeros, &zeros, GeneratorLoss::NonSaturating)?;
    println!("undecided discriminator: generator {gen:.4} (ln 2), discriminator {disc:.4} (2 ln 2)");

    let shifted = DisparityMap::constant(h, w, 0.12)?;
    let cyc = cycle_consistency_loss(&flat, &flat, &shifted, &shifted)?;
    println!("cycle loss for a 0.02 disagreement: {cyc:.4}");
    println!("weighted total of (0.5, 0.4, 0.02): {:.4}", total_loss(0.5, 0.4, 0.02, &weights)?);
    Ok(())
}
