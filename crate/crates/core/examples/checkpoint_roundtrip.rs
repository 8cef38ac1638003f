//! Saves a bundle with its training configuration and restores it bit-exactly.

use crossdepth::checkpoint::{load_checkpoint, save_checkpoint};
use crossdepth::networks::{NetworkBundle, NetworkConfig};
use crossdepth::training::TrainConfig;

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("model.ckpt");
    let bundle = NetworkBundle::build(&NetworkConfig::default(), 42)?;
    save_checkpoint(&bundle, Some(&TrainConfig::default()), 123, &path)?;
    println!("{} bytes written", std::fs::metadata(&path)?.len());

    let restored = load_checkpoint(&path)?;
    let before = bundle.parameter_digest(None);
    let after = restored.bundle.parameter_digest(None);
    println!("step {} restored", restored.step);
    println!("digest before {}", hex(&before));
    println!("digest after  {}", hex(&after));
    anyhow::ensure!(before == after, "parameters changed in the round trip");
    let saved: TrainConfig = serde_json::from_value(restored.training.expect("config was saved"))?;
    println!("saved learning rate {}", saved.learning_rate);
    Ok(())
}
