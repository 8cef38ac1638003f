use crossdepth::checkpoint::{load_checkpoint, save_checkpoint};
use crossdepth::geometry::ImagePlane;
use crossdepth::networks::*;
use crossdepth::Error;
use crossdepth_autograd::{Graph, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_plane(c: usize, h: usize, w: usize, seed: u64) -> ImagePlane {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ImagePlane::new(c, h, w, (0..c * h * w).map(|_| rng.random::<f64>()).collect()).unwrap()
}

fn tiny() -> (NetworkConfig, NetworkBundle) {
    let cfg = NetworkConfig::default();
    let b = NetworkBundle::build(&cfg, 7).unwrap();
    (cfg, b)
}

#[test]
fn same_seed_same_parameters() {
    let cfg = NetworkConfig::default();
    let a = NetworkBundle::build(&cfg, 11).unwrap();
    let b = NetworkBundle::build(&cfg, 11).unwrap();
    let c = NetworkBundle::build(&cfg, 12).unwrap();
    assert_eq!(a.parameter_digest(None), b.parameter_digest(None));
    assert_ne!(a.parameter_digest(None), c.parameter_digest(None));
}

#[test]
fn non_encoder_weights_follow_init_std() {
    let (_, b) = tiny();
    let mut values = Vec::new();
    for comp in b.components() {
        if matches!(comp, Component::EncoderVis | Component::EncoderTir) {
            continue;
        }
        for &id in b.params(comp) {
            let name = b.store().name(id);
            if name.ends_with(".weight") {
                values.extend_from_slice(b.store().get(id).data());
            } else {
                assert!(b.store().get(id).data().iter().all(|&v| v == 0.0), "{name}");
            }
        }
    }
    assert!(values.len() >= 10_000);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((std - 0.02).abs() <= 0.02 * 0.15, "std {std}");
}

/// Resolution after `k` stride-2 convolutions with kernel 3 and padding 1.
fn strided(n: usize, k: usize) -> usize {
    (0..k).fold(n, |n, _| (n + 2 - 3) / 2 + 1)
}

#[test]
fn tiny_pyramid_matches_schedule() {
    let (cfg, b) = tiny();
    let img = random_plane(3, 48, 64, 1);
    let p = b.encode(Spectrum::Vis, &img).unwrap();
    let channels = [16, 16, 32, 64, 128];
    assert_eq!(p.scales.len(), 5);
    for (k, t) in p.scales.iter().enumerate() {
        assert_eq!(t.shape(), &[channels[k], strided(48, k + 1), strided(64, k + 1)]);
    }
    let sizes: Vec<_> = p.scales.iter().map(|t| (t.shape()[1], t.shape()[2])).collect();
    assert_eq!(sizes, [(24, 32), (12, 16), (6, 8), (3, 4), (2, 2)]);
    assert_eq!(
        cfg.pyramid_shapes(),
        p.scales.iter().map(|t| <[usize; 3]>::try_from(t.shape()).unwrap()).collect::<Vec<_>>()
    );
    let thermal = b.encode(Spectrum::Tir, &random_plane(1, 48, 64, 2)).unwrap();
    assert_eq!(thermal.scales.len(), 5);
}

#[test]
fn encode_rejects_wrong_size_or_channels() {
    let (_, b) = tiny();
    assert!(matches!(b.encode(Spectrum::Vis, &random_plane(3, 48, 32, 1)), Err(Error::Contract { .. })));
    assert!(matches!(b.encode(Spectrum::Tir, &random_plane(3, 48, 64, 1)), Err(Error::Contract { .. })));
}

#[test]
fn encode_is_finite_and_deterministic() {
    let (_, b) = tiny();
    let zero = ImagePlane::filled(3, 48, 64, 0.0).unwrap();
    let p = b.encode(Spectrum::Vis, &zero).unwrap();
    assert!(p.scales.iter().all(Tensor::all_finite));
    let img = random_plane(3, 48, 64, 3);
    assert_eq!(b.encode(Spectrum::Vis, &img).unwrap(), b.encode(Spectrum::Vis, &img).unwrap());
}

#[test]
fn disparities_are_bounded_and_resized() {
    let (cfg, b) = tiny();
    let p = b.encode(Spectrum::Vis, &random_plane(3, 48, 64, 4)).unwrap();
    let d = b.decode_disparity(&p).unwrap();
    assert_eq!(d.len(), 4);
    let shapes: Vec<_> = d.iter().map(|m| (m.height(), m.width())).collect();
    assert_eq!(shapes, [(48, 64), (24, 32), (12, 16), (6, 8)]);
    assert_eq!(
        cfg.disparity_shapes(),
        shapes.iter().map(|&(h, w)| [1, h, w]).collect::<Vec<_>>()
    );
    for m in &d {
        assert!(m.min() >= 0.0 && m.max() <= cfg.max_disparity);
    }

    let g = Graph::new();
    let vars: Vec<_> = p.scales.iter().map(|t| g.constant(t.clone())).collect();
    for v in b.full_resolution_disparities(&g, &vars) {
        assert_eq!(g.shape(v), [1, 48, 64]);
    }

    let mut short = p.clone();
    short.scales.pop();
    assert!(matches!(b.decode_disparity(&short), Err(Error::Contract { .. })));
}

#[test]
fn mean_disparity_depends_on_every_pyramid_entry() {
    let (_, b) = tiny();
    let p = b.encode(Spectrum::Vis, &random_plane(3, 48, 64, 5)).unwrap();
    let g = Graph::new();
    let vars: Vec<_> = p.scales.iter().map(|t| g.input(t.clone())).collect();
    let d = b.decode_disparity_var(&g, &vars);
    let loss = g.mean(d[0]);
    let grads = g.backward(loss);
    for (k, v) in vars.iter().enumerate() {
        let gr = grads.get(*v).expect("gradient");
        assert!(gr.data().iter().any(|&x| x != 0.0), "scale {k}");
    }
}

#[test]
fn discriminator_logit_schedule() {
    let (cfg, b) = tiny();
    let p = b.encode(Spectrum::Vis, &random_plane(3, 48, 64, 6)).unwrap();
    let logits = b.discriminate(&p).unwrap();
    let shapes: Vec<_> = logits.iter().map(|t| t.shape().to_vec()).collect();
    // Scale i (1-based) uses max(1, 4 - i) stride-2, kernel-4, pad-1 stages.
    let oracle: Vec<Vec<usize>> = p
        .scales
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let stages = (4i64 - (k as i64 + 1)).max(1) as usize;
            let down = |n: usize| (0..stages).fold(n, |n, _| (n + 2 - 4) / 2 + 1);
            vec![1, down(t.shape()[1]), down(t.shape()[2])]
        })
        .collect();
    assert_eq!(shapes, oracle);
    assert_eq!(shapes, [vec![1, 3, 4], vec![1, 3, 4], vec![1, 3, 4], vec![1, 1, 2], vec![1, 1, 1]]);
    assert_eq!(cfg.logit_shapes().iter().map(|s| s.to_vec()).collect::<Vec<_>>(), shapes);
    assert!(logits.iter().all(Tensor::all_finite));
}

#[test]
fn discriminator_batch_has_no_cross_sample_mixing() {
    let (_, b) = tiny();
    let pa = b.encode(Spectrum::Vis, &random_plane(3, 48, 64, 7)).unwrap();
    let pb = b.encode(Spectrum::Vis, &random_plane(3, 48, 64, 8)).unwrap();
    let ab = b.discriminate_batch(&[pa.clone(), pb.clone()]).unwrap();
    let ba = b.discriminate_batch(&[pb, pa]).unwrap();
    assert_eq!(ab[0], ba[1]);
    assert_eq!(ab[1], ba[0]);
    let mut p = b.encode(Spectrum::Vis, &random_plane(3, 48, 64, 9)).unwrap();
    p.scales.pop();
    assert!(b.discriminate(&p).is_err());
}

#[test]
fn reconstructions_are_images_sensitive_to_every_scale() {
    let (_, b) = tiny();
    let p = b.encode(Spectrum::Tir, &random_plane(1, 48, 64, 10)).unwrap();
    for (spectrum, channels) in [(Spectrum::Tir, 1), (Spectrum::Vis, 3)] {
        let r = b.reconstruct(spectrum, &p).unwrap();
        assert_eq!(r.dims(), (channels, 48, 64));
        assert!(r.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(r, b.reconstruct(spectrum, &p).unwrap());
        for k in 0..p.scales.len() {
            let mut zeroed = p.clone();
            zeroed.scales[k] = Tensor::zeros(zeroed.scales[k].shape().to_vec());
            assert_ne!(b.reconstruct(spectrum, &zeroed).unwrap(), r, "scale {k}");
        }
    }
}

#[test]
fn encoders_share_architecture_not_parameters() {
    let (_, b) = tiny();
    let vis = b.params(Component::EncoderVis);
    let tir = b.params(Component::EncoderTir);
    assert_eq!(vis.len(), tir.len());
    for (v, t) in vis.iter().zip(tir) {
        assert_ne!(v, t);
        let (sv, st) = (b.store().get(*v).shape(), b.store().get(*t).shape());
        assert_eq!(sv[0], st[0]);
    }
}

#[test]
fn checkpoint_round_trip_preserves_outputs() {
    let (_, b) = tiny();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/model.ckpt");
    save_checkpoint(&b, Some(&"cfg"), 9, &path).unwrap();
    let loaded = load_checkpoint(&path).unwrap();
    assert_eq!(loaded.step, 9);
    let img = random_plane(1, 48, 64, 11);
    let before = b.predict_disparity(Spectrum::Tir, &img).unwrap();
    let after = loaded.bundle.predict_disparity(Spectrum::Tir, &img).unwrap();
    assert_eq!(before.plane().data(), after.plane().data());
    assert!(matches!(load_checkpoint(&dir.path().join("missing.ckpt")), Err(Error::Io { .. })));
}

#[test]
fn resnet_encoder_shapes_and_pretrained_load() {
    let cfg = NetworkConfig {
        encoder: EncoderKind::Resnet18,
        input_width: 64,
        input_height: 64,
        ..NetworkConfig::default()
    };
    let source = NetworkBundle::build(&cfg, 1).unwrap();
    let p = source.encode(Spectrum::Vis, &random_plane(3, 64, 64, 12)).unwrap();
    let shapes: Vec<_> = p.scales.iter().map(|t| t.shape().to_vec()).collect();
    assert_eq!(
        shapes,
        [vec![64, 32, 32], vec![64, 16, 16], vec![128, 8, 8], vec![256, 4, 4], vec![512, 2, 2]]
    );

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pre.ckpt");
    save_checkpoint::<()>(&source, None, 0, &path).unwrap();
    let warm = NetworkBundle::build(
        &NetworkConfig {
            pretrained_encoder: Some(path),
            ..cfg
        },
        2,
    )
    .unwrap();
    assert_eq!(
        warm.parameter_digest(Some(Component::EncoderVis)),
        source.parameter_digest(Some(Component::EncoderVis))
    );
    assert_ne!(
        warm.parameter_digest(Some(Component::DepthDecoder)),
        source.parameter_digest(Some(Component::DepthDecoder))
    );
    let stem = warm.store().find("encoder_tir.stem.weight").unwrap();
    let vis_stem = source.store().get(source.store().find("encoder_vis.stem.weight").unwrap());
    let expected = (vis_stem.data()[0] + vis_stem.data()[49] + vis_stem.data()[98]) / 3.0;
    assert!((warm.store().get(stem).data()[0] - expected).abs() < 1e-15);
}
