use mapseg::unet::ParamKind;
use mapseg::{Error, Rng, Shape4, Tensor, UNetConfig, UNetModel};

fn cfg(depth: usize, base: usize, classes: usize, patch: usize) -> UNetConfig {
    UNetConfig {
        input_channels: 3,
        num_classes: classes,
        depth,
        base_filters: base,
        patch_size: patch,
    }
}

#[test]
fn hand_enumerated_parameter_count() {
    // enc0: conv 3→1 (27+1) + bn (2), conv 1→1 (9+1) + bn (2)      = 42
    // bottleneck: conv 1→2 (18+2) + bn (4), conv 2→2 (36+2) + bn (4) = 66
    // dec0: up 2→1 (18+1+2), block1 2→1 (18+1+2), block2 1→1 (9+1+2) = 54
    // head: 1×1 conv 1→2 (2+2)                                       = 4
    let m = UNetModel::<f32>::build(cfg(1, 1, 2, 8), &mut Rng::new(0)).unwrap();
    assert_eq!(m.parameter_count(), 42 + 66 + 54 + 4);
}

#[test]
fn count_is_architecture_only() {
    let a = UNetModel::<f32>::build(UNetConfig::default(), &mut Rng::new(1)).unwrap();
    let b = UNetModel::<f32>::build(UNetConfig::default(), &mut Rng::new(2)).unwrap();
    assert_eq!(a.parameter_count(), b.parameter_count());
}

#[test]
fn doubling_base_roughly_quadruples_conv_weights() {
    let weights = |base| {
        let m = UNetModel::<f32>::build(cfg(2, base, 11, 16), &mut Rng::new(0)).unwrap();
        m.params()
            .iter()
            .filter(|p| p.name.ends_with("conv.weight"))
            .map(|p| p.data.len())
            .sum::<usize>() as f64
    };
    let ratio = weights(16) / weights(8);
    assert!((3.8..=4.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn default_head_has_eleven_outputs() {
    let m = UNetModel::<f32>::build(UNetConfig::default(), &mut Rng::new(0)).unwrap();
    assert_eq!(m.head.out_channels(), 11);
}

#[test]
fn same_seed_same_model() {
    let a = UNetModel::<f32>::build(cfg(2, 4, 5, 16), &mut Rng::new(9)).unwrap();
    let b = UNetModel::<f32>::build(cfg(2, 4, 5, 16), &mut Rng::new(9)).unwrap();
    let c = UNetModel::<f32>::build(cfg(2, 4, 5, 16), &mut Rng::new(10)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn initialization_scheme() {
    let m = UNetModel::<f32>::build(UNetConfig::default(), &mut Rng::new(3)).unwrap();
    for p in m.params() {
        if p.name.ends_with("bias") || p.name.ends_with("beta") || p.name.ends_with("running_mean") {
            assert!(p.data.iter().all(|&v| v == 0.0), "{}", p.name);
        } else if p.name.ends_with("gamma") || p.name.ends_with("running_var") {
            assert!(p.data.iter().all(|&v| v == 1.0), "{}", p.name);
        }
    }
    // He-normal: stddev √(2 / fan_in) for the 3×3 conv 16→16 of enc0.block2
    let w = m.params().into_iter().find(|p| p.name == "enc0.block2.conv.weight").unwrap();
    let var = w.data.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / w.data.len() as f64;
    let expected = 2.0 / (16.0 * 9.0);
    assert!((var / expected - 1.0).abs() < 0.15, "variance {var} vs {expected}");
}

#[test]
fn names_are_unique_and_buffers_marked() {
    let m = UNetModel::<f32>::build(UNetConfig::default(), &mut Rng::new(0)).unwrap();
    let params = m.params();
    let mut names: Vec<&str> = params.iter().map(|p| p.name.as_str()).collect();
    names.sort();
    names.dedup();
    assert_eq!(names.len(), params.len());
    for p in &params {
        let buffer = p.name.contains("running_");
        assert_eq!(p.kind == ParamKind::Buffer, buffer, "{}", p.name);
    }
    assert_eq!(params.first().unwrap().name, "enc0.block1.conv.weight");
    assert_eq!(params.last().unwrap().name, "head.bias");
}

#[test]
fn output_matches_input_size() {
    for (depth, patch, h, w) in [(1usize, 8usize, 8usize, 8usize), (2, 16, 16, 32), (3, 32, 24, 40), (1, 4, 2, 6)] {
        let c = cfg(depth, 2, 3, patch);
        let m = UNetModel::<f32>::build(c, &mut Rng::new(0)).unwrap();
        let x = Tensor::rand_normal(Shape4::new(2, 3, h, w), 0.0, 1.0, &mut Rng::new(1)).unwrap();
        let y = m.infer(&x).unwrap();
        assert_eq!(y.shape(), Shape4::new(2, 3, h, w));
    }
}

#[test]
fn bad_inputs_are_shape_errors() {
    let m = UNetModel::<f32>::build(cfg(2, 2, 3, 16), &mut Rng::new(0)).unwrap();
    let wrong_c = Tensor::zeros(Shape4::new(1, 4, 16, 16));
    let odd = Tensor::zeros(Shape4::new(1, 3, 14, 16));
    assert!(matches!(m.infer(&wrong_c), Err(Error::Shape(_))));
    assert!(matches!(m.infer(&odd), Err(Error::Shape(_))));
}

#[test]
fn invalid_configs_rejected() {
    for c in [cfg(3, 16, 11, 100), cfg(1, 0, 2, 8), cfg(1, 2, 1, 8), cfg(0, 2, 2, 0)] {
        assert!(matches!(UNetModel::<f32>::build(c, &mut Rng::new(0)), Err(Error::Config(_))), "{c:?}");
    }
    assert!(UNetModel::<f32>::build(cfg(0, 2, 2, 4), &mut Rng::new(0)).is_ok());
}

#[test]
fn inference_is_pure() {
    let m = UNetModel::<f32>::build(cfg(2, 4, 5, 16), &mut Rng::new(4)).unwrap();
    let x = Tensor::rand_normal(Shape4::new(2, 3, 16, 16), 0.5, 0.2, &mut Rng::new(5)).unwrap();
    let a = m.infer(&x).unwrap();
    let b = m.infer(&x).unwrap();
    assert_eq!(a.data(), b.data());
}

#[test]
fn training_forward_updates_running_stats_only() {
    let mut m = UNetModel::<f32>::build(cfg(1, 2, 2, 8), &mut Rng::new(4)).unwrap();
    let before = m.clone();
    let x = Tensor::rand_normal(Shape4::new(2, 3, 8, 8), 0.5, 0.2, &mut Rng::new(5)).unwrap();
    m.forward(&x, true).unwrap();
    assert_eq!(m, before);
    m.forward_train(&x).unwrap();
    for (a, b) in m.params().iter().zip(before.params()) {
        let changed = a.data != b.data;
        assert_eq!(changed, a.kind == ParamKind::Buffer, "{}", a.name);
    }
}

#[test]
fn backward_is_deterministic_and_named() {
    let m = UNetModel::<f32>::build(cfg(2, 4, 5, 16), &mut Rng::new(4)).unwrap();
    let x = Tensor::rand_normal(Shape4::new(2, 3, 16, 16), 0.5, 0.2, &mut Rng::new(5)).unwrap();
    let (logits, cache) = m.forward(&x, true).unwrap();
    let g = Tensor::rand_normal(logits.shape(), 0.0, 1.0, &mut Rng::new(6)).unwrap();
    let a = m.backward(&cache, &g).unwrap();
    let b = m.backward(&cache, &g).unwrap();
    assert_eq!(a, b);
    let trainable: Vec<String> = m
        .params()
        .into_iter()
        .filter(|p| p.kind == ParamKind::Trainable)
        .map(|p| p.name)
        .collect();
    assert_eq!(a.names().collect::<Vec<_>>(), trainable);
    for (e, p) in a.entries.iter().zip(m.params().into_iter().filter(|p| p.kind == ParamKind::Trainable)) {
        assert_eq!(e.dims, p.dims);
    }
}

#[test]
fn zero_logit_gradient_gives_zero_gradients() {
    let m = UNetModel::<f32>::build(cfg(2, 4, 5, 16), &mut Rng::new(4)).unwrap();
    let x = Tensor::rand_normal(Shape4::new(2, 3, 16, 16), 0.5, 0.2, &mut Rng::new(5)).unwrap();
    let (logits, cache) = m.forward(&x, true).unwrap();
    let grads = m.backward(&cache, &Tensor::zeros(logits.shape())).unwrap();
    assert!(grads.is_zero());
}

#[test]
fn mismatched_cache_is_state_error() {
    let m = UNetModel::<f32>::build(cfg(2, 4, 5, 16), &mut Rng::new(4)).unwrap();
    let other = UNetModel::<f32>::build(cfg(1, 4, 5, 16), &mut Rng::new(4)).unwrap();
    let x = Tensor::rand_normal(Shape4::new(1, 3, 16, 16), 0.5, 0.2, &mut Rng::new(5)).unwrap();
    let (logits, cache) = other.forward(&x, true).unwrap();
    assert!(matches!(m.backward(&cache, &logits), Err(Error::State(_))));
    let (_, cache) = m.forward(&x, true).unwrap();
    let wrong = Tensor::zeros(Shape4::new(1, 5, 8, 8));
    assert!(matches!(m.backward(&cache, &wrong), Err(Error::State(_))));
}

#[test]
fn single_precision_tracks_double() {
    let m = UNetModel::<f32>::build(cfg(2, 8, 4, 16), &mut Rng::new(8)).unwrap();
    let x = Tensor::rand_normal(Shape4::new(2, 3, 16, 16), 0.5, 0.2, &mut Rng::new(5)).unwrap();
    let y32 = m.infer(&x).unwrap();
    let y64 = m.cast::<f64>().infer(&x.cast()).unwrap();
    let err = y32
        .data()
        .iter()
        .zip(y64.data())
        .map(|(&a, &b)| (a as f64 - b).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-4, "{err}");
}
