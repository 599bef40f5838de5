use mapseg::layers::{conv2d_backward, conv2d_forward, ConvParams};
use mapseg::reference::conv2d_direct;
use mapseg::{Rng, Shape4, Tensor};
use proptest::prelude::*;

fn uniform(shape: Shape4, rng: &mut Rng) -> Tensor {
    Tensor::from_vec(shape, (0..shape.len()).map(|_| rng.uniform(-1.0, 1.0) as f32).collect()).unwrap()
}

fn instance(xs: Shape4, k: usize, kh: usize, kw: usize, seed: u64) -> (Tensor, ConvParams) {
    let mut rng = Rng::new(seed);
    let x = uniform(xs, &mut rng);
    let w = uniform(Shape4::new(k, xs.c, kh, kw), &mut rng).map(|v| 0.5 * v);
    let b = (0..k).map(|_| rng.uniform(-1.0, 1.0) as f32).collect();
    (x, ConvParams::new(w, b).unwrap())
}

fn max_abs_diff(a: &[f32], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&a, &b)| (a as f64 - b).abs()).fold(0.0, f64::max)
}

#[test]
fn largest_instance_same_padding() {
    let (x, p) = instance(Shape4::new(2, 4, 16, 16), 8, 3, 3, 5);
    let y = conv2d_forward(&x, &p, 1, 1).unwrap().0;
    let oracle = conv2d_direct(&x, &p, 1, 1).unwrap();
    assert_eq!(y.shape(), oracle.shape());
    assert!(max_abs_diff(y.data(), oracle.data()) <= 1e-5);
}

#[test]
fn hand_example() {
    let x = Tensor::from_vec(Shape4::new(1, 1, 3, 3), (1..=9).map(|v| v as f32).collect()).unwrap();
    let p = ConvParams::new(Tensor::full(Shape4::new(1, 1, 2, 2), 1.0).unwrap(), vec![0.0]).unwrap();
    assert_eq!(conv2d_direct(&x, &p, 1, 0).unwrap().data(), &[12.0, 16.0, 24.0, 28.0]);
    assert_eq!(conv2d_forward(&x, &p, 1, 0).unwrap().0.data(), &[12.0, 16.0, 24.0, 28.0]);
}

#[test]
fn odd_widths_exercise_vector_tails() {
    for (w, seed) in [(1usize, 1u64), (7, 2), (9, 3), (17, 4), (33, 5), (40, 6), (50, 7)] {
        let (x, p) = instance(Shape4::new(2, 3, 5, w), 11, 3, 3, seed);
        let y = conv2d_forward(&x, &p, 1, 1).unwrap().0;
        let oracle = conv2d_direct(&x, &p, 1, 1).unwrap();
        assert!(max_abs_diff(y.data(), oracle.data()) <= 1e-5, "width {w}");
    }
}

/// The `f32` backward (which may take the direct 3×3 kernels) against the
/// generic `f64` backward on the same data.
#[test]
fn single_precision_backward_matches_double() {
    for (xs, k, seed) in [(Shape4::new(2, 4, 16, 16), 8, 1u64), (Shape4::new(3, 5, 9, 21), 3, 2), (Shape4::new(1, 16, 8, 40), 17, 3)] {
        let (x, p) = instance(xs, k, 3, 3, seed);
        let (y, cache) = conv2d_forward(&x, &p, 1, 1).unwrap();
        let g = uniform(y.shape(), &mut Rng::new(seed + 100));
        let grads = conv2d_backward(&g, &cache, &p).unwrap();

        let p64 = ConvParams::new(p.weight.cast::<f64>(), p.bias.iter().map(|&v| v as f64).collect()).unwrap();
        let (_, cache64) = conv2d_forward(&x.cast::<f64>(), &p64, 1, 1).unwrap();
        let grads64 = conv2d_backward(&g.cast::<f64>(), &cache64, &p64).unwrap();

        let close = |a: &[f32], b: &[f64], what: &str| {
            let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let err = max_abs_diff(a, b) / scale;
            assert!(err < 1e-5, "{what}: {err:e}");
        };
        close(grads.grad_x.data(), grads64.grad_x.data(), "grad_x");
        close(grads.grad_w.data(), grads64.grad_w.data(), "grad_w");
        close(&grads.grad_b, &grads64.grad_b, "grad_b");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_matches_nested_loops(
        n in 1usize..=2, c in 1usize..=4, h in 3usize..=16, w in 3usize..=16,
        k in 1usize..=8, kh in 1usize..=3, kw in 1usize..=3,
        stride in 1usize..=2, pad in 0usize..=1, seed in any::<u64>(),
    ) {
        let (x, p) = instance(Shape4::new(n, c, h, w), k, kh, kw, seed);
        let y = conv2d_forward(&x, &p, stride, pad).unwrap().0;
        let oracle = conv2d_direct(&x, &p, stride, pad).unwrap();
        prop_assert_eq!(y.shape(), oracle.shape());
        prop_assert!(max_abs_diff(y.data(), oracle.data()) <= 1e-5);
    }
}
