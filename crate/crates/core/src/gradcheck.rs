//! Finite-difference validation of the hand-written backward passes.
//!
//! Every check builds a random instance in `f64`, takes the scalar
//! objective `L = Σ r ⊙ f(x)` with fixed random weights `r` (or the loss
//! itself for cross-entropy), and compares the analytic gradient against
//! central differences `(L(x+h) − L(x−h)) / 2h`. Errors are reported as
//! `‖a − n‖ / max(‖a‖, ‖n‖)` over a whole gradient tensor.

use crate::error::Result;
use crate::layers::{
    batchnorm_backward, batchnorm_forward, conv2d_backward, conv2d_forward, maxpool2d_backward,
    maxpool2d_forward, relu_backward, relu_forward, softmax_cross_entropy, BnParams, ConvParams,
};
use crate::rng::Rng;
use crate::tensor::{Shape4, Tensor};
use crate::unet::{ParamKind, UNetConfig, UNetModel};

pub const DEFAULT_STEP: f64 = 1e-3;

/// Distance from a ReLU kink or pooling tie below which a coordinate is
/// not differentiated numerically.
pub const KINK_MARGIN: f64 = 1e-2;

/// `‖a − n‖ / max(‖a‖, ‖n‖)`; zero when both vectors vanish.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, n)| a - n));
    let scale = norm(&mut analytic.iter().copied()).max(norm(&mut numeric.iter().copied()));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Central differences of `f` with respect to every coordinate of `x`.
pub fn numeric_gradient(x: &mut [f64], step: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let keep = x[i];
            x[i] = keep + step;
            let up = f(x);
            x[i] = keep - step;
            let down = f(x);
            x[i] = keep;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Like [`numeric_gradient`] but `f` also reports which linear piece of a
/// piecewise-smooth function it evaluated; coordinates whose `+h` and `−h`
/// evaluations land on different pieces yield `None`.
pub fn numeric_gradient_piecewise<S: PartialEq>(
    x: &mut [f64],
    step: f64,
    mut f: impl FnMut(&[f64]) -> (f64, S),
) -> Vec<Option<f64>> {
    (0..x.len())
        .map(|i| {
            let keep = x[i];
            x[i] = keep + step;
            let (up, s_up) = f(x);
            x[i] = keep - step;
            let (down, s_down) = f(x);
            x[i] = keep;
            (s_up == s_down).then(|| (up - down) / (2.0 * step))
        })
        .collect()
}

/// Errors of one check, one entry per gradient tensor.
#[derive(Clone, Debug)]
pub struct GradReport {
    pub name: String,
    pub errors: Vec<(String, f64)>,
    /// Coordinates skipped because a finite difference crossed a kink.
    pub excluded: usize,
    pub checked: usize,
}

impl GradReport {
    fn new(name: &str) -> Self {
        GradReport {
            name: name.to_string(),
            errors: Vec::new(),
            excluded: 0,
            checked: 0,
        }
    }

    fn push(&mut self, what: &str, analytic: &[f64], numeric: &[f64]) {
        self.checked += analytic.len();
        self.errors.push((what.to_string(), relative_error(analytic, numeric)));
    }

    fn push_partial(&mut self, what: &str, analytic: &[f64], numeric: &[Option<f64>]) {
        let (a, n): (Vec<f64>, Vec<f64>) = analytic
            .iter()
            .zip(numeric)
            .filter_map(|(&a, n)| n.map(|n| (a, n)))
            .unzip();
        self.excluded += analytic.len() - a.len();
        self.push(what, &a, &n);
    }

    /// Largest error over all gradient tensors.
    pub fn worst(&self) -> f64 {
        self.errors.iter().map(|e| e.1).fold(0.0, f64::max)
    }
}

fn random(shape: Shape4, rng: &mut Rng) -> Result<Tensor<f64>> {
    Tensor::rand_normal(shape, 0.0, 1.0, rng)
}

fn weighted_sum(y: &Tensor<f64>, r: &Tensor<f64>) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

/// Convolution input, weight and bias gradients, for a "same" 3×3 case and
/// a strided rectangular kernel.
pub fn check_conv(seed: u64) -> Result<GradReport> {
    let mut rng = Rng::new(seed);
    let mut report = GradReport::new("conv2d");
    let cases = [
        (Shape4::new(2, 3, 5, 6), Shape4::new(4, 3, 3, 3), 1, 1),
        (Shape4::new(2, 2, 7, 6), Shape4::new(3, 2, 2, 3), 2, 1),
    ];
    for (case, &(xs, ws, stride, pad)) in cases.iter().enumerate() {
        let x = random(xs, &mut rng)?;
        let p = ConvParams::new(random(ws, &mut rng)?, (0..ws.n).map(|_| rng.normal()).collect())?;
        let (y, cache) = conv2d_forward(&x, &p, stride, pad)?;
        let r = random(y.shape(), &mut rng)?;
        let grads = conv2d_backward(&r, &cache, &p)?;

        let eval = |x: &Tensor<f64>, p: &ConvParams<f64>| -> f64 {
            weighted_sum(&conv2d_forward(x, p, stride, pad).expect("conv").0, &r)
        };
        let mut xv = x.data().to_vec();
        let nx = numeric_gradient(&mut xv, DEFAULT_STEP, |v| {
            eval(&Tensor::from_vec(xs, v.to_vec()).expect("shape"), &p)
        });
        report.push(&format!("case{case}.x"), grads.grad_x.data(), &nx);

        let mut wv = p.weight.data().to_vec();
        let nw = numeric_gradient(&mut wv, DEFAULT_STEP, |v| {
            let q = ConvParams::new(Tensor::from_vec(ws, v.to_vec()).expect("shape"), p.bias.clone()).expect("params");
            eval(&x, &q)
        });
        report.push(&format!("case{case}.weight"), grads.grad_w.data(), &nw);

        let mut bv = p.bias.clone();
        let nb = numeric_gradient(&mut bv, DEFAULT_STEP, |v| {
            let q = ConvParams::new(p.weight.clone(), v.to_vec()).expect("params");
            eval(&x, &q)
        });
        report.push(&format!("case{case}.bias"), &grads.grad_b, &nb);
    }
    Ok(report)
}

/// Training-mode batch norm: input, scale and shift gradients.
pub fn check_batchnorm(seed: u64) -> Result<GradReport> {
    let mut rng = Rng::new(seed);
    let mut report = GradReport::new("batchnorm");
    let xs = Shape4::new(3, 2, 3, 4);
    let x = random(xs, &mut rng)?.map(|v| 2.0 * v + 0.5);
    let mut p = BnParams::<f64>::identity(2);
    p.gamma = vec![1.3, -0.7];
    p.beta = vec![0.2, -0.4];
    let (y, cache) = batchnorm_forward(&x, &p, true)?;
    let r = random(y.shape(), &mut rng)?;
    let grads = batchnorm_backward(&r, &cache)?;

    let eval = |x: &Tensor<f64>, p: &BnParams<f64>| weighted_sum(&batchnorm_forward(x, p, true).expect("bn").0, &r);
    let mut xv = x.data().to_vec();
    let nx = numeric_gradient(&mut xv, DEFAULT_STEP, |v| eval(&Tensor::from_vec(xs, v.to_vec()).expect("shape"), &p));
    report.push("x", grads.grad_x.data(), &nx);

    let mut gv = p.gamma.clone();
    let ng = numeric_gradient(&mut gv, DEFAULT_STEP, |v| {
        let mut q = p.clone();
        q.gamma = v.to_vec();
        eval(&x, &q)
    });
    report.push("gamma", &grads.grad_gamma, &ng);

    let mut bv = p.beta.clone();
    let nb = numeric_gradient(&mut bv, DEFAULT_STEP, |v| {
        let mut q = p.clone();
        q.beta = v.to_vec();
        eval(&x, &q)
    });
    report.push("beta", &grads.grad_beta, &nb);
    Ok(report)
}

/// ReLU with every input at least [`KINK_MARGIN`] away from zero.
pub fn check_relu(seed: u64) -> Result<GradReport> {
    let mut rng = Rng::new(seed);
    let mut report = GradReport::new("relu");
    let xs = Shape4::new(2, 3, 4, 4);
    let z = random(xs, &mut rng)?.map(|v| {
        if v.abs() < KINK_MARGIN {
            v.signum() * (v.abs() + 2.0 * KINK_MARGIN)
        } else {
            v
        }
    });
    let (y, cache) = relu_forward(&z);
    let r = random(y.shape(), &mut rng)?;
    let gz = relu_backward(&r, &cache)?;
    let mut zv = z.data().to_vec();
    let nz = numeric_gradient(&mut zv, DEFAULT_STEP, |v| {
        weighted_sum(&relu_forward(&Tensor::from_vec(xs, v.to_vec()).expect("shape")).0, &r)
    });
    report.push("z", gz.data(), &nz);
    Ok(report)
}

/// Max pooling on inputs whose window maxima are unique by a wide margin,
/// with non-overlapping (2/2) and overlapping (3/2) windows.
pub fn check_maxpool(seed: u64) -> Result<GradReport> {
    let mut rng = Rng::new(seed);
    let mut report = GradReport::new("maxpool2d");
    for (k, stride) in [(2usize, 2usize), (3, 2)] {
        let xs = Shape4::new(2, 2, 7, 7);
        // distinct values spaced by 5·KINK_MARGIN, randomly placed
        let mut values: Vec<f64> = (0..xs.len()).map(|i| i as f64 * 5.0 * KINK_MARGIN).collect();
        rng.shuffle(&mut values);
        let x = Tensor::from_vec(xs, values)?;
        let (y, cache) = maxpool2d_forward(&x, k, stride)?;
        let r = random(y.shape(), &mut rng)?;
        let gx = maxpool2d_backward(&r, &cache)?;
        let mut xv = x.data().to_vec();
        let nx = numeric_gradient(&mut xv, DEFAULT_STEP, |v| {
            let t = Tensor::from_vec(xs, v.to_vec()).expect("shape");
            weighted_sum(&maxpool2d_forward(&t, k, stride).expect("pool").0, &r)
        });
        report.push(&format!("k{k}s{stride}.x"), gx.data(), &nx);
    }
    Ok(report)
}

/// Mean per-pixel softmax cross-entropy with respect to the logits.
pub fn check_softmax_cross_entropy(seed: u64) -> Result<GradReport> {
    let mut rng = Rng::new(seed);
    let mut report = GradReport::new("softmax_cross_entropy");
    let xs = Shape4::new(2, 4, 3, 3);
    let logits = random(xs, &mut rng)?.map(|v| 2.0 * v);
    let labels: Vec<u8> = (0..xs.n * xs.plane()).map(|_| rng.below(4) as u8).collect();
    let (_, grad) = softmax_cross_entropy(&logits, &labels)?;
    let mut lv = logits.data().to_vec();
    let nl = numeric_gradient(&mut lv, DEFAULT_STEP, |v| {
        softmax_cross_entropy(&Tensor::from_vec(xs, v.to_vec()).expect("shape"), &labels)
            .expect("loss")
            .0
    });
    report.push("logits", grad.data(), &nl);
    Ok(report)
}

/// Configuration of the desk-scale network used by [`check_unet`].
pub fn tiny_unet_config() -> UNetConfig {
    UNetConfig {
        input_channels: 3,
        num_classes: 2,
        depth: 1,
        base_filters: 2,
        patch_size: 8,
    }
}

/// The whole network in training mode under the cross-entropy loss:
/// every trainable parameter and the input.
pub fn check_unet(seed: u64) -> Result<GradReport> {
    let config = tiny_unet_config();
    let mut rng = Rng::new(seed);
    let mut model = UNetModel::<f64>::build(config, &mut rng)?;
    for p in model.params_mut() {
        if p.kind == ParamKind::Trainable && (p.name.ends_with("gamma") || p.name.ends_with("beta")) {
            let base = if p.name.ends_with("gamma") { 1.0 } else { 0.0 };
            p.data.iter_mut().for_each(|v| *v = base + 0.3 * rng.normal());
        }
    }
    let s = config.patch_size;
    let xs = Shape4::new(2, config.input_channels, s, s);
    let x = Tensor::rand_normal(xs, 0.5, 0.3, &mut rng)?;
    let labels: Vec<u8> = (0..xs.n * s * s).map(|_| rng.below(config.num_classes as u64) as u8).collect();

    let objective = |m: &UNetModel<f64>, x: &Tensor<f64>| -> (f64, Vec<u32>) {
        let (logits, cache) = m.forward(x, true).expect("forward");
        let loss = softmax_cross_entropy(&logits, &labels).expect("loss").0;
        (loss, cache.branch_signature())
    };

    let (logits, cache) = model.forward(&x, true)?;
    let (_, grad_logits) = softmax_cross_entropy(&logits, &labels)?;
    let (grads, grad_x) = model.backward_with_input(&cache, &grad_logits)?;

    let mut report = GradReport::new("unet");
    let analytic: Vec<f64> = grads.entries.iter().flat_map(|e| e.values.iter().copied()).collect();
    let mut flat: Vec<f64> = model
        .params()
        .iter()
        .filter(|p| p.kind == ParamKind::Trainable)
        .flat_map(|p| p.data.iter().copied())
        .collect();
    let numeric = numeric_gradient_piecewise(&mut flat, DEFAULT_STEP, |v| {
        let mut m = model.clone();
        let mut at = 0;
        for p in m.params_mut() {
            if p.kind == ParamKind::Trainable {
                p.data.copy_from_slice(&v[at..at + p.data.len()]);
                at += p.data.len();
            }
        }
        objective(&m, &x)
    });
    report.push_partial("parameters", &analytic, &numeric);

    let mut xv = x.data().to_vec();
    let nx = numeric_gradient_piecewise(&mut xv, DEFAULT_STEP, |v| {
        objective(&model, &Tensor::from_vec(xs, v.to_vec()).expect("shape"))
    });
    report.push_partial("input", grad_x.data(), &nx);
    Ok(report)
}

/// All layer checks followed by the full network.
pub fn check_all(seed: u64) -> Result<Vec<GradReport>> {
    Ok(vec![
        check_conv(seed)?,
        check_batchnorm(seed)?,
        check_relu(seed)?,
        check_maxpool(seed)?,
        check_softmax_cross_entropy(seed)?,
        check_unet(seed)?,
    ])
}
