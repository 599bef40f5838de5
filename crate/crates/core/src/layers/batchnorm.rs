//! Spatial batch normalization.
//!
//! Training mode normalizes each channel by the biased mean and variance of
//! its `n·h·w` values; running statistics blend in the batch mean and the
//! unbiased batch variance with weight `momentum`. Inference mode
//! normalizes by the running statistics. Statistics are accumulated in
//! `f64` whatever the tensor element type.

use crate::error::{Error, Result};
use crate::tensor::{sum_f64, sum_pairs_f64, Scalar, Tensor};

pub const DEFAULT_EPS: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct BnParams<T: Scalar = f32> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub eps: f64,
    pub momentum: f64,
}

impl<T: Scalar> BnParams<T> {
    /// `gamma = 1`, `beta = 0`, running mean 0 and variance 1.
    pub fn identity(channels: usize) -> Self {
        BnParams {
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            eps: DEFAULT_EPS,
            momentum: DEFAULT_MOMENTUM,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// Folds the batch statistics of a training-mode forward into the
    /// running estimates. No-op for an inference-mode cache.
    pub fn update_running(&mut self, cache: &BnCache<T>) {
        let Some(stats) = &cache.batch_stats else {
            return;
        };
        let m = self.momentum;
        let count = stats.count as f64;
        for c in 0..self.channels() {
            let unbiased = if count > 1.0 { stats.var[c] * count / (count - 1.0) } else { stats.var[c] };
            self.running_mean[c] = T::of((1.0 - m) * self.running_mean[c].f64() + m * stats.mean[c]);
            self.running_var[c] = T::of((1.0 - m) * self.running_var[c].f64() + m * unbiased);
        }
    }
}

#[derive(Clone, Debug)]
struct BatchStats {
    mean: Vec<f64>,
    var: Vec<f64>,
    count: usize,
}

#[derive(Clone, Debug)]
pub struct BnCache<T: Scalar = f32> {
    xhat: Tensor<T>,
    inv_std: Vec<f64>,
    gamma: Vec<T>,
    /// Present only for training-mode forwards.
    batch_stats: Option<BatchStats>,
}

impl<T: Scalar> BnCache<T> {
    pub fn batch_mean(&self) -> Option<&[f64]> {
        self.batch_stats.as_ref().map(|s| s.mean.as_slice())
    }

    pub fn batch_var(&self) -> Option<&[f64]> {
        self.batch_stats.as_ref().map(|s| s.var.as_slice())
    }
}

#[derive(Clone, Debug)]
pub struct BnGrads<T: Scalar = f32> {
    pub grad_x: Tensor<T>,
    pub grad_gamma: Vec<T>,
    pub grad_beta: Vec<T>,
}

fn channel_values<T: Scalar>(x: &Tensor<T>, c: usize) -> impl Iterator<Item = &[T]> + '_ {
    let s = x.shape();
    let plane = s.plane();
    (0..s.n).map(move |n| &x.item(n)[c * plane..(c + 1) * plane])
}

pub fn batchnorm_forward<T: Scalar>(
    x: &Tensor<T>,
    p: &BnParams<T>,
    training: bool,
) -> Result<(Tensor<T>, BnCache<T>)> {
    let s = x.shape();
    if s.c != p.channels() {
        return Err(Error::shape(format!(
            "batch norm over {} channels given {s:?}",
            p.channels()
        )));
    }
    let count = s.n * s.plane();
    if training && count < 2 {
        return Err(Error::argument(format!(
            "training-mode batch norm needs at least 2 values per channel, got {count}"
        )));
    }
    if !(p.eps > 0.0) {
        return Err(Error::argument("batch norm eps must be positive"));
    }

    let (mean, var) = if training {
        let mut mean = vec![0.0; s.c];
        let mut var = vec![0.0; s.c];
        for c in 0..s.c {
            let sum: f64 = channel_values(x, c).map(sum_f64).sum();
            let mu = sum / count as f64;
            let sq: f64 = channel_values(x, c)
                .map(|xs| sum_pairs_f64(xs, xs, |v, _| (v - mu) * (v - mu)))
                .sum();
            mean[c] = mu;
            var[c] = sq / count as f64;
        }
        (mean, var)
    } else {
        (
            p.running_mean.iter().map(|v| v.f64()).collect(),
            p.running_var.iter().map(|v| v.f64()).collect(),
        )
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + p.eps).sqrt()).collect();

    let plane = s.plane();
    let mut xhat = x.clone();
    let mut y = x.clone();
    for n in 0..s.n {
        for c in 0..s.c {
            let off = s.index(n, c, 0, 0);
            let (mu, is) = (T::of(mean[c]), T::of(inv_std[c]));
            let (g, b) = (p.gamma[c], p.beta[c]);
            for v in &mut xhat.data_mut()[off..off + plane] {
                *v = (*v - mu) * is;
            }
            let hs = &xhat.data()[off..off + plane];
            for (o, &h) in y.data_mut()[off..off + plane].iter_mut().zip(hs) {
                *o = g * h + b;
            }
        }
    }
    let cache = BnCache {
        xhat,
        inv_std,
        gamma: p.gamma.clone(),
        batch_stats: training.then_some(BatchStats { mean, var, count }),
    };
    Ok((y, cache))
}

pub fn batchnorm_backward<T: Scalar>(grad_y: &Tensor<T>, cache: &BnCache<T>) -> Result<BnGrads<T>> {
    let s = cache.xhat.shape();
    if grad_y.shape() != s {
        return Err(Error::shape(format!(
            "batch norm gradient {:?} for forward {s:?}",
            grad_y.shape()
        )));
    }
    let plane = s.plane();
    let count = (s.n * plane) as f64;
    let mut grad_x = Tensor::zeros(s);
    let mut grad_gamma = vec![T::zero(); s.c];
    let mut grad_beta = vec![T::zero(); s.c];
    for c in 0..s.c {
        let mut sum_g = 0.0;
        let mut sum_gx = 0.0;
        for (gs, hs) in channel_values(grad_y, c).zip(channel_values(&cache.xhat, c)) {
            sum_g += sum_f64(gs);
            sum_gx += sum_pairs_f64(gs, hs, |g, h| g * h);
        }
        grad_gamma[c] = T::of(sum_gx);
        grad_beta[c] = T::of(sum_g);

        let gamma = cache.gamma[c].f64();
        let is = cache.inv_std[c];
        let training = cache.batch_stats.is_some();
        // dx = γ·σ⁻¹/M · (M·g − Σg − x̂·Σ(g·x̂)) in training mode, γ·σ⁻¹·g otherwise
        let (a, b, d) = if training {
            let scale = gamma * is / count;
            (T::of(scale * count), T::of(scale * sum_g), T::of(scale * sum_gx))
        } else {
            (T::of(gamma * is), T::zero(), T::zero())
        };
        for n in 0..s.n {
            let off = s.index(n, c, 0, 0);
            let gy = &grad_y.data()[off..off + plane];
            let xh = &cache.xhat.data()[off..off + plane];
            let gx = &mut grad_x.data_mut()[off..off + plane];
            for ((o, &g), &h) in gx.iter_mut().zip(gy).zip(xh) {
                *o = a * g - b - d * h;
            }
        }
    }
    Ok(BnGrads {
        grad_x,
        grad_gamma,
        grad_beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::tensor::Shape4;

    #[test]
    fn training_output_is_standardized() {
        let x = Tensor::<f32>::rand_normal(Shape4::new(4, 3, 5, 5), 3.0, 2.0, &mut Rng::new(5)).unwrap();
        let p = BnParams::identity(3);
        let (y, _) = batchnorm_forward(&x, &p, true).unwrap();
        for c in 0..3 {
            let vals: Vec<f64> = channel_values(&y, c).flatten().map(|&v| v as f64).collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / vals.len() as f64;
            assert!(m.abs() < 1e-5, "mean {m}");
            assert!((v - 1.0).abs() < 1e-3, "var {v}");
        }
    }

    #[test]
    fn constant_channel_maps_to_beta() {
        let x = Tensor::<f32>::full(Shape4::new(2, 2, 3, 3), 4.0).unwrap();
        let mut p = BnParams::identity(2);
        p.beta = vec![0.25, -1.0];
        let (y, _) = batchnorm_forward(&x, &p, true).unwrap();
        assert!(y.item(0)[..9].iter().all(|&v| v == 0.25));
        assert!(y.item(1)[9..].iter().all(|&v| v == -1.0));
    }

    #[test]
    fn running_stats_follow_momentum() {
        let x = Tensor::from_vec(Shape4::new(1, 1, 1, 4), vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        let mut p = BnParams::identity(1);
        let (_, cache) = batchnorm_forward(&x, &p, true).unwrap();
        p.update_running(&cache);
        // mean 2.5, unbiased variance 5/3
        assert!((p.running_mean[0] - 0.25).abs() < 1e-12);
        assert!((p.running_var[0] - (0.9 + 0.1 * 5.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn inference_uses_running_stats() {
        let x = Tensor::from_vec(Shape4::new(1, 1, 1, 2), vec![3.0f64, 5.0]).unwrap();
        let mut p = BnParams::identity(1);
        p.running_mean = vec![1.0];
        p.running_var = vec![4.0 - p.eps];
        let (y, cache) = batchnorm_forward(&x, &p, false).unwrap();
        assert!((y.data()[0] - 1.0).abs() < 1e-12 && (y.data()[1] - 2.0).abs() < 1e-12);
        let g = batchnorm_backward(&Tensor::full(x.shape(), 1.0).unwrap(), &cache).unwrap();
        assert!((g.grad_x.data()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let x = Tensor::<f32>::zeros(Shape4::new(1, 2, 1, 1));
        assert!(matches!(batchnorm_forward(&x, &BnParams::identity(3), true), Err(Error::Shape(_))));
        assert!(matches!(batchnorm_forward(&x, &BnParams::identity(2), true), Err(Error::Argument(_))));
        assert!(batchnorm_forward(&x, &BnParams::identity(2), false).is_ok());
    }
}
