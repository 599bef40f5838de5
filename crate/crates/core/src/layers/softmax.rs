//! Per-pixel softmax over the channel axis and the matching cross-entropy.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// `y[c] = exp(x[c] − max) / Σ_d exp(x[d] − max)` at every pixel.
pub fn softmax_channels<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let s = x.shape();
    if s.c == 0 {
        return Err(Error::shape("softmax over zero channels"));
    }
    if !x.is_finite() {
        return Err(Error::Numeric("softmax input is not finite".into()));
    }
    let plane = s.plane();
    let mut y = Tensor::zeros(s);
    let mut buf = vec![0.0f64; s.c];
    for n in 0..s.n {
        let src = x.item(n);
        let off = n * s.item();
        for p in 0..plane {
            let max = (0..s.c).map(|c| src[c * plane + p].f64()).fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (c, b) in buf.iter_mut().enumerate() {
                *b = (src[c * plane + p].f64() - max).exp();
                sum += *b;
            }
            let out = y.data_mut();
            for (c, b) in buf.iter().enumerate() {
                out[off + c * plane + p] = T::of(b / sum);
            }
        }
    }
    Ok(y)
}

/// Mean over pixels of `−log softmax(logits)[label]`, and its gradient
/// `(softmax − onehot) / pixels` with respect to the logits.
///
/// `labels` holds one class index per pixel in `(n, h, w)` order.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[u8]) -> Result<(f64, Tensor<T>)> {
    let s = logits.shape();
    let plane = s.plane();
    let pixels = s.n * plane;
    if labels.len() != pixels {
        return Err(Error::shape(format!(
            "{} labels for logits {s:?}",
            labels.len()
        )));
    }
    if let Some(bad) = labels.iter().position(|&l| l as usize >= s.c) {
        return Err(Error::data(format!(
            "label {} at pixel {bad} outside [0, {})",
            labels[bad], s.c
        )));
    }
    if !logits.is_finite() {
        return Err(Error::Numeric("logits are not finite".into()));
    }
    let mut loss = 0.0;
    let mut grad = Tensor::zeros(s);
    let scale = 1.0 / pixels as f64;
    let mut buf = vec![0.0f64; s.c];
    for n in 0..s.n {
        let src = logits.item(n);
        let off = n * s.item();
        for p in 0..plane {
            let label = labels[n * plane + p] as usize;
            let max = (0..s.c).map(|c| src[c * plane + p].f64()).fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (c, b) in buf.iter_mut().enumerate() {
                *b = (src[c * plane + p].f64() - max).exp();
                sum += *b;
            }
            loss += sum.ln() + max - src[label * plane + p].f64();
            let g = grad.data_mut();
            for (c, b) in buf.iter().enumerate() {
                let onehot = if c == label { 1.0 } else { 0.0 };
                g[off + c * plane + p] = T::of((b / sum - onehot) * scale);
            }
        }
    }
    Ok((loss * scale, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape4;

    #[test]
    fn equal_logits_uniform() {
        let x = Tensor::<f32>::full(Shape4::new(1, 4, 2, 2), 0.3).unwrap();
        let y = softmax_channels(&x).unwrap();
        assert!(y.data().iter().all(|&v| (v - 0.25).abs() < 1e-7));
    }

    #[test]
    fn large_logits_stable() {
        let x = Tensor::from_vec(Shape4::new(1, 2, 1, 1), vec![1000.0f32, 1000.0]).unwrap();
        assert_eq!(softmax_channels(&x).unwrap().data(), &[0.5, 0.5]);
    }

    #[test]
    fn hand_evaluated() {
        let x = Tensor::from_vec(Shape4::new(1, 2, 1, 1), vec![0.0f64, 3f64.ln()]).unwrap();
        let y = softmax_channels(&x).unwrap();
        assert!((y.data()[0] - 0.25).abs() < 1e-15);
        assert!((y.data()[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn non_finite_rejected() {
        let x = Tensor::from_vec(Shape4::new(1, 2, 1, 1), vec![f32::NAN, 0.0]).unwrap();
        assert!(matches!(softmax_channels(&x), Err(Error::Numeric(_))));
    }

    #[test]
    fn uniform_loss_is_ln_c() {
        let x = Tensor::<f64>::zeros(Shape4::new(2, 5, 3, 3));
        let labels: Vec<u8> = (0..18).map(|i| (i % 5) as u8).collect();
        let (loss, _) = softmax_cross_entropy(&x, &labels).unwrap();
        assert!((loss - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_loss_vanishes() {
        let x = Tensor::from_vec(Shape4::new(1, 2, 1, 1), vec![0.0f64, 60.0]).unwrap();
        let (loss, _) = softmax_cross_entropy(&x, &[1]).unwrap();
        assert!(loss < 1e-20);
    }

    #[test]
    fn label_out_of_range() {
        let x = Tensor::<f32>::zeros(Shape4::new(1, 2, 1, 1));
        assert!(matches!(softmax_cross_entropy(&x, &[2]), Err(Error::Data(_))));
    }
}
