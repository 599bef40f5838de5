//! Max pooling over `k×k` windows without padding.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Shape4, Tensor};

#[derive(Clone, Debug)]
pub struct PoolCache {
    input_shape: Shape4,
    /// Flat input index of the winning element, per output element.
    argmax: Vec<u32>,
}

impl PoolCache {
    pub fn argmax(&self) -> &[u32] {
        &self.argmax
    }
}

/// Each output is the maximum of its window. Ties go to the first element
/// in row-major scan order of the window.
pub fn maxpool2d_forward<T: Scalar>(
    x: &Tensor<T>,
    k: usize,
    stride: usize,
) -> Result<(Tensor<T>, PoolCache)> {
    let s = x.shape();
    if k == 0 || stride == 0 {
        return Err(Error::argument("pool window and stride must be at least 1"));
    }
    s.require_nonempty("pool input")?;
    if s.h < k || s.w < k {
        return Err(Error::shape(format!("pool window {k} larger than input {s:?}")));
    }
    if s.len() > u32::MAX as usize {
        return Err(Error::shape(format!("pool input {s:?} too large to index")));
    }
    let (oh, ow) = ((s.h - k) / stride + 1, (s.w - k) / stride + 1);
    let out_shape = Shape4::new(s.n, s.c, oh, ow);
    let mut y = Vec::with_capacity(out_shape.len());
    let mut argmax = Vec::with_capacity(out_shape.len());
    let data = x.data();
    for nc in 0..s.n * s.c {
        let base = nc * s.h * s.w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + oy * stride * s.w + ox * stride;
                for i in 0..k {
                    let row = base + (oy * stride + i) * s.w + ox * stride;
                    for idx in row..row + k {
                        if data[idx] > data[best] {
                            best = idx;
                        }
                    }
                }
                y.push(data[best]);
                argmax.push(best as u32);
            }
        }
    }
    Ok((
        Tensor::from_vec(out_shape, y)?,
        PoolCache {
            input_shape: s,
            argmax,
        },
    ))
}

/// Routes each output gradient to its window's argmax.
pub fn maxpool2d_backward<T: Scalar>(grad_y: &Tensor<T>, cache: &PoolCache) -> Result<Tensor<T>> {
    if grad_y.len() != cache.argmax.len() {
        return Err(Error::shape(format!(
            "pool gradient of {} elements, forward produced {}",
            grad_y.len(),
            cache.argmax.len()
        )));
    }
    let mut gx = Tensor::zeros(cache.input_shape);
    let out = gx.data_mut();
    for (&g, &idx) in grad_y.data().iter().zip(&cache.argmax) {
        out[idx as usize] = out[idx as usize] + g;
    }
    Ok(gx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_maximum() {
        let x = Tensor::from_vec(Shape4::new(1, 1, 2, 2), vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        let (y, cache) = maxpool2d_forward(&x, 2, 2).unwrap();
        assert_eq!(y.data(), &[4.0]);
        let g = maxpool2d_backward(&Tensor::full(y.shape(), 2.5).unwrap(), &cache).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 0.0, 2.5]);
    }

    #[test]
    fn constant_input_ties_to_first() {
        let x = Tensor::<f32>::full(Shape4::new(1, 2, 4, 4), 7.0).unwrap();
        let (y, cache) = maxpool2d_forward(&x, 2, 2).unwrap();
        assert!(y.data().iter().all(|&v| v == 7.0));
        // top-left element of each window
        assert_eq!(&cache.argmax()[..4], &[0, 2, 8, 10]);
    }

    #[test]
    fn window_too_large() {
        let x = Tensor::<f32>::zeros(Shape4::new(1, 1, 1, 3));
        assert!(matches!(maxpool2d_forward(&x, 2, 2), Err(Error::Shape(_))));
    }
}
