use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Debug)]
pub struct ReluCache {
    /// `z > 0` per element.
    active: Vec<bool>,
}

impl ReluCache {
    pub fn active(&self) -> &[bool] {
        &self.active
    }
}

/// `y = max(0, z)`.
pub fn relu_forward<T: Scalar>(z: &Tensor<T>) -> (Tensor<T>, ReluCache) {
    let active: Vec<bool> = z.data().iter().map(|&v| v > T::zero()).collect();
    let y = z.map(|v| v.max(T::zero()));
    (y, ReluCache { active })
}

pub fn relu_backward<T: Scalar>(grad_y: &Tensor<T>, cache: &ReluCache) -> Result<Tensor<T>> {
    if grad_y.len() != cache.active.len() {
        return Err(Error::shape(format!(
            "relu gradient of {} elements, forward saw {}",
            grad_y.len(),
            cache.active.len()
        )));
    }
    let mut g = grad_y.clone();
    for (v, &on) in g.data_mut().iter_mut().zip(&cache.active) {
        *v = if on { *v } else { T::zero() };
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape4;

    #[test]
    fn clamps_negatives() {
        let z = Tensor::from_vec(Shape4::new(1, 1, 1, 3), vec![-1.0f32, 0.0, 2.0]).unwrap();
        let (y, cache) = relu_forward(&z);
        assert_eq!(y.data(), &[0.0, 0.0, 2.0]);
        let g = relu_backward(&Tensor::full(z.shape(), 1.0).unwrap(), &cache).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn positive_region_is_identity() {
        let z = Tensor::from_vec(Shape4::new(1, 2, 1, 2), vec![0.5f32, 1.0, 2.0, 3.0]).unwrap();
        let (y, cache) = relu_forward(&z);
        assert_eq!(y, z);
        assert_eq!(relu_backward(&z, &cache).unwrap(), z);
    }
}
