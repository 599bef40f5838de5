use crate::error::{Error, Result};
use crate::tensor::{Scalar, Shape4, Tensor};

#[derive(Clone, Debug)]
pub struct UpsampleCache {
    input_shape: Shape4,
}

/// Nearest-neighbour 2× upsampling: `y(n,c,2i+a,2j+b) = x(n,c,i,j)`.
pub fn upsample2x_forward<T: Scalar>(x: &Tensor<T>) -> (Tensor<T>, UpsampleCache) {
    let s = x.shape();
    let (oh, ow) = (2 * s.h, 2 * s.w);
    let mut y = Tensor::zeros(Shape4::new(s.n, s.c, oh, ow));
    let src = x.data();
    let dst = y.data_mut();
    for nc in 0..s.n * s.c {
        for i in 0..s.h {
            let row = &src[(nc * s.h + i) * s.w..(nc * s.h + i + 1) * s.w];
            let top = (nc * oh + 2 * i) * ow;
            for (j, &v) in row.iter().enumerate() {
                dst[top + 2 * j] = v;
                dst[top + 2 * j + 1] = v;
            }
            dst.copy_within(top..top + ow, top + ow);
        }
    }
    (y, UpsampleCache { input_shape: s })
}

/// Sums the four child gradients of every source element.
pub fn upsample2x_backward<T: Scalar>(grad_y: &Tensor<T>, cache: &UpsampleCache) -> Result<Tensor<T>> {
    let s = cache.input_shape;
    let (oh, ow) = (2 * s.h, 2 * s.w);
    if grad_y.shape() != Shape4::new(s.n, s.c, oh, ow) {
        return Err(Error::shape(format!(
            "upsample gradient {:?} for input {s:?}",
            grad_y.shape()
        )));
    }
    let mut gx = Tensor::zeros(s);
    let g = grad_y.data();
    let out = gx.data_mut();
    for nc in 0..s.n * s.c {
        for i in 0..s.h {
            let r0 = (nc * oh + 2 * i) * ow;
            let r1 = r0 + ow;
            for j in 0..s.w {
                out[(nc * s.h + i) * s.w + j] =
                    g[r0 + 2 * j] + g[r0 + 2 * j + 1] + g[r1 + 2 * j] + g[r1 + 2 * j + 1];
            }
        }
    }
    Ok(gx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::maxpool2d_forward;

    #[test]
    fn replicates() {
        let x = Tensor::<f32>::full(Shape4::new(1, 1, 1, 1), 5.0).unwrap();
        let (y, cache) = upsample2x_forward(&x);
        assert_eq!(y.data(), &[5.0; 4]);
        let g = upsample2x_backward(&Tensor::full(y.shape(), 1.0).unwrap(), &cache).unwrap();
        assert_eq!(g.data(), &[4.0]);
    }

    #[test]
    fn stride_two_sampling_recovers_input() {
        let s = Shape4::new(2, 3, 3, 4);
        let x = Tensor::from_vec(s, (0..s.len()).map(|i| i as f32).collect()).unwrap();
        let (y, _) = upsample2x_forward(&x);
        // a 1×1 max-pool with stride 2 reads the top-left child of each block
        let (down, _) = maxpool2d_forward(&y, 1, 2).unwrap();
        assert_eq!(down, x);
    }
}
