//! 2-D convolution lowered to matrix products.
//!
//! For each batch item the input is unfolded into a column matrix of shape
//! `(C·r1·r2) × (OH·OW)` (row index `(c·r1 + i)·r2 + j`), and the output is
//! `W · cols + b` with `W` viewed as `K × (C·r1·r2)`. The kernel is applied
//! as a cross-correlation: output `(k, y, x)` reads input
//! `(c, y·stride + i − pad, x·stride + j − pad)`, zero outside the image.
//!
//! Reduction order for a given output element depends only on the layer
//! dimensions. Batch items are processed independently and the weight
//! gradient is reduced over items in ascending item order, so results do
//! not depend on the number of worker threads.

use std::any::Any;

use super::conv3x3;
use crate::error::{Error, Result};
use crate::par;
use crate::tensor::{matmul, sum_f64, MatRef, Scalar, Shape4, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams<T: Scalar = f32> {
    /// `(K, C, r1, r2)`.
    pub weight: Tensor<T>,
    /// Length `K`.
    pub bias: Vec<T>,
}

impl<T: Scalar> ConvParams<T> {
    pub fn new(weight: Tensor<T>, bias: Vec<T>) -> Result<Self> {
        let s = weight.shape();
        s.require_nonempty("conv weight")?;
        if bias.len() != s.n {
            return Err(Error::shape(format!(
                "conv bias of length {} for {} filters",
                bias.len(),
                s.n
            )));
        }
        Ok(ConvParams { weight, bias })
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape().n
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape().c
    }

    pub fn kernel(&self) -> (usize, usize) {
        let s = self.weight.shape();
        (s.h, s.w)
    }
}

#[derive(Clone, Debug)]
pub struct ConvCache<T: Scalar = f32> {
    input: Tensor<T>,
    weight_shape: Shape4,
    out_shape: Shape4,
    stride: usize,
    pad: usize,
}

impl<T: Scalar> ConvCache<T> {
    pub fn out_shape(&self) -> Shape4 {
        self.out_shape
    }
}

#[derive(Clone, Debug)]
pub struct ConvGrads<T: Scalar = f32> {
    pub grad_x: Tensor<T>,
    pub grad_w: Tensor<T>,
    pub grad_b: Vec<T>,
}

#[derive(Clone, Copy)]
struct Geometry {
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    pad: usize,
}

impl Geometry {
    fn rows(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn cols(&self) -> usize {
        self.oh * self.ow
    }

    /// A 1×1 unit-stride unpadded kernel needs no unfolding.
    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.pad == 0
    }

    fn is_same3x3(&self) -> bool {
        self.kh == 3 && self.kw == 3 && self.stride == 1 && self.pad == 1
    }

    /// Output columns `[lo, hi)` whose input column `ox·stride + kj − pad`
    /// lies inside the image.
    fn valid_range(&self, k: usize, out: usize, len: usize) -> (usize, usize) {
        let s = self.stride;
        let p = self.pad;
        // ox·s + k ≥ p
        let lo = if k >= p { 0 } else { (p - k).div_ceil(s) };
        // ox·s + k − p ≤ len − 1
        let hi = if len + p > k { ((len + p - k - 1) / s + 1).min(out) } else { 0 };
        (lo.min(hi), hi)
    }
}

fn im2col<T: Scalar>(x: &[T], g: &Geometry, cols: &mut [T]) {
    let ncols = g.cols();
    for c in 0..g.c {
        let plane = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for i in 0..g.kh {
            let (ylo, yhi) = g.valid_range(i, g.oh, g.h);
            for j in 0..g.kw {
                let row = ((c * g.kh + i) * g.kw + j) * ncols;
                let dst = &mut cols[row..row + ncols];
                let (xlo, xhi) = g.valid_range(j, g.ow, g.w);
                for oy in 0..g.oh {
                    let out = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                    if oy < ylo || oy >= yhi {
                        out.fill(T::zero());
                        continue;
                    }
                    let iy = oy * g.stride + i - g.pad;
                    let src = &plane[iy * g.w..(iy + 1) * g.w];
                    out[..xlo].fill(T::zero());
                    out[xhi..].fill(T::zero());
                    if g.stride == 1 {
                        let x0 = xlo + j - g.pad;
                        out[xlo..xhi].copy_from_slice(&src[x0..x0 + (xhi - xlo)]);
                    } else {
                        for ox in xlo..xhi {
                            out[ox] = src[ox * g.stride + j - g.pad];
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates columns back onto the image in
/// ascending `(c, i, j, oy, ox)` order.
fn col2im<T: Scalar>(cols: &[T], g: &Geometry, x: &mut [T]) {
    let ncols = g.cols();
    x.fill(T::zero());
    for c in 0..g.c {
        let plane = &mut x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for i in 0..g.kh {
            let (ylo, yhi) = g.valid_range(i, g.oh, g.h);
            for j in 0..g.kw {
                let row = ((c * g.kh + i) * g.kw + j) * ncols;
                let src = &cols[row..row + ncols];
                let (xlo, xhi) = g.valid_range(j, g.ow, g.w);
                for oy in ylo..yhi {
                    let iy = oy * g.stride + i - g.pad;
                    let dst = &mut plane[iy * g.w..(iy + 1) * g.w];
                    let s = &src[oy * g.ow..(oy + 1) * g.ow];
                    for ox in xlo..xhi {
                        let d = &mut dst[ox * g.stride + j - g.pad];
                        *d = *d + s[ox];
                    }
                }
            }
        }
    }
}

fn geometry(x: Shape4, w: Shape4, stride: usize, pad: usize) -> Result<Geometry> {
    x.require_nonempty("conv input")?;
    if stride == 0 {
        return Err(Error::argument("conv stride must be at least 1"));
    }
    if x.c != w.c {
        return Err(Error::shape(format!(
            "conv input has {} channels, kernel expects {}",
            x.c, w.c
        )));
    }
    let (ph, pw) = (x.h + 2 * pad, x.w + 2 * pad);
    if ph < w.h || pw < w.w {
        return Err(Error::shape(format!(
            "conv kernel {}x{} larger than padded input {ph}x{pw}",
            w.h, w.w
        )));
    }
    Ok(Geometry {
        c: x.c,
        h: x.h,
        w: x.w,
        kh: w.h,
        kw: w.w,
        oh: (ph - w.h) / stride + 1,
        ow: (pw - w.w) / stride + 1,
        stride,
        pad,
    })
}

pub fn conv2d_forward<T: Scalar>(
    x: &Tensor<T>,
    p: &ConvParams<T>,
    stride: usize,
    pad: usize,
) -> Result<(Tensor<T>, ConvCache<T>)> {
    let ws = p.weight.shape();
    let g = geometry(x.shape(), ws, stride, pad)?;
    let k = ws.n;
    let out_shape = Shape4::new(x.shape().n, k, g.oh, g.ow);
    let mut y = Tensor::zeros(out_shape);
    let ncols = g.cols();

    if g.is_same3x3() && conv3x3::available() {
        if let (Some(x32), Some(p32), Some(y32)) = (
            (x as &dyn Any).downcast_ref::<Tensor<f32>>(),
            (p as &dyn Any).downcast_ref::<ConvParams<f32>>(),
            (&mut y as &mut dyn Any).downcast_mut::<Tensor<f32>>(),
        ) {
            let packed = conv3x3::pack_weights(p32.weight.data(), k, g.c);
            par::for_each_chunk(y32.data_mut(), k * ncols, |n, out| {
                let xpad = conv3x3::pad_planes(x32.item(n), g.c, g.h, g.w);
                conv3x3::forward(&xpad, &packed, &p32.bias, g.c, k, g.h, g.w, out);
            });
            let cache = ConvCache {
                input: x.clone(),
                weight_shape: ws,
                out_shape,
                stride,
                pad,
            };
            return Ok((y, cache));
        }
    }

    par::for_each_chunk(y.data_mut(), k * ncols, |n, out| {
        let item = x.item(n);
        let owned;
        let cols: &[T] = if g.is_pointwise() {
            item
        } else {
            let mut buf = vec![T::zero(); g.rows() * ncols];
            im2col(item, &g, &mut buf);
            owned = buf;
            &owned
        };
        matmul(
            k,
            g.rows(),
            ncols,
            MatRef::plain(p.weight.data()),
            MatRef::plain(cols),
            out,
            false,
        );
        for (row, &b) in out.chunks_mut(ncols).zip(&p.bias) {
            row.iter_mut().for_each(|v| *v = *v + b);
        }
    });

    let cache = ConvCache {
        input: x.clone(),
        weight_shape: ws,
        out_shape,
        stride,
        pad,
    };
    Ok((y, cache))
}

pub fn conv2d_backward<T: Scalar>(
    grad_y: &Tensor<T>,
    cache: &ConvCache<T>,
    p: &ConvParams<T>,
) -> Result<ConvGrads<T>> {
    if grad_y.shape() != cache.out_shape {
        return Err(Error::shape(format!(
            "conv output gradient {:?}, forward produced {:?}",
            grad_y.shape(),
            cache.out_shape
        )));
    }
    if p.weight.shape() != cache.weight_shape {
        return Err(Error::shape(format!(
            "conv weights {:?} differ from forward {:?}",
            p.weight.shape(),
            cache.weight_shape
        )));
    }
    let x = &cache.input;
    let g = geometry(x.shape(), cache.weight_shape, cache.stride, cache.pad)?;
    let k = cache.weight_shape.n;
    let rows = g.rows();
    let ncols = g.cols();
    let batch = x.shape().n;

    let mut grad_x = Tensor::zeros(x.shape());
    let item_len = x.shape().item();
    let mut grad_w = Tensor::zeros(cache.weight_shape);

    let fast = g.is_same3x3() && conv3x3::available();
    if let (true, Some(x32), Some(gy32), Some(p32), Some(gx32), Some(gw32)) = (
        fast,
        (x as &dyn Any).downcast_ref::<Tensor<f32>>(),
        (grad_y as &dyn Any).downcast_ref::<Tensor<f32>>(),
        (p as &dyn Any).downcast_ref::<ConvParams<f32>>(),
        (&mut grad_x as &mut dyn Any).downcast_mut::<Tensor<f32>>(),
        (&mut grad_w as &mut dyn Any).downcast_mut::<Tensor<f32>>(),
    ) {
        let adjoint = conv3x3::adjoint_weights(p32.weight.data(), k, g.c);
        let packed = conv3x3::pack_weights(&adjoint, g.c, k);
        let zero_bias = vec![0.0f32; g.c];
        let partial: Vec<Vec<f32>> = par::map_indices(batch, |n| {
            let xpad = conv3x3::pad_planes(x32.item(n), g.c, g.h, g.w);
            let mut gw = vec![0.0f32; k * rows];
            conv3x3::weight_grad(&xpad, gy32.item(n), g.c, k, g.h, g.w, &mut gw);
            gw
        });
        par::for_each_chunk(gx32.data_mut(), item_len, |n, gx| {
            let gpad = conv3x3::pad_planes(gy32.item(n), k, g.oh, g.ow);
            conv3x3::forward(&gpad, &packed, &zero_bias, k, g.c, g.h, g.w, gx);
        });
        for part in &partial {
            for (a, &b) in gw32.data_mut().iter_mut().zip(part) {
                *a += b;
            }
        }
        let grad_b = bias_grad(grad_y, k, ncols);
        return Ok(ConvGrads {
            grad_x,
            grad_w,
            grad_b,
        });
    }

    let partial_w: Vec<Vec<T>> = par::map_indices(batch, |n| {
        let gy = grad_y.item(n);
        let mut gw = vec![T::zero(); k * rows];
        if g.is_pointwise() {
            matmul(k, ncols, rows, MatRef::plain(gy), MatRef::t(x.item(n)), &mut gw, false);
        } else {
            let mut cols = vec![T::zero(); rows * ncols];
            im2col(x.item(n), &g, &mut cols);
            matmul(k, ncols, rows, MatRef::plain(gy), MatRef::t(&cols), &mut gw, false);
        }
        gw
    });
    par::for_each_chunk(grad_x.data_mut(), item_len, |n, gx| {
        let gy = grad_y.item(n);
        if g.is_pointwise() {
            matmul(rows, k, ncols, MatRef::t(p.weight.data()), MatRef::plain(gy), gx, false);
        } else {
            let mut gcols = vec![T::zero(); rows * ncols];
            matmul(rows, k, ncols, MatRef::t(p.weight.data()), MatRef::plain(gy), &mut gcols, false);
            col2im(&gcols, &g, gx);
        }
    });

    for part in &partial_w {
        for (a, &b) in grad_w.data_mut().iter_mut().zip(part) {
            *a = *a + b;
        }
    }
    let grad_b = bias_grad(grad_y, k, ncols);
    Ok(ConvGrads {
        grad_x,
        grad_w,
        grad_b,
    })
}

/// Per-filter sum of the output gradient, over items then pixels.
fn bias_grad<T: Scalar>(grad_y: &Tensor<T>, k: usize, ncols: usize) -> Vec<T> {
    let mut grad_b = vec![0.0f64; k];
    for n in 0..grad_y.shape().n {
        for (kk, row) in grad_y.item(n).chunks(ncols).enumerate() {
            grad_b[kk] += sum_f64(row);
        }
    }
    grad_b.into_iter().map(T::of).collect()
}

/// Runs the portable im2col path even where a specialised kernel exists.
#[cfg(test)]
pub(crate) fn conv2d_forward_reference<T: Scalar>(
    x: &Tensor<T>,
    p: &ConvParams<T>,
    stride: usize,
    pad: usize,
) -> Result<Tensor<T>> {
    let g = geometry(x.shape(), p.weight.shape(), stride, pad)?;
    let k = p.out_channels();
    let mut y = Tensor::zeros(Shape4::new(x.shape().n, k, g.oh, g.ow));
    let ncols = g.cols();
    for n in 0..x.shape().n {
        let mut cols = vec![T::zero(); g.rows() * ncols];
        im2col(x.item(n), &g, &mut cols);
        let out = &mut y.data_mut()[n * k * ncols..(n + 1) * k * ncols];
        matmul(k, g.rows(), ncols, MatRef::plain(p.weight.data()), MatRef::plain(&cols), out, false);
        for (row, &b) in out.chunks_mut(ncols).zip(&p.bias) {
            row.iter_mut().for_each(|v| *v = *v + b);
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn params(weight: Tensor<f64>, bias: Vec<f64>) -> ConvParams<f64> {
        ConvParams::new(weight, bias).unwrap()
    }

    #[test]
    fn direct_kernel_matches_im2col() {
        let mut rng = Rng::new(12);
        for (c, k, h, w) in [(3usize, 16usize, 12usize, 40usize), (16, 9, 7, 13), (1, 1, 1, 1)] {
            let x = Tensor::<f32>::rand_normal(Shape4::new(2, c, h, w), 0.0, 1.0, &mut rng).unwrap();
            let wt = Tensor::rand_normal(Shape4::new(k, c, 3, 3), 0.0, 0.3, &mut rng).unwrap();
            let p = ConvParams::new(wt, (0..k).map(|i| i as f32 * 0.1).collect()).unwrap();
            let fast = conv2d_forward(&x, &p, 1, 1).unwrap().0;
            let slow = conv2d_forward_reference(&x, &p, 1, 1).unwrap();
            for (a, b) in fast.data().iter().zip(slow.data()) {
                assert!((a - b).abs() <= 1e-5 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn identity_kernel() {
        let x = Tensor::<f64>::rand_normal(Shape4::new(2, 1, 4, 5), 0.0, 1.0, &mut Rng::new(1)).unwrap();
        let p = params(Tensor::full(Shape4::new(1, 1, 1, 1), 1.0).unwrap(), vec![0.0]);
        let (y, cache) = conv2d_forward(&x, &p, 1, 0).unwrap();
        assert_eq!(y, x);
        let g = conv2d_backward(&x, &cache, &p).unwrap();
        assert_eq!(g.grad_x, x);
    }

    #[test]
    fn zero_weights_give_bias() {
        let x = Tensor::<f64>::rand_normal(Shape4::new(1, 3, 5, 5), 0.0, 1.0, &mut Rng::new(2)).unwrap();
        let p = params(Tensor::zeros(Shape4::new(2, 3, 3, 3)), vec![0.5, -2.0]);
        let (y, _) = conv2d_forward(&x, &p, 1, 1).unwrap();
        assert_eq!(y.shape(), Shape4::new(1, 2, 5, 5));
        assert!(y.item(0)[..25].iter().all(|&v| v == 0.5));
        assert!(y.item(0)[25..].iter().all(|&v| v == -2.0));
    }

    #[test]
    fn two_by_two_ones() {
        let x = Tensor::from_vec(Shape4::new(1, 1, 3, 3), (1..=9).map(f64::from).collect()).unwrap();
        let p = params(Tensor::full(Shape4::new(1, 1, 2, 2), 1.0).unwrap(), vec![0.0]);
        let (y, _) = conv2d_forward(&x, &p, 1, 0).unwrap();
        assert_eq!(y.data(), &[12.0, 16.0, 24.0, 28.0]);
    }

    #[test]
    fn zero_grad_zero_grads() {
        let mut rng = Rng::new(3);
        let x = Tensor::<f64>::rand_normal(Shape4::new(2, 2, 6, 6), 0.0, 1.0, &mut rng).unwrap();
        let p = params(
            Tensor::rand_normal(Shape4::new(3, 2, 3, 3), 0.0, 1.0, &mut rng).unwrap(),
            vec![0.1, 0.2, 0.3],
        );
        let (y, cache) = conv2d_forward(&x, &p, 2, 1).unwrap();
        let g = conv2d_backward(&Tensor::zeros(y.shape()), &cache, &p).unwrap();
        assert!(g.grad_x.data().iter().all(|&v| v == 0.0));
        assert!(g.grad_w.data().iter().all(|&v| v == 0.0));
        assert!(g.grad_b.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_errors() {
        let x = Tensor::<f64>::zeros(Shape4::new(1, 2, 4, 4));
        let p = params(Tensor::zeros(Shape4::new(1, 3, 3, 3)), vec![0.0]);
        assert!(matches!(conv2d_forward(&x, &p, 1, 1), Err(Error::Shape(_))));
        let p = params(Tensor::zeros(Shape4::new(1, 2, 5, 5)), vec![0.0]);
        assert!(matches!(conv2d_forward(&x, &p, 1, 0), Err(Error::Shape(_))));
        let p = params(Tensor::zeros(Shape4::new(1, 2, 3, 3)), vec![0.0]);
        let (_, cache) = conv2d_forward(&x, &p, 1, 1).unwrap();
        let bad = Tensor::zeros(Shape4::new(1, 1, 3, 3));
        assert!(matches!(conv2d_backward(&bad, &cache, &p), Err(Error::Shape(_))));
    }

    #[test]
    fn bias_length_checked() {
        assert!(ConvParams::<f32>::new(Tensor::zeros(Shape4::new(2, 1, 1, 1)), vec![0.0]).is_err());
    }
}
