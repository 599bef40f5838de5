//! Dense 4-D tensors in row-major `(n, c, h, w)` order.

use std::fmt::{self, Debug};
use std::iter::Sum;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Element type of a tensor. Training and inference run in `f32`; the
/// gradient checks run the same code in `f64`.
pub trait Scalar:
    Float + Sum + Default + Debug + Send + Sync + 'static
{
    /// `c <- alpha * a * b + beta * c` for strided matrices.
    ///
    /// # Safety
    /// Every index reachable through the dimensions and strides must be in
    /// bounds of the pointed-to buffers, and `c` must not alias `a` or `b`.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    /// Plain `as` conversion from `f64`.
    fn of(v: f64) -> Self;

    /// Plain `as` conversion to `f64`.
    fn f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline(always)]
    fn of(v: f64) -> Self {
        v as f32
    }

    #[inline(always)]
    fn f64(self) -> f64 {
        self as f64
    }

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

impl Scalar for f64 {
    #[inline(always)]
    fn of(v: f64) -> Self {
        v
    }

    #[inline(always)]
    fn f64(self) -> f64 {
        self
    }

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

/// Sum in `f64` over eight interleaved partial sums, combined pairwise.
/// The order is fixed, so the result depends only on the values.
pub fn sum_f64<T: Scalar>(xs: &[T]) -> f64 {
    let mut acc = [0.0f64; 8];
    let chunks = xs.chunks_exact(8);
    let rest = chunks.remainder();
    for c in chunks {
        for (a, v) in acc.iter_mut().zip(c) {
            *a += v.f64();
        }
    }
    for (a, v) in acc.iter_mut().zip(rest) {
        *a += v.f64();
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))
}

/// `Σ f(a_i, b_i)` in `f64` with the same fixed order as [`sum_f64`].
pub fn sum_pairs_f64<T: Scalar>(a: &[T], b: &[T], f: impl Fn(f64, f64) -> f64) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += f(x[i].f64(), y[i].f64());
        }
    }
    for i in 0..ra.len() {
        acc[i] += f(ra[i].f64(), rb[i].f64());
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))
}

/// Operand of [`matmul`]: a row-major buffer, optionally read transposed.
#[derive(Clone, Copy)]
pub struct MatRef<'a, T> {
    pub data: &'a [T],
    pub transposed: bool,
}

impl<'a, T> MatRef<'a, T> {
    pub fn plain(data: &'a [T]) -> Self {
        MatRef {
            data,
            transposed: false,
        }
    }

    pub fn t(data: &'a [T]) -> Self {
        MatRef {
            data,
            transposed: true,
        }
    }
}

/// `c (m×n) = a (m×k) · b (k×n)`, adding into `c` when `accumulate` is set.
///
/// A transposed operand is stored row-major with the swapped extents, e.g.
/// a transposed `a` is a `k×m` buffer.
pub fn matmul<T: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    a: MatRef<'_, T>,
    b: MatRef<'_, T>,
    c: &mut [T],
    accumulate: bool,
) {
    assert_eq!(a.data.len(), m * k, "matmul: lhs length");
    assert_eq!(b.data.len(), k * n, "matmul: rhs length");
    assert_eq!(c.len(), m * n, "matmul: output length");
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a.transposed { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b.transposed { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { T::one() } else { T::zero() };
    // SAFETY: the three length assertions above bound every strided access.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            T::one(),
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Shape4 {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape4 {
    pub const fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape4 { n, c, h, w }
    }

    /// Element count, or `None` if it overflows `usize`.
    pub fn checked_len(&self) -> Option<usize> {
        self.n
            .checked_mul(self.c)?
            .checked_mul(self.h)?
            .checked_mul(self.w)
    }

    pub fn len(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn plane(&self) -> usize {
        self.h * self.w
    }

    /// Elements in one batch item.
    pub fn item(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn with_c(self, c: usize) -> Self {
        Shape4 { c, ..self }
    }

    pub fn with_n(self, n: usize) -> Self {
        Shape4 { n, ..self }
    }

    pub fn index(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        ((n * self.c + c) * self.h + h) * self.w + w
    }

    /// Error unless every dimension is at least one.
    pub fn require_nonempty(&self, what: &str) -> Result<()> {
        if self.n == 0 || self.c == 0 || self.h == 0 || self.w == 0 {
            return Err(Error::shape(format!("{what}: empty tensor {self:?}")));
        }
        Ok(())
    }
}

impl Debug for Shape4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.n, self.c, self.h, self.w)
    }
}

#[derive(Clone, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Shape4,
    data: Vec<T>,
}

impl<T: Scalar> Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}", self.shape)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

impl<T: Scalar> Tensor<T> {
    pub fn from_vec(shape: Shape4, data: Vec<T>) -> Result<Self> {
        let len = shape
            .checked_len()
            .ok_or_else(|| Error::shape(format!("element count of {shape:?} overflows")))?;
        if data.len() != len {
            return Err(Error::shape(format!(
                "{} values for shape {shape:?} ({len} expected)",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn full(shape: Shape4, value: T) -> Result<Self> {
        let len = shape
            .checked_len()
            .ok_or_else(|| Error::shape(format!("element count of {shape:?} overflows")))?;
        Ok(Tensor {
            shape,
            data: vec![value; len],
        })
    }

    /// Zero tensor. Panics only if the element count overflows.
    pub fn zeros(shape: Shape4) -> Self {
        Self::full(shape, T::zero()).expect("tensor too large")
    }

    pub fn rand_normal(shape: Shape4, mean: f64, stddev: f64, rng: &mut Rng) -> Result<Self> {
        if !(stddev >= 0.0) {
            return Err(Error::argument(format!("negative stddev {stddev}")));
        }
        let mut t = Self::full(shape, T::zero())?;
        for v in t.data.iter_mut() {
            *v = T::of(mean + stddev * rng.normal());
        }
        Ok(t)
    }

    pub fn shape(&self) -> Shape4 {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn at(&self, n: usize, c: usize, h: usize, w: usize) -> T {
        self.data[self.shape.index(n, c, h, w)]
    }

    pub fn at_mut(&mut self, n: usize, c: usize, h: usize, w: usize) -> &mut T {
        let i = self.shape.index(n, c, h, w);
        &mut self.data[i]
    }

    /// Values of batch item `n`.
    pub fn item(&self, n: usize) -> &[T] {
        let s = self.shape.item();
        &self.data[n * s..(n + 1) * s]
    }

    /// Same data viewed under a new shape of equal length.
    pub fn reshape(self, shape: Shape4) -> Result<Self> {
        Self::from_vec(shape, self.data)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::shape(format!(
                "zip of {:?} with {:?}",
                self.shape, other.shape
            )));
        }
        Ok(Tensor {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Elementwise `self += other`.
    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape(format!(
                "add of {:?} into {:?}",
                other.shape, self.shape
            )));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
        Ok(())
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| U::of(v.f64())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Channels of `self` followed by channels of `other`.
    pub fn concat_channels(&self, other: &Self) -> Result<Self> {
        let (a, b) = (self.shape, other.shape);
        if a.n != b.n || a.h != b.h || a.w != b.w {
            return Err(Error::shape(format!("channel concat of {a:?} with {b:?}")));
        }
        let shape = a.with_c(a.c + b.c);
        let mut data = Vec::with_capacity(shape.len());
        for n in 0..a.n {
            data.extend_from_slice(self.item(n));
            data.extend_from_slice(other.item(n));
        }
        Ok(Tensor { shape, data })
    }

    /// Channels `start..end` of every batch item.
    pub fn slice_channels(&self, start: usize, end: usize) -> Result<Self> {
        let s = self.shape;
        if start > end || end > s.c {
            return Err(Error::shape(format!(
                "channel slice {start}..{end} of {s:?}"
            )));
        }
        let plane = s.plane();
        let shape = s.with_c(end - start);
        let mut data = Vec::with_capacity(shape.len());
        for n in 0..s.n {
            let item = self.item(n);
            data.extend_from_slice(&item[start * plane..end * plane]);
        }
        Ok(Tensor { shape, data })
    }

    /// Stack equally shaped tensors along the batch axis.
    pub fn concat_batch(parts: &[&Self]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::shape("batch concat of nothing"))?
            .shape;
        let mut n = 0;
        let mut data = Vec::new();
        for p in parts {
            if p.shape.with_n(first.n) != first {
                return Err(Error::shape(format!(
                    "batch concat of {:?} with {:?}",
                    first, p.shape
                )));
            }
            n += p.shape.n;
            data.extend_from_slice(&p.data);
        }
        Ok(Tensor {
            shape: first.with_n(n),
            data,
        })
    }

    /// Batch items `start..end`.
    pub fn slice_batch(&self, start: usize, end: usize) -> Result<Self> {
        if start > end || end > self.shape.n {
            return Err(Error::shape(format!(
                "batch slice {start}..{end} of {:?}",
                self.shape
            )));
        }
        let s = self.shape.item();
        Ok(Tensor {
            shape: self.shape.with_n(end - start),
            data: self.data[start * s..end * s].to_vec(),
        })
    }

    pub fn pad_spatial(&self, pad_h: usize, pad_w: usize, value: T) -> Self {
        let s = self.shape;
        let (h, w) = (s.h + 2 * pad_h, s.w + 2 * pad_w);
        let shape = Shape4::new(s.n, s.c, h, w);
        let mut data = vec![value; shape.len()];
        for nc in 0..s.n * s.c {
            for y in 0..s.h {
                let src = (nc * s.h + y) * s.w;
                let dst = (nc * h + y + pad_h) * w + pad_w;
                data[dst..dst + s.w].copy_from_slice(&self.data[src..src + s.w]);
            }
        }
        Tensor { shape, data }
    }

    /// The `height × width` window whose top-left corner is `(top, left)`.
    pub fn crop_spatial(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        let s = self.shape;
        if top + height > s.h || left + width > s.w {
            return Err(Error::shape(format!(
                "crop {height}x{width} at ({top}, {left}) of {s:?}"
            )));
        }
        let shape = Shape4::new(s.n, s.c, height, width);
        let mut data = Vec::with_capacity(shape.len());
        for nc in 0..s.n * s.c {
            for y in top..top + height {
                let row = (nc * s.h + y) * s.w;
                data.extend_from_slice(&self.data[row + left..row + left + width]);
            }
        }
        Ok(Tensor { shape, data })
    }

    /// Centered crop; the inverse of a symmetric [`Tensor::pad_spatial`].
    pub fn center_crop(&self, height: usize, width: usize) -> Result<Self> {
        let s = self.shape;
        if height > s.h || width > s.w {
            return Err(Error::shape(format!("center crop {height}x{width} of {s:?}")));
        }
        self.crop_spatial((s.h - height) / 2, (s.w - width) / 2, height, width)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::rng::Rng;

    fn seq(shape: Shape4) -> Tensor {
        Tensor::from_vec(shape, (0..shape.len()).map(|i| i as f32).collect()).unwrap()
    }

    #[test]
    fn full_fills() {
        let t = Tensor::<f32>::full(Shape4::new(1, 1, 2, 2), 0.0).unwrap();
        assert_eq!(t.data(), &[0.0; 4]);
        let t = Tensor::<f32>::full(Shape4::new(1, 1, 1, 1), 3.5).unwrap();
        assert_eq!(t.data(), &[3.5]);
        let t = Tensor::<f32>::full(Shape4::new(2, 3, 4, 4), 1.0).unwrap();
        assert_eq!(t.len(), 96);
        assert!(t.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn full_rejects_overflow() {
        let huge = Shape4::new(usize::MAX, 2, 1, 1);
        assert!(matches!(Tensor::<f32>::full(huge, 0.0), Err(Error::Shape(_))));
    }

    #[test]
    fn rand_normal_degenerate_and_deterministic() {
        let s = Shape4::new(1, 2, 3, 3);
        let t = Tensor::<f32>::rand_normal(s, 1.5, 0.0, &mut Rng::new(1)).unwrap();
        assert!(t.data().iter().all(|&v| v == 1.5));
        let a = Tensor::<f32>::rand_normal(s, 0.0, 1.0, &mut Rng::new(9)).unwrap();
        let b = Tensor::<f32>::rand_normal(s, 0.0, 1.0, &mut Rng::new(9)).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            Tensor::<f32>::rand_normal(s, 0.0, -1.0, &mut Rng::new(9)),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn rand_normal_sample_mean() {
        let n = 1_000_000;
        let t = Tensor::<f32>::rand_normal(Shape4::new(1, 1, 1000, 1000), 0.0, 1.0, &mut Rng::new(2024))
            .unwrap();
        let mean = t.data().iter().map(|&v| v as f64).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.005, "sample mean {mean}");
    }

    #[test]
    fn map_zip_identities() {
        let x = seq(Shape4::new(1, 2, 2, 3));
        assert_eq!(x.map(|v| v), x);
        let zeros = Tensor::zeros(x.shape());
        assert_eq!(x.zip(&zeros, |a, b| a + b).unwrap(), x);
        assert_eq!(x.zip(&x, |a, b| a - b).unwrap(), zeros);
        let other = Tensor::<f32>::zeros(Shape4::new(1, 1, 2, 3));
        assert!(matches!(x.zip(&other, |a, _| a), Err(Error::Shape(_))));
    }

    #[test]
    fn concat_and_slice() {
        let a = seq(Shape4::new(1, 2, 4, 4));
        let b = seq(Shape4::new(1, 3, 4, 4)).map(|v| -v);
        let ab = a.concat_channels(&b).unwrap();
        assert_eq!(ab.shape(), Shape4::new(1, 5, 4, 4));
        assert_eq!(ab.slice_channels(0, 2).unwrap(), a);
        assert_eq!(ab.slice_channels(2, 5).unwrap(), b);
        let empty = Tensor::<f32>::zeros(Shape4::new(1, 0, 4, 4));
        assert_eq!(a.concat_channels(&empty).unwrap(), a);
        let wrong = seq(Shape4::new(1, 1, 3, 4));
        assert!(matches!(a.concat_channels(&wrong), Err(Error::Shape(_))));
    }

    #[test]
    fn pad_layouts() {
        let x = seq(Shape4::new(1, 1, 2, 3));
        assert_eq!(x.pad_spatial(0, 0, 9.0), x);
        let one = Tensor::<f32>::full(Shape4::new(1, 1, 1, 1), 5.0).unwrap();
        let p = one.pad_spatial(1, 1, 0.0);
        assert_eq!(p.data(), &[0.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn pad_then_crop_is_identity(n in 1usize..3, c in 1usize..3, h in 1usize..6, w in 1usize..6,
                                     ph in 0usize..4, pw in 0usize..4) {
            let x = seq(Shape4::new(n, c, h, w));
            let padded = x.pad_spatial(ph, pw, -1.0);
            prop_assert_eq!(padded.shape(), Shape4::new(n, c, h + 2 * ph, w + 2 * pw));
            prop_assert_eq!(padded.center_crop(h, w).unwrap(), x);
        }

        #[test]
        fn concat_slice_round_trip(n in 1usize..3, ca in 0usize..4, cb in 0usize..4, h in 1usize..5, w in 1usize..5) {
            let a = seq(Shape4::new(n, ca, h, w));
            let b = seq(Shape4::new(n, cb, h, w)).map(|v| v + 0.5);
            let ab = a.concat_channels(&b).unwrap();
            prop_assert_eq!(ab.slice_channels(0, ca).unwrap(), a);
            prop_assert_eq!(ab.slice_channels(ca, ca + cb).unwrap(), b);
        }
    }

    #[test]
    fn matmul_transposes() {
        // a = [[1,2],[3,4]], b = [[5,6],[7,8]]
        let a = [1.0f64, 2.0, 3.0, 4.0];
        let b = [5.0f64, 6.0, 7.0, 8.0];
        let mut c = [0.0; 4];
        matmul(2, 2, 2, MatRef::plain(&a), MatRef::plain(&b), &mut c, false);
        assert_eq!(c, [19.0, 22.0, 43.0, 50.0]);
        matmul(2, 2, 2, MatRef::t(&a), MatRef::plain(&b), &mut c, false);
        assert_eq!(c, [26.0, 30.0, 38.0, 44.0]);
        matmul(2, 2, 2, MatRef::plain(&a), MatRef::t(&b), &mut c, true);
        assert_eq!(c, [26.0 + 17.0, 30.0 + 23.0, 38.0 + 39.0, 44.0 + 53.0]);
    }
}
