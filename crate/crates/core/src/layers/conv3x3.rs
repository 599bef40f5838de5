//! Direct 3×3, stride-1, pad-1 convolution kernels for `f32` on x86-64,
//! using AVX-512 or AVX2+FMA as detected at run time.
//!
//! The input is copied into a zero-bordered plane stack first. Forward
//! computes a register tile of 8 output channels × 32 pixels (AVX-512) or
//! 4 × 16 (AVX2); each output element accumulates over `(c, i, j)` in
//! ascending order starting from the bias, so both variants agree bit for
//! bit. The weight gradient computes the nine taps of one `(k, c)` pair
//! together, each tap accumulated in vector lanes over `(y, x)` and reduced
//! lane-wise at the end.

#[cfg(target_arch = "x86_64")]
use std::arch::x86_64::*;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
#[cfg_attr(not(target_arch = "x86_64"), allow(dead_code))]
enum Isa {
    None,
    Avx2,
    Avx512,
}

fn isa() -> Isa {
    #[cfg(target_arch = "x86_64")]
    {
        use std::sync::OnceLock;
        static DETECTED: OnceLock<Isa> = OnceLock::new();
        *DETECTED.get_or_init(|| {
            if is_x86_feature_detected!("avx512f") {
                Isa::Avx512
            } else if is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma") {
                Isa::Avx2
            } else {
                Isa::None
            }
        })
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        Isa::None
    }
}

/// Whether the fast kernels can run on this machine.
pub(crate) fn available() -> bool {
    isa() != Isa::None
}

/// Output channels per packed weight block.
pub(crate) fn block_width() -> usize {
    if isa() == Isa::Avx512 {
        8
    } else {
        4
    }
}

/// Copies `c` planes of `h × w` into `(c, h+2, w+2)` with a zero border.
pub(crate) fn pad_planes(x: &[f32], c: usize, h: usize, w: usize) -> Vec<f32> {
    let (ph, pw) = (h + 2, w + 2);
    let mut out = vec![0.0f32; c * ph * pw];
    for ch in 0..c {
        for y in 0..h {
            let src = &x[(ch * h + y) * w..(ch * h + y + 1) * w];
            let dst = (ch * ph + y + 1) * pw + 1;
            out[dst..dst + w].copy_from_slice(src);
        }
    }
    out
}

/// Repacks `(K, C, 3, 3)` weights as `[K/B blocks][C][9][B]` with
/// `B = block_width()`, padding the last block with zero filters.
pub(crate) fn pack_weights(weight: &[f32], k: usize, c: usize) -> Vec<f32> {
    let bw = block_width();
    let blocks = k.div_ceil(bw);
    let mut out = vec![0.0f32; blocks * c * 9 * bw];
    for kk in 0..k {
        let (b, lane) = (kk / bw, kk % bw);
        for ch in 0..c {
            for t in 0..9 {
                out[((b * c + ch) * 9 + t) * bw + lane] = weight[(kk * c + ch) * 9 + t];
            }
        }
    }
    out
}

/// Weights of the adjoint convolution: `(C, K, 3, 3)` with each kernel
/// rotated by 180°.
pub(crate) fn adjoint_weights(weight: &[f32], k: usize, c: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; k * c * 9];
    for kk in 0..k {
        for ch in 0..c {
            for t in 0..9 {
                out[(ch * k + kk) * 9 + (8 - t)] = weight[(kk * c + ch) * 9 + t];
            }
        }
    }
    out
}

/// `y (k, h, w) = conv(xpad, weights) + bias` for one batch item.
///
/// `xpad` comes from [`pad_planes`] and `packed` from [`pack_weights`].
#[allow(clippy::too_many_arguments)]
pub(crate) fn forward(
    xpad: &[f32],
    packed: &[f32],
    bias: &[f32],
    c: usize,
    k: usize,
    h: usize,
    w: usize,
    y: &mut [f32],
) {
    assert!(available());
    assert_eq!(xpad.len(), c * (h + 2) * (w + 2));
    assert_eq!(packed.len(), k.div_ceil(block_width()) * c * 9 * block_width());
    assert_eq!(y.len(), k * h * w);
    assert_eq!(bias.len(), k);
    #[cfg(target_arch = "x86_64")]
    // SAFETY: features checked by `isa`; extents asserted above.
    unsafe {
        match isa() {
            Isa::Avx512 => forward_avx512(xpad, packed, bias, c, k, h, w, y),
            _ => forward_avx2(xpad, packed, bias, c, k, h, w, y),
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
#[allow(clippy::too_many_arguments)]
unsafe fn forward_avx512(
    xpad: &[f32],
    packed: &[f32],
    bias: &[f32],
    c: usize,
    k: usize,
    h: usize,
    w: usize,
    y: &mut [f32],
) {
    let pw = w + 2;
    let plane_p = (h + 2) * pw;
    let plane = h * w;
    let xp = xpad.as_ptr();
    let yp = y.as_mut_ptr();
    let blocks = k.div_ceil(8);
    for row in 0..h {
        let mut x0 = 0;
        while x0 < w {
            let width = (w - x0).min(32);
            for b in 0..blocks {
                let wb = packed.as_ptr().add(b * c * 72);
                let lanes = (k - 8 * b).min(8);
                if width == 32 {
                    let mut acc = [[_mm512_setzero_ps(); 2]; 8];
                    for (l, a) in acc.iter_mut().enumerate().take(lanes) {
                        let bv = _mm512_set1_ps(bias[8 * b + l]);
                        *a = [bv, bv];
                    }
                    for ch in 0..c {
                        let base = xp.add(ch * plane_p + row * pw + x0);
                        let wc = wb.add(ch * 72);
                        for i in 0..3 {
                            let r = base.add(i * pw);
                            for j in 0..3 {
                                let v0 = _mm512_loadu_ps(r.add(j));
                                let v1 = _mm512_loadu_ps(r.add(j + 16));
                                let wt = wc.add((i * 3 + j) * 8);
                                for (l, a) in acc.iter_mut().enumerate() {
                                    let wv = _mm512_set1_ps(*wt.add(l));
                                    a[0] = _mm512_fmadd_ps(wv, v0, a[0]);
                                    a[1] = _mm512_fmadd_ps(wv, v1, a[1]);
                                }
                            }
                        }
                    }
                    for (l, a) in acc.iter().enumerate().take(lanes) {
                        let dst = yp.add((8 * b + l) * plane + row * w + x0);
                        _mm512_storeu_ps(dst, a[0]);
                        _mm512_storeu_ps(dst.add(16), a[1]);
                    }
                } else {
                    let step = width.min(16);
                    let mask: __mmask16 = if step == 16 { 0xffff } else { (1u16 << step) - 1 };
                    let mut acc = [_mm512_setzero_ps(); 8];
                    for (l, a) in acc.iter_mut().enumerate().take(lanes) {
                        *a = _mm512_set1_ps(bias[8 * b + l]);
                    }
                    for ch in 0..c {
                        let base = xp.add(ch * plane_p + row * pw + x0);
                        let wc = wb.add(ch * 72);
                        for i in 0..3 {
                            let r = base.add(i * pw);
                            for j in 0..3 {
                                let v0 = _mm512_maskz_loadu_ps(mask, r.add(j));
                                let wt = wc.add((i * 3 + j) * 8);
                                for (l, a) in acc.iter_mut().enumerate() {
                                    let wv = _mm512_set1_ps(*wt.add(l));
                                    *a = _mm512_fmadd_ps(wv, v0, *a);
                                }
                            }
                        }
                    }
                    for (l, a) in acc.iter().enumerate().take(lanes) {
                        _mm512_mask_storeu_ps(yp.add((8 * b + l) * plane + row * w + x0), mask, *a);
                    }
                }
            }
            x0 += if width == 32 { 32 } else { width.min(16) };
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
#[allow(clippy::too_many_arguments)]
unsafe fn forward_avx2(
    xpad: &[f32],
    packed: &[f32],
    bias: &[f32],
    c: usize,
    k: usize,
    h: usize,
    w: usize,
    y: &mut [f32],
) {
    let pw = w + 2;
    let plane_p = (h + 2) * pw;
    let plane = h * w;
    let xp = xpad.as_ptr();
    let yp = y.as_mut_ptr();
    let blocks = k.div_ceil(4);
    for row in 0..h {
        let mut x0 = 0;
        while x0 < w {
            let width = (w - x0).min(16);
            for b in 0..blocks {
                let wb = packed.as_ptr().add(b * c * 36);
                let lanes = (k - 4 * b).min(4);
                if width == 16 {
                    let mut acc = [[_mm256_setzero_ps(); 2]; 4];
                    for (l, a) in acc.iter_mut().enumerate().take(lanes) {
                        let bv = _mm256_set1_ps(bias[4 * b + l]);
                        *a = [bv, bv];
                    }
                    for ch in 0..c {
                        let base = xp.add(ch * plane_p + row * pw + x0);
                        let wc = wb.add(ch * 36);
                        for i in 0..3 {
                            let r = base.add(i * pw);
                            for j in 0..3 {
                                let v0 = _mm256_loadu_ps(r.add(j));
                                let v1 = _mm256_loadu_ps(r.add(j + 8));
                                let wt = wc.add((i * 3 + j) * 4);
                                for (l, a) in acc.iter_mut().enumerate() {
                                    let wv = _mm256_broadcast_ss(&*wt.add(l));
                                    a[0] = _mm256_fmadd_ps(wv, v0, a[0]);
                                    a[1] = _mm256_fmadd_ps(wv, v1, a[1]);
                                }
                            }
                        }
                    }
                    for (l, a) in acc.iter().enumerate().take(lanes) {
                        let dst = yp.add((4 * b + l) * plane + row * w + x0);
                        _mm256_storeu_ps(dst, a[0]);
                        _mm256_storeu_ps(dst.add(8), a[1]);
                    }
                } else if width >= 8 {
                    let mut acc = [_mm256_setzero_ps(); 4];
                    for (l, a) in acc.iter_mut().enumerate().take(lanes) {
                        *a = _mm256_set1_ps(bias[4 * b + l]);
                    }
                    for ch in 0..c {
                        let base = xp.add(ch * plane_p + row * pw + x0);
                        let wc = wb.add(ch * 36);
                        for i in 0..3 {
                            let r = base.add(i * pw);
                            for j in 0..3 {
                                let v0 = _mm256_loadu_ps(r.add(j));
                                let wt = wc.add((i * 3 + j) * 4);
                                for (l, a) in acc.iter_mut().enumerate() {
                                    let wv = _mm256_broadcast_ss(&*wt.add(l));
                                    *a = _mm256_fmadd_ps(wv, v0, *a);
                                }
                            }
                        }
                    }
                    for (l, a) in acc.iter().enumerate().take(lanes) {
                        _mm256_storeu_ps(yp.add((4 * b + l) * plane + row * w + x0), *a);
                    }
                } else {
                    for l in 0..lanes {
                        for x in x0..x0 + width {
                            let mut s = bias[4 * b + l];
                            for ch in 0..c {
                                let base = xp.add(ch * plane_p + row * pw + x);
                                let wc = wb.add(ch * 36);
                                for i in 0..3 {
                                    for j in 0..3 {
                                        s = (*wc.add((i * 3 + j) * 4 + l)).mul_add(*base.add(i * pw + j), s);
                                    }
                                }
                            }
                            *yp.add((4 * b + l) * plane + row * w + x) = s;
                        }
                    }
                }
            }
            x0 += if width >= 16 { 16 } else if width >= 8 { 8 } else { width };
        }
    }
}

/// Adds `Σ_{y,x} gy[k, y, x] · xpad[c, y+i, x+j]` into `gw[(k·C + c)·9 + 3i + j]`.
pub(crate) fn weight_grad(xpad: &[f32], gy: &[f32], c: usize, k: usize, h: usize, w: usize, gw: &mut [f32]) {
    assert!(available());
    assert_eq!(xpad.len(), c * (h + 2) * (w + 2));
    assert_eq!(gy.len(), k * h * w);
    assert_eq!(gw.len(), k * c * 9);
    #[cfg(target_arch = "x86_64")]
    // SAFETY: features checked by `isa`; extents asserted above.
    unsafe {
        match isa() {
            Isa::Avx512 => weight_grad_avx512(xpad, gy, c, k, h, w, gw),
            _ => weight_grad_avx2(xpad, gy, c, k, h, w, gw),
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn weight_grad_avx512(xpad: &[f32], gy: &[f32], c: usize, k: usize, h: usize, w: usize, gw: &mut [f32]) {
    let mut kk = 0;
    while kk + 2 <= k {
        weight_grad_rows_avx512::<2>(xpad, gy, kk, c, h, w, gw);
        kk += 2;
    }
    if kk < k {
        weight_grad_rows_avx512::<1>(xpad, gy, kk, c, h, w, gw);
    }
}

/// Weight gradient for output channels `k0..k0+KB`, sharing input loads.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn weight_grad_rows_avx512<const KB: usize>(
    xpad: &[f32],
    gy: &[f32],
    k0: usize,
    c: usize,
    h: usize,
    w: usize,
    gw: &mut [f32],
) {
    let pw = w + 2;
    let plane_p = (h + 2) * pw;
    let plane = h * w;
    let xp = xpad.as_ptr();
    let gp = gy.as_ptr();
    for ch in 0..c {
        let mut acc = [[_mm512_setzero_ps(); 9]; KB];
        for row in 0..h {
            let x_row = xp.add(ch * plane_p + row * pw);
            let mut x0 = 0;
            while x0 < w {
                let step = (w - x0).min(16);
                let mask: __mmask16 = if step == 16 { 0xffff } else { (1u16 << step) - 1 };
                let mut g = [_mm512_setzero_ps(); KB];
                for (q, gv) in g.iter_mut().enumerate() {
                    *gv = _mm512_maskz_loadu_ps(mask, gp.add((k0 + q) * plane + row * w + x0));
                }
                for i in 0..3 {
                    let r = x_row.add(i * pw + x0);
                    for j in 0..3 {
                        let xv = _mm512_maskz_loadu_ps(mask, r.add(j));
                        for q in 0..KB {
                            acc[q][i * 3 + j] = _mm512_fmadd_ps(g[q], xv, acc[q][i * 3 + j]);
                        }
                    }
                }
                x0 += step;
            }
        }
        for (q, accq) in acc.iter().enumerate() {
            let base = ((k0 + q) * c + ch) * 9;
            for (t, a) in accq.iter().enumerate() {
                let mut lanes = [0.0f32; 16];
                _mm512_storeu_ps(lanes.as_mut_ptr(), *a);
                let mut half = [0.0f32; 8];
                for (m, v) in half.iter_mut().enumerate() {
                    *v = lanes[m] + lanes[m + 8];
                }
                let s = ((half[0] + half[1]) + (half[2] + half[3])) + ((half[4] + half[5]) + (half[6] + half[7]));
                gw[base + t] += s;
            }
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn weight_grad_avx2(xpad: &[f32], gy: &[f32], c: usize, k: usize, h: usize, w: usize, gw: &mut [f32]) {
    let pw = w + 2;
    let plane_p = (h + 2) * pw;
    let plane = h * w;
    let xp = xpad.as_ptr();
    let gp = gy.as_ptr();
    let vec_w = w / 8 * 8;
    for kk in 0..k {
        for ch in 0..c {
            let mut acc = [_mm256_setzero_ps(); 9];
            let mut tail = [0.0f32; 9];
            for row in 0..h {
                let g_row = gp.add(kk * plane + row * w);
                let x_row = xp.add(ch * plane_p + row * pw);
                let mut x0 = 0;
                while x0 < vec_w {
                    let g = _mm256_loadu_ps(g_row.add(x0));
                    for i in 0..3 {
                        let r = x_row.add(i * pw + x0);
                        acc[i * 3] = _mm256_fmadd_ps(g, _mm256_loadu_ps(r), acc[i * 3]);
                        acc[i * 3 + 1] = _mm256_fmadd_ps(g, _mm256_loadu_ps(r.add(1)), acc[i * 3 + 1]);
                        acc[i * 3 + 2] = _mm256_fmadd_ps(g, _mm256_loadu_ps(r.add(2)), acc[i * 3 + 2]);
                    }
                    x0 += 8;
                }
                for x in vec_w..w {
                    let g = *g_row.add(x);
                    for i in 0..3 {
                        for j in 0..3 {
                            tail[i * 3 + j] = g.mul_add(*x_row.add(i * pw + x + j), tail[i * 3 + j]);
                        }
                    }
                }
            }
            let out = &mut gw[(kk * c + ch) * 9..(kk * c + ch + 1) * 9];
            for t in 0..9 {
                let mut lanes = [0.0f32; 8];
                _mm256_storeu_ps(lanes.as_mut_ptr(), acc[t]);
                let s = ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3]))
                    + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
                out[t] += s + tail[t];
            }
        }
    }
}
