//! Deliberately naive implementations that the optimized code paths are
//! validated against. They favour obviousness over speed.

use std::collections::BTreeMap;

use crate::data::LabelMap;
use crate::error::Result;
use crate::layers::ConvParams;
use crate::synthmap::SeedPoint;
use crate::tensor::{Scalar, Shape4, Tensor};

/// Convolution as the literal quadruple sum over kernel rows, kernel
/// columns and input channels, evaluated in `f64`.
pub fn conv2d_direct<T: Scalar>(x: &Tensor<T>, p: &ConvParams<T>, stride: usize, pad: usize) -> Result<Tensor<f64>> {
    let xs = x.shape();
    let ws = p.weight.shape();
    let oh = (xs.h + 2 * pad - ws.h) / stride + 1;
    let ow = (xs.w + 2 * pad - ws.w) / stride + 1;
    let mut y = Tensor::zeros(Shape4::new(xs.n, ws.n, oh, ow));
    for n in 0..xs.n {
        for k in 0..ws.n {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut s = p.bias[k].f64();
                    for i in 0..ws.h {
                        for j in 0..ws.w {
                            let iy = (oy * stride + i) as isize - pad as isize;
                            let ix = (ox * stride + j) as isize - pad as isize;
                            if iy < 0 || ix < 0 || iy >= xs.h as isize || ix >= xs.w as isize {
                                continue;
                            }
                            for d in 0..xs.c {
                                s += p.weight.at(k, d, i, j).f64() * x.at(n, d, iy as usize, ix as usize).f64();
                            }
                        }
                    }
                    *y.at_mut(n, k, oy, ox) = s;
                }
            }
        }
    }
    Ok(y)
}

/// Mode filter by building a fresh histogram for every window.
pub fn mode_filter_histogram(labels: &LabelMap, k: usize) -> Result<LabelMap> {
    let (w, h) = (labels.width() as isize, labels.height() as isize);
    let r = (k / 2) as isize;
    let mut out = labels.clone();
    for y in 0..h {
        for x in 0..w {
            let mut hist: BTreeMap<u8, usize> = BTreeMap::new();
            for dy in -r..=r {
                for dx in -r..=r {
                    let yy = (y + dy).clamp(0, h - 1) as usize;
                    let xx = (x + dx).clamp(0, w - 1) as usize;
                    *hist.entry(labels.get(xx, yy)).or_default() += 1;
                }
            }
            let top = *hist.values().max().unwrap_or(&0);
            let center = labels.get(x as usize, y as usize);
            let choice = if hist[&center] == top {
                center
            } else {
                hist.iter().find(|(_, &n)| n == top).map(|(&l, _)| l).unwrap_or(center)
            };
            out.set(x as usize, y as usize, choice);
        }
    }
    Ok(out)
}

/// Class of the nearest seed by floating-point Euclidean distance, the
/// earliest seed winning ties.
pub fn voronoi_labels(seeds: &[SeedPoint], width: usize, height: usize) -> Result<LabelMap> {
    let mut labels = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let distance = |s: &SeedPoint| (x as f64 - s.x as f64).hypot(y as f64 - s.y as f64);
            let mut best = 0;
            for (i, s) in seeds.iter().enumerate() {
                if distance(s) < distance(&seeds[best]) {
                    best = i;
                }
            }
            labels.push(seeds[best].class);
        }
    }
    LabelMap::new(width, height, labels)
}
