use super::epoch::Patch;
use super::image::LabelMap;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Shape4, Tensor};

/// Which label-preserving transforms [`augment`] may draw from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentSpec {
    /// Quarter turns by 0, 90, 180 or 270 degrees.
    pub rotate: bool,
    /// Horizontal or vertical mirroring.
    pub flip: bool,
    /// Inclusive range of isotropic scale factors about the patch centre.
    pub stretch: Option<(f64, f64)>,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        AugmentSpec {
            rotate: true,
            flip: true,
            stretch: Some((0.8, 1.25)),
        }
    }
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some((lo, hi)) = self.stretch {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::argument(format!("stretch range [{lo}, {hi}] is not a positive interval")));
            }
        }
        Ok(())
    }
}

/// One geometric transform, applied identically to image and labels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Transform {
    /// Counter-clockwise quarter turns (taken modulo 4).
    Rotate(u8),
    /// Mirror left-right.
    FlipHorizontal,
    /// Mirror top-bottom.
    FlipVertical,
    /// Scale about the centre by this factor, keeping the patch size.
    /// Images are resampled bilinearly and labels by nearest neighbour,
    /// with edge pixels replicated outward.
    Stretch(f64),
}

impl Transform {
    pub fn apply(&self, patch: &Patch, spec: &AugmentSpec) -> Result<Patch> {
        let (h, w) = (patch.labels.height(), patch.labels.width());
        match *self {
            Transform::Rotate(q) => match q % 4 {
                0 => Ok(patch.clone()),
                1 | 3 if h != w => Err(Error::argument(format!("cannot quarter-turn a {w}×{h} patch in place"))),
                1 => Ok(remap(patch, |y, x| (x, w - 1 - y))),
                2 => Ok(remap(patch, |y, x| (h - 1 - y, w - 1 - x))),
                _ => Ok(remap(patch, |y, x| (h - 1 - x, y))),
            },
            Transform::FlipHorizontal => Ok(remap(patch, |y, x| (y, w - 1 - x))),
            Transform::FlipVertical => Ok(remap(patch, |y, x| (h - 1 - y, x))),
            Transform::Stretch(f) => {
                match spec.stretch {
                    Some((lo, hi)) if f >= lo && f <= hi => {}
                    range => {
                        return Err(Error::argument(format!(
                            "stretch factor {f} outside configured range {range:?}"
                        )))
                    }
                }
                Ok(stretch(patch, f))
            }
        }
    }
}

fn check_patch(patch: &Patch) {
    let s = patch.image.shape();
    debug_assert_eq!((s.n, s.h, s.w), (1, patch.labels.height(), patch.labels.width()));
}

/// `out(y, x) = in(source(y, x))` for every channel and the labels.
fn remap(patch: &Patch, source: impl Fn(usize, usize) -> (usize, usize)) -> Patch {
    check_patch(patch);
    let s = patch.image.shape();
    let (h, w) = (s.h, s.w);
    let plane = h * w;
    let src = patch.image.data();
    let mut img = vec![0.0f32; s.len()];
    let mut labels = vec![0u8; plane];
    for y in 0..h {
        for x in 0..w {
            let (sy, sx) = source(y, x);
            let (o, i) = (y * w + x, sy * w + sx);
            labels[o] = patch.labels.labels()[i];
            for c in 0..s.c {
                img[c * plane + o] = src[c * plane + i];
            }
        }
    }
    Patch {
        image: Tensor::from_vec(s, img).expect("same shape"),
        labels: LabelMap::new(w, h, labels).expect("same size"),
    }
}

fn stretch(patch: &Patch, factor: f64) -> Patch {
    check_patch(patch);
    let s = patch.image.shape();
    let (h, w) = (s.h, s.w);
    let plane = h * w;
    // source coordinate of output index i along an axis of length n
    let source = |i: usize, n: usize| {
        let centre = n as f64 / 2.0;
        (i as f64 + 0.5 - centre) / factor + centre - 0.5
    };
    let clamp = |v: f64, n: usize| v.max(0.0).min((n - 1) as f64);
    let src = patch.image.data();
    let mut img = vec![0.0f32; s.len()];
    let mut labels = vec![0u8; plane];
    for y in 0..h {
        let sy = source(y, h);
        let y0 = sy.floor();
        let ty = (sy - y0) as f32;
        let (ya, yb) = (clamp(y0, h) as usize, clamp(y0 + 1.0, h) as usize);
        let ny = clamp((sy + 0.5).floor(), h) as usize;
        for x in 0..w {
            let sx = source(x, w);
            let x0 = sx.floor();
            let tx = (sx - x0) as f32;
            let (xa, xb) = (clamp(x0, w) as usize, clamp(x0 + 1.0, w) as usize);
            let nx = clamp((sx + 0.5).floor(), w) as usize;
            let o = y * w + x;
            labels[o] = patch.labels.labels()[ny * w + nx];
            for c in 0..s.c {
                let p = &src[c * plane..(c + 1) * plane];
                let top = p[ya * w + xa] * (1.0 - tx) + p[ya * w + xb] * tx;
                let bottom = p[yb * w + xa] * (1.0 - tx) + p[yb * w + xb] * tx;
                img[c * plane + o] = top * (1.0 - ty) + bottom * ty;
            }
        }
    }
    Patch {
        image: Tensor::from_vec(Shape4::new(1, s.c, h, w), img).expect("same shape"),
        labels: LabelMap::new(w, h, labels).expect("same size"),
    }
}

/// Draws a random rotation, flip and stretch (each only when enabled by
/// `spec`) and applies them in that order.
pub fn augment(patch: &Patch, spec: &AugmentSpec, rng: &mut Rng) -> Result<Patch> {
    spec.validate()?;
    let mut out = patch.clone();
    if spec.rotate {
        out = Transform::Rotate(rng.below(4) as u8).apply(&out, spec)?;
    }
    if spec.flip {
        match rng.below(3) {
            1 => out = Transform::FlipHorizontal.apply(&out, spec)?,
            2 => out = Transform::FlipVertical.apply(&out, spec)?,
            _ => {}
        }
    }
    if let Some((lo, hi)) = spec.stretch {
        // log-uniform, so shrinking and enlarging are equally likely
        let f = rng.uniform(lo.ln(), hi.ln()).exp().clamp(lo, hi);
        out = Transform::Stretch(f).apply(&out, spec)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Channel 0 encodes the row, channel 1 the column, labels encode both.
    fn coordinate_patch(h: usize, w: usize) -> Patch {
        let plane = h * w;
        let mut img = vec![0.0f32; 3 * plane];
        let mut labels = vec![0u8; plane];
        for y in 0..h {
            for x in 0..w {
                img[y * w + x] = y as f32;
                img[plane + y * w + x] = x as f32;
                img[2 * plane + y * w + x] = (y * w + x) as f32;
                labels[y * w + x] = (y * w + x) as u8;
            }
        }
        Patch {
            image: Tensor::from_vec(Shape4::new(1, 3, h, w), img).unwrap(),
            labels: LabelMap::new(w, h, labels).unwrap(),
        }
    }

    fn aligned(p: &Patch) -> bool {
        let plane = p.labels.labels().len();
        p.labels
            .labels()
            .iter()
            .enumerate()
            .all(|(i, &l)| p.image.data()[2 * plane + i] == l as f32)
    }

    #[test]
    fn four_quarter_turns_are_identity() {
        let spec = AugmentSpec::default();
        let p = coordinate_patch(6, 6);
        let mut q = p.clone();
        for _ in 0..4 {
            q = Transform::Rotate(1).apply(&q, &spec).unwrap();
            assert!(aligned(&q));
        }
        assert_eq!(q, p);
    }

    #[test]
    fn quarter_turn_direction() {
        let spec = AugmentSpec::default();
        let p = coordinate_patch(3, 3);
        let q = Transform::Rotate(1).apply(&p, &spec).unwrap();
        // counter-clockwise: the top-right pixel moves to the top-left
        assert_eq!(q.labels.get(0, 0), p.labels.get(2, 0));
        let r2 = Transform::Rotate(2).apply(&p, &spec).unwrap();
        assert_eq!(r2, Transform::Rotate(1).apply(&q, &spec).unwrap());
        let r3 = Transform::Rotate(3).apply(&p, &spec).unwrap();
        assert_eq!(Transform::Rotate(1).apply(&r3, &spec).unwrap(), p);
    }

    #[test]
    fn flips_are_involutions() {
        let spec = AugmentSpec::default();
        let p = coordinate_patch(4, 5);
        for t in [Transform::FlipHorizontal, Transform::FlipVertical] {
            let q = t.apply(&p, &spec).unwrap();
            assert!(aligned(&q));
            assert_ne!(q, p);
            assert_eq!(t.apply(&q, &spec).unwrap(), p);
        }
        assert!(Transform::Rotate(1).apply(&p, &spec).is_err());
    }

    #[test]
    fn neutral_stretch_is_identity() {
        let spec = AugmentSpec::default();
        let p = coordinate_patch(8, 8);
        assert_eq!(Transform::Stretch(1.0).apply(&p, &spec).unwrap(), p);
    }

    #[test]
    fn stretch_range_enforced() {
        let p = coordinate_patch(8, 8);
        let spec = AugmentSpec::default();
        assert!(matches!(Transform::Stretch(1.3).apply(&p, &spec), Err(Error::Argument(_))));
        assert!(matches!(Transform::Stretch(0.7).apply(&p, &spec), Err(Error::Argument(_))));
        let none = AugmentSpec { stretch: None, ..spec };
        assert!(Transform::Stretch(1.0).apply(&p, &none).is_err());
    }

    #[test]
    fn enlarging_stretch_zooms_into_the_centre() {
        let spec = AugmentSpec::default();
        let p = coordinate_patch(8, 8);
        let q = Transform::Stretch(1.25).apply(&p, &spec).unwrap();
        // source coordinate of index 0 is (0.5 − 4) / 1.25 + 3.5 = 0.7
        assert!((q.image.at(0, 1, 0, 0) - 0.7).abs() < 1e-6);
        assert_eq!(q.labels.get(0, 0), p.labels.get(1, 1));
        let r = Transform::Stretch(0.8).apply(&p, &spec).unwrap();
        // shrinking replicates the border
        assert_eq!(r.image.at(0, 1, 0, 0), 0.0);
        assert_eq!(r.labels.get(0, 0), 0);
    }

    #[test]
    fn random_augmentation_keeps_labels_valid_and_aligned() {
        let mut rng = Rng::new(3);
        let p = coordinate_patch(10, 10);
        let valid: std::collections::HashSet<u8> = p.labels.labels().iter().copied().collect();
        let no_stretch = AugmentSpec { stretch: None, ..AugmentSpec::default() };
        for _ in 0..50 {
            let q = augment(&p, &AugmentSpec::default(), &mut rng).unwrap();
            assert_eq!(q.image.shape(), p.image.shape());
            assert!(q.labels.labels().iter().all(|l| valid.contains(l)));
            let r = augment(&p, &no_stretch, &mut rng).unwrap();
            assert!(aligned(&r));
        }
    }

    #[test]
    fn augmentation_is_seeded() {
        let p = coordinate_patch(10, 10);
        let a = augment(&p, &AugmentSpec::default(), &mut Rng::new(5)).unwrap();
        let b = augment(&p, &AugmentSpec::default(), &mut Rng::new(5)).unwrap();
        assert_eq!(a, b);
    }
}
