//! Morphological clean-up of predicted label maps.
//!
//! Binary erosion and dilation work on [`BinaryMask`]s with replicate
//! borders. Label maps are smoothed by a majority (mode) filter and by
//! per-class binary morphology: each class mask is transformed in ascending
//! class order and the masks are recombined. A pixel claimed by exactly one
//! class takes that class; a pixel claimed by no class or by several is a
//! conflict and takes the 3×3 mode of the map the step started from.
//! Every step therefore selects labels already present in the input.

use std::fmt;
use std::str::FromStr;

use crate::data::LabelMap;
use crate::error::{Error, Result};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ElementShape {
    #[default]
    Square,
    Cross,
}

/// Centered k×k window, either full or just its middle row and column.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StructuringElement {
    k: usize,
    shape: ElementShape,
}

impl StructuringElement {
    pub fn new(k: usize, shape: ElementShape) -> Result<Self> {
        if k == 0 || k.is_multiple_of(2) {
            return Err(Error::argument(format!("structuring element size {k} must be odd and ≥ 1")));
        }
        Ok(StructuringElement { k, shape })
    }

    pub fn square(k: usize) -> Result<Self> {
        Self::new(k, ElementShape::Square)
    }

    pub fn cross(k: usize) -> Result<Self> {
        Self::new(k, ElementShape::Cross)
    }

    pub fn size(&self) -> usize {
        self.k
    }

    pub fn shape(&self) -> ElementShape {
        self.shape
    }

    pub fn radius(&self) -> usize {
        self.k / 2
    }

    /// Offsets `(dy, dx)` covered by the element.
    pub fn offsets(&self) -> Vec<(isize, isize)> {
        let r = self.radius() as isize;
        let mut out = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                if self.shape == ElementShape::Square || dy == 0 || dx == 0 {
                    out.push((dy, dx));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::shape(format!(
                "{}×{} mask needs {} values, got {}",
                width,
                height,
                width * height,
                bits.len()
            )));
        }
        Ok(BinaryMask { width, height, bits })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        BinaryMask {
            width,
            height,
            bits: vec![value; width * height],
        }
    }

    pub fn of_class(labels: &LabelMap, class: u8) -> Self {
        BinaryMask {
            width: labels.width(),
            height: labels.height(),
            bits: labels.labels().iter().map(|&l| l == class).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn complement(&self) -> Self {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    fn zip(&self, other: &Self, f: impl Fn(bool, bool) -> bool) -> Self {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Min (`want = false`) or max (`want = true`) along rows or columns
    /// over ±r with clamped coordinates.
    fn line(&self, r: usize, vertical: bool, want: bool) -> Self {
        let (w, h) = (self.width, self.height);
        let mut out = self.clone();
        if r == 0 || w == 0 || h == 0 {
            return out;
        }
        for y in 0..h {
            for x in 0..w {
                let hit = if vertical {
                    (y.saturating_sub(r)..=(y + r).min(h - 1)).any(|yy| self.bits[yy * w + x] == want)
                } else {
                    self.bits[y * w + x.saturating_sub(r)..=y * w + (x + r).min(w - 1)].contains(&want)
                };
                out.bits[y * w + x] = if hit { want } else { !want };
            }
        }
        out
    }

    fn extremum(&self, se: &StructuringElement, want: bool) -> Self {
        let r = se.radius();
        match se.shape {
            ElementShape::Square => self.line(r, false, want).line(r, true, want),
            ElementShape::Cross => {
                let a = self.line(r, false, want);
                let b = self.line(r, true, want);
                if want {
                    a.zip(&b, |p, q| p || q)
                } else {
                    a.zip(&b, |p, q| p && q)
                }
            }
        }
    }
}

pub fn erode(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    mask.extremum(se, false)
}

pub fn dilate(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    mask.extremum(se, true)
}

pub fn open(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    dilate(&erode(mask, se), se)
}

pub fn close(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    erode(&dilate(mask, se), se)
}

fn mode_at(labels: &[u8], w: usize, h: usize, x: usize, y: usize, r: usize, counts: &mut [u32; 256]) -> u8 {
    let center = labels[y * w + x];
    let (y0, y1) = (y as isize - r as isize, y as isize + r as isize);
    let (x0, x1) = (x as isize - r as isize, x as isize + r as isize);
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut best = 0u32;
    for yy in y0..=y1 {
        let row = &labels[clamp(yy, h) * w..];
        for xx in x0..=x1 {
            let l = row[clamp(xx, w)] as usize;
            counts[l] += 1;
            best = best.max(counts[l]);
        }
    }
    let winner = if counts[center as usize] == best {
        center
    } else {
        counts.iter().position(|&c| c == best).unwrap_or(0) as u8
    };
    for yy in y0..=y1 {
        let row = &labels[clamp(yy, h) * w..];
        for xx in x0..=x1 {
            counts[row[clamp(xx, w)] as usize] = 0;
        }
    }
    winner
}

/// Majority label in each k×k window (replicate borders). Ties keep the
/// center label when it is among the most frequent, otherwise the lowest
/// tied class.
pub fn mode_filter(labels: &LabelMap, k: usize) -> Result<LabelMap> {
    if k < 3 || k.is_multiple_of(2) {
        return Err(Error::argument(format!("mode filter size {k} must be odd and ≥ 3")));
    }
    let (w, h) = (labels.width(), labels.height());
    let src = labels.labels();
    let rows = par::map_indices(h, |y| {
        let mut counts = [0u32; 256];
        (0..w).map(|x| mode_at(src, w, h, x, y, k / 2, &mut counts)).collect::<Vec<u8>>()
    });
    LabelMap::new(w, h, rows.concat())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MorphOp {
    Erode,
    Dilate,
    Open,
    Close,
}

impl MorphOp {
    pub fn apply(self, mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
        match self {
            MorphOp::Erode => erode(mask, se),
            MorphOp::Dilate => dilate(mask, se),
            MorphOp::Open => open(mask, se),
            MorphOp::Close => close(mask, se),
        }
    }

    fn keyword(self) -> &'static str {
        match self {
            MorphOp::Erode => "erode",
            MorphOp::Dilate => "dilate",
            MorphOp::Open => "open",
            MorphOp::Close => "close",
        }
    }
}

/// Applies `op` to every class mask present in `labels` and recombines.
pub fn per_class(labels: &LabelMap, op: MorphOp, se: &StructuringElement) -> Result<LabelMap> {
    let (w, h) = (labels.width(), labels.height());
    const UNCLAIMED: u16 = u16::MAX;
    const CONTESTED: u16 = u16::MAX - 1;
    let mut claim = vec![UNCLAIMED; w * h];
    for (class, &n) in labels.histogram(256).iter().enumerate() {
        if n == 0 {
            continue;
        }
        let mask = op.apply(&BinaryMask::of_class(labels, class as u8), se);
        for (c, &b) in claim.iter_mut().zip(mask.bits()) {
            if b {
                *c = if *c == UNCLAIMED { class as u16 } else { CONTESTED };
            }
        }
    }
    let src = labels.labels();
    let mut counts = [0u32; 256];
    let out = claim
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if c < CONTESTED {
                c as u8
            } else {
                mode_at(src, w, h, i % w, i / w, 1, &mut counts)
            }
        })
        .collect();
    LabelMap::new(w, h, out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DenoiseStep {
    Mode(usize),
    PerClass(MorphOp, StructuringElement),
}

impl DenoiseStep {
    pub fn apply(&self, labels: &LabelMap) -> Result<LabelMap> {
        match self {
            DenoiseStep::Mode(k) => mode_filter(labels, *k),
            DenoiseStep::PerClass(op, se) => per_class(labels, *op, se),
        }
    }
}

/// Ordered list of denoising steps, written as e.g. `mode:3,open:3,close:3`
/// (`open:5:cross` selects a cross-shaped element; `none` is empty).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DenoisePolicy {
    pub steps: Vec<DenoiseStep>,
}

impl DenoisePolicy {
    pub fn none() -> Self {
        DenoisePolicy { steps: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

impl Default for DenoisePolicy {
    fn default() -> Self {
        let se = StructuringElement {
            k: 3,
            shape: ElementShape::Square,
        };
        DenoisePolicy {
            steps: vec![
                DenoiseStep::Mode(3),
                DenoiseStep::PerClass(MorphOp::Open, se),
                DenoiseStep::PerClass(MorphOp::Close, se),
            ],
        }
    }
}

impl FromStr for DenoisePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "none" {
            return Ok(DenoisePolicy::none());
        }
        let bad = |item: &str, why: &str| Error::argument(format!("postprocess step '{item}': {why}"));
        let mut steps = Vec::new();
        for item in s.split(',').map(str::trim) {
            let mut parts = item.split(':');
            let name = parts.next().unwrap_or_default();
            let k: usize = parts
                .next()
                .ok_or_else(|| bad(item, "missing window size"))?
                .parse()
                .map_err(|_| bad(item, "window size is not an integer"))?;
            let shape = match parts.next() {
                None | Some("square") => ElementShape::Square,
                Some("cross") => ElementShape::Cross,
                Some(other) => return Err(bad(item, &format!("unknown element shape '{other}'"))),
            };
            if parts.next().is_some() {
                return Err(bad(item, "too many fields"));
            }
            let op = match name {
                "mode" => {
                    if k < 3 || k.is_multiple_of(2) || shape != ElementShape::Square {
                        return Err(bad(item, "mode filter needs an odd square window ≥ 3"));
                    }
                    steps.push(DenoiseStep::Mode(k));
                    continue;
                }
                "erode" => MorphOp::Erode,
                "dilate" => MorphOp::Dilate,
                "open" => MorphOp::Open,
                "close" => MorphOp::Close,
                _ => return Err(bad(item, "unknown operation")),
            };
            let se = StructuringElement::new(k, shape).map_err(|e| bad(item, &e.to_string()))?;
            steps.push(DenoiseStep::PerClass(op, se));
        }
        Ok(DenoisePolicy { steps })
    }
}

impl fmt::Display for DenoisePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.steps.is_empty() {
            return f.write_str("none");
        }
        for (i, step) in self.steps.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            match step {
                DenoiseStep::Mode(k) => write!(f, "mode:{k}")?,
                DenoiseStep::PerClass(op, se) => {
                    write!(f, "{}:{}", op.keyword(), se.k)?;
                    if se.shape == ElementShape::Cross {
                        f.write_str(":cross")?;
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn denoise_labels(labels: &LabelMap, policy: &DenoisePolicy) -> Result<LabelMap> {
    let mut current = labels.clone();
    for step in &policy.steps {
        current = step.apply(&current)?;
    }
    Ok(current)
}
