use super::augment::{augment, AugmentSpec};
use super::image::{LabelMap, RasterImage};
use super::manifest::{DatasetManifest, Partition};
use super::palette::{decode_labels, Palette};
use super::pngio::load_png;
use crate::error::{Error, Result};
use crate::par;
use crate::rng::Rng;
use crate::tensor::Tensor;

/// An image tile as a `(1, 3, p, p)` tensor in `[0, 1]` with its labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    pub image: Tensor,
    pub labels: LabelMap,
}

impl Patch {
    /// Stacks patches of equal size into one batch tensor and the matching
    /// flat label vector in `(n, y, x)` order.
    pub fn stack(patches: &[&Patch]) -> Result<(Tensor, Vec<u8>)> {
        let first = patches.first().ok_or_else(|| Error::argument("empty batch"))?;
        let s = first.image.shape();
        let mut data = Vec::with_capacity(s.len() * patches.len());
        let mut labels = Vec::with_capacity(s.plane() * patches.len());
        for p in patches {
            if p.image.shape() != s {
                return Err(Error::shape("patches in one batch differ in size"));
            }
            data.extend_from_slice(p.image.data());
            labels.extend_from_slice(p.labels.labels());
        }
        Ok((Tensor::from_vec(s.with_n(patches.len()), data)?, labels))
    }
}

/// A decoded raster with its ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledImage {
    pub image: RasterImage,
    pub labels: LabelMap,
}

/// Loads and palette-decodes every entry of one partition, in manifest order.
pub fn load_partition(
    manifest: &DatasetManifest,
    partition: Partition,
    palette: &Palette,
    tolerance: u8,
) -> Result<Vec<LabeledImage>> {
    let entries: Vec<_> = manifest.partition(partition).collect();
    par::map_indices(entries.len(), |i| {
        let e = entries[i];
        let image = load_png(&e.image)?;
        let labels = decode_labels(&load_png(&e.label)?, palette, tolerance)
            .map_err(|err| Error::data(format!("{}: {err}", e.label.display())))?;
        if (image.width(), image.height()) != (labels.width(), labels.height()) {
            return Err(Error::data(format!(
                "{} is {}×{} but its labels are {}×{}",
                e.image.display(),
                image.width(),
                image.height(),
                labels.width(),
                labels.height()
            )));
        }
        Ok(LabeledImage { image, labels })
    })
    .into_iter()
    .collect()
}

/// `count` patches at uniformly random top-left corners.
pub fn sample_patches(
    image: &RasterImage,
    labels: &LabelMap,
    patch_size: usize,
    count: usize,
    rng: &mut Rng,
) -> Result<Vec<Patch>> {
    let (w, h) = (image.width(), image.height());
    if (w, h) != (labels.width(), labels.height()) {
        return Err(Error::shape(format!(
            "image {w}×{h} and labels {}×{} differ",
            labels.width(),
            labels.height()
        )));
    }
    if patch_size == 0 || w < patch_size || h < patch_size {
        return Err(Error::argument(format!("cannot cut {patch_size}-pixel patches from a {w}×{h} image")));
    }
    (0..count)
        .map(|_| {
            let x0 = rng.below_usize(w - patch_size + 1);
            let y0 = rng.below_usize(h - patch_size + 1);
            Ok(Patch {
                image: image.crop(x0, y0, patch_size, patch_size)?.to_tensor(),
                labels: labels.crop(x0, y0, patch_size, patch_size)?,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochConfig {
    pub patch_size: usize,
    pub patches_per_image: usize,
    /// Augmented extras as a fraction of the base patch count.
    pub augment_fraction: f64,
    pub augment: AugmentSpec,
}

impl Default for EpochConfig {
    fn default() -> Self {
        EpochConfig {
            patch_size: 128,
            patches_per_image: 1,
            augment_fraction: 0.10,
            augment: AugmentSpec::default(),
        }
    }
}

/// `⌈fraction · base⌉`, ignoring floating-point excess below 1e-9 so that
/// e.g. `0.7 · 10` yields 7.
pub fn extra_count(base: usize, fraction: f64) -> usize {
    let exact = fraction * base as f64;
    (exact - 1e-9).ceil().max(0.0) as usize
}

/// One epoch of training patches: `patches_per_image` random patches from
/// every image, plus [`extra_count`] augmented copies of randomly chosen
/// base patches, all shuffled.
pub fn build_epoch(train: &[LabeledImage], config: &EpochConfig, rng: &mut Rng) -> Result<Vec<Patch>> {
    if train.is_empty() {
        return Err(Error::data("the training partition is empty"));
    }
    if !(0.0..=1.0).contains(&config.augment_fraction) {
        return Err(Error::argument(format!(
            "augment fraction {} outside [0, 1]",
            config.augment_fraction
        )));
    }
    config.augment.validate()?;
    let mut patches = Vec::with_capacity(train.len() * config.patches_per_image);
    for item in train {
        patches.extend(sample_patches(
            &item.image,
            &item.labels,
            config.patch_size,
            config.patches_per_image,
            rng,
        )?);
    }
    let base = patches.len();
    for _ in 0..extra_count(base, config.augment_fraction) {
        let source = rng.below_usize(base);
        let extra = augment(&patches[source], &config.augment, rng)?;
        patches.push(extra);
    }
    rng.shuffle(&mut patches);
    Ok(patches)
}
