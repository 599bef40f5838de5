//! Rasters, label maps, palettes, dataset manifests, patch sampling and
//! augmentation.

mod augment;
mod epoch;
mod image;
mod manifest;
mod palette;
mod pngio;

pub use augment::{augment, AugmentSpec, Transform};
pub use epoch::{build_epoch, extra_count, load_partition, sample_patches, EpochConfig, LabeledImage, Patch};
pub use image::{LabelMap, RasterImage};
pub use manifest::{DatasetManifest, ManifestEntry, Partition};
pub use palette::{decode_labels, Palette, PaletteEntry, DEFAULT_TOLERANCE};
pub use pngio::{load_png, save_gray_png, save_png};
