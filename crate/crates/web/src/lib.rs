//! WebAssembly bindings for the demo page in `www/`.
//!
//! Three operations are exposed: generating a synthetic map, corrupting
//! and denoising its labels, and planning inference tiles. Images cross
//! the boundary as RGBA byte arrays ready for `ImageData`.

use mapseg::data::{LabelMap, Palette, RasterImage};
use mapseg::inference::plan_tiles;
use mapseg::metrics::ConfusionMatrix;
use mapseg::postprocess::{denoise_labels, DenoisePolicy};
use mapseg::synthmap::{generate, SynthSpec};
use mapseg::Rng;
use wasm_bindgen::prelude::*;

fn js(e: mapseg::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn rgba(image: &RasterImage) -> Vec<u8> {
    image.pixels().flat_map(|[r, g, b]| [r, g, b, 255]).collect()
}

/// A generated map: the degraded scan and its exact labels.
#[wasm_bindgen]
pub struct SyntheticMap {
    palette: Palette,
    image: RasterImage,
    labels: LabelMap,
}

#[wasm_bindgen]
impl SyntheticMap {
    #[wasm_bindgen(constructor)]
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        width: usize,
        height: usize,
        regions: usize,
        classes: usize,
        noise: f64,
        ink: bool,
        clutter: usize,
        seed: u64,
    ) -> Result<SyntheticMap, JsError> {
        Self::build(width, height, regions, classes, noise, ink, clutter, seed).map_err(js)
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    /// The scan-like rendering.
    pub fn image_rgba(&self) -> Vec<u8> {
        rgba(&self.image)
    }

    /// Ground truth in palette colors.
    pub fn labels_rgba(&self) -> Vec<u8> {
        self.render(&self.labels)
    }

    /// Class names joined by newlines, in index order.
    pub fn class_names(&self) -> String {
        self.palette.entries().iter().map(|e| e.name.as_str()).collect::<Vec<_>>().join("\n")
    }

    /// Replaces `percent` of the labels with a different random class, then
    /// cleans them with `policy` (e.g. `mode:3,open:3,close:3`).
    pub fn corrupt_and_denoise(&self, percent: f64, policy: &str, seed: u64) -> Result<DenoiseOutcome, JsError> {
        let policy: DenoisePolicy = policy.parse().map_err(js)?;
        let outcome = corrupt_and_denoise(&self.labels, self.palette.len(), percent, &policy, seed).map_err(js)?;
        Ok(DenoiseOutcome {
            noisy: self.render(&outcome.noisy),
            cleaned: self.render(&outcome.cleaned),
            corrupted: outcome.corrupted,
            restored: outcome.restored,
            jaccard_before: outcome.jaccard_before,
            jaccard_after: outcome.jaccard_after,
        })
    }
}

impl SyntheticMap {
    #[allow(clippy::too_many_arguments)]
    fn build(
        width: usize,
        height: usize,
        regions: usize,
        classes: usize,
        noise: f64,
        ink: bool,
        clutter: usize,
        seed: u64,
    ) -> mapseg::Result<Self> {
        let palette = Palette::default_classes(classes)?;
        let spec = SynthSpec {
            width,
            height,
            num_regions: regions,
            num_classes: classes,
            noise_stddev: noise,
            boundary_ink: ink,
            clutter_strokes: clutter,
            seed,
        };
        let sample = generate(&spec, &palette)?;
        Ok(SyntheticMap {
            palette,
            image: sample.image,
            labels: sample.labels,
        })
    }

    fn render(&self, labels: &LabelMap) -> Vec<u8> {
        self.palette.render(labels).map(|i| rgba(&i)).unwrap_or_default()
    }
}

#[wasm_bindgen]
pub struct DenoiseOutcome {
    noisy: Vec<u8>,
    cleaned: Vec<u8>,
    corrupted: usize,
    restored: usize,
    jaccard_before: f64,
    jaccard_after: f64,
}

#[wasm_bindgen]
impl DenoiseOutcome {
    pub fn noisy_rgba(&self) -> Vec<u8> {
        self.noisy.clone()
    }

    pub fn cleaned_rgba(&self) -> Vec<u8> {
        self.cleaned.clone()
    }

    pub fn corrupted(&self) -> usize {
        self.corrupted
    }

    pub fn restored(&self) -> usize {
        self.restored
    }

    pub fn jaccard_before(&self) -> f64 {
        self.jaccard_before
    }

    pub fn jaccard_after(&self) -> f64 {
        self.jaccard_after
    }
}

pub struct Denoised {
    pub noisy: LabelMap,
    pub cleaned: LabelMap,
    pub corrupted: usize,
    pub restored: usize,
    pub jaccard_before: f64,
    pub jaccard_after: f64,
}

pub fn corrupt_and_denoise(
    clean: &LabelMap,
    classes: usize,
    percent: f64,
    policy: &DenoisePolicy,
    seed: u64,
) -> mapseg::Result<Denoised> {
    if !(0.0..=100.0).contains(&percent) || classes < 2 {
        return Err(mapseg::Error::Argument(format!(
            "corruption {percent}% over {classes} classes is not possible"
        )));
    }
    let n = clean.labels().len();
    let mut rng = Rng::new(seed);
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let hit = &order[..((n as f64 * percent / 100.0).round() as usize).min(n)];
    let mut noisy = clean.clone();
    for &i in hit {
        let original = clean.labels()[i];
        let mut l = rng.below(classes as u64 - 1) as u8;
        if l >= original {
            l += 1;
        }
        noisy.labels_mut()[i] = l;
    }
    let cleaned = denoise_labels(&noisy, policy)?;
    let restored = hit.iter().filter(|&&i| cleaned.labels()[i] == clean.labels()[i]).count();
    let jaccard_before = ConfusionMatrix::from_maps(&noisy, clean, classes)?.mean_jaccard()?;
    let jaccard_after = ConfusionMatrix::from_maps(&cleaned, clean, classes)?.mean_jaccard()?;
    Ok(Denoised {
        noisy,
        cleaned,
        corrupted: hit.len(),
        restored,
        jaccard_before,
        jaccard_after,
    })
}

/// Tile rectangles as flat `[x, y, x, y, …]` top-left corners.
#[wasm_bindgen]
pub fn tile_corners(width: usize, height: usize, tile: usize, overlap: usize) -> Result<Vec<u32>, JsError> {
    let plan = plan_tiles(width, height, tile, overlap).map_err(js)?;
    Ok(plan.tiles.iter().flat_map(|t| [t.x as u32, t.y as u32]).collect())
}
