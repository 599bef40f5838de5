//! Synthetic planning maps with exact ground truth.
//!
//! A map is a Voronoi partition of random integer seed points, each region
//! assigned a random land-use class and painted in its palette color. Scan
//! artefacts are then drawn over the painting without touching the labels:
//! dark one-pixel ink on region boundaries, short dark polylines standing
//! in for text and symbols, and additive Gaussian noise.
//!
//! Random draws happen in a fixed order from one [`Rng`] seeded with the
//! sample seed: seed positions and classes (x, y, class per region), then
//! clutter strokes, then noise per pixel and channel in raster order.

use std::path::Path;

use crate::data::{save_png, DatasetManifest, LabelMap, ManifestEntry, Palette, Partition, RasterImage};
use crate::error::{Error, Result};
use crate::par;
use crate::rng::{derive_seed, Rng};

const INK: [u8; 3] = [35, 35, 35];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub num_regions: usize,
    pub num_classes: usize,
    /// Standard deviation of the additive noise, in 8-bit units.
    pub noise_stddev: f64,
    pub boundary_ink: bool,
    pub clutter_strokes: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            width: 128,
            height: 128,
            num_regions: 6,
            num_classes: 11,
            noise_stddev: 8.0,
            boundary_ink: true,
            clutter_strokes: 6,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self, palette: &Palette) -> Result<()> {
        if self.width < 16 || self.height < 16 {
            return Err(Error::argument(format!(
                "synthetic maps need at least 16×16 pixels, got {}×{}",
                self.width, self.height
            )));
        }
        if self.num_regions == 0 {
            return Err(Error::argument("num_regions must be at least 1"));
        }
        if self.num_classes == 0 || self.num_classes > palette.len() {
            return Err(Error::argument(format!(
                "num_classes {} must be in 1..={} (palette size)",
                self.num_classes,
                palette.len()
            )));
        }
        if !(self.noise_stddev >= 0.0 && self.noise_stddev.is_finite()) {
            return Err(Error::argument(format!("noise_stddev {} must be finite and ≥ 0", self.noise_stddev)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedPoint {
    pub x: usize,
    pub y: usize,
    pub class: u8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSample {
    pub image: RasterImage,
    pub labels: LabelMap,
    pub seed: u64,
    pub seeds: Vec<SeedPoint>,
}

/// Index of the seed nearest to every pixel (squared Euclidean distance,
/// ties to the lowest index), row-major.
pub fn voronoi_regions(seeds: &[SeedPoint], width: usize, height: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let mut best = (u64::MAX, 0u32);
            for (i, s) in seeds.iter().enumerate() {
                let dx = x.abs_diff(s.x) as u64;
                let dy = y.abs_diff(s.y) as u64;
                let d = dx * dx + dy * dy;
                if d < best.0 {
                    best = (d, i as u32);
                }
            }
            out.push(best.1);
        }
    }
    out
}

/// Integer points of a Bresenham segment, endpoints included.
fn segment(x0: i64, y0: i64, x1: i64, y1: i64, mut plot: impl FnMut(i64, i64)) {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        plot(x, y);
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

pub fn generate(spec: &SynthSpec, palette: &Palette) -> Result<SynthSample> {
    spec.validate(palette)?;
    let (w, h) = (spec.width, spec.height);
    let mut rng = Rng::new(spec.seed);
    let seeds: Vec<SeedPoint> = (0..spec.num_regions)
        .map(|_| {
            let x = rng.below_usize(w);
            let y = rng.below_usize(h);
            let class = rng.below_usize(spec.num_classes) as u8;
            SeedPoint { x, y, class }
        })
        .collect();
    let regions = voronoi_regions(&seeds, w, h);
    let labels = LabelMap::new(w, h, regions.iter().map(|&r| seeds[r as usize].class).collect())?;
    let mut image = palette.render(&labels)?;

    if spec.boundary_ink {
        for y in 0..h {
            for x in 0..w {
                let r = regions[y * w + x];
                let right = x + 1 < w && regions[y * w + x + 1] != r;
                let below = y + 1 < h && regions[(y + 1) * w + x] != r;
                if right || below {
                    image.set(x, y, INK);
                }
            }
        }
    }

    for _ in 0..spec.clutter_strokes {
        let tone = 20 + rng.below(50) as u8;
        let mut x = rng.below_usize(w) as i64;
        let mut y = rng.below_usize(h) as i64;
        let segments = 2 + rng.below(3);
        for _ in 0..segments {
            let angle = rng.uniform(0.0, std::f64::consts::TAU);
            let length = rng.uniform(4.0, 12.0);
            let nx = x + (length * angle.cos()).round() as i64;
            let ny = y + (length * angle.sin()).round() as i64;
            segment(x, y, nx, ny, |px, py| {
                if px >= 0 && py >= 0 && (px as usize) < w && (py as usize) < h {
                    image.set(px as usize, py as usize, [tone; 3]);
                }
            });
            x = nx;
            y = ny;
        }
    }

    if spec.noise_stddev > 0.0 {
        let mut noisy = image.as_bytes().to_vec();
        for v in noisy.iter_mut() {
            let n = *v as f64 + spec.noise_stddev * rng.normal();
            *v = n.round().clamp(0.0, 255.0) as u8;
        }
        image = RasterImage::new(w, h, noisy)?;
    }

    Ok(SynthSample {
        image,
        labels,
        seed: spec.seed,
        seeds,
    })
}

/// Fractions of a corpus assigned to each partition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Split {
    pub train: f64,
    pub cv: f64,
    pub test: f64,
}

impl Default for Split {
    fn default() -> Self {
        Split {
            train: 0.70,
            cv: 0.15,
            test: 0.15,
        }
    }
}

impl Split {
    /// Sample counts per partition for a corpus of `count`: train and cv
    /// are rounded to nearest, test takes the rest, and every partition
    /// keeps at least one sample.
    pub fn counts(&self, count: usize) -> Result<[usize; 3]> {
        let parts = [self.train, self.cv, self.test];
        if parts.iter().any(|&f| !(f > 0.0)) || ((parts.iter().sum::<f64>()) - 1.0).abs() > 1e-6 {
            return Err(Error::argument(format!("split {parts:?} must be positive and sum to 1")));
        }
        if count < 3 {
            return Err(Error::argument(format!("a three-way split needs at least 3 samples, got {count}")));
        }
        let mut train = ((count as f64 * self.train).round() as usize).clamp(1, count - 2);
        let cv = ((count as f64 * self.cv).round() as usize).clamp(1, count - 1 - train);
        if train + cv >= count {
            train = count - cv - 1;
        }
        Ok([train, cv, count - train - cv])
    }
}

/// Writes `count` samples as `img_NNNN.png` / `lbl_NNNN.png` plus
/// `manifest.txt` and `palette.txt` under `out_dir`. Sample `i` uses seed
/// `derive_seed(seed, i)`; the first samples go to train, then cv, then
/// test.
pub fn generate_corpus(
    template: &SynthSpec,
    count: usize,
    split: Split,
    seed: u64,
    palette: &Palette,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    template.validate(palette)?;
    let [train, cv, _] = split.counts(count)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let digits = count.saturating_sub(1).to_string().len().max(4);
    let written: Vec<Result<ManifestEntry>> = par::map_indices(count, |i| {
        let spec = SynthSpec {
            seed: derive_seed(seed, i as u64),
            ..*template
        };
        let sample = generate(&spec, palette)?;
        let image = out_dir.join(format!("img_{i:0digits$}.png"));
        let label = out_dir.join(format!("lbl_{i:0digits$}.png"));
        save_png(&sample.image, &image)?;
        save_png(&palette.render(&sample.labels)?, &label)?;
        let partition = if i < train {
            Partition::Train
        } else if i < train + cv {
            Partition::CrossValidation
        } else {
            Partition::Test
        };
        Ok(ManifestEntry {
            partition,
            image,
            label,
        })
    });
    let manifest = DatasetManifest {
        entries: written.into_iter().collect::<Result<_>>()?,
    };
    manifest.save(&out_dir.join("manifest.txt"))?;
    palette.save(&out_dir.join("palette.txt"))?;
    Ok(manifest)
}
