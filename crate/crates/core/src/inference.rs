//! Whole-raster prediction by overlapping tiles.

use std::path::Path;

use crate::data::{save_gray_png, LabelMap, RasterImage};
use crate::error::{Error, Result};
use crate::layers::softmax_channels;
use crate::tensor::Tensor;
use crate::unet::UNetModel;

/// Tiles fed through the network per forward pass.
const TILE_BATCH: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Tile {
    pub x: usize,
    pub y: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TilingPlan {
    pub width: usize,
    pub height: usize,
    pub tile_size: usize,
    pub overlap: usize,
    pub tiles: Vec<Tile>,
}

/// Overlap used when none is given: a quarter of the tile.
pub fn default_overlap(tile_size: usize) -> usize {
    tile_size / 4
}

fn offsets(extent: usize, tile: usize, stride: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..).map(|i| i * stride).take_while(|&o| o + tile < extent).collect();
    out.push(extent - tile);
    out
}

/// Tiles on a `tile_size − overlap` grid with the last row and column
/// shifted back to end flush with the raster.
pub fn plan_tiles(width: usize, height: usize, tile_size: usize, overlap: usize) -> Result<TilingPlan> {
    if tile_size == 0 || overlap >= tile_size {
        return Err(Error::argument(format!(
            "overlap {overlap} must be smaller than the tile size {tile_size}"
        )));
    }
    if width < tile_size || height < tile_size {
        return Err(Error::argument(format!(
            "{width}×{height} raster is smaller than a {tile_size}-pixel tile"
        )));
    }
    let stride = tile_size - overlap;
    let xs = offsets(width, tile_size, stride);
    let ys = offsets(height, tile_size, stride);
    let tiles = ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| Tile { x, y }))
        .collect();
    Ok(TilingPlan {
        width,
        height,
        tile_size,
        overlap,
        tiles,
    })
}

/// Class probabilities for every pixel, stored class-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityMap {
    width: usize,
    height: usize,
    classes: usize,
    data: Vec<f32>,
}

impl ProbabilityMap {
    pub fn new(width: usize, height: usize, classes: usize, data: Vec<f32>) -> Result<Self> {
        if classes == 0 || data.len() != width * height * classes {
            return Err(Error::shape(format!(
                "{width}×{height}×{classes} probability map cannot hold {} values",
                data.len()
            )));
        }
        Ok(ProbabilityMap {
            width,
            height,
            classes,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, class: usize, x: usize, y: usize) -> f32 {
        self.data[(class * self.height + y) * self.width + x]
    }

    /// Probabilities of one class as a row-major plane.
    pub fn plane(&self, class: usize) -> &[f32] {
        let n = self.width * self.height;
        &self.data[class * n..(class + 1) * n]
    }

    pub fn pixel(&self, x: usize, y: usize) -> Vec<f32> {
        (0..self.classes).map(|c| self.get(c, x, y)).collect()
    }

    /// Writes `prob_<class>.png` grayscale images (0 → black, 1 → white).
    pub fn save_planes(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for c in 0..self.classes {
            let gray: Vec<u8> = self.plane(c).iter().map(|&p| (p * 255.0).round().clamp(0.0, 255.0) as u8).collect();
            save_gray_png(self.width, self.height, &gray, &dir.join(format!("prob_{c:02}.png")))?;
        }
        Ok(())
    }
}

/// Runs every tile through `model` in inference mode, averages the softmax
/// outputs where tiles overlap and renormalizes each pixel.
pub fn predict_map(model: &UNetModel, image: &RasterImage, plan: &TilingPlan) -> Result<ProbabilityMap> {
    let config = model.config();
    if config.input_channels != 3 {
        return Err(Error::Config(format!(
            "model expects {} input channels but rasters are RGB",
            config.input_channels
        )));
    }
    if (image.width(), image.height()) != (plan.width, plan.height) {
        return Err(Error::argument(format!(
            "plan is for {}×{} but the raster is {}×{}",
            plan.width,
            plan.height,
            image.width(),
            image.height()
        )));
    }
    let (w, h, t, k) = (plan.width, plan.height, plan.tile_size, config.num_classes);
    let mut sum = vec![0.0f64; k * w * h];
    let mut hits = vec![0u32; w * h];
    for group in plan.tiles.chunks(TILE_BATCH) {
        let crops: Vec<Tensor> = group
            .iter()
            .map(|tile| Ok(image.crop(tile.x, tile.y, t, t)?.to_tensor()))
            .collect::<Result<_>>()?;
        let batch = Tensor::concat_batch(&crops.iter().collect::<Vec<_>>())?;
        let probs = softmax_channels(&model.infer(&batch)?)?;
        for (n, tile) in group.iter().enumerate() {
            let item = probs.item(n);
            for c in 0..k {
                for ty in 0..t {
                    let src = &item[(c * t + ty) * t..(c * t + ty + 1) * t];
                    let row = (c * h + tile.y + ty) * w + tile.x;
                    for (acc, &p) in sum[row..row + t].iter_mut().zip(src) {
                        *acc += p as f64;
                    }
                }
            }
            for ty in 0..t {
                let row = (tile.y + ty) * w + tile.x;
                hits[row..row + t].iter_mut().for_each(|n| *n += 1);
            }
        }
    }
    let plane = w * h;
    let mut data = vec![0.0f32; k * plane];
    for p in 0..plane {
        let total: f64 = (0..k).map(|c| sum[c * plane + p]).sum();
        for c in 0..k {
            data[c * plane + p] = if total > 0.0 {
                (sum[c * plane + p] / total) as f32
            } else {
                1.0 / k as f32
            };
        }
    }
    ProbabilityMap::new(w, h, k, data)
}

/// Most probable class per pixel, the lowest index winning ties.
pub fn argmax_labels(probs: &ProbabilityMap) -> Result<LabelMap> {
    let plane = probs.width * probs.height;
    let labels = (0..plane)
        .map(|p| {
            let mut best = 0;
            for c in 1..probs.classes {
                if probs.data[c * plane + p] > probs.data[best * plane + p] {
                    best = c;
                }
            }
            best as u8
        })
        .collect();
    LabelMap::new(probs.width, probs.height, labels)
}

/// [`predict_map`] for rasters of any size: smaller rasters are padded by
/// edge replication up to one tile and the result cropped back.
pub fn predict_raster(model: &UNetModel, image: &RasterImage, tile_size: usize, overlap: usize) -> Result<ProbabilityMap> {
    let (w, h) = (image.width(), image.height());
    if w >= tile_size && h >= tile_size {
        return predict_map(model, image, &plan_tiles(w, h, tile_size, overlap)?);
    }
    if w == 0 || h == 0 {
        return Err(Error::argument("cannot predict an empty raster"));
    }
    let (pw, ph) = (w.max(tile_size), h.max(tile_size));
    let mut padded = RasterImage::filled(pw, ph, [0; 3]);
    for y in 0..ph {
        for x in 0..pw {
            padded.set(x, y, image.get(x.min(w - 1), y.min(h - 1)));
        }
    }
    let full = predict_map(model, &padded, &plan_tiles(pw, ph, tile_size, overlap)?)?;
    let k = full.classes;
    let mut data = Vec::with_capacity(k * w * h);
    for c in 0..k {
        for y in 0..h {
            data.extend((0..w).map(|x| full.get(c, x, y)));
        }
    }
    ProbabilityMap::new(w, h, k, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::unet::UNetConfig;
    use proptest::prelude::*;

    fn coverage(plan: &TilingPlan) -> Vec<u32> {
        let mut c = vec![0u32; plan.width * plan.height];
        for t in &plan.tiles {
            for y in t.y..t.y + plan.tile_size {
                for x in t.x..t.x + plan.tile_size {
                    c[y * plan.width + x] += 1;
                }
            }
        }
        c
    }

    #[test]
    fn grid_counts() {
        assert_eq!(plan_tiles(128, 128, 128, 32).unwrap().tiles.len(), 1);
        assert_eq!(plan_tiles(256, 256, 128, 0).unwrap().tiles.len(), 4);
        let p = plan_tiles(300, 300, 128, 32).unwrap();
        assert_eq!(p.tiles.len(), 9);
        assert!(coverage(&p).iter().all(|&n| n >= 1));
        assert_eq!(p.tiles.last(), Some(&Tile { x: 172, y: 172 }));
    }

    #[test]
    fn plan_errors() {
        assert!(matches!(plan_tiles(100, 300, 128, 0), Err(Error::Argument(_))));
        assert!(matches!(plan_tiles(300, 300, 128, 128), Err(Error::Argument(_))));
    }

    #[test]
    fn argmax_rules() {
        let p = ProbabilityMap::new(2, 1, 3, vec![0.1, 0.5, 0.7, 0.5, 0.2, 0.0]).unwrap();
        assert_eq!(argmax_labels(&p).unwrap().labels(), &[1, 0]);
        let scaled = ProbabilityMap::new(2, 1, 3, p.data.iter().map(|v| v * 3.5).collect()).unwrap();
        assert_eq!(argmax_labels(&scaled).unwrap(), argmax_labels(&p).unwrap());
    }

    fn small_model() -> UNetModel {
        let config = UNetConfig {
            num_classes: 4,
            depth: 2,
            base_filters: 4,
            patch_size: 16,
            ..UNetConfig::default()
        };
        UNetModel::build(config, &mut Rng::new(5)).unwrap()
    }

    fn noise_image(w: usize, h: usize, seed: u64) -> RasterImage {
        let mut rng = Rng::new(seed);
        RasterImage::new(w, h, (0..w * h * 3).map(|_| rng.below(256) as u8).collect()).unwrap()
    }

    #[test]
    fn single_tile_equals_direct_forward() {
        let model = small_model();
        let image = noise_image(16, 16, 1);
        let probs = predict_map(&model, &image, &plan_tiles(16, 16, 16, 4).unwrap()).unwrap();
        let direct = softmax_channels(&model.infer(&image.to_tensor()).unwrap()).unwrap();
        for c in 0..4 {
            for (a, b) in probs.plane(c).iter().zip(&direct.item(0)[c * 256..(c + 1) * 256]) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn blended_map_is_normalized_and_convex() {
        let model = small_model();
        let image = noise_image(37, 29, 2);
        let plan = plan_tiles(37, 29, 16, 6).unwrap();
        let probs = predict_map(&model, &image, &plan).unwrap();
        let mut lo = vec![f32::INFINITY; 4 * 37 * 29];
        let mut hi = vec![f32::NEG_INFINITY; 4 * 37 * 29];
        for tile in &plan.tiles {
            let p = softmax_channels(&model.infer(&image.crop(tile.x, tile.y, 16, 16).unwrap().to_tensor()).unwrap())
                .unwrap();
            for c in 0..4 {
                for y in 0..16 {
                    for x in 0..16 {
                        let i = (c * 29 + tile.y + y) * 37 + tile.x + x;
                        let v = p.at(0, c, y, x);
                        lo[i] = lo[i].min(v);
                        hi[i] = hi[i].max(v);
                    }
                }
            }
        }
        for y in 0..29 {
            for x in 0..37 {
                let px = probs.pixel(x, y);
                assert!((px.iter().map(|&v| v as f64).sum::<f64>() - 1.0).abs() < 1e-5);
                for (c, &v) in px.iter().enumerate() {
                    let i = (c * 29 + y) * 37 + x;
                    assert!(v >= lo[i] - 1e-6 && v <= hi[i] + 1e-6);
                }
            }
        }
        assert_eq!(probs, predict_map(&model, &image, &plan).unwrap());
    }

    #[test]
    fn small_rasters_are_padded() {
        let model = small_model();
        let image = noise_image(10, 20, 3);
        let probs = predict_raster(&model, &image, 16, 4).unwrap();
        assert_eq!((probs.width(), probs.height(), probs.classes()), (10, 20, 4));
    }

    proptest! {
        #[test]
        fn plans_cover_every_pixel(tile in 1usize..40, w_extra in 0usize..90, h_extra in 0usize..90, frac in 0.0f64..0.95) {
            let overlap = ((tile as f64) * frac) as usize;
            let plan = plan_tiles(tile + w_extra, tile + h_extra, tile, overlap).unwrap();
            let cov = coverage(&plan);
            prop_assert!(cov.iter().all(|&n| n >= 1));
            for t in &plan.tiles {
                prop_assert!(t.x + tile <= plan.width && t.y + tile <= plan.height);
            }
        }
    }
}
