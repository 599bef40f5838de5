use crate::error::{Error, Result};
use crate::tensor::{Shape4, Tensor};

/// 8-bit RGB raster, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    rgb: Vec<u8>,
}

impl RasterImage {
    /// `rgb` holds `width · height` interleaved triples.
    pub fn new(width: usize, height: usize, rgb: Vec<u8>) -> Result<Self> {
        let expected = width
            .checked_mul(height)
            .and_then(|p| p.checked_mul(3))
            .ok_or_else(|| Error::shape("raster size overflows"))?;
        if rgb.len() != expected {
            return Err(Error::shape(format!(
                "{} bytes for a {width}×{height} RGB raster",
                rgb.len()
            )));
        }
        Ok(RasterImage { width, height, rgb })
    }

    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Self {
        let rgb = color.iter().copied().cycle().take(width * height * 3).collect();
        RasterImage { width, height, rgb }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.rgb
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, color: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.rgb[i..i + 3].copy_from_slice(&color);
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.rgb.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Self> {
        if x0 + width > self.width || y0 + height > self.height {
            return Err(Error::argument(format!(
                "crop {width}×{height} at ({x0}, {y0}) exceeds {}×{}",
                self.width, self.height
            )));
        }
        let mut rgb = Vec::with_capacity(width * height * 3);
        for y in y0..y0 + height {
            let start = (y * self.width + x0) * 3;
            rgb.extend_from_slice(&self.rgb[start..start + width * 3]);
        }
        Ok(RasterImage { width, height, rgb })
    }

    /// `(1, 3, height, width)` tensor with every byte mapped to `value / 255`.
    pub fn to_tensor(&self) -> Tensor {
        let plane = self.width * self.height;
        let mut data = vec![0.0f32; 3 * plane];
        for (p, px) in self.rgb.chunks_exact(3).enumerate() {
            for c in 0..3 {
                data[c * plane + p] = px[c] as f32 / 255.0;
            }
        }
        Tensor::from_vec(Shape4::new(1, 3, self.height, self.width), data).expect("length matches")
    }
}

/// Grid of class indices, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if width.checked_mul(height) != Some(labels.len()) {
            return Err(Error::shape(format!(
                "{} labels for a {width}×{height} map",
                labels.len()
            )));
        }
        Ok(LabelMap { width, height, labels })
    }

    pub fn filled(width: usize, height: usize, label: u8) -> Self {
        LabelMap {
            width,
            height,
            labels: vec![label; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [u8] {
        &mut self.labels
    }

    pub fn into_labels(self) -> Vec<u8> {
        self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, label: u8) {
        self.labels[y * self.width + x] = label;
    }

    pub fn same_size(&self, other: &LabelMap) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Fails with a data error naming the first label `≥ num_classes`.
    pub fn check_classes(&self, num_classes: usize) -> Result<()> {
        match self.labels.iter().position(|&l| l as usize >= num_classes) {
            None => Ok(()),
            Some(i) => Err(Error::data(format!(
                "label {} at pixel ({}, {}) outside [0, {num_classes})",
                self.labels[i],
                i % self.width,
                i / self.width
            ))),
        }
    }

    /// Pixel count per class, for classes `0..num_classes`.
    pub fn histogram(&self, num_classes: usize) -> Vec<u64> {
        let mut h = vec![0u64; num_classes.max(256)];
        for &l in &self.labels {
            h[l as usize] += 1;
        }
        h.truncate(num_classes);
        h
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Self> {
        if x0 + width > self.width || y0 + height > self.height {
            return Err(Error::argument(format!(
                "crop {width}×{height} at ({x0}, {y0}) exceeds {}×{}",
                self.width, self.height
            )));
        }
        let mut labels = Vec::with_capacity(width * height);
        for y in y0..y0 + height {
            let start = y * self.width + x0;
            labels.extend_from_slice(&self.labels[start..start + width]);
        }
        Ok(LabelMap { width, height, labels })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_normalization() {
        let mut img = RasterImage::filled(2, 1, [0, 0, 0]);
        img.set(0, 0, [255, 51, 0]);
        let t = img.to_tensor();
        assert_eq!(t.shape(), Shape4::new(1, 3, 1, 2));
        assert_eq!(t.at(0, 0, 0, 0), 1.0);
        assert_eq!(t.at(0, 1, 0, 0), 0.2);
        assert_eq!(t.at(0, 2, 0, 1), 0.0);
    }

    #[test]
    fn crop_and_bounds() {
        let img = RasterImage::new(3, 2, (0..18).collect()).unwrap();
        let c = img.crop(1, 1, 2, 1).unwrap();
        assert_eq!(c.as_bytes(), &[12, 13, 14, 15, 16, 17]);
        assert!(img.crop(2, 0, 2, 1).is_err());
        let l = LabelMap::new(3, 2, vec![0, 1, 2, 3, 4, 5]).unwrap();
        assert_eq!(l.crop(0, 1, 2, 1).unwrap().labels(), &[3, 4]);
    }

    #[test]
    fn size_checks() {
        assert!(RasterImage::new(2, 2, vec![0; 11]).is_err());
        assert!(LabelMap::new(2, 2, vec![0; 3]).is_err());
    }

    #[test]
    fn class_check_names_pixel() {
        let l = LabelMap::new(2, 2, vec![0, 1, 1, 7]).unwrap();
        assert!(l.check_classes(8).is_ok());
        let err = l.check_classes(3).unwrap_err().to_string();
        assert!(err.contains("(1, 1)"), "{err}");
        assert_eq!(l.histogram(8), vec![1, 2, 0, 0, 0, 0, 0, 1]);
    }
}
