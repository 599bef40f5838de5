use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use super::image::RasterImage;
use crate::error::{Error, Result};

fn decode_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Reads any 8-bit-or-less PNG as RGB; alpha is dropped, gray replicated.
pub fn load_png(path: &Path) -> Result<RasterImage> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = decoder.read_info().map_err(|e| decode_error(path, e))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| decode_error(path, "image too large"))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| decode_error(path, e))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let stride = info.line_size;
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => return Err(decode_error(path, "palette was not expanded")),
    };
    let mut rgb = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        let row = &buf[y * stride..y * stride + w * channels];
        for px in row.chunks_exact(channels) {
            match channels {
                1 | 2 => rgb.extend_from_slice(&[px[0]; 3]),
                _ => rgb.extend_from_slice(&px[..3]),
            }
        }
    }
    RasterImage::new(w, h, rgb)
}

fn write_png(path: &Path, width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let encode_error = |e: png::EncodingError| match e {
        png::EncodingError::IoError(io) => Error::io(path, io),
        other => decode_error(path, other),
    };
    let (w, h) = (
        u32::try_from(width).map_err(|_| Error::argument("image too wide for PNG"))?,
        u32::try_from(height).map_err(|_| Error::argument("image too tall for PNG"))?,
    );
    let mut encoder = png::Encoder::new(BufWriter::new(file), w, h);
    encoder.set_color(color);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header().map_err(encode_error)?;
    writer.write_image_data(data).map_err(encode_error)?;
    writer.finish().map_err(encode_error)
}

/// Writes an 8-bit RGB PNG.
pub fn save_png(image: &RasterImage, path: &Path) -> Result<()> {
    write_png(path, image.width(), image.height(), png::ColorType::Rgb, image.as_bytes())
}

/// Writes an 8-bit grayscale PNG from row-major intensities.
pub fn save_gray_png(width: usize, height: usize, values: &[u8], path: &Path) -> Result<()> {
    if values.len() != width * height {
        return Err(Error::shape(format!("{} values for a {width}×{height} image", values.len())));
    }
    write_png(path, width, height, png::ColorType::Grayscale, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        let img = RasterImage::new(5, 3, (0..45).map(|v| (v * 37 % 256) as u8).collect()).unwrap();
        save_png(&img, &path).unwrap();
        assert_eq!(load_png(&path).unwrap(), img);

        let one = RasterImage::filled(1, 1, [1, 2, 3]);
        save_png(&one, &path).unwrap();
        assert_eq!(load_png(&path).unwrap(), one);
    }

    #[test]
    fn gray_loads_as_rgb() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.png");
        save_gray_png(2, 1, &[0, 200], &path).unwrap();
        let img = load_png(&path).unwrap();
        assert_eq!(img.as_bytes(), &[0, 0, 0, 200, 200, 200]);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.png");
        let img = RasterImage::new(16, 16, (0..768).map(|v| (v % 251) as u8).collect()).unwrap();
        save_png(&img, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(load_png(&path), Err(Error::Decode { .. })));
        std::fs::write(&path, b"not a png").unwrap();
        assert!(matches!(load_png(&path), Err(Error::Decode { .. })));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_png(Path::new("/nonexistent/x.png")), Err(Error::Io { .. })));
    }
}
