use std::fmt::Write as _;
use std::path::Path;

use super::image::{LabelMap, RasterImage};
use crate::error::{Error, Result};

/// Largest per-channel difference at which a scanned color still matches
/// a palette color.
pub const DEFAULT_TOLERANCE: u8 = 4;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PaletteEntry {
    pub index: u8,
    pub name: String,
    pub color: [u8; 3],
}

/// Bijection between class indices `0..n` and RGB colors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Palette {
    entries: Vec<PaletteEntry>,
}

const DEFAULT_CLASSES: [(&str, [u8; 3]); 11] = [
    ("residential", [230, 25, 75]),
    ("commercial", [60, 180, 75]),
    ("industrial", [255, 225, 25]),
    ("water", [0, 130, 200]),
    ("agriculture", [245, 130, 48]),
    ("public", [145, 30, 180]),
    ("park", [70, 240, 240]),
    ("mixed_use", [240, 50, 230]),
    ("forest", [210, 245, 60]),
    ("education", [250, 190, 212]),
    ("transport", [0, 128, 128]),
];

impl Palette {
    /// Entries may come in any order; indices must be exactly `0..n` and
    /// colors pairwise distinct.
    pub fn new(mut entries: Vec<PaletteEntry>) -> Result<Self> {
        if entries.is_empty() || entries.len() > 256 {
            return Err(Error::data(format!("palette needs 1 to 256 classes, got {}", entries.len())));
        }
        entries.sort_by_key(|e| e.index);
        for (i, e) in entries.iter().enumerate() {
            if e.index as usize != i {
                return Err(Error::data(format!(
                    "palette indices must be contiguous from 0; found {} at position {i}",
                    e.index
                )));
            }
            if e.name.is_empty() || e.name.chars().any(char::is_whitespace) {
                return Err(Error::data(format!("palette class {i} has an invalid name {:?}", e.name)));
            }
            if let Some(other) = entries[..i].iter().find(|o| o.color == e.color) {
                return Err(Error::data(format!(
                    "classes {} and {i} share color {:?}",
                    other.index, e.color
                )));
            }
        }
        Ok(Palette { entries })
    }

    /// The first `num_classes` (≤ 11) of the built-in well-separated colors.
    pub fn default_classes(num_classes: usize) -> Result<Self> {
        if num_classes == 0 || num_classes > DEFAULT_CLASSES.len() {
            return Err(Error::argument(format!(
                "the built-in palette has 1 to {} classes, {num_classes} requested",
                DEFAULT_CLASSES.len()
            )));
        }
        Palette::new(
            DEFAULT_CLASSES[..num_classes]
                .iter()
                .enumerate()
                .map(|(i, (name, color))| PaletteEntry {
                    index: i as u8,
                    name: name.to_string(),
                    color: *color,
                })
                .collect(),
        )
    }

    /// Parses `index name r g b` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (number, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |why: &str| Error::data(format!("palette line {}: {why}: {raw:?}", number + 1));
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(bad("expected `index name r g b`"));
            }
            let byte = |s: &str| s.parse::<u8>().map_err(|_| bad("value is not in 0..=255"));
            entries.push(PaletteEntry {
                index: byte(fields[0])?,
                name: fields[1].to_string(),
                color: [byte(fields[2])?, byte(fields[3])?, byte(fields[4])?],
            });
        }
        Palette::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Palette::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# index name r g b\n");
        for e in &self.entries {
            let [r, g, b] = e.color;
            writeln!(out, "{} {} {r} {g} {b}", e.index, e.name).expect("string write");
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[PaletteEntry] {
        &self.entries
    }

    pub fn color(&self, class: u8) -> Option<[u8; 3]> {
        self.entries.get(class as usize).map(|e| e.color)
    }

    pub fn name(&self, class: u8) -> Option<&str> {
        self.entries.get(class as usize).map(|e| e.name.as_str())
    }

    /// Paints every label with its class color.
    pub fn render(&self, labels: &LabelMap) -> Result<RasterImage> {
        labels.check_classes(self.len())?;
        let mut rgb = Vec::with_capacity(labels.labels().len() * 3);
        for &l in labels.labels() {
            rgb.extend_from_slice(&self.entries[l as usize].color);
        }
        RasterImage::new(labels.width(), labels.height(), rgb)
    }
}

fn chebyshev(a: [u8; 3], b: [u8; 3]) -> u8 {
    (0..3).map(|c| a[c].abs_diff(b[c])).max().unwrap_or(0)
}

/// Maps every pixel to the palette color nearest in Chebyshev distance,
/// provided it lies within `tolerance` and no other color is equally near.
pub fn decode_labels(gt: &RasterImage, palette: &Palette, tolerance: u8) -> Result<LabelMap> {
    let mut labels = Vec::with_capacity(gt.width() * gt.height());
    let mut memo: Option<([u8; 3], u8)> = None;
    for (i, px) in gt.pixels().enumerate() {
        if let Some((color, label)) = memo {
            if color == px {
                labels.push(label);
                continue;
            }
        }
        let mut best: Option<(u8, u8)> = None;
        let mut tied = false;
        for e in palette.entries() {
            let d = chebyshev(px, e.color);
            if d > tolerance {
                continue;
            }
            match best {
                Some((bd, _)) if d > bd => {}
                Some((bd, _)) if d == bd => tied = true,
                _ => {
                    best = Some((d, e.index));
                    tied = false;
                }
            }
        }
        let (x, y) = (i % gt.width(), i / gt.width());
        let label = match (best, tied) {
            (Some((_, label)), false) => label,
            (Some(_), true) => {
                return Err(Error::data(format!(
                    "pixel ({x}, {y}) color {px:?} is equally close to several palette colors"
                )))
            }
            (None, _) => {
                return Err(Error::data(format!(
                    "pixel ({x}, {y}) color {px:?} matches no palette color within {tolerance}"
                )))
            }
        };
        memo = Some((px, label));
        labels.push(label);
    }
    LabelMap::new(gt.width(), gt.height(), labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_palette_is_well_separated() {
        let p = Palette::default_classes(11).unwrap();
        assert_eq!(p.len(), 11);
        for a in p.entries() {
            for b in p.entries() {
                if a.index != b.index {
                    assert!(chebyshev(a.color, b.color) > 40, "{} vs {}", a.name, b.name);
                }
            }
            // far from the dark ink and clutter tones
            assert!(a.color.iter().any(|&v| v >= 120), "{}", a.name);
        }
        assert!(Palette::default_classes(12).is_err());
    }

    #[test]
    fn text_round_trip() {
        let p = Palette::default_classes(5).unwrap();
        assert_eq!(Palette::parse(&p.to_text()).unwrap(), p);
    }

    #[test]
    fn parse_comments_and_order() {
        let p = Palette::parse("# header\n1 road 10 10 10  # trailing\n\n0 park 0 200 0\n").unwrap();
        assert_eq!(p.name(0), Some("park"));
        assert_eq!(p.color(1), Some([10, 10, 10]));
    }

    #[test]
    fn parse_errors() {
        for bad in [
            "0 a 1 2",
            "0 a 1 2 300",
            "1 a 1 2 3",
            "0 a 1 2 3\n0 b 4 5 6",
            "0 a 1 2 3\n1 b 1 2 3",
            "",
        ] {
            assert!(matches!(Palette::parse(bad), Err(Error::Data(_))), "{bad:?}");
        }
    }

    #[test]
    fn render_decode_round_trip() {
        let p = Palette::default_classes(11).unwrap();
        let labels = LabelMap::new(4, 3, (0..12).map(|i| (i % 11) as u8).collect()).unwrap();
        let img = p.render(&labels).unwrap();
        assert_eq!(decode_labels(&img, &p, 0).unwrap(), labels);
    }

    #[test]
    fn scan_noise_within_tolerance() {
        let p = Palette::default_classes(11).unwrap();
        let labels = LabelMap::new(11, 1, (0..11).collect()).unwrap();
        let mut img = p.render(&labels).unwrap();
        for x in 0..11 {
            let c = img.get(x, 0);
            img.set(x, 0, c.map(|v| if v < 255 { v + 1 } else { v - 1 }));
        }
        assert_eq!(decode_labels(&img, &p, DEFAULT_TOLERANCE).unwrap(), labels);
        assert!(decode_labels(&img, &p, 0).is_err());
    }

    #[test]
    fn unknown_and_ambiguous_colors() {
        let p = Palette::default_classes(11).unwrap();
        let white = RasterImage::filled(2, 2, [255, 255, 255]);
        let err = decode_labels(&white, &p, DEFAULT_TOLERANCE).unwrap_err();
        assert!(matches!(err, Error::Data(ref m) if m.contains("(0, 0)")), "{err}");

        let two = Palette::parse("0 a 10 10 10\n1 b 16 10 10").unwrap();
        let mid = RasterImage::filled(1, 1, [13, 10, 10]);
        assert!(matches!(decode_labels(&mid, &two, 4), Err(Error::Data(_))));
        let near = RasterImage::filled(1, 1, [12, 10, 10]);
        assert_eq!(decode_labels(&near, &two, 4).unwrap().labels(), &[0]);
    }
}
