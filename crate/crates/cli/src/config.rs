//! Flat `key = value` run configuration.
//!
//! Blank lines and everything after `#` are ignored. Unknown keys and
//! repeated keys are errors; absent keys keep their defaults. Command-line
//! flags are applied after the file and win.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mapseg::data::{AugmentSpec, EpochConfig, DEFAULT_TOLERANCE};
use mapseg::postprocess::DenoisePolicy;
use mapseg::synthmap::{Split, SynthSpec};
use mapseg::trainer::TrainConfig;
use mapseg::UNetConfig;

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub palette: Option<PathBuf>,
    pub num_classes: usize,
    pub tolerance: u8,

    pub maps: usize,
    pub split: Split,
    pub map_width: usize,
    pub map_height: usize,
    pub regions: usize,
    pub noise_stddev: f64,
    pub boundary_ink: bool,
    pub clutter_strokes: usize,

    pub patch_size: usize,
    pub patches_per_image: usize,
    pub augment_fraction: f64,
    pub augment_rotate: bool,
    pub augment_flip: bool,
    pub stretch_min: f64,
    pub stretch_max: f64,

    pub depth: usize,
    pub base_filters: usize,

    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub eval_every: usize,

    pub tile_size: Option<usize>,
    pub overlap: Option<usize>,
    pub probabilities: bool,
    pub postprocess: DenoisePolicy,
}

impl Default for RunConfig {
    fn default() -> Self {
        let synth = SynthSpec::default();
        let epoch = EpochConfig::default();
        let train = TrainConfig::default();
        let net = UNetConfig::default();
        let stretch = epoch.augment.stretch.unwrap_or((0.8, 1.25));
        RunConfig {
            seed: 0,
            palette: None,
            num_classes: synth.num_classes,
            tolerance: DEFAULT_TOLERANCE,
            maps: 100,
            split: Split::default(),
            map_width: synth.width,
            map_height: synth.height,
            regions: synth.num_regions,
            noise_stddev: synth.noise_stddev,
            boundary_ink: synth.boundary_ink,
            clutter_strokes: synth.clutter_strokes,
            patch_size: epoch.patch_size,
            patches_per_image: epoch.patches_per_image,
            augment_fraction: epoch.augment_fraction,
            augment_rotate: epoch.augment.rotate,
            augment_flip: epoch.augment.flip,
            stretch_min: stretch.0,
            stretch_max: stretch.1,
            depth: net.depth,
            base_filters: net.base_filters,
            learning_rate: train.learning_rate,
            momentum: train.momentum,
            batch_size: train.batch_size,
            epochs: train.epochs,
            eval_every: train.eval_every,
            tile_size: None,
            overlap: None,
            probabilities: false,
            postprocess: DenoisePolicy::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("config key '{key}': cannot parse '{value}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(CliError::Usage(format!("config key '{key}': '{value}' is not a boolean"))),
    }
}

impl RunConfig {
    pub const KEYS: &'static [&'static str] = &[
        "seed",
        "palette",
        "num_classes",
        "tolerance",
        "maps",
        "split_train",
        "split_cv",
        "split_test",
        "map_width",
        "map_height",
        "regions",
        "noise_stddev",
        "boundary_ink",
        "clutter_strokes",
        "patch_size",
        "patches_per_image",
        "augment_fraction",
        "augment_rotate",
        "augment_flip",
        "stretch_min",
        "stretch_max",
        "depth",
        "base_filters",
        "learning_rate",
        "momentum",
        "batch_size",
        "epochs",
        "eval_every",
        "tile_size",
        "overlap",
        "probabilities",
        "postprocess",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "seed" => self.seed = parse(key, value)?,
            "palette" => self.palette = Some(PathBuf::from(value)),
            "num_classes" => self.num_classes = parse(key, value)?,
            "tolerance" => self.tolerance = parse(key, value)?,
            "maps" => self.maps = parse(key, value)?,
            "split_train" => self.split.train = parse(key, value)?,
            "split_cv" => self.split.cv = parse(key, value)?,
            "split_test" => self.split.test = parse(key, value)?,
            "map_width" => self.map_width = parse(key, value)?,
            "map_height" => self.map_height = parse(key, value)?,
            "regions" => self.regions = parse(key, value)?,
            "noise_stddev" => self.noise_stddev = parse(key, value)?,
            "boundary_ink" => self.boundary_ink = parse_bool(key, value)?,
            "clutter_strokes" => self.clutter_strokes = parse(key, value)?,
            "patch_size" => self.patch_size = parse(key, value)?,
            "patches_per_image" => self.patches_per_image = parse(key, value)?,
            "augment_fraction" => self.augment_fraction = parse(key, value)?,
            "augment_rotate" => self.augment_rotate = parse_bool(key, value)?,
            "augment_flip" => self.augment_flip = parse_bool(key, value)?,
            "stretch_min" => self.stretch_min = parse(key, value)?,
            "stretch_max" => self.stretch_max = parse(key, value)?,
            "depth" => self.depth = parse(key, value)?,
            "base_filters" => self.base_filters = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "momentum" => self.momentum = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "eval_every" => self.eval_every = parse(key, value)?,
            "tile_size" => self.tile_size = Some(parse(key, value)?),
            "overlap" => self.overlap = Some(parse(key, value)?),
            "probabilities" => self.probabilities = parse_bool(key, value)?,
            "postprocess" => {
                self.postprocess = value.parse().map_err(|e: mapseg::Error| CliError::Usage(e.to_string()))?
            }
            _ => return Err(CliError::Usage(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    pub fn parse_text(text: &str) -> Result<Self, CliError> {
        let mut config = RunConfig::default();
        let mut seen = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.contains(&key) {
                return Err(CliError::Usage(format!("config line {}: key '{key}' repeated", n + 1)));
            }
            seen.push(key);
            config
                .set(key, value)
                .map_err(|e| CliError::Usage(format!("config line {}: {}", n + 1, e.message())))?;
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::from(mapseg::Error::Io {
            path: path.to_path_buf(),
            source: e,
        }))?;
        let mut config = Self::parse_text(&text)?;
        if let Some(p) = config.palette.as_mut().filter(|p| p.is_relative()) {
            *p = path.parent().unwrap_or(Path::new(".")).join(&*p);
        }
        Ok(config)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("seed", self.seed.to_string());
        if let Some(p) = &self.palette {
            put("palette", p.display().to_string());
        }
        put("num_classes", self.num_classes.to_string());
        put("tolerance", self.tolerance.to_string());
        put("maps", self.maps.to_string());
        put("split_train", self.split.train.to_string());
        put("split_cv", self.split.cv.to_string());
        put("split_test", self.split.test.to_string());
        put("map_width", self.map_width.to_string());
        put("map_height", self.map_height.to_string());
        put("regions", self.regions.to_string());
        put("noise_stddev", self.noise_stddev.to_string());
        put("boundary_ink", self.boundary_ink.to_string());
        put("clutter_strokes", self.clutter_strokes.to_string());
        put("patch_size", self.patch_size.to_string());
        put("patches_per_image", self.patches_per_image.to_string());
        put("augment_fraction", self.augment_fraction.to_string());
        put("augment_rotate", self.augment_rotate.to_string());
        put("augment_flip", self.augment_flip.to_string());
        put("stretch_min", self.stretch_min.to_string());
        put("stretch_max", self.stretch_max.to_string());
        put("depth", self.depth.to_string());
        put("base_filters", self.base_filters.to_string());
        put("learning_rate", self.learning_rate.to_string());
        put("momentum", self.momentum.to_string());
        put("batch_size", self.batch_size.to_string());
        put("epochs", self.epochs.to_string());
        put("eval_every", self.eval_every.to_string());
        if let Some(t) = self.tile_size {
            put("tile_size", t.to_string());
        }
        if let Some(o) = self.overlap {
            put("overlap", o.to_string());
        }
        put("probabilities", self.probabilities.to_string());
        put("postprocess", self.postprocess.to_string());
        out
    }

    /// Split fractions; the three values are relative weights.
    pub fn normalized_split(&self) -> Split {
        let total = self.split.train + self.split.cv + self.split.test;
        Split {
            train: self.split.train / total,
            cv: self.split.cv / total,
            test: self.split.test / total,
        }
    }

    pub fn synth_spec(&self) -> SynthSpec {
        SynthSpec {
            width: self.map_width,
            height: self.map_height,
            num_regions: self.regions,
            num_classes: self.num_classes,
            noise_stddev: self.noise_stddev,
            boundary_ink: self.boundary_ink,
            clutter_strokes: self.clutter_strokes,
            seed: self.seed,
        }
    }

    pub fn epoch_config(&self) -> EpochConfig {
        EpochConfig {
            patch_size: self.patch_size,
            patches_per_image: self.patches_per_image,
            augment_fraction: self.augment_fraction,
            augment: AugmentSpec {
                rotate: self.augment_rotate,
                flip: self.augment_flip,
                stretch: (self.stretch_min != 1.0 || self.stretch_max != 1.0).then_some((self.stretch_min, self.stretch_max)),
            },
        }
    }

    pub fn unet_config(&self) -> UNetConfig {
        UNetConfig {
            input_channels: 3,
            num_classes: self.num_classes,
            depth: self.depth,
            base_filters: self.base_filters,
            patch_size: self.patch_size,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
            eval_every: self.eval_every,
        }
    }
}
