//! The subcommands, as library functions over a resolved [`RunConfig`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mapseg::data::{decode_labels, load_partition, load_png, save_png, DatasetManifest, LabelMap, Palette, Partition};
use mapseg::inference::{argmax_labels, default_overlap, predict_raster};
use mapseg::metrics::{ConfusionMatrix, Evaluation};
use mapseg::postprocess::denoise_labels;
use mapseg::synthmap::generate_corpus;
use mapseg::trainer::{train as run_training, SampledEpochs, TrainReport};
use mapseg::{Rng, UNetModel};

use crate::checkpoint;
use crate::config::RunConfig;
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn io(path: &Path, source: std::io::Error) -> CliError {
    mapseg::Error::Io {
        path: path.to_path_buf(),
        source,
    }
    .into()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io(path, e))
}

/// The configured palette file, else `palette.txt` beside `near` when it
/// exists, else the built-in colors for `num_classes`.
pub fn resolve_palette(config: &RunConfig, near: Option<&Path>) -> Result<Palette> {
    if let Some(path) = &config.palette {
        return Ok(Palette::load(path)?);
    }
    if let Some(candidate) = near.and_then(Path::parent).map(|d| d.join("palette.txt")) {
        if candidate.is_file() {
            return Ok(Palette::load(&candidate)?);
        }
    }
    Ok(Palette::default_classes(config.num_classes)?)
}

pub fn gen_data(config: &RunConfig, out: &Path) -> Result<DatasetManifest> {
    let palette = resolve_palette(config, None)?;
    let template = mapseg::synthmap::SynthSpec {
        num_classes: palette.len(),
        ..config.synth_spec()
    };
    Ok(generate_corpus(&template, config.maps, config.normalized_split(), config.seed, &palette, out)?)
}

/// Trains on the manifest's train partition with model selection on its
/// cv partition; writes the checkpoint and, when `report` is given, the
/// per-epoch CSV.
pub fn train(
    config: &RunConfig,
    manifest_path: &Path,
    checkpoint_path: &Path,
    report: Option<&Path>,
    log: &mut dyn FnMut(&str),
) -> Result<TrainReport> {
    let manifest = DatasetManifest::load(manifest_path)?;
    manifest.check_for_training()?;
    let palette = resolve_palette(config, Some(manifest_path))?;
    let train_set = load_partition(&manifest, Partition::Train, &palette, config.tolerance)?;
    let cv_set = load_partition(&manifest, Partition::CrossValidation, &palette, config.tolerance)?;
    let net = mapseg::UNetConfig {
        num_classes: palette.len(),
        ..config.unet_config()
    };
    let mut rng = Rng::new(config.seed);
    let model = UNetModel::build(net, &mut rng)?;
    log(&format!(
        "training {} parameters on {} maps, {} for cross-validation",
        model.parameter_count(),
        train_set.len(),
        cv_set.len()
    ));
    let mut source = SampledEpochs {
        images: &train_set,
        config: config.epoch_config(),
    };
    let (best, report_data) = run_training(model, &mut source, &cv_set, &config.train_config(), |r| {
        let mut line = format!("epoch {} loss {:.5}", r.epoch, r.loss);
        if let Some((j, oa)) = r.cv {
            let _ = write!(line, " cv_mjacc {j:.4} cv_oa {oa:.4}");
        }
        log(&line);
    })?;
    checkpoint::save(&best, checkpoint_path)?;
    if let Some(path) = report {
        write_text(path, &report_data.to_csv())?;
    }
    log(&format!(
        "best epoch {} (cv mean Jaccard {:.4}), {:.1} s",
        report_data.best_epoch, report_data.best_cv_mean_jaccard, report_data.wall_seconds
    ));
    Ok(report_data)
}

fn check_classes(model: &UNetModel, palette: &Palette) -> Result<()> {
    if model.config().num_classes != palette.len() {
        return Err(mapseg::Error::Config(format!(
            "model predicts {} classes but the palette has {}",
            model.config().num_classes,
            palette.len()
        ))
        .into());
    }
    Ok(())
}

/// Raw argmax labels and their post-processed version for one raster.
pub fn segment(config: &RunConfig, model: &UNetModel, image_path: &Path, prob_dir: Option<&Path>) -> Result<(LabelMap, LabelMap)> {
    let image = load_png(image_path)?;
    let tile = config.tile_size.unwrap_or(model.config().patch_size);
    let overlap = config.overlap.unwrap_or_else(|| default_overlap(tile));
    let probs = predict_raster(model, &image, tile, overlap)?;
    if let Some(dir) = prob_dir {
        probs.save_planes(dir)?;
    }
    let raw = argmax_labels(&probs)?;
    let cleaned = denoise_labels(&raw, &config.postprocess)?;
    Ok((raw, cleaned))
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "map".into(), |s| s.to_string_lossy().into_owned())
}

/// Writes `<stem>.png` (palette colors, post-processed) for every input,
/// plus `<stem>_prob/prob_NN.png` when probabilities are requested.
pub fn predict(config: &RunConfig, checkpoint_path: &Path, inputs: &[PathBuf], out: &Path) -> Result<Vec<PathBuf>> {
    if inputs.is_empty() {
        return Err(CliError::Usage("predict needs at least one input image".into()));
    }
    let model = checkpoint::load(checkpoint_path)?;
    let palette = resolve_palette(config, Some(checkpoint_path))?;
    check_classes(&model, &palette)?;
    std::fs::create_dir_all(out).map_err(|e| io(out, e))?;
    let mut written = Vec::new();
    for input in inputs {
        let name = stem(input);
        let prob_dir = config.probabilities.then(|| out.join(format!("{name}_prob")));
        let (_, labels) = segment(config, &model, input, prob_dir.as_deref())?;
        let path = out.join(format!("{name}.png"));
        save_png(&palette.render(&labels)?, &path)?;
        written.push(path);
    }
    Ok(written)
}

fn read_labels(path: &Path, palette: &Palette, tolerance: u8) -> Result<LabelMap> {
    decode_labels(&load_png(path)?, palette, tolerance)
        .map_err(|e| mapseg::Error::Data(format!("{}: {e}", path.display())).into())
}

pub fn summary_line(e: &Evaluation) -> String {
    format!(
        "mean_jaccard={:.6} micro_jaccard={:.6} overall_accuracy={:.6}",
        e.mean_jaccard, e.micro_jaccard, e.overall_accuracy
    )
}

/// Compares palette-encoded prediction and ground-truth PNGs pairwise.
pub fn eval_files(config: &RunConfig, pred: &[PathBuf], gt: &[PathBuf], out: Option<&Path>) -> Result<Evaluation> {
    if pred.is_empty() || pred.len() != gt.len() {
        return Err(CliError::Usage(format!(
            "eval needs matching --pred and --gt lists, got {} and {}",
            pred.len(),
            gt.len()
        )));
    }
    let palette = resolve_palette(config, None)?;
    let mut cm = ConfusionMatrix::new(palette.len())?;
    for (p, g) in pred.iter().zip(gt) {
        let (p, g) = (read_labels(p, &palette, config.tolerance)?, read_labels(g, &palette, config.tolerance)?);
        cm.merge(&ConfusionMatrix::from_maps(&p, &g, palette.len())?)?;
    }
    write_metrics(&cm, &palette, out)
}

/// Summary of `cm`, also written as a CSV report when `out` is given.
pub fn write_metrics(cm: &ConfusionMatrix, palette: &Palette, out: Option<&Path>) -> Result<Evaluation> {
    if let Some(path) = out {
        write_text(path, &cm.report_csv(Some(palette))?)?;
    }
    Ok(cm.summary()?)
}

/// Raw and post-processed confusion matrices of a checkpoint over one
/// manifest partition. Post-processed label PNGs go to `predictions`.
pub fn eval_model(
    config: &RunConfig,
    checkpoint_path: &Path,
    manifest_path: &Path,
    partition: Partition,
    predictions: Option<&Path>,
) -> Result<(ConfusionMatrix, ConfusionMatrix)> {
    let model = checkpoint::load(checkpoint_path)?;
    let manifest = DatasetManifest::load(manifest_path)?;
    let palette = resolve_palette(config, Some(manifest_path))?;
    check_classes(&model, &palette)?;
    let entries: Vec<_> = manifest.partition(partition).collect();
    if entries.is_empty() {
        return Err(mapseg::Error::Data(format!("partition '{partition}' is empty")).into());
    }
    let k = palette.len();
    let (mut raw_cm, mut post_cm) = (ConfusionMatrix::new(k)?, ConfusionMatrix::new(k)?);
    for e in entries {
        let truth = read_labels(&e.label, &palette, config.tolerance)?;
        let (raw, post) = segment(config, &model, &e.image, None)?;
        raw_cm.merge(&ConfusionMatrix::from_maps(&raw, &truth, k)?)?;
        post_cm.merge(&ConfusionMatrix::from_maps(&post, &truth, k)?)?;
        if let Some(dir) = predictions {
            std::fs::create_dir_all(dir).map_err(|err| io(dir, err))?;
            save_png(&palette.render(&post)?, &dir.join(format!("{}.png", stem(&e.image))))?;
        }
    }
    Ok((raw_cm, post_cm))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineSummary {
    pub raw: Evaluation,
    pub postprocessed: Evaluation,
    pub best_epoch: usize,
    pub seconds: f64,
}

impl PipelineSummary {
    /// `key=value` lines, one metric per line.
    pub fn to_text(&self) -> String {
        format!(
            "best_epoch={}\nraw_mean_jaccard={:.6}\nraw_overall_accuracy={:.6}\nmean_jaccard={:.6}\nmicro_jaccard={:.6}\noverall_accuracy={:.6}\n",
            self.best_epoch,
            self.raw.mean_jaccard,
            self.raw.overall_accuracy,
            self.postprocessed.mean_jaccard,
            self.postprocessed.micro_jaccard,
            self.postprocessed.overall_accuracy
        )
    }
}

/// gen-data, train, predict and eval in sequence under `out`:
/// `data/`, `model.ckpt`, `train_report.csv`, `predictions/`,
/// `metrics_raw.csv`, `metrics.csv` and `summary.txt`.
pub fn pipeline(config: &RunConfig, out: &Path, log: &mut dyn FnMut(&str)) -> Result<PipelineSummary> {
    let start = Instant::now();
    let data = out.join("data");
    let manifest = gen_data(config, &data)?;
    log(&format!(
        "generated {} maps ({} train, {} cv, {} test) in {:.1} s",
        manifest.entries.len(),
        manifest.count(Partition::Train),
        manifest.count(Partition::CrossValidation),
        manifest.count(Partition::Test),
        start.elapsed().as_secs_f64()
    ));
    let manifest_path = data.join("manifest.txt");
    let ckpt = out.join("model.ckpt");
    let report = train(config, &manifest_path, &ckpt, Some(&out.join("train_report.csv")), log)?;
    let (raw_cm, post_cm) = eval_model(config, &ckpt, &manifest_path, Partition::Test, Some(&out.join("predictions")))?;
    let palette = resolve_palette(config, Some(&manifest_path))?;
    let raw = write_metrics(&raw_cm, &palette, Some(&out.join("metrics_raw.csv")))?;
    let postprocessed = write_metrics(&post_cm, &palette, Some(&out.join("metrics.csv")))?;
    let summary = PipelineSummary {
        raw,
        postprocessed,
        best_epoch: report.best_epoch,
        seconds: start.elapsed().as_secs_f64(),
    };
    write_text(&out.join("summary.txt"), &summary.to_text())?;
    Ok(summary)
}
