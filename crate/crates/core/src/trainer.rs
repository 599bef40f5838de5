//! Mini-batch SGD with momentum and model selection on a
//! cross-validation set.

use std::fmt::Write as _;
use std::time::Instant;

use crate::data::{build_epoch, EpochConfig, LabeledImage, Patch};
use crate::error::{Error, Result};
use crate::inference::{argmax_labels, default_overlap, predict_raster};
use crate::layers::{softmax_channels, softmax_cross_entropy};
use crate::metrics::{ConfusionMatrix, Evaluation};
use crate::rng::Rng;
use crate::tensor::Tensor;
use crate::unet::{GradientSet, ParamKind, UNetModel};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Epochs between cross-validation passes; the last epoch is always
    /// evaluated.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            momentum: 0.9,
            batch_size: 8,
            epochs: 12,
            seed: 0,
            eval_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return fail(format!("momentum {} outside [0, 1)", self.momentum));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if self.eval_every == 0 {
            return fail("eval_every must be at least 1".into());
        }
        Ok(())
    }
}

/// `v ← momentum·v + g`, then `θ ← θ − lr·v` for every trainable tensor.
pub fn sgd_step(model: &mut UNetModel, grads: &GradientSet, velocity: &mut GradientSet, config: &TrainConfig) -> Result<()> {
    let mut params: Vec<_> = model
        .params_mut()
        .into_iter()
        .filter(|p| p.kind == ParamKind::Trainable)
        .collect();
    let matches = |set: &GradientSet| {
        set.entries.len() == params.len()
            && set
                .entries
                .iter()
                .zip(&params)
                .all(|(e, p)| e.name == p.name && e.values.len() == p.data.len())
    };
    if !matches(grads) || !matches(velocity) {
        return Err(Error::State("gradient or velocity tensors do not match the model parameters".into()));
    }
    let (lr, m) = (config.learning_rate as f32, config.momentum as f32);
    for ((p, g), v) in params.iter_mut().zip(&grads.entries).zip(&mut velocity.entries) {
        for ((theta, &grad), vel) in p.data.iter_mut().zip(&g.values).zip(&mut v.values) {
            *vel = m * *vel + grad;
            *theta -= lr * *vel;
        }
    }
    Ok(())
}

/// Supplies the training patches of each epoch.
pub trait PatchSource {
    fn epoch(&mut self, rng: &mut Rng) -> Result<Vec<Patch>>;
}

/// The same patches every epoch, in a fresh random order.
pub struct FixedPatches(pub Vec<Patch>);

impl PatchSource for FixedPatches {
    fn epoch(&mut self, rng: &mut Rng) -> Result<Vec<Patch>> {
        if self.0.is_empty() {
            return Err(Error::data("no training patches"));
        }
        let mut patches = self.0.clone();
        rng.shuffle(&mut patches);
        Ok(patches)
    }
}

/// Freshly sampled and augmented patches from whole training images.
pub struct SampledEpochs<'a> {
    pub images: &'a [LabeledImage],
    pub config: EpochConfig,
}

impl PatchSource for SampledEpochs<'_> {
    fn epoch(&mut self, rng: &mut Rng) -> Result<Vec<Patch>> {
        build_epoch(self.images, &self.config, rng)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-pixel cross-entropy over the epoch's patches.
    pub loss: f64,
    /// Cross-validation mean Jaccard and overall accuracy, when evaluated.
    pub cv: Option<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_cv_mean_jaccard: f64,
    pub wall_seconds: f64,
}

impl TrainReport {
    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    pub fn evaluations(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.records.iter().filter_map(|r| r.cv.map(|(j, oa)| (r.epoch, j, oa)))
    }

    /// `epoch,loss,cv_mjacc,cv_oa` with empty cells for skipped evaluations.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,cv_mjacc,cv_oa\n");
        for r in &self.records {
            let _ = write!(out, "{},{:.6}", r.epoch, r.loss);
            match r.cv {
                Some((j, oa)) => {
                    let _ = writeln!(out, ",{j:.6},{oa:.6}");
                }
                None => out.push_str(",,\n"),
            }
        }
        out
    }
}

/// Confusion matrix of argmax predictions over whole images, predicted in
/// tiles of the model's patch size.
pub fn confusion(model: &UNetModel, set: &[LabeledImage]) -> Result<ConfusionMatrix> {
    if set.is_empty() {
        return Err(Error::argument("cannot evaluate an empty set"));
    }
    let tile = model.config().patch_size;
    let mut cm = ConfusionMatrix::new(model.config().num_classes)?;
    for item in set {
        let probs = predict_raster(model, &item.image, tile, default_overlap(tile))?;
        let pred = argmax_labels(&probs)?;
        cm.accumulate(pred.labels(), item.labels.labels())?;
    }
    Ok(cm)
}

pub fn evaluate(model: &UNetModel, set: &[LabeledImage]) -> Result<Evaluation> {
    confusion(model, set)?.summary()
}

/// Like [`evaluate`] but on patches, each predicted in one pass.
pub fn evaluate_patches(model: &UNetModel, patches: &[Patch]) -> Result<Evaluation> {
    if patches.is_empty() {
        return Err(Error::argument("cannot evaluate an empty set"));
    }
    let k = model.config().num_classes;
    let mut cm = ConfusionMatrix::new(k)?;
    for p in patches {
        let probs = softmax_channels(&model.infer(&p.image)?)?;
        let plane = probs.shape().plane();
        let data = probs.item(0);
        let pred: Vec<u8> = (0..plane)
            .map(|i| {
                let mut best = 0;
                for c in 1..k {
                    if data[c * plane + i] > data[best * plane + i] {
                        best = c;
                    }
                }
                best as u8
            })
            .collect();
        cm.accumulate(&pred, p.labels.labels())?;
    }
    cm.summary()
}

/// One forward/backward/update on a batch; returns the batch loss.
pub fn train_batch(
    model: &mut UNetModel,
    batch: &[&Patch],
    velocity: &mut GradientSet,
    config: &TrainConfig,
) -> Result<f64> {
    let (x, labels): (Tensor, Vec<u8>) = Patch::stack(batch)?;
    let (logits, cache) = model.forward_train(&x)?;
    let (loss, grad) = softmax_cross_entropy(&logits, &labels)?;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("loss {loss}")));
    }
    let grads = model.backward(&cache, &grad)?;
    sgd_step(model, &grads, velocity, config)?;
    Ok(loss)
}

/// Trains `model` for `config.epochs` epochs and returns the snapshot with
/// the highest cross-validation mean Jaccard (the earliest on exact ties).
/// `on_epoch` sees every record as soon as it is complete.
pub fn train(
    model: UNetModel,
    source: &mut dyn PatchSource,
    cv: &[LabeledImage],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(UNetModel, TrainReport)> {
    config.validate()?;
    if cv.is_empty() {
        return Err(Error::data("the cross-validation partition is empty"));
    }
    let start = Instant::now();
    let mut model = model;
    let mut rng = Rng::new(config.seed);
    let mut velocity = GradientSet::zeros_like(&model);
    let mut records = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, UNetModel)> = None;

    for epoch in 1..=config.epochs {
        let patches = source.epoch(&mut rng)?;
        if patches.is_empty() {
            return Err(Error::data("an epoch produced no patches"));
        }
        let refs: Vec<&Patch> = patches.iter().collect();
        let mut weighted = 0.0;
        for (b, batch) in refs.chunks(config.batch_size).enumerate() {
            let loss = train_batch(&mut model, batch, &mut velocity, config).map_err(|e| match e {
                Error::Numeric(m) => Error::Numeric(format!("epoch {epoch}, batch {}: {m}", b + 1)),
                other => other,
            })?;
            weighted += loss * batch.len() as f64;
        }
        let loss = weighted / patches.len() as f64;

        let cv_scores = if epoch % config.eval_every == 0 || epoch == config.epochs {
            let eval = evaluate(&model, cv).map_err(|e| match e {
                Error::Numeric(m) => Error::Numeric(format!("epoch {epoch}, cross-validation: {m}")),
                other => other,
            })?;
            if best.as_ref().is_none_or(|(_, j, _)| eval.mean_jaccard > *j) {
                best = Some((epoch, eval.mean_jaccard, model.clone()));
            }
            Some((eval.mean_jaccard, eval.overall_accuracy))
        } else {
            None
        };
        let record = EpochRecord {
            epoch,
            loss,
            cv: cv_scores,
        };
        on_epoch(&record);
        records.push(record);
    }

    let (best_epoch, best_cv_mean_jaccard, best_model) = best.expect("the last epoch is always evaluated");
    Ok((
        best_model,
        TrainReport {
            records,
            best_epoch,
            best_cv_mean_jaccard,
            wall_seconds: start.elapsed().as_secs_f64(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{LabelMap, RasterImage};
    use crate::unet::UNetConfig;

    fn tiny() -> UNetModel {
        let config = UNetConfig {
            num_classes: 2,
            depth: 1,
            base_filters: 2,
            patch_size: 8,
            ..UNetConfig::default()
        };
        UNetModel::build(config, &mut Rng::new(3)).unwrap()
    }

    fn flat(v: &UNetModel) -> Vec<f32> {
        v.params()
            .iter()
            .filter(|p| p.kind == ParamKind::Trainable)
            .flat_map(|p| p.data.to_vec())
            .collect()
    }

    #[test]
    fn zero_step_is_identity() {
        let mut m = tiny();
        let before = m.clone();
        let g = GradientSet::zeros_like(&m);
        let mut v = GradientSet::zeros_like(&m);
        sgd_step(&mut m, &g, &mut v, &TrainConfig::default()).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn single_step_arithmetic() {
        let mut m = tiny();
        for p in m.params_mut() {
            if p.kind == ParamKind::Trainable {
                p.data.fill(1.0);
            }
        }
        let mut g = GradientSet::zeros_like(&m);
        g.entries.iter_mut().for_each(|e| e.values.fill(0.5));
        let mut v = GradientSet::zeros_like(&m);
        let cfg = TrainConfig {
            learning_rate: 0.1,
            momentum: 0.0,
            ..TrainConfig::default()
        };
        sgd_step(&mut m, &g, &mut v, &cfg).unwrap();
        assert!(flat(&m).iter().all(|&t| t == 0.95));
    }

    #[test]
    fn momentum_matches_unrolled_recurrence() {
        let mut m = tiny();
        let theta0 = flat(&m);
        let mut rng = Rng::new(11);
        let mut draw = || {
            let mut g = GradientSet::zeros_like(&m);
            g.entries
                .iter_mut()
                .for_each(|e| e.values.iter_mut().for_each(|v| *v = rng.normal() as f32));
            g
        };
        let (g1, g2) = (draw(), draw());
        let cfg = TrainConfig::default();
        let mut v = GradientSet::zeros_like(&m);
        sgd_step(&mut m, &g1, &mut v, &cfg).unwrap();
        sgd_step(&mut m, &g2, &mut v, &cfg).unwrap();
        let flat_g = |g: &GradientSet| g.entries.iter().flat_map(|e| e.values.clone()).collect::<Vec<f32>>();
        let (a, b) = (flat_g(&g1), flat_g(&g2));
        // θ2 = θ0 − lr·g1 − lr·(m·g1 + g2)
        let (lr, mo) = (cfg.learning_rate, cfg.momentum);
        for (i, &t) in flat(&m).iter().enumerate() {
            let expected = theta0[i] as f64 - lr * a[i] as f64 - lr * (mo * a[i] as f64 + b[i] as f64);
            assert!((t as f64 - expected).abs() < 1e-6, "{i}: {t} vs {expected}");
        }
    }

    #[test]
    fn mismatched_sets_are_state_errors() {
        let mut m = tiny();
        let mut g = GradientSet::zeros_like(&m);
        g.entries[0].name = "bogus".into();
        let mut v = GradientSet::zeros_like(&m);
        assert!(matches!(sgd_step(&mut m, &g, &mut v, &TrainConfig::default()), Err(Error::State(_))));
        let g = GradientSet::zeros_like(&m);
        v.entries.pop();
        assert!(matches!(sgd_step(&mut m, &g, &mut v, &TrainConfig::default()), Err(Error::State(_))));
    }

    #[test]
    fn config_validation() {
        let ok = TrainConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            TrainConfig { epochs: 0, ..ok },
            TrainConfig { batch_size: 0, ..ok },
            TrainConfig { momentum: 1.0, ..ok },
            TrainConfig { learning_rate: 0.0, ..ok },
            TrainConfig { eval_every: 0, ..ok },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))), "{bad:?}");
        }
    }

    fn stripes(seed: u64) -> LabeledImage {
        let mut rng = Rng::new(seed);
        let mut image = RasterImage::filled(8, 8, [0; 3]);
        let mut labels = LabelMap::filled(8, 8, 0);
        for y in 0..8 {
            for x in 0..8 {
                let class = ((x + y + seed as usize) / 3 % 2) as u8;
                let base = if class == 1 { 200 } else { 40 };
                image.set(x, y, [base + rng.below(20) as u8, 90, base]);
                labels.set(x, y, class);
            }
        }
        LabeledImage { image, labels }
    }

    #[test]
    fn report_bookkeeping() {
        let patches: Vec<Patch> = (0..4)
            .map(|s| {
                let li = stripes(s);
                Patch {
                    image: li.image.to_tensor(),
                    labels: li.labels,
                }
            })
            .collect();
        let cv = vec![stripes(7)];
        let cfg = TrainConfig {
            epochs: 5,
            eval_every: 2,
            batch_size: 3,
            seed: 4,
            ..TrainConfig::default()
        };
        let mut seen = 0;
        let (best, report) = train(tiny(), &mut FixedPatches(patches.clone()), &cv, &cfg, |_| seen += 1).unwrap();
        assert_eq!(seen, 5);
        assert_eq!(report.records.len(), 5);
        let evals: Vec<_> = report.evaluations().map(|e| e.0).collect();
        assert_eq!(evals, vec![2, 4, 5]);
        let top = report.evaluations().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(report.best_cv_mean_jaccard, top);
        let first_top = report.evaluations().find(|e| e.1 == top).unwrap().0;
        assert_eq!(report.best_epoch, first_top);
        assert_eq!(evaluate(&best, &cv).unwrap().mean_jaccard, top);
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 6);
        assert!(csv.lines().nth(1).unwrap().ends_with(",,"));

        let (_, again) = train(tiny(), &mut FixedPatches(patches), &cv, &cfg, |_| {}).unwrap();
        assert_eq!(again.records, report.records);
    }

    #[test]
    fn one_epoch_one_loss() {
        let li = stripes(1);
        let patch = Patch {
            image: li.image.to_tensor(),
            labels: li.labels.clone(),
        };
        let cfg = TrainConfig { epochs: 1, ..TrainConfig::default() };
        let (_, report) = train(tiny(), &mut FixedPatches(vec![patch]), &[li], &cfg, |_| {}).unwrap();
        assert_eq!(report.losses().len(), 1);
        assert_eq!(report.best_epoch, 1);
    }

    #[test]
    fn divergence_is_reported() {
        let li = stripes(2);
        let patch = Patch {
            image: li.image.to_tensor(),
            labels: li.labels.clone(),
        };
        let cfg = TrainConfig {
            epochs: 50,
            learning_rate: 1e30,
            ..TrainConfig::default()
        };
        let err = train(tiny(), &mut FixedPatches(vec![patch]), &[li], &cfg, |_| {}).unwrap_err();
        match err {
            Error::Numeric(m) => assert!(m.starts_with("epoch "), "{m}"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn constant_predictor_on_balanced_set() {
        let mut model = tiny();
        model.head.weight.data_mut().fill(0.0);
        model.head.bias = vec![1.0, 0.0];
        let mut labels = LabelMap::filled(8, 8, 0);
        for y in 4..8 {
            for x in 0..8 {
                labels.set(x, y, 1);
            }
        }
        let li = LabeledImage {
            image: stripes(3).image,
            labels,
        };
        let eval = evaluate(&model, std::slice::from_ref(&li)).unwrap();
        assert_eq!(eval.overall_accuracy, 0.5);
        assert_eq!(eval.per_class, vec![Some(0.5), Some(0.0)]);
        let patch = Patch {
            image: li.image.to_tensor(),
            labels: li.labels.clone(),
        };
        assert_eq!(evaluate_patches(&model, &[patch]).unwrap(), eval);
        assert!(evaluate(&model, &[]).is_err());
    }
}
