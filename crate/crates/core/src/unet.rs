//! The U-shape segmentation network.
//!
//! Encoder level `ℓ` (`0 ≤ ℓ < depth`) runs two conv3×3–BN–ReLU blocks with
//! `base·2^ℓ` filters, keeps the result as the skip tensor, then max-pools
//! 2×2. The bottleneck runs two blocks with `base·2^depth` filters. Decoder
//! level `ℓ` upsamples 2× (nearest), applies an `up` block down to
//! `base·2^ℓ` channels, concatenates `[skip, up]` along channels and runs
//! two more blocks. A 1×1 convolution head maps `base` channels to class
//! logits. All 3×3 convolutions are zero-padded by one pixel so the output
//! has the spatial size of the input.

use std::fmt;

use crate::error::{Error, Result};
use crate::layers::{
    batchnorm_backward, batchnorm_forward, conv2d_backward, conv2d_forward, maxpool2d_backward,
    maxpool2d_forward, relu_backward, relu_forward, upsample2x_backward, upsample2x_forward,
    BnCache, BnParams, ConvCache, ConvParams, PoolCache, ReluCache, UpsampleCache,
};
use crate::rng::Rng;
use crate::tensor::{Scalar, Shape4, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UNetConfig {
    pub input_channels: usize,
    pub num_classes: usize,
    pub depth: usize,
    pub base_filters: usize,
    pub patch_size: usize,
}

impl Default for UNetConfig {
    fn default() -> Self {
        UNetConfig {
            input_channels: 3,
            num_classes: 11,
            depth: 3,
            base_filters: 16,
            patch_size: 128,
        }
    }
}

impl UNetConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.input_channels == 0 {
            return fail("input_channels must be at least 1".into());
        }
        if self.num_classes < 2 || self.num_classes > 256 {
            return fail(format!("num_classes {} outside [2, 256]", self.num_classes));
        }
        if self.base_filters == 0 {
            return fail("base_filters must be at least 1".into());
        }
        if self.depth > 16 {
            return fail(format!("depth {} is unreasonably large", self.depth));
        }
        let unit = 1usize << self.depth;
        if self.patch_size == 0 || !self.patch_size.is_multiple_of(unit) {
            return fail(format!(
                "patch_size {} not a positive multiple of 2^depth = {unit}",
                self.patch_size
            ));
        }
        Ok(())
    }

    /// Channel count at encoder level `level` (`depth` is the bottleneck).
    pub fn channels_at(&self, level: usize) -> usize {
        self.base_filters << level
    }
}

/// conv3×3 (pad 1) → batch norm → ReLU.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvBlock<T: Scalar = f32> {
    pub conv: ConvParams<T>,
    pub bn: BnParams<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderLevel<T: Scalar = f32> {
    pub block1: ConvBlock<T>,
    pub block2: ConvBlock<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecoderLevel<T: Scalar = f32> {
    pub up: ConvBlock<T>,
    pub block1: ConvBlock<T>,
    pub block2: ConvBlock<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UNetModel<T: Scalar = f32> {
    config: UNetConfig,
    pub encoders: Vec<EncoderLevel<T>>,
    pub bottleneck: EncoderLevel<T>,
    /// Indexed by level, so `decoders[0]` produces full resolution.
    pub decoders: Vec<DecoderLevel<T>>,
    pub head: ConvParams<T>,
}

/// Whether a named tensor is optimized or merely tracked.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Trainable,
    /// Batch-norm running statistics.
    Buffer,
}

pub struct ParamRef<'a, T> {
    pub name: String,
    pub dims: Vec<usize>,
    pub kind: ParamKind,
    pub data: &'a [T],
}

pub struct ParamMut<'a, T> {
    pub name: String,
    pub dims: Vec<usize>,
    pub kind: ParamKind,
    pub data: &'a mut [T],
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradEntry<T = f32> {
    pub name: String,
    pub dims: Vec<usize>,
    pub values: Vec<T>,
}

/// One gradient per trainable parameter, in the model's parameter order.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet<T = f32> {
    pub entries: Vec<GradEntry<T>>,
}

impl<T: Scalar> GradientSet<T> {
    /// Zero gradients shaped like the trainable parameters of `model`.
    pub fn zeros_like(model: &UNetModel<T>) -> Self {
        let entries = model
            .params()
            .into_iter()
            .filter(|p| p.kind == ParamKind::Trainable)
            .map(|p| GradEntry {
                name: p.name,
                dims: p.dims,
                values: vec![T::zero(); p.data.len()],
            })
            .collect();
        GradientSet { entries }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&GradEntry<T>> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn is_zero(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.values.iter().all(|v| *v == T::zero()))
    }
}

fn walk_conv<'a, T: Scalar>(prefix: &str, p: &'a ConvParams<T>, out: &mut Vec<ParamRef<'a, T>>) {
    let s = p.weight.shape();
    out.push(ParamRef {
        name: format!("{prefix}.weight"),
        dims: vec![s.n, s.c, s.h, s.w],
        kind: ParamKind::Trainable,
        data: p.weight.data(),
    });
    out.push(ParamRef {
        name: format!("{prefix}.bias"),
        dims: vec![p.bias.len()],
        kind: ParamKind::Trainable,
        data: &p.bias,
    });
}

fn walk_conv_mut<'a, T: Scalar>(prefix: &str, p: &'a mut ConvParams<T>, out: &mut Vec<ParamMut<'a, T>>) {
    let s = p.weight.shape();
    out.push(ParamMut {
        name: format!("{prefix}.weight"),
        dims: vec![s.n, s.c, s.h, s.w],
        kind: ParamKind::Trainable,
        data: p.weight.data_mut(),
    });
    out.push(ParamMut {
        name: format!("{prefix}.bias"),
        dims: vec![p.bias.len()],
        kind: ParamKind::Trainable,
        data: &mut p.bias,
    });
}

fn walk_block<'a, T: Scalar>(prefix: &str, b: &'a ConvBlock<T>, out: &mut Vec<ParamRef<'a, T>>) {
    walk_conv(&format!("{prefix}.conv"), &b.conv, out);
    let c = b.bn.channels();
    let bn = [
        ("gamma", ParamKind::Trainable, &b.bn.gamma),
        ("beta", ParamKind::Trainable, &b.bn.beta),
        ("running_mean", ParamKind::Buffer, &b.bn.running_mean),
        ("running_var", ParamKind::Buffer, &b.bn.running_var),
    ];
    for (field, kind, data) in bn {
        out.push(ParamRef {
            name: format!("{prefix}.bn.{field}"),
            dims: vec![c],
            kind,
            data,
        });
    }
}

fn walk_block_mut<'a, T: Scalar>(prefix: &str, b: &'a mut ConvBlock<T>, out: &mut Vec<ParamMut<'a, T>>) {
    walk_conv_mut(&format!("{prefix}.conv"), &mut b.conv, out);
    let c = b.bn.channels();
    let bn = [
        ("gamma", ParamKind::Trainable, &mut b.bn.gamma),
        ("beta", ParamKind::Trainable, &mut b.bn.beta),
        ("running_mean", ParamKind::Buffer, &mut b.bn.running_mean),
        ("running_var", ParamKind::Buffer, &mut b.bn.running_var),
    ];
    for (field, kind, data) in bn {
        out.push(ParamMut {
            name: format!("{prefix}.bn.{field}"),
            dims: vec![c],
            kind,
            data,
        });
    }
}

fn he_conv<T: Scalar>(out_c: usize, in_c: usize, k: usize, rng: &mut Rng) -> Result<ConvParams<T>> {
    let fan_in = (in_c * k * k) as f64;
    let weight = Tensor::rand_normal(Shape4::new(out_c, in_c, k, k), 0.0, (2.0 / fan_in).sqrt(), rng)?;
    ConvParams::new(weight, vec![T::zero(); out_c])
}

fn conv_block<T: Scalar>(in_c: usize, out_c: usize, rng: &mut Rng) -> Result<ConvBlock<T>> {
    Ok(ConvBlock {
        conv: he_conv(out_c, in_c, 3, rng)?,
        bn: BnParams::identity(out_c),
    })
}

#[derive(Clone, Debug)]
struct BlockCache<T: Scalar> {
    conv: ConvCache<T>,
    bn: BnCache<T>,
    relu: ReluCache,
}

#[derive(Clone, Debug)]
struct EncoderCache<T: Scalar> {
    block1: BlockCache<T>,
    block2: BlockCache<T>,
    pool: Option<PoolCache>,
}

#[derive(Clone, Debug)]
struct DecoderCache<T: Scalar> {
    upsample: UpsampleCache,
    up: BlockCache<T>,
    skip_channels: usize,
    block1: BlockCache<T>,
    block2: BlockCache<T>,
}

/// Everything a forward pass saved for its backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache<T: Scalar = f32> {
    config: UNetConfig,
    input_shape: Shape4,
    encoders: Vec<EncoderCache<T>>,
    bottleneck: EncoderCache<T>,
    /// Indexed by level.
    decoders: Vec<DecoderCache<T>>,
    head: ConvCache<T>,
}

impl<T: Scalar> ForwardCache<T> {
    /// ReLU activity masks and max-pool winners of the whole pass. Two
    /// passes with equal signatures took the same linear piece of the
    /// network.
    pub fn branch_signature(&self) -> Vec<u32> {
        let mut sig = Vec::new();
        let push_block = |b: &BlockCache<T>, sig: &mut Vec<u32>| {
            sig.extend(b.relu.active().iter().map(|&a| a as u32));
        };
        for e in self.encoders.iter().chain(std::iter::once(&self.bottleneck)) {
            push_block(&e.block1, &mut sig);
            push_block(&e.block2, &mut sig);
            if let Some(p) = &e.pool {
                sig.extend_from_slice(p.argmax());
            }
        }
        for d in &self.decoders {
            push_block(&d.up, &mut sig);
            push_block(&d.block1, &mut sig);
            push_block(&d.block2, &mut sig);
        }
        sig
    }
}

fn block_forward<T: Scalar>(
    x: &Tensor<T>,
    b: &ConvBlock<T>,
    training: bool,
) -> Result<(Tensor<T>, BlockCache<T>)> {
    let (z, conv) = conv2d_forward(x, &b.conv, 1, 1)?;
    let (n, bn) = batchnorm_forward(&z, &b.bn, training)?;
    let (y, relu) = relu_forward(&n);
    Ok((y, BlockCache { conv, bn, relu }))
}

fn block_backward<T: Scalar>(
    g: &Tensor<T>,
    cache: &BlockCache<T>,
    b: &ConvBlock<T>,
    grads: &mut ConvBlock<T>,
) -> Result<Tensor<T>> {
    let g = relu_backward(g, &cache.relu)?;
    let bn = batchnorm_backward(&g, &cache.bn)?;
    grads.bn.gamma = bn.grad_gamma;
    grads.bn.beta = bn.grad_beta;
    let conv = conv2d_backward(&bn.grad_x, &cache.conv, &b.conv)?;
    grads.conv.weight = conv.grad_w;
    grads.conv.bias = conv.grad_b;
    Ok(conv.grad_x)
}

impl<T: Scalar> UNetModel<T> {
    /// He-normal convolution weights (`stddev = √(2/fan_in)`), zero biases,
    /// identity batch norms. Weights are drawn in parameter order.
    pub fn build(config: UNetConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let mut encoders = Vec::with_capacity(config.depth);
        let mut in_c = config.input_channels;
        for level in 0..config.depth {
            let c = config.channels_at(level);
            encoders.push(EncoderLevel {
                block1: conv_block(in_c, c, rng)?,
                block2: conv_block(c, c, rng)?,
            });
            in_c = c;
        }
        let cb = config.channels_at(config.depth);
        let bottleneck = EncoderLevel {
            block1: conv_block(in_c, cb, rng)?,
            block2: conv_block(cb, cb, rng)?,
        };
        // decoders are created bottom-up, matching the order they run in
        let mut decoders = Vec::with_capacity(config.depth);
        for level in (0..config.depth).rev() {
            let c = config.channels_at(level);
            let below = config.channels_at(level + 1);
            decoders.push(DecoderLevel {
                up: conv_block(below, c, rng)?,
                block1: conv_block(2 * c, c, rng)?,
                block2: conv_block(c, c, rng)?,
            });
        }
        decoders.reverse();
        let head = he_conv(config.num_classes, config.base_filters, 1, rng)?;
        let model = UNetModel {
            config,
            encoders,
            bottleneck,
            decoders,
            head,
        };
        model.check_structure()?;
        Ok(model)
    }

    pub fn config(&self) -> &UNetConfig {
        &self.config
    }

    /// Channel bookkeeping: every decoder concat sees `skip + up` channels.
    fn check_structure(&self) -> Result<()> {
        for (level, d) in self.decoders.iter().enumerate() {
            let skip = self.encoders[level].block2.conv.out_channels();
            let up = d.up.conv.out_channels();
            if d.block1.conv.in_channels() != skip + up {
                return Err(Error::State(format!(
                    "decoder {level} expects {} channels, concat provides {skip} + {up}",
                    d.block1.conv.in_channels()
                )));
            }
        }
        Ok(())
    }

    /// All named tensors (parameters and buffers) in canonical order.
    pub fn params(&self) -> Vec<ParamRef<'_, T>> {
        let mut out = Vec::new();
        for (l, e) in self.encoders.iter().enumerate() {
            walk_block(&format!("enc{l}.block1"), &e.block1, &mut out);
            walk_block(&format!("enc{l}.block2"), &e.block2, &mut out);
        }
        walk_block("bottleneck.block1", &self.bottleneck.block1, &mut out);
        walk_block("bottleneck.block2", &self.bottleneck.block2, &mut out);
        for (l, d) in self.decoders.iter().enumerate().rev() {
            walk_block(&format!("dec{l}.up"), &d.up, &mut out);
            walk_block(&format!("dec{l}.block1"), &d.block1, &mut out);
            walk_block(&format!("dec{l}.block2"), &d.block2, &mut out);
        }
        walk_conv("head", &self.head, &mut out);
        out
    }

    pub fn params_mut(&mut self) -> Vec<ParamMut<'_, T>> {
        let mut out = Vec::new();
        for (l, e) in self.encoders.iter_mut().enumerate() {
            walk_block_mut(&format!("enc{l}.block1"), &mut e.block1, &mut out);
            walk_block_mut(&format!("enc{l}.block2"), &mut e.block2, &mut out);
        }
        walk_block_mut("bottleneck.block1", &mut self.bottleneck.block1, &mut out);
        walk_block_mut("bottleneck.block2", &mut self.bottleneck.block2, &mut out);
        for (l, d) in self.decoders.iter_mut().enumerate().rev() {
            walk_block_mut(&format!("dec{l}.up"), &mut d.up, &mut out);
            walk_block_mut(&format!("dec{l}.block1"), &mut d.block1, &mut out);
            walk_block_mut(&format!("dec{l}.block2"), &mut d.block2, &mut out);
        }
        walk_conv_mut("head", &mut self.head, &mut out);
        out
    }

    /// Number of trainable scalars (batch-norm running statistics excluded).
    pub fn parameter_count(&self) -> usize {
        self.params()
            .iter()
            .filter(|p| p.kind == ParamKind::Trainable)
            .map(|p| p.data.len())
            .sum()
    }

    /// Same architecture and values in another element type.
    pub fn cast<U: Scalar>(&self) -> UNetModel<U> {
        let conv = |p: &ConvParams<T>| ConvParams {
            weight: p.weight.cast(),
            bias: p.bias.iter().map(|v| U::of(v.f64())).collect(),
        };
        let vec = |v: &[T]| v.iter().map(|x| U::of(x.f64())).collect::<Vec<U>>();
        let block = |b: &ConvBlock<T>| ConvBlock {
            conv: conv(&b.conv),
            bn: BnParams {
                gamma: vec(&b.bn.gamma),
                beta: vec(&b.bn.beta),
                running_mean: vec(&b.bn.running_mean),
                running_var: vec(&b.bn.running_var),
                eps: b.bn.eps,
                momentum: b.bn.momentum,
            },
        };
        let enc = |e: &EncoderLevel<T>| EncoderLevel {
            block1: block(&e.block1),
            block2: block(&e.block2),
        };
        UNetModel {
            config: self.config,
            encoders: self.encoders.iter().map(enc).collect(),
            bottleneck: enc(&self.bottleneck),
            decoders: self
                .decoders
                .iter()
                .map(|d| DecoderLevel {
                    up: block(&d.up),
                    block1: block(&d.block1),
                    block2: block(&d.block2),
                })
                .collect(),
            head: conv(&self.head),
        }
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let s = x.shape();
        s.require_nonempty("network input")?;
        let unit = 1usize << self.config.depth;
        if s.c != self.config.input_channels || !s.h.is_multiple_of(unit) || !s.w.is_multiple_of(unit) {
            return Err(Error::shape(format!(
                "network input {s:?}: need {} channels and sides divisible by {unit}",
                self.config.input_channels
            )));
        }
        Ok(())
    }

    /// Logits of shape `(n, num_classes, h, w)` plus the backward cache.
    /// Pure: batch statistics are used in training mode but the running
    /// estimates are not touched (see [`UNetModel::forward_train`]).
    pub fn forward(&self, x: &Tensor<T>, training: bool) -> Result<(Tensor<T>, ForwardCache<T>)> {
        self.check_input(x)?;
        let mut skips = Vec::with_capacity(self.config.depth);
        let mut enc_caches = Vec::with_capacity(self.config.depth);
        let mut h = x.clone();
        for e in &self.encoders {
            let (a, c1) = block_forward(&h, &e.block1, training)?;
            let (skip, c2) = block_forward(&a, &e.block2, training)?;
            let (pooled, pool) = maxpool2d_forward(&skip, 2, 2)?;
            skips.push(skip);
            enc_caches.push(EncoderCache {
                block1: c1,
                block2: c2,
                pool: Some(pool),
            });
            h = pooled;
        }
        let (a, b1) = block_forward(&h, &self.bottleneck.block1, training)?;
        let (mut h, b2) = block_forward(&a, &self.bottleneck.block2, training)?;
        let bottleneck = EncoderCache {
            block1: b1,
            block2: b2,
            pool: None,
        };

        let mut dec_caches = Vec::with_capacity(self.config.depth);
        for (level, d) in self.decoders.iter().enumerate().rev() {
            let (u, upsample) = upsample2x_forward(&h);
            let (u, up) = block_forward(&u, &d.up, training)?;
            let skip = &skips[level];
            let cat = skip.concat_channels(&u)?;
            let (a, block1) = block_forward(&cat, &d.block1, training)?;
            let (out, block2) = block_forward(&a, &d.block2, training)?;
            dec_caches.push(DecoderCache {
                upsample,
                up,
                skip_channels: skip.shape().c,
                block1,
                block2,
            });
            h = out;
        }
        dec_caches.reverse();
        let (logits, head) = conv2d_forward(&h, &self.head, 1, 0)?;
        let cache = ForwardCache {
            config: self.config,
            input_shape: x.shape(),
            encoders: enc_caches,
            bottleneck,
            decoders: dec_caches,
            head,
        };
        Ok((logits, cache))
    }

    /// Training-mode forward that also folds batch statistics into every
    /// batch norm's running estimates.
    pub fn forward_train(&mut self, x: &Tensor<T>) -> Result<(Tensor<T>, ForwardCache<T>)> {
        let (logits, cache) = self.forward(x, true)?;
        self.update_running_stats(&cache);
        Ok((logits, cache))
    }

    pub fn update_running_stats(&mut self, cache: &ForwardCache<T>) {
        for (e, c) in self.encoders.iter_mut().zip(&cache.encoders) {
            e.block1.bn.update_running(&c.block1.bn);
            e.block2.bn.update_running(&c.block2.bn);
        }
        self.bottleneck.block1.bn.update_running(&cache.bottleneck.block1.bn);
        self.bottleneck.block2.bn.update_running(&cache.bottleneck.block2.bn);
        for (d, c) in self.decoders.iter_mut().zip(&cache.decoders) {
            d.up.bn.update_running(&c.up.bn);
            d.block1.bn.update_running(&c.block1.bn);
            d.block2.bn.update_running(&c.block2.bn);
        }
    }

    /// Inference-mode logits.
    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward(x, false)?.0)
    }

    pub fn backward(&self, cache: &ForwardCache<T>, grad_logits: &Tensor<T>) -> Result<GradientSet<T>> {
        Ok(self.backward_with_input(cache, grad_logits)?.0)
    }

    /// Parameter gradients and the gradient with respect to the input.
    pub fn backward_with_input(
        &self,
        cache: &ForwardCache<T>,
        grad_logits: &Tensor<T>,
    ) -> Result<(GradientSet<T>, Tensor<T>)> {
        if cache.config != self.config
            || cache.encoders.len() != self.encoders.len()
            || cache.decoders.len() != self.decoders.len()
        {
            return Err(Error::State("forward cache belongs to a different network".into()));
        }
        if grad_logits.shape() != cache.head.out_shape() {
            return Err(Error::State(format!(
                "logit gradient {:?} does not match forward output {:?}",
                grad_logits.shape(),
                cache.head.out_shape()
            )));
        }
        let mut grads = self.clone();

        let head = conv2d_backward(grad_logits, &cache.head, &self.head)?;
        grads.head.weight = head.grad_w;
        grads.head.bias = head.grad_b;
        let mut g = head.grad_x;

        let mut skip_grads = Vec::with_capacity(self.config.depth);
        for (level, (d, c)) in self.decoders.iter().zip(&cache.decoders).enumerate() {
            let gd = &mut grads.decoders[level];
            let g2 = block_backward(&g, &c.block2, &d.block2, &mut gd.block2)?;
            let gcat = block_backward(&g2, &c.block1, &d.block1, &mut gd.block1)?;
            let total = gcat.shape().c;
            skip_grads.push(gcat.slice_channels(0, c.skip_channels)?);
            let gup = gcat.slice_channels(c.skip_channels, total)?;
            let gup = block_backward(&gup, &c.up, &d.up, &mut gd.up)?;
            g = upsample2x_backward(&gup, &c.upsample)?;
        }

        let gb = &mut grads.bottleneck;
        let c = &cache.bottleneck;
        let g2 = block_backward(&g, &c.block2, &self.bottleneck.block2, &mut gb.block2)?;
        g = block_backward(&g2, &c.block1, &self.bottleneck.block1, &mut gb.block1)?;

        for level in (0..self.config.depth).rev() {
            let c = &cache.encoders[level];
            let e = &self.encoders[level];
            let pool = c
                .pool
                .as_ref()
                .ok_or_else(|| Error::State("encoder cache without pooling".into()))?;
            let mut gskip = maxpool2d_backward(&g, pool)?;
            gskip.add_assign(&skip_grads[level])?;
            let ge = &mut grads.encoders[level];
            let g1 = block_backward(&gskip, &c.block2, &e.block2, &mut ge.block2)?;
            g = block_backward(&g1, &c.block1, &e.block1, &mut ge.block1)?;
        }
        if g.shape() != cache.input_shape {
            return Err(Error::State("input gradient shape mismatch".into()));
        }

        let entries = grads
            .params()
            .into_iter()
            .filter(|p| p.kind == ParamKind::Trainable)
            .map(|p| GradEntry {
                name: p.name,
                dims: p.dims,
                values: p.data.to_vec(),
            })
            .collect();
        Ok((GradientSet { entries }, g))
    }
}

impl<T: Scalar> fmt::Display for UNetModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.config;
        write!(
            f,
            "U-Net depth {} base {} in {} classes {} patch {} ({} parameters)",
            c.depth,
            c.base_filters,
            c.input_channels,
            c.num_classes,
            c.patch_size,
            self.parameter_count()
        )
    }
}
