//! Backbone builders. Every classifier is backbone -> global average pooling
//! -> two-unit dense head; softmax happens in the loss / prediction code.
//! Without pretrained weights available, backbones initialize with seeded He
//! weights; checkpoints can be loaded over them.

use super::{Backbone, TrainingConfig};
use crate::error::{Error, Result};
use crate::nn::init::{he_std, NormalSource};
use crate::nn::{
    AvgPool2d, BatchNorm2d, BufferVisitor, Conv2d, Dense, GlobalAvgPool, Layer, MaxPool2d,
    ParamVisitor, Relu, Sequential,
};
use crate::scalar::Scalar;
use crate::Real;
use ndarray::{concatenate, Array4, Axis};

/// Residual block with an optional projection shortcut and a ReLU after the
/// addition.
pub struct SkipBlock<F: Scalar> {
    body: Sequential<F>,
    shortcut: Option<Sequential<F>>,
    cache_sum: Option<Array4<F>>,
}

impl<F: Scalar> SkipBlock<F> {
    pub fn new(body: Sequential<F>, shortcut: Option<Sequential<F>>) -> Self {
        SkipBlock {
            body,
            shortcut,
            cache_sum: None,
        }
    }
}

impl<F: Scalar> Layer<F> for SkipBlock<F> {
    fn forward(&mut self, x: &Array4<F>, train: bool) -> Array4<F> {
        let mut sum = self.body.forward(x, train);
        match &mut self.shortcut {
            Some(sc) => sum += &sc.forward(x, train),
            None => sum += x,
        }
        if train {
            self.cache_sum = Some(sum.clone());
        }
        sum.mapv(|v| if v > F::zero() { v } else { F::zero() })
    }

    fn backward(&mut self, grad_out: &Array4<F>) -> Array4<F> {
        let sum = self
            .cache_sum
            .as_ref()
            .expect("skip block backward without forward");
        let mut grad = grad_out.clone();
        grad.zip_mut_with(sum, |g, &v| {
            if v <= F::zero() {
                *g = F::zero();
            }
        });
        let mut dx = self.body.backward(&grad);
        match &mut self.shortcut {
            Some(sc) => dx += &sc.backward(&grad),
            None => dx += &grad,
        }
        dx
    }

    fn visit_params(&mut self, prefix: &str, f: &mut ParamVisitor<'_, F>) {
        self.body.visit_params(&format!("{prefix}body."), f);
        if let Some(sc) = &mut self.shortcut {
            sc.visit_params(&format!("{prefix}shortcut."), f);
        }
    }

    fn visit_buffers(&mut self, prefix: &str, f: &mut BufferVisitor<'_, F>) {
        self.body.visit_buffers(&format!("{prefix}body."), f);
        if let Some(sc) = &mut self.shortcut {
            sc.visit_buffers(&format!("{prefix}shortcut."), f);
        }
    }
}

/// Densely connected block: each unit consumes the concatenation of the block
/// input and all previous unit outputs, and contributes `growth` channels.
pub struct DenseBlock<F: Scalar> {
    units: Vec<Sequential<F>>,
    growth: usize,
}

impl<F: Scalar> DenseBlock<F> {
    pub fn new(units: Vec<Sequential<F>>, growth: usize) -> Self {
        DenseBlock { units, growth }
    }
}

impl<F: Scalar> Layer<F> for DenseBlock<F> {
    fn forward(&mut self, x: &Array4<F>, train: bool) -> Array4<F> {
        let mut features = x.clone();
        for unit in &mut self.units {
            let new = unit.forward(&features, train);
            features = concatenate(Axis(1), &[features.view(), new.view()]).expect("dense concat");
        }
        features
    }

    fn backward(&mut self, grad_out: &Array4<F>) -> Array4<F> {
        let mut grad = grad_out.clone();
        for unit in self.units.iter_mut().rev() {
            let channels = grad.dim().1;
            let split = channels - self.growth;
            let g_prev = grad.slice(ndarray::s![.., 0..split, .., ..]).to_owned();
            let g_new = grad.slice(ndarray::s![.., split.., .., ..]).to_owned();
            let mut g_input = unit.backward(&g_new);
            g_input += &g_prev;
            grad = g_input;
        }
        grad
    }

    fn visit_params(&mut self, prefix: &str, f: &mut ParamVisitor<'_, F>) {
        for (i, unit) in self.units.iter_mut().enumerate() {
            unit.visit_params(&format!("{prefix}unit{i}."), f);
        }
    }

    fn visit_buffers(&mut self, prefix: &str, f: &mut BufferVisitor<'_, F>) {
        for (i, unit) in self.units.iter_mut().enumerate() {
            unit.visit_buffers(&format!("{prefix}unit{i}."), f);
        }
    }
}

/// Extension point for alternative classification heads operating on pooled
/// backbone features (ensemble heads and the like). No implementation ships;
/// the built-in two-unit dense softmax head is the default path.
pub trait FeatureHead: Send {
    /// Map `N x feature_dim` pooled features to `N x 2` class probabilities
    /// (rows must sum to one).
    fn predict(&mut self, features: &ndarray::Array2<Real>) -> ndarray::Array2<Real>;
}

/// Backbone + GAP + two-unit head. The head is the only trainable part beyond
/// the backbone; the pooling layer has no parameters.
pub struct ClassifierNet {
    pub backbone_id: Backbone,
    pub backbone: Sequential<Real>,
    pub gap: GlobalAvgPool<Real>,
    pub head: Dense<Real>,
    pub feature_dim: usize,
}

impl ClassifierNet {
    /// Backbone features after global average pooling, one row per sample.
    pub fn features(&mut self, x: &Array4<Real>, train: bool) -> ndarray::Array2<Real> {
        let maps = self.backbone.forward(x, train);
        let pooled = self.gap.forward(&maps, train);
        let (n, c, _, _) = pooled.dim();
        pooled
            .into_shape_with_order((n, c))
            .expect("feature reshape")
    }

    /// Raw two-unit logits.
    pub fn logits(&mut self, x: &Array4<Real>, train: bool) -> ndarray::Array2<Real> {
        let maps = self.backbone.forward(x, train);
        let pooled = self.gap.forward(&maps, train);
        let out = self.head.forward(&pooled, train);
        let (n, c, _, _) = out.dim();
        out.into_shape_with_order((n, c)).expect("logit reshape")
    }

    pub fn head_param_count(&mut self) -> usize {
        crate::nn::param_count(&mut self.head)
    }

    /// Run the backbone and pooling, then a caller-supplied head instead of
    /// the built-in dense layer.
    pub fn predict_with_head(
        &mut self,
        x: &Array4<Real>,
        head: &mut dyn FeatureHead,
    ) -> ndarray::Array2<Real> {
        let features = self.features(x, false);
        head.predict(&features)
    }

    pub fn zero_head(&mut self) {
        self.head.zero_parameters();
    }
}

impl Layer<Real> for ClassifierNet {
    fn forward(&mut self, x: &Array4<Real>, train: bool) -> Array4<Real> {
        let maps = self.backbone.forward(x, train);
        let pooled = self.gap.forward(&maps, train);
        self.head.forward(&pooled, train)
    }

    fn backward(&mut self, grad_out: &Array4<Real>) -> Array4<Real> {
        let g = self.head.backward(grad_out);
        let g = self.gap.backward(&g);
        self.backbone.backward(&g)
    }

    fn visit_params(&mut self, prefix: &str, f: &mut ParamVisitor<'_, Real>) {
        self.backbone.visit_params(&format!("{prefix}backbone."), f);
        self.head.visit_params(&format!("{prefix}head."), f);
    }

    fn visit_buffers(&mut self, prefix: &str, f: &mut BufferVisitor<'_, Real>) {
        self.backbone.visit_buffers(&format!("{prefix}backbone."), f);
    }
}

const INPUT_CHANNELS: usize = 3;

fn conv_he(
    in_ch: usize,
    out_ch: usize,
    k: usize,
    s: usize,
    p: usize,
    rng: &mut NormalSource,
) -> Conv2d<Real> {
    Conv2d::new(in_ch, out_ch, k, s, p, true, he_std(in_ch * k * k), rng)
}

fn custom_backbone(rng: &mut NormalSource) -> (Sequential<Real>, usize) {
    // Four stride-2 conv blocks; trains from scratch in seconds at toy sizes.
    let mut seq = Sequential::new();
    let widths = [16usize, 32, 64, 128];
    let mut in_ch = INPUT_CHANNELS;
    for (i, &w) in widths.iter().enumerate() {
        seq.push(&format!("block{i}_conv"), conv_he(in_ch, w, 3, 2, 1, rng));
        seq.push(&format!("block{i}_relu"), Relu::new());
        in_ch = w;
    }
    (seq, in_ch)
}

fn vgg16_backbone(rng: &mut NormalSource) -> (Sequential<Real>, usize) {
    let plan: &[&[usize]] = &[&[64, 64], &[128, 128], &[256, 256, 256], &[512, 512, 512], &[512, 512, 512]];
    let mut seq = Sequential::new();
    let mut in_ch = INPUT_CHANNELS;
    for (bi, block) in plan.iter().enumerate() {
        for (ci, &w) in block.iter().enumerate() {
            seq.push(&format!("b{bi}c{ci}_conv"), conv_he(in_ch, w, 3, 1, 1, rng));
            seq.push(&format!("b{bi}c{ci}_relu"), Relu::new());
            in_ch = w;
        }
        seq.push(&format!("b{bi}_pool"), MaxPool2d::new(2, 2, 0));
    }
    (seq, in_ch)
}

fn bottleneck(
    in_ch: usize,
    mid: usize,
    out: usize,
    stride: usize,
    rng: &mut NormalSource,
) -> SkipBlock<Real> {
    let mut body = Sequential::new();
    body.push("reduce_conv", conv_he(in_ch, mid, 1, 1, 0, rng));
    body.push("reduce_bn", BatchNorm2d::new(mid));
    body.push("reduce_relu", Relu::new());
    body.push("mid_conv", conv_he(mid, mid, 3, stride, 1, rng));
    body.push("mid_bn", BatchNorm2d::new(mid));
    body.push("mid_relu", Relu::new());
    body.push("expand_conv", conv_he(mid, out, 1, 1, 0, rng));
    body.push("expand_bn", BatchNorm2d::new(out));
    let shortcut = if in_ch != out || stride != 1 {
        let mut sc = Sequential::new();
        sc.push("proj_conv", conv_he(in_ch, out, 1, stride, 0, rng));
        sc.push("proj_bn", BatchNorm2d::new(out));
        Some(sc)
    } else {
        None
    };
    SkipBlock::new(body, shortcut)
}

fn resnet50_backbone(rng: &mut NormalSource) -> (Sequential<Real>, usize) {
    let mut seq = Sequential::new();
    seq.push("stem_conv", conv_he(INPUT_CHANNELS, 64, 7, 2, 3, rng));
    seq.push("stem_bn", BatchNorm2d::new(64));
    seq.push("stem_relu", Relu::new());
    seq.push("stem_pool", MaxPool2d::new(3, 2, 1));
    let stages: [(usize, usize, usize, usize); 4] = [
        (3, 64, 256, 1),
        (4, 128, 512, 2),
        (6, 256, 1024, 2),
        (3, 512, 2048, 2),
    ];
    let mut in_ch = 64;
    for (si, &(blocks, mid, out, stride)) in stages.iter().enumerate() {
        for bi in 0..blocks {
            let s = if bi == 0 { stride } else { 1 };
            seq.push(
                &format!("s{si}b{bi}"),
                bottleneck(in_ch, mid, out, s, rng),
            );
            in_ch = out;
        }
    }
    (seq, in_ch)
}

fn densenet_unit(in_ch: usize, growth: usize, rng: &mut NormalSource) -> Sequential<Real> {
    let mut seq = Sequential::new();
    seq.push("bn1", BatchNorm2d::new(in_ch));
    seq.push("relu1", Relu::new());
    seq.push("conv1", conv_he(in_ch, 4 * growth, 1, 1, 0, rng));
    seq.push("bn2", BatchNorm2d::new(4 * growth));
    seq.push("relu2", Relu::new());
    seq.push("conv2", conv_he(4 * growth, growth, 3, 1, 1, rng));
    seq
}

fn densenet_blocks_for_depth(depth: usize) -> Result<&'static [usize]> {
    match depth {
        121 => Ok(&[6, 12, 24, 16]),
        169 => Ok(&[6, 12, 32, 32]),
        201 => Ok(&[6, 12, 48, 32]),
        other => Err(Error::Config(format!(
            "unsupported densenet depth {other}; supported: 121, 169, 201"
        ))),
    }
}

fn densenet_backbone(depth: usize, rng: &mut NormalSource) -> Result<(Sequential<Real>, usize)> {
    let growth = 32usize;
    let blocks = densenet_blocks_for_depth(depth)?;
    let mut seq = Sequential::new();
    let mut channels = 2 * growth;
    seq.push("stem_conv", conv_he(INPUT_CHANNELS, channels, 7, 2, 3, rng));
    seq.push("stem_bn", BatchNorm2d::new(channels));
    seq.push("stem_relu", Relu::new());
    seq.push("stem_pool", MaxPool2d::new(3, 2, 1));
    for (bi, &layers) in blocks.iter().enumerate() {
        let mut units = Vec::with_capacity(layers);
        for li in 0..layers {
            units.push(densenet_unit(channels + li * growth, growth, rng));
        }
        seq.push(&format!("dense{bi}"), DenseBlock::new(units, growth));
        channels += layers * growth;
        if bi + 1 < blocks.len() {
            let half = channels / 2;
            seq.push(&format!("trans{bi}_bn"), BatchNorm2d::new(channels));
            seq.push(&format!("trans{bi}_relu"), Relu::new());
            seq.push(&format!("trans{bi}_conv"), conv_he(channels, half, 1, 1, 0, rng));
            seq.push(&format!("trans{bi}_pool"), AvgPool2d::new(2, 2));
            channels = half;
        }
    }
    seq.push("final_bn", BatchNorm2d::new(channels));
    seq.push("final_relu", Relu::new());
    Ok((seq, channels))
}

/// Build an untrained classifier for a config: the named backbone, a GAP
/// layer, and a two-unit dense head. Initialization is deterministic per
/// seed. All layers are trainable.
pub fn build_classifier(config: &TrainingConfig) -> Result<ClassifierNet> {
    config.validate()?;
    let mut rng = NormalSource::new(config.seed);
    let (backbone, feature_dim) = match config.backbone {
        Backbone::Custom => custom_backbone(&mut rng),
        Backbone::Vgg16 => vgg16_backbone(&mut rng),
        Backbone::Resnet50 => resnet50_backbone(&mut rng),
        Backbone::Densenet => densenet_backbone(config.densenet_depth, &mut rng)?,
    };
    let head = Dense::new(feature_dim, 2, he_std(feature_dim), &mut rng);
    Ok(ClassifierNet {
        backbone_id: config.backbone,
        backbone,
        gap: GlobalAvgPool::new(),
        head,
        feature_dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::loss::softmax;

    fn config(backbone: Backbone) -> TrainingConfig {
        TrainingConfig {
            backbone,
            ..TrainingConfig::default()
        }
    }

    #[test]
    fn custom_backbone_shapes_and_probabilities() {
        let mut net = build_classifier(&config(Backbone::Custom)).unwrap();
        let x = Array4::from_shape_fn((3, 3, 64, 64), |(n, c, y, xx)| {
            ((n + c + y + xx) % 7) as f32 / 7.0
        });
        let logits = net.logits(&x, false);
        assert_eq!(logits.dim(), (3, 2));
        let probs = softmax(&logits);
        for row in probs.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn gap_head_adds_only_dense_parameters() {
        let mut net = build_classifier(&config(Backbone::Custom)).unwrap();
        let backbone_params = crate::nn::param_count(&mut net.backbone);
        let gap_params = crate::nn::param_count(&mut net.gap);
        let total = crate::nn::param_count(&mut net);
        assert_eq!(gap_params, 0);
        assert_eq!(total - backbone_params, net.feature_dim * 2 + 2);
    }

    #[test]
    fn zeroed_head_gives_half_half() {
        let mut net = build_classifier(&config(Backbone::Custom)).unwrap();
        net.zero_head();
        let x = Array4::from_elem((2, 3, 32, 32), 0.4f32);
        let probs = softmax(&net.logits(&x, false));
        for row in probs.rows() {
            assert!((row[0] - 0.5).abs() < 1e-6);
            assert!((row[1] - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn pluggable_head_hook() {
        struct UniformHead;
        impl FeatureHead for UniformHead {
            fn predict(&mut self, features: &ndarray::Array2<f32>) -> ndarray::Array2<f32> {
                ndarray::Array2::from_elem((features.nrows(), 2), 0.5)
            }
        }
        let mut net = build_classifier(&config(Backbone::Custom)).unwrap();
        let x = Array4::from_elem((2, 3, 32, 32), 0.3f32);
        let probs = net.predict_with_head(&x, &mut UniformHead);
        assert_eq!(probs.dim(), (2, 2));
        assert!((probs.row(0).sum() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn unknown_densenet_depth_rejected() {
        let mut cfg = config(Backbone::Densenet);
        cfg.densenet_depth = 102;
        assert!(build_classifier(&cfg).is_err());
    }

    #[test]
    fn vgg16_full_resolution_contract() {
        // N x 256 x 256 x 3 in, N x 2 probabilities out.
        let mut net = build_classifier(&config(Backbone::Vgg16)).unwrap();
        assert_eq!(net.feature_dim, 512);
        let x = Array4::from_shape_fn((1, 3, 256, 256), |(_, c, y, xx)| {
            ((c + y + xx) % 11) as f32 / 11.0
        });
        let probs = softmax(&net.logits(&x, false));
        assert_eq!(probs.dim(), (1, 2));
        assert!((probs.row(0).sum() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn resnet50_small_input_forward() {
        let mut net = build_classifier(&config(Backbone::Resnet50)).unwrap();
        let x = Array4::from_elem((1, 3, 64, 64), 0.5f32);
        let logits = net.logits(&x, false);
        assert_eq!(logits.dim(), (1, 2));
        assert_eq!(net.feature_dim, 2048);
    }

    #[test]
    fn densenet121_small_input_forward() {
        let mut net = build_classifier(&config(Backbone::Densenet)).unwrap();
        let x = Array4::from_elem((1, 3, 64, 64), 0.5f32);
        let logits = net.logits(&x, false);
        assert_eq!(logits.dim(), (1, 2));
        assert_eq!(net.feature_dim, 1024);
    }
}
