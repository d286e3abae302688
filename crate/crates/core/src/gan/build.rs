//! Generator and discriminator construction with deterministic, seeded
//! initialization (normal, std 0.02, the convention for this model family).

use super::{DiscriminatorSpec, GeneratorSpec};
use crate::error::Result;
use crate::nn::init::NormalSource;
use crate::nn::{
    BufferVisitor, Conv2d, InstanceNorm2d, Layer, LeakyRelu, ParamVisitor, Relu, Residual,
    Sequential, Sigmoid, Tanh, Upsample2x,
};
use crate::scalar::Scalar;
use ndarray::Array4;

const INIT_STD: f64 = 0.02;

pub struct Generator<F: Scalar> {
    pub spec: GeneratorSpec,
    net: Sequential<F>,
}

pub struct Discriminator<F: Scalar> {
    pub spec: DiscriminatorSpec,
    net: Sequential<F>,
}

macro_rules! delegate_layer {
    ($ty:ident) => {
        impl<F: Scalar> Layer<F> for $ty<F> {
            fn forward(&mut self, x: &Array4<F>, train: bool) -> Array4<F> {
                self.net.forward(x, train)
            }
            fn backward(&mut self, grad_out: &Array4<F>) -> Array4<F> {
                self.net.backward(grad_out)
            }
            fn visit_params(&mut self, prefix: &str, f: &mut ParamVisitor<'_, F>) {
                self.net.visit_params(prefix, f);
            }
            fn visit_buffers(&mut self, prefix: &str, f: &mut BufferVisitor<'_, F>) {
                self.net.visit_buffers(prefix, f);
            }
        }
    };
}

delegate_layer!(Generator);
delegate_layer!(Discriminator);

fn conv_in_relu<F: Scalar>(
    seq: &mut Sequential<F>,
    name: &str,
    in_ch: usize,
    out_ch: usize,
    k: usize,
    s: usize,
    p: usize,
    rng: &mut NormalSource,
) {
    seq.push(&format!("{name}_conv"), Conv2d::new(in_ch, out_ch, k, s, p, true, INIT_STD, rng));
    seq.push(&format!("{name}_norm"), InstanceNorm2d::new(out_ch));
    seq.push(&format!("{name}_relu"), Relu::new());
}

/// Build a generator with deterministic initialization. The forward map takes
/// `N x C x H x W` in `[-1, 1]` to the same shape in `(-1, 1)`; `H` and `W`
/// must be divisible by 4.
pub fn build_generator<F: Scalar>(spec: &GeneratorSpec, seed: u64) -> Result<Generator<F>> {
    spec.validate()?;
    let mut rng = NormalSource::new(seed);
    let w = spec.base_width;
    let c = spec.input_channels;
    let mut net = Sequential::new();
    // Stem at full resolution.
    conv_in_relu(&mut net, "stem", c, w, 7, 1, 3, &mut rng);
    // Two stride-2 downsamplings.
    conv_in_relu(&mut net, "down1", w, 2 * w, 3, 2, 1, &mut rng);
    conv_in_relu(&mut net, "down2", 2 * w, 4 * w, 3, 2, 1, &mut rng);
    // Residual blocks at the bottleneck.
    for i in 0..spec.residual_blocks {
        let mut body = Sequential::new();
        conv_in_relu(&mut body, "a", 4 * w, 4 * w, 3, 1, 1, &mut rng);
        body.push("b_conv", Conv2d::new(4 * w, 4 * w, 3, 1, 1, true, INIT_STD, &mut rng));
        body.push("b_norm", InstanceNorm2d::new(4 * w));
        net.push(&format!("res{i}"), Residual::new(body));
    }
    // Two upsamplings back to full resolution.
    net.push("up1_resize", Upsample2x::new());
    conv_in_relu(&mut net, "up1", 4 * w, 2 * w, 3, 1, 1, &mut rng);
    net.push("up2_resize", Upsample2x::new());
    conv_in_relu(&mut net, "up2", 2 * w, w, 3, 1, 1, &mut rng);
    // Output head.
    net.push("head_conv", Conv2d::new(w, c, 7, 1, 3, true, INIT_STD, &mut rng));
    net.push("head_tanh", Tanh::new());
    Ok(Generator { spec: *spec, net })
}

/// Receptive field in pixels of one output score for a scorer with
/// `layers - 1` stride-2 convs, one stride-1 conv, and the 1-channel output
/// conv, all with 4 x 4 kernels.
pub fn receptive_field(layers: usize) -> usize {
    let mut rf = 1usize;
    // Walk backward from the output: conv(k=4, s=1) twice, then stride-2s.
    rf = rf + 3; // output conv
    rf = rf + 3; // last stride-1 stage
    for _ in 0..layers.saturating_sub(1) {
        rf = rf * 2 + 2; // k=4, s=2
    }
    rf
}

/// Build a patch discriminator. Scores come out of a sigmoid, one grid cell
/// per receptive-field patch.
pub fn build_discriminator<F: Scalar>(
    spec: &DiscriminatorSpec,
    seed: u64,
) -> Result<Discriminator<F>> {
    spec.validate()?;
    let mut rng = NormalSource::new(seed);
    let mut net = Sequential::new();
    let mut in_ch = spec.input_channels;
    let mut out_ch = spec.base_width;
    for i in 0..spec.layers {
        let stride = if i + 1 < spec.layers { 2 } else { 1 };
        net.push(
            &format!("c{i}_conv"),
            Conv2d::new(in_ch, out_ch, 4, stride, 1, true, INIT_STD, &mut rng),
        );
        if i > 0 {
            net.push(&format!("c{i}_norm"), InstanceNorm2d::new(out_ch));
        }
        net.push(&format!("c{i}_lrelu"), LeakyRelu::new(0.2));
        in_ch = out_ch;
        out_ch = (out_ch * 2).min(spec.base_width * 8);
    }
    net.push("score_conv", Conv2d::new(in_ch, 1, 4, 1, 1, true, INIT_STD, &mut rng));
    net.push("score_sigmoid", Sigmoid::new());
    Ok(Discriminator { spec: *spec, net })
}

impl<F: Scalar> Discriminator<F> {
    /// Zero every parameter; the sigmoid then scores 0.5 everywhere, which is
    /// the analytic stub case for the adversarial-loss oracle.
    pub fn zero_parameters(&mut self) {
        self.net
            .visit_params("", &mut |_, mut value, _| value.fill(F::zero()));
    }
}
