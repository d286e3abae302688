//! Translation engine: two generators, two discriminators, the adversarial
//! and cycle-consistency losses, and the alternating minimax training loop
//! over balanced unpaired image collections.

pub mod build;
pub mod checkpoint;
pub mod losses;
pub mod pool;
pub mod train;
pub mod translate;

pub use build::{build_discriminator, build_generator, Discriminator, Generator};
pub use losses::{
    adversarial_loss, adversarial_loss_from_scores, cycle_loss, disc_loss_and_grads,
    gen_adv_loss_and_grad, l1_grad, total_loss,
};
pub use train::{train_translation, TrainOptions};
pub use translate::translate;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

/// Translation direction between the two image domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AToB,
    BToA,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversarialMode {
    /// The log-likelihood objective, implemented verbatim; used by the loss
    /// oracles. Generator updates use the non-saturating form.
    Log,
    /// Least-squares objective on the sigmoid score grid; the training
    /// default.
    LeastSquares,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    Tanh,
}

/// Generator architecture: stride-2 downsampling x2, residual blocks at the
/// bottleneck, nearest-upsample + conv x2, tanh output. Spatial size is
/// preserved end to end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub input_channels: usize,
    /// Feature maps in the first layer; doubled at each downsampling.
    pub base_width: usize,
    pub residual_blocks: usize,
    pub output_activation: OutputActivation,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            input_channels: 1,
            base_width: 64,
            residual_blocks: 9,
            output_activation: OutputActivation::Tanh,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.residual_blocks < 1 {
            return Err(Error::InvalidSpec(
                "generator needs at least one residual block".into(),
            ));
        }
        if self.input_channels == 0 || self.base_width == 0 {
            return Err(Error::InvalidSpec(
                "generator channels and width must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Patch discriminator: `layers` stride-2/stride-1 conv stages followed by a
/// one-channel score conv and a sigmoid, so the output is a grid of realness
/// scores in (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscriminatorSpec {
    pub input_channels: usize,
    pub layers: usize,
    pub base_width: usize,
    /// Receptive field of one output score, in input pixels. Derived from
    /// `layers`; stored for reporting.
    pub receptive_field: usize,
}

impl DiscriminatorSpec {
    pub fn new(input_channels: usize, layers: usize, base_width: usize) -> Self {
        DiscriminatorSpec {
            input_channels,
            layers,
            base_width,
            receptive_field: build::receptive_field(layers),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers < 1 || self.base_width == 0 || self.input_channels == 0 {
            return Err(Error::InvalidSpec("invalid discriminator spec".into()));
        }
        Ok(())
    }
}

impl Default for DiscriminatorSpec {
    fn default() -> Self {
        // The 4-layer, 70-pixel patch scorer.
        DiscriminatorSpec::new(1, 4, 64)
    }
}

/// Hyperparameters of one translation training run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GanHyperparams {
    /// Weight of the cycle-consistency term.
    pub lambda_cycle: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub total_steps: usize,
    pub adversarial_mode: AdversarialMode,
    /// Past generated samples kept for discriminator updates; 0 disables.
    pub image_pool_size: usize,
    pub seed: u64,
}

impl Default for GanHyperparams {
    fn default() -> Self {
        GanHyperparams {
            lambda_cycle: 10.0,
            learning_rate: 2e-4,
            batch_size: 1,
            total_steps: 0,
            adversarial_mode: AdversarialMode::LeastSquares,
            image_pool_size: 50,
            seed: 0,
        }
    }
}

impl GanHyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_cycle < 0.0 {
            return Err(Error::InvalidSpec("lambda_cycle must be >= 0".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::InvalidSpec("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// The three loss terms and their weighted sum for one training step.
/// `total` always recomputes exactly as `adv_a_to_b + adv_b_to_a +
/// lambda * cycle` in f64 arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GanLossBundle {
    pub step: usize,
    pub adv_a_to_b: f64,
    pub adv_b_to_a: f64,
    pub cycle: f64,
    pub total: f64,
}

impl GanLossBundle {
    pub fn recompute_total(&self, lambda: f64) -> f64 {
        self.adv_a_to_b + self.adv_b_to_a + lambda * self.cycle
    }
}

/// Two generators, two discriminators, and the training record.
pub struct TranslationModel<F: Scalar> {
    pub g_a_to_b: Generator<F>,
    pub g_b_to_a: Generator<F>,
    pub d_a: Discriminator<F>,
    pub d_b: Discriminator<F>,
    pub hyperparams: GanHyperparams,
    pub step_count: usize,
    pub loss_history: Vec<GanLossBundle>,
}
