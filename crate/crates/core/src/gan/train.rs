//! Alternating minimax training over two balanced unpaired image collections.
//!
//! Each step performs one generator update (both generators, driven by the
//! two adversarial terms and the weighted cycle term) followed by one update
//! of each discriminator, then records the step's loss bundle. Training is a
//! single-writer loop; with a fixed seed the whole run is bit-reproducible.

use super::build::{build_discriminator, build_generator, Discriminator, Generator};
use super::losses::{
    adversarial_loss_from_scores, disc_loss_and_grads, gen_adv_loss_and_grad, l1_grad,
    mean_abs_diff, total_loss,
};
use super::pool::ImagePool;
use super::{DiscriminatorSpec, GanHyperparams, GeneratorSpec, TranslationModel};
use crate::data::{load_sample, preprocess_to, DatasetManifest};
use crate::error::{Error, Result};
use crate::nn::optim::Adam;
use crate::nn::{zero_grads, Layer};
use crate::scalar::Scalar;
use crate::Real;
use ndarray::{concatenate, Array4, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::path::{Path, PathBuf};

/// Knobs that are not model hyperparameters: checkpointing and the working
/// resolution used when materializing manifests into tensors.
#[derive(Debug, Clone)]
pub struct TrainOptions {
    /// Side length images are preprocessed to before training.
    pub image_size: usize,
    pub checkpoint_every: Option<usize>,
    pub checkpoint_dir: Option<PathBuf>,
    /// Print a progress line every this many steps (0 silences).
    pub log_every: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            image_size: crate::data::PREPROCESS_SIZE,
            checkpoint_every: None,
            checkpoint_dir: None,
            log_every: 0,
        }
    }
}

/// Load every record of a manifest as a `1 x C x H x W` tensor in `[-1, 1]`.
pub fn load_domain(
    manifest: &DatasetManifest,
    root: &Path,
    image_size: usize,
) -> Result<Vec<Array4<Real>>> {
    let mut out = Vec::with_capacity(manifest.len());
    for record in &manifest.records {
        let sample = load_sample(root, record)?;
        let sample = preprocess_to(&sample, image_size)?;
        out.push(to_signed_tensor(&sample.pixels));
    }
    Ok(out)
}

/// `H x W x C` in `[0, 1]` to `1 x C x H x W` in `[-1, 1]`.
pub fn to_signed_tensor(pixels: &ndarray::Array3<Real>) -> Array4<Real> {
    let (h, w, c) = pixels.dim();
    Array4::from_shape_fn((1, c, h, w), |(_, ci, y, x)| pixels[[y, x, ci]] * 2.0 - 1.0)
}

/// `1 x C x H x W` in `(-1, 1)` back to `H x W x C` in `[0, 1]`.
pub fn to_unit_pixels(tensor: &Array4<Real>, index: usize) -> ndarray::Array3<Real> {
    let (_, c, h, w) = tensor.dim();
    ndarray::Array3::from_shape_fn((h, w, c), |(y, x, ci)| {
        ((tensor[[index, ci, y, x]] + 1.0) / 2.0).clamp(0.0, 1.0)
    })
}

struct BatchCursor {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha20Rng,
}

impl BatchCursor {
    fn new(len: usize, seed: u64) -> Self {
        let mut cursor = BatchCursor {
            order: (0..len).collect(),
            pos: 0,
            rng: ChaCha20Rng::seed_from_u64(seed),
        };
        cursor.reshuffle();
        cursor
    }

    fn reshuffle(&mut self) {
        crate::nn::init::shuffle(&mut self.order, &mut self.rng);
        self.pos = 0;
    }

    fn next_batch(&mut self, images: &[Array4<Real>], batch_size: usize) -> Array4<Real> {
        let mut views = Vec::with_capacity(batch_size);
        let mut picked = Vec::with_capacity(batch_size);
        for _ in 0..batch_size {
            if self.pos >= self.order.len() {
                self.reshuffle();
            }
            picked.push(self.order[self.pos]);
            self.pos += 1;
        }
        for &idx in &picked {
            views.push(images[idx].view());
        }
        concatenate(Axis(0), &views).expect("batch concat")
    }
}

/// Train a translation model on two preprocessed, balanced manifests.
/// `domain_a` is the majority (source) class, `domain_b` the minority
/// (target); the caller balances them with `undersample_majority` first.
pub fn train_translation(
    domain_a: &DatasetManifest,
    root_a: &Path,
    domain_b: &DatasetManifest,
    root_b: &Path,
    gen_spec: &GeneratorSpec,
    disc_spec: &DiscriminatorSpec,
    hp: &GanHyperparams,
    opts: &TrainOptions,
) -> Result<TranslationModel<Real>> {
    hp.validate()?;
    if domain_a.is_empty() || domain_b.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if domain_a.len() != domain_b.len() {
        return Err(Error::InvalidSpec(format!(
            "domains must be balanced before training (got {} vs {}); \
             apply undersample_majority first",
            domain_a.len(),
            domain_b.len()
        )));
    }
    let images_a = load_domain(domain_a, root_a, opts.image_size)?;
    let images_b = load_domain(domain_b, root_b, opts.image_size)?;
    let mut model = init_model(gen_spec, disc_spec, hp)?;
    run_steps(&mut model, &images_a, &images_b, hp.total_steps, opts)?;
    Ok(model)
}

/// Fresh model with seed-derived initialization for all four networks.
pub fn init_model(
    gen_spec: &GeneratorSpec,
    disc_spec: &DiscriminatorSpec,
    hp: &GanHyperparams,
) -> Result<TranslationModel<Real>> {
    Ok(TranslationModel {
        g_a_to_b: build_generator(gen_spec, hp.seed)?,
        g_b_to_a: build_generator(gen_spec, hp.seed.wrapping_add(1))?,
        d_a: build_discriminator(disc_spec, hp.seed.wrapping_add(2))?,
        d_b: build_discriminator(disc_spec, hp.seed.wrapping_add(3))?,
        hyperparams: *hp,
        step_count: 0,
        loss_history: Vec::new(),
    })
}

/// Continue training an existing model in place for `steps` steps.
pub fn run_steps(
    model: &mut TranslationModel<Real>,
    images_a: &[Array4<Real>],
    images_b: &[Array4<Real>],
    steps: usize,
    opts: &TrainOptions,
) -> Result<()> {
    let hp = model.hyperparams;
    let mode = hp.adversarial_mode;
    let lambda = Real::cast(hp.lambda_cycle);

    let mut cursor_a = BatchCursor::new(images_a.len(), hp.seed.wrapping_add(10));
    let mut cursor_b = BatchCursor::new(images_b.len(), hp.seed.wrapping_add(11));
    let mut pool_a = ImagePool::<Real>::new(hp.image_pool_size, hp.seed.wrapping_add(20));
    let mut pool_b = ImagePool::<Real>::new(hp.image_pool_size, hp.seed.wrapping_add(21));
    let mut opt_g = Adam::<Real>::new(hp.learning_rate).with_beta1(0.5);
    let mut opt_d_a = Adam::<Real>::new(hp.learning_rate).with_beta1(0.5);
    let mut opt_d_b = Adam::<Real>::new(hp.learning_rate).with_beta1(0.5);

    // Both generators are updated from one accumulated gradient pass, so they
    // share an optimizer through a pair wrapper.
    for _ in 0..steps {
        let step = model.step_count;
        let a = cursor_a.next_batch(images_a, hp.batch_size);
        let b = cursor_b.next_batch(images_b, hp.batch_size);

        // ---- generator update ----
        zero_grads(&mut model.g_a_to_b);
        zero_grads(&mut model.g_b_to_a);
        zero_grads(&mut model.d_a);
        zero_grads(&mut model.d_b);

        // Forward path 1: a -> fake_b -> rec_a, scored by D_B.
        let fake_b = model.g_a_to_b.forward(&a, true);
        let rec_a = model.g_b_to_a.forward(&fake_b, true);
        let cycle_a = mean_abs_diff(&rec_a, &a)?;
        let grad_rec_a = l1_grad(&rec_a, &a).mapv(|v| v * lambda);
        let grad_fake_b_cycle = model.g_b_to_a.backward(&grad_rec_a);
        let scores_fake_b = model.d_b.forward(&fake_b, true);
        let (_gen_adv_ab, grad_scores_fb) = gen_adv_loss_and_grad(&scores_fake_b, mode);
        let grad_fake_b_adv = model.d_b.backward(&grad_scores_fb);
        let grad_fake_b = &grad_fake_b_cycle + &grad_fake_b_adv;
        model.g_a_to_b.backward(&grad_fake_b);

        // Forward path 2: b -> fake_a -> rec_b, scored by D_A.
        let fake_a = model.g_b_to_a.forward(&b, true);
        let rec_b = model.g_a_to_b.forward(&fake_a, true);
        let cycle_b = mean_abs_diff(&rec_b, &b)?;
        let grad_rec_b = l1_grad(&rec_b, &b).mapv(|v| v * lambda);
        let grad_fake_a_cycle = model.g_a_to_b.backward(&grad_rec_b);
        let scores_fake_a = model.d_a.forward(&fake_a, true);
        let (_gen_adv_ba, grad_scores_fa) = gen_adv_loss_and_grad(&scores_fake_a, mode);
        let grad_fake_a_adv = model.d_a.backward(&grad_scores_fa);
        let grad_fake_a = &grad_fake_a_cycle + &grad_fake_a_adv;
        model.g_b_to_a.backward(&grad_fake_a);

        // One optimizer step over both generators (shared state via pair).
        {
            let mut pair = GeneratorPair {
                a_to_b: &mut model.g_a_to_b,
                b_to_a: &mut model.g_b_to_a,
            };
            opt_g.step(&mut pair);
        }

        // ---- bundle (post-generator-update scores are not needed; the
        // recorded adversarial values use this step's discriminators on this
        // step's real and translated batches) ----
        let scores_real_b = model.d_b.forward(&b, false);
        let adv_a_to_b = adversarial_loss_from_scores(&scores_real_b, &scores_fake_b, mode)?;
        let scores_real_a = model.d_a.forward(&a, false);
        let adv_b_to_a = adversarial_loss_from_scores(&scores_real_a, &scores_fake_a, mode)?;
        let bundle = total_loss(step, adv_a_to_b, adv_b_to_a, cycle_a + cycle_b, hp.lambda_cycle);
        if !bundle.total.is_finite() {
            let detail = format!(
                "adv_a_to_b={}, adv_b_to_a={}, cycle={}",
                bundle.adv_a_to_b, bundle.adv_b_to_a, bundle.cycle
            );
            if let Some(dir) = &opts.checkpoint_dir {
                let _ = super::checkpoint::save_model(model, &dir.join("diverged.ckpt"));
            }
            return Err(Error::NonFiniteLoss { step, detail });
        }
        model.loss_history.push(bundle);

        // ---- discriminator updates (pooled fakes) ----
        let pooled_fake_b = pool_b.query(fake_b);
        update_discriminator(&mut model.d_b, &b, &pooled_fake_b, mode, &mut opt_d_b);
        let pooled_fake_a = pool_a.query(fake_a);
        update_discriminator(&mut model.d_a, &a, &pooled_fake_a, mode, &mut opt_d_a);

        model.step_count += 1;

        if opts.log_every > 0 && model.step_count % opts.log_every == 0 {
            eprintln!(
                "step {:>6}: adv {:.4}/{:.4} cycle {:.4} total {:.4}",
                model.step_count, bundle.adv_a_to_b, bundle.adv_b_to_a, bundle.cycle, bundle.total
            );
        }
        if let (Some(every), Some(dir)) = (opts.checkpoint_every, &opts.checkpoint_dir) {
            if every > 0 && model.step_count % every == 0 {
                super::checkpoint::save_model(
                    model,
                    &dir.join(format!("step_{:06}.ckpt", model.step_count)),
                )?;
            }
        }
    }
    Ok(())
}

fn update_discriminator(
    disc: &mut Discriminator<Real>,
    real: &Array4<Real>,
    fake: &Array4<Real>,
    mode: super::AdversarialMode,
    opt: &mut Adam<Real>,
) {
    zero_grads(disc);
    // One forward over the concatenated batch keeps the per-layer caches
    // coherent for a single backward pass.
    let joined = concatenate(Axis(0), &[real.view(), fake.view()]).expect("disc batch");
    let scores = disc.forward(&joined, true);
    let n_real = real.dim().0;
    let real_scores = scores.slice(ndarray::s![0..n_real, .., .., ..]).to_owned();
    let fake_scores = scores.slice(ndarray::s![n_real.., .., .., ..]).to_owned();
    let (_loss, d_real, d_fake) = disc_loss_and_grads(&real_scores, &fake_scores, mode);
    let grad = concatenate(Axis(0), &[d_real.view(), d_fake.view()]).expect("disc grad");
    disc.backward(&grad);
    opt.step(disc);
}

/// Presents both generators as one parameter tree so a single optimizer
/// updates them jointly.
struct GeneratorPair<'m> {
    a_to_b: &'m mut Generator<Real>,
    b_to_a: &'m mut Generator<Real>,
}

impl<'m> Layer<Real> for GeneratorPair<'m> {
    fn forward(&mut self, _x: &Array4<Real>, _train: bool) -> Array4<Real> {
        unreachable!("optimizer-only wrapper")
    }
    fn backward(&mut self, _grad_out: &Array4<Real>) -> Array4<Real> {
        unreachable!("optimizer-only wrapper")
    }
    fn visit_params(&mut self, prefix: &str, f: &mut crate::nn::ParamVisitor<'_, Real>) {
        self.a_to_b.visit_params(&format!("{prefix}g_a_to_b."), f);
        self.b_to_a.visit_params(&format!("{prefix}g_b_to_a."), f);
    }
}
