use rand::Rng;

use super::checkpoint::{parameter_digest, Checkpoint};
use super::config::{Stage, TrainConfig};
use super::dataset::{load_samples, DatasetManifest, Sample};
use crate::error::{Error, Result};
use crate::imaging::{add_gaussian_noise, bicubic_resize, center_crop, images_to_tensor, random_paired_crop, Image};
use crate::losses::{
    adversarial_value, combine_d, combine_g, l_adversarial_g, l_mae, l_noise, l_trans_raw, LossBreakdown, TransMode,
};
use crate::models::{DiscSpre, DiscTrans, FeatureExtractor, Generator, Module};
use crate::seed;
use crate::tensor::{adam_step, clip_grad_norm, mean_abs_diff, no_grad, AdamState, Parameter, Tensor, WeightAverage};

/// Result of one training run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    /// One row per step.
    pub log: Vec<LossBreakdown>,
    /// Digest of every frozen tensor (feature extractor, Sobel kernels)
    /// before and after training.
    pub frozen_before: String,
    pub frozen_after: String,
    /// Feature-space distance between generator output and noise features
    /// on a fixed probe batch, before and after stage 2.
    pub noise_distance: Option<(f64, f64)>,
}

/// Per-step callback, e.g. for streaming the loss CSV.
pub type StepObserver<'a> = &'a mut dyn FnMut(u64, &LossBreakdown);

fn check_samples(samples: &[Sample], config: &TrainConfig, need_vis: bool) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Dataset(vec!["no training samples".into()]));
    }
    let mut problems = Vec::new();
    for s in samples {
        if s.hr.height() != config.scale * s.lr.height() || s.hr.width() != config.scale * s.lr.width() {
            problems.push(format!(
                "{}: HR {}x{} is not {}x its LR input (scale mismatch between data and config)",
                s.name,
                s.hr.height(),
                s.hr.width(),
                config.scale
            ));
        } else if s.lr.height() < config.lr_crop || s.lr.width() < config.lr_crop {
            problems.push(format!(
                "{}: LR {}x{} is smaller than the {} crop",
                s.name,
                s.lr.height(),
                s.lr.width(),
                config.lr_crop
            ));
        }
        if need_vis && s.vis_lr.is_none() {
            problems.push(format!("{}: stage 2 needs a visible image", s.name));
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Dataset(problems))
    }
}

/// `batch` random aligned crops. `pick` selects the LR source of a sample.
fn sample_batch(
    samples: &[Sample],
    config: &TrainConfig,
    stream: u64,
    pick: impl Fn(&Sample) -> &Image,
) -> Result<(Vec<Image>, Vec<Image>)> {
    let mut rng = seed::rng(stream);
    let mut lrs = Vec::with_capacity(config.batch);
    let mut hrs = Vec::with_capacity(config.batch);
    for _ in 0..config.batch {
        let s = &samples[rng.random_range(0..samples.len())];
        let (lr, hr, _) = random_paired_crop(pick(s), &s.hr, config.lr_crop, config.scale, rng.random())?;
        lrs.push(lr);
        hrs.push(hr);
    }
    Ok((lrs, hrs))
}

/// Noise-pattern input: the LR luma plus Gaussian noise, brought to the
/// HR extent so its features line up with the generator output.
fn noise_inputs(lrs: &[Image], sigma: f32, scale: usize, stream: u64) -> Result<Tensor> {
    let ups = lrs
        .iter()
        .enumerate()
        .map(|(i, lr)| {
            let noisy = add_gaussian_noise(lr, sigma, seed::derive_indexed(stream, "u", i as u64));
            bicubic_resize(&noisy, lr.height() * scale, lr.width() * scale)
        })
        .collect::<Result<Vec<_>>>()?;
    images_to_tensor(&ups)
}

fn clip(params: &[Parameter], max_norm: f32) {
    if max_norm > 0.0 {
        clip_grad_norm(params, max_norm);
    }
}

fn clear_grads(params: &[Parameter]) {
    params.iter().for_each(|p| p.tensor.zero_grad());
}

/// Stage 1 from a manifest.
pub fn train_stage1(manifest: &DatasetManifest, config: &TrainConfig) -> Result<TrainOutcome> {
    check_scale(manifest, config)?;
    train_stage1_on(&load_samples(manifest)?, config, &mut |_, _| {})
}

fn check_scale(manifest: &DatasetManifest, config: &TrainConfig) -> Result<()> {
    if manifest.scale != config.scale {
        return Err(Error::Config(format!(
            "manifest scale {} does not match config scale {}",
            manifest.scale, config.scale
        )));
    }
    Ok(())
}

/// Stage 1: the IR LR→HR mapping. Each step updates the discriminator on
/// `(y_ir, G(x_ir))`, then the generator on MAE (plus the adversarial term
/// when `adv_stage1` is set).
pub fn train_stage1_on(samples: &[Sample], config: &TrainConfig, observer: StepObserver<'_>) -> Result<TrainOutcome> {
    config.validate()?;
    check_samples(samples, config, false)?;
    let g = Generator::new(config.generator(), seed::derive(config.seed, "gen"))?;
    let hr = config.hr_crop();
    let d = DiscSpre::new(seed::derive(config.seed, "dspre"), hr, hr)?;
    let (gp, dp) = (g.parameters(), d.parameters());
    let (mut gs, mut ds) = (AdamState::new(&gp), AdamState::new(&dp));
    let mut avg = WeightAverage::new(&gp, config.ema_decay);
    let adam = config.adam();
    let w = config.weights();
    let fe = FeatureExtractor::default();
    let frozen_before = parameter_digest(&fe.frozen_parameters());

    let mut log = Vec::with_capacity(config.steps_stage1 as usize);
    for step in 0..config.steps_stage1 {
        let stream = seed::derive_indexed(config.seed, "stage1-batch", step);
        let (lrs, hrs) = sample_batch(samples, config, stream, |s| &s.lr)?;
        let (x, y) = (images_to_tensor(&lrs)?, images_to_tensor(&hrs)?);
        let sr = g.forward(&x)?;

        // Discriminator step.
        let v = adversarial_value(&d.forward(&y)?, &d.forward(&sr.detach())?);
        let zero = Tensor::scalar(0.0);
        let loss_d = combine_d(&v, &zero, &w)?;
        loss_d.backward()?;
        clip(&dp, config.grad_clip);
        adam_step(&dp, &mut ds, &adam)?;

        // Generator step.
        let mae = l_mae(&sr, &y)?;
        let adv = if config.adv_stage1 {
            l_adversarial_g(&d.forward(&sr)?)
        } else {
            Tensor::scalar(0.0)
        };
        let loss_g = combine_g(&mae, &zero, &adv, &w, config.adv_stage1)?;
        loss_g.backward()?;
        clear_grads(&dp);
        clip(&gp, config.grad_clip);
        adam_step(&gp, &mut gs, &adam)?;
        avg.update(&gp);

        let row = LossBreakdown {
            mae: mae.item_f64(),
            adv_g: if config.adv_stage1 {
                f64::from(w.gamma) * adv.item_f64()
            } else {
                0.0
            },
            noise: 0.0,
            trans: 0.0,
            spre: v.item_f64(),
            total_g: loss_g.item_f64(),
            total_d: loss_d.item_f64(),
        };
        log::debug!("stage1 step {step}: {row:?}");
        observer(step, &row);
        log.push(row);
    }

    if config.ema_decay > 0.0 {
        avg.copy_to(&gp)?;
    }
    let mut checkpoint = Checkpoint::new(Stage::Stage1, config.clone());
    checkpoint.insert_module(&g);
    checkpoint.insert_module(&d);
    Ok(TrainOutcome {
        checkpoint,
        log,
        frozen_after: parameter_digest(&fe.frozen_parameters()),
        frozen_before,
        noise_distance: None,
    })
}

/// The stage-2 discriminator: Sobel-prior or, for the ablation baseline,
/// a plain conv stack.
enum Critic {
    Plain(DiscSpre),
    Trans(DiscTrans),
}

impl Critic {
    fn module(&self) -> &dyn Module {
        match self {
            Critic::Plain(d) => d,
            Critic::Trans(d) => d,
        }
    }

    fn frozen(&self) -> Vec<Parameter> {
        match self {
            Critic::Plain(_) => Vec::new(),
            Critic::Trans(d) => d.frozen_parameters(),
        }
    }

    /// Logit and, for the Sobel-prior critic, the texture latent.
    fn forward(&self, x: &Tensor) -> Result<(Tensor, Option<Tensor>)> {
        match self {
            Critic::Plain(d) => Ok((d.forward(x)?, None)),
            Critic::Trans(d) => {
                let out = d.forward(x)?;
                Ok((out.logit, Some(out.v_p)))
            }
        }
    }
}

/// Fixed probe batch for the noise-distance readout: centre crops of the
/// first `batch` visible images with a fixed noise draw.
fn probe_batch(samples: &[Sample], config: &TrainConfig) -> Result<(Tensor, Tensor)> {
    let lrs = samples
        .iter()
        .take(config.batch)
        .map(|s| center_crop(s.vis_lr.as_ref().expect("checked"), config.lr_crop, config.lr_crop))
        .collect::<Result<Vec<_>>>()?;
    let u = noise_inputs(
        &lrs,
        config.noise_sigma,
        config.scale,
        seed::derive(config.seed, "probe"),
    )?;
    Ok((images_to_tensor(&lrs)?, u))
}

/// `Σ_k w_k · mean|f_k(G(x)) − f_k(u)|`, the quantity the noise loss grows.
pub fn noise_distance(g: &Generator, fe: &FeatureExtractor, x: &Tensor, u: &Tensor) -> Result<f64> {
    let _guard = no_grad();
    let pred = fe.forward(&g.forward(x)?)?;
    let noise = fe.forward(u)?;
    Ok(-l_noise(&pred, &noise, fe.weights())?.item_f64())
}

/// Stage 2 from a stage-1 checkpoint and a manifest with visible images.
pub fn train_stage2(stage1: &Checkpoint, manifest: &DatasetManifest, config: &TrainConfig) -> Result<TrainOutcome> {
    check_scale(manifest, config)?;
    train_stage2_on(stage1, &load_samples(manifest)?, config, &mut |_, _| {})
}

/// Stage 2: adapt the stage-1 generator on visible inputs. Per step:
/// x̃ = G(x_vis); a critic step on `(y_ir, x̃)` with the texture term; a
/// generator step on MAE, the noise loss and the adversarial term; then,
/// if enabled, one IR reconstruction step.
pub fn train_stage2_on(
    stage1: &Checkpoint,
    samples: &[Sample],
    config: &TrainConfig,
    observer: StepObserver<'_>,
) -> Result<TrainOutcome> {
    if stage1.stage != Stage::Stage1 {
        return Err(Error::State(format!(
            "stage2 requires a stage1 checkpoint, got {}",
            stage1.stage
        )));
    }
    config.validate()?;
    let prev = &stage1.config;
    if prev.scale != config.scale || prev.preset != config.preset {
        return Err(Error::Config(format!(
            "stage-1 checkpoint was trained at scale {} ({:?}); config asks for scale {} ({:?})",
            prev.scale, prev.preset, config.scale, config.preset
        )));
    }
    check_samples(samples, config, true)?;

    let g = Generator::new(config.generator(), seed::derive(config.seed, "gen"))?;
    stage1.restore(&g, "gen.")?;
    let hr = config.hr_crop();
    let critic = if config.d_trans_enabled {
        let d = DiscTrans::new(seed::derive(config.seed, "dtrans"), hr, hr, config.prior_depth)?;
        if config.copy_main {
            if prev.hr_crop() != hr {
                return Err(Error::Config(format!(
                    "copy_main needs the stage-1 crop ({}) to match ({hr})",
                    prev.hr_crop()
                )));
            }
            let spre = DiscSpre::new(seed::derive(prev.seed, "dspre"), hr, hr)?;
            stage1.restore(&spre, "dspre.")?;
            d.copy_main_from(&spre)?;
        }
        Critic::Trans(d)
    } else {
        Critic::Plain(DiscSpre::new(seed::derive(config.seed, "dspre2"), hr, hr)?)
    };
    let fe = if config.feature_weights.is_empty() {
        FeatureExtractor::default()
    } else {
        FeatureExtractor::with_weights(config.feature_weights.clone())?
    };
    let frozen = |c: &Critic| {
        let mut all = fe.frozen_parameters();
        all.extend(c.frozen());
        parameter_digest(&all)
    };
    let frozen_before = frozen(&critic);

    let (gp, dp) = (g.parameters(), critic.module().parameters());
    let (mut gs, mut ds) = (AdamState::new(&gp), AdamState::new(&dp));
    let mut avg = WeightAverage::new(&gp, config.ema_decay);
    let adam = config.adam();
    let w = config.weights();
    let (probe_x, probe_u) = probe_batch(samples, config)?;
    let start = noise_distance(&g, &fe, &probe_x, &probe_u)?;

    let mut log = Vec::with_capacity(config.steps_stage2 as usize);
    for step in 0..config.steps_stage2 {
        let stream = seed::derive_indexed(config.seed, "stage2-batch", step);
        let (vis, hrs) = sample_batch(samples, config, stream, |s| s.vis_lr.as_ref().expect("checked"))?;
        let (x, y) = (images_to_tensor(&vis)?, images_to_tensor(&hrs)?);
        let u = noise_inputs(&vis, config.noise_sigma, config.scale, stream)?;
        let sr = g.forward(&x)?;

        // Critic step: −(V + β·L_trans).
        let fake = sr.detach();
        let (real_logit, real_vp) = critic.forward(&y)?;
        let (fake_logit, fake_vp) = critic.forward(&fake)?;
        let v = adversarial_value(&real_logit, &fake_logit);
        let trans = match (config.trans_mode, &critic, real_vp, fake_vp) {
            // Same as l_trans in prior-branch mode, reusing this pass's latents.
            (TransMode::PriorBranch, Critic::Trans(_), Some(rv), Some(fv)) => mean_abs_diff(&fv, &rv)?,
            (TransMode::PriorBranch, _, _, _) => Tensor::scalar(0.0),
            (TransMode::RawSobel, ..) => l_trans_raw(&fake, &y)?,
        };
        let loss_d = combine_d(&v, &trans, &w)?;
        loss_d.backward()?;
        clip(&dp, config.grad_clip);
        adam_step(&dp, &mut ds, &adam)?;

        // Generator step: MAE + α·L_n (+ γ·adversarial).
        let mae = l_mae(&sr, &y)?;
        let noise_feats = {
            let _guard = no_grad();
            fe.forward(&u)?
        };
        let noise = if config.alpha > 0.0 {
            l_noise(&fe.forward(&sr)?, &noise_feats, fe.weights())?
        } else {
            let _guard = no_grad();
            l_noise(&fe.forward(&fake)?, &noise_feats, fe.weights())?
        };
        let adv = if config.adv_enabled {
            l_adversarial_g(&critic.forward(&sr)?.0)
        } else {
            Tensor::scalar(0.0)
        };
        let loss_g = combine_g(&mae, &noise, &adv, &w, config.adv_enabled)?;
        loss_g.backward()?;
        clear_grads(&dp);
        clip(&gp, config.grad_clip);
        adam_step(&gp, &mut gs, &adam)?;

        if config.replay_ir {
            let stream = seed::derive_indexed(config.seed, "stage2-replay", step);
            let (lrs, hrs) = sample_batch(samples, config, stream, |s| &s.lr)?;
            let replay = l_mae(&g.forward(&images_to_tensor(&lrs)?)?, &images_to_tensor(&hrs)?)?;
            replay.backward()?;
            clip(&gp, config.grad_clip);
            adam_step(&gp, &mut gs, &adam)?;
        }
        avg.update(&gp);

        let row = LossBreakdown {
            mae: mae.item_f64(),
            adv_g: if config.adv_enabled {
                f64::from(w.gamma) * adv.item_f64()
            } else {
                0.0
            },
            noise: noise.item_f64(),
            trans: trans.item_f64(),
            spre: v.item_f64(),
            total_g: loss_g.item_f64(),
            total_d: loss_d.item_f64(),
        };
        log::debug!("stage2 step {step}: {row:?}");
        observer(step, &row);
        log.push(row);
    }

    if config.ema_decay > 0.0 {
        avg.copy_to(&gp)?;
    }
    let end = noise_distance(&g, &fe, &probe_x, &probe_u)?;
    let mut checkpoint = Checkpoint::new(Stage::Stage2, config.clone());
    checkpoint.insert_module(&g);
    checkpoint.insert_module(critic.module());
    Ok(TrainOutcome {
        checkpoint,
        log,
        frozen_before,
        frozen_after: frozen(&critic),
        noise_distance: Some((start, end)),
    })
}

/// Rebuild the generator stored in a checkpoint.
pub fn generator_from(checkpoint: &Checkpoint) -> Result<Generator> {
    let g = Generator::new(
        checkpoint.config.generator(),
        seed::derive(checkpoint.config.seed, "gen"),
    )?;
    checkpoint.restore(&g, "gen.")?;
    Ok(g)
}
