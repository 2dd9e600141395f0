use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{LossWeights, TransMode};
use crate::models::{GeneratorConfig, GeneratorPreset, PriorDepth};
use crate::tensor::AdamConfig;

/// Which half of the two-stage schedule produced a checkpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Stage1,
    Stage2,
}

impl Stage {
    pub fn tag(self) -> u8 {
        match self {
            Stage::Stage1 => 1,
            Stage::Stage2 => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(Stage::Stage1),
            2 => Some(Stage::Stage2),
            _ => None,
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Stage1 => "stage1",
            Stage::Stage2 => "stage2",
        })
    }
}

/// Every training knob. Field names double as JSON config keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub scale: usize,
    pub lr: f32,
    pub adam_beta1: f32,
    pub adam_beta2: f32,
    pub adam_eps: f32,
    pub batch: usize,
    /// LR crop side in pixels; the discriminators see `scale · lr_crop`.
    pub lr_crop: usize,
    pub steps_stage1: u64,
    pub steps_stage2: u64,
    pub alpha: f32,
    pub beta: f32,
    /// Weight of the generator's adversarial term.
    pub gamma: f32,
    pub prior_depth: PriorDepth,
    pub trans_mode: TransMode,
    /// Std of the Gaussian noise that forms the noise-feature input.
    pub noise_sigma: f32,
    /// Stage 2: the generator objective includes the adversarial term.
    pub adv_enabled: bool,
    /// Stage 1: likewise. Off by default, matching the MAE-only stage-1
    /// generator objective.
    pub adv_stage1: bool,
    /// Stage 2 uses the Sobel-prior discriminator; off means a plain one.
    pub d_trans_enabled: bool,
    /// Stage 2 interleaves one IR reconstruction step per visible step.
    pub replay_ir: bool,
    /// Stage 2 starts its main branch from the stage-1 discriminator.
    pub copy_main: bool,
    /// Global-norm gradient clip; 0 disables.
    pub grad_clip: f32,
    /// Decay of the generator weight average stored in checkpoints; 0 keeps
    /// the last iterate.
    pub ema_decay: f32,
    /// Per-stage feature weights; empty means uniform.
    pub feature_weights: Vec<f32>,
    pub seed: u64,
    pub preset: GeneratorPreset,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let w = LossWeights::default();
        Self {
            scale: 2,
            lr: 1e-5,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            batch: 4,
            lr_crop: 64,
            steps_stage1: 1000,
            steps_stage2: 1000,
            alpha: w.alpha,
            beta: w.beta,
            gamma: w.gamma,
            prior_depth: PriorDepth::Middle,
            trans_mode: TransMode::PriorBranch,
            noise_sigma: 0.1,
            adv_enabled: true,
            adv_stage1: false,
            d_trans_enabled: true,
            replay_ir: false,
            copy_main: false,
            grad_clip: 1.0,
            ema_decay: 0.999,
            feature_weights: Vec::new(),
            seed: 0,
            preset: GeneratorPreset::Desk,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.generator().validate()?;
        self.weights().validate()?;
        if self.batch == 0 || self.lr_crop == 0 {
            return Err(Error::Config("batch and lr_crop must be positive".into()));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::Config("adam betas must lie in [0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return Err(Error::Config(format!(
                "ema_decay must be in [0, 1), got {}",
                self.ema_decay
            )));
        }
        if !(self.noise_sigma >= 0.0) || !(self.grad_clip >= 0.0) {
            return Err(Error::Config("noise_sigma and grad_clip must be ≥ 0".into()));
        }
        let hr = self.hr_crop();
        if hr < 16 {
            return Err(Error::Config(format!(
                "HR crop {hr} is too small for the discriminator (need ≥ 16)"
            )));
        }
        if self.d_trans_enabled && hr <= 4 * self.prior_depth.blocks() {
            return Err(Error::Config(format!(
                "HR crop {hr} is too small for a {} prior branch",
                self.prior_depth
            )));
        }
        if !self.d_trans_enabled && self.beta > 0.0 && self.trans_mode == TransMode::PriorBranch {
            return Err(Error::Config(
                "beta > 0 in prior-branch mode needs d_trans_enabled".into(),
            ));
        }
        Ok(())
    }

    pub fn hr_crop(&self) -> usize {
        self.scale * self.lr_crop
    }

    pub fn generator(&self) -> GeneratorConfig {
        GeneratorConfig::preset(self.preset, self.scale)
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    pub fn steps(&self, stage: Stage) -> u64 {
        match stage {
            Stage::Stage1 => self.steps_stage1,
            Stage::Stage2 => self.steps_stage2,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
