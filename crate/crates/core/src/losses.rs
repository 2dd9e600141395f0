//! Training objectives for both stages.
//!
//! Discriminator-side values follow the "value being maximized" sign
//! convention: [`adversarial_value`] is `mean(log σ(real) + log(1 − σ(fake)))`
//! and [`combine_d`] negates it so the optimizer can minimize.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::DiscTrans;
use crate::tensor::{add, mean, mean_abs_diff, neg, scale, sobel_magnitude, softplus, Tensor, SOBEL_GH, SOBEL_GV};

/// How `l_trans` compares textures.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransMode {
    /// Fixed Sobel magnitudes of the two images; no learnable parameters.
    RawSobel,
    /// Texture latents from the discriminator's prior branch.
    #[default]
    PriorBranch,
}

impl std::str::FromStr for TransMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "raw-sobel" => Ok(Self::RawSobel),
            "prior-branch" => Ok(Self::PriorBranch),
            _ => Err(format!("unknown trans mode '{s}' (raw-sobel, prior-branch)")),
        }
    }
}

impl std::fmt::Display for TransMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::RawSobel => "raw-sobel",
            Self::PriorBranch => "prior-branch",
        })
    }
}

/// Balancing weights: `alpha` on the noise loss, `beta` on `l_trans`,
/// `gamma` on the generator's adversarial term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f32,
    pub beta: f32,
    pub gamma: f32,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 1.0,
            gamma: 5e-3,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("loss weight {name} must be ≥ 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Per-step scalars for logging. `adv_g` holds the weighted contribution
/// `gamma · raw`, so `total_g = mae + alpha · noise + adv_g`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub mae: f64,
    pub adv_g: f64,
    pub noise: f64,
    pub trans: f64,
    pub spre: f64,
    pub total_g: f64,
    pub total_d: f64,
}

impl LossBreakdown {
    pub const CSV_HEADER: &'static str = "step,mae,adv_g,noise,trans,spre,total_g,total_d";

    pub fn csv_row(&self, step: u64) -> String {
        format!(
            "{step},{},{},{},{},{},{},{}",
            self.mae, self.adv_g, self.noise, self.trans, self.spre, self.total_g, self.total_d
        )
    }

    pub fn is_finite(&self) -> bool {
        [
            self.mae,
            self.adv_g,
            self.noise,
            self.trans,
            self.spre,
            self.total_g,
            self.total_d,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

fn check_scalar(name: &str, t: &Tensor) -> Result<()> {
    if t.numel() != 1 {
        return Err(Error::shape(format!(
            "{name} must be a scalar, got shape {:?}",
            t.shape()
        )));
    }
    Ok(())
}

/// Mean absolute error over all elements.
pub fn l_mae(pred: &Tensor, target: &Tensor) -> Result<Tensor> {
    mean_abs_diff(pred, target)
}

/// `mean(log σ(real)) + mean(log(1 − σ(fake)))`, the quantity the
/// discriminator maximizes. Always ≤ 0.
pub fn adversarial_value(real_logit: &Tensor, fake_logit: &Tensor) -> Tensor {
    // log σ(x) = −softplus(−x), log(1 − σ(x)) = −softplus(x)
    let real = mean(&softplus(&neg(real_logit)));
    let fake = mean(&softplus(fake_logit));
    neg(&add(&real, &fake).expect("scalars"))
}

/// Discriminator cross-entropy `−[log σ(real) + log(1 − σ(fake))]`,
/// batch-averaged.
pub fn l_adversarial_d(real_logit: &Tensor, fake_logit: &Tensor) -> Tensor {
    neg(&adversarial_value(real_logit, fake_logit))
}

/// Non-saturating generator term `−log σ(fake)`, batch-averaged.
pub fn l_adversarial_g(fake_logit: &Tensor) -> Tensor {
    mean(&softplus(&neg(fake_logit)))
}

/// Literal minimax generator term `log(1 − σ(fake))`, batch-averaged.
pub fn l_adversarial_g_minimax(fake_logit: &Tensor) -> Tensor {
    neg(&mean(&softplus(fake_logit)))
}

fn sobel_kernels() -> Tensor {
    Tensor::new([SOBEL_GH, SOBEL_GV].concat(), &[2, 3, 3]).expect("static shape")
}

/// Texture discrepancy between `pred` and `target` (both `[N, 1, H, W]`).
pub fn l_trans(pred: &Tensor, target: &Tensor, d: &DiscTrans, mode: TransMode) -> Result<Tensor> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(format!(
            "l_trans: pred {:?} vs target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let (_, _, h, w) = pred.dims4()?;
    if h < 3 || w < 3 {
        return Err(Error::shape(format!("l_trans needs at least 3x3, got {h}x{w}")));
    }
    match mode {
        TransMode::RawSobel => l_trans_raw(pred, target),
        TransMode::PriorBranch => mean_abs_diff(&d.prior(pred)?, &d.prior(target)?),
    }
}

/// Raw-Sobel texture distance `mean|S(pred) − S(target)|` over the valid
/// region; needs no discriminator.
pub fn l_trans_raw(pred: &Tensor, target: &Tensor) -> Result<Tensor> {
    let k = sobel_kernels();
    mean_abs_diff(&sobel_magnitude(pred, &k)?, &sobel_magnitude(target, &k)?)
}

/// `−Σ_k w_k · mean|f_k(pred) − f_k(noise)|`; never positive.
pub fn l_noise(pred_features: &[Tensor], noise_features: &[Tensor], w: &[f32]) -> Result<Tensor> {
    if pred_features.len() != noise_features.len() || pred_features.len() != w.len() {
        return Err(Error::shape(format!(
            "l_noise: {} predicted stages, {} noise stages, {} weights",
            pred_features.len(),
            noise_features.len(),
            w.len()
        )));
    }
    let mut total = Tensor::scalar(0.0);
    for ((p, n), &wk) in pred_features.iter().zip(noise_features).zip(w) {
        total = add(&total, &scale(&mean_abs_diff(p, n)?, wk))?;
    }
    Ok(neg(&total))
}

/// `mae + alpha · noise (+ gamma · adv_g when enabled)`.
pub fn combine_g(
    mae: &Tensor,
    noise: &Tensor,
    adv_g: &Tensor,
    weights: &LossWeights,
    adv_enabled: bool,
) -> Result<Tensor> {
    check_scalar("mae", mae)?;
    check_scalar("noise", noise)?;
    check_scalar("adv_g", adv_g)?;
    let total = add(mae, &scale(noise, weights.alpha))?;
    if adv_enabled {
        add(&total, &scale(adv_g, weights.gamma))
    } else {
        Ok(total)
    }
}

/// `−(spre + beta · trans)` where `spre` is the maximized adversarial value.
pub fn combine_d(spre: &Tensor, trans: &Tensor, weights: &LossWeights) -> Result<Tensor> {
    check_scalar("spre", spre)?;
    check_scalar("trans", trans)?;
    Ok(neg(&add(spre, &scale(trans, weights.beta))?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::PriorDepth;

    fn logit(p: f64) -> Tensor {
        Tensor::scalar((p / (1.0 - p)).ln() as f32)
    }

    #[test]
    fn adversarial_reference_values() {
        let v = l_adversarial_d(&logit(0.5), &logit(0.5)).item_f64();
        assert!((v - 2.0 * std::f64::consts::LN_2).abs() < 1e-6);
        let v = l_adversarial_d(&logit(0.9), &logit(0.1)).item_f64();
        assert!((v - 0.21072).abs() < 1e-4, "{v}");
        let v = l_adversarial_d(&Tensor::scalar(20.0), &Tensor::scalar(-20.0)).item_f64();
        assert!(v < 1e-8);
        assert!((l_adversarial_g(&logit(0.5)).item_f64() - std::f64::consts::LN_2).abs() < 1e-6);
        assert!(l_adversarial_g(&Tensor::scalar(30.0)).item_f64() < 1e-12);
        let m = l_adversarial_g_minimax(&logit(0.5)).item_f64();
        assert!((m + std::f64::consts::LN_2).abs() < 1e-6);
    }

    #[test]
    fn generator_gradient_at_half() {
        let x = Tensor::parameter(vec![0.0], &[1, 1]).unwrap();
        l_adversarial_g(&x).backward().unwrap();
        assert!((x.grad().unwrap()[0] + 0.5).abs() < 1e-7);
    }

    #[test]
    fn mae_offsets() {
        let a = Tensor::full(&[1, 1, 4, 4], 0.2);
        let b = Tensor::full(&[1, 1, 4, 4], 0.5);
        assert_eq!(l_mae(&a, &a).unwrap().item(), 0.0);
        assert!((l_mae(&a, &b).unwrap().item_f64() - 0.3).abs() < 1e-7);
        assert!(l_mae(&a, &Tensor::zeros(&[1, 1, 4, 3])).is_err());
    }

    #[test]
    fn trans_zero_cases() {
        let d = DiscTrans::new(1, 16, 16, PriorDepth::Shallow).unwrap();
        let x = Tensor::new(
            (0..256).map(|i| ((i * 37) % 11) as f32 / 11.0).collect(),
            &[1, 1, 16, 16],
        )
        .unwrap();
        for mode in [TransMode::RawSobel, TransMode::PriorBranch] {
            assert_eq!(l_trans(&x, &x, &d, mode).unwrap().item(), 0.0);
        }
        let c1 = Tensor::full(&[1, 1, 16, 16], 0.2);
        let c2 = Tensor::full(&[1, 1, 16, 16], 0.7);
        assert!(l_trans(&c1, &c2, &d, TransMode::RawSobel).unwrap().item() < 1e-6);
        assert!(l_trans(&c1, &Tensor::zeros(&[1, 1, 16, 8]), &d, TransMode::RawSobel).is_err());
    }

    #[test]
    fn noise_loss_values() {
        let a = vec![Tensor::full(&[1, 2, 3, 3], 0.1)];
        let b = vec![Tensor::full(&[1, 2, 3, 3], 0.6)];
        assert_eq!(l_noise(&a, &a, &[1.0]).unwrap().item(), 0.0);
        assert!((l_noise(&a, &b, &[1.0]).unwrap().item_f64() + 0.5).abs() < 1e-6);
        assert!(l_noise(&a, &b, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn combinations() {
        let w = LossWeights::default();
        let (mae, noise, adv) = (Tensor::scalar(0.2), Tensor::scalar(-0.5), Tensor::scalar(2.0));
        let g = combine_g(&mae, &noise, &adv, &w, false).unwrap().item_f64();
        assert!((g - 0.15).abs() < 1e-7);
        let g = combine_g(&mae, &noise, &adv, &w, true).unwrap().item_f64();
        assert!((g - 0.16).abs() < 1e-7);
        let zero_alpha = LossWeights { alpha: 0.0, ..w };
        let g = combine_g(&mae, &noise, &adv, &zero_alpha, false).unwrap().item();
        assert_eq!(g, 0.2);
        let d = combine_d(&Tensor::scalar(1.0), &Tensor::scalar(0.5), &w)
            .unwrap()
            .item();
        assert_eq!(d, -1.5);
        let no_beta = LossWeights { beta: 0.0, ..w };
        assert_eq!(
            combine_d(&Tensor::scalar(1.0), &Tensor::scalar(0.5), &no_beta)
                .unwrap()
                .item(),
            -1.0
        );
    }

    #[test]
    fn weights_validated() {
        assert!(LossWeights::default().validate().is_ok());
        let bad = LossWeights {
            beta: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
