use super::{rng_from, Conv, LRELU_SLOPE};
use crate::error::{Error, Result};
use crate::tensor::{leaky_relu, Parameter, Tensor};

/// Fixed seed so every run sees the same feature space.
const FEATURE_SEED: u64 = 0x0fea_7e5e_ed00_0003;
const WIDTHS: [usize; 3] = [16, 32, 64];

/// Frozen three-stage random conv pyramid standing in for a pretrained
/// perceptual network. Stage `k` halves the resolution for `k ≥ 1`.
#[derive(Clone, Debug)]
pub struct FeatureExtractor {
    stages: Vec<Conv>,
    weights: Vec<f32>,
}

impl Default for FeatureExtractor {
    fn default() -> Self {
        let k = WIDTHS.len();
        Self::with_weights(vec![1.0 / k as f32; k]).expect("uniform weights are valid")
    }
}

impl FeatureExtractor {
    /// Per-stage weights must be non-negative and sum to 1.
    pub fn with_weights(weights: Vec<f32>) -> Result<Self> {
        if weights.len() != WIDTHS.len() {
            return Err(Error::Config(format!(
                "feature extractor has {} stages, got {} weights",
                WIDTHS.len(),
                weights.len()
            )));
        }
        let total: f32 = weights.iter().sum();
        if weights.iter().any(|&w| !(w >= 0.0)) || (total - 1.0).abs() > 1e-5 {
            return Err(Error::Config(format!(
                "feature weights must be non-negative and sum to 1, got {weights:?}"
            )));
        }
        let mut rng = rng_from(FEATURE_SEED);
        let mut cin = 1;
        let stages = WIDTHS
            .iter()
            .enumerate()
            .map(|(i, &cout)| {
                let stride = if i == 0 { 1 } else { 2 };
                let c = Conv::kaiming(&mut rng, cin, cout, 3, stride, 1, 1.0, false);
                cin = cout;
                c
            })
            .collect();
        Ok(Self { stages, weights })
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    pub fn num_stages(&self) -> usize {
        self.stages.len()
    }

    /// Feature maps of every stage, shallow to deep.
    pub fn forward(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        let (_, c, _, _) = x.dims4()?;
        if c != 1 {
            return Err(Error::shape(format!(
                "feature extractor takes 1-channel input, got {c}"
            )));
        }
        let mut feats = Vec::with_capacity(self.stages.len());
        let mut y = x.clone();
        for s in &self.stages {
            y = leaky_relu(&s.forward(&y)?, LRELU_SLOPE);
            feats.push(y.clone());
        }
        Ok(feats)
    }

    /// All (constant) weights, for freeze checks.
    pub fn frozen_parameters(&self) -> Vec<Parameter> {
        let mut out = Vec::new();
        for (i, s) in self.stages.iter().enumerate() {
            s.push(&format!("fe.stage{i}"), &mut out);
        }
        out
    }
}
