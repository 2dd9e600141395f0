//! Generator, discriminators and the frozen feature extractor.

mod discriminator;
mod feature;
mod generator;

pub use discriminator::{DiscSpre, DiscTrans, PriorDepth, TransOutput};
pub use feature::FeatureExtractor;
pub use generator::{Generator, GeneratorConfig, GeneratorPreset, Rrdb};

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::{conv2d, linear, Parameter, Tensor};

pub(crate) const LRELU_SLOPE: f32 = 0.2;

/// Anything with named trainable tensors.
pub trait Module {
    /// Push `(name, tensor)` pairs in any order.
    fn collect_parameters(&self, out: &mut Vec<Parameter>);

    /// All trainable parameters, sorted by name.
    fn parameters(&self) -> Vec<Parameter> {
        let mut out = Vec::new();
        self.collect_parameters(&mut out);
        out.sort_by(|a, b| a.name.cmp(&b.name));
        out
    }

    fn num_parameters(&self) -> usize {
        self.parameters().iter().map(|p| p.tensor.numel()).sum()
    }

    /// Overwrite every parameter from `tensors`, which must provide each
    /// name with a matching shape.
    fn load_parameters(&self, tensors: &BTreeMap<String, Tensor>) -> Result<()> {
        for p in self.parameters() {
            let src = tensors
                .get(&p.name)
                .ok_or_else(|| Error::State(format!("checkpoint lacks tensor {}", p.name)))?;
            if src.shape() != p.tensor.shape() {
                return Err(Error::State(format!(
                    "tensor {} has shape {:?}, model expects {:?}",
                    p.name,
                    src.shape(),
                    p.tensor.shape()
                )));
            }
            p.tensor.set_data(src.to_vec())?;
        }
        Ok(())
    }
}

pub(crate) fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize, std: f32) -> Vec<f32> {
    if std == 0.0 {
        return vec![0.0; n];
    }
    let dist = Normal::new(0.0f32, std).expect("finite positive std");
    (0..n).map(|_| dist.sample(rng)).collect()
}

/// 3×3 (or k×k) convolution with bias.
#[derive(Clone, Debug)]
pub(crate) struct Conv {
    pub(crate) weight: Tensor,
    pub(crate) bias: Tensor,
    stride: usize,
    padding: usize,
}

impl Conv {
    /// Kaiming-normal (fan-in) weights times `gain`, zero bias.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn kaiming(
        rng: &mut ChaCha8Rng,
        cin: usize,
        cout: usize,
        k: usize,
        stride: usize,
        padding: usize,
        gain: f32,
        trainable: bool,
    ) -> Self {
        let fan_in = (cin * k * k) as f32;
        let std = gain * (2.0 / fan_in).sqrt();
        let w = normal_vec(rng, cout * cin * k * k, std);
        let shape = [cout, cin, k, k];
        Self {
            weight: Tensor::leaf(w, &shape, trainable).expect("shape matches"),
            bias: Tensor::leaf(vec![0.0; cout], &[cout], trainable).expect("shape matches"),
            stride,
            padding,
        }
    }

    pub(crate) fn forward(&self, x: &Tensor) -> Result<Tensor> {
        conv2d(x, &self.weight, Some(&self.bias), self.stride, self.padding)
    }

    pub(crate) fn out_extent(&self, n: usize) -> usize {
        let k = self.weight.shape()[2];
        (n + 2 * self.padding - k) / self.stride + 1
    }

    pub(crate) fn push(&self, prefix: &str, out: &mut Vec<Parameter>) {
        out.push(Parameter::new(format!("{prefix}.weight"), self.weight.clone()));
        out.push(Parameter::new(format!("{prefix}.bias"), self.bias.clone()));
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Linear {
    pub(crate) weight: Tensor,
    pub(crate) bias: Tensor,
}

impl Linear {
    pub(crate) fn new(rng: &mut ChaCha8Rng, d_in: usize, d_out: usize) -> Self {
        let std = (1.0 / d_in as f32).sqrt();
        Self {
            weight: Tensor::parameter(normal_vec(rng, d_out * d_in, std), &[d_out, d_in]).expect("shape matches"),
            bias: Tensor::parameter(vec![0.0; d_out], &[d_out]).expect("shape matches"),
        }
    }

    pub(crate) fn forward(&self, x: &Tensor) -> Result<Tensor> {
        linear(x, &self.weight, &self.bias)
    }

    pub(crate) fn push(&self, prefix: &str, out: &mut Vec<Parameter>) {
        out.push(Parameter::new(format!("{prefix}.weight"), self.weight.clone()));
        out.push(Parameter::new(format!("{prefix}.bias"), self.bias.clone()));
    }
}
