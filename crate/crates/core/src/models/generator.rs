use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{rng_from, Conv, Module, LRELU_SLOPE};
use crate::error::{Error, Result};
use crate::tensor::{add, cat, leaky_relu, pixel_shuffle, scale, sub, Parameter, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorPreset {
    Desk,
    PaperScale,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_blocks: usize,
    pub base_channels: usize,
    pub growth_channels: usize,
    pub scale: usize,
    pub residual_scale: f32,
}

impl GeneratorConfig {
    pub fn preset(preset: GeneratorPreset, scale: usize) -> Self {
        match preset {
            GeneratorPreset::Desk => Self {
                n_blocks: 4,
                base_channels: 32,
                growth_channels: 16,
                scale,
                residual_scale: 0.2,
            },
            GeneratorPreset::PaperScale => Self {
                n_blocks: 23,
                base_channels: 64,
                growth_channels: 32,
                scale,
                residual_scale: 0.2,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_blocks == 0 {
            return Err(Error::Config("generator needs at least one RRDB".into()));
        }
        if self.scale != 2 && self.scale != 4 {
            return Err(Error::Config(format!("scale must be 2 or 4, got {}", self.scale)));
        }
        if !(0.0..=1.0).contains(&self.residual_scale) {
            return Err(Error::Config(format!(
                "residual_scale must lie in [0, 1], got {}",
                self.residual_scale
            )));
        }
        if self.base_channels == 0 || self.growth_channels == 0 {
            return Err(Error::Config("channel counts must be positive".into()));
        }
        Ok(())
    }
}

/// Five densely connected convs; `x + rs · conv5(...)`.
#[derive(Clone, Debug)]
struct DenseBlock {
    convs: Vec<Conv>,
}

impl DenseBlock {
    fn new(rng: &mut ChaCha8Rng, nf: usize, gc: usize) -> Self {
        let convs = (0..5)
            .map(|i| {
                let cout = if i == 4 { nf } else { gc };
                Conv::kaiming(rng, nf + i * gc, cout, 3, 1, 1, 0.1, true)
            })
            .collect();
        Self { convs }
    }

    fn forward(&self, x: &Tensor, rs: f32) -> Result<Tensor> {
        let mut feats = vec![x.clone()];
        for conv in &self.convs[..4] {
            let refs: Vec<&Tensor> = feats.iter().collect();
            let input = cat(&refs, 1)?;
            feats.push(leaky_relu(&conv.forward(&input)?, LRELU_SLOPE));
        }
        let refs: Vec<&Tensor> = feats.iter().collect();
        let x5 = self.convs[4].forward(&cat(&refs, 1)?)?;
        add(&scale(&x5, rs), x)
    }
}

/// Residual-in-residual dense block.
#[derive(Clone, Debug)]
pub struct Rrdb {
    blocks: [DenseBlock; 3],
    channels: usize,
    residual_scale: f32,
}

impl Rrdb {
    pub fn new(seed: u64, channels: usize, growth: usize, residual_scale: f32) -> Self {
        Self::with_rng(&mut rng_from(seed), channels, growth, residual_scale)
    }

    fn with_rng(rng: &mut ChaCha8Rng, nf: usize, gc: usize, rs: f32) -> Self {
        Self {
            blocks: [
                DenseBlock::new(rng, nf, gc),
                DenseBlock::new(rng, nf, gc),
                DenseBlock::new(rng, nf, gc),
            ],
            channels: nf,
            residual_scale: rs,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (_, c, _, _) = x.dims4()?;
        if c != self.channels {
            return Err(Error::shape(format!(
                "RRDB expects {} channels, got {c}",
                self.channels
            )));
        }
        let mut out = x.clone();
        for b in &self.blocks {
            out = b.forward(&out, self.residual_scale)?;
        }
        // x + rs·(h − x): identity both at rs = 0 and when every
        // dense block is silent.
        add(x, &scale(&sub(&out, x)?, self.residual_scale))
    }

    fn push(&self, prefix: &str, out: &mut Vec<Parameter>) {
        for (i, b) in self.blocks.iter().enumerate() {
            for (j, c) in b.convs.iter().enumerate() {
                c.push(&format!("{prefix}.rdb{i}.conv{j}"), out);
            }
        }
    }
}

impl Module for Rrdb {
    fn collect_parameters(&self, out: &mut Vec<Parameter>) {
        self.push("rrdb", out);
    }
}

/// Shallow conv → RRDB trunk with global skip → pixel-shuffle ×2 stages →
/// zero-initialized output conv. One channel in, one channel out.
#[derive(Clone, Debug)]
pub struct Generator {
    config: GeneratorConfig,
    conv_first: Conv,
    blocks: Vec<Rrdb>,
    conv_trunk: Conv,
    upsample: Vec<Conv>,
    conv_last: Conv,
}

impl Generator {
    pub fn new(config: GeneratorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng_from(seed);
        let (nf, gc) = (config.base_channels, config.growth_channels);
        let conv_first = Conv::kaiming(&mut rng, 1, nf, 3, 1, 1, 1.0, true);
        let blocks = (0..config.n_blocks)
            .map(|_| Rrdb::with_rng(&mut rng, nf, gc, config.residual_scale))
            .collect();
        let conv_trunk = Conv::kaiming(&mut rng, nf, nf, 3, 1, 1, 1.0, true);
        let stages = if config.scale == 4 { 2 } else { 1 };
        let upsample = (0..stages)
            .map(|_| Conv::kaiming(&mut rng, nf, 4 * nf, 3, 1, 1, 1.0, true))
            .collect();
        let conv_last = Conv::kaiming(&mut rng, nf, 1, 3, 1, 1, 0.0, true);
        Ok(Self {
            config,
            conv_first,
            blocks,
            conv_trunk,
            upsample,
            conv_last,
        })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn forward(&self, lr: &Tensor) -> Result<Tensor> {
        let (_, c, _, _) = lr.dims4()?;
        if c != 1 {
            return Err(Error::shape(format!(
                "generator takes 1-channel input, got {c} channels"
            )));
        }
        let fea = self.conv_first.forward(lr)?;
        let mut trunk = fea.clone();
        for b in &self.blocks {
            trunk = b.forward(&trunk)?;
        }
        let mut x = add(&fea, &self.conv_trunk.forward(&trunk)?)?;
        for up in &self.upsample {
            x = leaky_relu(&pixel_shuffle(&up.forward(&x)?, 2)?, LRELU_SLOPE);
        }
        self.conv_last.forward(&x)
    }
}

impl Module for Generator {
    fn collect_parameters(&self, out: &mut Vec<Parameter>) {
        self.conv_first.push("gen.conv_first", out);
        for (i, b) in self.blocks.iter().enumerate() {
            b.push(&format!("gen.rrdb{i}"), out);
        }
        self.conv_trunk.push("gen.conv_trunk", out);
        for (i, c) in self.upsample.iter().enumerate() {
            c.push(&format!("gen.up{i}"), out);
        }
        self.conv_last.push("gen.conv_last", out);
    }
}
