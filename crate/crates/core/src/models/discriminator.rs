use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{rng_from, Conv, Linear, Module, LRELU_SLOPE};
use crate::error::{Error, Result};
use crate::tensor::{cat, flatten, leaky_relu, sobel_magnitude, spatial_mean, Parameter, Tensor, SOBEL_GH, SOBEL_GV};

const MAIN_WIDTHS: [usize; 4] = [32, 64, 128, 256];
const PRIOR_CHANNELS: usize = 16;

/// How many {conv, Sobel, LeakyReLU} blocks the prior branch stacks before
/// its texture latent is read out.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorDepth {
    Shallow,
    #[default]
    Middle,
    Deep,
}

impl PriorDepth {
    pub fn blocks(self) -> usize {
        match self {
            PriorDepth::Shallow => 1,
            PriorDepth::Middle => 2,
            PriorDepth::Deep => 3,
        }
    }
}

impl std::str::FromStr for PriorDepth {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "shallow" => Ok(Self::Shallow),
            "middle" => Ok(Self::Middle),
            "deep" => Ok(Self::Deep),
            _ => Err(format!("unknown prior depth '{s}' (shallow, middle, deep)")),
        }
    }
}

impl std::fmt::Display for PriorDepth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Shallow => "shallow",
            Self::Middle => "middle",
            Self::Deep => "deep",
        })
    }
}

/// Four stride-2 3×3 convs with LeakyReLU, no normalization.
#[derive(Clone, Debug)]
struct ConvStack {
    convs: Vec<Conv>,
}

impl ConvStack {
    fn new(rng: &mut ChaCha8Rng) -> Self {
        let mut cin = 1;
        let convs = MAIN_WIDTHS
            .iter()
            .map(|&cout| {
                let c = Conv::kaiming(rng, cin, cout, 3, 2, 1, 1.0, true);
                cin = cout;
                c
            })
            .collect();
        Self { convs }
    }

    fn out_features(&self, h: usize, w: usize) -> usize {
        let (h, w) = self
            .convs
            .iter()
            .fold((h, w), |(h, w), c| (c.out_extent(h), c.out_extent(w)));
        MAIN_WIDTHS[3] * h * w
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut y = x.clone();
        for c in &self.convs {
            y = leaky_relu(&c.forward(&y)?, LRELU_SLOPE);
        }
        Ok(y)
    }

    fn push(&self, prefix: &str, out: &mut Vec<Parameter>) {
        for (i, c) in self.convs.iter().enumerate() {
            c.push(&format!("{prefix}.conv{i}"), out);
        }
    }
}

fn check_input(x: &Tensor, hw: (usize, usize), who: &str) -> Result<()> {
    let (_, c, h, w) = x.dims4()?;
    if c != 1 {
        return Err(Error::shape(format!("{who} takes 1-channel input, got {c}")));
    }
    if (h, w) != hw {
        return Err(Error::shape(format!(
            "{who} was built for {}x{} inputs, got {h}x{w}",
            hw.0, hw.1
        )));
    }
    Ok(())
}

/// Stage-1 discriminator: conv stack → flatten → linear → one logit.
#[derive(Clone, Debug)]
pub struct DiscSpre {
    stack: ConvStack,
    head: Linear,
    input_hw: (usize, usize),
}

impl DiscSpre {
    pub fn new(seed: u64, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Config("discriminator input extent must be positive".into()));
        }
        let mut rng = rng_from(seed);
        let stack = ConvStack::new(&mut rng);
        let head = Linear::new(&mut rng, stack.out_features(height, width), 1);
        Ok(Self {
            stack,
            head,
            input_hw: (height, width),
        })
    }

    pub fn input_extent(&self) -> (usize, usize) {
        self.input_hw
    }

    /// `[N, 1, H, W]` → `[N, 1]` logits.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        check_input(x, self.input_hw, "D_spre")?;
        self.head.forward(&flatten(&self.stack.forward(x)?)?)
    }
}

impl Module for DiscSpre {
    fn collect_parameters(&self, out: &mut Vec<Parameter>) {
        self.stack.push("dspre.main", out);
        self.head.push("dspre.head", out);
    }
}

/// Logit and prior-branch latent of one [`DiscTrans`] pass.
pub struct TransOutput {
    pub logit: Tensor,
    pub v_p: Tensor,
}

/// Stage-2 discriminator: the D_spre conv stack plus a Sobel prior branch,
/// fused as `linear(concat(mean(v_p), flatten(v_g)))`.
#[derive(Clone, Debug)]
pub struct DiscTrans {
    main: ConvStack,
    prior: Vec<Conv>,
    sobel: Tensor,
    head: Linear,
    input_hw: (usize, usize),
    depth: PriorDepth,
}

impl DiscTrans {
    pub fn new(seed: u64, height: usize, width: usize, depth: PriorDepth) -> Result<Self> {
        let shrink = 4 * depth.blocks();
        if height <= shrink || width <= shrink {
            return Err(Error::Config(format!(
                "prior branch of depth {depth} needs inputs larger than {shrink}x{shrink}, got {height}x{width}"
            )));
        }
        let mut rng = rng_from(seed);
        let main = ConvStack::new(&mut rng);
        let mut cin = 1;
        let prior = (0..depth.blocks())
            .map(|_| {
                let c = Conv::kaiming(&mut rng, cin, PRIOR_CHANNELS, 3, 1, 0, 1.0, true);
                cin = PRIOR_CHANNELS;
                c
            })
            .collect();
        let sobel = Tensor::new([SOBEL_GH, SOBEL_GV].concat(), &[2, 3, 3])?;
        let head = Linear::new(&mut rng, PRIOR_CHANNELS + main.out_features(height, width), 1);
        Ok(Self {
            main,
            prior,
            sobel,
            head,
            input_hw: (height, width),
            depth,
        })
    }

    pub fn depth(&self) -> PriorDepth {
        self.depth
    }

    pub fn input_extent(&self) -> (usize, usize) {
        self.input_hw
    }

    /// Prior branch only: the texture latent `v_p`.
    pub fn prior(&self, x: &Tensor) -> Result<Tensor> {
        check_input(x, self.input_hw, "D_trans")?;
        let mut y = x.clone();
        for c in &self.prior {
            y = leaky_relu(&sobel_magnitude(&c.forward(&y)?, &self.sobel)?, LRELU_SLOPE);
        }
        Ok(y)
    }

    pub fn forward(&self, x: &Tensor) -> Result<TransOutput> {
        let v_p = self.prior(x)?;
        let v_g = flatten(&self.main.forward(x)?)?;
        let fused = cat(&[&spatial_mean(&v_p)?, &v_g], 1)?;
        Ok(TransOutput {
            logit: self.head.forward(&fused)?,
            v_p,
        })
    }

    /// Copy the main-branch convs from a stage-1 discriminator.
    pub fn copy_main_from(&self, spre: &DiscSpre) -> Result<()> {
        for (dst, src) in self.main.convs.iter().zip(&spre.stack.convs) {
            dst.weight.set_data(src.weight.to_vec())?;
            dst.bias.set_data(src.bias.to_vec())?;
        }
        Ok(())
    }

    /// The constant Sobel kernels; never trained.
    pub fn frozen_parameters(&self) -> Vec<Parameter> {
        vec![Parameter::new("dtrans.prior.sobel", self.sobel.clone())]
    }
}

impl Module for DiscTrans {
    fn collect_parameters(&self, out: &mut Vec<Parameter>) {
        self.main.push("dtrans.main", out);
        for (i, c) in self.prior.iter().enumerate() {
            c.push(&format!("dtrans.prior.block{i}"), out);
        }
        self.head.push("dtrans.head", out);
    }
}
