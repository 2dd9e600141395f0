//! Rasters, file I/O, degradation operators and the Sobel edge map.

mod crop;
mod filter;
mod io;
mod resize;

pub use crop::{center_crop, crop, modcrop, random_paired_crop};
pub use filter::{add_gaussian_noise, gaussian_blur, gaussian_kernel, sobel_map, SobelMap};
pub use io::{load_image, save_image};
pub use resize::bicubic_resize;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Row-major, channel-last raster with samples nominally in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!("images have 1 or 3 channels, got {channels}")));
        }
        if data.len() != height * width * channels {
            return Err(Error::shape(format!(
                "{height}x{width}x{channels} image needs {} samples, got {}",
                height * width * channels,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    /// Single-channel image from a function of `(row, col)`.
    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Self {
            height,
            width,
            channels: 1,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn same_extent(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub fn clamp(mut self) -> Self {
        self.data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        self
    }

    /// `round(clamp(v, 0, 1) · 255)` per sample.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    pub fn from_u8(height: usize, width: usize, channels: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(
            height,
            width,
            channels,
            bytes.iter().map(|&b| f32::from(b) / 255.0).collect(),
        )
    }

    /// Snap every sample to the 8-bit grid.
    pub fn quantized(&self) -> Self {
        Self {
            data: self.data.iter().map(|&v| f32::from(quantize(v)) / 255.0).collect(),
            ..self.clone()
        }
    }

    /// Single-channel view: identity for gray, Rec.601 luma for RGB.
    pub fn to_luma(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| (0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2])) as f32)
            .collect();
        Image {
            height: self.height,
            width: self.width,
            channels: 1,
            data,
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| f64::from(v)).sum::<f64>() / self.data.len().max(1) as f64
    }

    /// `[1, C, H, W]` tensor (channel-first).
    pub fn to_tensor(&self) -> Tensor {
        images_to_tensor(std::slice::from_ref(self)).expect("single image is consistent")
    }

    /// Image `index` of an `[N, C, H, W]` tensor.
    pub fn from_tensor(t: &Tensor, index: usize) -> Result<Image> {
        let (n, c, h, w) = t.dims4()?;
        if index >= n {
            return Err(Error::shape(format!("batch index {index} out of range for N={n}")));
        }
        let d = t.data();
        let plane = &d[index * c * h * w..(index + 1) * c * h * w];
        let mut data = vec![0f32; c * h * w];
        for ch in 0..c {
            for p in 0..h * w {
                data[p * c + ch] = plane[ch * h * w + p];
            }
        }
        Image::new(h, w, c, data)
    }
}

pub(crate) fn quantize(v: f32) -> u8 {
    // The f64 product is exact, so ties round the same way everywhere.
    (f64::from(v.clamp(0.0, 1.0)) * 255.0).round() as u8
}

/// Stack equally sized images into an `[N, C, H, W]` tensor.
pub fn images_to_tensor(images: &[Image]) -> Result<Tensor> {
    let Some(first) = images.first() else {
        return Err(Error::shape("no images to stack"));
    };
    let (h, w, c) = (first.height, first.width, first.channels);
    let mut data = Vec::with_capacity(images.len() * c * h * w);
    for img in images {
        if img.height != h || img.width != w || img.channels != c {
            return Err(Error::shape(format!(
                "cannot stack {}x{}x{} with {h}x{w}x{c}",
                img.height, img.width, img.channels
            )));
        }
        for ch in 0..c {
            data.extend(img.data.iter().skip(ch).step_by(c));
        }
    }
    Tensor::new(data, &[images.len(), c, h, w])
}

/// Synthetic degradation: blur, bicubic downscale by `scale`, additive noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradationSpec {
    pub scale: usize,
    #[serde(default)]
    pub blur_sigma: f32,
    #[serde(default)]
    pub noise_sigma: f32,
    #[serde(default)]
    pub seed: u64,
}

impl Default for DegradationSpec {
    fn default() -> Self {
        Self {
            scale: 2,
            blur_sigma: 0.0,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

impl DegradationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.scale != 2 && self.scale != 4 {
            return Err(Error::Config(format!("scale must be 2 or 4, got {}", self.scale)));
        }
        if !(self.blur_sigma >= 0.0) || !(self.noise_sigma >= 0.0) {
            return Err(Error::Config("blur and noise sigma must be non-negative".into()));
        }
        Ok(())
    }

    /// Produce the LR counterpart of `hr`, whose extents must be multiples
    /// of the scale.
    pub fn apply(&self, hr: &Image) -> Result<Image> {
        self.validate()?;
        let s = self.scale;
        if !hr.height.is_multiple_of(s) || !hr.width.is_multiple_of(s) || hr.height < s || hr.width < s {
            return Err(Error::shape(format!(
                "HR extent {}x{} is not a positive multiple of scale {s}",
                hr.height, hr.width
            )));
        }
        let blurred = gaussian_blur(hr, self.blur_sigma);
        let lr = bicubic_resize(&blurred, hr.height / s, hr.width / s)?;
        Ok(add_gaussian_noise(&lr, self.noise_sigma, self.seed))
    }
}
