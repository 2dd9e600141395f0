use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::Image;
use crate::error::{Error, Result};
use crate::tensor::{SOBEL_GH, SOBEL_GV};

/// Normalized 1-D Gaussian of radius `ceil(3σ)`; `[1.0]` for σ = 0.
pub fn gaussian_kernel(sigma: f32) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let s = f64::from(sigma);
    let r = (3.0 * s).ceil() as isize;
    let raw: Vec<f64> = (-r..=r).map(|i| (-((i * i) as f64) / (2.0 * s * s)).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Mirror an out-of-range index back into `0..n` (edge sample not repeated).
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    (if m < n as isize { m } else { period - m }) as usize
}

/// Separable Gaussian blur with reflect padding. σ = 0 returns the input.
pub fn gaussian_blur(img: &Image, sigma: f32) -> Image {
    if sigma <= 0.0 {
        return img.clone();
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let src = img.data();
    let mut tmp = vec![0f64; h * w * c];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0f64;
                for (t, &kv) in k.iter().enumerate() {
                    let ix = reflect(x as isize + t as isize - r, w);
                    acc += kv * f64::from(src[(y * w + ix) * c + ch]);
                }
                tmp[(y * w + x) * c + ch] = acc;
            }
        }
    }
    let mut out = vec![0f32; h * w * c];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0f64;
                for (t, &kv) in k.iter().enumerate() {
                    let iy = reflect(y as isize + t as isize - r, h);
                    acc += kv * tmp[(iy * w + x) * c + ch];
                }
                out[(y * w + x) * c + ch] = acc as f32;
            }
        }
    }
    Image::new(h, w, c, out).expect("extent unchanged")
}

/// I.i.d. `N(0, σ²)` per sample, then clamp to `[0, 1]`.
pub fn add_gaussian_noise(img: &Image, sigma: f32, seed: u64) -> Image {
    if sigma <= 0.0 {
        return img.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0f64, f64::from(sigma)).expect("sigma is positive and finite");
    let data = img
        .data()
        .iter()
        .map(|&v| (f64::from(v) + normal.sample(&mut rng)).clamp(0.0, 1.0) as f32)
        .collect();
    Image::new(img.height(), img.width(), img.channels(), data).expect("extent unchanged")
}

/// Non-negative edge magnitude over the valid region (`H−2 × W−2`).
#[derive(Clone, Debug, PartialEq)]
pub struct SobelMap {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl SobelMap {
    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| f64::from(v)).sum::<f64>() / self.data.len().max(1) as f64
    }

    pub fn max(&self) -> f32 {
        self.data.iter().copied().fold(0.0, f32::max)
    }

    /// Gray image scaled so the largest magnitude maps to 1; all zeros stay 0.
    pub fn to_image(&self) -> Image {
        let m = self.max();
        let data = if m > 0.0 {
            self.data.iter().map(|&v| v / m).collect()
        } else {
            vec![0.0; self.data.len()]
        };
        Image::new(self.height, self.width, 1, data).expect("consistent extent")
    }
}

/// `sqrt((G_h ⊙ I)² + (G_v ⊙ I)²)` on the luma of `img`, no padding.
pub fn sobel_map(img: &Image) -> Result<SobelMap> {
    let (h, w) = (img.height(), img.width());
    if h < 3 || w < 3 {
        return Err(Error::shape(format!("Sobel map needs at least 3x3, got {h}x{w}")));
    }
    let luma = img.to_luma();
    let src = luma.data();
    let (ho, wo) = (h - 2, w - 2);
    let mut data = Vec::with_capacity(ho * wo);
    for y in 0..ho {
        for x in 0..wo {
            let (mut gh, mut gv) = (0f64, 0f64);
            for i in 0..3 {
                for j in 0..3 {
                    let v = f64::from(src[(y + i) * w + x + j]);
                    gh += f64::from(SOBEL_GH[i * 3 + j]) * v;
                    gv += f64::from(SOBEL_GV[i * 3 + j]) * v;
                }
            }
            data.push((gh * gh + gv * gv).sqrt() as f32);
        }
    }
    Ok(SobelMap {
        height: ho,
        width: wo,
        data,
    })
}
