//! Scalar-loop reference implementations shared by the integration tests
//! and the acceptance harness.

#![allow(dead_code)]

use dasr_core::imaging::Image;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut impl Rng, h: usize, w: usize) -> Image {
    let data = (0..h * w).map(|_| rng.random::<f32>()).collect();
    Image::new(h, w, 1, data).unwrap()
}

pub fn random_vec(rng: &mut impl Rng, n: usize, lo: f32, hi: f32) -> Vec<f32> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Valid-region Sobel magnitude, one pixel at a time.
pub fn sobel_oracle(img: &Image) -> Vec<f64> {
    let (h, w) = (img.height(), img.width());
    let gh = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
    let gv = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];
    let mut out = Vec::new();
    for y in 0..h - 2 {
        for x in 0..w - 2 {
            let (mut a, mut b) = (0.0f64, 0.0f64);
            for i in 0..3 {
                for j in 0..3 {
                    let v = f64::from(img.get(y + i, x + j, 0));
                    a += gh[i][j] * v;
                    b += gv[i][j] * v;
                }
            }
            out.push((a * a + b * b).sqrt());
        }
    }
    out
}

/// Cross-correlation with zero padding, `[N,Cin,H,W] × [Cout,Cin,k,k]`.
#[allow(clippy::too_many_arguments)]
pub fn conv_oracle(
    x: &[f32],
    (n, cin, h, w): (usize, usize, usize, usize),
    wt: &[f32],
    (cout, k): (usize, usize),
    bias: &[f32],
    stride: usize,
    pad: usize,
) -> Vec<f64> {
    let ho = (h + 2 * pad - k) / stride + 1;
    let wo = (w + 2 * pad - k) / stride + 1;
    let mut out = vec![0f64; n * cout * ho * wo];
    for b in 0..n {
        for o in 0..cout {
            for y in 0..ho {
                for xx in 0..wo {
                    let mut acc = f64::from(bias[o]);
                    for c in 0..cin {
                        for i in 0..k {
                            for j in 0..k {
                                let iy = (y * stride + i) as isize - pad as isize;
                                let ix = (xx * stride + j) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                let v = x[((b * cin + c) * h + iy as usize) * w + ix as usize];
                                acc += f64::from(v) * f64::from(wt[((o * cin + c) * k + i) * k + j]);
                            }
                        }
                    }
                    out[((b * cout + o) * ho + y) * wo + xx] = acc;
                }
            }
        }
    }
    out
}

fn byte(v: f32) -> f64 {
    (f64::from(v).clamp(0.0, 1.0) * 255.0).round()
}

pub fn mse_oracle(a: &Image, b: &Image) -> f64 {
    let mut total = 0.0;
    for y in 0..a.height() {
        for x in 0..a.width() {
            let d = byte(a.get(y, x, 0)) - byte(b.get(y, x, 0));
            total += d * d;
        }
    }
    total / (a.height() * a.width()) as f64
}

pub fn psnr_oracle(a: &Image, b: &Image) -> f64 {
    let m = mse_oracle(a, b);
    if m == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0f64 * 255.0 / m).log10()
    }
}

/// 11×11 Gaussian (σ 1.5) SSIM, averaged over every fully contained window,
/// with each window's statistics summed directly.
pub fn ssim_oracle(a: &Image, b: &Image) -> f64 {
    const K: usize = 11;
    let g1: Vec<f64> = (0..K).map(|i| (-((i as f64 - 5.0).powi(2)) / 4.5).exp()).collect();
    let norm: f64 = g1.iter().sum::<f64>().powi(2);
    let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));
    let (h, w) = (a.height(), a.width());
    let mut total = 0.0;
    let mut count = 0usize;
    for y in 0..=h - K {
        for x in 0..=w - K {
            let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..K {
                for j in 0..K {
                    let wgt = g1[i] * g1[j] / norm;
                    let (p, q) = (byte(a.get(y + i, x + j, 0)), byte(b.get(y + i, x + j, 0)));
                    mx += wgt * p;
                    my += wgt * q;
                    sxx += wgt * p * p;
                    syy += wgt * q * q;
                    sxy += wgt * p * q;
                }
            }
            let (vx, vy, cxy) = (sxx - mx * mx, syy - my * my, sxy - mx * my);
            total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    total / count as f64
}

/// Smooth-ish random scene: gradient plus a few rectangles and a grating.
pub fn textured_image(rng: &mut impl Rng, h: usize, w: usize) -> Image {
    let (gx, gy) = (rng.random_range(-0.3..0.3f32), rng.random_range(-0.3..0.3f32));
    let freq = rng.random_range(0.2..0.9f32);
    let phase = rng.random_range(0.0..std::f32::consts::TAU);
    let rects: Vec<(usize, usize, usize, usize, f32)> = (0..4)
        .map(|_| {
            let (y0, x0) = (rng.random_range(0..h - 4), rng.random_range(0..w - 4));
            let (y1, x1) = (rng.random_range(y0 + 2..h), rng.random_range(x0 + 2..w));
            (y0, x0, y1, x1, rng.random_range(-0.3..0.3f32))
        })
        .collect();
    Image::from_fn(h, w, |y, x| {
        let (fy, fx) = (y as f32 / h as f32, x as f32 / w as f32);
        let mut v = 0.5 + gx * (fx - 0.5) + gy * (fy - 0.5);
        v += 0.15 * (freq * (x as f32 + 0.5 * y as f32) + phase).sin();
        for &(y0, x0, y1, x1, d) in &rects {
            if (y0..y1).contains(&y) && (x0..x1).contains(&x) {
                v += d;
            }
        }
        v.clamp(0.0, 1.0)
    })
}
