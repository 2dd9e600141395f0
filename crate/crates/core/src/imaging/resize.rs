use super::Image;
use crate::error::{Error, Result};

const A: f64 = -0.5;

/// Keys cubic convolution kernel with `a = −0.5`.
pub(crate) fn cubic(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

/// Per output index: list of `(source index, weight)`, weights summing to 1.
fn axis_weights(n_in: usize, n_out: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = n_in as f64 / n_out as f64;
    // Downscaling stretches the kernel so it low-passes before sampling.
    let stretch = scale.max(1.0);
    let support = 2.0 * stretch;
    (0..n_out)
        .map(|o| {
            let center = (o as f64 + 0.5) * scale - 0.5;
            let lo = (center - support).floor() as isize + 1;
            let hi = (center + support).ceil() as isize - 1;
            let mut taps: Vec<(usize, f64)> = Vec::new();
            for i in lo..=hi {
                let wgt = cubic((i as f64 - center) / stretch);
                if wgt == 0.0 {
                    continue;
                }
                let idx = i.clamp(0, n_in as isize - 1) as usize;
                match taps.iter_mut().find(|(j, _)| *j == idx) {
                    Some(t) => t.1 += wgt,
                    None => taps.push((idx, wgt)),
                }
            }
            let total: f64 = taps.iter().map(|t| t.1).sum();
            taps.iter_mut().for_each(|t| t.1 /= total);
            taps
        })
        .collect()
}

/// Separable bicubic resampling with pixel-centre alignment, clamped
/// borders and an antialiasing kernel on downscale. Output is clamped to
/// `[0, 1]`.
pub fn bicubic_resize(img: &Image, out_h: usize, out_w: usize) -> Result<Image> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::invalid(format!("resize target {out_h}x{out_w} is empty")));
    }
    if img.height() == 0 || img.width() == 0 {
        return Err(Error::invalid("cannot resize an empty image"));
    }
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let src = img.data();
    let wx = axis_weights(w, out_w);
    let wy = axis_weights(h, out_h);

    // Horizontal pass into f64 so the vertical pass sees unrounded values.
    let mut tmp = vec![0f64; h * out_w * c];
    for y in 0..h {
        for (ox, taps) in wx.iter().enumerate() {
            for ch in 0..c {
                let mut acc = 0f64;
                for &(ix, wgt) in taps {
                    acc += wgt * f64::from(src[(y * w + ix) * c + ch]);
                }
                tmp[(y * out_w + ox) * c + ch] = acc;
            }
        }
    }
    let mut out = vec![0f32; out_h * out_w * c];
    for (oy, taps) in wy.iter().enumerate() {
        for ox in 0..out_w {
            for ch in 0..c {
                let mut acc = 0f64;
                for &(iy, wgt) in taps {
                    acc += wgt * tmp[(iy * out_w + ox) * c + ch];
                }
                out[(oy * out_w + ox) * c + ch] = acc.clamp(0.0, 1.0) as f32;
            }
        }
    }
    Image::new(out_h, out_w, c, out)
}
