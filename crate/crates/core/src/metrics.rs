//! PSNR, MSE and SSIM on the 8-bit grid, and benchmark-table aggregation.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Image;

const MAX: f64 = 255.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// dB; `f64::INFINITY` when the images are identical on the 8-bit grid.
    pub psnr: f64,
    pub mse: f64,
    pub ssim: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SsimMode {
    /// Mean over 11×11 Gaussian (σ = 1.5) windows at every valid position.
    #[default]
    Windowed,
    /// A single window covering the whole image.
    Global,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SsimDomain {
    /// Quantize to bytes, dynamic range L = 255.
    #[default]
    EightBit,
    /// Raw `[0, 1]` samples, L = 1.
    Unit,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SsimOptions {
    pub mode: SsimMode,
    pub domain: SsimDomain,
}

fn check_pair(hr: &Image, sr: &Image) -> Result<()> {
    if !hr.same_extent(sr) || hr.channels() != sr.channels() {
        return Err(Error::shape(format!(
            "metric pair extents differ: {}x{}x{} vs {}x{}x{}",
            hr.height(),
            hr.width(),
            hr.channels(),
            sr.height(),
            sr.width(),
            sr.channels()
        )));
    }
    Ok(())
}

/// Mean squared difference in 0–255 units after 8-bit quantization.
pub fn mse(hr: &Image, sr: &Image) -> Result<f64> {
    check_pair(hr, sr)?;
    let (a, b) = (hr.to_u8(), sr.to_u8());
    let total: u64 = a
        .iter()
        .zip(&b)
        .map(|(&x, &y)| {
            let d = i64::from(x) - i64::from(y);
            (d * d) as u64
        })
        .sum();
    Ok(total as f64 / a.len().max(1) as f64)
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (MAX * MAX / mse).log10()
    }
}

pub fn psnr(hr: &Image, sr: &Image) -> Result<f64> {
    mse(hr, sr).map(psnr_from_mse)
}

/// Windowed SSIM on 8-bit luma (the default protocol).
pub fn ssim(hr: &Image, sr: &Image) -> Result<f64> {
    ssim_with(hr, sr, SsimOptions::default())
}

fn ssim_plane(img: &Image, domain: SsimDomain) -> Vec<f64> {
    let luma = img.to_luma();
    match domain {
        SsimDomain::EightBit => luma.to_u8().into_iter().map(f64::from).collect(),
        SsimDomain::Unit => luma.data().iter().map(|&v| f64::from(v)).collect(),
    }
}

fn ssim_formula(mx: f64, my: f64, vx: f64, vy: f64, cxy: f64, c1: f64, c2: f64) -> f64 {
    ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}

pub fn ssim_with(hr: &Image, sr: &Image, opts: SsimOptions) -> Result<f64> {
    if !hr.same_extent(sr) {
        return Err(Error::shape(format!(
            "SSIM pair extents differ: {}x{} vs {}x{}",
            hr.height(),
            hr.width(),
            sr.height(),
            sr.width()
        )));
    }
    let l = match opts.domain {
        SsimDomain::EightBit => MAX,
        SsimDomain::Unit => 1.0,
    };
    let (c1, c2) = ((0.01 * l).powi(2), (0.03 * l).powi(2));
    let (x, y) = (ssim_plane(hr, opts.domain), ssim_plane(sr, opts.domain));
    let (h, w) = (hr.height(), hr.width());
    match opts.mode {
        SsimMode::Global => {
            let n = (h * w) as f64;
            let mx = x.iter().sum::<f64>() / n;
            let my = y.iter().sum::<f64>() / n;
            let vx = x.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / n;
            let vy = y.iter().map(|v| (v - my).powi(2)).sum::<f64>() / n;
            let cxy = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n;
            Ok(ssim_formula(mx, my, vx, vy, cxy, c1, c2))
        }
        SsimMode::Windowed => {
            const WIN: usize = 11;
            if h < WIN || w < WIN {
                return Err(Error::shape(format!(
                    "windowed SSIM needs at least {WIN}x{WIN}, got {h}x{w}"
                )));
            }
            let g = gaussian_window(WIN, 1.5);
            let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
            let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
            let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
            let filt = |p: &[f64]| filter_valid(p, h, w, &g);
            let (mx, my) = (filt(&x), filt(&y));
            let (sxx, syy, sxy) = (filt(&xx), filt(&yy), filt(&xy));
            let n = mx.len();
            let total: f64 = (0..n)
                .map(|i| {
                    let (a, b) = (mx[i], my[i]);
                    ssim_formula(a, b, sxx[i] - a * a, syy[i] - b * b, sxy[i] - a * b, c1, c2)
                })
                .sum();
            Ok(total / n as f64)
        }
    }
}

fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let r = (size / 2) as f64;
    let raw: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - r).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Separable weighted window sum at every fully-contained position.
fn filter_valid(p: &[f64], h: usize, w: usize, g: &[f64]) -> Vec<f64> {
    let k = g.len();
    let (ho, wo) = (h - k + 1, w - k + 1);
    let mut tmp = vec![0f64; h * wo];
    for y in 0..h {
        for x in 0..wo {
            tmp[y * wo + x] = (0..k).map(|j| g[j] * p[y * w + x + j]).sum();
        }
    }
    let mut out = vec![0f64; ho * wo];
    for y in 0..ho {
        for x in 0..wo {
            out[y * wo + x] = (0..k).map(|i| g[i] * tmp[(y + i) * wo + x]).sum();
        }
    }
    out
}

pub fn evaluate_pair(hr: &Image, sr: &Image) -> Result<MetricReport> {
    let m = mse(hr, sr)?;
    Ok(MetricReport {
        psnr: psnr_from_mse(m),
        mse: m,
        ssim: ssim(hr, sr)?,
    })
}

/// One line of a results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub dataset: String,
    pub scale: usize,
    /// Mean over images with finite PSNR (infinite if there are none).
    pub psnr: f64,
    pub mse: f64,
    pub ssim: f64,
    pub n: usize,
    /// Images excluded from the PSNR mean because they matched exactly.
    pub psnr_inf: usize,
}

impl BenchRow {
    pub fn from_reports(dataset: &str, scale: usize, reports: &[MetricReport]) -> Result<Self> {
        if reports.is_empty() {
            return Err(Error::invalid(format!("no images to evaluate for {dataset}")));
        }
        let n = reports.len() as f64;
        let finite: Vec<f64> = reports.iter().map(|r| r.psnr).filter(|p| p.is_finite()).collect();
        let psnr = if finite.is_empty() {
            f64::INFINITY
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        Ok(Self {
            dataset: dataset.to_string(),
            scale,
            psnr,
            mse: reports.iter().map(|r| r.mse).sum::<f64>() / n,
            ssim: reports.iter().map(|r| r.ssim).sum::<f64>() / n,
            n: reports.len(),
            psnr_inf: reports.len() - finite.len(),
        })
    }

    pub const CSV_HEADER: &'static str = "dataset,scale,psnr,mse,ssim,n";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{:.4},{:.4},{:.4},{}",
            self.dataset, self.scale, self.psnr, self.mse, self.ssim, self.n
        )
    }
}

/// Arithmetic means over `(hr, sr)` pairs.
pub fn evaluate_set(pairs: &[(Image, Image)], name: &str, scale: usize) -> Result<BenchRow> {
    let reports = pairs
        .iter()
        .map(|(hr, sr)| evaluate_pair(hr, sr))
        .collect::<Result<Vec<_>>>()?;
    BenchRow::from_reports(name, scale, &reports)
}

pub fn csv_table(rows: &[BenchRow]) -> String {
    let mut s = String::from(BenchRow::CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_csv());
        s.push('\n');
    }
    s
}

/// Markdown table with aligned columns, ordered PSNR↑ MSE↓ SSIM↑.
pub fn markdown_table(rows: &[BenchRow]) -> String {
    let header = ["Dataset", "Scale", "PSNR↑", "MSE↓", "SSIM↑", "N"];
    let cells: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            [
                r.dataset.clone(),
                format!("×{}", r.scale),
                format!("{:.4}", r.psnr),
                format!("{:.4}", r.mse),
                format!("{:.4}", r.ssim),
                r.n.to_string(),
            ]
        })
        .collect();
    let width = |i: usize| {
        cells
            .iter()
            .map(|c| c[i].chars().count())
            .chain(std::iter::once(header[i].chars().count()))
            .max()
            .unwrap_or(0)
    };
    let widths: Vec<usize> = (0..6).map(width).collect();
    let mut out = String::new();
    let line = |out: &mut String, cols: &[String]| {
        out.push('|');
        for (c, w) in cols.iter().zip(&widths) {
            let pad = w - c.chars().count();
            let _ = write!(out, " {c}{} |", " ".repeat(pad));
        }
        out.push('\n');
    };
    line(&mut out, &header.map(String::from));
    line(&mut out, &widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>());
    for c in &cells {
        line(&mut out, c);
    }
    out
}
