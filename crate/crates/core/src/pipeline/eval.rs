use std::fs;
use std::path::Path;

use super::checkpoint::Checkpoint;
use super::dataset::{bicubic_baseline, load_samples, DatasetManifest, Sample};
use super::train::generator_from;
use crate::error::{Error, Result};
use crate::imaging::{crop, save_image, Image};
use crate::metrics::{evaluate_pair, BenchRow, MetricReport};
use crate::models::Generator;
use crate::tensor::no_grad;

/// LR tile side for full-image inference.
pub const EVAL_TILE: usize = 64;
/// LR overlap between neighbouring tiles; overlapping outputs are averaged.
pub const EVAL_OVERLAP: usize = 8;

fn tile_starts(n: usize, tile: usize) -> Vec<usize> {
    if n <= tile {
        return vec![0];
    }
    let step = tile - EVAL_OVERLAP;
    let mut v: Vec<usize> = (0..n - tile).step_by(step).collect();
    v.push(n - tile);
    v
}

/// Run the generator over a whole LR image in overlapping tiles. The
/// output is clamped to `[0, 1]` for export.
pub fn super_resolve(g: &Generator, lr: &Image) -> Result<Image> {
    if lr.channels() != 1 {
        return Err(Error::shape("super_resolve takes single-channel images"));
    }
    let s = g.config().scale;
    let (h, w) = (lr.height(), lr.width());
    let (oh, ow) = (h * s, w * s);
    let mut acc = vec![0f32; oh * ow];
    let mut hits = vec![0u16; oh * ow];
    let _guard = no_grad();
    for &top in &tile_starts(h, EVAL_TILE) {
        for &left in &tile_starts(w, EVAL_TILE) {
            let (th, tw) = (EVAL_TILE.min(h), EVAL_TILE.min(w));
            let tile = crop(lr, top, left, th, tw)?;
            let out = g.forward(&tile.to_tensor())?;
            let data = out.data();
            let (sh, sw) = (th * s, tw * s);
            for y in 0..sh {
                let row = (top * s + y) * ow + left * s;
                for x in 0..sw {
                    acc[row + x] += data[y * sw + x];
                    hits[row + x] += 1;
                }
            }
        }
    }
    let data = acc.iter().zip(&hits).map(|(a, &n)| a / f32::from(n)).collect();
    Ok(Image::new(oh, ow, 1, data)?.clamp())
}

#[derive(Clone, Debug)]
pub struct EvalOutcome {
    pub model: BenchRow,
    pub bicubic: BenchRow,
    /// `(name, model report, bicubic report)` in manifest order.
    pub per_image: Vec<(String, MetricReport, MetricReport)>,
}

/// Evaluate `g` on preloaded samples. SR images are written to
/// `out_dir/sr/<name>.png` when `out_dir` is given.
pub fn evaluate_samples(
    g: &Generator,
    samples: &[Sample],
    dataset: &str,
    out_dir: Option<&Path>,
) -> Result<EvalOutcome> {
    let s = g.config().scale;
    if let Some(dir) = out_dir {
        let sr_dir = dir.join("sr");
        fs::create_dir_all(&sr_dir).map_err(|e| Error::io(&sr_dir, e))?;
    }
    let mut per_image = Vec::with_capacity(samples.len());
    for sample in samples {
        if sample.hr.height() != s * sample.lr.height() || sample.hr.width() != s * sample.lr.width() {
            return Err(Error::Config(format!(
                "{}: data is not at the model's scale {s}",
                sample.name
            )));
        }
        let sr = super_resolve(g, &sample.lr)?;
        let bic = bicubic_baseline(&sample.lr, s)?;
        if let Some(dir) = out_dir {
            save_image(&sr, dir.join("sr").join(format!("{}.png", sample.name)))?;
        }
        per_image.push((
            sample.name.clone(),
            evaluate_pair(&sample.hr, &sr.quantized())?,
            evaluate_pair(&sample.hr, &bic.quantized())?,
        ));
    }
    let model: Vec<MetricReport> = per_image.iter().map(|r| r.1).collect();
    let bicubic: Vec<MetricReport> = per_image.iter().map(|r| r.2).collect();
    Ok(EvalOutcome {
        model: BenchRow::from_reports(dataset, s, &model)?,
        bicubic: BenchRow::from_reports(&format!("{dataset} (bicubic)"), s, &bicubic)?,
        per_image,
    })
}

/// Evaluate a checkpoint's generator on every manifest entry.
pub fn evaluate_checkpoint(checkpoint: &Checkpoint, manifest: &DatasetManifest, out_dir: &Path) -> Result<EvalOutcome> {
    if checkpoint.config.scale != manifest.scale {
        return Err(Error::Config(format!(
            "checkpoint scale {} does not match data scale {}",
            checkpoint.config.scale, manifest.scale
        )));
    }
    let g = generator_from(checkpoint)?;
    let name = manifest
        .root
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".into());
    evaluate_samples(&g, &load_samples(manifest)?, &name, Some(out_dir))
}

/// Harness sanity row: every HR image scored against itself.
pub fn self_check(manifest: &DatasetManifest) -> Result<BenchRow> {
    let samples = load_samples(manifest)?;
    let reports = samples
        .iter()
        .map(|s| evaluate_pair(&s.hr, &s.hr))
        .collect::<Result<Vec<_>>>()?;
    BenchRow::from_reports("hr-self-check", manifest.scale, &reports)
}
