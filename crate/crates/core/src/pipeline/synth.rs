use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{DatasetManifest, ManifestEntry, MANIFEST_FILE};
use crate::error::{Error, Result};
use crate::imaging::{gaussian_blur, save_image, DegradationSpec, Image};
use crate::seed;

/// Procedural paired scenes standing in for aligned IR/visible captures.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSceneSpec {
    pub count: usize,
    /// Square HR extent in pixels.
    pub extent: usize,
    pub seed: u64,
    pub scale: usize,
}

impl Default for SyntheticSceneSpec {
    fn default() -> Self {
        Self {
            count: 8,
            extent: 128,
            seed: 0,
            scale: 2,
        }
    }
}

/// Shared scene geometry, luminance in [0, 1].
fn scene(rng: &mut ChaCha8Rng, n: usize) -> Vec<f32> {
    let nf = n as f32;
    let (gx, gy) = (rng.random_range(-0.4f32..0.4), rng.random_range(-0.4f32..0.4));
    let base = rng.random_range(0.3f32..0.7);
    let mut img: Vec<f32> = (0..n * n)
        .map(|i| {
            let (y, x) = ((i / n) as f32 / nf - 0.5, (i % n) as f32 / nf - 0.5);
            base + gx * x + gy * y
        })
        .collect();

    // Rectangles with hard edges.
    for _ in 0..rng.random_range(2..6) {
        let (h, w) = (rng.random_range(n / 8..n / 2), rng.random_range(n / 8..n / 2));
        let (top, left) = (rng.random_range(0..n - h), rng.random_range(0..n - w));
        let v = rng.random_range(0.0f32..1.0);
        for y in top..top + h {
            img[y * n + left..y * n + left + w].fill(v);
        }
    }

    // A sinusoid grating patch.
    let (period, angle) = (
        rng.random_range(4.0f32..12.0),
        rng.random_range(0.0f32..std::f32::consts::PI),
    );
    let (cy, cx, r) = (
        rng.random_range(0.25f32..0.75) * nf,
        rng.random_range(0.25f32..0.75) * nf,
        rng.random_range(0.1f32..0.25) * nf,
    );
    let amp = rng.random_range(0.15f32..0.35);
    let (ca, sa) = (angle.cos(), angle.sin());
    for y in 0..n {
        for x in 0..n {
            let (dy, dx) = (y as f32 - cy, x as f32 - cx);
            if dy * dy + dx * dx < r * r {
                let t = (dx * ca + dy * sa) * std::f32::consts::TAU / period;
                img[y * n + x] += amp * t.sin();
            }
        }
    }

    // A step edge across the whole frame.
    let (ny, nx) = (rng.random_range(-1.0f32..1.0), rng.random_range(-1.0f32..1.0));
    let off = rng.random_range(-0.3f32..0.3) * nf;
    let step = rng.random_range(-0.25f32..0.25);
    for y in 0..n {
        for x in 0..n {
            let d = (y as f32 - nf / 2.0) * ny + (x as f32 - nf / 2.0) * nx;
            if d > off {
                img[y * n + x] += step;
            }
        }
    }
    img.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    img
}

/// Thermal-like rendering: compressed, inverted-ish contrast and a mild blur.
fn render_ir(scene: &[f32], n: usize, warm: f32) -> Image {
    let img = Image::from_fn(n, n, |y, x| {
        let v = scene[y * n + x];
        (0.15 + 0.7 * (warm * v + (1.0 - warm) * (1.0 - v))).powf(1.2)
    });
    gaussian_blur(&img, 0.8)
}

/// Visible rendering: colourised scene plus fine texture the IR band lacks.
fn render_vis(rng: &mut ChaCha8Rng, scene: &[f32], n: usize) -> Image {
    let tint: [f32; 3] = [
        rng.random_range(0.7..1.0),
        rng.random_range(0.7..1.0),
        rng.random_range(0.7..1.0),
    ];
    let tex: Vec<f32> = (0..n * n).map(|_| rng.random_range(-0.06f32..0.06)).collect();
    let mut data = Vec::with_capacity(n * n * 3);
    for i in 0..n * n {
        let (y, x) = (i / n, i % n);
        let fine = tex[i] + 0.04 * if (y / 2 + x / 2) % 2 == 0 { 1.0 } else { -1.0 };
        for t in tint {
            data.push((t * scene[i] + fine).clamp(0.0, 1.0));
        }
    }
    Image::new(n, n, 3, data).expect("consistent extent")
}

/// Write `count` aligned pairs under `out_dir/{ir,vis}` plus a manifest.
pub fn make_synthetic_dataset(spec: &SyntheticSceneSpec, out_dir: &Path) -> Result<DatasetManifest> {
    if spec.count == 0 {
        return Err(Error::Config("synthetic dataset needs count ≥ 1".into()));
    }
    if spec.extent < 16 || !spec.extent.is_multiple_of(spec.scale) {
        return Err(Error::Config(format!(
            "extent {} must be ≥ 16 and a multiple of the scale {}",
            spec.extent, spec.scale
        )));
    }
    let degradation = DegradationSpec {
        scale: spec.scale,
        blur_sigma: 0.0,
        noise_sigma: 0.0,
        seed: seed::derive(spec.seed, "degradation"),
    };
    degradation.validate()?;
    for sub in ["ir", "vis"] {
        let d = out_dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let n = spec.extent;
    let mut entries = Vec::with_capacity(spec.count);
    for i in 0..spec.count {
        let mut rng = seed::rng(seed::derive_indexed(spec.seed, "scene", i as u64));
        let geometry = scene(&mut rng, n);
        let warm = rng.random_range(0.0f32..1.0).round();
        let ir = render_ir(&geometry, n, warm);
        let vis = render_vis(&mut rng, &geometry, n);
        let name = format!("{i:04}.png");
        let (ir_rel, vis_rel) = (Path::new("ir").join(&name), Path::new("vis").join(&name));
        save_image(&ir, out_dir.join(&ir_rel))?;
        save_image(&vis, out_dir.join(&vis_rel))?;
        entries.push(ManifestEntry {
            ir: ir_rel,
            vis: Some(vis_rel),
            extent: Some([n, n]),
        });
    }
    let manifest = DatasetManifest {
        scale: spec.scale,
        degradation,
        entries,
        root: out_dir.to_path_buf(),
    };
    manifest.save(out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}
