use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{bicubic_resize, load_image, modcrop, DegradationSpec, Image};
use crate::seed;

pub const MANIFEST_FILE: &str = "manifest.json";

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "pgm", "ppm", "pnm"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub ir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vis: Option<PathBuf>,
    /// HR extent after cropping to a multiple of the scale.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extent: Option<[usize; 2]>,
}

impl ManifestEntry {
    /// File stem of the IR image, used to name outputs.
    pub fn name(&self) -> String {
        self.ir
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "image".into())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
struct DegradationJson {
    #[serde(default)]
    blur_sigma: f32,
    #[serde(default)]
    noise_sigma: f32,
    #[serde(default)]
    seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestJson {
    scale: usize,
    #[serde(default)]
    degradation: DegradationJson,
    entries: Vec<ManifestEntry>,
}

/// Paired IR (and optionally visible) images plus the degradation that
/// turns each HR IR image into its LR input. Relative entry paths resolve
/// against `root`.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub scale: usize,
    pub degradation: DegradationSpec,
    pub entries: Vec<ManifestEntry>,
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        self.degradation.validate()?;
        if self.degradation.scale != self.scale {
            return Err(Error::Config(format!(
                "manifest scale {} disagrees with degradation scale {}",
                self.scale, self.degradation.scale
            )));
        }
        if self.entries.is_empty() {
            return Err(Error::Dataset(vec!["manifest lists no images".into()]));
        }
        Ok(())
    }

    pub fn has_vis(&self) -> bool {
        !self.entries.is_empty() && self.entries.iter().all(|e| e.vis.is_some())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    /// Same images, different degradation.
    pub fn with_degradation(&self, blur_sigma: f32, noise_sigma: f32) -> Self {
        let mut m = self.clone();
        m.degradation.blur_sigma = blur_sigma;
        m.degradation.noise_sigma = noise_sigma;
        m
    }

    pub fn to_json(&self) -> String {
        let doc = ManifestJson {
            scale: self.scale,
            degradation: DegradationJson {
                blur_sigma: self.degradation.blur_sigma,
                noise_sigma: self.degradation.noise_sigma,
                seed: self.degradation.seed,
            },
            entries: self.entries.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("manifest serializes") + "\n"
    }

    pub fn from_json(text: &str, root: impl Into<PathBuf>) -> Result<Self> {
        let doc: ManifestJson = serde_json::from_str(text)?;
        let m = Self {
            scale: doc.scale,
            degradation: DegradationSpec {
                scale: doc.scale,
                blur_sigma: doc.degradation.blur_sigma,
                noise_sigma: doc.degradation.noise_sigma,
                seed: doc.degradation.seed,
            },
            entries: doc.entries,
            root: root.into(),
        };
        m.validate()?;
        Ok(m)
    }

    /// Load from a manifest file, or from `manifest.json` inside a directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        let root = file.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, root)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let rd = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in rd {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = p
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        if p.is_file() && IMAGE_EXTENSIONS.contains(&ext.as_str()) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Build a manifest from a directory of IR images and, optionally, a
/// directory of visible images matched by file stem. Every problem found
/// is reported in one aggregated error.
pub fn ingest_dataset(
    ir_dir: &Path,
    vis_dir: Option<&Path>,
    scale: usize,
    degradation: DegradationSpec,
) -> Result<DatasetManifest> {
    let degradation = DegradationSpec { scale, ..degradation };
    degradation.validate()?;
    let irs = list_images(ir_dir)?;
    if irs.is_empty() {
        return Err(Error::Dataset(vec![format!("{}: no images found", ir_dir.display())]));
    }
    let vis = match vis_dir {
        Some(d) => Some(list_images(d)?),
        None => None,
    };
    let mut problems = Vec::new();
    let mut entries = Vec::new();
    for ir in &irs {
        let name = stem(ir);
        let extent = match load_image(ir) {
            Ok(img) => {
                let (h, w) = (img.height() / scale * scale, img.width() / scale * scale);
                if h == 0 || w == 0 {
                    problems.push(format!(
                        "{}: {}x{} is smaller than the scale {scale}",
                        ir.display(),
                        img.height(),
                        img.width()
                    ));
                }
                Some((img, [h, w]))
            }
            Err(e) => {
                problems.push(e.to_string());
                None
            }
        };
        let vis_path = match &vis {
            None => None,
            Some(list) => match list.iter().find(|v| stem(v) == name) {
                None => {
                    problems.push(format!("{}: no visible image named {name}", ir.display()));
                    None
                }
                Some(v) => {
                    match (load_image(v), &extent) {
                        (Err(e), _) => problems.push(e.to_string()),
                        (Ok(vi), Some((ii, _))) if !vi.same_extent(ii) => problems.push(format!(
                            "{}: {}x{} does not match IR {}x{}",
                            v.display(),
                            vi.height(),
                            vi.width(),
                            ii.height(),
                            ii.width()
                        )),
                        _ => {}
                    }
                    Some(v.clone())
                }
            },
        };
        entries.push(ManifestEntry {
            ir: ir.clone(),
            vis: vis_path,
            extent: extent.map(|(_, e)| e),
        });
    }
    if let Some(list) = &vis {
        for v in list {
            let name = stem(v);
            if !irs.iter().any(|i| stem(i) == name) {
                problems.push(format!("{}: no IR image named {name}", v.display()));
            }
        }
    }
    if !problems.is_empty() {
        return Err(Error::Dataset(problems));
    }
    Ok(DatasetManifest {
        scale,
        degradation,
        entries,
        root: PathBuf::new(),
    })
}

/// One HR IR image with its LR input, and the aligned visible luma pair
/// when the manifest has one.
#[derive(Clone, Debug)]
pub struct Sample {
    pub name: String,
    pub hr: Image,
    pub lr: Image,
    pub vis_lr: Option<Image>,
}

/// Decode every entry, crop HR to a multiple of the scale and degrade it
/// once. Noise seeds are derived per image, so the LR set is fixed by the
/// manifest alone.
pub fn load_samples(manifest: &DatasetManifest) -> Result<Vec<Sample>> {
    manifest.validate()?;
    let mut problems = Vec::new();
    let mut out = Vec::new();
    for (i, entry) in manifest.entries.iter().enumerate() {
        match load_sample(manifest, i, entry) {
            Ok(s) => out.push(s),
            Err(e) => problems.push(e.to_string()),
        }
    }
    if !problems.is_empty() {
        return Err(Error::Dataset(problems));
    }
    Ok(out)
}

fn load_sample(manifest: &DatasetManifest, i: usize, entry: &ManifestEntry) -> Result<Sample> {
    let s = manifest.scale;
    let deg = |tag: &str| DegradationSpec {
        seed: seed::derive_indexed(manifest.degradation.seed, tag, i as u64),
        ..manifest.degradation
    };
    let hr = modcrop(&load_image(manifest.resolve(&entry.ir))?.to_luma(), s)?;
    let lr = deg("ir").apply(&hr)?;
    let vis_lr = match &entry.vis {
        None => None,
        Some(v) => {
            let path = manifest.resolve(v);
            let vis = modcrop(&load_image(&path)?.to_luma(), s)?;
            if !vis.same_extent(&hr) {
                return Err(Error::Dataset(vec![format!(
                    "{}: extent differs from its IR pair",
                    path.display()
                )]));
            }
            Some(deg("vis").apply(&vis)?)
        }
    };
    Ok(Sample {
        name: entry.name(),
        hr,
        lr,
        vis_lr,
    })
}

/// Bicubic upscale of an LR image to the HR extent.
pub fn bicubic_baseline(lr: &Image, scale: usize) -> Result<Image> {
    bicubic_resize(lr, lr.height() * scale, lr.width() * scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::save_image;

    fn write(dir: &Path, name: &str, h: usize, w: usize, c: usize) {
        let img = Image::new(h, w, c, vec![0.5; h * w * c]).unwrap();
        save_image(&img, dir.join(name)).unwrap();
    }

    #[test]
    fn manifest_json_shape() {
        let m = DatasetManifest {
            scale: 2,
            degradation: DegradationSpec::default(),
            entries: vec![ManifestEntry {
                ir: "ir/a.png".into(),
                vis: None,
                extent: None,
            }],
            root: PathBuf::new(),
        };
        let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(v["scale"], 2);
        assert_eq!(v["entries"][0]["ir"], "ir/a.png");
        assert!(v["degradation"]["blur_sigma"].is_number());
        let back = DatasetManifest::from_json(&m.to_json(), "").unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn ingest_crops_and_matches() {
        let dir = tempfile::tempdir().unwrap();
        let (ir, vis) = (dir.path().join("ir"), dir.path().join("vis"));
        fs::create_dir_all(&ir).unwrap();
        fs::create_dir_all(&vis).unwrap();
        write(&ir, "a.png", 65, 65, 1);
        write(&vis, "a.png", 65, 65, 3);
        let m = ingest_dataset(&ir, Some(&vis), 2, DegradationSpec::default()).unwrap();
        assert_eq!(m.entries.len(), 1);
        assert_eq!(m.entries[0].extent, Some([64, 64]));
        let samples = load_samples(&m).unwrap();
        assert_eq!(samples[0].hr.height(), 64);
        assert_eq!(samples[0].lr.width(), 32);
        assert!(samples[0].vis_lr.is_some());
    }

    #[test]
    fn ingest_aggregates_problems() {
        let dir = tempfile::tempdir().unwrap();
        let (ir, vis) = (dir.path().join("ir"), dir.path().join("vis"));
        fs::create_dir_all(&ir).unwrap();
        fs::create_dir_all(&vis).unwrap();
        assert!(ingest_dataset(&ir, None, 2, DegradationSpec::default()).is_err());
        write(&ir, "a.png", 16, 16, 1);
        write(&ir, "b.png", 16, 16, 1);
        write(&vis, "c.png", 16, 16, 3);
        fs::write(ir.join("d.png"), b"not a png").unwrap();
        match ingest_dataset(&ir, Some(&vis), 2, DegradationSpec::default()) {
            Err(Error::Dataset(p)) => assert!(p.len() >= 4, "{p:?}"),
            other => panic!("expected aggregated error, got {other:?}"),
        }
    }
}
