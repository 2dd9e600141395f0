use std::fs;
use std::io::Write;
use std::path::Path;

use image::{DynamicImage, ExtendedColorType, ImageReader};

use super::Image;
use crate::error::{Error, Result};

fn image_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Read an 8-bit gray/RGB PNG or a binary PGM/PPM; samples become `v/255`.
/// An alpha channel, if present, is dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let decoded = reader.decode().map_err(|e| image_err(path, e.to_string()))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let (channels, bytes) = match decoded {
        DynamicImage::ImageLuma8(b) => (1, b.into_raw()),
        DynamicImage::ImageLumaA8(_) => (1, decoded.to_luma8().into_raw()),
        DynamicImage::ImageRgb8(b) => (3, b.into_raw()),
        DynamicImage::ImageRgba8(_) => (3, decoded.to_rgb8().into_raw()),
        other => {
            return Err(image_err(
                path,
                format!("unsupported sample format {:?}; only 8-bit gray or RGB", other.color()),
            ))
        }
    };
    Image::from_u8(h, w, channels, &bytes)
}

/// Write 8-bit samples (`round(clamp(v)·255)`). The extension picks the
/// format: `.png`, `.pgm` (gray only) or `.ppm` (RGB only).
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let bytes = img.to_u8();
    let (w, h) = (img.width(), img.height());
    match (ext.as_str(), img.channels()) {
        ("png", c) => {
            let color = if c == 1 {
                ExtendedColorType::L8
            } else {
                ExtendedColorType::Rgb8
            };
            image::save_buffer(path, &bytes, w as u32, h as u32, color).map_err(|e| image_err(path, e.to_string()))
        }
        ("pgm", 1) | ("ppm", 3) => {
            let magic = if img.channels() == 1 { "P5" } else { "P6" };
            let mut buf = Vec::with_capacity(bytes.len() + 20);
            write!(buf, "{magic}\n{w} {h}\n255\n").expect("writing to a Vec");
            buf.extend_from_slice(&bytes);
            fs::write(path, buf).map_err(|e| Error::io(path, e))
        }
        ("pgm", _) | ("ppm", _) => Err(image_err(
            path,
            format!("{} channels cannot be written as .{ext}", img.channels()),
        )),
        _ => Err(image_err(path, "unknown image extension (use .png, .pgm or .ppm)")),
    }
}
