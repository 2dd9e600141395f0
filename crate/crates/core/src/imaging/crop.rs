use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Image;
use crate::error::{Error, Result};

/// Sub-rectangle starting at `(top, left)`.
pub fn crop(img: &Image, top: usize, left: usize, height: usize, width: usize) -> Result<Image> {
    if top + height > img.height() || left + width > img.width() {
        return Err(Error::shape(format!(
            "crop {height}x{width} at ({top}, {left}) exceeds {}x{}",
            img.height(),
            img.width()
        )));
    }
    let c = img.channels();
    let mut data = Vec::with_capacity(height * width * c);
    for y in top..top + height {
        let start = (y * img.width() + left) * c;
        data.extend_from_slice(&img.data()[start..start + width * c]);
    }
    Image::new(height, width, c, data)
}

/// Trim the bottom/right so both extents are multiples of `scale`.
pub fn modcrop(img: &Image, scale: usize) -> Result<Image> {
    let h = img.height() - img.height() % scale;
    let w = img.width() - img.width() % scale;
    if h == 0 || w == 0 {
        return Err(Error::shape(format!(
            "{}x{} image is smaller than scale {scale}",
            img.height(),
            img.width()
        )));
    }
    crop(img, 0, 0, h, w)
}

/// Centred `height × width` window.
pub fn center_crop(img: &Image, height: usize, width: usize) -> Result<Image> {
    if height > img.height() || width > img.width() {
        return Err(Error::shape(format!(
            "centre crop {height}x{width} exceeds {}x{}",
            img.height(),
            img.width()
        )));
    }
    crop(
        img,
        (img.height() - height) / 2,
        (img.width() - width) / 2,
        height,
        width,
    )
}

/// Random `lr_size²` LR crop and the `(scale·lr_size)²` HR crop at the
/// aligned offset. Returns the crops and the LR offset `(top, left)`.
pub fn random_paired_crop(
    lr: &Image,
    hr: &Image,
    lr_size: usize,
    scale: usize,
    seed: u64,
) -> Result<(Image, Image, (usize, usize))> {
    if hr.height() != scale * lr.height() || hr.width() != scale * lr.width() {
        return Err(Error::shape(format!(
            "HR extent {}x{} is not {scale}x the LR extent {}x{}",
            hr.height(),
            hr.width(),
            lr.height(),
            lr.width()
        )));
    }
    if lr_size == 0 || lr_size > lr.height() || lr_size > lr.width() {
        return Err(Error::shape(format!(
            "crop size {lr_size} does not fit LR extent {}x{}",
            lr.height(),
            lr.width()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top = rng.random_range(0..=lr.height() - lr_size);
    let left = rng.random_range(0..=lr.width() - lr_size);
    let lr_crop = crop(lr, top, left, lr_size, lr_size)?;
    let hr_crop = crop(hr, scale * top, scale * left, scale * lr_size, scale * lr_size)?;
    Ok((lr_crop, hr_crop, (top, left)))
}
