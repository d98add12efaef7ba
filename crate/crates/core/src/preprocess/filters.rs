use super::GrayImage;
use crate::{Error, Result};

/// Median over a `window × window` neighbourhood with edge replication.
pub fn median_filter(img: &GrayImage, window: usize) -> Result<GrayImage> {
    if window % 2 == 0 {
        return Err(Error::Config(format!(
            "median window must be odd, got {window}"
        )));
    }
    if window > img.width().min(img.height()) {
        return Err(Error::Config(format!(
            "median window {window} exceeds image extent {}x{}",
            img.width(),
            img.height()
        )));
    }
    let r = (window / 2) as isize;
    let (w, h) = (img.width() as isize, img.height() as isize);
    let mut buf = Vec::with_capacity(window * window);
    let mid = window * window / 2;
    Ok(GrayImage::from_fn(img.width(), img.height(), |x, y| {
        buf.clear();
        for dy in -r..=r {
            let sy = (y as isize + dy).clamp(0, h - 1) as usize;
            for dx in -r..=r {
                let sx = (x as isize + dx).clamp(0, w - 1) as usize;
                buf.push(img.get(sx, sy));
            }
        }
        *buf.select_nth_unstable(mid).1
    }))
}

/// Intensity remapping table of [`histogram_equalize`]:
/// `round(255 · (cdf(v) − cdf_min) / (N − cdf_min))`.
///
/// A constant image has `N = cdf_min`; every level then maps to 0.
pub fn equalization_map(img: &GrayImage) -> [u8; 256] {
    let mut hist = [0u64; 256];
    for &p in img.pixels() {
        hist[usize::from(p)] += 1;
    }
    let total = img.pixels().len() as u64;
    let cdf_min = hist.iter().copied().find(|&c| c > 0).unwrap_or(0);
    let denom = total - cdf_min;
    let mut map = [0u8; 256];
    let mut cdf = 0u64;
    for (level, &count) in hist.iter().enumerate() {
        cdf += count;
        if denom == 0 || cdf < cdf_min {
            continue;
        }
        // half-up rounding in integers
        let num = 255 * (cdf - cdf_min);
        map[level] = ((2 * num + denom) / (2 * denom)) as u8;
    }
    map
}

pub fn histogram_equalize(img: &GrayImage) -> GrayImage {
    let map = equalization_map(img);
    let pixels = img.pixels().iter().map(|&p| map[usize::from(p)]).collect();
    GrayImage::new(img.width(), img.height(), pixels).expect("same extents")
}
