use super::GrayImage;
use crate::{Error, Result};

const A: f64 = -0.5;

/// Catmull-Rom cubic convolution kernel (a = −0.5).
pub fn catmull_rom(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

/// Four source indices (edge-clamped) and weights per output coordinate,
/// sampling at pixel centres.
fn taps(src_len: usize, dst_len: usize) -> Vec<([usize; 4], [f64; 4])> {
    let scale = src_len as f64 / dst_len as f64;
    let last = src_len as isize - 1;
    (0..dst_len)
        .map(|d| {
            let s = (d as f64 + 0.5) * scale - 0.5;
            let base = s.floor();
            let t = s - base;
            let base = base as isize;
            let mut idx = [0; 4];
            let mut wts = [0.0; 4];
            for k in 0..4 {
                let off = k as isize - 1;
                idx[k] = (base + off).clamp(0, last) as usize;
                wts[k] = catmull_rom(t - off as f64);
            }
            (idx, wts)
        })
        .collect()
}

/// Separable bicubic resampling; results rounded and clamped to 0..=255.
pub fn bicubic_resize(img: &GrayImage, out_w: usize, out_h: usize) -> Result<GrayImage> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::Dimension(format!(
            "resize target must be positive, got {out_w}x{out_h}"
        )));
    }
    let (w, h) = (img.width(), img.height());
    let xt = taps(w, out_w);
    let yt = taps(h, out_h);

    let mut horiz = vec![0.0f64; h * out_w];
    for y in 0..h {
        let row = &img.pixels()[y * w..][..w];
        for (x, (idx, wts)) in xt.iter().enumerate() {
            horiz[y * out_w + x] = (0..4).map(|k| wts[k] * f64::from(row[idx[k]])).sum();
        }
    }
    let mut pixels = Vec::with_capacity(out_w * out_h);
    for (idx, wts) in &yt {
        for x in 0..out_w {
            let v: f64 = (0..4).map(|k| wts[k] * horiz[idx[k] * out_w + x]).sum();
            pixels.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::new(out_w, out_h, pixels)
}
