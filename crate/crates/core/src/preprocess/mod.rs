//! Mammogram conditioning: denoising, contrast enhancement, cropping,
//! resampling, patch tiling and conversion to network input.

mod filters;
mod image;
mod resize;
mod roi;

pub use filters::{equalization_map, histogram_equalize, median_filter};
pub use image::{decode_bytes, decode_file, encode_pgm, encode_png, write_pgm, GrayImage};
pub use resize::{bicubic_resize, catmull_rom};
pub use roi::{crop_roi, extract_patches, patch_origins, Patch, RoiBox};

use crate::tensor::Tensor;
use crate::{Error, Result, Scalar};

/// Side length of the network input.
pub const MODEL_SIDE: usize = 225;

/// Options of the conditioning chain
/// median → equalize → crop → resize.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessOptions {
    /// Odd median window; 1 disables filtering.
    pub median_window: usize,
    pub equalize: bool,
    pub roi: Option<RoiBox>,
    pub target_side: usize,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self {
            median_window: 3,
            equalize: true,
            roi: None,
            target_side: MODEL_SIDE,
        }
    }
}

/// Median filter, equalization and ROI crop at the source resolution.
pub fn condition(img: &GrayImage, opts: &PreprocessOptions) -> Result<GrayImage> {
    let mut out = if opts.median_window > 1 {
        median_filter(img, opts.median_window)?
    } else {
        img.clone()
    };
    if opts.equalize {
        out = histogram_equalize(&out);
    }
    if let Some(roi) = opts.roi {
        out = crop_roi(&out, &roi)?;
    }
    Ok(out)
}

/// [`condition`] followed by a bicubic resize to `target_side` squared.
pub fn preprocess(img: &GrayImage, opts: &PreprocessOptions) -> Result<GrayImage> {
    if opts.target_side == 0 {
        return Err(Error::Config("resize target must be positive".into()));
    }
    let out = condition(img, opts)?;
    if out.width() == opts.target_side && out.height() == opts.target_side {
        return Ok(out);
    }
    bicubic_resize(&out, opts.target_side, opts.target_side)
}

/// Scales intensities to `[0, 1]` and replicates them over 3 channels,
/// giving an `[H, W, 3]` tensor.
pub fn image_to_tensor<S: Scalar>(img: &GrayImage) -> Tensor<S> {
    let scale = S::lit(1.0 / 255.0);
    let mut data = Vec::with_capacity(img.pixels().len() * 3);
    for &p in img.pixels() {
        let v = S::lit(f64::from(p)) * scale;
        data.extend([v, v, v]);
    }
    Tensor::new(&[img.height(), img.width(), 3], data).expect("image extents are positive")
}

/// [`image_to_tensor`] restricted to 225×225 images.
pub fn to_model_input<S: Scalar>(img: &GrayImage) -> Result<Tensor<S>> {
    if img.width() != MODEL_SIDE || img.height() != MODEL_SIDE {
        return Err(Error::Dimension(format!(
            "model input must be {MODEL_SIDE}x{MODEL_SIDE}, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    Ok(image_to_tensor(img))
}
