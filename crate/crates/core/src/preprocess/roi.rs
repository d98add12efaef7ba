use super::GrayImage;
use crate::{Error, Result};

/// Axis-aligned box in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoiBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl RoiBox {
    pub fn fits(&self, img: &GrayImage) -> bool {
        self.w > 0
            && self.h > 0
            && self.x.checked_add(self.w).is_some_and(|r| r <= img.width())
            && self.y.checked_add(self.h).is_some_and(|b| b <= img.height())
    }
}

pub fn crop_roi(img: &GrayImage, roi: &RoiBox) -> Result<GrayImage> {
    if !roi.fits(img) {
        return Err(Error::Config(format!(
            "ROI {roi:?} does not lie inside the {}x{} image",
            img.width(),
            img.height()
        )));
    }
    Ok(GrayImage::from_fn(roi.w, roi.h, |x, y| {
        img.get(roi.x + x, roi.y + y)
    }))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patch {
    pub image: GrayImage,
    pub x: usize,
    pub y: usize,
}

/// Patch start positions along one axis: multiples of `patch - overlap`,
/// with the last one shifted inward to end at the border.
pub fn patch_origins(len: usize, patch: usize, overlap: usize) -> Result<Vec<usize>> {
    if patch == 0 || overlap >= patch {
        return Err(Error::Config(format!(
            "patch overlap {overlap} must be smaller than patch size {patch}"
        )));
    }
    if patch > len {
        return Err(Error::Config(format!(
            "patch size {patch} exceeds image extent {len}"
        )));
    }
    let stride = patch - overlap;
    let last = len - patch;
    let mut out = Vec::new();
    for k in 0.. {
        let o = (k * stride).min(last);
        out.push(o);
        if o == last {
            break;
        }
    }
    Ok(out)
}

/// Tiles `img` into `patch × patch` squares in row-major order of origin.
pub fn extract_patches(img: &GrayImage, patch: usize, overlap: usize) -> Result<Vec<Patch>> {
    let xs = patch_origins(img.width(), patch, overlap)?;
    let ys = patch_origins(img.height(), patch, overlap)?;
    let mut out = Vec::with_capacity(xs.len() * ys.len());
    for &y in &ys {
        for &x in &xs {
            let roi = RoiBox { x, y, w: patch, h: patch };
            out.push(Patch {
                image: crop_roi(img, &roi)?,
                x,
                y,
            });
        }
    }
    Ok(out)
}
