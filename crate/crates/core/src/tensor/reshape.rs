use rand::Rng;

use super::Tensor;
use crate::{Error, Result, Scalar};

/// Surrounds the spatial extents of an `[H,W,C]` tensor with `pad` zeros.
pub fn zero_pad<S: Scalar>(input: &Tensor<S>, pad: usize) -> Result<Tensor<S>> {
    let (h, w, c) = input.dims3()?;
    if pad == 0 {
        return Ok(input.clone());
    }
    let pw = w + 2 * pad;
    let mut out = Tensor::zeros(&[h + 2 * pad, pw, c]);
    let od = out.data_mut();
    for (y, src) in input.data().chunks_exact(w * c).enumerate() {
        let start = ((y + pad) * pw + pad) * c;
        od[start..start + w * c].copy_from_slice(src);
    }
    Ok(out)
}

/// Crops the interior back out of a padded gradient.
pub fn zero_pad_backward<S: Scalar>(grad_out: &Tensor<S>, pad: usize) -> Result<Tensor<S>> {
    let (ph, pw, c) = grad_out.dims3()?;
    if pad == 0 {
        return Ok(grad_out.clone());
    }
    if ph <= 2 * pad || pw <= 2 * pad {
        return Err(Error::Dimension(format!(
            "padded gradient {:?} too small for pad {pad}",
            grad_out.shape()
        )));
    }
    let (h, w) = (ph - 2 * pad, pw - 2 * pad);
    let g = grad_out.data();
    let mut data = Vec::with_capacity(h * w * c);
    for y in 0..h {
        let start = ((y + pad) * pw + pad) * c;
        data.extend_from_slice(&g[start..start + w * c]);
    }
    Tensor::new(&[h, w, c], data)
}

/// Row-major flatten to rank 1.
pub fn flatten<S: Scalar>(input: &Tensor<S>) -> Tensor<S> {
    Tensor::vector(input.data().to_vec())
}

/// Inverted dropout.
///
/// In training each element is zeroed with probability `rate` and
/// survivors are scaled by `1 / (1 - rate)`; otherwise the input passes
/// through unchanged. The returned mask holds 1 for kept and 0 for dropped
/// elements.
pub fn dropout<S: Scalar, R: Rng + ?Sized>(
    input: &Tensor<S>,
    rate: f64,
    rng: &mut R,
    training: bool,
) -> Result<(Tensor<S>, Tensor<S>)> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok((input.clone(), Tensor::filled(input.shape(), S::one())));
    }
    let scale = S::lit(1.0 / (1.0 - rate));
    let mask = Tensor::from_fn(input.shape(), |_| {
        if rng.gen::<f64>() < rate {
            S::zero()
        } else {
            S::one()
        }
    });
    let out = input
        .data()
        .iter()
        .zip(mask.data())
        .map(|(&x, &m)| x * m * scale)
        .collect();
    Ok((Tensor::new(input.shape(), out)?, mask))
}

pub fn dropout_backward<S: Scalar>(mask: &Tensor<S>, rate: f64, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
    check_rate(rate)?;
    grad_out.expect_shape(mask.shape(), "dropout grad_out")?;
    let scale = S::lit(1.0 / (1.0 - rate));
    let data = grad_out
        .data()
        .iter()
        .zip(mask.data())
        .map(|(&g, &m)| g * m * scale)
        .collect();
    Tensor::new(mask.shape(), data)
}

pub fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!(
            "dropout rate must lie in [0, 1), got {rate}"
        )));
    }
    Ok(())
}
