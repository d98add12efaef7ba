use super::Tensor;
use crate::{Error, Result, Scalar};

/// Square valid max-pooling window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolSpec {
    pub window: usize,
    pub stride: usize,
}

impl PoolSpec {
    pub fn new(window: usize, stride: usize) -> Self {
        Self { window, stride }
    }

    pub fn output_extent(&self, n: usize) -> Result<usize> {
        if self.window == 0 || self.stride == 0 {
            return Err(Error::Config(format!("degenerate pooling {self:?}")));
        }
        if n < self.window {
            return Err(Error::Dimension(format!(
                "pooling window {} larger than input extent {n}",
                self.window
            )));
        }
        Ok((n - self.window) / self.stride + 1)
    }
}

/// Winning input position of every pooling window, recorded by the forward
/// pass for gradient routing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArgmaxMap {
    pub input_shape: [usize; 3],
    pub output_shape: [usize; 3],
    /// Flat input index per output element.
    pub indices: Vec<usize>,
}

/// Max pooling; ties go to the lowest flat input index.
pub fn maxpool_forward<S: Scalar>(
    input: &Tensor<S>,
    spec: &PoolSpec,
) -> Result<(Tensor<S>, ArgmaxMap)> {
    let (h, w, c) = input.dims3()?;
    let oh = spec.output_extent(h)?;
    let ow = spec.output_extent(w)?;
    let x = input.data();
    let mut out = Vec::with_capacity(oh * ow * c);
    let mut indices = Vec::with_capacity(oh * ow * c);
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                let mut best = (oy * spec.stride * w + ox * spec.stride) * c + ch;
                for ky in 0..spec.window {
                    for kx in 0..spec.window {
                        let idx = ((oy * spec.stride + ky) * w + ox * spec.stride + kx) * c + ch;
                        if x[idx] > x[best] {
                            best = idx;
                        }
                    }
                }
                out.push(x[best]);
                indices.push(best);
            }
        }
    }
    let map = ArgmaxMap {
        input_shape: [h, w, c],
        output_shape: [oh, ow, c],
        indices,
    };
    Ok((Tensor::new(&[oh, ow, c], out)?, map))
}

pub fn maxpool_backward<S: Scalar>(map: &ArgmaxMap, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
    if grad_out.shape() != map.output_shape || map.indices.len() != grad_out.len() {
        return Err(Error::Dimension(format!(
            "argmax map is for output {:?}, grad_out is {:?}",
            map.output_shape,
            grad_out.shape()
        )));
    }
    let mut gx = Tensor::zeros(&map.input_shape);
    let gd = gx.data_mut();
    for (&idx, &g) in map.indices.iter().zip(grad_out.data()) {
        gd[idx] += g;
    }
    Ok(gx)
}
