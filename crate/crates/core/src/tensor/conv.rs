use super::Tensor;
use crate::{Error, Result, Scalar};

/// Valid (unpadded) 2-D convolution geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl ConvSpec {
    pub fn square(kernel: usize, in_channels: usize, out_channels: usize) -> Self {
        Self {
            kernel_h: kernel,
            kernel_w: kernel,
            stride: 1,
            in_channels,
            out_channels,
        }
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [
            self.kernel_h,
            self.kernel_w,
            self.in_channels,
            self.out_channels,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.kernel_h * self.kernel_w * self.in_channels * self.out_channels + self.out_channels
    }

    pub fn fan_in(&self) -> usize {
        self.kernel_h * self.kernel_w * self.in_channels
    }

    /// Output `(height, width)` for an input of `(h, w)`.
    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        if self.stride == 0 || self.kernel_h == 0 || self.kernel_w == 0 {
            return Err(Error::Config(format!("degenerate convolution {self:?}")));
        }
        if h < self.kernel_h || w < self.kernel_w {
            return Err(Error::Dimension(format!(
                "input {h}x{w} smaller than {}x{} kernel",
                self.kernel_h, self.kernel_w
            )));
        }
        Ok((
            (h - self.kernel_h) / self.stride + 1,
            (w - self.kernel_w) / self.stride + 1,
        ))
    }

    fn check(&self, input: &[usize], weights: &[usize], bias: &[usize]) -> Result<(usize, usize)> {
        let [h, w, c] = input[..] else {
            return Err(Error::Dimension(format!(
                "conv2d input must be [H,W,C], got {input:?}"
            )));
        };
        if weights != self.weight_shape() {
            return Err(Error::Dimension(format!(
                "conv2d weights {weights:?} do not match spec {:?}",
                self.weight_shape()
            )));
        }
        if c != self.in_channels {
            return Err(Error::Dimension(format!(
                "conv2d input {input:?} has {c} channels but weights {weights:?} expect {}",
                self.in_channels
            )));
        }
        if bias != [self.out_channels] {
            return Err(Error::Dimension(format!(
                "conv2d bias {bias:?} does not match {} output channels",
                self.out_channels
            )));
        }
        self.output_hw(h, w)
    }
}

pub fn conv2d_forward<S: Scalar>(
    input: &Tensor<S>,
    weights: &Tensor<S>,
    bias: &Tensor<S>,
    spec: &ConvSpec,
) -> Result<Tensor<S>> {
    let (oh, ow) = spec.check(input.shape(), weights.shape(), bias.shape())?;
    let (_, w, cin) = input.dims3()?;
    let cout = spec.out_channels;
    let (kh, kw, s) = (spec.kernel_h, spec.kernel_w, spec.stride);
    let x = input.data();
    let wt = weights.data();

    let mut out = vec![S::zero(); oh * ow * cout];
    for oy in 0..oh {
        for ox in 0..ow {
            let acc = &mut out[(oy * ow + ox) * cout..][..cout];
            acc.copy_from_slice(bias.data());
            for ky in 0..kh {
                let row = (oy * s + ky) * w + ox * s;
                // kw consecutive pixels of cin channels are contiguous in HWC
                let patch = &x[row * cin..][..kw * cin];
                let wrow = &wt[ky * kw * cin * cout..][..kw * cin * cout];
                for (&xv, wv) in patch.iter().zip(wrow.chunks_exact(cout)) {
                    for (a, &b) in acc.iter_mut().zip(wv) {
                        *a += xv * b;
                    }
                }
            }
        }
    }
    Tensor::new(&[oh, ow, cout], out)
}

#[derive(Debug, Clone)]
pub struct ConvGrads<S> {
    pub input: Tensor<S>,
    pub weights: Tensor<S>,
    pub bias: Tensor<S>,
}

pub fn conv2d_backward<S: Scalar>(
    input: &Tensor<S>,
    weights: &Tensor<S>,
    grad_out: &Tensor<S>,
    spec: &ConvSpec,
) -> Result<ConvGrads<S>> {
    let (gi, gw, gb) = conv2d_backward_inner(input, weights, grad_out, spec, true)?;
    Ok(ConvGrads {
        input: gi.expect("requested"),
        weights: gw,
        bias: gb,
    })
}

/// Backward pass; the input gradient is skipped when `need_input` is false
/// (first layer of a network).
pub(crate) fn conv2d_backward_inner<S: Scalar>(
    input: &Tensor<S>,
    weights: &Tensor<S>,
    grad_out: &Tensor<S>,
    spec: &ConvSpec,
    need_input: bool,
) -> Result<(Option<Tensor<S>>, Tensor<S>, Tensor<S>)> {
    let cout = spec.out_channels;
    let (oh, ow) = spec.check(input.shape(), weights.shape(), &[cout])?;
    grad_out.expect_shape(&[oh, ow, cout], "conv2d grad_out")?;
    let (h, w, cin) = input.dims3()?;
    let (kh, kw, s) = (spec.kernel_h, spec.kernel_w, spec.stride);
    let x = input.data();
    let wt = weights.data();
    let g = grad_out.data();

    let mut gw = vec![S::zero(); wt.len()];
    let mut gb = vec![S::zero(); cout];
    let mut gx = if need_input {
        vec![S::zero(); h * w * cin]
    } else {
        Vec::new()
    };

    for oy in 0..oh {
        for ox in 0..ow {
            let go = &g[(oy * ow + ox) * cout..][..cout];
            for (b, &v) in gb.iter_mut().zip(go) {
                *b += v;
            }
            for ky in 0..kh {
                let base = ((oy * s + ky) * w + ox * s) * cin;
                let patch = &x[base..][..kw * cin];
                let wofs = ky * kw * cin * cout;
                let gwrow = &mut gw[wofs..][..kw * cin * cout];
                for (&xv, gwv) in patch.iter().zip(gwrow.chunks_exact_mut(cout)) {
                    for (a, &b) in gwv.iter_mut().zip(go) {
                        *a += xv * b;
                    }
                }
                if need_input {
                    let wrow = &wt[wofs..][..kw * cin * cout];
                    let gpatch = &mut gx[base..][..kw * cin];
                    for (gxv, wv) in gpatch.iter_mut().zip(wrow.chunks_exact(cout)) {
                        let mut dot = S::zero();
                        for (&a, &b) in wv.iter().zip(go) {
                            dot += a * b;
                        }
                        *gxv += dot;
                    }
                }
            }
        }
    }

    let gi = if need_input {
        Some(Tensor::new(&[h, w, cin], gx)?)
    } else {
        None
    };
    Ok((
        gi,
        Tensor::new(weights.shape(), gw)?,
        Tensor::new(&[cout], gb)?,
    ))
}
