//! Dense row-major tensors and the forward/backward kernels the network is
//! assembled from.
//!
//! Images and activations use height × width × channels (HWC) layout;
//! convolution weights are `[kernel_h, kernel_w, in_channels, out_channels]`
//! and dense weights are `[inputs, outputs]`.

mod activation;
mod conv;
mod dense;
mod pool;
mod reshape;

pub use activation::{
    cross_entropy, relu, relu_backward, softmax, softmax_cross_entropy,
    softmax_cross_entropy_backward,
};
pub use conv::{conv2d_backward, conv2d_forward, ConvGrads, ConvSpec};
pub(crate) use conv::conv2d_backward_inner;
pub use dense::{dense_backward, dense_forward, DenseGrads};
pub use pool::{maxpool_backward, maxpool_forward, ArgmaxMap, PoolSpec};
pub(crate) use reshape::check_rate as reshape_check_rate;
pub use reshape::{dropout, dropout_backward, flatten, zero_pad, zero_pad_backward};

use crate::{Error, Result, Scalar};

/// Dense tensor of rank 1 to 4 with contiguous row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S> {
    shape: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn new(shape: &[usize], data: Vec<S>) -> Result<Self> {
        check_shape(shape)?;
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::Dimension(format!(
                "shape {shape:?} needs {expected} elements, got {}",
                data.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, S::zero())
    }

    pub fn filled(shape: &[usize], value: S) -> Self {
        check_shape(shape).expect("valid shape");
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> S) -> Self {
        check_shape(shape).expect("valid shape");
        let len: usize = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..len).map(&mut f).collect(),
        }
    }

    pub fn vector(data: Vec<S>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    #[inline]
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    #[inline]
    pub fn data(&self) -> &[S] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        check_shape(shape)?;
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::Dimension(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sum(&self) -> S {
        self.data.iter().fold(S::zero(), |acc, &v| acc + v)
    }

    pub fn max_abs(&self) -> S {
        self.data.iter().fold(S::zero(), |acc, &v| acc.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Adds `other` element-wise into `self`.
    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Dimension(format!(
                "cannot add {:?} into {:?}",
                other.shape, self.shape
            )));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: S) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    /// Extents of a rank-3 (height, width, channels) tensor.
    pub fn dims3(&self) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [h, w, c] => Ok((h, w, c)),
            _ => Err(Error::Dimension(format!(
                "expected a rank-3 [H,W,C] tensor, got {:?}",
                self.shape
            ))),
        }
    }

    pub(crate) fn expect_shape(&self, shape: &[usize], what: &str) -> Result<()> {
        if self.shape != shape {
            return Err(Error::Dimension(format!(
                "{what}: expected shape {shape:?}, got {:?}",
                self.shape
            )));
        }
        Ok(())
    }
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() || shape.len() > 4 {
        return Err(Error::Dimension(format!(
            "tensor rank must be 1..=4, got shape {shape:?}"
        )));
    }
    if shape.contains(&0) {
        return Err(Error::Dimension(format!(
            "tensor extents must be positive, got {shape:?}"
        )));
    }
    Ok(())
}
