use super::Tensor;
use crate::{Error, Result, Scalar};

fn check<S: Scalar>(input: &Tensor<S>, weights: &Tensor<S>) -> Result<(usize, usize)> {
    let [n, m] = weights.shape()[..] else {
        return Err(Error::Dimension(format!(
            "dense weights must be [N,M], got {:?}",
            weights.shape()
        )));
    };
    if input.shape() != [n] {
        return Err(Error::Dimension(format!(
            "dense input {:?} does not match weights {:?}",
            input.shape(),
            weights.shape()
        )));
    }
    Ok((n, m))
}

/// `out[j] = sum_i input[i] * weights[i, j] + bias[j]`.
pub fn dense_forward<S: Scalar>(
    input: &Tensor<S>,
    weights: &Tensor<S>,
    bias: &Tensor<S>,
) -> Result<Tensor<S>> {
    let (_, m) = check(input, weights)?;
    bias.expect_shape(&[m], "dense bias")?;
    let mut out = bias.data().to_vec();
    for (&x, row) in input.data().iter().zip(weights.data().chunks_exact(m)) {
        for (o, &w) in out.iter_mut().zip(row) {
            *o += x * w;
        }
    }
    Ok(Tensor::vector(out))
}

#[derive(Debug, Clone)]
pub struct DenseGrads<S> {
    pub input: Tensor<S>,
    pub weights: Tensor<S>,
    pub bias: Tensor<S>,
}

pub fn dense_backward<S: Scalar>(
    input: &Tensor<S>,
    weights: &Tensor<S>,
    grad_out: &Tensor<S>,
) -> Result<DenseGrads<S>> {
    let (n, m) = check(input, weights)?;
    grad_out.expect_shape(&[m], "dense grad_out")?;
    let g = grad_out.data();
    let mut gw = Vec::with_capacity(n * m);
    let mut gx = Vec::with_capacity(n);
    for (&x, row) in input.data().iter().zip(weights.data().chunks_exact(m)) {
        gw.extend(g.iter().map(|&gj| x * gj));
        gx.push(
            row.iter()
                .zip(g)
                .fold(S::zero(), |acc, (&w, &gj)| acc + w * gj),
        );
    }
    Ok(DenseGrads {
        input: Tensor::vector(gx),
        weights: Tensor::new(&[n, m], gw)?,
        bias: grad_out.clone(),
    })
}
