use super::Tensor;
use crate::{Error, Result, Scalar};

pub fn relu<S: Scalar>(input: &Tensor<S>) -> Tensor<S> {
    input.map(|v| v.max(S::zero()))
}

/// Passes the gradient where `input > 0`; the subgradient at 0 is 0.
pub fn relu_backward<S: Scalar>(input: &Tensor<S>, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
    grad_out.expect_shape(input.shape(), "relu grad_out")?;
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > S::zero() { g } else { S::zero() })
        .collect();
    Tensor::new(input.shape(), data)
}

fn check_logits<S: Scalar>(logits: &Tensor<S>) -> Result<()> {
    if logits.rank() != 1 || logits.len() < 2 {
        return Err(Error::Dimension(format!(
            "softmax needs a vector of at least 2 logits, got {:?}",
            logits.shape()
        )));
    }
    if !logits.all_finite() {
        return Err(Error::Numeric(format!(
            "non-finite logits {:?}",
            logits.data()
        )));
    }
    Ok(())
}

/// Max-subtracted softmax.
pub fn softmax<S: Scalar>(logits: &Tensor<S>) -> Result<Tensor<S>> {
    check_logits(logits)?;
    let max = logits
        .data()
        .iter()
        .fold(S::neg_infinity(), |m, &v| m.max(v));
    let exps: Vec<S> = logits.data().iter().map(|&v| (v - max).exp()).collect();
    let total = exps.iter().fold(S::zero(), |a, &b| a + b);
    Ok(Tensor::vector(exps.into_iter().map(|e| e / total).collect()))
}

fn check_label(k: usize, label: usize) -> Result<()> {
    if label >= k {
        return Err(Error::Input(format!(
            "class label {label} out of range for {k} classes"
        )));
    }
    Ok(())
}

/// `-ln p[label]`, with `p` clamped to the smallest positive normal value.
pub fn cross_entropy<S: Scalar>(probs: &Tensor<S>, label: usize) -> Result<S> {
    check_label(probs.len(), label)?;
    Ok(-probs.data()[label].max(S::min_positive_value()).ln())
}

/// Softmax probabilities and cross-entropy loss from logits, with the loss
/// taken through log-sum-exp so it stays finite for confident wrong answers.
pub fn softmax_cross_entropy<S: Scalar>(logits: &Tensor<S>, label: usize) -> Result<(Tensor<S>, S)> {
    check_label(logits.len(), label)?;
    let probs = softmax(logits)?;
    let z = logits.data();
    let max = z.iter().fold(S::neg_infinity(), |m, &v| m.max(v));
    let lse = z.iter().fold(S::zero(), |a, &v| a + (v - max).exp()).ln() + max;
    Ok((probs, lse - z[label]))
}

/// Gradient of the softmax cross-entropy loss with respect to the logits:
/// `probs - one_hot(label)`.
pub fn softmax_cross_entropy_backward<S: Scalar>(probs: &Tensor<S>, label: usize) -> Result<Tensor<S>> {
    check_label(probs.len(), label)?;
    let mut g = probs.clone();
    g.data_mut()[label] -= S::one();
    Ok(g)
}
