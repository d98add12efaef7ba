use crate::network::NetworkModel;
use crate::tensor::Tensor;
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates per parameter tensor, plus the step
/// counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<S> {
    pub m: Vec<Tensor<S>>,
    pub v: Vec<Tensor<S>>,
    pub t: u64,
}

impl<S: Scalar> AdamState<S> {
    pub fn for_shapes<'a>(shapes: impl IntoIterator<Item = &'a [usize]>) -> Self {
        let m: Vec<Tensor<S>> = shapes.into_iter().map(Tensor::zeros).collect();
        Self {
            v: m.clone(),
            m,
            t: 0,
        }
    }

    pub fn for_model(model: &NetworkModel<S>) -> Self {
        Self::for_shapes(model.param_tensors().into_iter().map(Tensor::shape))
    }
}

/// One bias-corrected Adam update:
/// `θ ← θ − lr · m̂ / (√v̂ + ε)` with `m̂ = m / (1 − β1ᵗ)`,
/// `v̂ = v / (1 − β2ᵗ)`.
///
/// `names` labels tensors in error messages. Nothing is modified when any
/// gradient is non-finite.
pub fn adam_step<S: Scalar>(
    params: &mut [&mut Tensor<S>],
    grads: &[&Tensor<S>],
    state: &mut AdamState<S>,
    hyper: &AdamHyper,
    names: &[String],
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() || state.v.len() != state.m.len() {
        return Err(Error::Dimension(format!(
            "adam: {} parameters, {} gradients, {} moment tensors",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, ((p, g), m)) in params.iter().zip(grads).zip(&state.m).enumerate() {
        let name = names.get(i).cloned().unwrap_or_else(|| format!("tensor {i}"));
        g.expect_shape(p.shape(), &format!("adam gradient for {name}"))?;
        m.expect_shape(p.shape(), &format!("adam moment for {name}"))?;
        if !g.all_finite() {
            return Err(Error::Numeric(format!("non-finite gradient in {name}")));
        }
    }

    state.t += 1;
    let t = state.t as i32;
    let b1 = S::lit(hyper.beta1);
    let b2 = S::lit(hyper.beta2);
    let one = S::one();
    let lr = S::lit(hyper.learning_rate);
    let eps = S::lit(hyper.epsilon);
    let c1 = one / (one - b1.powi(t));
    let c2 = one / (one - b2.powi(t));

    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        for (((p, &g), m), v) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m * c1;
            let v_hat = *v * c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
