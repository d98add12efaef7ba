#![allow(dead_code)]

use mammonet_core::network::{LayerSpec, NetworkModel};
use mammonet_core::tensor::{ConvSpec, PoolSpec, Tensor};
use mammonet_core::training::Sample;
use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let d = Uniform::new(-1.0, 1.0);
    Tensor::from_fn(shape, |_| d.sample(rng))
}

/// Central difference of `f` at `x` along every coordinate.
pub fn numeric_gradient(x: &[f64], step: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + step;
            let up = f(&probe);
            probe[i] = x[i] - step;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Largest `|a - n| / max(|a|, |n|)` over entries with `|a| + |n| > 1e-8`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .filter(|(a, n)| a.abs() + n.abs() > 1e-8)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()))
        .fold(0.0, f64::max)
}

/// Same layer kinds and order as the reference model, scaled to a 9×9×3
/// input with `c` conv channels and dense widths `4c, 2c, c`.
pub fn shrunken_layers_wide(c: usize, dropout: f64) -> Vec<LayerSpec> {
    use LayerSpec::*;
    vec![
        Conv(ConvSpec::square(3, 3, c)),
        Relu,
        MaxPool(PoolSpec::new(2, 1)),
        Conv(ConvSpec::square(2, c, c)),
        Relu,
        MaxPool(PoolSpec::new(2, 1)),
        Conv(ConvSpec::square(2, c, c)),
        Relu,
        ZeroPad { pad: 1 },
        MaxPool(PoolSpec::new(2, 2)),
        Conv(ConvSpec::square(2, c, c)),
        Relu,
        ZeroPad { pad: 1 },
        MaxPool(PoolSpec::new(2, 1)),
        Flatten,
        Dropout { rate: dropout },
        Dense { inputs: 4 * c, outputs: 4 * c },
        Relu,
        Dense { inputs: 4 * c, outputs: 2 * c },
        Relu,
        Dense { inputs: 2 * c, outputs: c },
        Relu,
        Dense { inputs: c, outputs: 3 },
        Softmax,
    ]
}

/// The 4-channel clone used for finite-difference checks (dense widths
/// 8, 6, 5).
pub fn shrunken_layers(dropout: f64) -> Vec<LayerSpec> {
    let mut layers = shrunken_layers_wide(4, dropout);
    layers[16] = LayerSpec::Dense { inputs: 16, outputs: 8 };
    layers[18] = LayerSpec::Dense { inputs: 8, outputs: 6 };
    layers[20] = LayerSpec::Dense { inputs: 6, outputs: 5 };
    layers[22] = LayerSpec::Dense { inputs: 5, outputs: 3 };
    layers
}

pub fn shrunken_model(seed: u64, dropout: f64) -> NetworkModel<f64> {
    NetworkModel::new([9, 9, 3], shrunken_layers(dropout), seed).unwrap()
}

pub fn shrunken_model_wide(c: usize, seed: u64, dropout: f64) -> NetworkModel<f64> {
    NetworkModel::new([9, 9, 3], shrunken_layers_wide(c, dropout), seed).unwrap()
}

/// `per_class` noisy solid images per class: dark, mid-grey, bright.
pub fn brightness_samples(side: usize, per_class: usize, seed: u64) -> Vec<Sample<f64>> {
    let mut rng = rng(seed);
    let mut out = Vec::new();
    for label in 0..3 {
        let level = [0.15, 0.5, 0.85][label];
        for _ in 0..per_class {
            let input = Tensor::from_fn(&[side, side, 3], |_| level + rng.gen_range(-0.08..0.08));
            out.push(Sample { input, label });
        }
    }
    out
}
