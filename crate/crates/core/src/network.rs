//! Layer-sequence models: construction, shape checking, forward and
//! backward execution, parameter accounting, and the reference
//! 225×225×3 → 3-class architecture.

use rand::distributions::{Distribution, Uniform};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::{self, ArgmaxMap, ConvSpec, PoolSpec, Tensor};
use crate::{Error, Result, Scalar};

/// Input extents of the reference model.
pub const REFERENCE_INPUT: [usize; 3] = [225, 225, 3];
pub const DEFAULT_DROPOUT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerSpec {
    Conv(ConvSpec),
    MaxPool(PoolSpec),
    ZeroPad { pad: usize },
    Flatten,
    Dropout { rate: f64 },
    Dense { inputs: usize, outputs: usize },
    Relu,
    Softmax,
}

impl LayerSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Conv(_) => "conv",
            LayerSpec::MaxPool(_) => "maxpool",
            LayerSpec::ZeroPad { .. } => "zeropad",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Relu => "relu",
            LayerSpec::Softmax => "softmax",
        }
    }

    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Conv(c) => c.param_count(),
            LayerSpec::Dense { inputs, outputs } => inputs * outputs + outputs,
            _ => 0,
        }
    }

    /// Shapes of the `(weights, bias)` pair for parameterized layers.
    pub fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        match *self {
            LayerSpec::Conv(c) => Some((c.weight_shape().to_vec(), vec![c.out_channels])),
            LayerSpec::Dense { inputs, outputs } => Some((vec![inputs, outputs], vec![outputs])),
            _ => None,
        }
    }

    fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Conv(c) => c.fan_in(),
            LayerSpec::Dense { inputs, .. } => inputs,
            _ => 0,
        }
    }

    /// Output shape for `input`, or a dimension error if incompatible.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let spatial = || -> Result<(usize, usize, usize)> {
            match input[..] {
                [h, w, c] => Ok((h, w, c)),
                _ => Err(Error::Dimension(format!(
                    "{} layer needs an [H,W,C] input, got {input:?}",
                    self.kind_name()
                ))),
            }
        };
        match *self {
            LayerSpec::Conv(c) => {
                let (h, w, ch) = spatial()?;
                if ch != c.in_channels {
                    return Err(Error::Dimension(format!(
                        "conv expects {} input channels, got shape {input:?}",
                        c.in_channels
                    )));
                }
                let (oh, ow) = c.output_hw(h, w)?;
                Ok(vec![oh, ow, c.out_channels])
            }
            LayerSpec::MaxPool(p) => {
                let (h, w, ch) = spatial()?;
                Ok(vec![p.output_extent(h)?, p.output_extent(w)?, ch])
            }
            LayerSpec::ZeroPad { pad } => {
                let (h, w, ch) = spatial()?;
                Ok(vec![h + 2 * pad, w + 2 * pad, ch])
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Dropout { rate } => {
                tensor::reshape_check_rate(rate)?;
                Ok(input.to_vec())
            }
            LayerSpec::Dense { inputs, outputs } => {
                if input != [inputs] {
                    return Err(Error::Dimension(format!(
                        "dense expects input [{inputs}], got {input:?}"
                    )));
                }
                Ok(vec![outputs])
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::Softmax => {
                if input.len() != 1 || input[0] < 2 {
                    return Err(Error::Dimension(format!(
                        "softmax needs a vector of at least 2 logits, got {input:?}"
                    )));
                }
                Ok(input.to_vec())
            }
        }
    }
}

/// Weights and bias of one conv or dense layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<S> {
    pub weights: Tensor<S>,
    pub bias: Tensor<S>,
}

/// Dropout behaviour of a forward pass.
pub enum Pass<'a> {
    Inference,
    Training(&'a mut dyn RngCore),
}

impl Pass<'_> {
    pub fn is_training(&self) -> bool {
        matches!(self, Pass::Training(_))
    }
}

#[derive(Debug, Clone)]
enum Aux<S> {
    None,
    Argmax(ArgmaxMap),
    Mask(Tensor<S>),
}

/// Per-layer inputs and routing data recorded by [`NetworkModel::forward`].
#[derive(Debug, Clone)]
pub struct ActivationCache<S> {
    inputs: Vec<Tensor<S>>,
    aux: Vec<Aux<S>>,
    probs: Tensor<S>,
}

impl<S: Scalar> ActivationCache<S> {
    pub fn probs(&self) -> &Tensor<S> {
        &self.probs
    }

    /// Cross-entropy of the cached output, evaluated from the logits.
    pub fn loss(&self, label: usize) -> Result<S> {
        let logits = self
            .inputs
            .last()
            .ok_or_else(|| Error::State("empty activation cache".into()))?;
        Ok(tensor::softmax_cross_entropy(logits, label)?.1)
    }
}

/// One gradient pair per parameterized layer, mirroring the model layout.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet<S> {
    pub layers: Vec<Option<LayerParams<S>>>,
}

impl<S: Scalar> GradientSet<S> {
    pub fn zeros_like(model: &NetworkModel<S>) -> Self {
        Self {
            layers: model
                .params
                .iter()
                .map(|p| {
                    p.as_ref().map(|p| LayerParams {
                        weights: Tensor::zeros(p.weights.shape()),
                        bias: Tensor::zeros(p.bias.shape()),
                    })
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::Dimension("gradient sets of different models".into()));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            match (a, b) {
                (Some(a), Some(b)) => {
                    a.weights.add_assign(&b.weights)?;
                    a.bias.add_assign(&b.bias)?;
                }
                (None, None) => {}
                _ => return Err(Error::Dimension("gradient sets of different models".into())),
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: S) {
        for p in self.layers.iter_mut().flatten() {
            p.weights.scale(factor);
            p.bias.scale(factor);
        }
    }

    /// Tensors in canonical parameter order (weights then bias, per layer).
    pub fn tensors(&self) -> Vec<&Tensor<S>> {
        flat_tensors(&self.layers)
    }
}

fn flat_tensors<S>(layers: &[Option<LayerParams<S>>]) -> Vec<&Tensor<S>> {
    layers
        .iter()
        .flatten()
        .flat_map(|p| [&p.weights, &p.bias])
        .collect()
}

/// An ordered, shape-checked layer list and its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel<S> {
    input_shape: [usize; 3],
    layers: Vec<LayerSpec>,
    params: Vec<Option<LayerParams<S>>>,
    rng_seed: u64,
}

impl<S: Scalar> NetworkModel<S> {
    /// Builds a model with He-uniform weights (bound `sqrt(6 / fan_in)`)
    /// and zero biases drawn from a ChaCha8 stream seeded with `seed`.
    pub fn new(input_shape: [usize; 3], layers: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        shape_trace(&input_shape, &layers)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = layers
            .iter()
            .map(|layer| {
                layer.param_shapes().map(|(ws, bs)| {
                    let bound = (6.0 / layer.fan_in() as f64).sqrt();
                    let dist = Uniform::new_inclusive(-bound, bound);
                    LayerParams {
                        weights: Tensor::from_fn(&ws, |_| S::lit(dist.sample(&mut rng))),
                        bias: Tensor::zeros(&bs),
                    }
                })
            })
            .collect();
        Ok(Self {
            input_shape,
            layers,
            params,
            rng_seed: seed,
        })
    }

    /// Reassembles a model from stored parts, checking every shape.
    pub fn from_parts(
        input_shape: [usize; 3],
        layers: Vec<LayerSpec>,
        params: Vec<Option<LayerParams<S>>>,
        rng_seed: u64,
    ) -> Result<Self> {
        shape_trace(&input_shape, &layers)?;
        if params.len() != layers.len() {
            return Err(Error::Dimension(format!(
                "{} parameter slots for {} layers",
                params.len(),
                layers.len()
            )));
        }
        for (i, (layer, p)) in layers.iter().zip(&params).enumerate() {
            match (layer.param_shapes(), p) {
                (Some((ws, bs)), Some(p)) => {
                    p.weights.expect_shape(&ws, &format!("layer {i} weights"))?;
                    p.bias.expect_shape(&bs, &format!("layer {i} bias"))?;
                }
                (None, None) => {}
                _ => {
                    return Err(Error::Dimension(format!(
                        "layer {i} ({}) parameter presence mismatch",
                        layer.kind_name()
                    )))
                }
            }
        }
        Ok(Self {
            input_shape,
            layers,
            params,
            rng_seed,
        })
    }

    /// The reference 225×225×3 architecture with the default dropout rate.
    pub fn reference(seed: u64) -> Self {
        Self::reference_with_dropout(seed, DEFAULT_DROPOUT).expect("default dropout is valid")
    }

    pub fn reference_with_dropout(seed: u64, dropout_rate: f64) -> Result<Self> {
        Self::new(REFERENCE_INPUT, reference_layers(dropout_rate), seed)
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &[Option<LayerParams<S>>] {
        &self.params
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    /// Parameter tensors in canonical order (weights then bias, per layer).
    pub fn param_tensors(&self) -> Vec<&Tensor<S>> {
        flat_tensors(&self.params)
    }

    pub fn param_tensors_mut(&mut self) -> Vec<&mut Tensor<S>> {
        self.params
            .iter_mut()
            .flatten()
            .flat_map(|p| [&mut p.weights, &mut p.bias])
            .collect()
    }

    /// Human-readable name of the i-th parameter tensor, e.g. `dense_2.bias`.
    pub fn param_tensor_names(&self) -> Vec<String> {
        let names = layer_names(&self.layers);
        self.layers
            .iter()
            .zip(names)
            .filter(|(l, _)| l.param_shapes().is_some())
            .flat_map(|(_, n)| [format!("{n}.weights"), format!("{n}.bias")])
            .collect()
    }

    /// Replaces the dropout rate of every dropout layer.
    pub fn set_dropout_rate(&mut self, rate: f64) -> Result<()> {
        tensor::reshape_check_rate(rate)?;
        for layer in &mut self.layers {
            if let LayerSpec::Dropout { rate: r } = layer {
                *r = rate;
            }
        }
        Ok(())
    }

    pub fn output_shapes(&self) -> Vec<Vec<usize>> {
        shape_trace(&self.input_shape, &self.layers).expect("validated at construction")
    }

    pub fn trainable_params(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }

    pub fn non_trainable_params(&self) -> usize {
        0
    }

    pub fn num_classes(&self) -> usize {
        self.output_shapes().last().map_or(0, |s| s[0])
    }

    /// Runs the network on one `[H,W,C]` sample, returning class
    /// probabilities and the cache needed by [`backward`](Self::backward).
    pub fn forward(&self, input: &Tensor<S>, mut pass: Pass<'_>) -> Result<(Tensor<S>, ActivationCache<S>)> {
        self.check_input(input)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut aux = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for (layer, params) in self.layers.iter().zip(&self.params) {
            let (y, a) = self.apply(layer, params.as_ref(), &x, &mut pass)?;
            inputs.push(x);
            aux.push(a);
            x = y;
        }
        let probs = x.clone();
        Ok((x, ActivationCache { inputs, aux, probs }))
    }

    /// Inference-mode forward without keeping a cache.
    pub fn predict(&self, input: &Tensor<S>) -> Result<Tensor<S>> {
        self.check_input(input)?;
        let mut pass = Pass::Inference;
        let mut x = input.clone();
        for (layer, params) in self.layers.iter().zip(&self.params) {
            x = self.apply(layer, params.as_ref(), &x, &mut pass)?.0;
        }
        Ok(x)
    }

    fn check_input(&self, input: &Tensor<S>) -> Result<()> {
        if input.shape() != self.input_shape {
            return Err(Error::Dimension(format!(
                "model expects input {:?}, received {:?}",
                self.input_shape,
                input.shape()
            )));
        }
        Ok(())
    }

    fn apply(
        &self,
        layer: &LayerSpec,
        params: Option<&LayerParams<S>>,
        x: &Tensor<S>,
        pass: &mut Pass<'_>,
    ) -> Result<(Tensor<S>, Aux<S>)> {
        let p = || params.ok_or_else(|| Error::State("parameterized layer without parameters".into()));
        Ok(match *layer {
            LayerSpec::Conv(spec) => {
                let p = p()?;
                (tensor::conv2d_forward(x, &p.weights, &p.bias, &spec)?, Aux::None)
            }
            LayerSpec::MaxPool(spec) => {
                let (y, map) = tensor::maxpool_forward(x, &spec)?;
                (y, Aux::Argmax(map))
            }
            LayerSpec::ZeroPad { pad } => (tensor::zero_pad(x, pad)?, Aux::None),
            LayerSpec::Flatten => (tensor::flatten(x), Aux::None),
            LayerSpec::Dropout { rate } => match pass {
                Pass::Training(rng) => {
                    let (y, mask) = tensor::dropout(x, rate, *rng, true)?;
                    (y, Aux::Mask(mask))
                }
                Pass::Inference => (x.clone(), Aux::None),
            },
            LayerSpec::Dense { .. } => {
                let p = p()?;
                (tensor::dense_forward(x, &p.weights, &p.bias)?, Aux::None)
            }
            LayerSpec::Relu => (tensor::relu(x), Aux::None),
            LayerSpec::Softmax => (tensor::softmax(x)?, Aux::None),
        })
    }

    /// Gradients of the cross-entropy loss for `label` with respect to
    /// every parameter, given the cache of a forward pass on this model.
    pub fn backward(&self, cache: &ActivationCache<S>, label: usize) -> Result<GradientSet<S>> {
        let n = self.layers.len();
        if cache.inputs.len() != n || cache.aux.len() != n {
            return Err(Error::State(format!(
                "activation cache holds {} layers, model has {n}",
                cache.inputs.len()
            )));
        }
        if self.layers.last() != Some(&LayerSpec::Softmax) {
            return Err(Error::State("backward requires a softmax output layer".into()));
        }
        let mut grads = vec![None; n];
        let mut g = tensor::softmax_cross_entropy_backward(&cache.probs, label)?;
        for i in (0..n - 1).rev() {
            let x = &cache.inputs[i];
            let need_input = i > 0;
            g = match (self.layers[i], &cache.aux[i]) {
                (LayerSpec::Conv(spec), _) => {
                    let p = self.params[i].as_ref().expect("conv has params");
                    let (gi, gw, gb) =
                        tensor::conv2d_backward_inner(x, &p.weights, &g, &spec, need_input)?;
                    grads[i] = Some(LayerParams {
                        weights: gw,
                        bias: gb,
                    });
                    match gi {
                        Some(gi) => gi,
                        None => break,
                    }
                }
                (LayerSpec::Dense { .. }, _) => {
                    let p = self.params[i].as_ref().expect("dense has params");
                    let d = tensor::dense_backward(x, &p.weights, &g)?;
                    grads[i] = Some(LayerParams {
                        weights: d.weights,
                        bias: d.bias,
                    });
                    d.input
                }
                (LayerSpec::MaxPool(_), Aux::Argmax(map)) => tensor::maxpool_backward(map, &g)?,
                (LayerSpec::ZeroPad { pad }, _) => tensor::zero_pad_backward(&g, pad)?,
                (LayerSpec::Flatten, _) => g.reshape(x.shape())?,
                (LayerSpec::Dropout { rate }, Aux::Mask(mask)) => {
                    tensor::dropout_backward(mask, rate, &g)?
                }
                (LayerSpec::Dropout { .. }, Aux::None) => g,
                (LayerSpec::Relu, _) => tensor::relu_backward(x, &g)?,
                (layer, _) => {
                    return Err(Error::State(format!(
                        "cache entry {i} does not match {} layer",
                        layer.kind_name()
                    )))
                }
            };
        }
        Ok(GradientSet { layers: grads })
    }

    /// Keras-style summary table of the parameterized and shape-changing
    /// layers. Activations are folded into the preceding layer.
    pub fn render_summary(&self) -> String {
        let rule = "=".repeat(72);
        let mut out = String::new();
        out.push_str(&format!("{:<34}{:<26}{}\n", "Layer (type)", "Output Shape", "Param #"));
        out.push_str(&rule);
        out.push('\n');
        let names = layer_names(&self.layers);
        for ((layer, shape), name) in self.layers.iter().zip(self.output_shapes()).zip(names) {
            if matches!(layer, LayerSpec::Relu | LayerSpec::Softmax) {
                continue;
            }
            let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
            let shape = format!("(None, {})", dims.join(", "));
            let label = format!("{name} ({})", keras_type(layer));
            out.push_str(&format!("{label:<34}{shape:<26}{}\n", layer.param_count()));
        }
        out.push_str(&rule);
        out.push('\n');
        let total = self.trainable_params() + self.non_trainable_params();
        out.push_str(&format!("Total params: {}\n", group_thousands(total)));
        out.push_str(&format!(
            "Trainable params: {}\n",
            group_thousands(self.trainable_params())
        ));
        out.push_str(&format!(
            "Non-trainable params: {}\n",
            group_thousands(self.non_trainable_params())
        ));
        out
    }
}

/// Layer list of the reference model.
///
/// Kernel, window, stride and pad sizes are the unique integers that make
/// the output extents 223, 74, 72, 36, 35, 39, 13, 12, 16, 5 line up.
pub fn reference_layers(dropout_rate: f64) -> Vec<LayerSpec> {
    use LayerSpec::*;
    vec![
        Conv(ConvSpec::square(3, 3, 16)),
        Relu,
        MaxPool(PoolSpec::new(3, 3)),
        Conv(ConvSpec::square(3, 16, 32)),
        Relu,
        MaxPool(PoolSpec::new(2, 2)),
        Conv(ConvSpec::square(2, 32, 64)),
        Relu,
        ZeroPad { pad: 2 },
        MaxPool(PoolSpec::new(3, 3)),
        Conv(ConvSpec::square(2, 64, 64)),
        Relu,
        ZeroPad { pad: 2 },
        MaxPool(PoolSpec::new(3, 3)),
        Flatten,
        Dropout { rate: dropout_rate },
        Dense { inputs: 1600, outputs: 256 },
        Relu,
        Dense { inputs: 256, outputs: 128 },
        Relu,
        Dense { inputs: 128, outputs: 64 },
        Relu,
        Dense { inputs: 64, outputs: 3 },
        Softmax,
    ]
}

/// Output shape of every layer, in order.
pub fn shape_trace(input_shape: &[usize; 3], layers: &[LayerSpec]) -> Result<Vec<Vec<usize>>> {
    let mut shape = input_shape.to_vec();
    let mut out = Vec::with_capacity(layers.len());
    for (i, layer) in layers.iter().enumerate() {
        shape = layer.output_shape(&shape).map_err(|e| match e {
            Error::Dimension(m) => Error::Dimension(format!("layer {i} ({}): {m}", layer.kind_name())),
            other => other,
        })?;
        out.push(shape.clone());
    }
    Ok(out)
}

fn keras_type(layer: &LayerSpec) -> &'static str {
    match layer {
        LayerSpec::Conv(_) => "Conv2D",
        LayerSpec::MaxPool(_) => "MaxPooling2D",
        LayerSpec::ZeroPad { .. } => "ZeroPadding2D",
        LayerSpec::Flatten => "Flatten",
        LayerSpec::Dropout { .. } => "Dropout",
        LayerSpec::Dense { .. } => "Dense",
        LayerSpec::Relu => "ReLU",
        LayerSpec::Softmax => "Softmax",
    }
}

fn layer_names(layers: &[LayerSpec]) -> Vec<String> {
    let mut counts = std::collections::HashMap::new();
    layers
        .iter()
        .map(|l| {
            let base = match l {
                LayerSpec::Conv(_) => "conv2d",
                LayerSpec::MaxPool(_) => "max_pooling2d",
                LayerSpec::ZeroPad { .. } => "zero_padding2d",
                LayerSpec::Flatten => "flatten",
                LayerSpec::Dropout { .. } => "dropout",
                LayerSpec::Dense { .. } => "dense",
                LayerSpec::Relu => "relu",
                LayerSpec::Softmax => "softmax",
            };
            let n = counts.entry(base).or_insert(0);
            *n += 1;
            format!("{base}_{n}")
        })
        .collect()
}

fn group_thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}
