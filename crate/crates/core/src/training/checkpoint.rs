//! Little-endian checkpoint container.
//!
//! ```text
//! "MNET0001"
//! u32 layer count
//!   per layer: u8 kind tag, kind parameters as u32
//! per parameter tensor: u32 rank, u32 extents, f64 values
//! Adam first moments, then second moments, laid out like the parameters
//! u64 Adam step counter
//! f64 best validation accuracy
//! u32 epoch, u32 input height, width, channels, u64 init seed
//! ```

use std::fs;
use std::path::Path;

use super::AdamState;
use crate::network::{LayerParams, LayerSpec, NetworkModel};
use crate::tensor::{ConvSpec, PoolSpec, Tensor};
use crate::{Error, Result, Scalar};

pub const MAGIC: &[u8; 8] = b"MNET0001";

const TAG_CONV: u8 = 1;
const TAG_MAXPOOL: u8 = 2;
const TAG_ZEROPAD: u8 = 3;
const TAG_FLATTEN: u8 = 4;
const TAG_DROPOUT: u8 = 5;
const TAG_DENSE: u8 = 6;
const TAG_RELU: u8 = 7;
const TAG_SOFTMAX: u8 = 8;

/// Model, optimizer state and bookkeeping of the best epoch so far.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<S> {
    pub model: NetworkModel<S>,
    pub adam: AdamState<S>,
    /// 1-based epoch that produced this snapshot; 0 before training.
    pub epoch: u32,
    pub best_val_accuracy: f64,
}

impl<S: Scalar> Checkpoint<S> {
    pub fn untrained(model: NetworkModel<S>) -> Self {
        let adam = AdamState::for_model(&model);
        Self {
            model,
            adam,
            epoch: 0,
            best_val_accuracy: 0.0,
        }
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        let v = u32::try_from(v).expect("extent fits in u32");
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn tensor<S: Scalar>(&mut self, t: &Tensor<S>) {
        self.u32(t.rank());
        for &d in t.shape() {
            self.u32(d);
        }
        for &v in t.data() {
            self.f64(v.to_f64_lossless());
        }
    }
}

pub fn encode_checkpoint<S: Scalar>(ckpt: &Checkpoint<S>) -> Vec<u8> {
    let mut w = Writer(MAGIC.to_vec());
    let layers = ckpt.model.layers();
    w.u32(layers.len());
    for layer in layers {
        match *layer {
            LayerSpec::Conv(c) => {
                w.u8(TAG_CONV);
                for v in [c.kernel_h, c.kernel_w, c.stride, c.in_channels, c.out_channels] {
                    w.u32(v);
                }
            }
            LayerSpec::MaxPool(p) => {
                w.u8(TAG_MAXPOOL);
                w.u32(p.window);
                w.u32(p.stride);
            }
            LayerSpec::ZeroPad { pad } => {
                w.u8(TAG_ZEROPAD);
                w.u32(pad);
            }
            LayerSpec::Flatten => w.u8(TAG_FLATTEN),
            LayerSpec::Dropout { rate } => {
                // f64 bit pattern as low and high u32 words
                w.u8(TAG_DROPOUT);
                let bits = rate.to_bits();
                w.u32((bits & 0xffff_ffff) as usize);
                w.u32((bits >> 32) as usize);
            }
            LayerSpec::Dense { inputs, outputs } => {
                w.u8(TAG_DENSE);
                w.u32(inputs);
                w.u32(outputs);
            }
            LayerSpec::Relu => w.u8(TAG_RELU),
            LayerSpec::Softmax => w.u8(TAG_SOFTMAX),
        }
    }
    for t in ckpt.model.param_tensors() {
        w.tensor(t);
    }
    for t in ckpt.adam.m.iter().chain(&ckpt.adam.v) {
        w.tensor(t);
    }
    w.u64(ckpt.adam.t);
    w.f64(ckpt.best_val_accuracy);
    w.u32(ckpt.epoch as usize);
    for d in ckpt.model.input_shape() {
        w.u32(d);
    }
    w.u64(ckpt.model.rng_seed());
    w.0
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::format(
                self.pos as u64,
                format!("unexpected end of file reading {what}"),
            ));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }
    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }
    fn u64(&mut self, what: &str) -> Result<u64> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }
    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_bits(self.u64(what)?))
    }
    fn tensor<S: Scalar>(&mut self, expected: &[usize], what: &str) -> Result<Tensor<S>> {
        let at = self.pos as u64;
        let rank = self.u32(what)?;
        if rank != expected.len() {
            return Err(Error::format(at, format!("{what}: rank {rank}, expected {}", expected.len())));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(self.u32(what)?);
        }
        if shape != expected {
            return Err(Error::format(at, format!("{what}: shape {shape:?}, expected {expected:?}")));
        }
        let n: usize = shape.iter().product();
        let raw = self.take(n * 8, what)?;
        let data = raw
            .chunks_exact(8)
            .map(|b| S::lit(f64::from_le_bytes(b.try_into().expect("8 bytes"))))
            .collect();
        Tensor::new(&shape, data)
    }
}

pub fn decode_checkpoint<S: Scalar>(bytes: &[u8]) -> Result<Checkpoint<S>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic = r.take(8, "magic")?;
    if magic != MAGIC {
        return Err(Error::format(0, format!("bad magic {:?}", String::from_utf8_lossy(magic))));
    }
    let n_layers = r.u32("layer count")?;
    if n_layers > 4096 {
        return Err(Error::format(8, format!("implausible layer count {n_layers}")));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for i in 0..n_layers {
        let at = r.pos as u64;
        let what = format!("layer {i}");
        let layer = match r.u8(&what)? {
            TAG_CONV => LayerSpec::Conv(ConvSpec {
                kernel_h: r.u32(&what)?,
                kernel_w: r.u32(&what)?,
                stride: r.u32(&what)?,
                in_channels: r.u32(&what)?,
                out_channels: r.u32(&what)?,
            }),
            TAG_MAXPOOL => LayerSpec::MaxPool(PoolSpec {
                window: r.u32(&what)?,
                stride: r.u32(&what)?,
            }),
            TAG_ZEROPAD => LayerSpec::ZeroPad { pad: r.u32(&what)? },
            TAG_FLATTEN => LayerSpec::Flatten,
            TAG_DROPOUT => {
                let lo = r.u32(&what)? as u64;
                let hi = r.u32(&what)? as u64;
                LayerSpec::Dropout {
                    rate: f64::from_bits(hi << 32 | lo),
                }
            }
            TAG_DENSE => LayerSpec::Dense {
                inputs: r.u32(&what)?,
                outputs: r.u32(&what)?,
            },
            TAG_RELU => LayerSpec::Relu,
            TAG_SOFTMAX => LayerSpec::Softmax,
            tag => return Err(Error::format(at, format!("unknown layer tag {tag}"))),
        };
        layers.push(layer);
    }

    let mut shapes = Vec::new();
    for layer in &layers {
        if let Some((ws, bs)) = layer.param_shapes() {
            shapes.push(ws);
            shapes.push(bs);
        }
    }
    let read_all = |r: &mut Reader<'_>, what: &str| -> Result<Vec<Tensor<S>>> {
        shapes
            .iter()
            .enumerate()
            .map(|(i, s)| r.tensor(s, &format!("{what} {i}")))
            .collect()
    };
    let tensors = read_all(&mut r, "parameter tensor")?;
    let m = read_all(&mut r, "first moment")?;
    let v = read_all(&mut r, "second moment")?;
    let t = r.u64("step counter")?;
    let best_val_accuracy = r.f64("best validation accuracy")?;
    let epoch = r.u32("epoch")? as u32;
    let input_at = r.pos as u64;
    let input_shape = [r.u32("input shape")?, r.u32("input shape")?, r.u32("input shape")?];
    let seed = r.u64("seed")?;
    if r.pos != bytes.len() {
        return Err(Error::format(r.pos as u64, "trailing bytes after checkpoint"));
    }

    let mut tensors = tensors.into_iter();
    let params = layers
        .iter()
        .map(|l| {
            l.param_shapes().map(|_| LayerParams {
                weights: tensors.next().expect("counted"),
                bias: tensors.next().expect("counted"),
            })
        })
        .collect();
    let model = NetworkModel::from_parts(input_shape, layers, params, seed).map_err(|e| {
        Error::format(input_at, format!("layer list inconsistent with input shape: {e}"))
    })?;
    Ok(Checkpoint {
        model,
        adam: AdamState { m, v, t },
        epoch,
        best_val_accuracy,
    })
}

/// Writes via a temporary sibling file and rename, so readers never see a
/// partial checkpoint.
pub fn save_checkpoint<S: Scalar>(path: &Path, ckpt: &Checkpoint<S>) -> Result<()> {
    let bytes = encode_checkpoint(ckpt);
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<S: Scalar>(path: &Path) -> Result<Checkpoint<S>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
