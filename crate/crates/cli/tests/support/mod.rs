#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mammonet_core::network::{LayerSpec, NetworkModel};
use mammonet_core::preprocess::{encode_pgm, GrayImage};
use mammonet_core::tensor::{ConvSpec, PoolSpec, Tensor};
use mammonet_core::CLASS_NAMES;
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

/// The reference layer kinds in reference order, sized for a 9×9×3 input.
pub fn shrunken_model(seed: u64) -> NetworkModel<f64> {
    use LayerSpec::*;
    let layers = vec![
        Conv(ConvSpec::square(3, 3, 4)),
        Relu,
        MaxPool(PoolSpec::new(2, 1)),
        Conv(ConvSpec::square(2, 4, 4)),
        Relu,
        MaxPool(PoolSpec::new(2, 1)),
        Conv(ConvSpec::square(2, 4, 4)),
        Relu,
        ZeroPad { pad: 1 },
        MaxPool(PoolSpec::new(2, 2)),
        Conv(ConvSpec::square(2, 4, 4)),
        Relu,
        ZeroPad { pad: 1 },
        MaxPool(PoolSpec::new(2, 1)),
        Flatten,
        Dropout { rate: 0.5 },
        Dense { inputs: 16, outputs: 8 },
        Relu,
        Dense { inputs: 8, outputs: 6 },
        Relu,
        Dense { inputs: 6, outputs: 5 },
        Relu,
        Dense { inputs: 5, outputs: 3 },
        Softmax,
    ];
    NetworkModel::new([9, 9, 3], layers, seed).unwrap()
}

/// Raw 256×256 fixture: the leftmost 20%, 50% or 80% of columns are bright
/// for normal, benign and malignant, the rest dark, both with noise. The
/// class survives equalization because it is a spatial pattern, not a
/// global brightness.
pub fn write_column_fixture(root: &Path, per_class: usize, seed: u64) {
    let mut r = rng(seed);
    for (label, name) in CLASS_NAMES.iter().enumerate() {
        let dir = root.join(name);
        fs::create_dir_all(&dir).unwrap();
        let frac = [0.2, 0.5, 0.8][label];
        for i in 0..per_class {
            let img = GrayImage::from_fn(256, 256, |x, _| {
                let base: i32 = if (x as f64) < frac * 256.0 { 200 } else { 30 };
                (base + r.gen_range(-20..=20)) as u8
            });
            let side = if i % 2 == 0 { "L" } else { "R" };
            let view = if i % 3 == 0 { "MLO" } else { "CC" };
            fs::write(dir.join(format!("F{label}{i:02}_{side}_{view}.pgm")), encode_pgm(&img)).unwrap();
        }
    }
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_mammonet"))
}

pub fn mammonet(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env("MAMMONET_LOG", "error")
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Fixture configuration for the end-to-end runs.
pub const FIXTURE_CONFIG: &str = "\
# end-to-end fixture
epochs = 15
batch_size = 4
learning_rate = 0.001
";

/// Runs prepare, train and eval into `work/{data,run}` from the raw tree
/// at `raw`; panics with the command's stderr on failure.
pub fn pipeline(raw: &Path, work: &Path, seed: u64) -> (PathBuf, PathBuf) {
    let data = work.join("data");
    let run = work.join("run");
    let cfg = work.join("fixture.cfg");
    fs::create_dir_all(work).unwrap();
    fs::write(&cfg, FIXTURE_CONFIG).unwrap();
    let seed = seed.to_string();
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let manifest = s(&data.join("manifest.csv"));
    let steps: [Vec<String>; 3] = [
        vec!["prepare".into(), "--data".into(), s(raw), "--out".into(), s(&data)],
        vec!["train".into(), "--manifest".into(), manifest.clone(), "--out".into(), s(&run)],
        vec!["eval".into(), "--manifest".into(), manifest, "--out".into(), s(&run)],
    ];
    for step in steps {
        let mut args: Vec<&str> = step.iter().map(String::as_str).collect();
        args.extend(["--config", cfg.to_str().unwrap(), "--seed", &seed]);
        let o = mammonet(&args);
        assert!(o.status.success(), "{:?} failed: {}", step[0], stderr(&o));
    }
    (data, run)
}
