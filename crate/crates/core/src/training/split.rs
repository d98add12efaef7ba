use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{DatasetManifest, Label, Split};
use crate::{Error, Result};

/// Stratified seeded split into train and eval.
///
/// Each class is shuffled independently and cut at its largest-remainder
/// share of `fractions = (train, eval)`.
pub fn split_dataset(
    manifest: &DatasetManifest,
    fractions: (f64, f64),
    seed: u64,
) -> Result<DatasetManifest> {
    let (train, eval) = fractions;
    if !(0.0..=1.0).contains(&train) || !(0.0..=1.0).contains(&eval) || (train + eval - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split fractions must be non-negative and sum to 1, got {train} + {eval}"
        )));
    }
    let mut out = manifest.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for label in Label::ALL {
        let mut members: Vec<usize> = (0..out.records.len())
            .filter(|&i| out.records[i].label == label)
            .collect();
        if members.is_empty() {
            return Err(Error::Config(format!("class {label} has no samples")));
        }
        members.shuffle(&mut rng);
        let n_train = largest_remainder(members.len(), train, eval);
        for (rank, &i) in members.iter().enumerate() {
            out.records[i].split = if rank < n_train { Split::Train } else { Split::Eval };
        }
    }
    Ok(out)
}

/// Train share of `n` under largest-remainder rounding; ties favour train.
fn largest_remainder(n: usize, train: f64, eval: f64) -> usize {
    let qt = n as f64 * train;
    let qe = n as f64 * eval;
    let (ft, fe) = (qt.floor() as usize, qe.floor() as usize);
    let mut n_train = ft.min(n);
    let leftover = n.saturating_sub(ft + fe);
    if leftover > 0 && qt - qt.floor() >= qe - qe.floor() {
        n_train += 1;
    }
    if leftover > 1 {
        n_train += leftover - 1;
    }
    n_train.min(n)
}
