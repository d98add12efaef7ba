//! Optimization: Adam, the stratified train/eval split, the epoch loop with
//! best-model checkpointing, and the binary checkpoint format.

mod adam;
mod checkpoint;
mod split;
mod trainer;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, MAGIC};
pub use split::split_dataset;
pub use trainer::{
    argmax, evaluate, read_curves_csv, train, write_curves_csv, EpochLog, Evaluation, LabeledSet,
    Sample, TrainConfig, Trainer,
};
