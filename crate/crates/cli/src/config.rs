//! `key = value` run configuration shared by every command.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mammonet_core::dataset::Split;
use mammonet_core::preprocess::{PreprocessOptions, RoiBox, MODEL_SIDE};
use mammonet_core::training::TrainConfig;
use mammonet_core::{Error, Result};

/// Every tunable of the pipeline. Commands read the subset they need; the
/// whole set is written to `config.resolved` for provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub data_root: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: PathBuf,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub train_fraction: f64,
    pub eval_fraction: f64,
    pub median_window: usize,
    pub equalize: bool,
    pub target_side: usize,
    pub roi: Option<RoiBox>,
    /// 0 disables patch export.
    pub patch_size: usize,
    pub patch_overlap: usize,
    pub eval_split: Split,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        let p = PreprocessOptions::default();
        Self {
            seed: t.seed,
            data_root: None,
            manifest: None,
            checkpoint: None,
            out: PathBuf::from("mammonet-run"),
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
            batch_size: t.batch_size,
            dropout_rate: t.dropout_rate,
            train_fraction: t.split_fractions.0,
            eval_fraction: t.split_fractions.1,
            median_window: p.median_window,
            equalize: p.equalize,
            target_side: p.target_side,
            roi: p.roi,
            patch_size: 0,
            patch_overlap: 25,
            eval_split: Split::Eval,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn parse_roi(value: &str) -> Result<Option<RoiBox>> {
    if value.is_empty() || value == "none" {
        return Ok(None);
    }
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(Error::Config(format!("roi must be x,y,w,h or none, got {value:?}")));
    }
    let n = |s: &str| parse::<usize>("roi", s);
    Ok(Some(RoiBox {
        x: n(parts[0])?,
        y: n(parts[1])?,
        w: n(parts[2])?,
        h: n(parts[3])?,
    }))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl RunConfig {
    /// Assigns one key from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse(key, value)?,
            "data_root" => self.data_root = parse_path(value),
            "manifest" => self.manifest = parse_path(value),
            "checkpoint" => self.checkpoint = parse_path(value),
            "out" => {
                self.out = parse_path(value)
                    .ok_or_else(|| Error::Config("out must not be empty".into()))?
            }
            "epochs" => self.epochs = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "beta1" => self.beta1 = parse(key, value)?,
            "beta2" => self.beta2 = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "dropout_rate" => self.dropout_rate = parse(key, value)?,
            "train_fraction" => self.train_fraction = parse(key, value)?,
            "eval_fraction" => self.eval_fraction = parse(key, value)?,
            "median_window" => self.median_window = parse(key, value)?,
            "equalize" => self.equalize = parse(key, value)?,
            "target_side" => self.target_side = parse(key, value)?,
            "roi" => self.roi = parse_roi(value)?,
            "patch_size" => self.patch_size = parse(key, value)?,
            "patch_overlap" => self.patch_overlap = parse(key, value)?,
            "eval_split" => self.eval_split = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment, blank lines are
    /// skipped and a key may appear only once.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        let mut seen = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |m: String| Error::Config(format!("{origin}:{}: {m}", n + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected `key = value`, got {line:?}")))?;
            let key = key.trim();
            if seen.contains(&key) {
                return Err(at(format!("duplicate key {key:?}")));
            }
            seen.push(key);
            self.set(key, value.trim()).map_err(|e| match e {
                Error::Config(m) => at(m),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text, &path.display().to_string())?;
        Ok(cfg)
    }

    /// Every key in a fixed order, parseable by [`RunConfig::apply_text`].
    pub fn render(&self) -> String {
        let roi = self
            .roi
            .map(|r| format!("{},{},{},{}", r.x, r.y, r.w, r.h))
            .unwrap_or_else(|| "none".into());
        let rows: [(&str, String); 21] = [
            ("seed", self.seed.to_string()),
            ("data_root", show_path(&self.data_root)),
            ("manifest", show_path(&self.manifest)),
            ("checkpoint", show_path(&self.checkpoint)),
            ("out", self.out.display().to_string()),
            ("epochs", self.epochs.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("beta1", self.beta1.to_string()),
            ("beta2", self.beta2.to_string()),
            ("epsilon", self.epsilon.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("dropout_rate", self.dropout_rate.to_string()),
            ("train_fraction", self.train_fraction.to_string()),
            ("eval_fraction", self.eval_fraction.to_string()),
            ("median_window", self.median_window.to_string()),
            ("equalize", self.equalize.to_string()),
            ("target_side", self.target_side.to_string()),
            ("roi", roi),
            ("patch_size", self.patch_size.to_string()),
            ("patch_overlap", self.patch_overlap.to_string()),
            ("eval_split", self.eval_split.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in rows {
            writeln!(out, "{k} = {v}").expect("string write");
        }
        out
    }

    pub fn train_config(&self, checkpoint_path: Option<PathBuf>) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            batch_size: self.batch_size,
            dropout_rate: self.dropout_rate,
            seed: self.seed,
            split_fractions: (self.train_fraction, self.eval_fraction),
            checkpoint_path,
        }
    }

    pub fn preprocess_options(&self) -> PreprocessOptions {
        PreprocessOptions {
            median_window: self.median_window,
            equalize: self.equalize,
            roi: self.roi,
            target_side: self.target_side,
        }
    }

    /// Range checks that do not depend on any input file.
    pub fn validate(&self) -> Result<()> {
        self.train_config(None).validate()?;
        let bad = |m: String| Err(Error::Config(m));
        if self.median_window == 0 || self.median_window % 2 == 0 {
            return bad(format!("median_window must be odd, got {}", self.median_window));
        }
        if self.target_side != MODEL_SIDE {
            return bad(format!(
                "target_side must be {MODEL_SIDE} for the reference network, got {}",
                self.target_side
            ));
        }
        if self.patch_size > 0 && self.patch_overlap >= self.patch_size {
            return bad(format!(
                "patch_overlap {} must be smaller than patch_size {}",
                self.patch_overlap, self.patch_size
            ));
        }
        Ok(())
    }
}
