use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mammonet_core::dataset::{
    read_manifest, scan_directory, validate_manifest, write_manifest, DatasetManifest, IssueKind,
    SampleRecord, Split,
};
use mammonet_core::metrics::{compute_metrics, render_report, ConfusionMatrix};
use mammonet_core::network::NetworkModel;
use mammonet_core::preprocess::{
    bicubic_resize, condition, decode_file, extract_patches, image_to_tensor, preprocess, write_pgm,
    GrayImage,
};
use mammonet_core::training::{
    argmax, evaluate, load_checkpoint, split_dataset, write_curves_csv, Checkpoint, LabeledSet,
    Sample, Trainer,
};
use mammonet_core::{Error, Result, CLASS_NAMES};

use crate::RunConfig;

pub const RESOLVED_CONFIG: &str = "config.resolved";
pub const MANIFEST: &str = "manifest.csv";
pub const CHECKPOINT: &str = "best.ckpt";
pub const CURVES: &str = "curves.csv";
pub const METRICS: &str = "metrics.csv";
pub const CONFUSION: &str = "confusion.txt";

/// Prefixes messages that lack a location with `path`.
fn at(path: &Path, err: Error) -> Error {
    let p = path.display();
    match err {
        Error::Config(m) => Error::Config(format!("{p}: {m}")),
        Error::Dimension(m) => Error::Dimension(format!("{p}: {m}")),
        Error::Input(m) => Error::Input(format!("{p}: {m}")),
        Error::UnsupportedImage(m) => Error::UnsupportedImage(format!("{p}: {m}")),
        Error::Format { offset, message } => Error::Format {
            offset,
            message: format!("{p}: {message}"),
        },
        other => other,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    create_dir(dir)?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn required<'a>(value: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| Error::Config(format!("{what} is not set (flag or configuration key)")))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Conditions every readable image under `data_root` to the model size,
/// writes `images/<label>/<stem>.pgm`, a split `manifest.csv` and
/// `prepare_report.txt`; with `patch_size > 0` also tiles each conditioned
/// image into `patches/`.
pub fn prepare(cfg: &RunConfig) -> Result<String> {
    let root = required(&cfg.data_root, "data_root")?;
    let scan = scan_directory(root)?;
    let validation = validate_manifest(&scan.manifest);
    let rejected: BTreeSet<&Path> = validation.issues.iter().map(|i| i.path.as_path()).collect();

    let out = &cfg.out;
    create_dir(out)?;
    write_text(out, RESOLVED_CONFIG, &cfg.render())?;

    let opts = cfg.preprocess_options();
    let mut records = Vec::new();
    let mut written = BTreeSet::new();
    let mut patch_rows = String::from("source,x,y,path\n");
    for record in &scan.manifest.records {
        if rejected.contains(record.image_path.as_path()) {
            continue;
        }
        let source = scan.manifest.resolve(record);
        let img = decode_file(&source).map_err(|e| at(&source, e))?;
        let conditioned = condition(&img, &opts).map_err(|e| at(&source, e))?;
        let side = opts.target_side;
        let resized = if conditioned.width() == side && conditioned.height() == side {
            conditioned.clone()
        } else {
            bicubic_resize(&conditioned, side, side)?
        };
        let label = record.label.as_str();
        let name = stem(&record.image_path);
        let rel = Path::new("images").join(label).join(format!("{name}.pgm"));
        if !written.insert(rel.clone()) {
            return Err(Error::Config(format!(
                "{} maps to {} which another input already produced",
                source.display(),
                rel.display()
            )));
        }
        create_dir(&out.join("images").join(label))?;
        write_pgm(&out.join(&rel), &resized)?;

        if cfg.patch_size > 0 {
            let dir = Path::new("patches").join(label);
            create_dir(&out.join(&dir))?;
            for p in extract_patches(&conditioned, cfg.patch_size, cfg.patch_overlap)
                .map_err(|e| at(&source, e))?
            {
                let prel = dir.join(format!("{name}_x{}_y{}.pgm", p.x, p.y));
                write_pgm(&out.join(&prel), &p.image)?;
                writeln!(patch_rows, "{},{},{},{}", rel.display(), p.x, p.y, prel.display())
                    .expect("string write");
            }
        }
        records.push(SampleRecord {
            image_path: rel,
            ..record.clone()
        });
    }
    if cfg.patch_size > 0 {
        write_text(out, "patches.csv", &patch_rows)?;
    }

    let mut manifest = DatasetManifest {
        root_dir: out.clone(),
        records,
    };
    manifest.sort();
    let manifest = split_dataset(&manifest, (cfg.train_fraction, cfg.eval_fraction), cfg.seed)?;
    write_manifest(&out.join(MANIFEST), &manifest)?;

    let mut report = String::new();
    let train = manifest.split_counts(Split::Train);
    let eval = manifest.split_counts(Split::Eval);
    writeln!(report, "{:<12}{:>8}{:>8}{:>8}", "class", "train", "eval", "total").unwrap();
    for (i, name) in CLASS_NAMES.iter().enumerate() {
        writeln!(report, "{name:<12}{:>8}{:>8}{:>8}", train[i], eval[i], train[i] + eval[i]).unwrap();
    }
    writeln!(report, "prepared {} of {} images", manifest.records.len(), scan.manifest.records.len()).unwrap();
    for issue in &validation.issues {
        let why = match &issue.kind {
            IssueKind::Unreadable(m) => format!("unreadable: {m}"),
            IssueKind::NotGrayscale(m) => format!("not grayscale: {m}"),
            IssueKind::DuplicatePath => "duplicate path".to_string(),
        };
        writeln!(report, "skipped {}: {why}", issue.path.display()).unwrap();
        log::warn!("skipped {}: {why}", issue.path.display());
    }
    for path in &scan.unparsed {
        writeln!(report, "no metadata in file name: {}", path.display()).unwrap();
    }
    write_text(out, "prepare_report.txt", &report)?;
    Ok(report)
}

fn load_image_tensor(path: &Path, model: &NetworkModel<f64>) -> Result<mammonet_core::Tensor> {
    let img = decode_file(path).map_err(|e| at(path, e))?;
    let [h, w, _] = model.input_shape();
    if img.height() != h || img.width() != w {
        return Err(Error::Dimension(format!(
            "{} is {}x{} but the model takes {w}x{h}; run `prepare` first",
            path.display(),
            img.width(),
            img.height()
        )));
    }
    Ok(image_to_tensor(&img))
}

fn load_split(
    manifest: &DatasetManifest,
    split: Split,
    model: &NetworkModel<f64>,
) -> Result<Vec<Sample<f64>>> {
    manifest
        .records
        .iter()
        .filter(|r| r.split == split)
        .map(|r| {
            Ok(Sample {
                input: load_image_tensor(&manifest.resolve(r), model)?,
                label: r.label.index(),
            })
        })
        .collect()
}

/// Trains the reference network; writes `best.ckpt` whenever validation
/// accuracy improves and rewrites `curves.csv` after every epoch.
pub fn train(cfg: &RunConfig) -> Result<String> {
    let manifest_path = required(&cfg.manifest, "manifest")?;
    let mut manifest = read_manifest(manifest_path)?;
    if manifest.records.iter().any(|r| r.split == Split::Unassigned) {
        log::info!("manifest has unassigned records; splitting with seed {}", cfg.seed);
        manifest = split_dataset(&manifest, (cfg.train_fraction, cfg.eval_fraction), cfg.seed)?;
    }
    let model = NetworkModel::reference_with_dropout(cfg.seed, cfg.dropout_rate)?;
    let data = LabeledSet {
        train: load_split(&manifest, Split::Train, &model)?,
        eval: load_split(&manifest, Split::Eval, &model)?,
    };

    let out = &cfg.out;
    create_dir(out)?;
    write_text(out, RESOLVED_CONFIG, &cfg.render())?;
    let ckpt_path = out.join(CHECKPOINT);
    let curves = out.join(CURVES);
    let mut trainer = Trainer::new(model, cfg.train_config(Some(ckpt_path.clone())))?;
    for _ in 0..cfg.epochs {
        trainer.run_epoch(&data)?;
        write_curves_csv(&curves, trainer.logs())?;
    }
    let best = trainer.best().expect("at least one epoch ran");
    Ok(format!(
        "trained {} epochs on {} train / {} eval images\nbest epoch {}: val_acc {}\ncheckpoint {}\ncurves {}\n",
        cfg.epochs,
        data.train.len(),
        data.eval.len(),
        best.epoch,
        best.best_val_accuracy,
        ckpt_path.display(),
        curves.display()
    ))
}

/// Scores a checkpoint on `eval_split`; writes `metrics.csv` and
/// `confusion.txt` and returns the rounded table.
pub fn eval(cfg: &RunConfig) -> Result<String> {
    let ckpt_path = cfg.checkpoint.clone().unwrap_or_else(|| cfg.out.join(CHECKPOINT));
    let ckpt: Checkpoint<f64> = load_checkpoint(&ckpt_path).map_err(|e| at(&ckpt_path, e))?;
    let manifest = read_manifest(required(&cfg.manifest, "manifest")?)?;
    let samples = load_split(&manifest, cfg.eval_split, &ckpt.model)?;
    if samples.is_empty() {
        return Err(Error::Config(format!("manifest has no {} records", cfg.eval_split)));
    }
    let scored = evaluate(&ckpt.model, &samples)?;
    let actual: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let matrix = ConfusionMatrix::from_predictions(&actual, &scored.predictions, &CLASS_NAMES)?;
    let report = compute_metrics(&matrix)?;
    let rendered = render_report(&report, &matrix);

    let out = &cfg.out;
    write_text(out, METRICS, &rendered.csv)?;
    write_text(out, CONFUSION, &matrix.render())?;
    // the training run's resolved configuration takes precedence
    if !out.join(RESOLVED_CONFIG).exists() {
        write_text(out, RESOLVED_CONFIG, &cfg.render())?;
    }
    Ok(format!(
        "{} split: {} images, loss {:.6}\n{}",
        cfg.eval_split,
        samples.len(),
        scored.loss,
        rendered.table
    ))
}

/// `label p_normal p_benign p_malignant` for one image.
pub fn predict(cfg: &RunConfig, image: &Path, prepared: bool) -> Result<String> {
    let model = match &cfg.checkpoint {
        Some(path) => load_checkpoint::<f64>(path).map_err(|e| at(path, e))?.model,
        None => {
            log::warn!("no checkpoint given; using an untrained model from seed {}", cfg.seed);
            NetworkModel::reference_with_dropout(cfg.seed, cfg.dropout_rate)?
        }
    };
    let img: GrayImage = decode_file(image).map_err(|e| at(image, e))?;
    let img = if prepared {
        img
    } else {
        preprocess(&img, &cfg.preprocess_options()).map_err(|e| at(image, e))?
    };
    let probs = model.predict(&image_to_tensor(&img)).map_err(|e| at(image, e))?;
    let p = probs.data();
    Ok(format!(
        "{} {:.6} {:.6} {:.6}\n",
        CLASS_NAMES[argmax(&probs)],
        p[0],
        p[1],
        p[2]
    ))
}

/// Layer table of a checkpoint, or of a fresh reference model.
pub fn inspect(cfg: &RunConfig, reference: bool) -> Result<String> {
    if reference {
        return Ok(NetworkModel::<f64>::reference(cfg.seed).render_summary());
    }
    let path = cfg
        .checkpoint
        .as_deref()
        .ok_or_else(|| Error::Config("inspect needs --checkpoint or --reference".into()))?;
    let ckpt: Checkpoint<f64> = load_checkpoint(path).map_err(|e| at(path, e))?;
    let [h, w, c] = ckpt.model.input_shape();
    let mut text = ckpt.model.render_summary();
    writeln!(text, "Input shape: ({h}, {w}, {c})").unwrap();
    writeln!(text, "Epoch: {}", ckpt.epoch).unwrap();
    writeln!(text, "Best validation accuracy: {}", ckpt.best_val_accuracy).unwrap();
    writeln!(text, "Adam step: {}", ckpt.adam.t).unwrap();
    writeln!(text, "Initialization seed: {}", ckpt.model.rng_seed()).unwrap();
    Ok(text)
}
