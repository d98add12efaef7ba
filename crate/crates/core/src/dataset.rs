//! Manifest-driven ingestion of a class-labelled mammogram directory.
//!
//! Expected layout: `<root>/{normal,benign,malignant}/*.{pgm,png}`. File
//! stems of the form `<patient>_<L|R>_<CC|MLO>` carry per-image metadata;
//! anything else ingests with `unknown` placeholders.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::preprocess::decode_file;
use crate::{Error, Result, CLASS_NAMES};

macro_rules! vocabulary {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub fn as_str(&self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::Input(format!(
                        concat!("unknown ", stringify!($name), " {:?}"), other
                    ))),
                }
            }
        }
    };
}

vocabulary!(Label { Normal => "normal", Benign => "benign", Malignant => "malignant" });
vocabulary!(View { Cc => "CC", Mlo => "MLO", Unknown => "unknown" });
vocabulary!(Laterality { Left => "L", Right => "R", Unknown => "unknown" });
vocabulary!(Split { Train => "train", Eval => "eval", Unassigned => "unassigned" });

impl Label {
    pub const ALL: [Label; 3] = [Label::Normal, Label::Benign, Label::Malignant];

    /// Output-unit index of the class.
    pub fn index(&self) -> usize {
        *self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    #[serde(rename = "path")]
    pub image_path: PathBuf,
    pub label: Label,
    pub patient_id: String,
    pub view: View,
    pub laterality: Laterality,
    pub split: Split,
}

impl SampleRecord {
    /// Record for `path` with metadata parsed from its file stem when it
    /// matches `<patient>_<L|R>_<CC|MLO>`.
    pub fn from_path(image_path: PathBuf, label: Label) -> (Self, bool) {
        let parsed = image_path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(parse_stem);
        let matched = parsed.is_some();
        let (patient_id, laterality, view) =
            parsed.unwrap_or(("unknown".to_string(), Laterality::Unknown, View::Unknown));
        (
            Self {
                image_path,
                label,
                patient_id,
                view,
                laterality,
                split: Split::Unassigned,
            },
            matched,
        )
    }
}

fn parse_stem(stem: &str) -> Option<(String, Laterality, View)> {
    let mut parts = stem.rsplitn(3, '_');
    let view = match parts.next()? {
        "CC" => View::Cc,
        "MLO" => View::Mlo,
        _ => return None,
    };
    let side = match parts.next()? {
        "L" => Laterality::Left,
        "R" => Laterality::Right,
        _ => return None,
    };
    let patient = parts.next().filter(|p| !p.is_empty())?;
    Some((patient.to_string(), side, view))
}

/// Ordered sample records plus the directory their paths are relative to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub root_dir: PathBuf,
    pub records: Vec<SampleRecord>,
}

impl DatasetManifest {
    pub fn class_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for r in &self.records {
            counts[r.label.index()] += 1;
        }
        counts
    }

    pub fn resolve(&self, record: &SampleRecord) -> PathBuf {
        self.root_dir.join(&record.image_path)
    }

    /// Sorts records by (label, path), the canonical manifest order.
    pub fn sort(&mut self) {
        self.records
            .sort_by(|a, b| (a.label, &a.image_path).cmp(&(b.label, &b.image_path)));
    }

    pub fn split_counts(&self, split: Split) -> [usize; 3] {
        let mut counts = [0; 3];
        for r in self.records.iter().filter(|r| r.split == split) {
            counts[r.label.index()] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone)]
pub struct Scan {
    pub manifest: DatasetManifest,
    /// Files whose names did not match the metadata pattern.
    pub unparsed: Vec<PathBuf>,
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm") || e.eq_ignore_ascii_case("png"))
}

/// Lists every PGM/PNG file under the three class directories of `root`.
pub fn scan_directory(root: &Path) -> Result<Scan> {
    let missing: Vec<&str> = CLASS_NAMES
        .iter()
        .copied()
        .filter(|c| !root.join(c).is_dir())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Config(format!(
            "{} is missing class directories: {} (required: {})",
            root.display(),
            missing.join(", "),
            CLASS_NAMES.join(", ")
        )));
    }
    let mut records = Vec::new();
    let mut unparsed = Vec::new();
    for label in Label::ALL {
        let dir = root.join(label.as_str());
        let entries = fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&dir, e))?;
            let path = entry.path();
            if !path.is_file() || !is_image(&path) {
                continue;
            }
            let rel = Path::new(label.as_str()).join(entry.file_name());
            let (record, matched) = SampleRecord::from_path(rel, label);
            if !matched {
                unparsed.push(record.image_path.clone());
            }
            records.push(record);
        }
    }
    let mut manifest = DatasetManifest {
        root_dir: root.to_path_buf(),
        records,
    };
    manifest.sort();
    unparsed.sort();
    if !unparsed.is_empty() {
        log::warn!(
            "{} file names lack <patient>_<L|R>_<CC|MLO> metadata",
            unparsed.len()
        );
    }
    Ok(Scan { manifest, unparsed })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IssueKind {
    Unreadable(String),
    NotGrayscale(String),
    DuplicatePath,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub path: PathBuf,
    pub kind: IssueKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    /// Sorted by path.
    pub issues: Vec<Issue>,
    pub class_counts: [usize; 3],
    pub valid: usize,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Decodes every record and collects problems instead of stopping at the
/// first one.
pub fn validate_manifest(manifest: &DatasetManifest) -> ValidationReport {
    let mut issues = Vec::new();
    let mut seen = HashSet::new();
    let mut valid = 0;
    for record in &manifest.records {
        if !seen.insert(&record.image_path) {
            issues.push(Issue {
                path: record.image_path.clone(),
                kind: IssueKind::DuplicatePath,
            });
            continue;
        }
        match decode_file(&manifest.resolve(record)) {
            Ok(_) => valid += 1,
            Err(Error::UnsupportedImage(m)) => issues.push(Issue {
                path: record.image_path.clone(),
                kind: IssueKind::NotGrayscale(m),
            }),
            Err(e) => issues.push(Issue {
                path: record.image_path.clone(),
                kind: IssueKind::Unreadable(e.to_string()),
            }),
        }
    }
    issues.sort_by(|a, b| a.path.cmp(&b.path));
    ValidationReport {
        issues,
        class_counts: manifest.class_counts(),
        valid,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("manifest {}: {other:?}", path.display())),
    }
}

/// Writes `path,label,patient_id,view,laterality,split` CSV with LF endings.
pub fn write_manifest(path: &Path, manifest: &DatasetManifest) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    for r in &manifest.records {
        if r.image_path.to_str().is_none() {
            return Err(Error::Input(format!(
                "non UTF-8 path {}",
                r.image_path.display()
            )));
        }
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    if manifest.records.is_empty() {
        w.write_record(["path", "label", "patient_id", "view", "laterality", "split"])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a manifest; record paths resolve against the file's directory.
pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let records = r
        .deserialize()
        .collect::<std::result::Result<Vec<SampleRecord>, _>>()
        .map_err(|e| csv_err(path, e))?;
    let root_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    Ok(DatasetManifest { root_dir, records })
}

/// Per-class counts keyed by class name.
pub fn count_table(counts: &[usize; 3]) -> BTreeMap<&'static str, usize> {
    CLASS_NAMES.iter().copied().zip(counts.iter().copied()).collect()
}
