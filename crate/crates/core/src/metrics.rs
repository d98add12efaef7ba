//! Confusion matrix and one-vs-rest precision / recall / F1 with macro
//! averaging.
//!
//! Counts are exact integers and every derived metric is an exact rational,
//! so reports compare exactly against independent recounts. The matrix is
//! indexed `[actual][predicted]`.

use std::fmt::Write as _;
use std::ops::{Add, Div};

use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};

use crate::{Error, Result};

pub type Rational = Ratio<u64>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
    class_names: Vec<String>,
}

impl ConfusionMatrix {
    pub fn new(class_names: &[&str]) -> Self {
        let k = class_names.len();
        Self {
            k,
            counts: vec![0; k * k],
            class_names: class_names.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Matrix with generic class names `class0..`.
    pub fn with_classes(k: usize) -> Self {
        let names: Vec<String> = (0..k).map(|i| format!("class{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        Self::new(&refs)
    }

    pub fn from_predictions(actuals: &[usize], predicted: &[usize], class_names: &[&str]) -> Result<Self> {
        if actuals.len() != predicted.len() {
            return Err(Error::Input(format!(
                "{} actual labels but {} predictions",
                actuals.len(),
                predicted.len()
            )));
        }
        let mut m = Self::new(class_names);
        for (&a, &p) in actuals.iter().zip(predicted) {
            m.accumulate(a, p)?;
        }
        Ok(m)
    }

    pub fn accumulate(&mut self, actual: usize, predicted: usize) -> Result<()> {
        if actual >= self.k || predicted >= self.k {
            return Err(Error::Input(format!(
                "class pair ({actual}, {predicted}) out of range for {} classes",
                self.k
            )));
        }
        self.counts[actual * self.k + predicted] += 1;
        Ok(())
    }

    /// Cell-wise sum; partial matrices from disjoint shards merge to the
    /// sequential result.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.k != other.k {
            return Err(Error::Input(format!(
                "cannot merge {}-class and {}-class matrices",
                self.k, other.k
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn get(&self, actual: usize, predicted: usize) -> u64 {
        self.counts[actual * self.k + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }

    /// Per-class number of actual samples.
    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.k).map(|a| (0..self.k).map(|p| self.get(a, p)).sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.k).map(|p| (0..self.k).map(|a| self.get(a, p)).sum()).collect()
    }

    /// `k` lines of `k` space-separated counts, actual-major.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for row in self.counts.chunks(self.k.max(1)) {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MetricFlags {
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

impl MetricFlags {
    pub fn render(&self) -> String {
        let mut parts = Vec::new();
        if self.precision_undefined {
            parts.push("precision_undefined");
        }
        if self.recall_undefined {
            parts.push("recall_undefined");
        }
        if self.f1_undefined {
            parts.push("f1_undefined");
        }
        parts.join(";")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMetrics {
    pub name: String,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub support: u64,
    pub precision: Rational,
    pub recall: Rational,
    pub f1: Rational,
    pub flags: MetricFlags,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricsReport {
    pub classes: Vec<ClassMetrics>,
    pub macro_precision: Rational,
    pub macro_recall: Rational,
    pub macro_f1: Rational,
    pub accuracy: Rational,
    pub total: u64,
}

fn ratio_or_zero(num: u64, den: u64) -> (Rational, bool) {
    if den == 0 {
        (Rational::zero(), true)
    } else {
        (Rational::new(num, den), false)
    }
}

/// Unweighted mean.
pub fn macro_average<T>(values: &[T]) -> T
where
    T: Clone + Zero + One + Add<Output = T> + Div<Output = T>,
{
    let (sum, n) = values
        .iter()
        .cloned()
        .fold((T::zero(), T::zero()), |(s, n), v| (s + v, n + T::one()));
    if n.is_zero() {
        T::zero()
    } else {
        sum / n
    }
}

/// One-vs-rest metrics per class. A zero denominator yields 0 and sets the
/// matching flag.
pub fn compute_metrics(matrix: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = matrix.total();
    if total == 0 {
        return Err(Error::Input("confusion matrix is empty".into()));
    }
    let rows = matrix.row_sums();
    let cols = matrix.col_sums();
    let classes: Vec<ClassMetrics> = (0..matrix.k())
        .map(|c| {
            let tp = matrix.get(c, c);
            let fp = cols[c] - tp;
            let fn_ = rows[c] - tp;
            let (precision, p_undef) = ratio_or_zero(tp, tp + fp);
            let (recall, r_undef) = ratio_or_zero(tp, tp + fn_);
            // 2PR / (P + R) reduces to 2TP / (2TP + FP + FN)
            let (f1, f_undef) = if p_undef || r_undef {
                (Rational::zero(), true)
            } else {
                ratio_or_zero(2 * tp, 2 * tp + fp + fn_)
            };
            ClassMetrics {
                name: matrix.class_names()[c].clone(),
                tp,
                fp,
                fn_,
                support: rows[c],
                precision,
                recall,
                f1,
                flags: MetricFlags {
                    precision_undefined: p_undef,
                    recall_undefined: r_undef,
                    f1_undefined: f_undef,
                },
            }
        })
        .collect();
    let pick = |f: fn(&ClassMetrics) -> Rational| -> Vec<Rational> { classes.iter().map(f).collect() };
    Ok(MetricsReport {
        macro_precision: macro_average(&pick(|c| c.precision)),
        macro_recall: macro_average(&pick(|c| c.recall)),
        macro_f1: macro_average(&pick(|c| c.f1)),
        accuracy: Rational::new(matrix.trace(), total),
        total,
        classes,
    })
}

impl MetricsReport {
    pub fn micro_precision(&self) -> Rational {
        let tp: u64 = self.classes.iter().map(|c| c.tp).sum();
        let fp: u64 = self.classes.iter().map(|c| c.fp).sum();
        Rational::new(tp, tp + fp)
    }

    pub fn micro_recall(&self) -> Rational {
        let tp: u64 = self.classes.iter().map(|c| c.tp).sum();
        let fn_: u64 = self.classes.iter().map(|c| c.fn_).sum();
        Rational::new(tp, tp + fn_)
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().expect("u64 ratio converts")
}

/// Rounds an exact rational to 2 decimals, half-up.
pub fn round2_exact(r: &Rational) -> u64 {
    let scaled = *r * Rational::from_integer(100);
    (scaled + Rational::new(1, 2)).floor().to_integer()
}

/// Rounds to 2 decimals, half-up, after snapping to 12 decimals so that
/// binary representation error (0.95 stored as 0.9499…) does not flip the
/// result. Returns hundredths.
pub fn round2(x: f64) -> i64 {
    let snapped = (x * 1e12).round() as i128;
    ((snapped + 5_000_000_000) as f64 / 1e10).floor() as i64
}

pub fn format_hundredths(h: i64) -> String {
    let sign = if h < 0 { "-" } else { "" };
    let h = h.abs();
    format!("{sign}{}.{:02}", h / 100, h % 100)
}

pub struct RenderedReport {
    pub table: String,
    pub csv: String,
}

/// Fixed-width 2-decimal table (class rows, then `Average`) and a
/// full-precision CSV `class,precision,recall,f1,support,flags` ending in a
/// `macro` row.
pub fn render_report(report: &MetricsReport, matrix: &ConfusionMatrix) -> RenderedReport {
    let fmt = |r: &Rational| format_hundredths(round2_exact(r) as i64);
    let mut table = String::new();
    writeln!(table, "{:<12}{:>10}{:>10}{:>10}{:>10}", "Class", "Precision", "Recall", "F1 Score", "Support").unwrap();
    for c in &report.classes {
        let mark = if c.flags == MetricFlags::default() { "" } else { " *" };
        writeln!(
            table,
            "{:<12}{:>10}{:>10}{:>10}{:>10}{mark}",
            c.name,
            fmt(&c.precision),
            fmt(&c.recall),
            fmt(&c.f1),
            c.support
        )
        .unwrap();
    }
    writeln!(
        table,
        "{:<12}{:>10}{:>10}{:>10}{:>10}",
        "Average",
        fmt(&report.macro_precision),
        fmt(&report.macro_recall),
        fmt(&report.macro_f1),
        report.total
    )
    .unwrap();
    writeln!(table, "Accuracy: {}", fmt(&report.accuracy)).unwrap();
    if report.classes.iter().any(|c| c.flags != MetricFlags::default()) {
        table.push_str("* undefined metric reported as 0\n");
    }
    table.push_str("\nConfusion matrix (rows actual, columns predicted):\n");
    table.push_str(&matrix.render());

    let mut csv = String::from("class,precision,recall,f1,support,flags\n");
    for c in &report.classes {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            c.name,
            to_f64(&c.precision),
            to_f64(&c.recall),
            to_f64(&c.f1),
            c.support,
            c.flags.render()
        )
        .unwrap();
    }
    writeln!(
        csv,
        "macro,{},{},{},{},",
        to_f64(&report.macro_precision),
        to_f64(&report.macro_recall),
        to_f64(&report.macro_f1),
        report.total
    )
    .unwrap();
    RenderedReport { table, csv }
}

/// Row of a parsed metrics CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    pub flags: String,
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines();
    if lines.next() != Some("class,precision,recall,f1,support,flags") {
        return Err(Error::Input("metrics CSV header missing".into()));
    }
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::Input(format!("malformed metrics row {line:?}"));
            if f.len() != 6 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok(MetricsRow {
                class: f[0].to_string(),
                precision: num(f[1])?,
                recall: num(f[2])?,
                f1: num(f[3])?,
                support: f[4].parse().map_err(|_| bad())?,
                flags: f[5].to_string(),
            })
        })
        .collect()
}
