//! Confusion metrics, ROC construction, AUC and wall-clock timing.
//!
//! Fraud (label 1) is the positive class throughout. Scores passed to
//! [`roc_and_auc`] must be oriented so that higher means more fraud-like;
//! for SVDD that is the negated decision score, since the decision score is
//! positive inside the accepted region.

use std::path::Path;
use std::time::Instant;

use crate::error::{Error, Result};

/// Confusion counts with fraud as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        (self.tp + self.tn) as f64 / total as f64
    }
}

/// ROC curve as (false-positive rate, true-positive rate) points plus the
/// trapezoidal area under it.
#[derive(Clone, Debug, PartialEq)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Ordered record of named wall-clock phases.
#[derive(Clone, Debug, Default)]
pub struct TimingReport {
    entries: Vec<(String, f64)>,
}

impl TimingReport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Runs `work`, records its duration under `phase`, and returns the
    /// result together with the measured seconds.
    pub fn timed<T>(&mut self, phase: &str, work: impl FnOnce() -> T) -> (T, f64) {
        let start = Instant::now();
        let out = work();
        let secs = start.elapsed().as_secs_f64();
        self.entries.push((phase.to_string(), secs));
        (out, secs)
    }

    pub fn record(&mut self, phase: &str, seconds: f64) {
        self.entries.push((phase.to_string(), seconds));
    }

    pub fn get(&self, phase: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|(name, _)| name == phase)
            .map(|(_, s)| *s)
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }
}

/// Tallies predictions against truths. Both are 0/1 with 1 = fraud.
pub fn confusion(predictions: &[u8], truths: &[u8]) -> Result<ConfusionCounts> {
    if predictions.is_empty() {
        return Err(Error::NoDataRows);
    }
    if predictions.len() != truths.len() {
        return Err(Error::ArityMismatch {
            expected: truths.len(),
            got: predictions.len(),
        });
    }
    let mut c = ConfusionCounts::default();
    for (&p, &t) in predictions.iter().zip(truths) {
        match (p, t) {
            (1, 1) => c.tp += 1,
            (1, 0) => c.fp += 1,
            (0, 0) => c.tn += 1,
            (0, 1) => c.fn_ += 1,
            _ => return Err(Error::UnknownLabel(format!("({}, {})", p, t))),
        }
    }
    Ok(c)
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        return 0.0;
    }
    2.0 * precision * recall / (precision + recall)
}

/// Precision, recall and F-measure from confusion counts. Zero denominators
/// yield 0 with a logged warning rather than NaN.
pub fn precision_recall_f(c: &ConfusionCounts) -> (f64, f64, f64) {
    let precision = if c.tp + c.fp == 0 {
        log::warn!("no positive predictions; precision defined as 0");
        0.0
    } else {
        c.tp as f64 / (c.tp + c.fp) as f64
    };
    let recall = if c.tp + c.fn_ == 0 {
        log::warn!("no positive truths; recall defined as 0");
        0.0
    } else {
        c.tp as f64 / (c.tp + c.fn_) as f64
    };
    (precision, recall, f_measure(precision, recall))
}

/// Sweeps all distinct score thresholds from high to low, accumulating one
/// ROC step per group of tied scores, and integrates the area with the
/// trapezoidal rule. Grouping ties is equivalent to the ties-count-half
/// rank-statistic convention.
pub fn roc_and_auc(scores: &[f64], truths: &[u8]) -> Result<RocCurve> {
    if scores.is_empty() {
        return Err(Error::NoDataRows);
    }
    if scores.len() != truths.len() {
        return Err(Error::ArityMismatch {
            expected: truths.len(),
            got: scores.len(),
        });
    }
    let pos = truths.iter().filter(|&&t| t == 1).count();
    let neg = truths.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let mut points = Vec::with_capacity(scores.len() + 1);
    points.push((0.0, 0.0));
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut k = 0usize;
    while k < order.len() {
        let threshold = scores[order[k]];
        while k < order.len() && scores[order[k]] == threshold {
            if truths[order[k]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }

    let mut auc = 0.0;
    for w in points.windows(2) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        auc += (x1 - x0) * (y0 + y1) * 0.5;
    }
    Ok(RocCurve { points, auc })
}

/// Per-model evaluation bundle as written into report files.
#[derive(Clone, Debug)]
pub struct ModelMetrics {
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub auc: f64,
}

impl ModelMetrics {
    /// Builds metrics from fraud-oriented scores (higher = more fraud-like)
    /// and 0/1 truths; predictions are `score > 0`.
    pub fn from_scores(scores: &[f64], truths: &[u8]) -> Result<ModelMetrics> {
        let predictions: Vec<u8> = scores.iter().map(|&s| u8::from(s > 0.0)).collect();
        let counts = confusion(&predictions, truths)?;
        let (precision, recall, f) = precision_recall_f(&counts);
        let roc = roc_and_auc(scores, truths)?;
        Ok(ModelMetrics {
            counts,
            precision,
            recall,
            f_measure: f,
            auc: roc.auc,
        })
    }

    /// Machine-readable `key=value` lines.
    pub fn to_kv(&self) -> String {
        format!(
            "tp={}\nfp={}\ntn={}\nfn={}\naccuracy={}\nprecision={}\nrecall={}\nf_measure={}\nauc={}\n",
            self.counts.tp,
            self.counts.fp,
            self.counts.tn,
            self.counts.fn_,
            self.counts.accuracy(),
            self.precision,
            self.recall,
            self.f_measure,
            self.auc
        )
    }

    /// Human-readable aligned table.
    pub fn to_table(&self, name: &str) -> String {
        format!(
            "{}\n  tp {:>8}  fp {:>8}\n  fn {:>8}  tn {:>8}\n  precision {:.4}  recall {:.4}  f-measure {:.4}  auc {:.4}\n",
            name,
            self.counts.tp,
            self.counts.fp,
            self.counts.fn_,
            self.counts.tn,
            self.precision,
            self.recall,
            self.f_measure,
            self.auc
        )
    }
}

/// Writes a curve as two-column delimited text: `fpr,tpr` per line.
pub fn write_roc_text(curve: &RocCurve, path: &Path) -> Result<()> {
    use std::io::Write;
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "fpr,tpr")?;
    for (x, y) in &curve.points {
        writeln!(f, "{},{}", x, y)?;
    }
    Ok(())
}

/// Reads a curve written by [`write_roc_text`] (area recomputed).
pub fn read_roc_text(path: &Path) -> Result<RocCurve> {
    use std::io::BufRead;
    let f = std::fs::File::open(path)?;
    let mut points = Vec::new();
    for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, ',');
        let parse = |s: Option<&str>| -> Result<f64> {
            s.and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::MalformedRow {
                    row: i,
                    reason: format!("bad roc line '{}'", line),
                })
        };
        let x = parse(parts.next())?;
        let y = parse(parts.next())?;
        points.push((x, y));
    }
    let mut auc = 0.0;
    for w in points.windows(2) {
        auc += (w[1].0 - w[0].0) * (w[0].1 + w[1].1) * 0.5;
    }
    Ok(RocCurve { points, auc })
}

/// Writes a self-contained SVG plot of one or more ROC curves so comparison
/// charts can be regenerated without external tooling.
pub fn write_roc_svg(curves: &[(&str, &RocCurve)], path: &Path) -> Result<()> {
    use std::io::Write;
    const SIZE: f64 = 440.0;
    const MARGIN: f64 = 50.0;
    const PLOT: f64 = SIZE - 2.0 * MARGIN;
    let palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"];
    let px = |x: f64| MARGIN + x * PLOT;
    let py = |y: f64| SIZE - MARGIN - y * PLOT;

    let mut f = std::fs::File::create(path)?;
    writeln!(
        f,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{0}\" viewBox=\"0 0 {0} {0}\">",
        SIZE
    )?;
    writeln!(f, "<rect width=\"{0}\" height=\"{0}\" fill=\"white\"/>", SIZE)?;
    // axes and grid ticks
    for i in 0..=5 {
        let t = i as f64 / 5.0;
        writeln!(
            f,
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#ddd\"/>",
            px(t),
            py(0.0),
            px(t),
            py(1.0)
        )?;
        writeln!(
            f,
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#ddd\"/>",
            px(0.0),
            py(t),
            px(1.0),
            py(t)
        )?;
        writeln!(
            f,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">{:.1}</text>",
            px(t),
            SIZE - MARGIN + 16.0,
            t
        )?;
        writeln!(
            f,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">{:.1}</text>",
            MARGIN - 6.0,
            py(t) + 4.0,
            t
        )?;
    }
    writeln!(
        f,
        "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>",
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    )?;
    for (k, (label, curve)) in curves.iter().enumerate() {
        let color = palette[k % palette.len()];
        let pts: Vec<String> = curve
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        writeln!(
            f,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.6\"/>",
            pts.join(" "),
            color
        )?;
        writeln!(
            f,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" fill=\"{}\">{} (auc {:.4})</text>",
            px(0.35),
            py(0.06) - 16.0 * k as f64,
            color,
            label,
            curve.auc
        )?;
    }
    writeln!(
        f,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">false positive rate</text>",
        px(0.5),
        SIZE - 10.0
    )?;
    writeln!(
        f,
        "<text x=\"14\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.1})\">true positive rate</text>",
        py(0.5),
        py(0.5)
    )?;
    writeln!(f, "</svg>")?;
    Ok(())
}
