//! Lane benchmark metrics: CULane-style F1 / mF1 and TuSimple accuracy.

mod culane;
mod raster;
mod tusimple;

pub use culane::{culane_counts, culane_f1, greedy_match, iou_matrix, mf1, mf1_thresholds};
pub use raster::{lane_mask_iou, mask_iou, rasterize_lane, DEFAULT_LANE_WIDTH};
pub use tusimple::{
    tusimple_counts, tusimple_metrics, TuSimpleCounts, TuSimpleScore, TUSIMPLE_MATCH_RATIO,
    TUSIMPLE_PIXEL_THRESH,
};

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::tensorio::read_lanes;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl EvalCounts {
    pub fn add(&mut self, o: &EvalCounts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall; 0 when both are 0.
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdScore {
    pub tau: f64,
    pub counts: EvalCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub thresholds: Vec<ThresholdScore>,
    pub mf1: Option<f64>,
    pub tusimple: Option<TuSimpleScore>,
}

impl EvalReport {
    pub fn from_counts(taus: &[f64], counts: &[EvalCounts], with_mf1: bool) -> Self {
        let thresholds: Vec<ThresholdScore> = taus
            .iter()
            .zip(counts)
            .map(|(&tau, c)| ThresholdScore {
                tau,
                counts: *c,
                precision: c.precision(),
                recall: c.recall(),
                f1: c.f1(),
            })
            .collect();
        let mf1 = (with_mf1 && !thresholds.is_empty())
            .then(|| thresholds.iter().map(|t| t.f1).sum::<f64>() / thresholds.len() as f64);
        Self {
            thresholds,
            mf1,
            tusimple: None,
        }
    }

    pub fn from_tusimple(score: TuSimpleScore) -> Self {
        Self {
            thresholds: Vec::new(),
            mf1: None,
            tusimple: Some(score),
        }
    }

    /// Score at `tau`, matched to 1e-9.
    pub fn at(&self, tau: f64) -> Option<&ThresholdScore> {
        self.thresholds.iter().find(|t| (t.tau - tau).abs() < 1e-9)
    }

    /// Aligned human-readable table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        if !self.thresholds.is_empty() {
            let _ = writeln!(
                out,
                "{:>6} {:>6} {:>6} {:>6} {:>9} {:>9} {:>9}",
                "tau", "tp", "fp", "fn", "precision", "recall", "f1"
            );
            for t in &self.thresholds {
                let _ = writeln!(
                    out,
                    "{:>6.2} {:>6} {:>6} {:>6} {:>9.4} {:>9.4} {:>9.4}",
                    t.tau, t.counts.tp, t.counts.fp, t.counts.fn_, t.precision, t.recall, t.f1
                );
            }
        }
        if let Some(m) = self.mf1 {
            let _ = writeln!(out, "{:>6} {:>52.4}", "mF1", m);
        }
        if let Some(s) = &self.tusimple {
            let _ = writeln!(out, "{:>8} {:>8} {:>8}", "Acc", "FP", "FN");
            let _ = writeln!(out, "{:>8.4} {:>8.4} {:>8.4}", s.accuracy, s.fp_rate, s.fn_rate);
        }
        out
    }

    /// Machine-readable `key=value` lines.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        for t in &self.thresholds {
            let k = (t.tau * 100.0).round() as u32;
            let _ = writeln!(out, "tp@{k}={}", t.counts.tp);
            let _ = writeln!(out, "fp@{k}={}", t.counts.fp);
            let _ = writeln!(out, "fn@{k}={}", t.counts.fn_);
            let _ = writeln!(out, "precision@{k}={:.6}", t.precision);
            let _ = writeln!(out, "recall@{k}={:.6}", t.recall);
            let _ = writeln!(out, "f1@{k}={:.6}", t.f1);
        }
        if let Some(m) = self.mf1 {
            let _ = writeln!(out, "mf1={m:.6}");
        }
        if let Some(s) = &self.tusimple {
            let _ = writeln!(out, "accuracy={:.6}", s.accuracy);
            let _ = writeln!(out, "fp_rate={:.6}", s.fp_rate);
            let _ = writeln!(out, "fn_rate={:.6}", s.fn_rate);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Culane,
    Tusimple,
}

/// Files under `dir`, as sorted paths relative to it.
fn list_files(dir: &Path) -> Result<Vec<PathBuf>> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                out.push(path.strip_prefix(root).expect("walk stays under root").to_path_buf());
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out)?;
    out.sort();
    Ok(out)
}

/// Evaluates prediction files against annotation files matched by relative
/// path. A missing prediction file counts as an image with no predictions.
/// Either argument may also be a single file. Per-image work runs on
/// `threads` workers; totals are summed in file order.
pub fn evaluate_paths(
    preds: &Path,
    gts: &Path,
    mode: EvalMode,
    taus: &[f64],
    width_px: f64,
    threads: usize,
) -> Result<EvalReport> {
    let pairs: Vec<(Option<PathBuf>, PathBuf)> = if gts.is_file() {
        vec![(Some(preds.to_path_buf()), gts.to_path_buf())]
    } else {
        list_files(gts)?
            .into_iter()
            .map(|rel| {
                let p = preds.join(&rel);
                (p.is_file().then_some(p), gts.join(rel))
            })
            .collect()
    };

    enum PerImage {
        Culane(Vec<EvalCounts>),
        Tusimple(TuSimpleCounts),
    }
    let eval_one = |(pred, gt): &(Option<PathBuf>, PathBuf)| -> Result<PerImage> {
        let gt = read_lanes::<f64>(gt)?;
        let pred = match pred {
            Some(p) => read_lanes::<f64>(p)?,
            None => crate::tensorio::LaneFile::gt(gt.image_height, gt.image_width, Vec::new()),
        };
        Ok(match mode {
            EvalMode::Culane => PerImage::Culane(culane_counts(&pred, &gt, taus, width_px)?),
            EvalMode::Tusimple => PerImage::Tusimple(tusimple_counts(&pred, &gt)?),
        })
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<PerImage>> = pool.install(|| {
        use rayon::prelude::*;
        pairs.par_iter().map(eval_one).collect()
    });

    match mode {
        EvalMode::Culane => {
            let mut total = vec![EvalCounts::default(); taus.len()];
            for r in results {
                if let PerImage::Culane(c) = r? {
                    total.iter_mut().zip(&c).for_each(|(t, c)| t.add(c));
                }
            }
            Ok(EvalReport::from_counts(taus, &total, taus.len() > 1))
        }
        EvalMode::Tusimple => {
            let mut total = TuSimpleCounts::default();
            for r in results {
                if let PerImage::Tusimple(c) = r? {
                    total.add(&c);
                }
            }
            Ok(EvalReport::from_tusimple(total.score()))
        }
    }
}
