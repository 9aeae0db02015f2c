use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::lanegeom::{Canvas, GtLane};
use crate::scalar::Scalar;
use crate::tensorio::LaneFile;

use super::raster::{mask_iou, rasterize_lane};
use super::{EvalCounts, EvalReport};

/// IoU thresholds averaged by mF1: 0.50, 0.55, ..., 0.95.
pub fn mf1_thresholds() -> Vec<f64> {
    (0..10).map(|k| (50 + 5 * k) as f64 / 100.0).collect()
}

/// Pairwise mask IoU, row-major by prediction.
pub fn iou_matrix<T: Scalar>(
    preds: &[GtLane<T>],
    gts: &[GtLane<T>],
    width_px: f64,
    canvas: Canvas,
) -> Result<Vec<f64>> {
    let pm = preds
        .iter()
        .map(|l| rasterize_lane(l, width_px, canvas))
        .collect::<Result<Vec<_>>>()?;
    let gm = gts
        .iter()
        .map(|l| rasterize_lane(l, width_px, canvas))
        .collect::<Result<Vec<_>>>()?;
    Ok(pm
        .iter()
        .flat_map(|p| gm.iter().map(move |g| mask_iou(p, g)))
        .collect())
}

/// Greedy one-to-one matching by descending IoU (ties: lower prediction,
/// then lower lane index); a pair matches only if its IoU exceeds `tau`.
pub fn greedy_match(iou: &[f64], n_pred: usize, n_gt: usize, tau: f64) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(f64, usize, usize)> = (0..n_pred)
        .flat_map(|p| (0..n_gt).map(move |g| (iou[p * n_gt + g], p, g)))
        .filter(|&(v, _, _)| v > tau)
        .collect();
    pairs.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let (mut used_p, mut used_g) = (vec![false; n_pred], vec![false; n_gt]);
    let mut out = Vec::new();
    for (_, p, g) in pairs {
        if !used_p[p] && !used_g[g] {
            used_p[p] = true;
            used_g[g] = true;
            out.push((p, g));
        }
    }
    out
}

fn counts_from_matches(n_pred: usize, n_gt: usize, tp: usize) -> EvalCounts {
    EvalCounts {
        tp,
        fp: n_pred - tp,
        fn_: n_gt - tp,
    }
}

fn canvas_of<T: Scalar>(preds: &LaneFile<T>, gts: &LaneFile<T>) -> Result<Canvas> {
    if preds.image_height != gts.image_height || preds.image_width != gts.image_width {
        return Err(Error::Metric(format!(
            "canvas mismatch: {}x{} vs {}x{}",
            preds.image_height, preds.image_width, gts.image_height, gts.image_width
        )));
    }
    Ok(Canvas::new(gts.image_height, gts.image_width))
}

/// Counts at each threshold in `taus` for one image.
pub fn culane_counts<T: Scalar>(
    preds: &LaneFile<T>,
    gts: &LaneFile<T>,
    taus: &[f64],
    width_px: f64,
) -> Result<Vec<EvalCounts>> {
    let canvas = canvas_of(preds, gts)?;
    let (pl, gl) = (preds.polylines(), gts.polylines());
    let iou = iou_matrix(&pl, &gl, width_px, canvas)?;
    Ok(taus
        .iter()
        .map(|&t| counts_from_matches(pl.len(), gl.len(), greedy_match(&iou, pl.len(), gl.len(), t).len()))
        .collect())
}

/// Precision, recall and F1 at a single IoU threshold.
pub fn culane_f1<T: Scalar>(preds: &LaneFile<T>, gts: &LaneFile<T>, tau: f64, width_px: f64) -> Result<EvalReport> {
    let counts = culane_counts(preds, gts, &[tau], width_px)?;
    Ok(EvalReport::from_counts(&[tau], &counts, false))
}

/// F1 at each mF1 threshold and their mean.
pub fn mf1<T: Scalar>(preds: &LaneFile<T>, gts: &LaneFile<T>, width_px: f64) -> Result<EvalReport> {
    let taus = mf1_thresholds();
    let counts = culane_counts(preds, gts, &taus, width_px)?;
    Ok(EvalReport::from_counts(&taus, &counts, true))
}
