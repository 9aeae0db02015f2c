use crate::error::{Error, Result};
use crate::lanegeom::{Canvas, GtLane};
use crate::scalar::Scalar;

/// Default stroke width of the CULane protocol.
pub const DEFAULT_LANE_WIDTH: f64 = 30.0;

/// Pixels covered by a round-capped stroke of `width_px` along the lane's
/// valid points. A pixel is covered when its center lies strictly closer
/// than `width_px / 2` to the polyline. Returns sorted linear indices.
pub fn rasterize_lane<T: Scalar>(lane: &GtLane<T>, width_px: f64, canvas: Canvas) -> Result<Vec<u32>> {
    let pts: Vec<(f64, f64)> = lane
        .valid_points()
        .into_iter()
        .map(|(x, y)| (x.as_f64(), y.as_f64()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Metric(format!(
            "lane needs at least 2 valid points, has {}",
            pts.len()
        )));
    }
    if canvas.height == 0 || canvas.width == 0 {
        return Err(Error::Metric("empty canvas".into()));
    }
    let r = width_px / 2.0;
    let r2 = r * r;
    let mut mask = Vec::new();
    for seg in pts.windows(2) {
        let ((x0, y0), (x1, y1)) = (seg[0], seg[1]);
        let (dx, dy) = (x1 - x0, y1 - y0);
        let len2 = dx * dx + dy * dy;
        let clamp_px = |v: f64, hi: usize| v.floor().clamp(0.0, hi as f64 - 1.0) as usize;
        let (cx0, cx1) = (clamp_px(x0.min(x1) - r, canvas.width), clamp_px(x0.max(x1) + r, canvas.width));
        let (cy0, cy1) = (clamp_px(y0.min(y1) - r, canvas.height), clamp_px(y0.max(y1) + r, canvas.height));
        for py in cy0..=cy1 {
            let cy = py as f64 + 0.5;
            for px in cx0..=cx1 {
                let cx = px as f64 + 0.5;
                let t = if len2 > 0.0 {
                    (((cx - x0) * dx + (cy - y0) * dy) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let (ex, ey) = (x0 + t * dx - cx, y0 + t * dy - cy);
                if ex * ex + ey * ey < r2 {
                    mask.push((py * canvas.width + px) as u32);
                }
            }
        }
    }
    mask.sort_unstable();
    mask.dedup();
    Ok(mask)
}

/// IoU of two sorted pixel-index sets; 0 when both are empty.
pub fn mask_iou(a: &[u32], b: &[u32]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// IoU of two lanes drawn as `width_px`-wide strokes on `canvas`.
pub fn lane_mask_iou<T: Scalar>(a: &GtLane<T>, b: &GtLane<T>, width_px: f64, canvas: Canvas) -> Result<f64> {
    Ok(mask_iou(
        &rasterize_lane(a, width_px, canvas)?,
        &rasterize_lane(b, width_px, canvas)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vline(x: f64, h: f64) -> GtLane<f64> {
        GtLane::new(vec![(x, 0.0), (x, h)])
    }

    #[test]
    fn stroke_is_thirty_pixels_wide() {
        let canvas = Canvas::new(40, 200);
        let m = rasterize_lane(&vline(100.0, 40.0), 30.0, canvas).unwrap();
        assert_eq!(m.len(), 30 * 40);
        assert!(m.iter().all(|&i| (85..115).contains(&(i as usize % 200))));
    }

    #[test]
    fn identical_lanes() {
        let l = GtLane::new(vec![(10.0, 5.0), (60.0, 70.0), (80.0, 99.0)]);
        assert_eq!(lane_mask_iou(&l, &l, 30.0, Canvas::new(100, 100)).unwrap(), 1.0);
    }

    #[test]
    fn offset_vertical_lines() {
        let iou = lane_mask_iou(&vline(100.0, 80.0), &vline(115.0, 80.0), 30.0, Canvas::new(80, 300)).unwrap();
        assert!((iou - 15.0 / 45.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_lanes() {
        let iou = lane_mask_iou(&vline(20.0, 50.0), &vline(100.0, 50.0), 30.0, Canvas::new(50, 200)).unwrap();
        assert_eq!(iou, 0.0);
    }

    #[test]
    fn single_point_is_error() {
        let l = GtLane::new(vec![(10.0, 5.0), (-2.0, 7.0)]);
        assert!(matches!(rasterize_lane(&l, 30.0, Canvas::new(20, 20)), Err(Error::Metric(_))));
    }
}
