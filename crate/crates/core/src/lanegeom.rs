//! Lane representations and row sampling.
//!
//! A [`LanePrior`] carries `N` x-coordinates on its native row grid
//! `y_j = (H - 1) * j / (N - 1)`, top (far field) to bottom. Rows for
//! feature pooling come from [`uniform_rows`] or the logarithmically warped
//! [`attention_rows`], which packs more rows near the top of the image
//! where lanes converge.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default number of x-coordinates per prior.
pub const DEFAULT_PRIOR_POINTS: usize = 72;
/// Default number of pooled sample rows.
pub const DEFAULT_SAMPLE_ROWS: usize = 36;
/// Missing-point marker used in lane files.
pub const INVALID_X: f64 = -2.0;

#[inline]
pub(crate) fn is_valid_x<T: Scalar>(x: T) -> bool {
    x.is_finite() && x >= T::zero()
}

/// Start point, direction and vertical extent of a lane.
///
/// `theta` is measured from the image x-axis with y pointing up, so a
/// vertical lane has `theta = pi / 2`. `length` is the vertical extent in
/// pixels from the start (bottom-most) point upward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneGeometry<T> {
    pub start_x: T,
    pub start_y: T,
    pub theta: T,
    pub length: T,
}

/// Ground-truth lane as an ordered polyline. Points with `x < 0` are missing.
#[derive(Debug, Clone, PartialEq)]
pub struct GtLane<T> {
    pub points: Vec<(T, T)>,
}

impl<T: Scalar> GtLane<T> {
    pub fn new(points: Vec<(T, T)>) -> Self {
        Self { points }
    }

    /// Valid points sorted by ascending y; duplicate rows keep the first.
    pub fn valid_points(&self) -> Vec<(T, T)> {
        let mut pts: Vec<(T, T)> = self
            .points
            .iter()
            .copied()
            .filter(|&(x, y)| is_valid_x(x) && y.is_finite())
            .collect();
        pts.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        pts.dedup_by(|b, a| a.1 == b.1);
        pts
    }

    pub fn valid_count(&self) -> usize {
        self.valid_points().len()
    }

    /// Linear interpolation of x at row `y`; `None` outside the lane's rows.
    pub fn x_at(&self, y: T) -> Option<T> {
        interpolate_sorted(&self.valid_points(), y)
    }

    /// Samples the lane on `rows`.
    pub fn sample(&self, rows: &[T]) -> Vec<Option<T>> {
        let pts = self.valid_points();
        rows.iter().map(|&y| interpolate_sorted(&pts, y)).collect()
    }

    /// Geometry from the bottom-most and top-most valid points.
    pub fn geometry(&self) -> Option<LaneGeometry<T>> {
        let pts = self.valid_points();
        let (&(top_x, top_y), &(bot_x, bot_y)) = (pts.first()?, pts.last()?);
        Some(LaneGeometry {
            start_x: bot_x,
            start_y: bot_y,
            theta: (bot_y - top_y).atan2(top_x - bot_x),
            length: bot_y - top_y,
        })
    }
}

fn interpolate_sorted<T: Scalar>(pts: &[(T, T)], y: T) -> Option<T> {
    if pts.is_empty() || y < pts[0].1 || y > pts[pts.len() - 1].1 {
        return None;
    }
    let idx = pts.partition_point(|p| p.1 < y);
    let (x1, y1) = pts[idx];
    if y1 == y {
        return Some(x1);
    }
    let (x0, y0) = pts[idx - 1];
    let t = (y - y0) / (y1 - y0);
    Some(x0 + (x1 - x0) * t)
}

/// Parametric lane hypothesis with per-row x-coordinates and a confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct LanePrior<T> {
    pub start_x: T,
    pub start_y: T,
    pub theta: T,
    pub length: T,
    /// x on the native grid; negative entries are invalid rows.
    pub xs: Vec<T>,
    pub score: T,
}

impl<T: Scalar> LanePrior<T> {
    pub fn new(geometry: LaneGeometry<T>, xs: Vec<T>, score: T) -> Result<Self> {
        let p = Self {
            start_x: geometry.start_x,
            start_y: geometry.start_y,
            theta: geometry.theta,
            length: geometry.length,
            xs,
            score,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.score >= T::zero() && self.score <= T::one()) {
            return Err(Error::Validation(format!("prior score {} outside [0,1]", self.score)));
        }
        if !(self.length >= T::zero()) {
            return Err(Error::Validation(format!("negative prior length {}", self.length)));
        }
        if self.xs.len() < 2 {
            return Err(Error::Validation("prior needs at least 2 grid points".into()));
        }
        Ok(())
    }

    /// Rasterizes a polyline onto an `n`-row native grid.
    pub fn from_polyline(gt: &GtLane<T>, image_height: usize, n: usize, score: T) -> Result<Self> {
        let geometry = gt
            .geometry()
            .ok_or_else(|| Error::Validation("lane has no valid points".into()))?;
        let xs = gt
            .sample(&native_rows::<T>(image_height, n))
            .into_iter()
            .map(|x| x.unwrap_or(T::lit(INVALID_X)))
            .collect();
        Self::new(geometry, xs, score)
    }

    pub fn geometry(&self) -> LaneGeometry<T> {
        LaneGeometry {
            start_x: self.start_x,
            start_y: self.start_y,
            theta: self.theta,
            length: self.length,
        }
    }

    #[inline]
    pub fn n_points(&self) -> usize {
        self.xs.len()
    }

    /// Native-grid x values with invalid rows as `None`.
    pub fn grid_xs(&self) -> Vec<Option<T>> {
        self.xs.iter().map(|&x| is_valid_x(x).then_some(x)).collect()
    }

    /// Valid native-grid points as a polyline.
    pub fn to_gt(&self, image_height: usize) -> GtLane<T> {
        let rows = native_rows::<T>(image_height, self.n_points());
        GtLane::new(
            self.xs
                .iter()
                .zip(rows)
                .filter(|(x, _)| is_valid_x(**x))
                .map(|(&x, y)| (x, y))
                .collect(),
        )
    }

    fn covers_row(&self, y: T) -> bool {
        y <= self.start_y && y >= self.start_y - self.length
    }
}

/// Native prior rows `(H - 1) * j / (n - 1)` for `j = 0..n`.
pub fn native_rows<T: Scalar>(image_height: usize, n: usize) -> Vec<T> {
    let span = T::from_usize_lossy(image_height.saturating_sub(1));
    let denom = T::from_usize_lossy(n.max(2) - 1);
    (0..n).map(|j| span * T::from_usize_lossy(j) / denom).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    Uniform,
    Attention,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleConfig {
    pub n_sample: usize,
    pub image_height: u32,
    /// Base of the logarithmic warp; must exceed 1.
    pub beta: f64,
    pub mode: SampleMode,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            n_sample: DEFAULT_SAMPLE_ROWS,
            image_height: 320,
            beta: 10.0,
            mode: SampleMode::Attention,
        }
    }
}

impl SampleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sample < 2 {
            return Err(Error::Config(format!("n_sample must be >= 2, got {}", self.n_sample)));
        }
        if !(self.beta > 1.0) || !self.beta.is_finite() {
            return Err(Error::Config(format!("beta must be > 1, got {}", self.beta)));
        }
        Ok(())
    }
}

/// `a_i = i / (n - 1)`, `i = 0..n`.
pub fn arithmetic_sequence<T: Scalar>(cfg: &SampleConfig) -> Vec<T> {
    let last = cfg.n_sample.saturating_sub(1).max(1);
    let denom = T::from_usize_lossy(last);
    (0..cfg.n_sample)
        .map(|i| {
            if i == last {
                T::one()
            } else {
                T::from_usize_lossy(i) / denom
            }
        })
        .collect()
}

/// Concave warp `ln(1 + (beta - 1) a) / ln(beta)`; exact at both endpoints.
pub fn log_warp(a: f64, beta: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    if a >= 1.0 {
        return 1.0;
    }
    let b = beta - 1.0;
    (b * a).ln_1p() / b.ln_1p()
}

#[inline]
fn round_row(v: f64) -> u32 {
    (v + 0.5).floor() as u32
}

/// Attention rows: `round(H * warp(a_i))`, sorted and deduplicated.
pub fn attention_rows(cfg: &SampleConfig) -> Vec<u32> {
    let h = cfg.image_height as f64;
    let mut rows: Vec<u32> = arithmetic_sequence::<f64>(cfg)
        .into_iter()
        .map(|a| round_row(h * log_warp(a, cfg.beta)))
        .collect();
    rows.sort_unstable();
    rows.dedup();
    rows
}

/// Evenly spaced rows `round(H * a_i)`.
pub fn uniform_rows(cfg: &SampleConfig) -> Vec<u32> {
    let h = cfg.image_height as f64;
    let mut rows: Vec<u32> = arithmetic_sequence::<f64>(cfg)
        .into_iter()
        .map(|a| round_row(h * a))
        .collect();
    rows.dedup();
    rows
}

/// Rows for the configured mode.
pub fn sample_rows(cfg: &SampleConfig) -> Vec<u32> {
    match cfg.mode {
        SampleMode::Uniform => uniform_rows(cfg),
        SampleMode::Attention => attention_rows(cfg),
    }
}

/// Canvas size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Canvas {
    pub height: usize,
    pub width: usize,
}

impl Canvas {
    pub fn new(height: usize, width: usize) -> Self {
        Self { height, width }
    }

    pub fn diagonal(&self) -> f64 {
        (self.height as f64).hypot(self.width as f64)
    }
}

/// x of a prior at each requested row, by linear interpolation of its native
/// grid. Rows outside the prior's extent or touching an invalid grid entry
/// are `None`; rows on the native grid are exact.
pub fn sample_prior<T: Scalar>(p: &LanePrior<T>, rows: &[T], image_height: usize) -> Vec<Option<T>> {
    let n = p.n_points();
    let grid = native_rows::<T>(image_height, n);
    rows.iter()
        .map(|&y| {
            if !p.covers_row(y) || y < grid[0] || y > grid[n - 1] {
                return None;
            }
            let j = grid.partition_point(|&g| g < y);
            if grid[j] == y {
                return is_valid_x(p.xs[j]).then_some(p.xs[j]);
            }
            let (x0, x1) = (p.xs[j - 1], p.xs[j]);
            (is_valid_x(x0) && is_valid_x(x1)).then(|| {
                let t = (y - grid[j - 1]) / (grid[j] - grid[j - 1]);
                x0 + (x1 - x0) * t
            })
        })
        .collect()
}

/// Materializes a prior on integer rows; invalid rows are skipped.
pub fn prior_to_points<T: Scalar>(p: &LanePrior<T>, rows: &[u32], image_height: usize) -> Vec<(T, T)> {
    let ys: Vec<T> = rows.iter().map(|&r| T::lit(r as f64)).collect();
    sample_prior(p, &ys, image_height)
        .into_iter()
        .zip(ys)
        .filter_map(|(x, y)| x.map(|x| (x, y)))
        .collect()
}
