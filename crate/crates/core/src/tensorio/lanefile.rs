//! Text lane files in the CULane `.lines.txt` layout.
//!
//! One lane per line as whitespace-separated `x y` pairs, `x = -2` for
//! missing points. An optional first line `H W` gives the canvas size
//! (CULane's 590x1640 otherwise); `H W prior` marks a file of lane-prior
//! records, each prefixed by `score theta length start_x start_y` and
//! followed by one `x y` pair per native grid row.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lanegeom::{is_valid_x, native_rows, GtLane, LaneGeometry, LanePrior, INVALID_X};
use crate::scalar::Scalar;

pub const CULANE_HEIGHT: usize = 590;
pub const CULANE_WIDTH: usize = 1640;

#[derive(Debug, Clone, PartialEq)]
pub enum Lanes<T> {
    Gt(Vec<GtLane<T>>),
    Priors(Vec<LanePrior<T>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaneFile<T> {
    pub image_height: usize,
    pub image_width: usize,
    pub lanes: Lanes<T>,
}

impl<T: Scalar> LaneFile<T> {
    pub fn gt(image_height: usize, image_width: usize, lanes: Vec<GtLane<T>>) -> Self {
        Self {
            image_height,
            image_width,
            lanes: Lanes::Gt(lanes),
        }
    }

    pub fn priors(image_height: usize, image_width: usize, priors: Vec<LanePrior<T>>) -> Self {
        Self {
            image_height,
            image_width,
            lanes: Lanes::Priors(priors),
        }
    }

    pub fn len(&self) -> usize {
        match &self.lanes {
            Lanes::Gt(v) => v.len(),
            Lanes::Priors(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every lane as a polyline; priors are materialized on their native grid.
    pub fn polylines(&self) -> Vec<GtLane<T>> {
        match &self.lanes {
            Lanes::Gt(v) => v.clone(),
            Lanes::Priors(v) => v.iter().map(|p| p.to_gt(self.image_height)).collect(),
        }
    }

    pub fn as_priors(&self) -> Result<&[LanePrior<T>]> {
        match &self.lanes {
            Lanes::Priors(v) => Ok(v),
            Lanes::Gt(_) => Err(Error::Format("expected a lane-prior file".into())),
        }
    }

    fn in_canvas(&self, x: T, y: T) -> bool {
        let (w, h) = (T::from_usize_lossy(self.image_width), T::from_usize_lossy(self.image_height));
        x >= T::zero() && x <= w && y >= T::zero() && y <= h
    }

    fn normalize_point(&self, x: T, y: T) -> (T, T) {
        if self.in_canvas(x, y) {
            (x, y)
        } else {
            (T::lit(INVALID_X), y)
        }
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::LineParse {
        line,
        msg: msg.into(),
    }
}

fn parse_tokens<T: Scalar>(line_no: usize, tokens: &[&str]) -> Result<Vec<T>> {
    tokens
        .iter()
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(T::lit)
                .ok_or_else(|| parse_err(line_no, format!("invalid number {t:?}")))
        })
        .collect()
}

/// Parses lane-file text. Points outside the canvas (edges inclusive, since
/// CULane annotations touch the bottom row `y = H`) are normalized to the
/// missing-point marker.
pub fn parse_lanes<T: Scalar>(text: &str) -> Result<LaneFile<T>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split_whitespace().collect::<Vec<_>>()))
        .filter(|(_, toks)| !toks.is_empty())
        .peekable();

    let mut file = LaneFile::gt(CULANE_HEIGHT, CULANE_WIDTH, Vec::new());
    let mut prior_mode = false;
    if let Some((line_no, toks)) = lines.peek() {
        let is_header = match toks.as_slice() {
            [h, w] | [h, w, _] => h.parse::<usize>().is_ok() && w.parse::<usize>().is_ok(),
            _ => false,
        };
        if is_header {
            let line_no = *line_no;
            let h: usize = toks[0].parse().unwrap();
            let w: usize = toks[1].parse().unwrap();
            if h == 0 || w == 0 {
                return Err(parse_err(line_no, "canvas dimensions must be >= 1"));
            }
            if let Some(tag) = toks.get(2) {
                if *tag != "prior" {
                    return Err(parse_err(line_no, format!("unknown header tag {tag:?}")));
                }
                prior_mode = true;
            }
            file.image_height = h;
            file.image_width = w;
            lines.next();
        }
    }

    let mut gts = Vec::new();
    let mut priors = Vec::new();
    for (line_no, toks) in lines {
        let (prefix, coords) = if prior_mode {
            if toks.len() < 5 {
                return Err(parse_err(line_no, "prior record needs score theta length start_x start_y"));
            }
            let (p, c) = toks.split_at(5);
            (Some(parse_tokens::<T>(line_no, p)?), c)
        } else {
            (None, toks.as_slice())
        };
        if coords.len() % 2 != 0 {
            return Err(parse_err(
                line_no,
                format!("odd coordinate count {}", coords.len()),
            ));
        }
        let vals = parse_tokens::<T>(line_no, coords)?;
        let points: Vec<(T, T)> = vals
            .chunks_exact(2)
            .map(|c| file.normalize_point(c[0], c[1]))
            .collect();
        match prefix {
            None => {
                let lane = GtLane::new(points);
                if lane.valid_count() < 2 {
                    return Err(parse_err(line_no, "lane needs at least 2 valid points"));
                }
                gts.push(lane);
            }
            Some(p) => {
                let geometry = LaneGeometry {
                    start_x: p[3],
                    start_y: p[4],
                    theta: p[1],
                    length: p[2],
                };
                let xs = points.into_iter().map(|(x, _)| x).collect();
                let prior = LanePrior::new(geometry, xs, p[0])
                    .map_err(|e| parse_err(line_no, e.to_string()))?;
                priors.push(prior);
            }
        }
    }
    file.lanes = if prior_mode {
        Lanes::Priors(priors)
    } else {
        Lanes::Gt(gts)
    };
    Ok(file)
}

fn fmt_num<T: Scalar>(out: &mut String, v: T) {
    let v = v.as_f64();
    // avoid "-0.0000"
    let v = if v.abs() < 5e-5 { 0.0 } else { v };
    let _ = write!(out, "{v:.4}");
}

/// Renders a lane file with an explicit header line.
pub fn format_lanes<T: Scalar>(lf: &LaneFile<T>) -> String {
    let mut out = String::new();
    match &lf.lanes {
        Lanes::Gt(lanes) => {
            let _ = writeln!(out, "{} {}", lf.image_height, lf.image_width);
            for lane in lanes {
                let mut first = true;
                for &(x, y) in &lane.points {
                    if !first {
                        out.push(' ');
                    }
                    first = false;
                    fmt_num(&mut out, x);
                    out.push(' ');
                    fmt_num(&mut out, y);
                }
                out.push('\n');
            }
        }
        Lanes::Priors(priors) => {
            let _ = writeln!(out, "{} {} prior", lf.image_height, lf.image_width);
            for p in priors {
                let prefix = [p.score, p.theta, p.length, p.start_x, p.start_y];
                for (i, v) in prefix.into_iter().enumerate() {
                    if i > 0 {
                        out.push(' ');
                    }
                    fmt_num(&mut out, v);
                }
                let rows = native_rows::<T>(lf.image_height, p.n_points());
                for (&x, y) in p.xs.iter().zip(rows) {
                    out.push(' ');
                    fmt_num(&mut out, if is_valid_x(x) { x } else { T::lit(INVALID_X) });
                    out.push(' ');
                    fmt_num(&mut out, y);
                }
                out.push('\n');
            }
        }
    }
    out
}

pub fn read_lanes<T: Scalar>(path: impl AsRef<Path>) -> Result<LaneFile<T>> {
    let text = fs::read_to_string(path)?;
    parse_lanes(&text)
}

pub fn write_lanes<T: Scalar>(lf: &LaneFile<T>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_lanes(lf))?;
    Ok(())
}
