//! Hand-written SVG: decision boundaries over a scatter of the data, and
//! F-score-per-interval line charts with confidence bands.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;

use crate::cli::experiment::AggregateRow;
use crate::error::{GameError, Result};
use crate::model::{sigmoid, ClassifierParams};

const GRID: usize = 200;
const SIZE: f64 = 600.0;
const MARGIN: f64 = 40.0;

/// What [`emit_boundary_plot`] drew.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPlot {
    /// Line segments of the a(x) = 0.5 level set.
    pub segments: usize,
    /// The model is constant, so there is no boundary to draw.
    pub flat: bool,
}

struct Frame {
    lo: [f64; 2],
    hi: [f64; 2],
}

impl Frame {
    fn around(points: &[(Vec<f64>, u8)]) -> Self {
        if points.is_empty() {
            return Frame {
                lo: [-3.0, -3.0],
                hi: [3.0, 3.0],
            };
        }
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for (x, _) in points {
            for j in 0..2 {
                lo[j] = lo[j].min(x[j]);
                hi[j] = hi[j].max(x[j]);
            }
        }
        for j in 0..2 {
            let pad = ((hi[j] - lo[j]) * 0.1).max(0.5);
            lo[j] -= pad;
            hi[j] += pad;
        }
        Frame { lo, hi }
    }

    fn to_px(&self, x: f64, y: f64) -> (f64, f64) {
        let span = SIZE - 2.0 * MARGIN;
        let px = MARGIN + (x - self.lo[0]) / (self.hi[0] - self.lo[0]) * span;
        let py = SIZE - MARGIN - (y - self.lo[1]) / (self.hi[1] - self.lo[1]) * span;
        (px, py)
    }

    fn grid_point(&self, i: usize, j: usize) -> (f64, f64) {
        let step = |d: usize, k: usize| self.lo[d] + (self.hi[d] - self.lo[d]) * k as f64 / (GRID - 1) as f64;
        (step(0, i), step(1, j))
    }
}

/// Level-set segments of `values - level` on a regular grid (marching squares).
fn march(values: &[f64], frame: &Frame, level: f64) -> Vec<[(f64, f64); 2]> {
    let v = |i: usize, j: usize| values[i * GRID + j] - level;
    let mut segs = Vec::new();
    for i in 0..GRID - 1 {
        for j in 0..GRID - 1 {
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let vals: Vec<f64> = corners.iter().map(|&(a, b)| v(a, b)).collect();
            let mut cross = Vec::with_capacity(4);
            for e in 0..4 {
                let (a, b) = (vals[e], vals[(e + 1) % 4]);
                if (a >= 0.0) != (b >= 0.0) {
                    let t = a / (a - b);
                    let p0 = frame.grid_point(corners[e].0, corners[e].1);
                    let p1 = frame.grid_point(corners[(e + 1) % 4].0, corners[(e + 1) % 4].1);
                    cross.push((p0.0 + t * (p1.0 - p0.0), p0.1 + t * (p1.1 - p0.1)));
                }
            }
            match cross.len() {
                2 => segs.push([cross[0], cross[1]]),
                4 => {
                    // saddle: decide the pairing by the cell-centre value
                    let centre: f64 = vals.iter().sum::<f64>() / 4.0;
                    if (centre >= 0.0) == (vals[0] >= 0.0) {
                        segs.push([cross[0], cross[3]]);
                        segs.push([cross[1], cross[2]]);
                    } else {
                        segs.push([cross[0], cross[1]]);
                        segs.push([cross[2], cross[3]]);
                    }
                }
                _ => {}
            }
        }
    }
    segs
}

fn svg_open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">
<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>
<text x="{}" y="24" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        SIZE / 2.0,
        xml_escape(title)
    );
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Scatter `dataset` (class 1 red, class 0 green) under the adversary's
/// a(x) = 0.5 boundary, traced on a 200 x 200 grid.
pub fn emit_boundary_plot(
    params: &ClassifierParams,
    dataset: &[(Vec<f64>, u8)],
    path: &Path,
) -> Result<BoundaryPlot> {
    if params.input_dim() != 2 {
        return Err(GameError::UnsupportedDimension(params.input_dim()));
    }
    if let Some((x, _)) = dataset.iter().find(|(x, _)| x.len() != 2) {
        return Err(GameError::UnsupportedDimension(x.len()));
    }
    let frame = Frame::around(dataset);
    let mut values = Vec::with_capacity(GRID * GRID);
    for i in 0..GRID {
        for j in 0..GRID {
            let (x, y) = frame.grid_point(i, j);
            values.push(sigmoid(params.logit(&[x, y])?));
        }
    }
    let flat = values.iter().all(|v| *v == values[0]);
    let segs = if flat {
        warn!("flat model: a(x) is constant at {}, no boundary drawn", values[0]);
        Vec::new()
    } else {
        march(&values, &frame, 0.5)
    };

    let mut out = String::new();
    svg_open(&mut out, "adversary decision boundary, a(x) = 0.5");
    for (x, c) in dataset {
        let (px, py) = frame.to_px(x[0], x[1]);
        let colour = if *c == 1 { "#d62728" } else { "#2ca02c" };
        let _ = writeln!(
            out,
            r#"<circle cx="{px:.2}" cy="{py:.2}" r="2.5" fill="{colour}" fill-opacity="0.6"/>"#
        );
    }
    if !segs.is_empty() {
        let mut d = String::new();
        for [a, b] in &segs {
            let (ax, ay) = frame.to_px(a.0, a.1);
            let (bx, by) = frame.to_px(b.0, b.1);
            let _ = write!(d, "M{ax:.2} {ay:.2}L{bx:.2} {by:.2}");
        }
        let _ = writeln!(out, r#"<path d="{d}" stroke="black" stroke-width="1.5" fill="none"/>"#);
    }
    out.push_str("</svg>\n");
    fs::write(path, out)?;
    Ok(BoundaryPlot {
        segments: segs.len(),
        flat,
    })
}

const PALETTE: [&str; 5] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"];

/// Mean F-score per interval, one line per challenger, shaded by the 95%
/// interval.
pub fn write_fscore_plot(rows: &[&AggregateRow], title: &str, path: &Path) -> Result<()> {
    let mut series: Vec<(String, Vec<&AggregateRow>)> = Vec::new();
    for r in rows {
        match series.iter_mut().find(|(name, _)| *name == r.challenger_mode) {
            Some((_, v)) => v.push(r),
            None => series.push((r.challenger_mode.clone(), vec![r])),
        }
    }
    let t_max = rows.iter().map(|r| r.interval).max().unwrap_or(1).max(2) as f64;
    let span = SIZE - 2.0 * MARGIN;
    let px = |t: f64| MARGIN + (t - 1.0) / (t_max - 1.0) * span;
    let py = |f: f64| SIZE - MARGIN - f.clamp(0.0, 1.0) * span;

    let mut out = String::new();
    svg_open(&mut out, title);
    let _ = writeln!(
        out,
        r#"<path d="M{m} {m}L{m} {b}L{r} {b}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        b = SIZE - MARGIN,
        r = SIZE - MARGIN
    );
    for tick in 0..=4 {
        let f = tick as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="end">{f:.2}</text>"#,
            MARGIN - 4.0,
            py(f) + 3.0
        );
    }
    for (s, (name, pts)) in series.iter().enumerate() {
        let colour = PALETTE[s % PALETTE.len()];
        let mut band = String::new();
        for (i, r) in pts.iter().enumerate() {
            let _ = write!(
                band,
                "{}{:.2} {:.2}",
                if i == 0 { "M" } else { "L" },
                px(r.interval as f64),
                py(r.mean_f_score + r.ci95_f_score)
            );
        }
        for r in pts.iter().rev() {
            let _ = write!(band, "L{:.2} {:.2}", px(r.interval as f64), py(r.mean_f_score - r.ci95_f_score));
        }
        let _ = writeln!(out, r#"<path d="{band}Z" fill="{colour}" fill-opacity="0.2" stroke="none"/>"#);
        let mut line = String::new();
        for (i, r) in pts.iter().enumerate() {
            let _ = write!(
                line,
                "{}{:.2} {:.2}",
                if i == 0 { "M" } else { "L" },
                px(r.interval as f64),
                py(r.mean_f_score)
            );
        }
        let _ = writeln!(out, r#"<path d="{line}" stroke="{colour}" stroke-width="2" fill="none"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" fill="{colour}">{}</text>"#,
            SIZE - MARGIN - 80.0,
            MARGIN + 16.0 * (s as f64 + 1.0),
            xml_escape(name)
        );
    }
    out.push_str("</svg>\n");
    fs::write(path, out)?;
    Ok(())
}
