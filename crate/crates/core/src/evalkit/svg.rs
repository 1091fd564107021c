//! Deterministic SVG scatter and heat-map output for 2D data.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

const SIZE: f64 = 480.0;
const PAD: f64 = 20.0;

struct Frame {
    lo: [f64; 2],
    span: [f64; 2],
}

impl Frame {
    fn fit<'a>(points: impl Iterator<Item = &'a [f64; 2]>) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in points {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        if !lo[0].is_finite() {
            return Self {
                lo: [0.0; 2],
                span: [1.0; 2],
            };
        }
        let span = [0, 1].map(|d| (hi[d] - lo[d]).max(1e-9));
        Self { lo, span }
    }

    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        let inner = SIZE - 2.0 * PAD;
        (
            PAD + (p[0] - self.lo[0]) / self.span[0] * inner,
            SIZE - PAD - (p[1] - self.lo[1]) / self.span[1] * inner,
        )
    }
}

fn header(out: &mut String) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#);
}

fn check_2d(rows: &[Vec<f64>]) -> Result<Vec<[f64; 2]>> {
    rows.iter()
        .map(|r| match r.as_slice() {
            &[a, b] => Ok([a, b]),
            _ => Err(Error::Invalid(format!("plot needs 2D points, got {} columns", r.len()))),
        })
        .collect()
}

/// Training points colored by label, recourse sources in dark red, and an
/// edge from each source to its recourse output.
pub fn scatter_svg(points: &[Vec<f64>], labels: &[u8], edges: &[(Vec<f64>, Vec<f64>)]) -> Result<String> {
    let pts = check_2d(points)?;
    let src = check_2d(&edges.iter().map(|e| e.0.clone()).collect::<Vec<_>>())?;
    let dst = check_2d(&edges.iter().map(|e| e.1.clone()).collect::<Vec<_>>())?;
    if labels.len() != pts.len() {
        return Err(Error::shape(
            "scatter",
            format!("{} labels for {} points", labels.len(), pts.len()),
        ));
    }
    let frame = Frame::fit(pts.iter().chain(&src).chain(&dst));
    let mut out = String::new();
    header(&mut out);
    for (p, &l) in pts.iter().zip(labels) {
        let (x, y) = frame.map(*p);
        let fill = if l == 1 { "#9ecae1" } else { "#fcbba1" };
        let _ = writeln!(out, r#"<circle cx="{x:.3}" cy="{y:.3}" r="2.5" fill="{fill}"/>"#);
    }
    for (s, d) in src.iter().zip(&dst) {
        let (x1, y1) = frame.map(*s);
        let (x2, y2) = frame.map(*d);
        let _ = writeln!(
            out,
            r##"<line x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}" stroke="#444" stroke-width="1"/>"##
        );
        let _ = writeln!(out, r##"<circle cx="{x1:.3}" cy="{y1:.3}" r="3" fill="#a50f15"/>"##);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Heat map of `field[i][j]` on `xs[i] × ys[j]`, with `marker` circled.
pub fn heatmap_svg(xs: &[f64], ys: &[f64], field: &[Vec<f64>], marker: [f64; 2]) -> Result<String> {
    if xs.len() < 2 || ys.len() < 2 || field.len() != xs.len() || field.iter().any(|c| c.len() != ys.len()) {
        return Err(Error::shape(
            "heatmap",
            "field does not match the grid axes".to_string(),
        ));
    }
    let lo = field.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let hi = field.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-12);
    let corners = [[xs[0], ys[0]], [xs[xs.len() - 1], ys[ys.len() - 1]]];
    let frame = Frame::fit(corners.iter());
    let (cw, ch) = (
        (SIZE - 2.0 * PAD) / (xs.len() - 1) as f64,
        (SIZE - 2.0 * PAD) / (ys.len() - 1) as f64,
    );
    let mut out = String::new();
    header(&mut out);
    for (i, col) in field.iter().enumerate() {
        for (j, v) in col.iter().enumerate() {
            let t = (v - lo) / span;
            let (x, y) = frame.map([xs[i], ys[j]]);
            let shade = (255.0 * (1.0 - t)).round() as u8;
            let _ = writeln!(
                out,
                r#"<rect x="{:.3}" y="{:.3}" width="{cw:.3}" height="{ch:.3}" fill="rgb(255,{shade},{shade})"/>"#,
                x - cw / 2.0,
                y - ch / 2.0
            );
        }
    }
    let (mx, my) = frame.map(marker);
    let _ = writeln!(
        out,
        r#"<circle cx="{mx:.3}" cy="{my:.3}" r="5" fill="none" stroke="black" stroke-width="2"/>"#
    );
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn write_svg(path: &Path, svg: &str) -> Result<()> {
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
