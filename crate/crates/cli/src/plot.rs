//! Phase-portrait SVG: two state components against each other, the unsafe
//! region `h(x) < 0` shaded, true-state paths solid and belief-mean paths
//! dashed.

use std::fmt::Write as _;

use nalgebra::DVector;
use riskcbf::model::{HalfSpaceSafeSet, SafeSet};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 540.0;
const MARGIN: f64 = 60.0;
const SHADE_COLS: usize = 300;
const SHADE_ROWS: usize = 225;
const PALETTE: [&str; 6] = ["#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"];

/// Points of one path, projected to the plotted components.
pub type Path2 = Vec<(f64, f64)>;

/// Trajectories of one controller.
pub struct Series {
    pub label: String,
    /// `(true path, belief path)` per run.
    pub runs: Vec<(Path2, Path2)>,
}

/// Where the plotted components sit in the full state, and which value
/// the remaining components take when shading the unsafe region.
pub struct Slice {
    pub dims: (usize, usize),
    pub base: DVector<f64>,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }
    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    let span = (hi - lo).max(1e-9 * (1.0 + lo.abs().max(hi.abs())));
    let pad = 0.08 * span + if hi > lo { 0.0 } else { 1.0 };
    (lo - pad, hi + pad)
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|k| k * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn polyline(svg: &mut String, frame: &Frame, pts: &[(f64, f64)], color: &str, dashed: bool, opacity: f64) {
    if pts.is_empty() {
        return;
    }
    let points: Vec<String> = pts.iter().map(|(x, y)| format!("{:.2},{:.2}", frame.px(*x), frame.py(*y))).collect();
    let dash = if dashed { r#" stroke-dasharray="5,3""# } else { "" };
    let _ = writeln!(
        svg,
        r#"<polyline fill="none" stroke="{color}" stroke-width="1.4" stroke-opacity="{opacity}"{dash} points="{}"/>"#,
        points.join(" ")
    );
}

/// Clips the plot frame to `h < 0`; exact for a half-space.
fn shade_halfspace(svg: &mut String, frame: &Frame, set: &HalfSpaceSafeSet, slice: &Slice) {
    let (i, j) = slice.dims;
    let q = set.q();
    let offset = set.r() + q.iter().enumerate().filter(|(k, _)| *k != i && *k != j).map(|(k, c)| c * slice.base[k]).sum::<f64>();
    let h = |(x, y): (f64, f64)| q[i] * x + q[j] * y + offset;
    let corners = [(frame.x0, frame.y0), (frame.x1, frame.y0), (frame.x1, frame.y1), (frame.x0, frame.y1)];
    let mut poly = Vec::new();
    for k in 0..4 {
        let (a, b) = (corners[k], corners[(k + 1) % 4]);
        let (ha, hb) = (h(a), h(b));
        if ha < 0.0 {
            poly.push(a);
        }
        if (ha < 0.0) != (hb < 0.0) {
            let t = ha / (ha - hb);
            poly.push((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
        }
    }
    if poly.len() >= 3 {
        let points: Vec<String> = poly.iter().map(|(x, y)| format!("{:.2},{:.2}", frame.px(*x), frame.py(*y))).collect();
        let _ = writeln!(svg, r#"<polygon points="{}"/>"#, points.join(" "));
    }
}

/// Shades grid cells whose centre has `h < 0`, one rectangle per
/// horizontal run.
fn shade_cells(svg: &mut String, frame: &Frame, set: &SafeSet, slice: &Slice) {
    let cw = (frame.x1 - frame.x0) / SHADE_COLS as f64;
    let ch = (frame.y1 - frame.y0) / SHADE_ROWS as f64;
    let mut state = slice.base.clone();
    for row in 0..SHADE_ROWS {
        let yc = frame.y0 + (row as f64 + 0.5) * ch;
        let mut start = None;
        for col in 0..=SHADE_COLS {
            let unsafe_cell = col < SHADE_COLS && {
                state[slice.dims.0] = frame.x0 + (col as f64 + 0.5) * cw;
                state[slice.dims.1] = yc;
                set.h_value(&state).is_ok_and(|h| h < 0.0)
            };
            match (unsafe_cell, start) {
                (true, None) => start = Some(col),
                (false, Some(s)) => {
                    let (left, right) = (frame.px(frame.x0 + s as f64 * cw), frame.px(frame.x0 + col as f64 * cw));
                    let (top, bottom) = (frame.py(yc + 0.5 * ch), frame.py(yc - 0.5 * ch));
                    let _ = writeln!(
                        svg,
                        r#"<rect x="{left:.2}" y="{top:.2}" width="{:.2}" height="{:.2}"/>"#,
                        right - left,
                        bottom - top
                    );
                    start = None;
                }
                _ => {}
            }
        }
    }
}

pub fn render(series: &[Series], set: &SafeSet, slice: &Slice) -> String {
    let all = series.iter().flat_map(|s| s.runs.iter()).flat_map(|(a, b)| a.iter().chain(b));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (-1.0, 1.0, -1.0, 1.0);
    }
    let (x0, x1) = padded(x0, x1);
    let (y0, y1) = padded(y0, y1);
    let frame = Frame { x0, x1, y0, y1 };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    let _ = writeln!(svg, r##"<g fill="#d62728" fill-opacity="0.25" shape-rendering="crispEdges">"##);
    match set {
        SafeSet::HalfSpace(hs) => shade_halfspace(&mut svg, &frame, hs, slice),
        SafeSet::Ellipsoid(_) => shade_cells(&mut svg, &frame, set, slice),
    }
    let _ = writeln!(svg, "</g>");

    // axes
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    for t in ticks(x0, x1) {
        let px = frame.px(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{px:.2}" y1="{b}" x2="{px:.2}" y2="{b2}" stroke="black"/><text x="{px:.2}" y="{ty}" text-anchor="middle">{t}</text>"#,
            b = HEIGHT - MARGIN,
            b2 = HEIGHT - MARGIN + 5.0,
            ty = HEIGHT - MARGIN + 18.0
        );
    }
    for t in ticks(y0, y1) {
        let py = frame.py(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{l}" y1="{py:.2}" x2="{MARGIN}" y2="{py:.2}" stroke="black"/><text x="{tx}" y="{py:.2}" text-anchor="end" dominant-baseline="middle">{t}</text>"#,
            l = MARGIN - 5.0,
            tx = MARGIN - 8.0
        );
    }
    let (i, j) = slice.dims;
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">x{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0,
        i + 1
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">x{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        j + 1
    );

    // trajectories; many runs are drawn translucent
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let opacity = if s.runs.len() > 1 { 0.35 } else { 1.0 };
        let _ = writeln!(svg, r#"<g data-controller="{}">"#, s.label);
        for (truth, belief) in &s.runs {
            polyline(&mut svg, &frame, truth, color, false, opacity);
            polyline(&mut svg, &frame, belief, color, true, opacity);
        }
        let _ = writeln!(svg, "</g>");
    }

    // legend: one colour per controller, line style for true vs belief
    let lx = WIDTH - MARGIN - 200.0;
    let rows = series.len() + 3;
    let _ = writeln!(
        svg,
        r##"<rect x="{}" y="{}" width="192" height="{}" fill="white" fill-opacity="0.85" stroke="#999"/>"##,
        lx - 8.0,
        MARGIN + 6.0,
        rows as f64 * 16.0 + 4.0
    );
    enum Swatch {
        Line(&'static str, &'static str, f64),
        Area,
    }
    let mut entries: Vec<(Swatch, &str)> = series
        .iter()
        .enumerate()
        .map(|(k, s)| (Swatch::Line(PALETTE[k % PALETTE.len()], "", 3.0), s.label.as_str()))
        .collect();
    entries.push((Swatch::Line("#444", "", 1.4), "true state"));
    entries.push((Swatch::Line("#444", r#" stroke-dasharray="5,3""#, 1.4), "belief mean"));
    entries.push((Swatch::Area, "unsafe: h(x) &lt; 0"));
    for (row, (swatch, text)) in entries.iter().enumerate() {
        let ly = MARGIN + 16.0 * (row + 1) as f64;
        let _ = match swatch {
            Swatch::Line(color, dash, width) => write!(
                svg,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="{width}"{dash}/>"#,
                lx + 24.0
            ),
            Swatch::Area => write!(svg, r##"<rect x="{lx}" y="{}" width="24" height="10" fill="#d62728" fill-opacity="0.25"/>"##, ly - 5.0),
        };
        let _ = writeln!(svg, r#"<text x="{}" y="{ly}" dominant-baseline="middle">{text}</text>"#, lx + 30.0);
    }
    svg.push_str("</svg>\n");
    svg
}
