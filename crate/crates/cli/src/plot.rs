//! Minimal static SVG charts.

use std::fmt::Write as _;

use glmb_core::{Label, Region};
use nalgebra::Vector2;

const W: f64 = 720.0;
const H: f64 = 420.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 40.0, 50.0); // left, right, top, bottom
const COLOURS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: &str, points: Vec<(f64, f64)>) -> Self {
        Series {
            name: name.to_string(),
            points,
        }
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    x_step: f64,
    y_step: f64,
}

/// Tick spacing of 1, 2 or 5 times a power of ten giving about five intervals.
fn nice_step(range: f64) -> f64 {
    let raw = range / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    mag * if f <= 1.0 {
        1.0
    } else if f <= 2.0 {
        2.0
    } else if f <= 5.0 {
        5.0
    } else {
        10.0
    }
}

fn nice_range(lo: f64, hi: f64) -> ((f64, f64), f64) {
    let (lo, hi) = padded(lo, hi);
    let step = nice_step(hi - lo);
    (((lo / step).floor() * step, (hi / step).ceil() * step), step)
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let (x, x_step) = nice_range(x.0, x.1);
        let (y, y_step) = nice_range(y.0, y.1);
        Frame { x, y, x_step, y_step }
    }

    fn ticks(range: (f64, f64), step: f64) -> Vec<f64> {
        let n = ((range.1 - range.0) / step).round() as usize;
        (0..=n).map(|i| range.0 + step * i as f64).collect()
    }

    fn px(&self, x: f64) -> f64 {
        let (l, r) = (MARGIN.0, W - MARGIN.1);
        l + (x - self.x.0) / (self.x.1 - self.x.0) * (r - l)
    }

    fn py(&self, y: f64) -> f64 {
        let (t, b) = (MARGIN.2, H - MARGIN.3);
        b - (y - self.y.0) / (self.y.1 - self.y.0) * (b - t)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn header(svg: &mut String, title: &str, frame: &Frame, xlabel: &str, ylabel: &str) {
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(svg, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title)).unwrap();
    let (l, r, t, b) = (MARGIN.0, W - MARGIN.1, MARGIN.2, H - MARGIN.3);
    writeln!(svg, r##"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="#444"/>"##, r - l, b - t).unwrap();
    for fx in Frame::ticks(frame.x, frame.x_step) {
        let x = frame.px(fx);
        writeln!(svg, r##"<line x1="{x:.1}" y1="{t}" x2="{x:.1}" y2="{b}" stroke="#ddd"/>"##).unwrap();
        writeln!(svg, r#"<text x="{x:.1}" y="{}" text-anchor="middle">{}</text>"#, b + 16.0, tick(fx, frame.x_step)).unwrap();
    }
    for fy in Frame::ticks(frame.y, frame.y_step) {
        let y = frame.py(fy);
        writeln!(svg, r##"<line x1="{l}" y1="{y:.1}" x2="{r}" y2="{y:.1}" stroke="#ddd"/>"##).unwrap();
        writeln!(svg, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, l - 6.0, y + 4.0, tick(fy, frame.y_step)).unwrap();
    }
    writeln!(
        svg,
        r#"<defs><clipPath id="plot"><rect x="{l}" y="{t}" width="{}" height="{}"/></clipPath></defs>"#,
        r - l,
        b - t
    )
    .unwrap();
    writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (l + r) / 2.0, H - 12.0, escape(xlabel)).unwrap();
    writeln!(
        svg,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        (t + b) / 2.0,
        escape(ylabel)
    )
    .unwrap();
}

fn tick(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    format!("{:.*}", decimals, if v.abs() < step * 1e-9 { 0.0 } else { v })
}

fn polyline(svg: &mut String, frame: &Frame, points: &[(f64, f64)], colour: &str, extra: &str) {
    let pts: Vec<String> = points
        .iter()
        .map(|&(x, y)| format!("{:.1},{:.1}", frame.px(x), frame.py(y)))
        .collect();
    writeln!(
        svg,
        r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.6" clip-path="url(#plot)"{extra}/>"#,
        pts.join(" ")
    )
    .unwrap();
}

fn legend(svg: &mut String, entries: &[(&str, &str)]) {
    for (i, (name, colour)) in entries.iter().enumerate() {
        let y = MARGIN.2 + 14.0 + 16.0 * i as f64;
        let x = W - MARGIN.1 - 150.0;
        writeln!(svg, r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{colour}" stroke-width="2"/>"#, x + 20.0).unwrap();
        writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, x + 26.0, y + 4.0, escape(name)).unwrap();
    }
}

/// Line chart of several series sharing both axes.
pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    let frame = Frame::new((x0, x1), (0.0, y1 * 1.05));
    let mut svg = String::new();
    header(&mut svg, title, &frame, xlabel, ylabel);
    let mut entries = Vec::new();
    for (i, s) in series.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        polyline(&mut svg, &frame, &s.points, colour, "");
        entries.push((s.name.as_str(), colour));
    }
    legend(&mut svg, &entries);
    svg.push_str("</svg>\n");
    svg
}

/// Truth tracks in grey and estimated tracks coloured by label.
pub fn track_chart(
    title: &str,
    truth: &[Vec<Vector2<f64>>],
    estimates: &[(Label, Vec<Vector2<f64>>)],
    region: Region,
) -> String {
    let frame = Frame::new((region.x_min, region.x_max), (region.y_min, region.y_max));
    let mut svg = String::new();
    header(&mut svg, title, &frame, "x (m)", "y (m)");
    let pts = |t: &[Vector2<f64>]| t.iter().map(|p| (p.x, p.y)).collect::<Vec<_>>();
    for t in truth {
        polyline(&mut svg, &frame, &pts(t), "#999", r#" stroke-dasharray="4 3""#);
    }
    for (i, (label, t)) in estimates.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        polyline(&mut svg, &frame, &pts(t), colour, "");
        if let Some(p) = t.first() {
            writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" fill="{colour}">{label}</text>"#,
                frame.px(p.x) + 4.0,
                frame.py(p.y) - 4.0
            )
            .unwrap();
        }
    }
    legend(&mut svg, &[("truth", "#999"), ("estimates", COLOURS[0])]);
    svg.push_str("</svg>\n");
    svg
}
