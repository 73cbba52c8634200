//! Minimal self-contained SVG line and scatter plots.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<[f64; 2]>,
    pub dashed: bool,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<[f64; 2]>) -> Self {
        Self { label: label.into(), points, dashed: false }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit<'a>(points: impl Iterator<Item = &'a [f64; 2]>) -> Self {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in points.filter(|p| p[0].is_finite() && p[1].is_finite()) {
            x0 = x0.min(p[0]);
            x1 = x1.max(p[0]);
            y0 = y0.min(p[1]);
            y1 = y1.max(p[1]);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        let pad = |a: f64, b: f64| if b > a { 0.05 * (b - a) } else { 0.5 };
        let (px, py) = (pad(x0, x1), pad(y0, y1));
        Self { x0: x0 - px, x1: x1 + px, y0: y0 - py, y1: y1 + py }
    }

    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        let sx = MARGIN + (p[0] - self.x0) / (self.x1 - self.x0) * (W - 2.0 * MARGIN);
        let sy = H - MARGIN - (p[1] - self.y0) / (self.y1 - self.y0) * (H - 2.0 * MARGIN);
        (sx, sy)
    }
}

fn header(out: &mut String, title: &str, xlabel: &str, ylabel: &str, f: &Frame) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    let _ =
        writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(xlabel));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
    for k in 0..=4 {
        let fx = f.x0 + (f.x1 - f.x0) * k as f64 / 4.0;
        let fy = f.y0 + (f.y1 - f.y0) * k as f64 / 4.0;
        let (sx, _) = f.map([fx, f.y0]);
        let (_, sy) = f.map([f.x0, fy]);
        let _ =
            writeln!(out, r#"<text x="{sx:.1}" y="{}" text-anchor="middle">{}</text>"#, H - MARGIN + 16.0, tick(fx));
        let _ =
            writeln!(out, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, MARGIN - 6.0, sy + 4.0, tick(fy));
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line plot of one or more series.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let f = Frame::fit(series.iter().flat_map(|s| s.points.iter()));
    let mut out = String::new();
    header(&mut out, title, xlabel, ylabel, &f);
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p[0].is_finite() && p[1].is_finite())
            .map(|&p| {
                let (x, y) = f.map(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.6"{dash} points="{}"/>"#,
            pts.join(" ")
        );
        let ly = MARGIN + 16.0 + 16.0 * k as f64;
        let _ =
            writeln!(out, r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#, W - MARGIN - 150.0, escape(&s.label));
    }
    out.push_str("</svg>\n");
    out
}

/// Scatter plot of a point cloud.
pub fn scatter_plot(title: &str, xlabel: &str, ylabel: &str, points: &[[f64; 2]]) -> String {
    let f = Frame::fit(points.iter());
    let mut out = String::new();
    header(&mut out, title, xlabel, ylabel, &f);
    for &p in points.iter().filter(|p| p[0].is_finite() && p[1].is_finite()) {
        let (x, y) = f.map(p);
        let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="1.2" fill="{}" fill-opacity="0.5"/>"#, COLORS[0]);
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_formed_output() {
        let s = line_plot(
            "a < b",
            "t",
            "y",
            &[Series::new("one", vec![[0.0, 1.0], [1.0, 2.0]]), Series::new("ref", vec![[0.0, 1.0]]).dashed()],
        );
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("a &lt; b") && s.contains("stroke-dasharray"));
        let s = scatter_plot("cloud", "x", "z", &[[0.0, 0.0], [f64::NAN, 1.0], [2.0, 3.0]]);
        assert_eq!(s.matches("<circle").count(), 2);
    }
}
