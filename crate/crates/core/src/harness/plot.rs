//! Minimal SVG line charts: one polyline per series with ±std error bars,
//! an optional ground-truth polyline, and labelled axis ticks.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub x: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<SeriesPoint>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub truth: Option<Vec<(f64, f64)>>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Roughly five round tick values covering `[lo, hi]`.
pub fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) || !span.is_finite() {
        return vec![lo];
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let s = format!("{:.3}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_owned()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl LineChart {
    fn bounds(&self) -> Option<(f64, f64, f64, f64)> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for s in &self.series {
            for p in &s.points {
                xs.push(p.x);
                ys.push(p.mean - p.std);
                ys.push(p.mean + p.std);
            }
        }
        for &(x, y) in self.truth.iter().flatten() {
            xs.push(x);
            ys.push(y);
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) || xs.is_empty() {
            return None;
        }
        let fold = |v: &[f64]| v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let (mut x0, mut x1) = fold(&xs);
        let (mut y0, mut y1) = fold(&ys);
        if x1 - x0 < 1e-12 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        let pad = ((y1 - y0) * 0.08).max(0.01);
        y0 -= pad;
        y1 += pad;
        Some((x0, x1, y0, y1))
    }

    pub fn to_svg(&self) -> Result<String> {
        let (x0, x1, y0, y1) = self
            .bounds()
            .ok_or_else(|| Error::InvalidParameter("chart has no finite points".into()))?;
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

        let mut o = String::new();
        let _ = writeln!(
            o,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(o, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            o,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            o,
            r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
        );
        for t in nice_ticks(x0, x1) {
            let x = sx(t);
            let _ = writeln!(
                o,
                r##"<line class="tick" x1="{x:.2}" y1="{b}" x2="{x:.2}" y2="{b2}" stroke="#444"/><text x="{x:.2}" y="{ty}" text-anchor="middle">{}</text>"##,
                tick_label(t),
                b = TOP + ph,
                b2 = TOP + ph + 5.0,
                ty = TOP + ph + 18.0
            );
        }
        for t in nice_ticks(y0, y1) {
            let y = sy(t);
            let _ = writeln!(
                o,
                r##"<line class="tick" x1="{l2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="#444"/><line x1="{LEFT}" y1="{y:.2}" x2="{r}" y2="{y:.2}" stroke="#eee"/><text x="{tx}" y="{ty:.2}" text-anchor="end">{}</text>"##,
                tick_label(t),
                l2 = LEFT - 5.0,
                r = LEFT + pw,
                tx = LEFT - 8.0,
                ty = y + 4.0
            );
        }
        let _ = writeln!(
            o,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            o,
            r#"<text transform="translate(18 {}) rotate(-90)" text-anchor="middle">{}</text>"#,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        let mut legend = Vec::new();
        if let Some(truth) = &self.truth {
            let pts: Vec<String> = truth.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(
                o,
                r#"<polyline class="truth" points="{}" fill="none" stroke="black" stroke-width="2" stroke-dasharray="6 4"/>"#,
                pts.join(" ")
            );
            legend.push(("ground truth".to_string(), "black"));
        }
        for (i, s) in self.series.iter().enumerate() {
            let colour = PALETTE[i % PALETTE.len()];
            let pts: Vec<String> = s.points.iter().map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.mean))).collect();
            let _ = writeln!(
                o,
                r#"<polyline class="series" points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
                pts.join(" ")
            );
            for p in &s.points {
                let (x, lo, hi) = (sx(p.x), sy(p.mean - p.std), sy(p.mean + p.std));
                let _ = writeln!(
                    o,
                    r#"<line class="errorbar" x1="{x:.2}" y1="{lo:.2}" x2="{x:.2}" y2="{hi:.2}" stroke="{colour}"/><circle cx="{x:.2}" cy="{:.2}" r="3" fill="{colour}"/>"#,
                    sy(p.mean)
                );
            }
            legend.push((s.label.clone(), colour));
        }
        for (i, (label, colour)) in legend.iter().enumerate() {
            let y = TOP + 10.0 + 18.0 * i as f64;
            let x = LEFT + pw + 12.0;
            let _ = writeln!(
                o,
                r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{colour}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
                x + 20.0,
                x + 26.0,
                y + 4.0,
                escape(label)
            );
        }
        o.push_str("</svg>\n");
        Ok(o)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(path, self.to_svg()?).map_err(|e| Error::io(path, e))
    }
}
