//! Minimal SVG line charts of aggregated curves with shaded 95% bands.

use std::fmt::Write;

use crate::report::{Band, Curve};
use crate::{HarnessError, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
/// Curves are thinned to at most this many points.
const MAX_POINTS: usize = 1000;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Mistakes,
    Reward,
}

impl Metric {
    pub fn label(self) -> &'static str {
        match self {
            Self::Mistakes => "cumulative mistakes",
            Self::Reward => "cumulative reward",
        }
    }

    fn band(self, c: &Curve) -> &Band {
        match self {
            Self::Mistakes => &c.mistakes,
            Self::Reward => &c.reward,
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Indices kept when thinning `len` points; always includes the last one.
fn sample_indices(len: usize) -> Vec<usize> {
    let step = len.div_ceil(MAX_POINTS).max(1);
    let mut idx: Vec<usize> = (0..len).step_by(step).collect();
    if idx.last() != Some(&(len - 1)) {
        idx.push(len - 1);
    }
    idx
}

/// Round tick spacing giving roughly five ticks over `span`.
fn tick_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag)
}

pub fn render_svg(curves: &[Curve], metric: Metric) -> Result<String> {
    let curves: Vec<&Curve> = curves.iter().filter(|c| !c.is_empty()).collect();
    if curves.is_empty() {
        return Err(HarnessError::Config("nothing to plot: no non-empty curves".into()));
    }
    let t_max = curves.iter().map(|c| c.len()).max().unwrap_or(1) as f64;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for c in &curves {
        let band = metric.band(c);
        for t in 0..c.len() {
            lo = lo.min(band.lower(t));
            hi = hi.max(band.upper(t));
        }
    }
    lo = lo.min(0.0);
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |t: f64| LEFT + plot_w * t / t_max.max(1.0);
    let y = |v: f64| TOP + plot_h * (hi - v) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );

    // Axes and ticks.
    let (x0, x1, y0, y1) = (LEFT, LEFT + plot_w, TOP + plot_h, TOP);
    let _ = writeln!(s, r#"<g stroke="black" stroke-width="1">"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/>"#);
    let _ = writeln!(s, "</g>");
    let step = tick_step(t_max);
    let mut t = 0.0;
    while t <= t_max + 1e-9 {
        let px = x(t);
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{t}</text>"#,
            y0 + 5.0,
            y0 + 20.0
        );
        t += step;
    }
    let step = tick_step(hi - lo);
    let mut v = (lo / step).ceil() * step;
    while v <= hi + 1e-9 * step {
        let py = y(v);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0,
            (v * 1e6).round() / 1e6
        );
        v += step;
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">trials</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        metric.label()
    );

    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let band = metric.band(c);
        let idx = sample_indices(c.len());
        if band.half_width.is_some() {
            let mut points: Vec<String> = idx
                .iter()
                .map(|&t| format!("{:.2},{:.2}", x((t + 1) as f64), y(band.upper(t))))
                .collect();
            points.extend(
                idx.iter()
                    .rev()
                    .map(|&t| format!("{:.2},{:.2}", x((t + 1) as f64), y(band.lower(t)))),
            );
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                points.join(" ")
            );
        }
        let line: Vec<String> = idx
            .iter()
            .map(|&t| format!("{:.2},{:.2}", x((t + 1) as f64), y(band.mean[t])))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.join(" ")
        );
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = LEFT + plot_w + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{:.2}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{:.2}" y="{:.2}">{} ({}, n={})</text>"#,
            lx + 20.0,
            lx + 25.0,
            ly + 4.0,
            escape(&c.algorithm),
            escape(&c.basis),
            c.n_seeds
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
