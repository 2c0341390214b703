//! Standalone SVG plots of a `trajectory.csv`.

use std::fmt::Write as _;

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    /// Vortex tracks and the body centre.
    Positions,
    /// Total energy against time.
    Energy,
    /// Force-route discrepancy and boundary residual against time (log scale).
    Forces,
}

/// A parsed trajectory: column names and rows of numbers.
#[derive(Debug)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header: Vec<String> = r.headers().map_err(|e| Error::Invalid(format!("header: {e}")))?.iter().map(str::to_string).collect();
        if header.first().map(String::as_str) != Some("t") {
            return Err(Error::Invalid("header: first column must be t".into()));
        }
        let mut rows = Vec::new();
        for (k, rec) in r.records().enumerate() {
            // Row 1 is the header.
            let row = k + 2;
            let rec = rec.map_err(|e| Error::Invalid(format!("row {row}: {e}")))?;
            if rec.len() != header.len() {
                return Err(Error::Invalid(format!("row {row}: {} fields, header has {}", rec.len(), header.len())));
            }
            let vals = rec
                .iter()
                .zip(&header)
                .map(|(v, h)| v.trim().parse::<f64>().map_err(|_| Error::Invalid(format!("row {row}: column {h}: not a number: {v:?}"))))
                .collect::<Result<Vec<f64>>>()?;
            rows.push(vals);
        }
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

struct Series {
    name: String,
    points: Vec<(f64, f64)>,
}

const W: f64 = 720.0;
const H: f64 = 480.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Round step near `span / 5` from {1, 2, 5} x 10^k.
fn tick_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    mag * if f < 1.5 {
        1.0
    } else if f < 3.5 {
        2.0
    } else if f < 7.5 {
        5.0
    } else {
        10.0
    }
}

fn range(vals: impl Iterator<Item = f64>, min_span: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vals.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let span = (hi - lo).max(min_span).max(1e-300);
    let mid = 0.5 * (lo + hi);
    (mid - 0.55 * span, mid + 0.55 * span)
}

fn label(v: f64, step: f64) -> String {
    let digits = (-step.log10().floor()).max(0.0) as usize;
    // Accumulated ticks land a few ulps off zero; never print "-0.0".
    let v = if v.abs() < 1e-9 * step { 0.0 } else { v };
    if v.abs() >= 1e5 || (v != 0.0 && v.abs() < 1e-4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.digits$}")
    }
}

struct Chart<'a> {
    title: &'a str,
    x_label: &'a str,
    y_label: &'a str,
    series: Vec<Series>,
    /// Smallest displayed y span, so that near-constant data plots flat.
    min_y_span: f64,
    equal_aspect: bool,
    note: Option<String>,
}

fn render(c: &Chart<'_>) -> String {
    let all = || c.series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1) = range(all().map(|p| p.0), 0.0);
    let (mut y0, mut y1) = range(all().map(|p| p.1), c.min_y_span);
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    if c.equal_aspect {
        let scale = ((x1 - x0) / pw).max((y1 - y0) / ph);
        let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
        (x0, x1) = (cx - 0.5 * scale * pw, cx + 0.5 * scale * pw);
        (y0, y1) = (cy - 0.5 * scale * ph, cy + 0.5 * scale * ph);
    }
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, LEFT + pw / 2.0, escape(c.title));
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    let xs = tick_step(x1 - x0);
    let mut t = (x0 / xs).ceil() * xs;
    while t <= x1 {
        let x = sx(t);
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="#ddd"/>"##, TOP, TOP + ph);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, TOP + ph + 16.0, label(t, xs));
        t += xs;
    }
    let ys = tick_step(y1 - y0);
    let mut t = (y0 / ys).ceil() * ys;
    while t <= y1 {
        let y = sy(t);
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/>"##, LEFT + pw);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, label(t, ys));
        t += ys;
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 18.0, escape(c.x_label));
    let _ = writeln!(
        s,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
        TOP + ph / 2.0,
        escape(c.y_label)
    );
    for (k, ser) in c.series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = ser.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1))).collect();
        if !pts.is_empty() {
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        }
        let ly = TOP + 14.0 + 18.0 * k as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&ser.name));
    }
    if let Some(n) = &c.note {
        let _ = writeln!(s, r##"<text x="{}" y="{}" text-anchor="middle" fill="#555">{}</text>"##, LEFT + pw / 2.0, TOP + 18.0, escape(n));
    }
    s.push_str("</svg>\n");
    s
}

pub fn plot(table: &Table, kind: PlotKind) -> Result<String> {
    let t = table.column("t").expect("parse checks the t column");
    let need = |name: &str| table.column(name).ok_or_else(|| Error::Invalid(format!("column {name} is missing")));
    let chart = match kind {
        PlotKind::Positions => {
            let mut series = Vec::new();
            if let (Some(x), Some(y)) = (table.column("x"), table.column("y")) {
                series.push(Series { name: "body".into(), points: x.into_iter().zip(y).collect() });
            }
            let mut i = 1;
            while let (Some(x), Some(y)) = (table.column(&format!("x_{i}")), table.column(&format!("y_{i}"))) {
                series.push(Series { name: format!("vortex {i}"), points: x.into_iter().zip(y).collect() });
                i += 1;
            }
            let note = series.is_empty().then(|| "no positions recorded".to_string());
            Chart { title: "Positions", x_label: "x", y_label: "y", series, min_y_span: 0.0, equal_aspect: true, note }
        }
        PlotKind::Energy => {
            let e = need("energy")?;
            let e0 = e.first().copied().unwrap_or(0.0);
            let drift = e.iter().map(|v| ((v - e0) / e0.abs().max(f64::MIN_POSITIVE)).abs()).fold(0.0, f64::max);
            let scale = e.iter().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs()));
            Chart {
                title: "Energy",
                x_label: "t",
                y_label: "energy",
                series: vec![Series { name: "energy".into(), points: t.iter().copied().zip(e).collect() }],
                min_y_span: 0.02 * scale,
                equal_aspect: false,
                note: Some(format!("max relative change {drift:.3e}")),
            }
        }
        PlotKind::Forces => {
            let log = |v: Vec<f64>| -> Vec<(f64, f64)> {
                t.iter().zip(v).filter(|(_, v)| v.is_finite() && *v > 0.0).map(|(t, v)| (*t, v.log10())).collect()
            };
            let series = vec![
                Series { name: "force discrepancy".into(), points: log(need("force_discrepancy")?) },
                Series { name: "bc residual".into(), points: log(need("bc_residual")?) },
            ];
            let note = series[0].points.is_empty().then(|| "force check was not enabled for this run".to_string());
            Chart { title: "Force check", x_label: "t", y_label: "log10 value", series, min_y_span: 1.0, equal_aspect: false, note }
        }
    };
    Ok(render(&chart))
}
