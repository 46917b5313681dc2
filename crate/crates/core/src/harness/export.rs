//! CSV and SVG output of NMSD curves.

use std::fmt::Write as _;
use std::path::Path;

use super::run::CurveSet;
use super::HarnessError;

/// CSV text: header `iteration,<name>...`, one row per decimated iteration,
/// NMSD in dB with 9 significant digits, LF endings.
pub fn csv_string(curves: &CurveSet) -> String {
    let mut out = String::from("iteration");
    for name in &curves.names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    let db: Vec<Vec<f64>> = (0..curves.names.len()).map(|i| curves.nmsd_db(i)).collect();
    for k in 0..curves.iterations() {
        let _ = write!(out, "{}", k + 1);
        for col in &db {
            let _ = write!(out, ",{:.8e}", col[k]);
        }
        out.push('\n');
    }
    out
}

pub fn export_csv(curves: &CurveSet, path: impl AsRef<Path>) -> Result<(), HarnessError> {
    write_file(path.as_ref(), &csv_string(curves))
}

fn write_file(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];
const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const MAX_POINTS: usize = 2000;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag)
}

/// Iteration-vs-NMSD line chart, one polyline per curve.
pub fn svg_string(curves: &CurveSet) -> Result<String, HarnessError> {
    let iterations = curves.iterations();
    if curves.names.is_empty() || iterations == 0 {
        return Err(HarnessError::EmptyResult);
    }
    let db: Vec<Vec<f64>> = (0..curves.names.len()).map(|i| curves.nmsd_db(i)).collect();
    let finite = db.iter().flatten().copied().filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        lo = -1.0;
        hi = 1.0;
    }
    if hi - lo < 1e-9 {
        lo -= 1.0;
        hi += 1.0;
    }
    let step = nice_step(hi - lo);
    let lo = (lo / step).floor() * step;
    let hi = (hi / step).ceil() * step;

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x_of = |k: usize| LEFT + plot_w * k.saturating_sub(1) as f64 / (iterations.max(2) - 1) as f64;
    let y_of = |v: f64| TOP + plot_h * (hi - v.clamp(lo, hi)) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );

    let mut tick = lo;
    while tick <= hi + step * 1e-6 {
        let y = y_of(tick);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            y + 4.0,
            tick.round()
        );
        tick += step;
    }
    let xstep = nice_step(iterations as f64).max(1.0);
    let mut k = 0.0;
    while k <= iterations as f64 {
        let x = x_of(k.max(1.0) as usize);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + plot_h + 16.0,
            k as u64
        );
        k += xstep;
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Iteration</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">NMSD (dB)</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    let stride = iterations.div_ceil(MAX_POINTS).max(1);
    for (i, (name, col)) in curves.names.iter().zip(&db).enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let mut points = String::new();
        for k in (0..iterations).step_by(stride).chain(std::iter::once(iterations - 1)) {
            let _ = write!(points, "{:.2},{:.2} ", x_of(k + 1), y_of(col[k]));
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            points.trim_end()
        );
        let ly = TOP + 16.0 + 18.0 * i as f64;
        let lx = LEFT + plot_w - 180.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{colour}" stroke-width="2"/><text x="{:.2}" y="{ly:.2}">{}</text>"#,
            ly - 4.0,
            lx + 24.0,
            ly - 4.0,
            lx + 30.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_plot(curves: &CurveSet, path: impl AsRef<Path>) -> Result<(), HarnessError> {
    let svg = svg_string(curves)?;
    write_file(path.as_ref(), &svg)
}
