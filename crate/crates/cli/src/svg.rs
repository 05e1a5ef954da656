//! Static SVG emission. Coordinates are printed with fixed precision so
//! identical inputs give identical files.

use std::fmt::Write;

use histexpr::survival::KmCurve;

const HIGHLIGHT: &str = "#d62728";
const INK: &str = "#333333";

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Padded `[lo, hi]` covering `values`.
fn range(values: &[f64]) -> (f64, f64) {
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = finite.fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
    (lo - pad, hi + pad)
}

fn header(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
}

pub struct ScatterPanel<'a> {
    pub title: String,
    pub highlight: bool,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

/// One small scatter plot per panel, laid out `columns` wide.
pub fn scatter_grid(panels: &[ScatterPanel], columns: usize, x_label: &str, y_label: &str) -> String {
    const CELL: f64 = 220.0;
    const MARGIN: f64 = 36.0;
    let columns = columns.max(1);
    let rows = panels.len().div_ceil(columns).max(1);
    let mut out = String::new();
    header(&mut out, CELL * columns as f64, CELL * rows as f64 + 30.0);
    for (i, p) in panels.iter().enumerate() {
        let (ox, oy) = ((i % columns) as f64 * CELL, (i / columns) as f64 * CELL);
        let (x0, y0) = (ox + MARGIN, oy + 24.0);
        let side = CELL - MARGIN - 12.0;
        let color = if p.highlight { HIGHLIGHT } else { INK };
        let _ = writeln!(out, r#"<g class="panel">"#);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle" fill="{color}">{}</text>"#,
            x0 + side / 2.0,
            oy + 16.0,
            escape(&p.title)
        );
        let _ = writeln!(out, r#"<rect x="{x0:.2}" y="{y0:.2}" width="{side:.2}" height="{side:.2}" fill="none" stroke="{INK}"/>"#);
        let (xl, xh) = range(p.x);
        let (yl, yh) = range(p.y);
        for (&x, &y) in p.x.iter().zip(p.y) {
            if !(x.is_finite() && y.is_finite()) {
                continue;
            }
            let cx = x0 + (x - xl) / (xh - xl) * side;
            let cy = y0 + side - (y - yl) / (yh - yl) * side;
            let _ = writeln!(out, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="2" fill="{color}" fill-opacity="0.6"/>"#);
        }
        let _ = writeln!(out, "</g>");
    }
    let bottom = CELL * rows as f64 + 20.0;
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{bottom:.2}" font-size="13" text-anchor="middle">{} (x) vs {} (y)</text>"#,
        CELL * columns as f64 / 2.0,
        escape(x_label),
        escape(y_label)
    );
    out.push_str("</svg>\n");
    out
}

pub struct StepSeries<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub curve: &'a KmCurve,
    /// Last follow-up time; the final step is drawn out to here.
    pub end_time: f64,
}

/// Kaplan–Meier step functions on shared axes, one `<path class="km">`
/// per series.
pub fn km_plot(series: &[StepSeries], title: &str, x_label: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const LEFT: f64 = 60.0;
    const TOP: f64 = 40.0;
    let (pw, ph) = (W - LEFT - 150.0, H - TOP - 60.0);
    let t_max = series.iter().map(|s| s.end_time).fold(0.0, f64::max);
    let t_max = if t_max > 0.0 { t_max } else { 1.0 };
    let sx = |t: f64| LEFT + t / t_max * pw;
    let sy = |s: f64| TOP + (1.0 - s) * ph;

    let mut out = String::new();
    header(&mut out, W, H);
    let _ = writeln!(out, r#"<text x="{:.2}" y="24" font-size="15" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, escape(title));
    let _ = writeln!(out, r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="{INK}"/>"#);
    for k in 0..=4 {
        let s = f64::from(k) / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{s:.2}</text>"#,
            LEFT - 6.0,
            sy(s) + 4.0
        );
        let t = t_max * f64::from(k) / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{t:.1}</text>"#,
            sx(t),
            TOP + ph + 16.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        TOP + ph + 40.0,
        escape(x_label)
    );
    for (i, s) in series.iter().enumerate() {
        let mut d = format!("M{:.2},{:.2}", sx(0.0), sy(1.0));
        for (&t, &v) in s.curve.event_times.iter().zip(&s.curve.survival) {
            let _ = write!(d, " H{:.2} V{:.2}", sx(t), sy(v));
        }
        let _ = write!(d, " H{:.2}", sx(s.end_time.max(s.curve.event_times.last().copied().unwrap_or(0.0))));
        let _ = writeln!(
            out,
            r#"<path class="km" data-label="{}" d="{d}" fill="none" stroke="{}" stroke-width="2"/>"#,
            escape(s.label),
            s.color
        );
        let ly = TOP + 20.0 + 22.0 * i as f64;
        let lx = LEFT + pw + 16.0;
        let _ = writeln!(out, r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="2"/>"#, lx + 24.0, s.color);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="12">{} (n={})</text>"#,
            lx + 30.0,
            ly + 4.0,
            escape(s.label),
            s.curve.n
        );
    }
    out.push_str("</svg>\n");
    out
}
