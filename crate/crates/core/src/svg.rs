//! Minimal self-contained SVG writers: eigenvalue scatter plots with a unit
//! circle guide, and line plots for convergence curves.

use std::fmt::Write;

use num_complex::Complex64;

const SIZE: f64 = 480.0;
const PAD: f64 = 40.0;

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        SIZE / 2.0,
        escape(title)
    );
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Scatter of complex points on a square window centred at the origin that
/// contains the unit circle and every point.
pub fn scatter(points: &[Complex64], title: &str) -> String {
    let extent = points.iter().map(|z| z.re.abs().max(z.im.abs())).fold(1.0f64, f64::max) * 1.1;
    let scale = (SIZE - 2.0 * PAD) / (2.0 * extent);
    let cx = SIZE / 2.0;
    let map = |z: Complex64| (cx + z.re * scale, cx - z.im * scale);
    let mut s = header(title);
    let _ = writeln!(s, r##"<line x1="{PAD}" y1="{cx}" x2="{}" y2="{cx}" stroke="#bbb"/>"##, SIZE - PAD);
    let _ = writeln!(s, r##"<line x1="{cx}" y1="{PAD}" x2="{cx}" y2="{}" stroke="#bbb"/>"##, SIZE - PAD);
    let _ = writeln!(
        s,
        r##"<circle cx="{cx}" cy="{cx}" r="{:.3}" fill="none" stroke="#d62728" stroke-dasharray="4 3"/>"##,
        scale
    );
    for &z in points {
        let (x, y) = map(z);
        let _ = writeln!(s, r##"<circle cx="{x:.3}" cy="{y:.3}" r="1.6" fill="#1f77b4"/>"##);
    }
    s.push_str("</svg>\n");
    s
}

/// Polyline of `(x, y)` pairs; `log_x` plots `log10 x` and drops `x <= 0`.
pub fn line_plot(xy: &[(f64, f64)], title: &str, log_x: bool) -> String {
    let pts: Vec<(f64, f64)> = xy
        .iter()
        .filter(|(x, y)| y.is_finite() && (!log_x || *x > 0.0))
        .map(|&(x, y)| (if log_x { x.log10() } else { x }, y))
        .collect();
    let mut s = header(title);
    if pts.is_empty() {
        s.push_str("</svg>\n");
        return s;
    }
    let (xmin, xmax) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (ymin, ymax) = pts.iter().fold((0.0f64, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let span = |lo: f64, hi: f64| if hi > lo { hi - lo } else { 1.0 };
    let w = SIZE - 2.0 * PAD;
    let map =
        |(x, y): (f64, f64)| (PAD + (x - xmin) / span(xmin, xmax) * w, SIZE - PAD - (y - ymin) / span(ymin, ymax) * w);
    let _ = writeln!(s, r##"<rect x="{PAD}" y="{PAD}" width="{w}" height="{w}" fill="none" stroke="#bbb"/>"##);
    let path: Vec<String> = pts
        .iter()
        .map(|&p| {
            let (x, y) = map(p);
            format!("{x:.3},{y:.3}")
        })
        .collect();
    let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>"##, path.join(" "));
    for &p in &pts {
        let (x, y) = map(p);
        let _ = writeln!(s, r##"<circle cx="{x:.3}" cy="{y:.3}" r="3" fill="#1f77b4"/>"##);
    }
    let _ = writeln!(
        s,
        r#"<text x="{PAD}" y="{}" font-family="sans-serif" font-size="11">y in [{ymin:.4}, {ymax:.4}], {}x in [{xmin:.4}, {xmax:.4}]</text>"#,
        SIZE - 12.0,
        if log_x { "log10 " } else { "" }
    );
    s.push_str("</svg>\n");
    s
}
