//! Self-contained SVG figures. All styling is inline and nothing depends on
//! the clock, so identical inputs give identical files.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// One polyline with optional markers.
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub markers: bool,
    pub dashed: bool,
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit(series: &[Series]) -> Self {
        let mut x = (f64::INFINITY, f64::NEG_INFINITY);
        let mut y = (f64::INFINITY, f64::NEG_INFINITY);
        for (px, py) in series.iter().flat_map(|s| s.points.iter()) {
            if px.is_finite() && py.is_finite() {
                x = (x.0.min(*px), x.1.max(*px));
                y = (y.0.min(*py), y.1.max(*py));
            }
        }
        let pad = |r: (f64, f64)| {
            if !r.0.is_finite() {
                (0.0, 1.0)
            } else if r.1 - r.0 < 1e-12 {
                (r.0 - 0.5, r.1 + 0.5)
            } else {
                let p = 0.05 * (r.1 - r.0);
                (r.0 - p, r.1 + p)
            }
        };
        Self { x: pad(x), y: pad(y) }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(mag * 10.0);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

/// Line chart with axes, tick labels, legend and free-text notes.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], notes: &[String]) -> String {
    let f = Frame::fit(series);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{W}" height="{H}" style="fill:#ffffff"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" style="font-size:14px">{}</text>"#, W / 2.0, escape(title));
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(s, r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" style="fill:none;stroke:#333333"/>"#, x1 - x0, y1 - y0);
    for t in ticks(f.x.0, f.x.1) {
        let x = f.px(t);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{y1}" x2="{x:.2}" y2="{}" style="stroke:#333333"/>"#, y1 + 4.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, y1 + 16.0, fmt_tick(t));
    }
    for t in ticks(f.y.0, f.y.1) {
        let y = f.py(t);
        let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" style="stroke:#333333"/>"#, x0 - 4.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 6.0, y + 4.0, fmt_tick(t));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 12.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
            .collect();
        let dash = if ser.dashed { ";stroke-dasharray:5,4" } else { "" };
        let _ = writeln!(s, r#"<polyline points="{}" style="fill:none;stroke:{color};stroke-width:1.5{dash}"/>"#, pts.join(" "));
        if ser.markers {
            for p in &pts {
                let (cx, cy) = p.split_once(',').unwrap();
                let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="3" style="fill:{color}"/>"#);
            }
        }
        let ly = y0 + 14.0 + 14.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" style="stroke:{color};stroke-width:2{dash}"/>"#, x0 + 10.0, x0 + 30.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, x0 + 35.0, ly + 4.0, escape(&ser.label));
    }
    for (i, note) in notes.iter().enumerate() {
        let ny = y1 - 10.0 - 14.0 * (notes.len() - 1 - i) as f64;
        let _ = writeln!(s, r#"<text x="{}" y="{ny}" text-anchor="end">{}</text>"#, x1 - 8.0, escape(note));
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(t: f64) -> String {
    let s = format!("{t:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// `(label, ns, medians, slope, intercept)`.
pub type LogLogRow = (String, Vec<f64>, Vec<f64>, f64, f64);

/// Log-log error plot: one marker series per `(label, ns, medians)` and the
/// fitted line `exp(intercept)·n^slope` dashed.
pub fn loglog_plot(title: &str, rows: &[LogLogRow]) -> String {
    let mut series = Vec::new();
    let mut notes = Vec::new();
    for (label, ns, meds, slope, intercept) in rows {
        let pts: Vec<(f64, f64)> = ns.iter().zip(meds).map(|(n, m)| (n.ln(), m.ln())).collect();
        let fit: Vec<(f64, f64)> = ns.iter().map(|n| (n.ln(), intercept + slope * n.ln())).collect();
        series.push(Series { label: label.clone(), points: pts, markers: true, dashed: false });
        series.push(Series { label: format!("fit, slope {slope:.3}"), points: fit, markers: false, dashed: true });
        notes.push(format!("{label}: slope {slope:.3}"));
    }
    line_chart(title, "log n", "log median error", &series, &notes)
}

/// Empirical distribution functions of several samples on one chart.
pub fn cdf_plot(title: &str, samples: &[(&str, &[f64])], note: &str) -> String {
    let series: Vec<Series> = samples
        .iter()
        .map(|(label, xs)| {
            let mut v: Vec<f64> = xs.iter().copied().filter(|x| x.is_finite()).collect();
            v.sort_by(f64::total_cmp);
            let m = v.len();
            // thin to at most 400 steps
            let stride = m.div_ceil(400).max(1);
            let mut pts = Vec::new();
            for i in (0..m).step_by(stride).chain(std::iter::once(m.saturating_sub(1))) {
                pts.push((v[i], (i + 1) as f64 / m as f64));
            }
            pts.dedup();
            Series { label: label.to_string(), points: pts, markers: false, dashed: false }
        })
        .collect();
    line_chart(title, "value", "empirical CDF", &series, &[note.to_string()])
}

/// Piecewise-linear functions given by their knots.
pub fn curves_plot(title: &str, curves: &[(String, Vec<(f64, f64)>)], note: &str) -> String {
    let series: Vec<Series> = curves
        .iter()
        .enumerate()
        .map(|(i, (label, pts))| Series { label: label.clone(), points: pts.clone(), markers: false, dashed: i % 2 == 1 })
        .collect();
    line_chart(title, "x", "P(Y = 1 | X = x)", &series, &[note.to_string()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_deterministic_and_self_contained() {
        let rows = vec![("pointwise".to_string(), vec![512.0, 1024.0, 2048.0], vec![0.1, 0.08, 0.063], -0.33, 0.4)];
        let a = loglog_plot("rates", &rows);
        assert_eq!(a, loglog_plot("rates", &rows));
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        assert!(!a.contains("href"));
        assert!(a.contains("slope -0.330"));
    }

    #[test]
    fn cdf_plot_handles_tiny_samples() {
        let s = cdf_plot("cdf", &[("one", &[1.0]), ("two", &[0.0, 2.0])], "KS = 0.5");
        assert!(s.contains("KS = 0.5"));
    }

    #[test]
    fn text_is_escaped() {
        assert!(line_chart("a < b & c", "x", "y", &[], &[]).contains("a &lt; b &amp; c"));
    }
}
