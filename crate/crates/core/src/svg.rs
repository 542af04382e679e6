//! Minimal SVG writers for cluster scatter plots and timing curves.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 40.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

/// Color for cluster `label`; the first ten are a fixed palette.
pub fn cluster_color(label: usize) -> String {
    match PALETTE.get(label) {
        Some(c) => (*c).to_string(),
        None => format!("hsl({}, 65%, 45%)", (label * 137) % 360),
    }
}

struct Axes {
    min: (f64, f64),
    span: (f64, f64),
}

impl Axes {
    fn fit(points: impl Iterator<Item = (f64, f64)>) -> Self {
        let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
        for (x, y) in points {
            lo = (lo.0.min(x), lo.1.min(y));
            hi = (hi.0.max(x), hi.1.max(y));
        }
        if !lo.0.is_finite() {
            lo = (0.0, 0.0);
            hi = (1.0, 1.0);
        }
        let span = |a: f64, b: f64| if b > a { b - a } else { 1.0 };
        Self {
            min: lo,
            span: (span(lo.0, hi.0), span(lo.1, hi.1)),
        }
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let px = MARGIN + (x - self.min.0) / self.span.0 * (WIDTH - 2.0 * MARGIN);
        let py = HEIGHT - MARGIN - (y - self.min.1) / self.span.1 * (HEIGHT - 2.0 * MARGIN);
        (px, py)
    }
}

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    s
}

/// One `<circle>` per point, filled by cluster label.
pub fn scatter(title: &str, points: &[(f64, f64, usize)]) -> String {
    let axes = Axes::fit(points.iter().map(|p| (p.0, p.1)));
    let mut s = header(title);
    for &(x, y, label) in points {
        let (px, py) = axes.map(x, y);
        let _ = writeln!(
            s,
            r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="{}"/>"#,
            cluster_color(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Polylines sharing one pair of axes, each with markers at its samples.
pub fn line_plot(title: &str, series: &[(&str, Vec<(f64, f64)>)]) -> String {
    let axes = Axes::fit(series.iter().flat_map(|(_, pts)| pts.iter().copied()).chain([(0.0, 0.0)]));
    let mut s = header(title);
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = cluster_color(i);
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| {
                let (px, py) = axes.map(x, y);
                format!("{px:.2},{py:.2}")
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"><title>{}</title></polyline>"#,
            path.join(" "),
            escape(name)
        );
        for &(x, y) in pts {
            let (px, py) = axes.map(x, y);
            let _ = writeln!(s, r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="{color}"/>"#);
        }
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
