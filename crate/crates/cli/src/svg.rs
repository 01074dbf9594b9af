//! Minimal standalone SVG charts: layer curves, traces and scatter plots.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

#[derive(Clone, Copy)]
struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn of(values: impl Iterator<Item = f64>) -> Range {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return Range { lo: 0.0, hi: 1.0 };
        }
        if hi - lo < 1e-12 {
            return Range {
                lo: lo - 0.5,
                hi: hi + 0.5,
            };
        }
        let pad = (hi - lo) * 0.05;
        Range {
            lo: lo - pad,
            hi: hi + pad,
        }
    }

    fn union(self, other: Range) -> Range {
        Range {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    fn frac(self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo)
    }
}

struct Canvas {
    out: String,
    x: Range,
    y: Range,
}

impl Canvas {
    fn new(title: &str, x_label: &str, y_label: &str, x: Range, y: Range) -> Canvas {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            (LEFT + WIDTH - RIGHT) / 2.0,
            escape(title)
        );
        let mut canvas = Canvas { out, x, y };
        canvas.axes(x_label, y_label);
        canvas
    }

    fn px(&self, v: f64) -> f64 {
        LEFT + self.x.frac(v) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        HEIGHT - BOTTOM - self.y.frac(v) * (HEIGHT - TOP - BOTTOM)
    }

    fn axes(&mut self, x_label: &str, y_label: &str) {
        let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
        let _ = writeln!(
            self.out,
            r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" fill="none" stroke="black"/>"#
        );
        for k in 0..=4 {
            let t = k as f64 / 4.0;
            let xv = self.x.lo + t * (self.x.hi - self.x.lo);
            let yv = self.y.lo + t * (self.y.hi - self.y.lo);
            let (px, py) = (self.px(xv), self.py(yv));
            let _ = writeln!(
                self.out,
                r#"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{xv:.3}</text>"#,
                y0 + 4.0,
                y0 + 18.0
            );
            let _ = writeln!(
                self.out,
                r#"<line x1="{:.2}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{yv:.3}</text>"#,
                x0 - 4.0,
                x0 - 7.0,
                py + 4.0
            );
        }
        let _ = writeln!(
            self.out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            HEIGHT - 12.0,
            escape(x_label)
        );
        let _ = writeln!(
            self.out,
            r#"<text transform="translate(18,{:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
            (y0 + y1) / 2.0,
            escape(y_label)
        );
    }

    fn legend(&mut self, index: usize, name: &str, color: &str) {
        let x = WIDTH - RIGHT + 12.0;
        let y = TOP + 10.0 + index as f64 * 18.0;
        let _ = writeln!(
            self.out,
            r#"<rect x="{x}" y="{:.2}" width="10" height="10" fill="{color}"/><text x="{:.2}" y="{y:.2}">{}</text>"#,
            y - 9.0,
            x + 15.0,
            escape(name)
        );
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let mut canvas = Canvas::new(
        title,
        x_label,
        y_label,
        Range::of(all().map(|p| p.0)),
        Range::of(all().map(|p| p.1)),
    );
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", canvas.px(x), canvas.py(y)))
            .collect();
        let _ = writeln!(
            canvas.out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            path.join(" ")
        );
        if s.points.len() <= 64 {
            for &(x, y) in &s.points {
                let _ = writeln!(
                    canvas.out,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                    canvas.px(x),
                    canvas.py(y)
                );
            }
        }
        canvas.legend(i, &s.name, color);
    }
    canvas.finish()
}

/// Scatter on equal axes with the identity line `y = x`.
pub fn scatter(title: &str, x_label: &str, y_label: &str, points: &[(String, f64, f64)]) -> String {
    let range = Range::of(points.iter().map(|p| p.1)).union(Range::of(points.iter().map(|p| p.2)));
    let mut canvas = Canvas::new(title, x_label, y_label, range, range);
    let _ = writeln!(
        canvas.out,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
        canvas.px(range.lo),
        canvas.py(range.lo),
        canvas.px(range.hi),
        canvas.py(range.hi)
    );
    for (label, x, y) in points {
        let _ = writeln!(
            canvas.out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"><title>{}</title></circle>"#,
            canvas.px(*x),
            canvas.py(*y),
            COLORS[0],
            escape(label)
        );
    }
    canvas.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_well_formed() {
        let svg = line_chart(
            "curve <m>",
            "layer",
            "error",
            &[Series {
                name: "a&b".into(),
                points: vec![(0.0, 0.3), (1.0, 0.2), (2.0, 0.25)],
            }],
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.contains("curve &lt;m&gt;"));
        assert!(svg.contains("a&amp;b"));
        assert_eq!(svg.matches("<circle").count(), 3);

        let svg = scatter("s", "human", "model", &[("w".into(), 0.1, 0.2), ("v".into(), 0.1, 0.2)]);
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.contains("stroke-dasharray"));
        // constant data must not divide by zero
        assert!(!svg.contains("NaN"));
    }
}
