//! Static SVG figures: the truth/estimate scatter and sweep line charts.

use std::fmt::Write as _;

use super::TrialResult;
use crate::network::{Network, Point2};

const PLOT_PX: f64 = 560.0;
const MARGIN_PX: f64 = 60.0;
const MARKER_M: f64 = 0.45;

fn star(c: Point2, r: f64) -> String {
    (0..10)
        .map(|k| {
            let a = std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::PI / 5.0;
            let rr = if k % 2 == 0 { r } else { 0.4 * r };
            format!("{:.9},{:.9}", c.x + rr * a.cos(), c.y + rr * a.sin())
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn diamond(c: Point2, r: f64) -> String {
    format!(
        "{:.9},{:.9} {:.9},{:.9} {:.9},{:.9} {:.9},{:.9}",
        c.x + r,
        c.y,
        c.x,
        c.y + r,
        c.x - r,
        c.y,
        c.x,
        c.y - r
    )
}

fn tick_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|k| k * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag)
}

/// Axis frame mapping data coordinates onto the plot area, y up.
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    sx: f64,
    sy: f64,
}

impl Frame {
    fn new(x0: f64, x1: f64, y0: f64, y1: f64, equal: bool) -> Self {
        let (mut sx, mut sy) = (PLOT_PX / (x1 - x0), PLOT_PX / (y1 - y0));
        if equal {
            sx = sx.min(sy);
            sy = sx;
        }
        Self { x0, x1, y0, y1, sx, sy }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN_PX + (x - self.x0) * self.sx
    }

    fn py(&self, y: f64) -> f64 {
        MARGIN_PX + PLOT_PX - (y - self.y0) * self.sy
    }

    fn axes(&self, out: &mut String, x_label: &str, y_label: &str) {
        let (l, r, t, b) = (self.px(self.x0), self.px(self.x1), self.py(self.y1), self.py(self.y0));
        let _ = writeln!(
            out,
            r#"<rect class="frame" x="{l:.3}" y="{t:.3}" width="{:.3}" height="{:.3}" fill="none" stroke="black"/>"#,
            r - l,
            b - t
        );
        let step = tick_step(self.x1 - self.x0);
        let mut x = (self.x0 / step).ceil() * step;
        while x <= self.x1 + 1e-9 {
            let p = self.px(x);
            let _ = writeln!(
                out,
                r#"<path class="tick" d="M{p:.3},{b:.3} v6" stroke="black"/><text x="{p:.3}" y="{:.3}" font-size="12" text-anchor="middle">{}</text>"#,
                b + 20.0,
                fmt_tick(x)
            );
            x += step;
        }
        let step = tick_step(self.y1 - self.y0);
        let mut y = (self.y0 / step).ceil() * step;
        while y <= self.y1 + 1e-9 {
            let p = self.py(y);
            let _ = writeln!(
                out,
                r#"<path class="tick" d="M{l:.3},{p:.3} h-6" stroke="black"/><text x="{:.3}" y="{:.3}" font-size="12" text-anchor="end">{}</text>"#,
                l - 9.0,
                p + 4.0,
                fmt_tick(y)
            );
            y += step;
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.3}" y="{:.3}" font-size="14" text-anchor="middle">{}</text>"#,
            (l + r) / 2.0,
            b + 42.0,
            escape(x_label)
        );
        let _ = writeln!(
            out,
            r#"<text transform="translate({:.3},{:.3}) rotate(-90)" font-size="14" text-anchor="middle">{}</text>"#,
            l - 42.0,
            (t + b) / 2.0,
            escape(y_label)
        );
    }
}

fn fmt_tick(v: f64) -> String {
    let r = (v * 1e6).round() / 1e6;
    if r == 0.0 {
        "0".into()
    } else {
        r.to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(out: &mut String, width: f64, height: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.3}" y="30" font-size="16" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape(title)
    );
}

/// Truth as green circles, estimates as red stars, anchors as blue
/// diamonds, and a blue segment from each true position to its estimate.
/// Markers sit in a group whose transform maps meters to pixels, so every
/// coordinate in the group is in meters.
pub fn render_scatter(trial: &TrialResult, network: &Network, estimates: &[Point2]) -> String {
    let area = network.area;
    let frame = Frame::new(0.0, area.width, 0.0, area.height, true);
    let width = 2.0 * MARGIN_PX + PLOT_PX;
    let mut out = String::new();
    let title = match trial.p_m {
        Some(p) => format!("{} trial {}: P_m = {p:.4} m", trial.scenario.label(), trial.trial),
        None => format!("{} trial {}: solve failed", trial.scenario.label(), trial.trial),
    };
    open(&mut out, width, width, &title);
    frame.axes(&mut out, "x (m)", "y (m)");
    let _ = writeln!(
        out,
        r#"<g class="data" transform="translate({:.6},{:.6}) scale({:.9},{:.9})">"#,
        frame.px(0.0),
        frame.py(0.0),
        frame.sx,
        -frame.sy
    );
    for (t, e) in network.blind.iter().zip(estimates) {
        let _ = writeln!(
            out,
            r#"<line class="error" x1="{:.9}" y1="{:.9}" x2="{:.9}" y2="{:.9}" stroke="blue" stroke-width="1.5" vector-effect="non-scaling-stroke"/>"#,
            t.x, t.y, e.x, e.y
        );
    }
    for t in &network.blind {
        let _ = writeln!(
            out,
            r#"<circle class="truth" cx="{:.9}" cy="{:.9}" r="{MARKER_M}" fill="none" stroke="green" stroke-width="1.5" vector-effect="non-scaling-stroke"/>"#,
            t.x, t.y
        );
    }
    for e in estimates {
        let _ = writeln!(
            out,
            r#"<polygon class="estimate" points="{}" fill="red"/>"#,
            star(*e, MARKER_M)
        );
    }
    for a in &network.anchors {
        let _ = writeln!(
            out,
            r#"<polygon class="anchor" points="{}" fill="blue"/>"#,
            diamond(*a, MARKER_M)
        );
    }
    out.push_str("</g>\n</svg>\n");
    out
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Line chart of named `(x, y)` series with a legend.
pub fn render_line_chart(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let pts = series.iter().flat_map(|(_, s)| s.iter());
    let (mut x0, mut x1, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if !(y1 > 0.0) {
        y1 = 1.0;
    }
    let frame = Frame::new(x0, x1, 0.0, y1 * 1.1, false);
    let width = 2.0 * MARGIN_PX + PLOT_PX + 180.0;
    let mut out = String::new();
    open(&mut out, width, 2.0 * MARGIN_PX + PLOT_PX, title);
    frame.axes(&mut out, x_label, y_label);
    for (k, (name, s)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let d: Vec<String> = s
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| format!("{}{:.3},{:.3}", if i == 0 { 'M' } else { 'L' }, frame.px(x), frame.py(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<path class="series" d="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            d.join(" ")
        );
        for &(x, y) in s {
            let _ = writeln!(
                out,
                r#"<circle class="point" cx="{:.3}" cy="{:.3}" r="3" fill="{color}"/>"#,
                frame.px(x),
                frame.py(y)
            );
        }
        let ly = MARGIN_PX + 20.0 * k as f64;
        let lx = MARGIN_PX + PLOT_PX + 20.0;
        let _ = writeln!(
            out,
            r#"<path d="M{lx:.3},{ly:.3} h24" stroke="{color}" stroke-width="2"/><text x="{:.3}" y="{:.3}" font-size="12">{}</text>"#,
            lx + 30.0,
            ly + 4.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round() {
        assert_eq!(tick_step(30.0), 5.0);
        assert_eq!(tick_step(1.0), 0.2);
        assert_eq!(tick_step(22.0), 5.0);
    }

    #[test]
    fn chart_has_one_path_per_series() {
        let s = vec![
            ("a".to_string(), vec![(0.0, 1.0), (1.0, 2.0)]),
            ("b".to_string(), vec![(0.0, 0.5)]),
        ];
        let svg = render_line_chart("t", "x", "y", &s);
        assert_eq!(svg.matches(r#"class="series""#).count(), 2);
        assert_eq!(svg.matches(r#"class="point""#).count(), 3);
    }
}
