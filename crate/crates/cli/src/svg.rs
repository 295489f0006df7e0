//! Minimal static SVG line and scatter charts.

use std::fmt::Write;

pub const BLUE: &str = "#1f77b4";
pub const RED: &str = "#d62728";
pub const GREY: &str = "#7f7f7f";
pub const BLACK: &str = "#000000";

const W: f64 = 640.0;
const H: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    Dot,
    Cross,
}

#[derive(Debug, Clone)]
pub struct Series {
    label: String,
    color: &'static str,
    points: Vec<(f64, f64)>,
    line: bool,
    mark: Option<Mark>,
}

impl Series {
    pub fn line(label: &str, color: &'static str, points: Vec<(f64, f64)>) -> Self {
        Series { label: label.into(), color, points, line: true, mark: None }
    }

    pub fn points(label: &str, color: &'static str, mark: Mark, points: Vec<(f64, f64)>) -> Self {
        Series { label: label.into(), color, points, line: false, mark: Some(mark) }
    }

    pub fn line_points(label: &str, color: &'static str, points: Vec<(f64, f64)>) -> Self {
        Series { label: label.into(), color, points, line: true, mark: Some(Mark::Dot) }
    }
}

#[derive(Debug, Clone)]
pub struct Plot {
    title: String,
    xlabel: String,
    ylabel: String,
    log_y: bool,
    series: Vec<Series>,
}

/// Round tick spacing giving about `n` intervals over `[lo, hi]`.
fn tick_step(lo: f64, hi: f64, n: f64) -> f64 {
    let raw = (hi - lo) / n;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    mag * if f < 1.5 {
        1.0
    } else if f < 3.0 {
        2.0
    } else if f < 7.0 {
        5.0
    } else {
        10.0
    }
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= 1e-12 * lo.abs().max(1.0) {
        let pad = 0.5 * lo.abs().max(1.0) * 0.1;
        return (lo - pad, hi + pad);
    }
    let pad = 0.04 * (hi - lo);
    (lo - pad, hi + pad)
}

fn fmt_tick(v: f64, step: f64) -> String {
    if v.abs() < step * 1e-9 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        return format!("{v:.1e}");
    }
    let digits = (-step.log10().floor()).max(0.0) as usize;
    format!("{v:.digits$}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Plot {
    pub fn new(title: &str, xlabel: &str, ylabel: &str) -> Self {
        Plot { title: title.into(), xlabel: xlabel.into(), ylabel: ylabel.into(), log_y: false, series: Vec::new() }
    }

    pub fn with(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }

    /// Base-10 logarithmic y axis; non-positive values are dropped.
    pub fn log_y(mut self) -> Self {
        self.log_y = true;
        self
    }

    fn y_of(&self, y: f64) -> Option<f64> {
        match self.log_y {
            true if y > 0.0 => Some(y.log10()),
            true => None,
            false => Some(y),
        }
    }

    pub fn render(&self) -> String {
        let all: Vec<(f64, f64)> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().filter_map(|&(x, y)| self.y_of(y).map(|y| (x, y))))
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .collect();
        let (x0, x1) = bounds(all.iter().map(|p| p.0));
        let (y0, y1) = bounds(all.iter().map(|p| p.1));
        let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(&self.title));
        let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);

        let step = tick_step(x0, x1, 6.0);
        let mut t = (x0 / step).ceil() * step;
        while t <= x1 {
            let x = sx(t);
            let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0);
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, fmt_tick(t, step));
            t += step;
        }
        let mut step = tick_step(y0, y1, 6.0);
        if self.log_y {
            step = step.max(1.0).round();
        }
        let mut t = (y0 / step).ceil() * step;
        while t <= y1 {
            let y = sy(t);
            let label = if self.log_y { format!("1e{}", fmt_tick(t, step)) } else { fmt_tick(t, step) };
            let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#, LEFT - 5.0);
            let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#, LEFT - 8.0, y + 4.0);
            t += step;
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 18.0, escape(&self.xlabel));
        let _ = writeln!(
            s,
            r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
            TOP + ph / 2.0,
            escape(&self.ylabel)
        );

        for (k, ser) in self.series.iter().enumerate() {
            let pts: Vec<(f64, f64)> = ser
                .points
                .iter()
                .filter_map(|&(x, y)| self.y_of(y).map(|y| (sx(x), sy(y))))
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .collect();
            if ser.line && pts.len() >= 2 {
                let d: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                let _ = writeln!(s, r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#, ser.color, d.join(" "));
            }
            for &(x, y) in &pts {
                match ser.mark {
                    Some(Mark::Dot) => {
                        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{}"/>"#, ser.color);
                    }
                    Some(Mark::Cross) => {
                        let _ = writeln!(
                            s,
                            r#"<path d="M{:.2},{:.2}L{:.2},{:.2}M{:.2},{:.2}L{:.2},{:.2}" stroke="{}" stroke-width="2"/>"#,
                            x - 5.0, y - 5.0, x + 5.0, y + 5.0, x - 5.0, y + 5.0, x + 5.0, y - 5.0, ser.color
                        );
                    }
                    None => {}
                }
            }
            let ly = TOP + 14.0 + 16.0 * k as f64;
            let lx = W - RIGHT - 150.0;
            let _ = writeln!(s, r#"<line x1="{lx}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="3"/>"#, ly - 4.0, lx + 18.0, ly - 4.0, ser.color);
            let _ = writeln!(s, r#"<text x="{}" y="{ly}">{}</text>"#, lx + 24.0, escape(&ser.label));
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_every_series() {
        let svg = Plot::new("t", "x", "y")
            .with(Series::line("a", BLUE, vec![(0.0, 0.0), (1.0, 2.0)]))
            .with(Series::points("b", RED, Mark::Cross, vec![(0.5, 1.0)]))
            .render();
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains(RED));
    }

    #[test]
    fn degenerate_data_still_renders() {
        let svg = Plot::new("t", "x", "y").with(Series::line("a", BLUE, vec![(1.0, 1.0)])).render();
        assert!(!svg.contains("NaN"));
        let svg = Plot::new("t", "x", "y").log_y().with(Series::line("a", BLUE, vec![(0.0, -1.0), (1.0, 0.0)])).render();
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn ticks_are_round() {
        assert_eq!(tick_step(0.0, 10.0, 5.0), 2.0);
        assert_eq!(tick_step(0.0, 1000.0, 6.0), 200.0);
        assert_eq!(fmt_tick(0.30000000000000004, 0.1), "0.3");
    }
}
