//! Standalone SVG line plots with fixed formatting, so identical data give identical bytes.

use std::fmt::Write;

use throwcatch::{Error, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 450.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = ["#1f5fa8", "#c0392b", "#2e8b57", "#8e44ad", "#d68910", "#17a589", "#7f8c8d", "#34495e"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, x: &[f64], y: &[f64]) -> Self {
        Series { label: label.into(), points: x.iter().copied().zip(y.iter().copied()).collect() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

/// Axis range and tick spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f <= 1.0 {
        1.0
    } else if f <= 2.0 {
        2.0
    } else if f <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

impl Axis {
    /// Covers [lo, hi] with round tick values; a zero-width range is widened around its value.
    pub fn covering(lo: f64, hi: f64) -> Axis {
        let (lo, hi) = if hi > lo {
            (lo, hi)
        } else {
            let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
            (lo - pad, hi + pad)
        };
        let step = nice_step(hi - lo);
        Axis { min: (lo / step).floor() * step, max: (hi / step).ceil() * step, step }
    }

    pub fn ticks(&self) -> Vec<f64> {
        let n = ((self.max - self.min) / self.step).round() as i64;
        (0..=n).map(|k| self.min + k as f64 * self.step).collect()
    }

    fn label(&self, v: f64) -> String {
        let v = if v.abs() < 1e-9 * self.step { 0.0 } else { v };
        let scale = self.min.abs().max(self.max.abs());
        if !(1e-3..1e5).contains(&scale) {
            format!("{v:.2e}")
        } else {
            let decimals = (-self.step.log10().floor()).max(0.0) as usize;
            format!("{v:.decimals$}")
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

impl Plot {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Plot { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), series: Vec::new() }
    }

    pub fn with(mut self, series: Series) -> Self {
        self.series.push(series);
        self
    }

    fn check(&self) -> Result<()> {
        if self.series.is_empty() {
            return Err(Error::domain(format!("plot {:?} has no series", self.title)));
        }
        for s in &self.series {
            if s.points.is_empty() {
                return Err(Error::domain(format!("series {:?} has no points", s.label)));
            }
            if let Some((x, y)) = s.points.iter().find(|(x, y)| !(x.is_finite() && y.is_finite())) {
                return Err(Error::domain(format!("series {:?} contains a non-finite point ({x}, {y})", s.label)));
            }
        }
        Ok(())
    }

    pub fn axes(&self) -> Result<(Axis, Axis)> {
        self.check()?;
        let pts = self.series.iter().flat_map(|s| s.points.iter());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        Ok((Axis::covering(x0, x1), Axis::covering(y0, y1)))
    }

    pub fn render(&self) -> Result<String> {
        let (ax, ay) = self.axes()?;
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - ax.min) / (ax.max - ax.min) * pw;
        let sy = |y: f64| TOP + ph - (y - ay.min) / (ay.max - ay.min) * ph;
        let mut o = String::new();
        let _ = writeln!(
            o,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(o, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            o,
            r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );
        for t in ax.ticks() {
            let x = sx(t);
            let _ =
                writeln!(o, r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#e5e5e5"/>"##, TOP + ph);
            let _ = writeln!(
                o,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                TOP + ph + 18.0,
                ax.label(t)
            );
        }
        for t in ay.ticks() {
            let y = sy(t);
            let _ =
                writeln!(o, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e5e5e5"/>"##, LEFT + pw);
            let _ = writeln!(
                o,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                y + 4.0,
                ay.label(t)
            );
        }
        let _ = writeln!(o, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        let _ = writeln!(
            o,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 16.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            o,
            r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );
        for (i, s) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let mut path = String::new();
            for (k, &(x, y)) in s.points.iter().enumerate() {
                let _ = write!(path, "{}{:.2},{:.2}", if k == 0 { "" } else { " " }, sx(x), sy(y));
            }
            let _ = writeln!(o, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{path}"/>"#);
            let ly = TOP + 16.0 + 16.0 * i as f64;
            let lx = LEFT + pw - 150.0;
            let _ = writeln!(
                o,
                r#"<line x1="{lx:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{color}" stroke-width="2"/>"#,
                ly - 4.0,
                lx + 20.0,
                ly - 4.0
            );
            let _ = writeln!(o, r#"<text x="{:.1}" y="{ly:.1}">{}</text>"#, lx + 26.0, escape(&s.label));
        }
        o.push_str("</svg>\n");
        Ok(o)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_line_bounds() {
        let p = Plot::new("flat", "x", "y").with(Series::new("c", &[0.0, 10.0], &[2.0, 2.0]));
        let (ax, ay) = p.axes().unwrap();
        assert_eq!((ax.min, ax.max), (0.0, 10.0));
        assert!(ay.min < 2.0 && ay.max > 2.0);
        assert!(((ay.min + ay.max) / 2.0 - 2.0).abs() < 1e-12);
        assert!(p.render().unwrap().contains("<polyline"));
    }

    #[test]
    fn nan_names_the_series() {
        let p = Plot::new("t", "x", "y").with(Series::new("good", &[0.0, 1.0], &[0.0, 1.0])).with(Series::new(
            "broken",
            &[0.0, 1.0],
            &[f64::NAN, 1.0],
        ));
        let e = p.render().unwrap_err().to_string();
        assert!(e.contains("broken"), "{e}");
    }

    #[test]
    fn empty_plot_is_an_error() {
        assert!(Plot::new("t", "x", "y").render().is_err());
        assert!(Plot::new("t", "x", "y").with(Series::new("e", &[], &[])).render().is_err());
    }

    #[test]
    fn ticks_are_round() {
        let a = Axis::covering(0.013, 0.97);
        assert_eq!(a.step, 0.2);
        assert_eq!(a.min, 0.0);
        assert!((a.max - 1.0).abs() < 1e-12);
        assert_eq!(a.label(0.6000000000000001), "0.6");
    }

    #[test]
    fn text_is_escaped() {
        let p = Plot::new("a < b & c", "x", "y").with(Series::new("<q>", &[0.0, 1.0], &[0.0, 1.0]));
        let s = p.render().unwrap();
        assert!(s.contains("a &lt; b &amp; c") && s.contains("&lt;q&gt;"));
    }
}
