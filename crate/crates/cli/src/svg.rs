//! Minimal SVG figures: line plots and a saliency heat strip over frequency.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const PLOT_LEFT: f64 = 64.0;
const PLOT_RIGHT: f64 = 704.0;

pub struct Series<'a> {
    pub name: &'a str,
    pub color: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn finite_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

struct Frame {
    top: f64,
    bottom: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        PLOT_LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (PLOT_RIGHT - PLOT_LEFT)
    }

    fn py(&self, y: f64) -> f64 {
        let y = y.clamp(self.y.0, self.y.1);
        self.bottom - (y - self.y.0) / (self.y.1 - self.y.0) * (self.bottom - self.top)
    }

    fn axes(&self, out: &mut String, xlabel: &str, ylabel: &str) {
        let _ = write!(
            out,
            r##"<rect x="{l}" y="{t}" width="{w}" height="{h}" fill="none" stroke="#444"/>"##,
            l = PLOT_LEFT,
            t = self.top,
            w = PLOT_RIGHT - PLOT_LEFT,
            h = self.bottom - self.top
        );
        for i in 0..=4 {
            let fx = self.x.0 + (self.x.1 - self.x.0) * i as f64 / 4.0;
            let fy = self.y.0 + (self.y.1 - self.y.0) * i as f64 / 4.0;
            let _ = write!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"#,
                self.px(fx),
                self.bottom + 14.0,
                tick(fx)
            );
            let _ = write!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{}</text>"#,
                PLOT_LEFT - 4.0,
                self.py(fy) + 3.0,
                tick(fy)
            );
        }
        let _ = write!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
            (PLOT_LEFT + PLOT_RIGHT) / 2.0,
            self.bottom + 30.0,
            escape(xlabel)
        );
        let _ = write!(
            out,
            r#"<text x="14" y="{:.1}" font-size="11" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
            (self.top + self.bottom) / 2.0,
            (self.top + self.bottom) / 2.0,
            escape(ylabel)
        );
    }

    fn polyline(&self, out: &mut String, s: &Series<'_>) {
        let pts: Vec<String> = s
            .x
            .iter()
            .zip(s.y)
            .filter(|(_, y)| y.is_finite())
            .map(|(&x, &y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
            .collect();
        let _ = write!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.2" points="{}"/>"#,
            escape(s.color),
            pts.join(" ")
        );
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

fn header(out: &mut String, height: f64, title: &str) {
    let _ = write!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?><svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif"><rect width="100%" height="100%" fill="white"/><text x="{:.1}" y="20" font-size="14" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn legend(out: &mut String, series: &[Series<'_>], top: f64) {
    for (i, s) in series.iter().enumerate() {
        let y = top + 12.0 + 14.0 * i as f64;
        let _ = write!(
            out,
            r#"<line x1="{a:.1}" y1="{y:.1}" x2="{b:.1}" y2="{y:.1}" stroke="{c}" stroke-width="2"/><text x="{t:.1}" y="{ty:.1}" font-size="10">{n}</text>"#,
            a = PLOT_RIGHT - 150.0,
            b = PLOT_RIGHT - 130.0,
            c = escape(s.color),
            t = PLOT_RIGHT - 125.0,
            ty = y + 3.0,
            n = escape(s.name)
        );
    }
}

/// Overlaid line plot.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series<'_>], y_range: Option<(f64, f64)>) -> String {
    let mut out = String::new();
    header(&mut out, 360.0, title);
    let x = finite_range(series.iter().flat_map(|s| s.x.iter().copied()));
    let y = y_range.unwrap_or_else(|| finite_range(series.iter().flat_map(|s| s.y.iter().copied())));
    let frame = Frame { top: 36.0, bottom: 310.0, x, y };
    frame.axes(&mut out, xlabel, ylabel);
    for s in series {
        frame.polyline(&mut out, s);
    }
    legend(&mut out, series, frame.top);
    out.push_str("</svg>\n");
    out
}

fn heat_color(v: f64) -> String {
    // white -> dark red
    let v = v.clamp(0.0, 1.0);
    let g = (255.0 * (1.0 - v)).round() as u8;
    let r = (255.0 - 100.0 * v).round() as u8;
    format!("rgb({r},{g},{g})")
}

/// Saliency as a heat strip over frequency, above the normalized magnitude
/// spectrum with the normalized saliency overlaid.
pub fn spectrum_heatmap(title: &str, freqs: &[f64], magnitude: &[f64], saliency: &[f64], truth: Option<&[bool]>) -> String {
    let mut out = String::new();
    header(&mut out, 420.0, title);
    let x = finite_range(freqs.iter().copied());
    let strip = Frame { top: 36.0, bottom: 76.0, x, y: (0.0, 1.0) };
    let smax = saliency.iter().copied().fold(0.0, f64::max);
    let step = if freqs.len() > 1 { (x.1 - x.0) / (freqs.len() - 1) as f64 } else { 1.0 };
    for (f, s) in freqs.iter().zip(saliency) {
        let v = if smax > 0.0 { s / smax } else { 0.0 };
        let x0 = strip.px(f - step / 2.0).max(PLOT_LEFT);
        let x1 = strip.px(f + step / 2.0).min(PLOT_RIGHT);
        let _ = write!(
            out,
            r#"<rect x="{x0:.2}" y="{:.1}" width="{:.2}" height="{:.1}" fill="{}"/>"#,
            strip.top,
            (x1 - x0).max(0.0),
            strip.bottom - strip.top,
            heat_color(v)
        );
    }
    let _ = write!(
        out,
        r##"<rect x="{PLOT_LEFT}" y="{}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        strip.top,
        PLOT_RIGHT - PLOT_LEFT,
        strip.bottom - strip.top
    );

    let plot = Frame { top: 96.0, bottom: 370.0, x, y: (0.0, 1.05) };
    if let Some(gt) = truth {
        for (f, &g) in freqs.iter().zip(gt) {
            if g {
                let x0 = plot.px(f - step / 2.0).max(PLOT_LEFT);
                let x1 = plot.px(f + step / 2.0).min(PLOT_RIGHT);
                let _ = write!(
                    out,
                    r##"<rect x="{x0:.2}" y="{:.1}" width="{:.2}" height="{:.1}" fill="#cde6cd"/>"##,
                    plot.top,
                    (x1 - x0).max(0.0),
                    plot.bottom - plot.top
                );
            }
        }
    }
    plot.axes(&mut out, "frequency (Hz)", "normalized value");
    let norm = |v: &[f64]| {
        let m = v.iter().copied().fold(0.0, f64::max);
        v.iter().map(|x| if m > 0.0 { x / m } else { 0.0 }).collect::<Vec<f64>>()
    };
    let mag = norm(magnitude);
    let sal = norm(saliency);
    let series = [
        Series { name: "magnitude", color: "#7a7a7a", x: freqs, y: &mag },
        Series { name: "saliency", color: "#c0392b", x: freqs, y: &sal },
    ];
    for s in &series {
        plot.polyline(&mut out, s);
    }
    legend(&mut out, &series, plot.top);
    out.push_str("</svg>\n");
    out
}
