//! Plain SVG line plots and a polar heatmap. Data figures, not styled art.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

/// One named polyline.
#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            points,
        }
    }
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Line plot of several series on shared axes.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (x0, x1) = extent(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = extent(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let py = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<path d="M{m} {t} V{b} H{r}" fill="none" stroke="black"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN
    );
    for (v, anchor_x, anchor_y) in [
        (x0, px(x0), H - MARGIN + 15.0),
        (x1, px(x1), H - MARGIN + 15.0),
    ] {
        let _ = writeln!(
            s,
            r#"<text x="{anchor_x:.1}" y="{anchor_y:.1}" text-anchor="middle">{v:.4}</text>"#
        );
    }
    for v in [y0, y1] {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.4}</text>"#,
            MARGIN - 4.0,
            py(v) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    for (k, ser) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut d = String::new();
        let mut pen_up = true;
        for &(x, y) in &ser.points {
            if !(x.is_finite() && y.is_finite()) {
                pen_up = true;
                continue;
            }
            let _ = write!(
                d,
                "{}{:.2} {:.2} ",
                if pen_up { "M" } else { "L" },
                px(x),
                py(y)
            );
            pen_up = false;
        }
        let _ = writeln!(
            s,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            d.trim_end()
        );
        let ly = MARGIN + 14.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{ly:.1}" fill="{color}" text-anchor="end">{}</text>"#,
            W - MARGIN,
            escape(&ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Map `t` in `[0, 1]` to a white-to-dark-red ramp.
fn heat(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = 255.0 - 80.0 * t;
    let g = 255.0 * (1.0 - t);
    let b = 255.0 * (1.0 - t);
    format!("#{:02x}{:02x}{:02x}", r as u8, g as u8, b as u8)
}

/// Ring of sectors around a circle, one per sensor, shaded by `values`.
/// `angles[j]` is the sensor's position in radians, measured in the usual
/// mathematical sense.
pub fn polar_heatmap(title: &str, angles: &[f64], values: &[f64]) -> String {
    let (cx, cy) = (W / 2.0, H / 2.0 + 10.0);
    let (r_in, r_out) = (90.0, 150.0);
    let (lo, hi) = extent(values.iter().copied());
    let n = angles.len().max(1);
    let half = std::f64::consts::PI / n as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let pt = |r: f64, a: f64| (cx + r * a.cos(), cy - r * a.sin());
    for (&a, &v) in angles.iter().zip(values) {
        let (a0, a1) = (a - half, a + half);
        let p = [pt(r_in, a0), pt(r_out, a0), pt(r_out, a1), pt(r_in, a1)];
        let _ = writeln!(
            s,
            r#"<path d="M{:.2} {:.2} L{:.2} {:.2} A{r_out} {r_out} 0 0 0 {:.2} {:.2} L{:.2} {:.2} A{r_in} {r_in} 0 0 1 {:.2} {:.2} Z" fill="{}"/>"#,
            p[0].0,
            p[0].1,
            p[1].0,
            p[1].1,
            p[2].0,
            p[2].1,
            p[3].0,
            p[3].1,
            p[0].0,
            p[0].1,
            heat((v - lo) / (hi - lo))
        );
    }
    let _ = writeln!(
        s,
        r#"<circle cx="{cx}" cy="{cy}" r="{r_in}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="end">flow &#8594;</text>"#,
        cx - r_out - 10.0,
        cy + 4.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">min {lo:.3e}  max {hi:.3e}</text>"#,
        W / 2.0,
        H - 10.0
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_plot_draws_one_path_per_series() {
        let svg = line_plot(
            "t",
            "x",
            "y",
            &[
                Series::new("a", vec![(0.0, 1.0), (1.0, 2.0)]),
                Series::new("b<c", vec![(0.0, f64::NAN), (1.0, 0.0)]),
            ],
        );
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<path").count(), 3);
        assert!(svg.contains("b&lt;c"));
    }

    #[test]
    fn polar_heatmap_has_a_sector_per_value() {
        let n = 200;
        let angles: Vec<f64> = (0..n).map(|j| j as f64 * 0.0314).collect();
        let values: Vec<f64> = (0..n).map(|j| j as f64).collect();
        let svg = polar_heatmap("s", &angles, &values);
        assert_eq!(svg.matches("<path").count(), n);
    }
}
