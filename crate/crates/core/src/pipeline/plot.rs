//! Minimal static SVG line chart of certified bits per round against μ.

use std::fmt::Write;

pub struct Series<'a> {
    pub name: &'a str,
    pub color: &'a str,
    /// `(mu, h)`; NaN values leave a gap.
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;

fn nice_ceil(v: f64) -> f64 {
    if v <= 0.0 {
        return 1.0;
    }
    let step = 0.2;
    (v / step).ceil() * step
}

pub fn line_chart(series: &[Series]) -> String {
    let finite = || series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let x_max = finite().map(|p| p.0).fold(0.0f64, f64::max).max(1e-9);
    let x_min = finite().map(|p| p.0).fold(x_max, f64::min).min(x_max);
    let x_span = if x_max > x_min { x_max - x_min } else { 1.0 };
    let y_max = nice_ceil(finite().map(|p| p.1).fold(0.0f64, f64::max));
    let px = |x: f64| MARGIN + (x - x_min) / x_span * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - y / y_max * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
    let _ = writeln!(svg, r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" stroke="black" fill="none"/>"#);
    for k in 0..=5 {
        let y = y_max * k as f64 / 5.0;
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{y:.2}</text>"#, x0 - 6.0, py(y) + 4.0);
        let x = x_min + x_span * k as f64 / 5.0;
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x:.2}</text>"#, px(x), y0 + 18.0);
    }
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">mean photon number μ</text>"#, WIDTH / 2.0, HEIGHT - 16.0);
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">certified bits per round</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (k, s) in series.iter().enumerate() {
        let mut d = String::new();
        let mut pen_up = true;
        for &(x, y) in &s.points {
            if !(x.is_finite() && y.is_finite()) {
                pen_up = true;
                continue;
            }
            let _ = write!(d, "{}{:.2} {:.2} ", if pen_up { "M" } else { "L" }, px(x), py(y));
            pen_up = false;
        }
        let _ = writeln!(svg, r#"<path d="{}" stroke="{}" stroke-width="2" fill="none"/>"#, d.trim_end(), s.color);
        for &(x, y) in s.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#, px(x), py(y), s.color);
        }
        let ly = y1 + 14.0 + 16.0 * k as f64;
        let _ = writeln!(svg, r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="2"/>"#, x1 - 110.0, x1 - 90.0, s.color);
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, x1 - 84.0, ly + 4.0, s.name);
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaps_split_the_path() {
        let s = Series { name: "q", color: "red", points: vec![(0.0, 0.1), (1.0, f64::NAN), (2.0, 0.3)] };
        let svg = line_chart(&[s]);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<circle").count(), 2);
        let path = svg.lines().find(|l| l.starts_with("<path") && l.contains("red")).unwrap();
        assert_eq!(path.matches('M').count(), 2);
    }
}
