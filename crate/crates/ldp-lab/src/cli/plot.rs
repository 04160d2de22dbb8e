//! Native log-log scatter plots as standalone SVG, no plotting runtime.

use std::fmt::Write as _;

use crate::harness::PowerFit;

/// One plotted series: a name for the legend, raw `(x, y)` points, and an
/// optional log2-log2 least-squares fit drawn dashed.
#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub fit: Option<PowerFit>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;

const PALETTE: [&str; 5] = ["#1f5fa8", "#c24d2c", "#2e7d4f", "#7b4aa0", "#b58900"];

fn nice_log_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let lo_e = lo.floor() as i64;
    let hi_e = hi.ceil() as i64;
    let span = (hi_e - lo_e).max(1);
    let step = ((span as f64 / 8.0).ceil() as i64).max(1);
    (lo_e..=hi_e).step_by(step as usize).map(|e| e as f64).collect()
}

fn fmt_pow2(e: f64) -> String {
    let v = 2f64.powf(e);
    if v >= 1.0 && v < 1e6 && (v.round() - v).abs() < 1e-9 {
        format!("{}", v.round() as u64)
    } else {
        format!("2^{e}")
    }
}

/// Renders a log2-log2 scatter plot of every series. Points must be
/// strictly positive in both coordinates.
pub fn render_loglog_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for s in series {
        for &(x, y) in &s.points {
            xs.push(x.log2());
            ys.push(y.log2());
        }
    }
    let (x_min, x_max) = bounds(&xs);
    let (y_min, y_max) = bounds(&ys);
    let pad = 0.4;
    let (x_min, x_max) = (x_min - pad, x_max + pad);
    let (y_min, y_max) = (y_min - pad, y_max + pad);

    let px = |lx: f64| MARGIN_L + (lx - x_min) / (x_max - x_min) * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |ly: f64| HEIGHT - MARGIN_B - (ly - y_min) / (y_max - y_min) * (HEIGHT - MARGIN_T - MARGIN_B);

    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    svg.push_str(r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = write!(
        svg,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );

    for e in nice_log_ticks(x_min, x_max) {
        if e < x_min || e > x_max {
            continue;
        }
        let x = px(e);
        let _ = write!(
            svg,
            r##"<line x1="{x:.1}" y1="{}" x2="{x:.1}" y2="{}" stroke="#ddd"/>"##,
            MARGIN_T,
            HEIGHT - MARGIN_B
        );
        let _ = write!(
            svg,
            r#"<text x="{x:.1}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            HEIGHT - MARGIN_B + 16.0,
            fmt_pow2(e)
        );
    }
    for e in nice_log_ticks(y_min, y_max) {
        if e < y_min || e > y_max {
            continue;
        }
        let y = py(e);
        let _ = write!(
            svg,
            r##"<line x1="{}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="#ddd"/>"##,
            MARGIN_L,
            WIDTH - MARGIN_R
        );
        let _ = write!(
            svg,
            r#"<text x="{}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            MARGIN_L - 6.0,
            y + 4.0,
            fmt_pow2(e)
        );
    }

    let _ = write!(
        svg,
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#333"/>"##,
        MARGIN_L,
        MARGIN_T,
        WIDTH - MARGIN_L - MARGIN_R,
        HEIGHT - MARGIN_T - MARGIN_B
    );
    let _ = write!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        MARGIN_L + (WIDTH - MARGIN_L - MARGIN_R) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = write!(
        svg,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        MARGIN_T + (HEIGHT - MARGIN_T - MARGIN_B) / 2.0,
        MARGIN_T + (HEIGHT - MARGIN_T - MARGIN_B) / 2.0,
        escape(y_label)
    );

    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        if let Some(fit) = &s.fit {
            let lx0 = s
                .points
                .iter()
                .map(|p| p.0.log2())
                .fold(f64::INFINITY, f64::min);
            let lx1 = s
                .points
                .iter()
                .map(|p| p.0.log2())
                .fold(f64::NEG_INFINITY, f64::max);
            let (lx0, lx1) = (lx0 - 0.2, lx1 + 0.2);
            let ly0 = fit.intercept + fit.slope * lx0;
            let ly1 = fit.intercept + fit.slope * lx1;
            let _ = write!(
                svg,
                r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{color}" stroke-dasharray="6 4" stroke-width="1.5"/>"#,
                px(lx0),
                py(ly0),
                px(lx1),
                py(ly1)
            );
        }
        for &(x, y) in &s.points {
            let _ = write!(
                svg,
                r#"<circle cx="{:.1}" cy="{:.1}" r="4" fill="{color}"/>"#,
                px(x.log2()),
                py(y.log2())
            );
        }
        let legend_y = MARGIN_T + 16.0 + 18.0 * si as f64;
        let label = match &s.fit {
            Some(fit) => format!("{} (slope {:.2}, R2 {:.3})", s.name, fit.slope, fit.r2),
            None => s.name.clone(),
        };
        let _ = write!(
            svg,
            r#"<circle cx="{}" cy="{:.1}" r="4" fill="{color}"/><text x="{}" y="{:.1}" font-family="sans-serif" font-size="12">{}</text>"#,
            MARGIN_L + 12.0,
            legend_y - 4.0,
            MARGIN_L + 22.0,
            legend_y,
            escape(&label)
        );
    }

    svg.push_str("</svg>\n");
    svg
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() && hi.is_finite() {
        if lo == hi {
            (lo - 1.0, hi + 1.0)
        } else {
            (lo, hi)
        }
    } else {
        (0.0, 1.0)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_contains_points_fit_and_slope_annotation() {
        let series = [Series {
            name: "maxsense".into(),
            points: vec![(100.0, 2.9e5), (200.0, 1.3e6), (400.0, 6.2e6)],
            fit: Some(PowerFit {
                slope: 2.21,
                intercept: 3.0,
                r2: 0.999,
            }),
        }];
        let svg = render_loglog_svg("scaling", "N", "U*", &series);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.contains("slope 2.21"));
        assert!(svg.contains("stroke-dasharray"));
        assert_eq!(svg.matches("<circle").count(), 4, "3 points + legend dot");
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn degenerate_single_point_still_renders() {
        let series = [Series {
            name: "one".into(),
            points: vec![(64.0, 1000.0)],
            fit: None,
        }];
        let svg = render_loglog_svg("t", "x", "y", &series);
        assert!(svg.contains("<circle"));
        assert!(!svg.contains("NaN"));
        assert!(!svg.contains("inf"));
    }
}
