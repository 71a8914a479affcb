// SPDX-License-Identifier: MIT OR Apache-2.0

//! Minimal static SVG line charts. Output depends only on the inputs.

use std::fmt::Write as _;

const PANEL_W: f64 = 440.0;
const PANEL_H: f64 = 300.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 120.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 45.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

#[derive(Clone, Debug, Default)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct VLine {
    pub x: f64,
    pub label: String,
    pub dashed: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub vlines: Vec<VLine>,
    /// Fixed y range; otherwise fitted to the data.
    pub y_range: Option<(f64, f64)>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn tick(v: f64, span: f64) -> String {
    if span >= 20.0 {
        format!("{v:.0}")
    } else if span >= 2.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.2}")
    }
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn panel(out: &mut String, chart: &Chart, ox: f64, oy: f64) {
    let w = PANEL_W - LEFT - RIGHT;
    let h = PANEL_H - TOP - BOTTOM;
    let (x0, x1) = extent(
        chart
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.0))
            .chain(chart.vlines.iter().map(|v| v.x)),
    );
    let (y0, y1) = chart.y_range.unwrap_or_else(|| {
        extent(
            chart
                .series
                .iter()
                .flat_map(|s| s.points.iter().map(|p| p.1)),
        )
    });
    let sx = |x: f64| ox + LEFT + (x - x0) / (x1 - x0) * w;
    let sy = |y: f64| oy + TOP + h - (y - y0) / (y1 - y0) * h;

    let _ = writeln!(
        out,
        r##"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-weight="bold">{}</text>"##,
        ox + LEFT + w / 2.0,
        oy + TOP - 10.0,
        esc(&chart.title)
    );
    let _ = writeln!(
        out,
        r##"<rect x="{:.1}" y="{:.1}" width="{w:.1}" height="{h:.1}" fill="none" stroke="#444"/>"##,
        ox + LEFT,
        oy + TOP
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(
            out,
            r##"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="10">{}</text>"##,
            sx(xv),
            oy + TOP + h + 14.0,
            tick(xv, x1 - x0)
        );
        let _ = writeln!(
            out,
            r##"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="10">{}</text>"##,
            ox + LEFT - 4.0,
            sy(yv) + 3.0,
            tick(yv, y1 - y0)
        );
    }
    let _ = writeln!(
        out,
        r##"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"##,
        ox + LEFT + w / 2.0,
        oy + PANEL_H - 12.0,
        esc(&chart.x_label)
    );
    let _ = writeln!(
        out,
        r##"<text transform="translate({:.1},{:.1}) rotate(-90)" text-anchor="middle" font-size="11">{}</text>"##,
        ox + 16.0,
        oy + TOP + h / 2.0,
        esc(&chart.y_label)
    );
    for v in &chart.vlines {
        let dash = if v.dashed {
            r#" stroke-dasharray="4 3""#
        } else {
            ""
        };
        let _ = writeln!(
            out,
            r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#555"{dash}/><text x="{:.1}" y="{:.1}" font-size="10">{}</text>"##,
            oy + TOP,
            oy + TOP + h,
            sx(v.x) + 2.0,
            oy + TOP + 10.0,
            esc(&v.label),
            x = sx(v.x),
        );
    }
    for (i, s) in chart.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            r##"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"##,
            pts.join(" ")
        );
        for p in &pts {
            let (x, y) = p.split_once(',').expect("formatted as x,y");
            let _ = writeln!(
                out,
                r##"<circle cx="{x}" cy="{y}" r="2.5" fill="{color}"/>"##
            );
        }
        let ly = oy + TOP + 12.0 + 16.0 * i as f64;
        let lx = ox + LEFT + w + 10.0;
        let _ = writeln!(
            out,
            r##"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}" font-size="11">{}</text>"##,
            lx + 16.0,
            lx + 20.0,
            ly + 4.0,
            esc(&s.label)
        );
    }
}

/// Lays `charts` out on a grid with `columns` panels per row.
pub fn render(charts: &[Chart], columns: usize) -> String {
    let columns = columns.max(1);
    let rows = charts.len().div_ceil(columns).max(1);
    let (width, height) = (
        PANEL_W * columns.min(charts.len().max(1)) as f64,
        PANEL_H * rows as f64,
    );
    let mut out = format!(
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">
<rect width="100%" height="100%" fill="white"/>
"##
    );
    for (i, c) in charts.iter().enumerate() {
        panel(
            &mut out,
            c,
            PANEL_W * (i % columns) as f64,
            PANEL_H * (i / columns) as f64,
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart() -> Chart {
        Chart {
            title: "a <b>".into(),
            series: vec![
                Series {
                    label: "cpd".into(),
                    points: vec![(0.0, 1.0), (1.0, 2.0), (2.0, 0.5)],
                },
                Series {
                    label: "bce".into(),
                    points: vec![(0.0, 0.0), (3.0, 1.0)],
                },
            ],
            ..Chart::default()
        }
    }

    #[test]
    fn one_polyline_per_series_and_a_point_per_vertex() {
        let svg = render(&[chart()], 1);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<circle").count(), 5);
        assert!(svg.contains("a &lt;b&gt;"));
        assert_eq!(svg, render(&[chart()], 1));
    }
}
