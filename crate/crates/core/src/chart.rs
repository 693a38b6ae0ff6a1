//! Deterministic SVG line charts for rate and mean-age series.
//!
//! Output is plain SVG 1.1 with no external references. Identical input
//! yields byte-identical output: coordinates are printed at fixed precision,
//! colors are assigned by series position in a fixed palette, and nothing
//! depends on time, locale, or environment.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::types::RateSeries;

/// Display unit for the y axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YUnit {
    /// Deaths per 100,000 person-years (values scaled by 1e5 for display).
    Per100k,
    /// Raw rate fraction.
    Fraction,
    /// Years (mean-age charts).
    Years,
}

impl YUnit {
    fn scale(self) -> f64 {
        match self {
            YUnit::Per100k => 100_000.0,
            YUnit::Fraction | YUnit::Years => 1.0,
        }
    }

    fn label(self) -> &'static str {
        match self {
            YUnit::Per100k => "deaths per 100,000",
            YUnit::Fraction => "rate (fraction)",
            YUnit::Years => "years",
        }
    }
}

/// One plotted line: a label and (year, value) points in year order.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartSeries {
    pub label: String,
    pub points: Vec<(i32, f64)>,
}

impl ChartSeries {
    pub fn new(label: impl Into<String>, points: Vec<(i32, f64)>) -> Self {
        ChartSeries {
            label: label.into(),
            points,
        }
    }

    pub fn from_rate_series(label: impl Into<String>, series: &RateSeries) -> Self {
        ChartSeries {
            label: label.into(),
            points: series.iter().collect(),
        }
    }
}

/// Everything needed to render one chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartSpec {
    pub title: String,
    pub series: Vec<ChartSeries>,
    pub y_unit: YUnit,
    pub width: u32,
    pub height: u32,
}

impl ChartSpec {
    pub fn new(title: impl Into<String>, y_unit: YUnit) -> Self {
        ChartSpec {
            title: title.into(),
            series: Vec::new(),
            y_unit,
            width: 640,
            height: 400,
        }
    }

    pub fn push(&mut self, series: ChartSeries) {
        self.series.push(series);
    }
}

// Tableau 10; series take colors in input order, wrapping past ten.
const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac",
];

const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 168.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 48.0;

fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(ch),
        }
    }
    out
}

fn fmt_coord(v: f64) -> String {
    format!("{v:.2}")
}

/// Largest of 1, 2, 5 x 10^k not exceeding `raw`; used for tick spacing.
fn nice_step(raw: f64) -> f64 {
    if raw <= 0.0 || !raw.is_finite() {
        return 1.0;
    }
    let exp = raw.log10().floor();
    let magnitude = 10f64.powf(exp);
    let mantissa = raw / magnitude;
    let nice = if mantissa >= 5.0 {
        5.0
    } else if mantissa >= 2.0 {
        2.0
    } else {
        1.0
    };
    nice * magnitude
}

fn y_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step((hi - lo) / 4.0);
    let mut ticks = Vec::new();
    let mut tick = (lo / step).ceil() * step;
    while tick <= hi + step * 1e-9 {
        ticks.push(tick);
        tick += step;
    }
    ticks
}

fn fmt_tick(v: f64, step: f64) -> String {
    // enough decimals to separate adjacent ticks, capped for readability
    let decimals = if step >= 1.0 {
        0
    } else {
        (-step.log10().floor() as i32).clamp(0, 8) as usize
    };
    format!("{v:.decimals$}")
}

/// Render a chart spec to a standalone SVG 1.1 document.
///
/// Requires at least one series; all series must share the same year
/// domain. A zero-range y axis is padded, never divided by.
pub fn render_svg(spec: &ChartSpec) -> Result<String> {
    if spec.series.is_empty() {
        return Err(Error::Chart("chart needs at least one series".to_string()));
    }
    let domain: Vec<i32> = spec.series[0].points.iter().map(|&(y, _)| y).collect();
    if domain.is_empty() {
        return Err(Error::Chart("series have no points".to_string()));
    }
    for series in &spec.series[1..] {
        let this: Vec<i32> = series.points.iter().map(|&(y, _)| y).collect();
        if this != domain {
            return Err(Error::Chart(format!(
                "series `{}` does not share the chart's year domain",
                series.label
            )));
        }
    }

    let scale = spec.y_unit.scale();
    let x_lo = *domain.first().unwrap() as f64;
    let x_hi = *domain.last().unwrap() as f64;
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for series in &spec.series {
        for &(_, v) in &series.points {
            let v = v * scale;
            y_lo = y_lo.min(v);
            y_hi = y_hi.max(v);
        }
    }
    if !(y_lo.is_finite() && y_hi.is_finite()) {
        return Err(Error::Chart("non-finite values".to_string()));
    }
    if y_hi - y_lo <= f64::EPSILON * y_hi.abs().max(1.0) {
        // flat series: pad so the line sits mid-chart
        let pad = if y_hi == 0.0 { 1.0 } else { y_hi.abs() * 0.1 };
        y_lo -= pad;
        y_hi += pad;
    } else {
        let pad = (y_hi - y_lo) * 0.05;
        y_lo -= pad;
        y_hi += pad;
    }

    let width = spec.width as f64;
    let height = spec.height as f64;
    let plot_w = width - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = height - MARGIN_TOP - MARGIN_BOTTOM;
    let x_of = |year: f64| {
        if x_hi > x_lo {
            MARGIN_LEFT + (year - x_lo) / (x_hi - x_lo) * plot_w
        } else {
            MARGIN_LEFT + plot_w / 2.0
        }
    };
    let y_of = |v: f64| MARGIN_TOP + (y_hi - v) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        spec.width, spec.height, spec.width, spec.height
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{}" height="{}" fill="white"/>"#,
        spec.width, spec.height
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        fmt_coord(MARGIN_LEFT + plot_w / 2.0),
        escape_xml(&spec.title)
    );

    // y grid, ticks, labels
    let step = nice_step((y_hi - y_lo) / 4.0);
    for tick in y_ticks(y_lo, y_hi) {
        let y = y_of(tick);
        let _ = writeln!(
            svg,
            r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#dddddd" stroke-width="1"/>"##,
            fmt_coord(MARGIN_LEFT),
            fmt_coord(y),
            fmt_coord(MARGIN_LEFT + plot_w),
            fmt_coord(y)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            fmt_coord(MARGIN_LEFT - 8.0),
            fmt_coord(y + 4.0),
            fmt_tick(tick, step)
        );
    }

    // x ticks on integer years
    let year_span = (x_hi - x_lo).max(1.0);
    let x_step = nice_step(year_span / 6.0).max(1.0);
    let mut year = (x_lo / x_step).ceil() * x_step;
    while year <= x_hi + 1e-9 {
        let x = x_of(year);
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black" stroke-width="1"/>"#,
            fmt_coord(x),
            fmt_coord(MARGIN_TOP + plot_h),
            fmt_coord(x),
            fmt_coord(MARGIN_TOP + plot_h + 5.0)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            fmt_coord(x),
            fmt_coord(MARGIN_TOP + plot_h + 20.0),
            year as i64
        );
        year += x_step;
    }

    // axes
    let _ = writeln!(
        svg,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black" stroke-width="1"/>"#,
        fmt_coord(MARGIN_LEFT),
        fmt_coord(MARGIN_TOP),
        fmt_coord(MARGIN_LEFT),
        fmt_coord(MARGIN_TOP + plot_h)
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black" stroke-width="1"/>"#,
        fmt_coord(MARGIN_LEFT),
        fmt_coord(MARGIN_TOP + plot_h),
        fmt_coord(MARGIN_LEFT + plot_w),
        fmt_coord(MARGIN_TOP + plot_h)
    );
    // axis labels
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">year</text>"#,
        fmt_coord(MARGIN_LEFT + plot_w / 2.0),
        fmt_coord(height - 10.0)
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        fmt_coord(MARGIN_TOP + plot_h / 2.0),
        fmt_coord(MARGIN_TOP + plot_h / 2.0),
        spec.y_unit.label()
    );

    // series lines, point markers, legend
    for (idx, series) in spec.series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let coords: Vec<String> = series
            .points
            .iter()
            .map(|&(year, v)| {
                format!(
                    "{},{}",
                    fmt_coord(x_of(year as f64)),
                    fmt_coord(y_of(v * scale))
                )
            })
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            coords.join(" "),
            color
        );
        for &(year, v) in &series.points {
            let _ = writeln!(
                svg,
                r#"<circle cx="{}" cy="{}" r="2.5" fill="{}"/>"#,
                fmt_coord(x_of(year as f64)),
                fmt_coord(y_of(v * scale)),
                color
            );
        }
        let legend_y = MARGIN_TOP + 14.0 + idx as f64 * 18.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="2"/>"#,
            fmt_coord(width - MARGIN_RIGHT + 10.0),
            fmt_coord(legend_y - 4.0),
            fmt_coord(width - MARGIN_RIGHT + 30.0),
            fmt_coord(legend_y - 4.0),
            color
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            fmt_coord(width - MARGIN_RIGHT + 36.0),
            fmt_coord(legend_y),
            escape_xml(&series.label)
        );
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}
