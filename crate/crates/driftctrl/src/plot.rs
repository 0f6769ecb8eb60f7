//! Minimal SVG rendering of experiment CSVs.
//!
//! Three plot kinds cover the artifacts the experiments produce: the
//! stabilization sweep's success-rate-versus-τ curve, and the regret
//! experiment's mean and worst-case curves per policy for normalized
//! regret and normalized estimation error. The output is a plain vector
//! image with labeled axes and a legend; visual styling is deliberately
//! minimal and is not a compatibility surface.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Which CSV schema and columns to render.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Success rate against the stabilization round length τ.
    Stabilization,
    /// Normalized regret against time, mean and worst per policy.
    Regret,
    /// Normalized estimation error against time, mean and worst per policy.
    Estimation,
}

impl PlotKind {
    pub fn label(&self) -> &'static str {
        match self {
            PlotKind::Stabilization => "stabilization",
            PlotKind::Regret => "regret",
            PlotKind::Estimation => "estimation",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "stabilization" => Ok(PlotKind::Stabilization),
            "regret" => Ok(PlotKind::Regret),
            "estimation" => Ok(PlotKind::Estimation),
            other => Err(Error::Parse(format!(
                "unknown plot kind '{other}' (expected stabilization, regret, or estimation)"
            ))),
        }
    }
}

const SWEEP_HEADER: &str = "tau,reps,successes,success_rate,seed";
const REGRET_HEADER: &str = "policy,T,rep,regret,norm_regret,est_err_sq,norm_est_err";

/// Read a CSV, render it as `kind`, and write the SVG to `out_path`.
/// Validation failures (schema mismatch, empty data) leave no file behind.
pub fn emit_plot(csv_path: &Path, kind: PlotKind, out_path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(csv_path)?;
    let svg = render_plot(&text, kind)?;
    std::fs::write(out_path, svg)?;
    Ok(())
}

/// Render CSV text to SVG text. See [`emit_plot`].
pub fn render_plot(csv_text: &str, kind: PlotKind) -> Result<String> {
    match kind {
        PlotKind::Stabilization => {
            let series = sweep_series(csv_text)?;
            Ok(render_svg(
                "Stabilization success rate",
                "round length tau (s)",
                "success rate",
                &series,
                Some((0.0, 1.0)),
            ))
        }
        PlotKind::Regret => {
            let series = regret_series(csv_text, 4)?;
            Ok(render_svg(
                "Normalized regret",
                "time (s)",
                "normalized regret",
                &series,
                None,
            ))
        }
        PlotKind::Estimation => {
            let series = regret_series(csv_text, 6)?;
            Ok(render_svg(
                "Normalized estimation error",
                "time (s)",
                "normalized estimation error",
                &series,
                None,
            ))
        }
    }
}

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

fn sweep_series(csv_text: &str) -> Result<Vec<Series>> {
    let mut lines = csv_text.lines();
    check_header(lines.next(), SWEEP_HEADER)?;
    let mut points = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_row(line, 5)?;
        points.push((parse_field(fields[0], line)?, parse_field(fields[3], line)?));
    }
    if points.is_empty() {
        return Err(Error::Empty("stabilization CSV has no data rows".into()));
    }
    Ok(vec![Series { label: "success rate".into(), points }])
}

/// Aggregate (`mean`/`worst`) series per policy from the regret schema,
/// taking the y value from `column`.
fn regret_series(csv_text: &str, column: usize) -> Result<Vec<Series>> {
    let mut lines = csv_text.lines();
    check_header(lines.next(), REGRET_HEADER)?;
    let mut series: Vec<Series> = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_row(line, 7)?;
        let rep = fields[2];
        if rep != "mean" && rep != "worst" {
            continue;
        }
        let label = format!("{} {}", fields[0], rep);
        let point = (parse_field(fields[1], line)?, parse_field(fields[column], line)?);
        match series.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push(point),
            None => series.push(Series { label, points: vec![point] }),
        }
    }
    if series.is_empty() {
        return Err(Error::Empty(
            "regret CSV has no aggregate (mean/worst) rows to plot".into(),
        ));
    }
    Ok(series)
}

fn check_header(line: Option<&str>, expected: &str) -> Result<()> {
    match line {
        Some(h) if h.trim_end() == expected => Ok(()),
        Some(h) => Err(Error::Parse(format!(
            "CSV header mismatch: expected '{expected}', got '{h}'"
        ))),
        None => Err(Error::Empty("CSV file is empty".into())),
    }
}

fn split_row(line: &str, expected: usize) -> Result<Vec<&str>> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != expected {
        return Err(Error::Parse(format!(
            "expected {expected} fields, got {} in row '{line}'"
        , fields.len())));
    }
    Ok(fields)
}

fn parse_field(text: &str, line: &str) -> Result<f64> {
    let v: f64 = text
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad number '{text}' in row '{line}'")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("non-finite value '{text}' in row '{line}'")));
    }
    Ok(v)
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn render_svg(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    y_range: Option<(f64, f64)>,
) -> String {
    let (x_min, x_max) = padded_range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y_min, y_max) = match y_range {
        Some(r) => r,
        None => padded_range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1))),
    };
    let px = |x: f64| MARGIN_LEFT + (x - x_min) / (x_max - x_min) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT);
    let py = |y: f64| HEIGHT - MARGIN_BOTTOM - (y - y_min) / (y_max - y_min) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="13">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="28" text-anchor="middle" font-size="17">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );

    // Axes, ticks, and a light grid.
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x_min + f * (x_max - x_min);
        let yv = y_min + f * (y_max - y_min);
        let xp = px(xv);
        let yp = py(yv);
        let _ = writeln!(
            svg,
            r##"<line x1="{xp:.1}" y1="{}" x2="{xp:.1}" y2="{}" stroke="#ddd"/>"##,
            py(y_max),
            py(y_min)
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{}" y1="{yp:.1}" x2="{}" y2="{yp:.1}" stroke="#ddd"/>"##,
            px(x_min),
            px(x_max)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{xp:.1}" y="{}" text-anchor="middle">{}</text>"#,
            HEIGHT - MARGIN_BOTTOM + 20.0,
            tick_label(xv)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 8.0,
            yp + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        svg,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        px(x_min),
        py(y_min),
        px(x_max),
        py(y_min)
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        px(x_min),
        py(y_min),
        px(x_min),
        py(y_max)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );

    // Series and legend.
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let dash = if s.label.ends_with("worst") { r#" stroke-dasharray="6 3""# } else { "" };
        let coords: Vec<String> =
            s.points.iter().map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"{dash}/>"#,
            coords.join(" ")
        );
        for &(x, y) in &s.points {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.1}" cy="{:.1}" r="2.4" fill="{color}"/>"#,
                px(x),
                py(y)
            );
        }
        let ly = MARGIN_TOP + 16.0 * i as f64;
        let lx = WIDTH - MARGIN_RIGHT - 160.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="1.8"{dash}/>"#,
            lx + 26.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}">{}</text>"#,
            lx + 32.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Data range with a small pad; degenerate ranges are widened so the
/// mapping to pixels stays well defined.
fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > hi {
        return (0.0, 1.0);
    }
    let span = hi - lo;
    if span <= 0.0 {
        let pad = lo.abs().max(1.0) * 0.5;
        return (lo - pad, hi + pad);
    }
    (lo - 0.05 * span, hi + 0.05 * span)
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-2..1e4).contains(&a) {
        format!("{v:.1e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
