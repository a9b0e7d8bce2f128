//! Pure-text SVG line plots from metrics CSV tables: one polyline per
//! strategy, axes with ticks, and a legend. No external renderer.

use std::fmt::Write;

use super::report::CsvTable;
use crate::error::{Error, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 170.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 60.0;
const PALETTE: &[&str] = &["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.abs() >= 0.001 && v.abs() < 100_000.0 {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{v:.2e}")
    }
}

/// Renders the plot; returns the SVG text and whether the table body was
/// empty (axes only).
pub fn render_svg(table: &CsvTable, x_field: &str, y_field: &str) -> Result<(String, bool)> {
    let x_col = table.column(x_field).ok_or_else(|| {
        Error::InvalidInput(format!(
            "no field {x_field:?}; available: {}",
            table.header.join(", ")
        ))
    })?;
    let y_col = table.column(y_field).ok_or_else(|| {
        Error::InvalidInput(format!(
            "no field {y_field:?}; available: {}",
            table.header.join(", ")
        ))
    })?;
    let strategy_col = table.column("strategy");

    // Series keyed by strategy, in first-appearance order.
    let mut names: Vec<String> = Vec::new();
    let mut series: Vec<Vec<(f64, f64)>> = Vec::new();
    for row in 0..table.rows.len() {
        let name = strategy_col
            .map(|c| table.rows[row][c].clone())
            .unwrap_or_else(|| "series".to_string());
        let idx = match names.iter().position(|n| *n == name) {
            Some(i) => i,
            None => {
                names.push(name);
                series.push(Vec::new());
                names.len() - 1
            }
        };
        series[idx].push((table.numeric(row, x_col)?, table.numeric(row, y_col)?));
    }
    let empty = series.iter().all(|s| s.is_empty());

    let all: Vec<(f64, f64)> = series.iter().flatten().copied().collect();
    let (mut x_lo, mut x_hi) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
    let (mut y_lo, mut y_hi) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
    if empty {
        (x_lo, x_hi, y_lo, y_hi) = (0.0, 1.0, 0.0, 1.0);
    }
    if x_lo == x_hi {
        x_lo -= 0.5;
        x_hi += 0.5;
    }
    if y_lo == y_hi {
        y_lo -= 0.5;
        y_hi += 0.5;
    }

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |y: f64| MARGIN_T + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    // Axes.
    let x0 = MARGIN_L;
    let y0 = MARGIN_T + plot_h;
    let _ = writeln!(
        svg,
        r#"<line x1="{x0}" y1="{y0}" x2="{}" y2="{y0}" stroke="black"/>"#,
        MARGIN_L + plot_w
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{x0}" y1="{MARGIN_T}" x2="{x0}" y2="{y0}" stroke="black"/>"#
    );

    // Ticks and grid.
    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let xv = x_lo + frac * (x_hi - x_lo);
        let xp = sx(xv);
        let _ = writeln!(
            svg,
            r#"<line x1="{xp}" y1="{y0}" x2="{xp}" y2="{}" stroke="black"/>"#,
            y0 + 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{xp}" y="{}" font-size="12" text-anchor="middle">{}</text>"#,
            y0 + 20.0,
            fmt_tick(xv)
        );
        let yv = y_lo + frac * (y_hi - y_lo);
        let yp = sy(yv);
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{yp}" x2="{x0}" y2="{yp}" stroke="black"/>"#,
            x0 - 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="end">{}</text>"#,
            x0 - 8.0,
            yp + 4.0,
            fmt_tick(yv)
        );
    }

    // Axis labels and title.
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="14" text-anchor="middle">{x_field}</text>"#,
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{}" font-size="14" text-anchor="middle" transform="rotate(-90 20 {0})">{y_field}</text>"#,
        MARGIN_T + plot_h / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" font-size="16" text-anchor="middle">{y_field} vs {x_field}</text>"#,
        WIDTH / 2.0
    );

    // Series and legend.
    for (i, (name, points)) in names.iter().zip(&series).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if !points.is_empty() {
            let path: Vec<String> = points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                path.join(" ")
            );
        }
        let ly = MARGIN_T + 16.0 * i as f64 + 10.0;
        let lx = MARGIN_L + plot_w + 14.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 22.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="12">{name}</text>"#,
            lx + 27.0,
            ly + 4.0
        );
    }

    svg.push_str("</svg>\n");
    Ok((svg, empty))
}
