//! CSV, JSON and SVG writers. CSV numbers use 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use qplap_core::{Dim, Grid};
use serde::Serialize;

use crate::error::CliError;

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write(path: &Path, contents: &str) -> Result<PathBuf, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    Ok(path.to_path_buf())
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    write(path, &s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<PathBuf, CliError> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    write(path, &s)
}

/// Coordinate columns for a grid: `x` in 1D, `x,y` in 2D.
pub fn coord_header(grid: &Grid) -> Vec<&'static str> {
    match grid.dim() {
        Dim::One => vec!["x"],
        Dim::Two => vec!["x", "y"],
    }
}

pub fn coord_cells(grid: &Grid, p: [f64; 2]) -> Vec<String> {
    match grid.dim() {
        Dim::One => vec![num(p[0])],
        Dim::Two => vec![num(p[0]), num(p[1])],
    }
}

/// Nodal table `coords..., name`.
pub fn nodal_rows(grid: &Grid, values: &[f64]) -> Vec<Vec<String>> {
    grid.coords()
        .iter()
        .zip(values)
        .map(|(c, v)| {
            let mut r = coord_cells(grid, *c);
            r.push(num(*v));
            r
        })
        .collect()
}

const W: f64 = 640.0;
const H: f64 = 360.0;
const PAD: f64 = 48.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Line plots of several series over a shared abscissa.
pub fn line_plot(title: &str, series: &[(&str, &[f64], &[f64])]) -> String {
    let xs = series.iter().flat_map(|s| s.1.iter().copied());
    let ys = series.iter().flat_map(|s| s.2.iter().copied());
    let (x0, x1) = range(xs);
    let (y0, y1) = range(ys);
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut s = header(W, H);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, title);
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="gray"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(s, r#"<text x="{PAD}" y="{}" font-size="10">{:.3}</text>"#, H - PAD + 14.0, x0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{:.3}</text>"#, W - PAD, H - PAD + 14.0, x1);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{:.3}</text>"#, PAD - 4.0, H - PAD, y0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{:.3}</text>"#, PAD - 4.0, PAD + 8.0, y1);
    for (k, (name, x, y)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = x.iter().zip(y.iter()).map(|(a, b)| format!("{:.2},{:.2}", sx(*a), sy(*b))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{name}</text>"#,
            W - PAD + 4.0,
            PAD + 14.0 * (k as f64 + 1.0)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Side-by-side cell heatmaps on a rectangle grid.
pub fn heatmaps(grid: &Grid, panels: &[(&str, &[f64])]) -> String {
    let [[ax, ay], [bx, by]] = grid.bounds();
    let side = 260.0;
    let width = PAD + panels.len() as f64 * (side + PAD);
    let height = side + 2.0 * PAD;
    let mut s = header(width, height);
    for (k, (name, vals)) in panels.iter().enumerate() {
        let (lo, hi) = range(vals.iter().copied());
        let ox = PAD + k as f64 * (side + PAD);
        let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="13">{name} [{lo:.3}, {hi:.3}]</text>"#, ox + side / 2.0);
        for (cell, v) in grid.cells().iter().zip(vals.iter()) {
            let t = (v - lo) / (hi - lo);
            let pts: Vec<String> = cell
                .nodes()
                .iter()
                .map(|&n| {
                    let c = grid.coords()[n];
                    format!("{:.2},{:.2}", ox + (c[0] - ax) / (bx - ax) * side, PAD + side - (c[1] - ay) / (by - ay) * side)
                })
                .collect();
            let _ = writeln!(s, r#"<polygon points="{}" fill="{}"/>"#, pts.join(" "), ramp(t));
        }
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_svg(path: &Path, svg: &str) -> Result<PathBuf, CliError> {
    write(path, svg)
}

fn header(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= 1e-300 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Blue to yellow ramp for `t` in `[0, 1]`.
fn ramp(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let r = (68.0 + t * (253.0 - 68.0)).round() as u8;
    let g = (1.0 + t * (231.0 - 1.0)).round() as u8;
    let b = (84.0 + t * (37.0 - 84.0)).round() as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}
