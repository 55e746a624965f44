//! Result files: `results.csv`, `results.json` and one SVG chart per sweep axis.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::io::{read_json, write_json, IoError};
use crate::suite::ResultRow;

pub const CSV_NAME: &str = "results.csv";
pub const JSON_NAME: &str = "results.json";

const NOTE: &str = "Rows vary supervision only. Per-image fitting has no learned input encoder, so \
                    the input-type axis of the original annotation study is not reproduced.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub note: String,
    pub rows: Vec<ResultRow>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    mix: &'a str,
    sweep_axis: &'a str,
    sweep_value: Option<f64>,
    scenes: usize,
    failures: usize,
    pve_mean: f64,
    pve_std: f64,
    mpjpe_mean: f64,
    mpjpe_std: f64,
    pve_t_mean: f64,
    pve_t_std: f64,
    dkd_mean: f64,
    dkd_std: f64,
}

pub fn write_csv(rows: &[ResultRow], path: &Path) -> Result<(), IoError> {
    let csv_err = |e: csv::Error| IoError::Format { path: path.to_path_buf(), message: e.to_string() };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(CsvRow {
            mix: &r.mix,
            sweep_axis: &r.sweep_axis,
            sweep_value: r.sweep_value,
            scenes: r.scenes.len(),
            failures: r.failures,
            pve_mean: r.mean.pve,
            pve_std: r.std.pve,
            mpjpe_mean: r.mean.mpjpe,
            mpjpe_std: r.std.mpjpe,
            pve_t_mean: r.mean.pve_t,
            pve_t_std: r.std.pve_t,
            dkd_mean: r.mean.dkd,
            dkd_std: r.std.dkd,
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Line chart of mean PVE against the sweep value, one polyline per mix, with std whiskers.
pub fn sweep_svg(rows: &[&ResultRow], axis: &str) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (70.0, 160.0, 30.0, 50.0);
    let xs: Vec<f64> = rows.iter().filter_map(|r| r.sweep_value).collect();
    let (x_min, x_max) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let x_span = if x_max > x_min { x_max - x_min } else { 1.0 };
    let y_max = rows.iter().map(|r| r.mean.pve + r.std.pve).fold(0.0, f64::max);
    let y_max = if y_max > 0.0 { 1.1 * y_max } else { 1.0 };
    let px = |x: f64| left + (x - x_min) / x_span * (w - left - right);
    let py = |y: f64| h - bottom - y / y_max * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, h - bottom, w - right, h - bottom);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="black"/>"#, h - bottom);
    for i in 0..=4 {
        let y = y_max * i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{:.2e}</text>"#, left - 6.0, py(y) + 4.0, y);
    }
    let mut ticks = xs.clone();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    for x in &ticks {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{x}</text>"#, px(*x), h - bottom + 16.0);
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{axis}</text>"#, (left + w - right) / 2.0, h - 12.0);
    let _ = writeln!(s, r#"<text x="16" y="{:.2}" transform="rotate(-90 16 {:.2})" text-anchor="middle">mean PVE</text>"#, (top + h - bottom) / 2.0, (top + h - bottom) / 2.0);

    let mut mixes: Vec<&str> = Vec::new();
    for r in rows {
        if !mixes.contains(&r.mix.as_str()) {
            mixes.push(&r.mix);
        }
    }
    for (i, mix) in mixes.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts: Vec<&&ResultRow> = rows.iter().filter(|r| r.mix == *mix && r.sweep_value.is_some()).collect();
        pts.sort_by(|a, b| a.sweep_value.unwrap().total_cmp(&b.sweep_value.unwrap()));
        let line: Vec<String> =
            pts.iter().map(|r| format!("{:.2},{:.2}", px(r.sweep_value.unwrap()), py(r.mean.pve))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, line.join(" "));
        for r in pts {
            let x = px(r.sweep_value.unwrap());
            let (lo, hi) = (py((r.mean.pve - r.std.pve).max(0.0)), py(r.mean.pve + r.std.pve));
            let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{lo:.2}" x2="{x:.2}" y2="{hi:.2}" stroke="{color}"/>"#);
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, py(r.mean.pve));
        }
        let ly = top + 18.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, w - right + 12.0, w - right + 32.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, w - right + 38.0, ly + 4.0, escape(mix));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes the CSV summary, the JSON report and a chart per sweep axis; returns the paths.
pub fn emit_report(rows: &[ResultRow], outdir: &Path) -> Result<Vec<PathBuf>, IoError> {
    if rows.is_empty() {
        return Err(IoError::Format { path: outdir.to_path_buf(), message: "no result rows to report".into() });
    }
    fs::create_dir_all(outdir).map_err(|source| IoError::Io { path: outdir.to_path_buf(), source })?;
    let csv_path = outdir.join(CSV_NAME);
    write_csv(rows, &csv_path)?;
    let json_path = outdir.join(JSON_NAME);
    write_json(&json_path, &Report { note: NOTE.into(), rows: rows.to_vec() })?;
    let mut written = vec![csv_path, json_path];

    let mut axes: Vec<&str> = Vec::new();
    for r in rows.iter().filter(|r| r.sweep_value.is_some()) {
        if !axes.contains(&r.sweep_axis.as_str()) {
            axes.push(&r.sweep_axis);
        }
    }
    for axis in axes {
        let subset: Vec<&ResultRow> = rows.iter().filter(|r| r.sweep_axis == axis).collect();
        let path = outdir.join(format!("pve_{axis}.svg"));
        fs::write(&path, sweep_svg(&subset, axis)).map_err(|source| IoError::Io { path: path.clone(), source })?;
        written.push(path);
    }
    Ok(written)
}

pub fn load_report(dir: &Path) -> Result<Report, IoError> {
    read_json(&dir.join(JSON_NAME))
}
