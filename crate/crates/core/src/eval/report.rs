use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, SidError};
use crate::eval::{ComparisonRow, EpisodeResult, MetricsReport};

fn to_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
}

/// Per-episode table. Floats use shortest round-trip formatting so the table
/// can be re-aggregated exactly.
pub fn episode_csv(report: &MetricsReport) -> String {
    to_csv(
        &["episode", "success", "oracle_success", "trajectory_length_m", "shortest_length_m", "nav_error_m", "viewpoint_count", "spl"],
        report.episodes.iter().enumerate().map(|(i, r)| {
            vec![
                i.to_string(),
                r.success.to_string(),
                r.oracle_success.to_string(),
                r.trajectory_length_m.to_string(),
                r.shortest_length_m.to_string(),
                r.nav_error_m.to_string(),
                r.viewpoint_count.to_string(),
                r.spl().to_string(),
            ]
        }),
    )
}

pub fn read_episode_csv(text: &str) -> std::result::Result<Vec<EpisodeResult>, String> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let field = |j: usize| rec.get(j).ok_or_else(|| format!("row {}: missing column {j}", i + 1));
        let f = |j: usize| field(j)?.parse::<f64>().map_err(|e| format!("row {}: {e}", i + 1));
        let b = |j: usize| field(j)?.parse::<bool>().map_err(|e| format!("row {}: {e}", i + 1));
        out.push(EpisodeResult {
            success: b(1)?,
            oracle_success: b(2)?,
            trajectory_length_m: f(3)?,
            shortest_length_m: f(4)?,
            nav_error_m: f(5)?,
            viewpoint_count: field(6)?.parse().map_err(|e| format!("row {}: {e}", i + 1))?,
        });
    }
    Ok(out)
}

pub fn summary_csv(rows: &[(&str, &MetricsReport)]) -> String {
    to_csv(
        &["label", "split", "episodes", "sr", "osr", "spl", "tl", "ne"],
        rows.iter().map(|(label, r)| {
            vec![
                label.to_string(),
                r.split.clone(),
                r.len().to_string(),
                format!("{:.6}", r.sr),
                format!("{:.6}", r.osr),
                format!("{:.6}", r.spl),
                format!("{:.6}", r.tl),
                format!("{:.6}", r.ne),
            ]
        }),
    )
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    to_csv(
        &["arm", "sr", "osr", "spl", "seeds"],
        rows.iter().map(|r| {
            vec![r.label.clone(), format!("{:.6}", r.sr), format!("{:.6}", r.osr), format!("{:.6}", r.spl), r.seeds.to_string()]
        }),
    )
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| SidError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| SidError::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub name: String,
    pub values: Vec<f64>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Static SVG line chart, one polyline per series over shared x labels.
pub fn svg_line_chart(title: &str, x_labels: &[String], series: &[PlotSeries]) -> String {
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let vals = series.iter().flat_map(|s| s.values.iter().copied()).filter(|v| v.is_finite());
    let (mut lo, mut hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        lo -= 0.5;
        hi += 0.5;
    }
    let n = x_labels.len().max(2) - 1;
    let x = |i: usize| pad + (w - 2.0 * pad) * i as f64 / n as f64;
    let y = |v: f64| h - pad - (h - 2.0 * pad) * (v - lo) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M{pad} {pad} V{} H{}" fill="none" stroke="black"/>"#,
        h - pad,
        w - pad
    );
    for (i, label) in x_labels.iter().enumerate() {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#, x(i), h - pad + 18.0, escape(label));
    }
    for v in [lo, (lo + hi) / 2.0, hi] {
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="12">{v:.3}</text>"#, pad - 6.0, y(v) + 4.0);
    }
    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = ser.values.iter().enumerate().map(|(i, &v)| format!("{:.1},{:.1}", x(i), y(v))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, pts.join(" "));
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="{color}">{}</text>"#, w - pad + 4.0 - 90.0, pad + 16.0 * k as f64, escape(&ser.name));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
