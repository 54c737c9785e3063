//! Run reports: a plain-text summary plus static SVG plots of the metric
//! series and the final conductivity field.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::harness::{read_metrics_csv, RunManifest, RunStatus, MANIFEST_FILE, METRICS_FILE, RECONSTRUCTION_FILE};
use crate::io;
use crate::metrics::gamma_slope;

pub const REPORT_DIR: &str = "report";
pub const SUMMARY_FILE: &str = "summary.txt";

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;
const MAX_POINTS: usize = 4000;

/// What a report produced for one run directory.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub run_dir: PathBuf,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

/// Reports on a run directory, or on every `chain-*` run inside it.
pub fn report(dir: &Path) -> Result<Vec<RunReport>> {
    if !dir.is_dir() {
        return Err(Error::RunDir { path: dir.to_owned(), message: "not a directory".into() });
    }
    if dir.join(MANIFEST_FILE).exists() {
        return Ok(vec![report_run(dir)?]);
    }
    let mut chains: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_dir()
                && p.file_name().and_then(|s| s.to_str()).is_some_and(|s| s.starts_with("chain-"))
                && p.join(MANIFEST_FILE).exists()
        })
        .collect();
    if chains.is_empty() {
        return Err(Error::RunDir { path: dir.to_owned(), message: format!("no {MANIFEST_FILE} found") });
    }
    chains.sort();
    chains.iter().map(|c| report_run(c)).collect()
}

fn report_run(dir: &Path) -> Result<RunReport> {
    let manifest = RunManifest::load(dir)?;
    let missing: Vec<&str> = manifest.files.iter().map(String::as_str).filter(|f| !dir.join(f).is_file()).collect();
    if !missing.is_empty() {
        return Err(Error::RunDir {
            path: dir.to_owned(),
            message: format!("files listed in the manifest are missing: {}", missing.join(", ")),
        });
    }
    if !manifest.files.iter().any(|f| f == METRICS_FILE) {
        return Err(Error::RunDir { path: dir.to_owned(), message: format!("manifest lists no {METRICS_FILE}") });
    }
    let rows = read_metrics_csv(&dir.join(METRICS_FILE))?;
    if rows.is_empty() {
        return Err(Error::RunDir { path: dir.to_owned(), message: format!("{METRICS_FILE} has no rows") });
    }

    let out = dir.join(REPORT_DIR);
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let mut files = Vec::new();
    let mut emit = |name: &str, text: String| -> Result<()> {
        let path = out.join(name);
        io::write_text(&path, &text)?;
        files.push(path);
        Ok(())
    };

    let iters: Vec<f64> = rows.iter().map(|r| r.iter as f64).collect();
    let delta: Vec<f64> = rows.iter().map(|r| r.delta).collect();
    let gamma: Vec<f64> = rows.iter().map(|r| r.gamma as f64).collect();
    emit("delta.svg", line_plot_svg("Data discrepancy", "iteration", "delta", &iters, &delta))?;
    emit("gamma.svg", line_plot_svg("Cumulative acceptances", "iteration", "Gamma", &iters, &gamma))?;
    let beta: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.beta.map(|b| (r.iter as f64, b))).collect();
    if !beta.is_empty() {
        let (bx, by): (Vec<f64>, Vec<f64>) = beta.iter().copied().unzip();
        emit("beta.svg", line_plot_svg("Reconstruction error", "iteration", "beta", &bx, &by))?;
    }
    let reconstruction = if manifest.files.iter().any(|f| f == RECONSTRUCTION_FILE) {
        let k = io::read_field_csv(&dir.join(RECONSTRUCTION_FILE))?;
        emit("reconstruction.svg", heatmap_svg("Final conductivity", &k))?;
        Some(k)
    } else {
        None
    };

    let summary = summary_text(&manifest, &rows, reconstruction.as_ref());
    emit(SUMMARY_FILE, summary.clone())?;
    Ok(RunReport { run_dir: dir.to_owned(), summary, files })
}

fn summary_text(m: &RunManifest, rows: &[crate::harness::MetricsRow], k: Option<&Field>) -> String {
    let last = rows.last().expect("rows checked nonempty");
    let mut s = String::new();
    let status = match m.status {
        RunStatus::Complete => "complete",
        RunStatus::Partial => "partial",
    };
    writeln!(s, "status            {status}").unwrap();
    if let Some(err) = &m.error {
        writeln!(s, "error             {err}").unwrap();
    }
    writeln!(s, "rule              {}", m.acceptance_rule).unwrap();
    writeln!(s, "scheme            {}", m.scheme).unwrap();
    writeln!(s, "seed              {} ({})", m.seed, m.seed_source).unwrap();
    writeln!(s, "chain             {}", m.chain_index).unwrap();
    writeln!(s, "iterations        {}", last.iter).unwrap();
    writeln!(s, "record stride     {}", m.record_stride).unwrap();
    writeln!(s, "accepted          {}", last.gamma).unwrap();
    if last.iter > 0 {
        writeln!(s, "acceptance rate   {:.6}", last.gamma as f64 / last.iter as f64).unwrap();
    }
    if rows.len() >= 2 && m.record_stride == 1 {
        let gamma: Vec<u64> = rows.iter().map(|r| r.gamma).collect();
        if let Ok(slope) = gamma_slope(&gamma) {
            writeln!(s, "Gamma slope       {slope:.6}").unwrap();
        }
    }
    let saturated = rows.iter().filter(|r| r.alpha >= 1.0).count();
    writeln!(s, "alpha >= 1        {:.6} of recorded steps", saturated as f64 / rows.len() as f64).unwrap();
    writeln!(s, "final delta       {:.6e}", last.delta).unwrap();
    match last.beta {
        Some(b) => writeln!(s, "final beta        {b:.6e}").unwrap(),
        None => writeln!(s, "final beta        n/a (no ground truth)").unwrap(),
    }
    if let Some(k) = k {
        writeln!(s, "K range           [{:.6}, {:.6}]", k.min(), k.max()).unwrap();
    }
    if let Some(summary) = &m.summary {
        writeln!(s, "infeasible        {}", summary.infeasible_count).unwrap();
        writeln!(s, "solve failures    {}", summary.solve_failures).unwrap();
        writeln!(s, "wall time         {:.3} s", summary.wall_time_secs).unwrap();
    }
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e5 || v.abs() < 1e-3 {
        format!("{v:.2e}")
    } else {
        format!("{}", (v * 1e4).round() / 1e4)
    }
}

fn range(values: &[f64]) -> (f64, f64) {
    let (lo, hi) = values
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// A single-series line chart. Long series are thinned to an even stride
/// that always keeps the final point.
pub fn line_plot_svg(title: &str, xlabel: &str, ylabel: &str, xs: &[f64], ys: &[f64]) -> String {
    assert_eq!(xs.len(), ys.len(), "series lengths differ");
    let (x0, x1) = range(xs);
    let (y0, y1) = range(ys);
    let pw = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let ph = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MARGIN_TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#, WIDTH / 2.0, escape(title)).unwrap();
    writeln!(
        s,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{pw}" height="{ph}" fill="none" stroke="black" stroke-width="1"/>"#
    )
    .unwrap();
    for t in 0..=4 {
        let f = t as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let (px, py) = (sx(xv), sy(yv));
        let base = MARGIN_TOP + ph;
        writeln!(s, r#"<line x1="{px:.2}" y1="{base}" x2="{px:.2}" y2="{}" stroke="black"/>"#, base + 5.0).unwrap();
        writeln!(
            s,
            r#"<text x="{px:.2}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#,
            base + 18.0,
            label(xv)
        )
        .unwrap();
        writeln!(s, r#"<line x1="{}" y1="{py:.2}" x2="{MARGIN_LEFT}" y2="{py:.2}" stroke="black"/>"#, MARGIN_LEFT - 5.0).unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>"#,
            MARGIN_LEFT - 8.0,
            py + 4.0,
            label(yv)
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
        MARGIN_LEFT + pw / 2.0,
        HEIGHT - 10.0,
        escape(xlabel)
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {0})">{1}</text>"#,
        MARGIN_TOP + ph / 2.0,
        escape(ylabel)
    )
    .unwrap();

    let stride = xs.len().div_ceil(MAX_POINTS).max(1);
    let mut points = String::new();
    for (idx, (&x, &y)) in xs.iter().zip(ys).enumerate() {
        if (idx % stride == 0 || idx + 1 == xs.len()) && x.is_finite() && y.is_finite() {
            write!(points, "{:.3},{:.3} ", sx(x), sy(y)).unwrap();
        }
    }
    writeln!(s, r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>"#, points.trim_end()).unwrap();
    s.push_str("</svg>\n");
    s
}

/// Linear blend through a blue-to-yellow ramp; `t` in [0, 1].
fn color(t: f64) -> String {
    const STOPS: [(f64, f64, f64); 5] =
        [(68.0, 1.0, 84.0), (59.0, 82.0, 139.0), (33.0, 145.0, 140.0), (94.0, 201.0, 98.0), (253.0, 231.0, 37.0)];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let pos = t * (STOPS.len() - 1) as f64;
    let k = (pos.floor() as usize).min(STOPS.len() - 2);
    let f = pos - k as f64;
    let (a, b) = (STOPS[k], STOPS[k + 1]);
    let mix = |p: f64, q: f64| (p + f * (q - p)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// A heatmap of a field with row 0 drawn at the bottom, plus a color bar.
pub fn heatmap_svg(title: &str, field: &Field) -> String {
    let (n, m) = field.shape();
    let (lo, hi) = range(field.as_slice());
    let side = 320.0;
    let cell = side / n.max(m).max(1) as f64;
    let (ox, oy) = (MARGIN_LEFT, MARGIN_TOP);
    let bar_x = ox + cell * m as f64 + 30.0;
    let width = bar_x + 100.0;
    let height = oy + cell * n as f64 + 30.0;

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#, width / 2.0, escape(title)).unwrap();
    for i in 0..n {
        for j in 0..m {
            let v = field.get(i, j);
            let x = ox + j as f64 * cell;
            let y = oy + (n - 1 - i) as f64 * cell;
            writeln!(
                s,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{cell:.2}" height="{cell:.2}" fill="{}"><title>({i},{j}) {v}</title></rect>"#,
                color((v - lo) / (hi - lo))
            )
            .unwrap();
        }
    }
    let bar_h = cell * n as f64;
    let steps = 32;
    for k in 0..steps {
        let h = bar_h / steps as f64;
        let y = oy + bar_h - (k + 1) as f64 * h;
        writeln!(s, r#"<rect x="{bar_x:.2}" y="{y:.2}" width="16" height="{:.2}" fill="{}"/>"#, h + 0.5, color((k as f64 + 0.5) / steps as f64)).unwrap();
    }
    for (v, y) in [(hi, oy + 4.0), (lo, oy + bar_h)] {
        writeln!(
            s,
            r#"<text x="{:.2}" y="{y:.2}" font-family="sans-serif" font-size="11">{}</text>"#,
            bar_x + 22.0,
            label(v)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}
