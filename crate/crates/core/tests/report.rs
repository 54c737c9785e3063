use std::path::Path;

use heatmc::config::parse_config;
use heatmc::harness::{invert, InvertOptions, RunManifest};
use heatmc::report::{heatmap_svg, line_plot_svg, report, REPORT_DIR};
use heatmc::Field;

const SVG_NS: &str = "http://www.w3.org/2000/svg";

fn small_run(dir: &Path, extra_chain: &str) {
    let text = format!(
        r#"{{"grid": {{"n": 6, "m": 6}}, "chain": {{"iterations": 300, "seed": 4 {extra_chain}}}}}"#
    );
    let cfg = parse_config(&text).unwrap();
    invert(&cfg, dir, &InvertOptions::default()).unwrap();
}

fn check_svg(text: &str) -> roxmltree::Document<'_> {
    let doc = roxmltree::Document::parse(text).expect("well-formed XML");
    let root = doc.root_element();
    assert_eq!(root.tag_name().name(), "svg");
    assert_eq!(root.tag_name().namespace(), Some(SVG_NS));
    for attr in ["width", "height", "viewBox"] {
        assert!(root.attribute(attr).is_some(), "missing {attr}");
    }
    for node in doc.descendants().filter(|n| n.is_element()) {
        assert_eq!(node.tag_name().namespace(), Some(SVG_NS));
        for attr in ["x", "y", "width", "height", "x1", "y1", "x2", "y2"] {
            if let Some(v) = node.attribute(attr) {
                assert!(v.parse::<f64>().map(f64::is_finite).unwrap_or(false), "{attr}={v}");
            }
        }
    }
    doc
}

fn polyline_points(doc: &roxmltree::Document<'_>) -> Vec<(f64, f64)> {
    let line = doc.descendants().find(|n| n.has_tag_name("polyline")).expect("polyline");
    line.attribute("points")
        .unwrap()
        .split_whitespace()
        .map(|p| {
            let (x, y) = p.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect()
}

#[test]
fn report_writes_valid_svgs() {
    let dir = tempfile::tempdir().unwrap();
    small_run(dir.path(), "");
    let out = report(dir.path()).unwrap();
    assert_eq!(out.len(), 1);
    let names: Vec<String> =
        out[0].files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    for expected in ["delta.svg", "gamma.svg", "beta.svg", "reconstruction.svg", "summary.txt"] {
        assert!(names.iter().any(|n| n == expected), "{expected} missing from {names:?}");
    }
    for path in out[0].files.iter().filter(|p| p.extension().is_some_and(|e| e == "svg")) {
        check_svg(&std::fs::read_to_string(path).unwrap());
    }
    assert!(out[0].summary.contains("acceptance rate"));
    assert!(dir.path().join(REPORT_DIR).join("summary.txt").is_file());
}

#[test]
fn all_accept_gamma_plot_is_unit_slope_line() {
    let dir = tempfile::tempdir().unwrap();
    // zero sensitivities make every dual acceptance value exactly 1
    small_run(
        dir.path(),
        r#", "acceptance_rule": "dual", "sensitivities": {"lambda1": 0, "lambda2": 0, "lambda3": 0, "allow_lambda_order_violation": true}"#,
    );
    let manifest = RunManifest::load(dir.path()).unwrap();
    assert_eq!(manifest.summary.unwrap().accept_count, 300);
    report(dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join(REPORT_DIR).join("gamma.svg")).unwrap();
    let pts = polyline_points(&check_svg(&text));
    assert_eq!(pts.len(), 300);
    let ((x0, y0), (x1, y1)) = (pts[0], pts[pts.len() - 1]);
    // x spans iterations 1..300 and y spans Gamma 1..300, so equal data
    // ranges map onto the full plot box in both directions
    let doc = roxmltree::Document::parse(&text).unwrap();
    let frame = doc.descendants().filter(|n| n.has_tag_name("rect")).nth(1).unwrap();
    let pw: f64 = frame.attribute("width").unwrap().parse().unwrap();
    let ph: f64 = frame.attribute("height").unwrap().parse().unwrap();
    assert!(((x1 - x0) / pw - 1.0).abs() < 1e-4);
    assert!(((y0 - y1) / ph - 1.0).abs() < 1e-4);
    for &(x, y) in &pts {
        let t = (x - x0) / (x1 - x0);
        let expected_y = y0 + t * (y1 - y0);
        assert!((y - expected_y).abs() < 2e-3, "off the line at x={x}");
    }
}

#[test]
fn report_on_empty_dir_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert!(report(dir.path()).is_err());
    assert!(report(&dir.path().join("missing")).is_err());
}

#[test]
fn deleting_any_listed_file_breaks_report() {
    let dir = tempfile::tempdir().unwrap();
    small_run(dir.path(), "");
    let manifest = RunManifest::load(dir.path()).unwrap();
    assert!(!manifest.files.is_empty());
    for name in &manifest.files {
        let path = dir.path().join(name);
        let saved = std::fs::read(&path).unwrap();
        std::fs::remove_file(&path).unwrap();
        let err = report(dir.path()).unwrap_err().to_string();
        assert!(err.contains(name), "{name}: {err}");
        std::fs::write(&path, saved).unwrap();
    }
    report(dir.path()).unwrap();
}

#[test]
fn multi_chain_directories_are_reported_per_chain() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(r#"{"grid": {"n": 5, "m": 5}, "chain": {"iterations": 50}}"#).unwrap();
    invert(&cfg, dir.path(), &InvertOptions { chains: 3, ..InvertOptions::default() }).unwrap();
    let out = report(dir.path()).unwrap();
    assert_eq!(out.len(), 3);
    assert!(out[2].run_dir.ends_with("chain-02"));
}

#[test]
fn standalone_plots_are_well_formed() {
    let xs: Vec<f64> = (0..20_000).map(f64::from).collect();
    let ys: Vec<f64> = xs.iter().map(|x| (x / 500.0).sin() * 1e-7).collect();
    let doc_text = line_plot_svg("a <title> & more", "x", "y", &xs, &ys);
    let doc = check_svg(&doc_text);
    assert!(polyline_points(&doc).len() <= 4001);
    check_svg(&line_plot_svg("flat", "x", "y", &[1.0, 2.0], &[3.0, 3.0]));
    let f = Field::from_fn(4, 7, |i, j| (i * 7 + j) as f64);
    let heat = heatmap_svg("k", &f);
    let doc = check_svg(&heat);
    assert!(doc.descendants().filter(|n| n.has_tag_name("rect")).count() >= 28);
}
