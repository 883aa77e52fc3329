use std::path::Path;
use std::process::Command;

use fractal_spectra::numfmt::{round_sig, SIG_DIGITS};
use fractal_spectra::spectrum::{DimensionSummary, SpectrumCurve, SpectrumKind};
use tempfile::TempDir;

const FIG2_LEFT: &str = r#"{"m":2,"n":3,"rects":[[0,0],[0,2],[1,1]]}"#;

fn spectra(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_spectra")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map(|d| d.map(|e| e.unwrap().file_name().into_string().unwrap()).collect())
        .unwrap_or_default();
    names.sort();
    names
}

/// Rows of a CSV body as numbers.
fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect()
}

#[test]
fn malformed_json_exits_2_without_output() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "bad.json", r#"{"m": 2, "n":"#);
    let out = tmp.path().join("out");
    for sub in ["carpet", "moran", "tails"] {
        let (code, err) = spectra(&[sub, "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(code, 2, "{sub}: {err}");
        assert!(listing(&out).is_empty(), "{sub} left files behind");
    }
}

#[test]
fn schema_violations_exit_2() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();
    let cfg = write(tmp.path(), "c.json", r#"{"m":3,"n":2,"rects":[[0,0]]}"#);
    assert_eq!(spectra(&["carpet", "--config", &cfg, "--out", out]).0, 2);
    assert_eq!(spectra(&["carpet", "--out", out]).0, 2);
    assert_eq!(spectra(&["figure", "--figure", "fig9", "--out", out]).0, 2);
    assert_eq!(spectra(&["percolation", "--n", "2", "--p", "1.5", "--out", out]).0, 2);
    assert!(listing(Path::new(out)).is_empty());
}

#[test]
fn resource_cap_exits_3() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let (code, err) = spectra(&["percolation", "--n", "2", "--p", "0.9", "--depth", "30", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 3, "{err}");
    assert!(listing(&out).is_empty());
}

#[test]
fn verification_failure_exits_4_with_report() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.json", FIG2_LEFT);
    let out = tmp.path().join("out");
    let o = out.to_str().unwrap();
    let (code, err) = spectra(&["verify", "carpet", "--config", &cfg, "--thetas", "0.5", "--tol", "1e-9", "--out", o]);
    assert_eq!(code, 4, "{err}");
    let report: serde_json::Value = serde_json::from_str(&read(&out, "verify.json")).unwrap();
    assert_eq!(report["rows"][0]["pass"], false);
}

#[test]
fn verify_carpet_within_tolerance() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.json", FIG2_LEFT);
    let out = tmp.path().join("out");
    let (code, err) = spectra(&["verify", "carpet", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let report: serde_json::Value = serde_json::from_str(&read(&out, "verify.json")).unwrap();
    for row in report["rows"].as_array().unwrap() {
        assert!(row["error"].as_f64().unwrap() <= 0.05, "{row}");
    }
}

#[test]
fn verify_moments_and_masses_pass() {
    let tmp = TempDir::new().unwrap();
    let o = tmp.path().join("p");
    let (code, err) = spectra(&["verify", "percolation", "--n", "2", "--p", "0.7", "--depth", "3", "--out", o.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let cfg = write(tmp.path(), "ifs.json", r#"{"maps":[{"r":0.5,"a":0},{"r":0.3,"a":0.2},{"r":0.4,"a":0.6}]}"#);
    let o = tmp.path().join("i");
    let (code, err) = spectra(&["verify", "ifs", "--config", &cfg, "--out", o.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
}

#[test]
fn carpet_outputs_round_trip() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.json", FIG2_LEFT);
    let out = tmp.path().join("out");
    let (code, err) = spectra(&["carpet", "--config", &cfg, "--grid", "99", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(
        listing(&out),
        ["assouad.csv", "assouad.json", "lower.csv", "lower.json", "summary.json"]
    );

    let summary: DimensionSummary = serde_json::from_str(&read(&out, "summary.json")).unwrap();
    summary.validate().unwrap();
    let (l2, l3) = (2f64.ln(), 3f64.ln());
    let dim_b = 1.0 + 1.5f64.ln() / l3;
    assert_eq!(summary.assouad, round_sig(1.0 + l2 / l3, SIG_DIGITS));
    assert_eq!(summary.upper_box, round_sig(dim_b, SIG_DIGITS));

    let curve = SpectrumCurve::from_json(&read(&out, "assouad.json")).unwrap();
    assert_eq!(curve.kind, SpectrumKind::Assouad);
    let csv = rows(&read(&out, "assouad.csv"));
    assert_eq!(csv.len(), 99);
    for ((t, v), row) in curve.points().zip(&csv) {
        assert_eq!(row[0], t);
        assert_eq!(row[1], v);
    }
    // Re-serializing the reloaded curve reproduces the file byte for byte.
    assert_eq!(format!("{}\n", curve.to_json()), read(&out, "assouad.json"));
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let tmp = TempDir::new().unwrap();
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let o = out.to_str().unwrap();
        let args = ["percolation", "--n", "2", "--p", "0.7", "--depth", "9", "--trials", "20", "--seed", "11", "--trials-csv", "--out", o];
        assert_eq!(spectra(&args).0, 0);
        assert_eq!(spectra(&["figure", "--figure", "fig6", "--grid", "50", "--out", o]).0, 0);
        outputs.push(
            listing(&out)
                .into_iter()
                .map(|n| (read(&out, &n), n))
                .collect::<Vec<_>>(),
        );
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0].len(), 2 + 6);

    let other = tmp.path().join("c");
    let args = ["percolation", "--n", "2", "--p", "0.7", "--depth", "9", "--trials", "20", "--seed", "12", "--out", other.to_str().unwrap()];
    assert_eq!(spectra(&args).0, 0);
    assert_ne!(read(&other, "estimate.json"), read(&tmp.path().join("a"), "estimate.json"));
}

#[test]
fn fig3_left_matches_closed_form() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(spectra(&["figure", "--figure", "fig3", "--grid", "199", "--out", out.to_str().unwrap()]).0, 0);
    assert_eq!(listing(&out).len(), 4);
    let (l2, l3) = (2f64.ln(), 3f64.ln());
    let dim_b = 1.0 + 1.5f64.ln() / l3;
    let dim_a = 1.0 + l2 / l3;
    for row in rows(&read(&out, "fig3_left_assouad.csv")) {
        let t = row[0];
        let expected = if t < l2 / l3 {
            (dim_b - t * (1.5f64.ln() / l2 + l2 / l3)) / (1.0 - t)
        } else {
            dim_a
        };
        assert!((row[1] - expected).abs() < 1e-10, "θ = {t}: {} vs {expected}", row[1]);
        assert!((row[2] - dim_b).abs() < 1e-10);
        assert!((row[3] - (dim_b / (1.0 - t)).min(dim_a)).abs() < 1e-10);
        assert!(row[2] <= row[1] + 1e-10 && row[1] <= row[3] + 1e-10);
    }
    for row in rows(&read(&out, "fig3_left_lower.csv")) {
        assert!((row[2] - 1.0).abs() < 1e-10 && (row[3] - dim_b).abs() < 1e-10);
        assert!(row[2] <= row[1] + 1e-10 && row[1] <= row[3] + 1e-10);
    }
}

#[test]
fn fig4_left_is_clipped_overlap_bound() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(spectra(&["figure", "--figure", "fig4", "--out", out.to_str().unwrap()]).0, 0);
    let data = rows(&read(&out, "fig4_left.csv"));
    assert_eq!(data.len(), 999);
    for row in data {
        let t = row[0];
        let expected = ((0.7 - 0.5 * t) / (1.0 - t)).min(0.6 / (1.0 - t)).min(1.0);
        assert!((row[1] - expected).abs() < 1e-10, "θ = {t}");
        assert!((row[2] - 0.6).abs() < 1e-12);
        assert!((row[3] - (0.6 / (1.0 - t)).min(1.0)).abs() < 1e-10);
    }
}

#[test]
fn fig6_second_panel_and_its_mirror() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(spectra(&["figure", "--figure", "fig6", "--grid", "99", "--out", out.to_str().unwrap()]).0, 0);
    // Recipe t = 0.5, λ = 2 has upper box dimension 0.25 and Assouad
    // dimension 0.5; the runs construction contributes a zero spectrum.
    let top = rows(&read(&out, "fig6_2_assouad.csv"));
    let bottom = rows(&read(&out, "fig6_2_lower.csv"));
    for (a, l) in top.iter().zip(&bottom) {
        let t = a[0];
        let expected = (0.25 / (1.0 - t)).min(0.5);
        assert!((a[1] - expected).abs() < 1e-10, "θ = {t}");
        assert!((l[1] - (1.0 - expected)).abs() < 1e-10);
        assert!((a[3] - (0.25 / (1.0 - t)).min(1.0)).abs() < 1e-10);
        assert_eq!((l[2], l[3]), (0.0, 0.75));
    }
}

#[test]
fn moran_and_tails_reports() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "m.json", r#"{"c":{"constant":0.5},"N":{"recipe":{"t":0.5,"lambda":2,"f_base":10}}}"#);
    let out = tmp.path().join("m");
    let (code, err) = spectra(&["moran", "--config", &cfg, "--grid", "9", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let curve = SpectrumCurve::from_json(&read(&out, "assouad.json")).unwrap();
    for (t, v) in curve.points() {
        assert!((v - (0.25 / (1.0 - t)).min(0.5)).abs() < 0.05, "θ = {t}: {v}");
    }

    let cfg = write(tmp.path(), "t.json", r#"{"periodic":{"q":4,"residues":[1,2]}}"#);
    let out = tmp.path().join("t");
    let (code, err) = spectra(&["tails", "--config", &cfg, "--k-max", "20000", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let report: serde_json::Value = serde_json::from_str(&read(&out, "report.json")).unwrap();
    assert_eq!(report["checks"]["exact"]["upper_tail"], 0.5);
    assert_eq!(report["banach"]["upper"], 1.0);
    assert!(report["checks"]["violations"].as_array().unwrap().is_empty());
}
