use std::io::Write;
use std::path::{Path, PathBuf};

use fractal_spectra::numfmt::{fmt_sig, round_sig, SIG_DIGITS};
use fractal_spectra::spectrum::{DimensionSummary, SpectrumCurve};
use serde::Serialize;

use crate::CliError;

/// Files produced by one run, held in memory until everything has been
/// computed so a failing run leaves nothing behind.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Bundle {
    files: Vec<(String, String)>,
}

impl Bundle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, contents: impl Into<String>) {
        self.files.push((name.into(), contents.into()));
    }

    pub fn add_json<T: Serialize>(&mut self, name: impl Into<String>, value: &T) {
        let mut text = serde_json::to_string_pretty(value).expect("report serializes");
        text.push('\n');
        self.add(name, text);
    }

    /// Adds `<stem>.csv` and `<stem>.json`.
    pub fn add_curve(&mut self, stem: &str, curve: &SpectrumCurve) {
        self.add(format!("{stem}.csv"), curve.to_csv());
        let mut json = curve.to_json();
        json.push('\n');
        self.add(format!("{stem}.json"), json);
    }

    pub fn files(&self) -> &[(String, String)] {
        &self.files
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    /// Writes every file into `dir` via a temporary file and a rename.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        let io = |path: &Path, source: std::io::Error| CliError::Io {
            path: path.to_path_buf(),
            source,
        };
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, contents) in &self.files {
            let target = dir.join(name);
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io(dir, e))?;
            tmp.write_all(contents.as_bytes()).map_err(|e| io(&target, e))?;
            tmp.persist(&target).map_err(|e| io(&target, e.error))?;
            written.push(target);
        }
        Ok(written)
    }
}

pub(crate) fn round(x: f64) -> f64 {
    round_sig(x, SIG_DIGITS)
}

/// CSV with columns `theta,value,envelope_lo,envelope_hi`.
pub(crate) fn envelope_csv(curve: &SpectrumCurve, dims: &DimensionSummary) -> Result<String, CliError> {
    let mut out = String::from("theta,value,envelope_lo,envelope_hi\n");
    for (t, v) in curve.points() {
        let (lo, hi) = dims.envelope(curve.kind, t)?;
        let row: Vec<String> = [t, v, lo, hi].iter().map(|x| fmt_sig(*x, SIG_DIGITS)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_replaces_files_and_leaves_no_temporaries() {
        let dir = tempfile::TempDir::new().unwrap();
        let out = dir.path().join("nested");
        let mut bundle = Bundle::new();
        bundle.add("a.txt", "first");
        bundle.write(&out).unwrap();
        let mut bundle = Bundle::new();
        bundle.add("a.txt", "second");
        bundle.add_json("b.json", &[round(1.0 / 3.0)]);
        bundle.write(&out).unwrap();
        let mut names: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert_eq!(names, ["a.txt", "b.json"]);
        assert_eq!(std::fs::read_to_string(out.join("a.txt")).unwrap(), "second");
        assert_eq!(bundle.get("b.json"), Some("[\n  0.333333333333\n]\n"));
    }

    #[test]
    fn envelope_columns() {
        let grid = fractal_spectra::spectrum::ThetaGrid::new(vec![0.5]).unwrap();
        let dims = DimensionSummary::new(0.1, 0.2, 0.3, 0.9, 1).unwrap();
        let up = SpectrumCurve::new(grid.clone(), vec![0.5], fractal_spectra::spectrum::SpectrumKind::Assouad, 1).unwrap();
        assert_eq!(envelope_csv(&up, &dims).unwrap(), "theta,value,envelope_lo,envelope_hi\n0.5,0.5,0.3,0.6\n");
        let down = SpectrumCurve::new(grid, vec![0.15], fractal_spectra::spectrum::SpectrumKind::Lower, 1).unwrap();
        assert_eq!(envelope_csv(&down, &dims).unwrap(), "theta,value,envelope_lo,envelope_hi\n0.5,0.15,0.1,0.2\n");
    }
}
