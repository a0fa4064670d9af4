//! Comparison of two run artifact directories: per-resonance relative
//! errors and the in-band S21 magnitude difference.

use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("comparison i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("comparison: {0}")]
    Mismatch(String),
    #[error("bad artifact {path}: {reason}")]
    BadArtifact { path: String, reason: String },
}

#[derive(Debug, Clone, Copy)]
pub struct CompareThresholds {
    /// maximum relative error per paired resonance
    pub resonance_rel: f64,
    /// maximum |dS21| in dB over the common band
    pub ds21_db: f64,
}

impl Default for CompareThresholds {
    fn default() -> Self {
        CompareThresholds {
            resonance_rel: 0.01,
            ds21_db: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ResonancePair {
    pub probe: String,
    pub reference_hz: f64,
    pub candidate_hz: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub resonances: Vec<ResonancePair>,
    pub max_resonance_error: f64,
    pub max_ds21_db: Option<f64>,
    pub pass: bool,
}

impl CompareReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for p in &self.resonances {
            out.push_str(&format!(
                "probe {}: ref {:.6e} Hz cand {:.6e} Hz rel_err {:.3e}\n",
                p.probe, p.reference_hz, p.candidate_hz, p.relative_error
            ));
        }
        out.push_str(&format!(
            "max resonance relative error: {:.3e}\n",
            self.max_resonance_error
        ));
        if let Some(d) = self.max_ds21_db {
            out.push_str(&format!("band max |dS21|: {d:.3} dB\n"));
        }
        out.push_str(if self.pass { "PASS\n" } else { "FAIL\n" });
        out
    }
}

fn read_data_rows(path: &Path, cols: usize) -> Result<Vec<Vec<f64>>, CompareError> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.iter().any(|f| f.parse::<f64>().is_err()) {
            continue; // header row
        }
        if fields.len() != cols {
            return Err(CompareError::BadArtifact {
                path: path.display().to_string(),
                reason: format!("expected {cols} columns, found {}", fields.len()),
            });
        }
        rows.push(fields.iter().map(|f| f.parse().unwrap()).collect());
    }
    Ok(rows)
}

/// (frequency_hz, magnitude) pairs of a resonances CSV.
pub fn read_resonances(path: &Path) -> Result<Vec<(f64, f64)>, CompareError> {
    Ok(read_data_rows(path, 3)?
        .into_iter()
        .map(|r| (r[1], r[2]))
        .collect())
}

/// (frequency_hz, magnitude_db) pairs of a spectrum/S-parameter CSV.
pub fn read_magnitude_db(path: &Path) -> Result<Vec<(f64, f64)>, CompareError> {
    Ok(read_data_rows(path, 4)?
        .into_iter()
        .map(|r| (r[0], r[3]))
        .collect())
}

fn probe_names_from_resonance_files(dir: &Path) -> Result<Vec<String>, CompareError> {
    let mut names = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let file = entry.file_name().to_string_lossy().into_owned();
        if let Some(rest) = file
            .strip_prefix("resonances_")
            .and_then(|r| r.strip_suffix(".csv"))
        {
            names.push(rest.to_string());
        }
    }
    names.sort();
    Ok(names)
}

fn interp_db(grid: &[(f64, f64)], f: f64) -> Option<f64> {
    if grid.is_empty() || f < grid[0].0 || f > grid[grid.len() - 1].0 {
        return None;
    }
    let idx = grid.partition_point(|&(g, _)| g <= f);
    if idx == 0 {
        return Some(grid[0].1);
    }
    if idx >= grid.len() {
        return Some(grid[grid.len() - 1].1);
    }
    let (f0, d0) = grid[idx - 1];
    let (f1, d1) = grid[idx];
    if f1 == f0 {
        return Some(d0);
    }
    Some(d0 + (d1 - d0) * (f - f0) / (f1 - f0))
}

/// Compares candidate artifacts against reference artifacts: resonances are
/// paired reference-to-nearest-candidate per probe; when both directories
/// carry `s21.csv` the in-band magnitude difference is evaluated on the
/// reference frequency grid.
pub fn compare_dirs(
    ref_dir: &Path,
    cand_dir: &Path,
    thresholds: CompareThresholds,
) -> Result<CompareReport, CompareError> {
    let ref_probes = probe_names_from_resonance_files(ref_dir)?;
    let cand_probes = probe_names_from_resonance_files(cand_dir)?;
    if ref_probes.is_empty() {
        return Err(CompareError::Mismatch(format!(
            "no resonance artifacts in {}",
            ref_dir.display()
        )));
    }
    if ref_probes != cand_probes {
        return Err(CompareError::Mismatch(format!(
            "probe sets differ: {ref_probes:?} vs {cand_probes:?}"
        )));
    }

    let mut pairs = Vec::new();
    let mut max_err: f64 = 0.0;
    for probe in &ref_probes {
        let file = format!("resonances_{probe}.csv");
        let ref_peaks = read_resonances(&ref_dir.join(&file))?;
        let cand_peaks = read_resonances(&cand_dir.join(&file))?;
        for &(rf, _) in &ref_peaks {
            let nearest = cand_peaks
                .iter()
                .map(|&(cf, _)| cf)
                .min_by(|a, b| {
                    (a - rf).abs().partial_cmp(&(b - rf).abs()).unwrap()
                });
            let Some(cf) = nearest else {
                return Err(CompareError::Mismatch(format!(
                    "candidate has no resonances for probe {probe}"
                )));
            };
            let rel = (cf - rf).abs() / rf.abs().max(1e-300);
            max_err = max_err.max(rel);
            pairs.push(ResonancePair {
                probe: probe.clone(),
                reference_hz: rf,
                candidate_hz: cf,
                relative_error: rel,
            });
        }
    }

    // S21 comparison when both runs produced it
    let mut max_ds21 = None;
    let (ref_s21, cand_s21) = (ref_dir.join("s21.csv"), cand_dir.join("s21.csv"));
    if ref_s21.exists() && cand_s21.exists() {
        let a = read_magnitude_db(&ref_s21)?;
        let b = read_magnitude_db(&cand_s21)?;
        let mut worst: f64 = 0.0;
        let mut overlap = false;
        for &(f, db_ref) in &a {
            if let Some(db_cand) = interp_db(&b, f) {
                overlap = true;
                worst = worst.max((db_cand - db_ref).abs());
            }
        }
        if !overlap {
            return Err(CompareError::Mismatch(
                "S21 bands do not overlap".into(),
            ));
        }
        max_ds21 = Some(worst);
    }

    let pass = max_err <= thresholds.resonance_rel
        && max_ds21.map_or(true, |d| d <= thresholds.ds21_db);
    Ok(CompareReport {
        resonances: pairs,
        max_resonance_error: max_err,
        max_ds21_db: max_ds21,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(path: &Path, text: &str) {
        std::fs::write(path, text).unwrap();
    }

    fn resonance_csv(freqs: &[f64]) -> String {
        let mut s = String::from("# test\nindex,frequency_hz,magnitude\n");
        for (i, f) in freqs.iter().enumerate() {
            s.push_str(&format!("{i},{f:e},1.0\n"));
        }
        s
    }

    #[test]
    fn identical_artifacts_give_zero_errors() {
        let dir = std::env::temp_dir().join("fdtd_mor_cmp_identical");
        let (a, b) = (dir.join("a"), dir.join("b"));
        std::fs::create_dir_all(&a).unwrap();
        std::fs::create_dir_all(&b).unwrap();
        let csv = resonance_csv(&[2.1e8, 3.3e8]);
        write(&a.join("resonances_p0.csv"), &csv);
        write(&b.join("resonances_p0.csv"), &csv);
        let report = compare_dirs(&a, &b, CompareThresholds::default()).unwrap();
        assert!(report.pass);
        assert_eq!(report.max_resonance_error, 0.0);
        assert_eq!(report.resonances.len(), 2);
    }

    #[test]
    fn one_bin_shift_reports_bin_over_frequency() {
        let dir = std::env::temp_dir().join("fdtd_mor_cmp_shift");
        let (a, b) = (dir.join("a"), dir.join("b"));
        std::fs::create_dir_all(&a).unwrap();
        std::fs::create_dir_all(&b).unwrap();
        let bin = 0.5e6;
        let f0 = 2.0e8;
        write(&a.join("resonances_p0.csv"), &resonance_csv(&[f0]));
        write(&b.join("resonances_p0.csv"), &resonance_csv(&[f0 + bin]));
        let report = compare_dirs(&a, &b, CompareThresholds::default()).unwrap();
        let expect = bin / f0;
        assert!((report.max_resonance_error - expect).abs() < 1e-12);
    }

    #[test]
    fn mismatched_probes_rejected() {
        let dir = std::env::temp_dir().join("fdtd_mor_cmp_mismatch");
        let (a, b) = (dir.join("a"), dir.join("b"));
        std::fs::create_dir_all(&a).unwrap();
        std::fs::create_dir_all(&b).unwrap();
        write(&a.join("resonances_p0.csv"), &resonance_csv(&[1e8]));
        write(&b.join("resonances_other.csv"), &resonance_csv(&[1e8]));
        assert!(matches!(
            compare_dirs(&a, &b, CompareThresholds::default()),
            Err(CompareError::Mismatch(_))
        ));
    }

    #[test]
    fn s21_band_difference() {
        let dir = std::env::temp_dir().join("fdtd_mor_cmp_s21");
        let (a, b) = (dir.join("a"), dir.join("b"));
        std::fs::create_dir_all(&a).unwrap();
        std::fs::create_dir_all(&b).unwrap();
        write(&a.join("resonances_p.csv"), &resonance_csv(&[1e9]));
        write(&b.join("resonances_p.csv"), &resonance_csv(&[1e9]));
        let s21 = |offset: f64| {
            let mut s = String::from("frequency,real,imaginary,magnitude_db\n");
            for i in 0..20 {
                let f = 1e9 + i as f64 * 1e8;
                s.push_str(&format!("{f:e},1,0,{:e}\n", -3.0 + offset));
            }
            s
        };
        write(&a.join("s21.csv"), &s21(0.0));
        write(&b.join("s21.csv"), &s21(0.7));
        let report = compare_dirs(&a, &b, CompareThresholds::default()).unwrap();
        assert!((report.max_ds21_db.unwrap() - 0.7).abs() < 1e-9);
        assert!(report.pass);
        let strict = compare_dirs(
            &a,
            &b,
            CompareThresholds {
                resonance_rel: 0.01,
                ds21_db: 0.5,
            },
        )
        .unwrap();
        assert!(!strict.pass);
    }
}
