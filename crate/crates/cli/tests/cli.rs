//! End-to-end checks of the command line binary: exit codes, artifact
//! determinism and the timing table contract.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fdtd-mor"))
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fdtd_mor_cli_{tag}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn small_cavity_scenario(dir: &Path, out_name: &str, engine: &str, s: f64) -> PathBuf {
    let text = format!(
        r#"
[grid]
dimensionality = 2
cell_counts = [16, 16]
cell_sizes = [0.02, 0.02]

[materials]

[boundaries]
x_min = "pec"
x_max = "pec"
y_min = "pec"
y_max = "pec"

[[sources]]
kind = "electric"
component = "ez"
cells = [[5, 7]]
waveform = {{ gaussian = {{ f_max = 1.2e9 }} }}

[[probes]]
name = "p0"
component = "ez"
cell = [11, 4]

[run]
engine = "{engine}"
s_factor = {s}
steps = 600

[reduction]
order = 16
f_max = 1.2e9

[outputs]
directory = "{}"
eigenvalues = true
singular_values = true
"#,
        dir.join(out_name).display()
    );
    let path = dir.join(format!("{out_name}.toml"));
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_produces_artifacts_and_exit_zero() {
    let dir = scratch("run");
    let scenario = small_cavity_scenario(&dir, "full", "full", 0.99);
    let out = bin().arg("run").arg(&scenario).output().unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "timeseries.csv",
        "spectrum_p0.csv",
        "resonances_p0.csv",
        "timing.txt",
        "eigenvalues.csv",
        "singular_values.csv",
    ] {
        assert!(dir.join("full").join(f).exists(), "missing {f}");
    }
}

#[test]
fn identical_runs_are_bit_identical() {
    let dir = scratch("determinism");
    let scenario = small_cavity_scenario(&dir, "a", "reduced", 1.5);
    assert!(bin().arg("run").arg(&scenario).status().unwrap().success());
    let first = std::fs::read(dir.join("a/timeseries.csv")).unwrap();
    let first_spec = std::fs::read(dir.join("a/spectrum_p0.csv")).unwrap();
    assert!(bin().arg("run").arg(&scenario).status().unwrap().success());
    let second = std::fs::read(dir.join("a/timeseries.csv")).unwrap();
    let second_spec = std::fs::read(dir.join("a/spectrum_p0.csv")).unwrap();
    assert_eq!(first, second, "time series differ between identical runs");
    assert_eq!(first_spec, second_spec, "spectra differ between identical runs");
}

#[test]
fn timing_total_is_sum_of_phases() {
    let dir = scratch("timing");
    let scenario = small_cavity_scenario(&dir, "t", "reduced", 0.99);
    assert!(bin().arg("run").arg(&scenario).status().unwrap().success());
    let text = std::fs::read_to_string(dir.join("t/timing.txt")).unwrap();
    let data_line = text.lines().nth(1).expect("timing data row");
    let fields: Vec<&str> = data_line.split(',').collect();
    let setup: f64 = fields[1].parse().unwrap();
    let mor: f64 = fields[2].parse().unwrap();
    let run: f64 = fields[3].parse().unwrap();
    let total: f64 = fields[4].parse().unwrap();
    assert!(
        (total - (setup + mor + run)).abs() <= 1e-3,
        "total {total} vs sum {}",
        setup + mor + run
    );
}

#[test]
fn config_error_exits_one() {
    let dir = scratch("config_err");
    let path = dir.join("bad.toml");
    std::fs::write(&path, "[grid]\nnot_a_key = 1\n").unwrap();
    let out = bin().arg("run").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn divergence_exits_two() {
    let dir = scratch("divergence");
    // full engine above the CFL limit blows up
    let scenario = small_cavity_scenario(&dir, "boom", "full", 1.5);
    let out = bin().arg("run").arg(&scenario).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn compare_identical_passes_and_threshold_fails() {
    let dir = scratch("compare");
    let scenario = small_cavity_scenario(&dir, "ref", "full", 0.99);
    assert!(bin().arg("run").arg(&scenario).status().unwrap().success());
    // identical artifact directories compare clean
    let out = bin()
        .arg("compare")
        .arg(dir.join("ref"))
        .arg(dir.join("ref"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(report.contains("PASS"), "{report}");

    // a candidate with shifted resonances fails the threshold with code 3
    let cand = dir.join("cand");
    std::fs::create_dir_all(&cand).unwrap();
    let src = std::fs::read_to_string(dir.join("ref/resonances_p0.csv")).unwrap();
    let mut shifted = String::new();
    for line in src.lines() {
        if line.starts_with('#') || line.starts_with("index") {
            shifted.push_str(line);
            shifted.push('\n');
            continue;
        }
        let mut fields: Vec<String> = line.split(',').map(|s| s.to_string()).collect();
        let f: f64 = fields[1].parse().unwrap();
        fields[1] = format!("{:e}", f * 1.05);
        shifted.push_str(&fields.join(","));
        shifted.push('\n');
    }
    std::fs::write(cand.join("resonances_p0.csv"), shifted).unwrap();
    let out = bin()
        .arg("compare")
        .arg(dir.join("ref"))
        .arg(&cand)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn gen_templates_run_end_to_end() {
    let dir = scratch("gen");
    let path = dir.join("cavity.toml");
    let status = bin()
        .arg("gen")
        .arg("cavity2d")
        .arg("--out")
        .arg(&path)
        .arg("--cells")
        .arg("14")
        .arg("--steps")
        .arg("400")
        .arg("--out-dir")
        .arg(dir.join("cavity_out").to_str().unwrap())
        .status()
        .unwrap();
    assert!(status.success());
    assert!(bin().arg("run").arg(&path).status().unwrap().success());
    assert!(dir.join("cavity_out/timeseries.csv").exists());
}

#[test]
fn eigen_verb_writes_spectra() {
    let dir = scratch("eigen");
    let scenario = small_cavity_scenario(&dir, "eig", "full", 1.98);
    let out = bin().arg("eigen").arg(&scenario).output().unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.join("eig/eigenvalues.csv").exists());
    assert!(dir.join("eig/singular_values.csv").exists());
    // above the CFL limit the clipped spectrum is also written
    assert!(dir.join("eig/singular_values_enforced.csv").exists());
    assert!(dir.join("eig/eigenvalues_enforced.csv").exists());
    // the unenforced update has unstable eigenvalues, the enforced none
    let count_outside = |name: &str| {
        let text = std::fs::read_to_string(dir.join("eig").join(name)).unwrap();
        text.lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with("index"))
            .filter(|l| {
                let m: f64 = l.split(',').nth(3).unwrap().parse().unwrap();
                m > 1.0 + 1e-9
            })
            .count()
    };
    assert!(count_outside("eigenvalues.csv") > 0);
    assert_eq!(count_outside("eigenvalues_enforced.csv"), 0);
}

#[test]
fn batch_runs_both_scenarios() {
    let dir = scratch("batch");
    let a = small_cavity_scenario(&dir, "b1", "full", 0.99);
    let b = small_cavity_scenario(&dir, "b2", "reduced", 0.99);
    let status = bin()
        .arg("run")
        .arg(&a)
        .arg(&b)
        .arg("--batch")
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.join("b1/timeseries.csv").exists());
    assert!(dir.join("b2/timeseries.csv").exists());
}
