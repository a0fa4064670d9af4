//! Scenario execution: assemble, reduce, enforce, simulate, post-process,
//! and write the artifact set.

use crate::scenario::{content_hash, Engine, Validated};
use fdtd_mor::assembly::{assemble, build_update_pair, SystemMatrices};
use fdtd_mor::error::FdtdError;
use fdtd_mor::fdtd::run_full;
use fdtd_mor::grid::cfl_max_timestep;
use fdtd_mor::postprocess::{
    extract_s_params, find_resonances, frequency_response, SParams, Spectrum,
};
use fdtd_mor::reduced::{probe_rows, run_reduced};
use fdtd_mor::reduction::{build_basis, make_expansion_points, project, ReducedModel};
use fdtd_mor::stability::{
    curl_singular_values_full, enforce_stability, leapfrog_eigenvalues_lossless,
    reduced_stability_check, update_eigenvalues,
};
use fdtd_mor::timeseries::TimeSeries;
use num_complex::Complex64;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Engine(#[from] FdtdError),
    #[error("pipeline i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

/// Wall-clock phase breakdown mirroring the experiment tables.
#[derive(Debug, Clone)]
pub struct TimingTable {
    /// reduced state dimension, empty for the full engine
    pub size_label: String,
    pub setup_s: f64,
    pub mor_s: f64,
    pub run_s: f64,
    pub total_s: f64,
    pub speedup: Option<f64>,
}

impl TimingTable {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("Size,Setup,MOR,Run,Total,Speedup\n");
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{}\n",
            self.size_label,
            self.setup_s,
            self.mor_s,
            self.run_s,
            self.total_s,
            self.speedup
                .map_or("-".to_string(), |s| format!("{s:.3}")),
        ));
        out
    }
}

pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub timeseries: TimeSeries,
    pub spectrum: Option<Spectrum>,
    pub timing: TimingTable,
    pub n_unknowns: usize,
    pub reduced_order: Option<usize>,
    pub model: Option<ReducedModel>,
    pub s_params: Option<SParams>,
}

fn provenance(v: &Validated, dt: f64) -> String {
    format!(
        "fdtd-mor {} scenario={:016x} dt={:e} s_factor={}",
        env!("CARGO_PKG_VERSION"),
        content_hash(&v.scenario),
        dt,
        v.scenario.run.s_factor
    )
}

fn write_spectrum_csv(
    path: &Path,
    freq: &[f64],
    amps: &[Complex64],
    provenance: &str,
) -> Result<(), PipelineError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "# {provenance}")?;
    writeln!(w, "frequency,real,imaginary,magnitude_db")?;
    for (f, a) in freq.iter().zip(amps) {
        let db = 20.0 * a.norm().max(1e-300).log10();
        writeln!(w, "{f:e},{:e},{:e},{db:e}", a.re, a.im)?;
    }
    Ok(())
}

fn write_eigen_csv(
    path: &Path,
    values: &[Complex64],
    provenance: &str,
) -> Result<(), PipelineError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "# {provenance}")?;
    writeln!(w, "index,real,imaginary,magnitude")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(w, "{i},{:e},{:e},{:e}", v.re, v.im, v.norm())?;
    }
    Ok(())
}

fn write_resonances_csv(
    path: &Path,
    peaks: &[fdtd_mor::postprocess::Resonance],
    provenance: &str,
) -> Result<(), PipelineError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "# {provenance}")?;
    writeln!(w, "index,frequency_hz,magnitude")?;
    for (i, p) in peaks.iter().enumerate() {
        writeln!(w, "{i},{:e},{:e}", p.frequency, p.magnitude)?;
    }
    Ok(())
}

/// Runs one scenario and writes its artifacts under `base` (or the scenario
/// output directory when `base` is `None`).
pub fn run_scenario(v: &Validated, base: Option<&Path>) -> Result<RunOutcome, PipelineError> {
    let out_dir = match base {
        Some(b) => b.join(&v.scenario.outputs.directory),
        None => PathBuf::from(&v.scenario.outputs.directory),
    };
    std::fs::create_dir_all(&out_dir)?;

    // setup phase: assembly and the CFL timestep
    let t_setup = Instant::now();
    let matrices = assemble(&v.grid, &v.materials, &v.boundaries, &v.sources)?;
    let dt_max = cfl_max_timestep(&v.grid, &v.materials)?;
    let dt = v.scenario.run.s_factor * dt_max;
    let mut setup_s = t_setup.elapsed().as_secs_f64();
    let steps = v.scenario.run.steps;
    let prov = provenance(v, dt);

    let mut mor_s = 0.0;
    let run_s;
    let mut reduced_order = None;
    let mut model_out = None;

    let ts = match v.engine {
        Engine::Full => {
            let (ts, phases) = run_full(&matrices, &v.sources, &v.probes, dt, steps)?;
            setup_s += phases.setup_s;
            run_s = phases.run_s;

            if v.scenario.outputs.eigenvalues || v.scenario.outputs.singular_values {
                let sigmas = curl_singular_values_full(&matrices);
                if v.scenario.outputs.singular_values {
                    let vals: Vec<Complex64> =
                        sigmas.iter().map(|&s| Complex64::new(s, 0.0)).collect();
                    write_eigen_csv(&out_dir.join("singular_values.csv"), &vals, &prov)?;
                }
                if v.scenario.outputs.eigenvalues {
                    let lossless = matrices.d_sig_e.iter().all(|&s| s == 0.0)
                        && matrices.d_sig_m.iter().all(|&s| s == 0.0);
                    let eigs = if lossless {
                        Some(leapfrog_eigenvalues_lossless(&sigmas, dt, matrices.n()))
                    } else if matrices.n() <= 2000 {
                        let pair = build_update_pair(&matrices, dt)?;
                        Some(update_eigenvalues(&pair.r_dense(), &pair.f_dense())?)
                    } else {
                        eprintln!(
                            "eigenvalue dump skipped: lossy system with {} unknowns",
                            matrices.n()
                        );
                        None
                    };
                    if let Some(e) = eigs {
                        write_eigen_csv(&out_dir.join("eigenvalues.csv"), &e, &prov)?;
                    }
                }
            }
            ts
        }
        Engine::Reduced => {
            let r = v.scenario.reduction.as_ref().expect("validated");
            let t_mor = Instant::now();
            let points = make_expansion_points(r.radius, r.arc_half_count, r.f_max, dt)?;
            let n_target = r.order / 2;
            let basis = build_basis(
                &matrices,
                &points,
                n_target,
                dt,
                v.solve_method,
                v.solve_tolerance,
            )?;
            let mut model = project(&matrices, &basis, dt)?;
            let s_factor = v.scenario.run.s_factor;
            let enforce = r.enforce.unwrap_or(s_factor >= 1.0);
            if enforce {
                let enforced = enforce_stability(&model, dt, r.gamma)?;
                if s_factor < 1.0 {
                    // explicit request below the CFL limit must be a no-op
                    let rel = (&enforced.k - &model.k).norm() / model.k.norm().max(1e-300);
                    if rel > 1e-9 {
                        return Err(PipelineError::Other(format!(
                            "enforcement below the CFL limit changed the model by {rel:.3e}"
                        )));
                    }
                }
                model = enforced;
            }
            mor_s = t_mor.elapsed().as_secs_f64();
            reduced_order = Some(2 * basis.n_reduced());

            let rows = probe_rows(&matrices, &basis, &v.probes)?;
            let (ts, phases) = run_reduced(&model, &v.sources, &rows, dt, steps)?;
            setup_s += phases.setup_s;
            run_s = phases.run_s;

            if v.scenario.outputs.singular_values {
                let report = reduced_stability_check(&model, dt)?;
                let vals: Vec<Complex64> = report
                    .singular_values
                    .iter()
                    .map(|&s| Complex64::new(s, 0.0))
                    .collect();
                write_eigen_csv(&out_dir.join("singular_values.csv"), &vals, &prov)?;
            }
            if v.scenario.outputs.eigenvalues {
                let eigs = update_eigenvalues(&model.r_dense(dt), &model.f_dense(dt))?;
                write_eigen_csv(&out_dir.join("eigenvalues.csv"), &eigs, &prov)?;
            }
            if v.scenario.outputs.model_binary {
                model.write_binary(&out_dir.join("model.bin"))?;
            }
            model_out = Some(model);
            ts
        }
    };

    if v.scenario.outputs.matrix_dump {
        matrices.write_debug_dump(&out_dir.join("matrices"))?;
    }
    if v.scenario.outputs.timeseries {
        ts.write_csv_file(&out_dir.join("timeseries.csv"), Some(&prov))?;
    }

    let mut spectrum = None;
    if v.scenario.outputs.spectrum || v.scenario.outputs.resonances {
        let sp = frequency_response(&ts)?;
        for (i, name) in sp.names.iter().enumerate() {
            if v.scenario.outputs.spectrum {
                write_spectrum_csv(
                    &out_dir.join(format!("spectrum_{name}.csv")),
                    &sp.freq,
                    &sp.amps[i],
                    &prov,
                )?;
            }
            if v.scenario.outputs.resonances {
                let peaks = find_resonances(
                    &sp.freq,
                    &sp.amps[i],
                    v.scenario.outputs.resonance_prominence,
                    v.scenario.outputs.resonance_count,
                )?;
                write_resonances_csv(
                    &out_dir.join(format!("resonances_{name}.csv")),
                    &peaks,
                    &prov,
                )?;
            }
        }
        spectrum = Some(sp);
    }

    // S-parameters against a previously recorded incident-only run
    let mut s_params = None;
    if let Some(ref_dir) = &v.scenario.outputs.s_params_reference {
        let ref_path = match base {
            Some(b) => b.join(ref_dir),
            None => PathBuf::from(ref_dir),
        };
        let incident = TimeSeries::read_csv_file(&ref_path.join("timeseries.csv"))?;
        let sp = extract_port_s_params(&incident, &ts)?;
        write_spectrum_csv(&out_dir.join("s11.csv"), &sp.freq, &sp.s11, &prov)?;
        write_spectrum_csv(&out_dir.join("s21.csv"), &sp.freq, &sp.s21, &prov)?;
        s_params = Some(sp);
    }

    // paired full-order reference for the speedup column, run at the same
    // step count with a CFL-safe timestep
    let mut speedup = None;
    if v.scenario.outputs.reference_full && v.engine == Engine::Reduced {
        let dt_ref = dt_max * v.scenario.run.s_factor.min(0.99);
        let t_ref = Instant::now();
        let (_ts_ref, _) = run_full(&matrices, &v.sources, &v.probes, dt_ref, steps)?;
        let ref_total = t_ref.elapsed().as_secs_f64();
        let own_total = setup_s + mor_s + run_s;
        speedup = Some(ref_total / own_total.max(1e-12));
    }

    let total_s = setup_s + mor_s + run_s;
    let timing = TimingTable {
        size_label: reduced_order.map_or(String::new(), |o| o.to_string()),
        setup_s,
        mor_s,
        run_s,
        total_s,
        speedup,
    };
    std::fs::write(out_dir.join("timing.txt"), timing.render())?;

    Ok(RunOutcome {
        out_dir,
        timeseries: ts,
        spectrum,
        timing,
        n_unknowns: matrices.n(),
        reduced_order,
        model: model_out,
        s_params,
    })
}

/// Two-run S-parameter extraction on the first two probes (ports 1 and 2).
pub fn extract_port_s_params(
    incident: &TimeSeries,
    total: &TimeSeries,
) -> Result<SParams, PipelineError> {
    if incident.names.len() < 2 || total.names.len() < 2 {
        return Err(PipelineError::Other(
            "S-parameter extraction needs port1 and port2 probes in both runs".into(),
        ));
    }
    if incident.names[..2] != total.names[..2] {
        return Err(PipelineError::Other(format!(
            "probe names differ between runs: {:?} vs {:?}",
            &incident.names[..2],
            &total.names[..2]
        )));
    }
    let single = |ts: &TimeSeries, idx: usize| TimeSeries {
        dt: ts.dt,
        names: vec![ts.names[idx].clone()],
        data: vec![ts.data[idx].clone()],
    };
    Ok(extract_s_params(
        &single(incident, 0),
        &single(total, 0),
        &single(total, 1),
    )?)
}

/// Update-eigenvalue dump for a scenario without running a simulation;
/// writes the spectra before and (when enforcement applies) after clipping.
pub fn eigen_dump(v: &Validated, base: Option<&Path>) -> Result<PathBuf, PipelineError> {
    let out_dir = match base {
        Some(b) => b.join(&v.scenario.outputs.directory),
        None => PathBuf::from(&v.scenario.outputs.directory),
    };
    std::fs::create_dir_all(&out_dir)?;
    let matrices = assemble(&v.grid, &v.materials, &v.boundaries, &v.sources)?;
    let dt = v.scenario.run.s_factor * cfl_max_timestep(&v.grid, &v.materials)?;
    let prov = provenance(v, dt);
    let lossless = matrices.d_sig_e.iter().all(|&s| s == 0.0)
        && matrices.d_sig_m.iter().all(|&s| s == 0.0);

    let sigmas = curl_singular_values_full(&matrices);
    let sig_c: Vec<Complex64> = sigmas.iter().map(|&s| Complex64::new(s, 0.0)).collect();
    write_eigen_csv(&out_dir.join("singular_values.csv"), &sig_c, &prov)?;

    let eigs = if lossless {
        leapfrog_eigenvalues_lossless(&sigmas, dt, matrices.n())
    } else {
        if matrices.n() > 2000 {
            return Err(PipelineError::Other(format!(
                "dense eigenvalue dump limited to 2000 unknowns for lossy systems, got {}",
                matrices.n()
            )));
        }
        let pair = build_update_pair(&matrices, dt)?;
        update_eigenvalues(&pair.r_dense(), &pair.f_dense())?
    };
    write_eigen_csv(&out_dir.join("eigenvalues.csv"), &eigs, &prov)?;

    // above the CFL limit, also dump the spectrum after clipping the
    // coupling block of the full equations
    if v.scenario.run.s_factor >= 1.0 {
        let gamma = v
            .scenario
            .reduction
            .as_ref()
            .map_or(fdtd_mor::stability::DEFAULT_GAMMA, |r| r.gamma);
        let k_new = fdtd_mor::stability::enforce_stability_full(&matrices, dt, gamma)?;
        let sig_after = fdtd_mor::stability::whitened_singular_values_dense(
            &matrices.d_eps,
            &matrices.d_mu,
            &k_new,
        );
        let sig_after_c: Vec<Complex64> =
            sig_after.iter().map(|&s| Complex64::new(s, 0.0)).collect();
        write_eigen_csv(
            &out_dir.join("singular_values_enforced.csv"),
            &sig_after_c,
            &prov,
        )?;
        if lossless {
            let eigs_after = leapfrog_eigenvalues_lossless(&sig_after, dt, matrices.n());
            write_eigen_csv(&out_dir.join("eigenvalues_enforced.csv"), &eigs_after, &prov)?;
        }
    }
    Ok(out_dir)
}

/// Helper shared by tests and the comparison verb: signature of the curl
/// system assembled from a validated scenario.
pub fn assemble_validated(v: &Validated) -> Result<(SystemMatrices, f64), PipelineError> {
    let matrices = assemble(&v.grid, &v.materials, &v.boundaries, &v.sources)?;
    let dt_max = cfl_max_timestep(&v.grid, &v.materials)?;
    Ok((matrices, dt_max))
}
