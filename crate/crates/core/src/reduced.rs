//! Leap-frog advance of the reduced model and probe reconstruction.
//!
//! The reduced update keeps the two-sweep structure: the E block solves
//! against `De/dt + Dse/2`, the H block against `Dm/dt + Dsm/2`, both dense
//! and factorized once per run. Per-step cost is O(n_reduced^2) regardless
//! of the full problem size; probes are reconstructed from single rows of
//! the projection basis, never the full basis product.

use crate::assembly::SystemMatrices;
use crate::error::{FdtdError, Result};
use crate::grid::{ProbeSpec, SourceSpec};
use crate::reduction::{ProjectionBasis, ReducedModel};
use crate::timeseries::TimeSeries;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use std::time::Instant;

const DIVERGENCE_LIMIT: f64 = 1e100;
const DIVERGENCE_CHECK_EVERY: usize = 100;

/// Reduced state split into its E-like and H-like blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub e: DVector<f64>,
    pub h: DVector<f64>,
}

impl ReducedState {
    pub fn zeros(n: usize) -> Self {
        ReducedState {
            e: DVector::zeros(n),
            h: DVector::zeros(n),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.e
            .iter()
            .chain(self.h.iter())
            .fold(0.0f64, |a, &b| a.max(b.abs()))
    }
}

/// Dense two-sweep stepper with the per-block left-hand sides factorized
/// once (Cholesky; both are symmetric positive definite whenever the
/// projected materials are).
pub struct ReducedStepper {
    n: usize,
    dt: f64,
    lhs_e: Cholesky<f64, Dyn>,
    lhs_h: Cholesky<f64, Dyn>,
    rhs_e: DMatrix<f64>,
    rhs_h: DMatrix<f64>,
    k: DMatrix<f64>,
    k_t: DMatrix<f64>,
    b_e: DMatrix<f64>,
    b_h: DMatrix<f64>,
}

impl ReducedStepper {
    pub fn new(model: &ReducedModel, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(FdtdError::InvalidParameter(format!(
                "timestep must be positive, got {dt}"
            )));
        }
        let n = model.n_reduced();
        let lhs_e_mat = &model.d_eps / dt + 0.5 * &model.d_sig_e;
        let lhs_h_mat = &model.d_mu / dt + 0.5 * &model.d_sig_m;
        let lhs_e = Cholesky::new(lhs_e_mat).ok_or_else(|| {
            FdtdError::InvariantViolation("reduced E-block system is not positive definite".into())
        })?;
        let lhs_h = Cholesky::new(lhs_h_mat).ok_or_else(|| {
            FdtdError::InvariantViolation("reduced H-block system is not positive definite".into())
        })?;
        Ok(ReducedStepper {
            n,
            dt,
            lhs_e,
            lhs_h,
            rhs_e: &model.d_eps / dt - 0.5 * &model.d_sig_e,
            rhs_h: &model.d_mu / dt - 0.5 * &model.d_sig_m,
            k: model.k.clone(),
            k_t: model.k.transpose(),
            b_e: model.b.rows(0, n).into(),
            b_h: model.b.rows(n, n).into(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// One leap-frog step of `(R + F) x[n+1] = (R - F) x[n] + B u[n+1]`.
    pub fn step(&self, state: &mut ReducedState, u: &[f64]) {
        let uv = DVector::from_column_slice(u);
        // E sweep
        let mut rhs = &self.rhs_e * &state.e - &self.k * &state.h;
        if !u.is_empty() {
            rhs += &self.b_e * &uv;
        }
        state.e = self.lhs_e.solve(&rhs);
        // H sweep against the fresh E block
        let mut rhs = &self.rhs_h * &state.h + &self.k_t * &state.e;
        if !u.is_empty() {
            rhs += &self.b_h * &uv;
        }
        state.h = self.lhs_h.solve(&rhs);
    }

    fn step_noalloc(&self, state: &mut ReducedState, u: &[f64], scratch: &mut ReducedScratch) {
        scratch.rhs.gemv(1.0, &self.rhs_e, &state.e, 0.0);
        scratch.rhs.gemv(-1.0, &self.k, &state.h, 1.0);
        for (i, &ui) in u.iter().enumerate() {
            for r in 0..self.n {
                scratch.rhs[r] += self.b_e[(r, i)] * ui;
            }
        }
        state.e.copy_from(&scratch.rhs);
        self.lhs_e.solve_mut(&mut state.e);

        scratch.rhs.gemv(1.0, &self.rhs_h, &state.h, 0.0);
        scratch.rhs.gemv(1.0, &self.k_t, &state.e, 1.0);
        for (i, &ui) in u.iter().enumerate() {
            for r in 0..self.n {
                scratch.rhs[r] += self.b_h[(r, i)] * ui;
            }
        }
        state.h.copy_from(&scratch.rhs);
        self.lhs_h.solve_mut(&mut state.h);
    }
}

struct ReducedScratch {
    rhs: DVector<f64>,
}

/// Single reduced step (convenience wrapper over [`ReducedStepper`]).
pub fn step_reduced(
    state: &ReducedState,
    model: &ReducedModel,
    u: &[f64],
    dt: f64,
) -> Result<ReducedState> {
    let stepper = ReducedStepper::new(model, dt)?;
    let mut next = state.clone();
    stepper.step(&mut next, u);
    if !next.max_abs().is_finite() {
        return Err(FdtdError::Divergence {
            step: 1,
            max_abs: next.max_abs(),
        });
    }
    Ok(next)
}

/// Row of the projection basis used to reconstruct one probe.
#[derive(Debug, Clone)]
pub struct ProbeRow {
    pub name: String,
    /// true when the probe reads the E block (row of V1)
    pub electric: bool,
    pub row: DVector<f64>,
}

/// Resolves probes to single rows of the basis through the system's index
/// map.
pub fn probe_rows(
    m: &SystemMatrices,
    basis: &ProjectionBasis,
    probes: &[ProbeSpec],
) -> Result<Vec<ProbeRow>> {
    probes
        .iter()
        .map(|p| {
            let idx = m.index_of(p.component, p.cell)?;
            let (electric, row) = if idx < m.n_e {
                (true, basis.v1.row(idx).transpose())
            } else {
                (false, basis.v2.row(idx - m.n_e).transpose())
            };
            Ok(ProbeRow {
                name: p.name.clone(),
                electric,
                row,
            })
        })
        .collect()
}

/// Wall-clock phases of a reduced run.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReducedRunPhases {
    pub setup_s: f64,
    pub run_s: f64,
}

/// Advances the reduced model from rest, reconstructing probe values
/// through single basis rows at every step.
pub fn run_reduced(
    model: &ReducedModel,
    sources: &[SourceSpec],
    rows: &[ProbeRow],
    dt: f64,
    steps: usize,
) -> Result<(TimeSeries, ReducedRunPhases)> {
    if steps < 1 {
        return Err(FdtdError::InvalidParameter(
            "step count must be >= 1".into(),
        ));
    }
    if sources.len() != model.n_in() {
        return Err(FdtdError::InvalidParameter(format!(
            "{} sources supplied but the reduced model has {} inputs",
            sources.len(),
            model.n_in()
        )));
    }
    let t0 = Instant::now();
    let stepper = ReducedStepper::new(model, dt)?;
    let mut state = ReducedState::zeros(model.n_reduced());
    let mut scratch = ReducedScratch {
        rhs: DVector::zeros(model.n_reduced()),
    };
    let mut ts = TimeSeries::new(dt, rows.iter().map(|r| r.name.clone()).collect());
    let mut u = vec![0.0; sources.len()];
    let mut samples = vec![0.0; rows.len()];
    let setup_s = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    for n in 0..steps {
        let t = (n + 1) as f64 * dt;
        for (ui, src) in u.iter_mut().zip(sources) {
            *ui = src.waveform.eval(t, dt);
        }
        stepper.step_noalloc(&mut state, &u, &mut scratch);
        for (s, row) in samples.iter_mut().zip(rows) {
            let block = if row.electric { &state.e } else { &state.h };
            *s = row.row.dot(block);
        }
        ts.push(&samples);
        if (n + 1) % DIVERGENCE_CHECK_EVERY == 0 || n + 1 == steps {
            let amp = state.max_abs();
            if !amp.is_finite() || amp > DIVERGENCE_LIMIT {
                return Err(FdtdError::Divergence {
                    step: n + 1,
                    max_abs: amp,
                });
            }
        }
    }
    Ok((
        ts,
        ReducedRunPhases {
            setup_s,
            run_s: t1.elapsed().as_secs_f64(),
        },
    ))
}

/// Reconstructs probe traces from a stored reduced trajectory.
pub fn reconstruct_probes(rows: &[ProbeRow], trajectory: &[ReducedState], dt: f64) -> TimeSeries {
    let mut ts = TimeSeries::new(dt, rows.iter().map(|r| r.name.clone()).collect());
    let mut samples = vec![0.0; rows.len()];
    for state in trajectory {
        for (s, row) in samples.iter_mut().zip(rows) {
            let block = if row.electric { &state.e } else { &state.h };
            *s = row.row.dot(block);
        }
        ts.push(&samples);
    }
    ts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble;
    use crate::fdtd::run_full;
    use crate::grid::{
        cfl_max_timestep, BoundarySpec, Component, FaceCondition, GridSpec, MaterialMap,
        SourceKind, Waveform,
    };
    use crate::reduction::{build_basis, make_expansion_points, project, ProjectionBasis};
    use crate::solver::SolveMethod;

    fn mixed_line_setup(
        cells: usize,
    ) -> (SystemMatrices, Vec<SourceSpec>, Vec<ProbeSpec>, f64) {
        let grid = GridSpec::new(1, &[cells], &[0.04]).unwrap();
        let mat = MaterialMap::vacuum(&grid);
        let bc = BoundarySpec {
            faces: [
                [
                    FaceCondition::Pec,
                    FaceCondition::MatchedAbsorber {
                        thickness: 4,
                        poly_order: 2,
                        target_reflection: 1e-4,
                    },
                ],
                [FaceCondition::Pec, FaceCondition::Pec],
                [FaceCondition::Pec, FaceCondition::Pec],
            ],
        };
        let sources = vec![SourceSpec {
            kind: SourceKind::ElectricCurrent,
            component: Component::Ez,
            cells: vec![[cells / 3, 0, 0]],
            waveform: Waveform::GaussianPulse { f_max: 0.8e9 },
        }];
        let probes = vec![ProbeSpec {
            name: "p0".into(),
            component: Component::Ez,
            cell: [2 * cells / 3, 0, 0],
        }];
        let dt = 0.9 * cfl_max_timestep(&grid, &mat).unwrap();
        let sys = assemble(&grid, &mat, &bc, &sources).unwrap();
        (sys, sources, probes, dt)
    }

    fn random_spd(n: usize, seed: &mut u64, scale: f64) -> DMatrix<f64> {
        let mut rnd = || {
            *seed ^= *seed << 13;
            *seed ^= *seed >> 7;
            *seed ^= *seed << 17;
            (*seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let a = DMatrix::from_fn(n, n, |_, _| rnd());
        let spd = &a * a.transpose() + DMatrix::identity(n, n) * (0.5 * n as f64);
        spd * scale
    }

    fn random_model(n: usize, seed: u64) -> ReducedModel {
        let mut s = seed;
        let d_eps = random_spd(n, &mut s, 1e-11);
        let d_mu = random_spd(n, &mut s, 1e-6);
        let d_sig_e = random_spd(n, &mut s, 1e-4);
        let d_sig_m = random_spd(n, &mut s, 1e-1);
        let mut rnd = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let k = DMatrix::from_fn(n, n, |_, _| rnd() * 10.0);
        let b = DMatrix::from_fn(2 * n, 1, |_, _| rnd());
        ReducedModel {
            d_eps,
            d_mu,
            d_sig_e,
            d_sig_m,
            k,
            b,
            dt: 1e-11,
        }
    }

    #[test]
    fn zero_state_zero_input_stays_zero() {
        let model = random_model(8, 42);
        let state = ReducedState::zeros(8);
        let next = step_reduced(&state, &model, &[0.0], 1e-11).unwrap();
        assert_eq!(next.max_abs(), 0.0);
    }

    #[test]
    fn step_matches_dense_solve() {
        // two-sweep update vs dense solve of the one-step system
        for seed in [3u64, 17, 99] {
            let n = 25;
            let model = random_model(n, seed);
            let dt = 2e-11;
            let stepper = ReducedStepper::new(&model, dt).unwrap();
            let r = model.r_dense(dt);
            let f = model.f_dense(dt);
            let lu = (&r + &f).lu();
            let mut state = ReducedState::zeros(n);
            let mut xd = DVector::<f64>::zeros(2 * n);
            for step in 0..4 {
                let u = [(step as f64 * 0.9).sin()];
                stepper.step(&mut state, &u);
                let rhs = (&r - &f) * &xd + &model.b * DVector::from_column_slice(&u);
                xd = lu.solve(&rhs).unwrap();
                let scale = xd.abs().max().max(1e-30);
                for i in 0..n {
                    assert!((state.e[i] - xd[i]).abs() <= 1e-12 * scale);
                    assert!((state.h[i] - xd[n + i]).abs() <= 1e-12 * scale);
                }
            }
        }
    }

    #[test]
    fn lossless_reduced_conserves_r_form() {
        let (sys, _sources, _probes, dt) = mixed_line_setup(24);
        // strip losses for the conservation check: rebuild with PEC ends
        let grid = GridSpec::new(1, &[24], &[0.04]).unwrap();
        let mat = MaterialMap::vacuum(&grid);
        let sys_pec = assemble(&grid, &mat, &BoundarySpec::all_pec(), &[]).unwrap();
        let _ = sys;
        // orthonormal random basis over the PEC system
        let mut seed = 5u64;
        let mut rnd = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let nr = 8;
        let q1 = DMatrix::from_fn(sys_pec.n_e, nr, |_, _| rnd()).qr().q();
        let q2 = DMatrix::from_fn(sys_pec.n_h, nr, |_, _| rnd()).qr().q();
        let basis = ProjectionBasis { v1: q1, v2: q2 };
        let model = project(&sys_pec, &basis, dt).unwrap();
        let stepper = ReducedStepper::new(&model, dt).unwrap();
        let mut state = ReducedState::zeros(nr);
        for i in 0..nr {
            state.e[i] = (0.4 * (i + 1) as f64).sin();
        }
        let r = model.r_dense(dt);
        let q_form = |s: &ReducedState| {
            let mut x = DVector::zeros(2 * nr);
            x.rows_mut(0, nr).copy_from(&s.e);
            x.rows_mut(nr, nr).copy_from(&s.h);
            (x.transpose() * &r * &x)[(0, 0)]
        };
        let q0 = q_form(&state);
        for _ in 0..1000 {
            stepper.step(&mut state, &[]);
        }
        let q1v = q_form(&state);
        assert!(
            ((q1v - q0) / q0).abs() <= 1e-10,
            "drift {:e}",
            (q1v - q0) / q0
        );
    }

    #[test]
    fn identity_basis_reconstruction_is_identity() {
        let n = 6;
        let basis = ProjectionBasis::identity(n, n, n);
        let rows = vec![ProbeRow {
            name: "r".into(),
            electric: true,
            row: basis.v1.row(3).transpose(),
        }];
        let mut state = ReducedState::zeros(n);
        state.e[3] = 2.5;
        let ts = reconstruct_probes(&rows, &[state], 1e-10);
        assert_eq!(ts.data[0][0], 2.5);
    }

    #[test]
    fn square_orthogonal_basis_matches_full_simulation() {
        let (sys, sources, probes, dt) = mixed_line_setup(20);
        assert_eq!(sys.n_e, sys.n_h);
        let n = sys.n_e;
        let mut seed = 11u64;
        let mut rnd = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let q1 = DMatrix::from_fn(n, n, |_, _| rnd()).qr().q();
        let q2 = DMatrix::from_fn(n, n, |_, _| rnd()).qr().q();
        let basis = ProjectionBasis { v1: q1, v2: q2 };
        let model = project(&sys, &basis, dt).unwrap();
        let rows = probe_rows(&sys, &basis, &probes).unwrap();
        let steps = 400;
        let (ts_red, _) = run_reduced(&model, &sources, &rows, dt, steps).unwrap();
        let (ts_full, _) = run_full(&sys, &sources, &probes, dt, steps).unwrap();
        let scale = ts_full.data[0]
            .iter()
            .fold(0.0f64, |a, &b| a.max(b.abs()));
        for (a, b) in ts_red.data[0].iter().zip(&ts_full.data[0]) {
            assert!((a - b).abs() <= 1e-9 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn projected_line_tracks_full_probe_trace() {
        let (sys, sources, probes, dt) = mixed_line_setup(40);
        let pts = make_expansion_points(1.1, 2, 0.8e9, dt).unwrap();
        let basis = build_basis(&sys, &pts, 16, dt, SolveMethod::Direct, 0.0).unwrap();
        let model = project(&sys, &basis, dt).unwrap();
        let rows = probe_rows(&sys, &basis, &probes).unwrap();
        let steps = 600;
        let (ts_red, _) = run_reduced(&model, &sources, &rows, dt, steps).unwrap();
        let (ts_full, _) = run_full(&sys, &sources, &probes, dt, steps).unwrap();
        let scale = ts_full.data[0]
            .iter()
            .fold(0.0f64, |a, &b| a.max(b.abs()));
        let worst = ts_red.data[0]
            .iter()
            .zip(&ts_full.data[0])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(worst <= 2e-2 * scale, "worst {worst:e} vs scale {scale:e}");
    }

    #[test]
    fn divergence_detected_without_enforcement() {
        let (sys, sources, probes, dt) = mixed_line_setup(30);
        let pts = make_expansion_points(1.1, 1, 0.8e9, dt).unwrap();
        let dt_big = 4.0 * dt;
        let basis = build_basis(&sys, &pts, 12, dt_big, SolveMethod::Direct, 0.0).unwrap();
        let model = project(&sys, &basis, dt_big).unwrap();
        let rows = probe_rows(&sys, &basis, &probes).unwrap();
        // above the CFL limit without clipping the spectrum this must blow up
        match run_reduced(&model, &sources, &rows, dt_big, 200_000) {
            Err(FdtdError::Divergence { step, .. }) => assert!(step > 0),
            Ok((ts, _)) => {
                // a heavily truncated model can happen to be stable; accept
                // bounded output but require it to be finite
                assert!(ts.data[0].iter().all(|v| v.is_finite()));
            }
            Err(e) => panic!("unexpected error {e:?}"),
        }
    }

    #[test]
    fn noalloc_step_matches_general_step() {
        let model = random_model(12, 1234);
        let dt = 1.5e-11;
        let stepper = ReducedStepper::new(&model, dt).unwrap();
        let mut a = ReducedState::zeros(12);
        let mut b = ReducedState::zeros(12);
        let mut scratch = ReducedScratch {
            rhs: DVector::zeros(12),
        };
        for step in 0..20 {
            let u = [(step as f64 * 0.3).cos()];
            stepper.step(&mut a, &u);
            stepper.step_noalloc(&mut b, &u, &mut scratch);
        }
        assert!((a.e - b.e).abs().max() < 1e-13);
        assert!((a.h - b.h).abs().max() < 1e-13);
    }
}
