//! Projection basis generation and the structure-preserving reduced model.
//!
//! Expansion points sit on a circular arc of radius M just outside the unit
//! circle, covering the band up to `f_max`. For each representative point a
//! moment recurrence on the shifted operator yields Krylov vectors; their
//! real and imaginary parts are split into E and H blocks and orthonormalized
//! into the block-diagonal basis `V = blkdiag(V1, V2)`. Congruence with that
//! block structure keeps the reduced matrices in the same leap-frog form as
//! the full system, which is what makes the stability conditions carry over.

use crate::assembly::{build_update_pair, SystemMatrices, UpdatePair};
use crate::error::{FdtdError, Result};
use crate::solver::{make_shifted, ShiftedOperator, SolveMethod};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::io::{Read, Write};
use std::path::Path;

/// Deflation threshold: a candidate is dropped when orthogonalization
/// removes all but this fraction of its norm.
const DEFLATION_RATIO: f64 = 1e-8;

/// Points `z_l = M exp(j 2 pi (l/L) f_max dt)` for `l = -L..=L`.
#[derive(Debug, Clone)]
pub struct ExpansionPointSet {
    pub m_radius: f64,
    pub half_count: usize,
    pub f_max: f64,
    pub dt: f64,
    /// all 2L+1 points, l ascending from -L to +L
    pub points: Vec<Complex64>,
}

pub fn make_expansion_points(
    m_radius: f64,
    half_count: usize,
    f_max: f64,
    dt: f64,
) -> Result<ExpansionPointSet> {
    if !(m_radius > 1.0) {
        return Err(FdtdError::InvalidParameter(format!(
            "expansion radius must exceed 1, got {m_radius}"
        )));
    }
    if !(f_max > 0.0) || !(dt > 0.0) {
        return Err(FdtdError::InvalidParameter(
            "f_max and dt must be positive".into(),
        ));
    }
    if f_max * dt >= 0.5 {
        return Err(FdtdError::Aliasing(f_max * dt));
    }
    let l_max = half_count as i64;
    let points = (-l_max..=l_max)
        .map(|l| {
            let frac = if l_max == 0 { 0.0 } else { l as f64 / l_max as f64 };
            let angle = 2.0 * std::f64::consts::PI * frac * f_max * dt;
            Complex64::from_polar(m_radius, angle)
        })
        .collect();
    Ok(ExpansionPointSet {
        m_radius,
        half_count,
        f_max,
        dt,
        points,
    })
}

impl ExpansionPointSet {
    /// One point per conjugate pair (`l = 0..=L`); conjugate moments carry
    /// no new real information after realification.
    pub fn representatives(&self) -> &[Complex64] {
        &self.points[self.half_count..]
    }
}

/// Block-diagonal orthonormal basis pair.
#[derive(Debug, Clone)]
pub struct ProjectionBasis {
    pub v1: DMatrix<f64>,
    pub v2: DMatrix<f64>,
}

impl ProjectionBasis {
    pub fn n_reduced(&self) -> usize {
        self.v1.ncols()
    }

    pub fn identity(n_e: usize, n_h: usize, n: usize) -> Self {
        ProjectionBasis {
            v1: DMatrix::identity(n_e, n),
            v2: DMatrix::identity(n_h, n),
        }
    }
}

/// Compressed system blocks; together with a timestep they rebuild the
/// reduced update pair in the same block form as the full system.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    pub d_eps: DMatrix<f64>,
    pub d_mu: DMatrix<f64>,
    pub d_sig_e: DMatrix<f64>,
    pub d_sig_m: DMatrix<f64>,
    pub k: DMatrix<f64>,
    /// `2 n_reduced x n_in`, E rows first
    pub b: DMatrix<f64>,
    pub dt: f64,
}

impl ReducedModel {
    pub fn n_reduced(&self) -> usize {
        self.d_eps.nrows()
    }

    pub fn n_in(&self) -> usize {
        self.b.ncols()
    }

    pub fn r_dense(&self, dt: f64) -> DMatrix<f64> {
        let n = self.n_reduced();
        let mut r = DMatrix::zeros(2 * n, 2 * n);
        r.view_mut((0, 0), (n, n)).copy_from(&(&self.d_eps / dt));
        r.view_mut((n, n), (n, n)).copy_from(&(&self.d_mu / dt));
        r.view_mut((0, n), (n, n)).copy_from(&(-0.5 * &self.k));
        r.view_mut((n, 0), (n, n))
            .copy_from(&(-0.5 * self.k.transpose()));
        r
    }

    pub fn f_dense(&self, dt: f64) -> DMatrix<f64> {
        let _ = dt; // F does not depend on the timestep; kept for symmetry
        let n = self.n_reduced();
        let mut f = DMatrix::zeros(2 * n, 2 * n);
        f.view_mut((0, 0), (n, n)).copy_from(&(0.5 * &self.d_sig_e));
        f.view_mut((n, n), (n, n)).copy_from(&(0.5 * &self.d_sig_m));
        f.view_mut((0, n), (n, n)).copy_from(&(0.5 * &self.k));
        f.view_mut((n, 0), (n, n))
            .copy_from(&(-0.5 * self.k.transpose()));
        f
    }

    /// Flat binary container: u64 n_reduced, u64 n_in, f64 dt, then the
    /// blocks row-major as little-endian f64 in declared field order.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(&(self.n_reduced() as u64).to_le_bytes())?;
        w.write_all(&(self.n_in() as u64).to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        for m in [&self.d_eps, &self.d_mu, &self.d_sig_e, &self.d_sig_m, &self.k, &self.b] {
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    w.write_all(&m[(r, c)].to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<ReducedModel> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut u = [0u8; 8];
        r.read_exact(&mut u)?;
        let n = u64::from_le_bytes(u) as usize;
        r.read_exact(&mut u)?;
        let n_in = u64::from_le_bytes(u) as usize;
        r.read_exact(&mut u)?;
        let dt = f64::from_le_bytes(u);
        let mut read_block = |rows: usize, cols: usize| -> Result<DMatrix<f64>> {
            let mut m = DMatrix::zeros(rows, cols);
            for i in 0..rows {
                for j in 0..cols {
                    let mut b = [0u8; 8];
                    r.read_exact(&mut b)?;
                    m[(i, j)] = f64::from_le_bytes(b);
                }
            }
            Ok(m)
        };
        Ok(ReducedModel {
            d_eps: read_block(n, n)?,
            d_mu: read_block(n, n)?,
            d_sig_e: read_block(n, n)?,
            d_sig_m: read_block(n, n)?,
            k: read_block(n, n)?,
            b: read_block(2 * n, n_in)?,
            dt,
        })
    }
}

/// Modified Gram-Schmidt push with one re-orthogonalization pass; returns
/// false when the candidate deflates.
fn mgs_push(cols: &mut Vec<Vec<f64>>, mut cand: Vec<f64>) -> bool {
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let pre = norm(&cand);
    if pre == 0.0 || !pre.is_finite() {
        return false;
    }
    for _ in 0..2 {
        for q in cols.iter() {
            let d: f64 = q.iter().zip(&cand).map(|(a, b)| a * b).sum();
            for (c, qv) in cand.iter_mut().zip(q) {
                *c -= d * qv;
            }
        }
    }
    let post = norm(&cand);
    if post < DEFLATION_RATIO * pre {
        return false;
    }
    for c in cand.iter_mut() {
        *c /= post;
    }
    cols.push(cand);
    true
}

struct MomentSource<'a> {
    op: ShiftedOperator,
    pair: UpdatePair<'a>,
    /// orthonormal Krylov chain per input column (full complex vectors);
    /// keeping the recurrence state orthogonal is what stops the moment
    /// sequence from collapsing onto the dominant directions
    chains: Vec<Vec<Vec<Complex64>>>,
    alive: bool,
}

impl<'a> MomentSource<'a> {
    /// Next Krylov vector for one input: the seed solve on the first call,
    /// afterwards a shifted solve applied to `(R + F)` times the previous
    /// chain vector, orthonormalized against the chain.
    fn advance(
        &mut self,
        input: usize,
        b_col: &[Complex64],
        method: SolveMethod,
        tol: f64,
    ) -> Result<Option<Vec<Complex64>>> {
        let chain = &mut self.chains[input];
        let rhs = match chain.last() {
            None => b_col.to_vec(),
            Some(prev) => self.pair.mul_r_plus_f_c(prev),
        };
        let mut w = self.op.solve(&rhs, method, tol)?;
        let norm_c =
            |v: &[Complex64]| v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let pre = norm_c(&w);
        if pre == 0.0 || !pre.is_finite() {
            return Ok(None);
        }
        for _ in 0..2 {
            for q in chain.iter() {
                let d: Complex64 = q.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= d * qi;
                }
            }
        }
        let post = norm_c(&w);
        if post < 1e-12 * pre {
            // Krylov chain for this input is exhausted
            return Ok(None);
        }
        for v in w.iter_mut() {
            *v /= post;
        }
        chain.push(w.clone());
        Ok(Some(w))
    }
}

/// Builds the block basis by a multi-point moment recurrence, allocating
/// vectors round-robin over the representative points until both blocks
/// reach `n_target` columns (or every candidate deflates).
pub fn build_basis(
    m: &SystemMatrices,
    points: &ExpansionPointSet,
    n_target: usize,
    dt: f64,
    method: SolveMethod,
    tol: f64,
) -> Result<ProjectionBasis> {
    if n_target < 1 {
        return Err(FdtdError::InvalidParameter(
            "reduced block order must be >= 1".into(),
        ));
    }
    if m.n_in == 0 {
        return Err(FdtdError::DegenerateSource(
            "system has no input columns to seed the basis".into(),
        ));
    }
    let pair = build_update_pair(m, dt)?;

    // dense input columns
    let b_dense = m.b.to_dense();
    let b_cols: Vec<Vec<Complex64>> = (0..m.n_in)
        .map(|c| {
            (0..m.n())
                .map(|r| Complex64::new(b_dense[(r, c)], 0.0))
                .collect()
        })
        .collect();

    // the transfer function's resolvent at w equals this shifted operator
    // at -w up to an overall sign, which cancels in the span
    let mut sources: Vec<MomentSource> = points
        .representatives()
        .iter()
        .map(|&z| -> Result<MomentSource> {
            Ok(MomentSource {
                op: make_shifted(&pair, -z)?,
                pair,
                chains: vec![Vec::new(); m.n_in],
                alive: true,
            })
        })
        .collect::<Result<_>>()?;

    let mut cols_e: Vec<Vec<f64>> = Vec::new();
    let mut cols_h: Vec<Vec<f64>> = Vec::new();
    let ne = m.n_e;

    loop {
        let mut progressed = false;
        for src in sources.iter_mut().filter(|s| s.alive) {
            let mut accepted_any = false;
            for input in 0..m.n_in {
                if cols_e.len() >= n_target && cols_h.len() >= n_target {
                    break;
                }
                let Some(w) = src.advance(input, &b_cols[input], method, tol)? else {
                    continue;
                };
                let e_re: Vec<f64> = w[..ne].iter().map(|v| v.re).collect();
                let e_im: Vec<f64> = w[..ne].iter().map(|v| v.im).collect();
                let h_re: Vec<f64> = w[ne..].iter().map(|v| v.re).collect();
                let h_im: Vec<f64> = w[ne..].iter().map(|v| v.im).collect();
                if cols_e.len() < n_target {
                    accepted_any |= mgs_push(&mut cols_e, e_re);
                }
                if cols_e.len() < n_target {
                    accepted_any |= mgs_push(&mut cols_e, e_im);
                }
                if cols_h.len() < n_target {
                    accepted_any |= mgs_push(&mut cols_h, h_re);
                }
                if cols_h.len() < n_target {
                    accepted_any |= mgs_push(&mut cols_h, h_im);
                }
            }
            if !accepted_any {
                src.alive = false;
            } else {
                progressed = true;
            }
        }
        if cols_e.len() >= n_target && cols_h.len() >= n_target {
            break;
        }
        if !progressed {
            break;
        }
    }

    if cols_e.is_empty() || cols_h.is_empty() {
        return Err(FdtdError::DegenerateSource(
            "every Krylov candidate deflated before producing a basis column".into(),
        ));
    }
    // equal block order: truncate the longer set
    let n_red = cols_e.len().min(cols_h.len()).min(n_target);
    let v1 = DMatrix::from_fn(m.n_e, n_red, |r, c| cols_e[c][r]);
    let v2 = DMatrix::from_fn(m.n_h, n_red, |r, c| cols_h[c][r]);
    Ok(ProjectionBasis { v1, v2 })
}

/// Congruence projection of the system blocks onto the basis.
pub fn project(m: &SystemMatrices, basis: &ProjectionBasis, dt: f64) -> Result<ReducedModel> {
    if basis.v1.nrows() != m.n_e || basis.v2.nrows() != m.n_h {
        return Err(FdtdError::InvalidParameter(format!(
            "basis blocks ({} x {}, {} x {}) do not match system ({}, {})",
            basis.v1.nrows(),
            basis.v1.ncols(),
            basis.v2.nrows(),
            basis.v2.ncols(),
            m.n_e,
            m.n_h
        )));
    }
    let sandwich = |v: &DMatrix<f64>, diag: &[f64]| -> DMatrix<f64> {
        let mut scaled = v.clone();
        for (r, &d) in diag.iter().enumerate() {
            for c in 0..v.ncols() {
                scaled[(r, c)] *= d;
            }
        }
        let m = v.transpose() * scaled;
        // exact symmetry by construction
        0.5 * (&m + m.transpose())
    };
    let d_eps = sandwich(&basis.v1, &m.d_eps);
    let d_sig_e = sandwich(&basis.v1, &m.d_sig_e);
    let d_mu = sandwich(&basis.v2, &m.d_mu);
    let d_sig_m = sandwich(&basis.v2, &m.d_sig_m);

    // K_red = V1^T K V2 through sparse column products
    let n_red = basis.n_reduced();
    let mut kv2 = DMatrix::zeros(m.n_e, n_red);
    let mut col = vec![0.0; m.n_h];
    let mut out = vec![0.0; m.n_e];
    for c in 0..n_red {
        for r in 0..m.n_h {
            col[r] = basis.v2[(r, c)];
        }
        m.k.mul_vec(&col, &mut out);
        for r in 0..m.n_e {
            kv2[(r, c)] = out[r];
        }
    }
    let k = basis.v1.transpose() * kv2;

    let b_dense = m.b.to_dense();
    let b_e = b_dense.view((0, 0), (m.n_e, m.n_in));
    let b_h = b_dense.view((m.n_e, 0), (m.n_h, m.n_in));
    let mut b = DMatrix::zeros(2 * n_red, m.n_in);
    b.view_mut((0, 0), (n_red, m.n_in))
        .copy_from(&(basis.v1.transpose() * b_e));
    b.view_mut((n_red, 0), (n_red, m.n_in))
        .copy_from(&(basis.v2.transpose() * b_h));

    Ok(ReducedModel {
        d_eps,
        d_mu,
        d_sig_e,
        d_sig_m,
        k,
        b,
        dt,
    })
}
