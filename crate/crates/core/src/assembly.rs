//! Assembles the grid description into the discrete-time matrix system
//!
//! ```text
//! (R + F) x[n+1] = (R - F) x[n] + B u[n+1]
//!
//!      | De/dt   -K/2 |        | Dse/2    K/2 |        | E[n]     |
//! R =  |              |   F =  |              |   x[n]=|          |
//!      | -K^T/2  Dm/dt|        | -K^T/2 Dsm/2 |        | H[n+1/2] |
//! ```
//!
//! with diagonal material matrices, the sparse curl matrix K (entries
//! `+-1/dx`, `+-1/dy`, `+-1/dz`) and the source selector B. E unknowns
//! tangential to PEC faces or touching PEC cells are eliminated; H unknowns
//! whose curl stencil is empty after that elimination are dropped.

use crate::error::{FdtdError, Result};
use crate::grid::{
    absorber_sigma_max, BoundarySpec, Component, FaceCondition, GridSpec, MaterialMap, SourceKind,
    SourceSpec,
};
use crate::sparse::Csr;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::io::Write;
use std::path::Path;

/// Lattice of one field component: per-axis position counts and the map
/// from lattice position to unknown index (-1 when eliminated/dropped).
#[derive(Debug, Clone)]
struct Lattice {
    comp: Component,
    dims: [usize; 3],
    /// axes on which this component sits at node (integer) coordinates
    node_axes: [bool; 3],
    map: Vec<i64>,
}

impl Lattice {
    fn new(comp: Component, dims: [usize; 3], node_axes: [bool; 3]) -> Self {
        let n = dims[0] * dims[1] * dims[2];
        Lattice {
            comp,
            dims,
            node_axes,
            map: vec![-1; n],
        }
    }

    fn flat(&self, p: [usize; 3]) -> usize {
        p[0] + self.dims[0] * (p[1] + self.dims[1] * p[2])
    }

    fn contains(&self, p: [i64; 3]) -> bool {
        (0..3).all(|a| p[a] >= 0 && (p[a] as usize) < self.dims[a])
    }

    fn index(&self, p: [i64; 3]) -> i64 {
        if !self.contains(p) {
            return -1;
        }
        self.map[self.flat([p[0] as usize, p[1] as usize, p[2] as usize])]
    }

    /// Cell whose material properties this unknown uses: node coordinates
    /// are owned by the cell on their positive side, clamped at the top.
    fn owning_cell(&self, p: [usize; 3], grid: &GridSpec) -> [usize; 3] {
        let mut c = [0usize; 3];
        for a in 0..3 {
            c[a] = if self.node_axes[a] {
                p[a].min(grid.cells(a).saturating_sub(1))
            } else {
                p[a]
            };
        }
        c
    }
}

fn component_sets(dim: usize) -> (Vec<Component>, Vec<Component>) {
    match dim {
        1 => (vec![Component::Ez], vec![Component::Hy]),
        2 => (vec![Component::Ez], vec![Component::Hx, Component::Hy]),
        3 => (
            vec![Component::Ex, Component::Ey, Component::Ez],
            vec![Component::Hx, Component::Hy, Component::Hz],
        ),
        _ => unreachable!(),
    }
}

fn lattice_for(comp: Component, grid: &GridSpec) -> Lattice {
    let dim = grid.dim();
    let axis = match comp {
        Component::Ex | Component::Hx => 0,
        Component::Ey | Component::Hy => 1,
        Component::Ez | Component::Hz => 2,
    };
    let mut dims = [1usize; 3];
    let mut node = [false; 3];
    for a in 0..dim {
        if comp.is_electric() {
            // E_axis sits at nodes on every active axis other than its own
            node[a] = a != axis;
        } else {
            // H_axis sits at nodes on its own axis only
            node[a] = a == axis;
        }
        dims[a] = grid.cells(a) + if node[a] { 1 } else { 0 };
    }
    Lattice::new(comp, dims, node)
}

/// The assembled system. Unknown ordering is all E components first, then
/// all H components, each block in component order and x-fastest
/// lexicographic position order.
#[derive(Debug, Clone)]
pub struct SystemMatrices {
    pub n_e: usize,
    pub n_h: usize,
    pub n_in: usize,
    /// curl matrix, `n_e x n_h`
    pub k: Csr<f64>,
    pub k_t: Csr<f64>,
    /// permittivity per E unknown
    pub d_eps: Vec<f64>,
    /// electric conductivity per E unknown
    pub d_sig_e: Vec<f64>,
    /// permeability per H unknown
    pub d_mu: Vec<f64>,
    /// magnetic conductivity per H unknown
    pub d_sig_m: Vec<f64>,
    /// source selector, `(n_e + n_h) x n_in`, entries -1 at stamped rows
    pub b: Csr<f64>,
    pub grid: GridSpec,
    e_lattices: Vec<Lattice>,
    h_lattices: Vec<Lattice>,
}

impl SystemMatrices {
    pub fn n(&self) -> usize {
        self.n_e + self.n_h
    }

    /// Global unknown index of a component at a cell (the unknown whose
    /// lattice position equals the cell index on every axis).
    pub fn index_of(&self, comp: Component, cell: [usize; 3]) -> Result<usize> {
        let set = if comp.is_electric() {
            &self.e_lattices
        } else {
            &self.h_lattices
        };
        let lat = set
            .iter()
            .find(|l| l.comp == comp)
            .ok_or_else(|| FdtdError::Stamp(format!("component {} not present", comp.name())))?;
        let p = [cell[0] as i64, cell[1] as i64, cell[2] as i64];
        if !lat.contains(p) {
            return Err(FdtdError::Stamp(format!(
                "cell {:?} outside grid for component {}",
                cell,
                comp.name()
            )));
        }
        let idx = lat.index(p);
        if idx < 0 {
            return Err(FdtdError::Stamp(format!(
                "component {} at cell {:?} was eliminated (PEC)",
                comp.name(),
                cell
            )));
        }
        Ok(if comp.is_electric() {
            idx as usize
        } else {
            self.n_e + idx as usize
        })
    }

    /// Coordinate-list dumps of K, the four diagonals and B.
    pub fn write_debug_dump(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let dump_csr = |name: &str, m: &Csr<f64>| -> Result<()> {
            let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join(name))?);
            for (r, c, v) in m.triplets() {
                writeln!(w, "{r} {c} {v:e}")?;
            }
            Ok(())
        };
        let dump_diag = |name: &str, d: &[f64]| -> Result<()> {
            let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join(name))?);
            for (i, v) in d.iter().enumerate() {
                writeln!(w, "{i} {i} {v:e}")?;
            }
            Ok(())
        };
        dump_csr("k.coo", &self.k)?;
        dump_csr("b.coo", &self.b)?;
        dump_diag("d_eps.coo", &self.d_eps)?;
        dump_diag("d_sigma_e.coo", &self.d_sig_e)?;
        dump_diag("d_mu.coo", &self.d_mu)?;
        dump_diag("d_sigma_m.coo", &self.d_sig_m)?;
        Ok(())
    }
}

/// Materials with boundary absorbers folded in.
fn effective_materials(
    grid: &GridSpec,
    materials: &MaterialMap,
    boundaries: &BoundarySpec,
) -> Result<MaterialMap> {
    let mut eff = materials.clone();
    for axis in 0..grid.dim() {
        for side in 0..2 {
            let FaceCondition::MatchedAbsorber {
                thickness,
                poly_order,
                target_reflection,
            } = boundaries.faces[axis][side]
            else {
                continue;
            };
            // iterate all cells in each layer of the absorber slab
            for dj in 0..thickness {
                let layer = if side == 0 {
                    thickness - 1 - dj
                } else {
                    grid.cells(axis) - thickness + dj
                };
                let (na, nb) = match axis {
                    0 => (grid.cells(1), grid.cells(2)),
                    1 => (grid.cells(0), grid.cells(2)),
                    _ => (grid.cells(0), grid.cells(1)),
                };
                for a in 0..na {
                    for b in 0..nb {
                        let cell = match axis {
                            0 => [layer, a, b],
                            1 => [a, layer, b],
                            _ => [a, b, layer],
                        };
                        let ci = grid.cell_index(cell).unwrap();
                        let eta = materials.impedance(ci);
                        let depth = thickness as f64 * grid.size(axis);
                        let sigma_max =
                            absorber_sigma_max(poly_order, target_reflection, depth, eta)?;
                        // transverse E sits on the cell's inner edge along
                        // the absorber axis, transverse H at its center;
                        // each samples the grading at its own position to
                        // keep the discrete layer impedance matched
                        let frac_e = dj as f64 / thickness as f64;
                        let frac_m = (dj as f64 + 0.5) / thickness as f64;
                        eff.sigma_e[ci] += sigma_max * frac_e.powi(poly_order as i32);
                        eff.sigma_m[ci] +=
                            eta * eta * sigma_max * frac_m.powi(poly_order as i32);
                    }
                }
            }
        }
    }
    Ok(eff)
}

fn eliminate_electric(
    lat: &mut Lattice,
    grid: &GridSpec,
    materials: &MaterialMap,
    boundaries: &BoundarySpec,
    next_index: &mut usize,
) {
    let dims = lat.dims;
    for pz in 0..dims[2] {
        for py in 0..dims[1] {
            for px in 0..dims[0] {
                let p = [px, py, pz];
                let mut keep = true;
                for a in 0..grid.dim() {
                    if !lat.node_axes[a] {
                        continue;
                    }
                    if p[a] == 0 && boundaries.faces[a][0] == FaceCondition::Pec {
                        keep = false;
                    }
                    if p[a] == grid.cells(a) && boundaries.faces[a][1] == FaceCondition::Pec {
                        keep = false;
                    }
                }
                if keep {
                    // any touching PEC cell eliminates the edge
                    let mut cells = vec![[0i64; 3]];
                    for a in 0..3 {
                        let opts: Vec<i64> = if lat.node_axes[a] {
                            vec![p[a] as i64 - 1, p[a] as i64]
                        } else {
                            vec![p[a] as i64]
                        };
                        cells = cells
                            .iter()
                            .flat_map(|c| {
                                opts.iter().map(move |&o| {
                                    let mut cc = *c;
                                    cc[a] = o;
                                    cc
                                })
                            })
                            .collect();
                    }
                    for c in cells {
                        if (0..3).all(|a| c[a] >= 0 && (c[a] as usize) < grid.cells(a)) {
                            let ci = grid
                                .cell_index([c[0] as usize, c[1] as usize, c[2] as usize])
                                .unwrap();
                            if materials.pec[ci] {
                                keep = false;
                                break;
                            }
                        }
                    }
                }
                if keep {
                    let flat = lat.flat(p);
                    lat.map[flat] = *next_index as i64;
                    *next_index += 1;
                }
            }
        }
    }
}

/// cyclic successor axes: (a, b, c) such that curl_a = dH_c/db - dH_b/dc
fn cyclic(axis: usize) -> (usize, usize) {
    match axis {
        0 => (1, 2),
        1 => (2, 0),
        _ => (0, 1),
    }
}

pub fn assemble(
    grid: &GridSpec,
    materials: &MaterialMap,
    boundaries: &BoundarySpec,
    sources: &[SourceSpec],
) -> Result<SystemMatrices> {
    materials.validate()?;
    boundaries.validate(grid)?;
    if materials.eps.len() != grid.n_cells() {
        return Err(FdtdError::InvalidGrid(format!(
            "material map has {} cells, grid has {}",
            materials.eps.len(),
            grid.n_cells()
        )));
    }
    let eff = effective_materials(grid, materials, boundaries)?;

    let (e_comps, h_comps) = component_sets(grid.dim());
    let mut e_lattices: Vec<Lattice> = e_comps.iter().map(|&c| lattice_for(c, grid)).collect();
    let mut n_e = 0usize;
    for lat in &mut e_lattices {
        eliminate_electric(lat, grid, materials, boundaries, &mut n_e);
    }

    // candidate H numbering (before dropping empty columns)
    let mut h_lattices: Vec<Lattice> = h_comps.iter().map(|&c| lattice_for(c, grid)).collect();
    let mut h_cand = 0usize;
    for lat in &mut h_lattices {
        for v in lat.map.iter_mut() {
            *v = h_cand as i64;
            h_cand += 1;
        }
    }

    // K rows: for E component along axis a, curl_a = dH_c/db - dH_b/dc
    let inv_d = [
        1.0 / grid.size(0),
        1.0 / grid.size(1),
        1.0 / grid.size(2),
    ];
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    for lat in &e_lattices {
        let axis = match lat.comp {
            Component::Ex => 0,
            Component::Ey => 1,
            Component::Ez => 2,
            _ => unreachable!(),
        };
        let (b_ax, c_ax) = cyclic(axis);
        let h_c = h_lattices.iter().find(|l| {
            l.comp
                == match c_ax {
                    0 => Component::Hx,
                    1 => Component::Hy,
                    _ => Component::Hz,
                }
        });
        let h_b = h_lattices.iter().find(|l| {
            l.comp
                == match b_ax {
                    0 => Component::Hx,
                    1 => Component::Hy,
                    _ => Component::Hz,
                }
        });
        for pz in 0..lat.dims[2] {
            for py in 0..lat.dims[1] {
                for px in 0..lat.dims[0] {
                    let p = [px, py, pz];
                    let row = lat.map[lat.flat(p)];
                    if row < 0 {
                        continue;
                    }
                    let row = row as usize;
                    let pi = [p[0] as i64, p[1] as i64, p[2] as i64];
                    // + dH_c/db: +H_c(p) - H_c(p - e_b), scaled 1/db
                    if let Some(hc) = h_c {
                        let mut pm = pi;
                        pm[b_ax] -= 1;
                        let up = hc.index(pi);
                        let dn = hc.index(pm);
                        if up >= 0 {
                            triplets.push((row, up as usize, inv_d[b_ax]));
                        }
                        if dn >= 0 {
                            triplets.push((row, dn as usize, -inv_d[b_ax]));
                        }
                    }
                    // - dH_b/dc: -H_b(p) + H_b(p - e_c), scaled 1/dc
                    if let Some(hb) = h_b {
                        let mut pm = pi;
                        pm[c_ax] -= 1;
                        let up = hb.index(pi);
                        let dn = hb.index(pm);
                        if up >= 0 {
                            triplets.push((row, up as usize, -inv_d[c_ax]));
                        }
                        if dn >= 0 {
                            triplets.push((row, dn as usize, inv_d[c_ax]));
                        }
                    }
                }
            }
        }
    }

    // drop H candidates whose column is empty, renumber the rest
    let mut used = vec![false; h_cand];
    for &(_, c, _) in &triplets {
        used[c] = true;
    }
    let mut remap = vec![-1i64; h_cand];
    let mut n_h = 0usize;
    for (cand, &u) in used.iter().enumerate() {
        if u {
            remap[cand] = n_h as i64;
            n_h += 1;
        }
    }
    for lat in &mut h_lattices {
        for v in lat.map.iter_mut() {
            *v = remap[*v as usize];
        }
    }
    let triplets: Vec<(usize, usize, f64)> = triplets
        .into_iter()
        .map(|(r, c, v)| (r, remap[c] as usize, v))
        .collect();
    let k = Csr::from_triplets(n_e, n_h, &triplets);
    let k_t = k.transpose();

    // per-unknown material diagonals from the owning cell
    let mut d_eps = vec![0.0; n_e];
    let mut d_sig_e = vec![0.0; n_e];
    for lat in &e_lattices {
        for pz in 0..lat.dims[2] {
            for py in 0..lat.dims[1] {
                for px in 0..lat.dims[0] {
                    let p = [px, py, pz];
                    let idx = lat.map[lat.flat(p)];
                    if idx < 0 {
                        continue;
                    }
                    let ci = grid.cell_index(lat.owning_cell(p, grid)).unwrap();
                    d_eps[idx as usize] = eff.eps[ci];
                    d_sig_e[idx as usize] = eff.sigma_e[ci];
                }
            }
        }
    }
    let mut d_mu = vec![0.0; n_h];
    let mut d_sig_m = vec![0.0; n_h];
    for lat in &h_lattices {
        for pz in 0..lat.dims[2] {
            for py in 0..lat.dims[1] {
                for px in 0..lat.dims[0] {
                    let p = [px, py, pz];
                    let idx = lat.map[lat.flat(p)];
                    if idx < 0 {
                        continue;
                    }
                    let ci = grid.cell_index(lat.owning_cell(p, grid)).unwrap();
                    d_mu[idx as usize] = eff.mu[ci];
                    d_sig_m[idx as usize] = eff.sigma_m[ci];
                }
            }
        }
    }

    let mut sys = SystemMatrices {
        n_e,
        n_h,
        n_in: sources.len(),
        k,
        k_t,
        d_eps,
        d_sig_e,
        d_mu,
        d_sig_m,
        b: Csr::from_triplets(n_e + n_h, sources.len().max(0), &[]),
        grid: grid.clone(),
        e_lattices,
        h_lattices,
    };

    // source selector: J on E rows, M on H rows, entries -1
    let mut b_triplets: Vec<(usize, usize, f64)> = Vec::new();
    for (col, src) in sources.iter().enumerate() {
        src.waveform.validate()?;
        let mut seen = std::collections::HashSet::new();
        for &cell in &src.cells {
            if !seen.insert(cell) {
                return Err(FdtdError::Stamp(format!(
                    "duplicate source location {cell:?} in source {col}"
                )));
            }
            let expect_e = matches!(src.kind, SourceKind::ElectricCurrent);
            if src.component.is_electric() != expect_e {
                return Err(FdtdError::Stamp(format!(
                    "source {col}: component {} does not match source kind",
                    src.component.name()
                )));
            }
            let row = sys.index_of(src.component, cell)?;
            b_triplets.push((row, col, -1.0));
        }
    }
    sys.b = Csr::from_triplets(sys.n(), sources.len(), &b_triplets);
    Ok(sys)
}

/// View of the update pair (R, F) at a given timestep.
#[derive(Debug, Clone, Copy)]
pub struct UpdatePair<'a> {
    pub m: &'a SystemMatrices,
    pub dt: f64,
}

pub fn build_update_pair(m: &SystemMatrices, dt: f64) -> Result<UpdatePair<'_>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(FdtdError::InvalidParameter(format!(
            "timestep must be positive, got {dt}"
        )));
    }
    Ok(UpdatePair { m, dt })
}

impl<'a> UpdatePair<'a> {
    pub fn n(&self) -> usize {
        self.m.n()
    }

    /// y = R x
    pub fn mul_r(&self, x: &[f64]) -> Vec<f64> {
        let (ne, nh) = (self.m.n_e, self.m.n_h);
        let mut y = vec![0.0; ne + nh];
        self.m.k.mul_vec(&x[ne..], &mut y[..ne]);
        let mut tmp = vec![0.0; nh];
        self.m.k_t.mul_vec(&x[..ne], &mut tmp);
        for i in 0..ne {
            y[i] = self.m.d_eps[i] / self.dt * x[i] - 0.5 * y[i];
        }
        for j in 0..nh {
            y[ne + j] = self.m.d_mu[j] / self.dt * x[ne + j] - 0.5 * tmp[j];
        }
        y
    }

    /// y = F x
    pub fn mul_f(&self, x: &[f64]) -> Vec<f64> {
        let (ne, nh) = (self.m.n_e, self.m.n_h);
        let mut y = vec![0.0; ne + nh];
        self.m.k.mul_vec(&x[ne..], &mut y[..ne]);
        let mut tmp = vec![0.0; nh];
        self.m.k_t.mul_vec(&x[..ne], &mut tmp);
        for i in 0..ne {
            y[i] = 0.5 * self.m.d_sig_e[i] * x[i] + 0.5 * y[i];
        }
        for j in 0..nh {
            y[ne + j] = 0.5 * self.m.d_sig_m[j] * x[ne + j] - 0.5 * tmp[j];
        }
        y
    }

    /// y = (R + F) x on complex vectors (block lower-triangular).
    pub fn mul_r_plus_f_c(&self, x: &[Complex64]) -> Vec<Complex64> {
        let (ne, nh) = (self.m.n_e, self.m.n_h);
        let mut y = vec![Complex64::new(0.0, 0.0); ne + nh];
        for i in 0..ne {
            y[i] = (self.m.d_eps[i] / self.dt + 0.5 * self.m.d_sig_e[i]) * x[i];
        }
        let mut tmp = vec![Complex64::new(0.0, 0.0); nh];
        self.m.k_t.mul_vec_c(&x[..ne], &mut tmp);
        for j in 0..nh {
            y[ne + j] =
                (self.m.d_mu[j] / self.dt + 0.5 * self.m.d_sig_m[j]) * x[ne + j] - tmp[j];
        }
        y
    }

    /// y = (R - F) x on complex vectors (block upper-triangular).
    pub fn mul_r_minus_f_c(&self, x: &[Complex64]) -> Vec<Complex64> {
        let (ne, nh) = (self.m.n_e, self.m.n_h);
        let mut y = vec![Complex64::new(0.0, 0.0); ne + nh];
        self.m.k.mul_vec_c(&x[ne..], &mut y[..ne]);
        for i in 0..ne {
            y[i] = (self.m.d_eps[i] / self.dt - 0.5 * self.m.d_sig_e[i]) * x[i] - y[i];
        }
        for j in 0..nh {
            y[ne + j] = (self.m.d_mu[j] / self.dt - 0.5 * self.m.d_sig_m[j]) * x[ne + j];
        }
        y
    }

    pub fn r_dense(&self) -> DMatrix<f64> {
        let (ne, nh) = (self.m.n_e, self.m.n_h);
        let mut r = DMatrix::zeros(ne + nh, ne + nh);
        for i in 0..ne {
            r[(i, i)] = self.m.d_eps[i] / self.dt;
        }
        for j in 0..nh {
            r[(ne + j, ne + j)] = self.m.d_mu[j] / self.dt;
        }
        for (i, j, v) in self.m.k.triplets() {
            r[(i, ne + j)] -= 0.5 * v;
            r[(ne + j, i)] -= 0.5 * v;
        }
        r
    }

    pub fn f_dense(&self) -> DMatrix<f64> {
        let (ne, nh) = (self.m.n_e, self.m.n_h);
        let mut f = DMatrix::zeros(ne + nh, ne + nh);
        for i in 0..ne {
            f[(i, i)] = 0.5 * self.m.d_sig_e[i];
        }
        for j in 0..nh {
            f[(ne + j, ne + j)] = 0.5 * self.m.d_sig_m[j];
        }
        for (i, j, v) in self.m.k.triplets() {
            f[(i, ne + j)] += 0.5 * v;
            f[(ne + j, i)] -= 0.5 * v;
        }
        f
    }
}

/// Outcome of the two full-system stability conditions.
#[derive(Debug, Clone)]
pub struct FullStabilityReport {
    /// `F + F^T >= 0`: all conductivities non-negative.
    pub condition7: bool,
    /// `R > 0`: largest singular value of the whitened curl below `2/dt`.
    pub condition8: bool,
    /// most negative conductivity found (witness for condition 7)
    pub min_conductivity: f64,
    /// largest singular value of `De^-1/2 K Dm^-1/2` (witness for condition 8)
    pub sigma_max: f64,
    /// threshold `2/dt`
    pub limit: f64,
}

/// Checks positive semidefiniteness of `F + F^T` (a diagonal sign check) and
/// positive definiteness of `R` through the Schur-complement singular-value
/// criterion, estimating the top singular value by power iteration.
pub fn full_stability_check(pair: &UpdatePair<'_>) -> FullStabilityReport {
    let m = pair.m;
    let min_cond = m
        .d_sig_e
        .iter()
        .chain(m.d_sig_m.iter())
        .fold(f64::INFINITY, |a, &b| a.min(b));
    let sigma_max = whitened_curl_sigma_max(m);
    let limit = 2.0 / pair.dt;
    FullStabilityReport {
        condition7: min_cond >= 0.0,
        condition8: sigma_max < limit,
        min_conductivity: if min_cond.is_finite() { min_cond } else { 0.0 },
        sigma_max,
        limit,
    }
}

/// Power iteration for the largest singular value of
/// `C = De^-1/2 K Dm^-1/2` using only sparse products.
pub fn whitened_curl_sigma_max(m: &SystemMatrices) -> f64 {
    if m.n_e == 0 || m.n_h == 0 {
        return 0.0;
    }
    let se: Vec<f64> = m.d_eps.iter().map(|&v| 1.0 / v.sqrt()).collect();
    let sh: Vec<f64> = m.d_mu.iter().map(|&v| 1.0 / v.sqrt()).collect();
    let mut v: Vec<f64> = (0..m.n_e)
        .map(|i| 1.0 + 0.37 * ((i * 2654435761) % 1000) as f64 / 1000.0)
        .collect();
    let mut tmp_h = vec![0.0; m.n_h];
    let mut tmp_e = vec![0.0; m.n_e];
    let mut lambda = 0.0f64;
    for _ in 0..2000 {
        // w = C^T v, u = C w
        let scaled: Vec<f64> = v.iter().zip(&se).map(|(a, s)| a * s).collect();
        m.k_t.mul_vec(&scaled, &mut tmp_h);
        let w: Vec<f64> = tmp_h.iter().zip(&sh).map(|(a, s)| a * s * s).collect();
        m.k.mul_vec(&w, &mut tmp_e);
        let u: Vec<f64> = tmp_e.iter().zip(&se).map(|(a, s)| a * s).collect();
        let norm_v: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let rayleigh = v.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>() / (norm_v * norm_v);
        let norm_u: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm_u == 0.0 {
            return 0.0;
        }
        v = u.iter().map(|a| a / norm_u).collect();
        if (rayleigh - lambda).abs() <= 1e-13 * rayleigh.abs().max(1e-300) {
            lambda = rayleigh;
            break;
        }
        lambda = rayleigh;
    }
    lambda.max(0.0).sqrt()
}
