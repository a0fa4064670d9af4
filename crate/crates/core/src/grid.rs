//! Problem description: grid geometry, materials, boundaries, sources and
//! probes, plus the CFL timestep and the graded matched-absorber profile.

use crate::error::{FdtdError, Result};

/// Cartesian grid with 1, 2 or 3 active axes.
///
/// In 1-D the unknowns are an E node line and the staggered H line. In 2-D
/// the TM set (Ez, Hx, Hy) is used. In 3-D the full six-component Yee cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    dim: usize,
    cells: [usize; 3],
    sizes: [f64; 3],
}

impl GridSpec {
    pub fn new(dim: usize, cells: &[usize], sizes: &[f64]) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(FdtdError::InvalidGrid(format!(
                "dimensionality must be 1, 2 or 3, got {dim}"
            )));
        }
        if cells.len() != dim || sizes.len() != dim {
            return Err(FdtdError::InvalidGrid(format!(
                "expected {dim} cell counts and sizes, got {} and {}",
                cells.len(),
                sizes.len()
            )));
        }
        let mut c = [1usize; 3];
        let mut s = [1.0f64; 3];
        for a in 0..dim {
            if cells[a] < 1 {
                return Err(FdtdError::InvalidGrid(format!(
                    "cell count on axis {a} must be >= 1"
                )));
            }
            if !(sizes[a] > 0.0) || !sizes[a].is_finite() {
                return Err(FdtdError::InvalidGrid(format!(
                    "cell size on axis {a} must be positive, got {}",
                    sizes[a]
                )));
            }
            c[a] = cells[a];
            s[a] = sizes[a];
        }
        Ok(GridSpec {
            dim,
            cells: c,
            sizes: s,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cell count along an axis (1 for inactive axes).
    pub fn cells(&self, axis: usize) -> usize {
        self.cells[axis]
    }

    pub fn size(&self, axis: usize) -> f64 {
        self.sizes[axis]
    }

    /// Physical extent along an active axis, meters.
    pub fn length(&self, axis: usize) -> f64 {
        self.cells[axis] as f64 * self.sizes[axis]
    }

    pub fn n_cells(&self) -> usize {
        self.cells[0] * self.cells[1] * self.cells[2]
    }

    pub fn cell_index(&self, cell: [usize; 3]) -> Option<usize> {
        for a in 0..3 {
            if cell[a] >= self.cells[a] {
                return None;
            }
        }
        Some(cell[0] + self.cells[0] * (cell[1] + self.cells[1] * cell[2]))
    }
}

/// Per-cell material properties. PEC cells stand for solid metal: every E
/// unknown touching such a cell is eliminated from the assembled system.
#[derive(Debug, Clone)]
pub struct MaterialMap {
    pub eps: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma_e: Vec<f64>,
    pub sigma_m: Vec<f64>,
    pub pec: Vec<bool>,
}

impl MaterialMap {
    pub fn uniform(grid: &GridSpec, eps: f64, mu: f64, sigma_e: f64, sigma_m: f64) -> Result<Self> {
        let n = grid.n_cells();
        let m = MaterialMap {
            eps: vec![eps; n],
            mu: vec![mu; n],
            sigma_e: vec![sigma_e; n],
            sigma_m: vec![sigma_m; n],
            pec: vec![false; n],
        };
        m.validate()?;
        Ok(m)
    }

    pub fn vacuum(grid: &GridSpec) -> Self {
        Self::uniform(grid, crate::constants::EPS0, crate::constants::MU0, 0.0, 0.0).unwrap()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.eps.len();
        if [self.mu.len(), self.sigma_e.len(), self.sigma_m.len(), self.pec.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(FdtdError::InvalidGrid(
                "material arrays have inconsistent lengths".into(),
            ));
        }
        for i in 0..n {
            if !(self.eps[i] > 0.0) || !(self.mu[i] > 0.0) {
                return Err(FdtdError::InvalidGrid(format!(
                    "permittivity and permeability must be positive (cell {i})"
                )));
            }
            if self.sigma_e[i] < 0.0 || self.sigma_m[i] < 0.0 {
                return Err(FdtdError::InvalidGrid(format!(
                    "conductivities must be non-negative (cell {i})"
                )));
            }
        }
        Ok(())
    }

    /// Local wave impedance of a cell, Ohm.
    pub fn impedance(&self, cell: usize) -> f64 {
        (self.mu[cell] / self.eps[cell]).sqrt()
    }
}

/// Condition applied to one face of the domain.
///
/// A matched absorber grades electric and magnetic conductivity over
/// `thickness` cells next to the face; the grid still terminates with the
/// outermost unknowns in place, so the residual reflection is set by the
/// absorber, not by the truncation.
#[derive(Debug, Clone, PartialEq)]
pub enum FaceCondition {
    Pec,
    MatchedAbsorber {
        thickness: usize,
        poly_order: u32,
        target_reflection: f64,
    },
}

/// Boundary conditions for the 2*dim faces, indexed `[axis][lo|hi]`.
#[derive(Debug, Clone)]
pub struct BoundarySpec {
    pub faces: [[FaceCondition; 2]; 3],
}

impl BoundarySpec {
    pub fn all_pec() -> Self {
        BoundarySpec {
            faces: [
                [FaceCondition::Pec, FaceCondition::Pec],
                [FaceCondition::Pec, FaceCondition::Pec],
                [FaceCondition::Pec, FaceCondition::Pec],
            ],
        }
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        for axis in 0..grid.dim() {
            for side in 0..2 {
                if let FaceCondition::MatchedAbsorber {
                    thickness,
                    target_reflection,
                    ..
                } = self.faces[axis][side]
                {
                    if thickness < 1 {
                        return Err(FdtdError::InvalidParameter(
                            "absorber thickness must be >= 1 cell".into(),
                        ));
                    }
                    if thickness > grid.cells(axis) {
                        return Err(FdtdError::InvalidParameter(format!(
                            "absorber thickness {thickness} exceeds grid ({} cells on axis {axis})",
                            grid.cells(axis)
                        )));
                    }
                    if !(target_reflection > 0.0 && target_reflection < 1.0) {
                        return Err(FdtdError::InvalidParameter(format!(
                            "target reflection must lie in (0,1), got {target_reflection}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Field component identifiers. 1-D uses (Ez, Hy); 2-D the TM set
/// (Ez, Hx, Hy); 3-D all six.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    Ex,
    Ey,
    Ez,
    Hx,
    Hy,
    Hz,
}

impl Component {
    pub fn is_electric(self) -> bool {
        matches!(self, Component::Ex | Component::Ey | Component::Ez)
    }

    pub fn name(self) -> &'static str {
        match self {
            Component::Ex => "ex",
            Component::Ey => "ey",
            Component::Ez => "ez",
            Component::Hx => "hx",
            Component::Hy => "hy",
            Component::Hz => "hz",
        }
    }

    pub fn parse(s: &str) -> Option<Component> {
        match s.to_ascii_lowercase().as_str() {
            "ex" => Some(Component::Ex),
            "ey" => Some(Component::Ey),
            "ez" => Some(Component::Ez),
            "hx" => Some(Component::Hx),
            "hy" => Some(Component::Hy),
            "hz" => Some(Component::Hz),
            _ => None,
        }
    }
}

/// Source waveform sampled at absolute time t.
#[derive(Debug, Clone, PartialEq)]
pub enum Waveform {
    /// `exp(-(t-t0)^2 / (2 tau^2))` with tau chosen so the amplitude
    /// spectrum at `f_max` sits 20 dB below its DC value, and `t0 = 4 tau`.
    GaussianPulse { f_max: f64 },
    Sinusoid { f0: f64 },
    UserSamples(Vec<f64>),
}

impl Waveform {
    pub fn validate(&self) -> Result<()> {
        match self {
            Waveform::GaussianPulse { f_max } if !(*f_max > 0.0) => Err(
                FdtdError::InvalidParameter(format!("gaussian f_max must be > 0, got {f_max}")),
            ),
            Waveform::Sinusoid { f0 } if !(*f0 > 0.0) => Err(FdtdError::InvalidParameter(
                format!("sinusoid f0 must be > 0, got {f0}"),
            )),
            _ => Ok(()),
        }
    }

    /// Pulse width tau for the Gaussian, seconds.
    pub fn gaussian_tau(f_max: f64) -> f64 {
        // amplitude at f_max is exp(-2 pi^2 f_max^2 tau^2) = 10^(-1)
        (0.5 * 10.0f64.ln()).sqrt() / (std::f64::consts::PI * f_max)
    }

    pub fn eval(&self, t: f64, dt: f64) -> f64 {
        match self {
            Waveform::GaussianPulse { f_max } => {
                let tau = Self::gaussian_tau(*f_max);
                let t0 = 4.0 * tau;
                (-(t - t0) * (t - t0) / (2.0 * tau * tau)).exp()
            }
            Waveform::Sinusoid { f0 } => (2.0 * std::f64::consts::PI * f0 * t).sin(),
            Waveform::UserSamples(samples) => {
                let n = (t / dt).round() as i64;
                if n >= 0 && (n as usize) < samples.len() {
                    samples[n as usize]
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    /// Electric current density J, stamped on E rows.
    ElectricCurrent,
    /// Magnetic current density M, stamped on H rows.
    MagneticCurrent,
}

/// One input column: a waveform driving one or more locations (a multi-cell
/// location list forms a line or sheet source).
#[derive(Debug, Clone)]
pub struct SourceSpec {
    pub kind: SourceKind,
    pub component: Component,
    pub cells: Vec<[usize; 3]>,
    pub waveform: Waveform,
}

#[derive(Debug, Clone)]
pub struct ProbeSpec {
    pub name: String,
    pub component: Component,
    pub cell: [usize; 3],
}

/// Largest stable explicit timestep: the per-cell minimum of
/// `1 / (c sqrt(sum 1/dx_i^2))` with `c = 1/sqrt(eps mu)` of the cell.
/// Inactive axes contribute nothing to the sum.
pub fn cfl_max_timestep(grid: &GridSpec, materials: &MaterialMap) -> Result<f64> {
    materials.validate()?;
    if materials.eps.len() != grid.n_cells() {
        return Err(FdtdError::InvalidGrid(format!(
            "material map has {} cells, grid has {}",
            materials.eps.len(),
            grid.n_cells()
        )));
    }
    let mut inv_d2 = 0.0;
    for a in 0..grid.dim() {
        inv_d2 += 1.0 / (grid.size(a) * grid.size(a));
    }
    let root = inv_d2.sqrt();
    let mut dt_min = f64::INFINITY;
    for cell in 0..grid.n_cells() {
        let c = 1.0 / (materials.eps[cell] * materials.mu[cell]).sqrt();
        dt_min = dt_min.min(1.0 / (c * root));
    }
    Ok(dt_min)
}

/// Peak conductivity of the graded layer:
/// `sigma_max = -(p+1) ln(R0) / (2 eta d)` with `d` the layer depth.
pub fn absorber_sigma_max(
    poly_order: u32,
    target_reflection: f64,
    depth: f64,
    wave_impedance: f64,
) -> Result<f64> {
    if !(target_reflection > 0.0 && target_reflection < 1.0) {
        return Err(FdtdError::InvalidParameter(format!(
            "target reflection must lie in (0,1), got {target_reflection}"
        )));
    }
    if !(depth > 0.0) || !(wave_impedance > 0.0) {
        return Err(FdtdError::InvalidParameter(
            "absorber depth and wave impedance must be positive".into(),
        ));
    }
    Ok(-((poly_order as f64 + 1.0) * target_reflection.ln()) / (2.0 * wave_impedance * depth))
}

/// Polynomially graded conductivity profile of a matched absorber.
///
/// Returns `thickness` pairs `(sigma_e, sigma_m)`, innermost cell first.
/// `sigma_e(x) = sigma_max (x/d)^p` sampled at the inner edge of each cell,
/// with `sigma_max = -(p+1) ln(R0) / (2 eta d)` and `sigma_m = sigma_e eta^2`
/// so the layer impedance stays matched.
pub fn absorber_profile(
    thickness: usize,
    poly_order: u32,
    target_reflection: f64,
    cell_size: f64,
    wave_impedance: f64,
) -> Result<Vec<(f64, f64)>> {
    if thickness < 1 {
        return Err(FdtdError::InvalidParameter(
            "absorber thickness must be >= 1".into(),
        ));
    }
    if !(cell_size > 0.0) {
        return Err(FdtdError::InvalidParameter(
            "cell size must be positive".into(),
        ));
    }
    let d = thickness as f64 * cell_size;
    let sigma_max = absorber_sigma_max(poly_order, target_reflection, d, wave_impedance)?;
    let profile = (0..thickness)
        .map(|j| {
            let frac = j as f64 / thickness as f64;
            let se = sigma_max * frac.powi(poly_order as i32);
            (se, se * wave_impedance * wave_impedance)
        })
        .collect();
    Ok(profile)
}
