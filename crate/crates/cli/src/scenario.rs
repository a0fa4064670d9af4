//! Scenario file schema and validation.
//!
//! A scenario is one TOML document with sections mirroring the configuration
//! fields. Unknown keys are hard errors; validation failures carry the field
//! path that caused them.

use fdtd_mor::grid::{
    BoundarySpec, Component, FaceCondition, GridSpec, MaterialMap, ProbeSpec, SourceKind,
    SourceSpec, Waveform,
};
use fdtd_mor::solver::SolveMethod;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario at `{path}`: {reason}")]
    Invalid { path: String, reason: String },
}

fn invalid(path: &str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        path: path.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub grid: GridSection,
    pub materials: MaterialsSection,
    pub boundaries: BoundariesSection,
    #[serde(default)]
    pub sources: Vec<SourceSection>,
    #[serde(default)]
    pub probes: Vec<ProbeSection>,
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduction: Option<ReductionSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSection>,
    pub outputs: OutputsSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dimensionality: usize,
    pub cell_counts: Vec<usize>,
    pub cell_sizes: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MaterialsSection {
    #[serde(default = "one")]
    pub epsilon_r: f64,
    #[serde(default = "one")]
    pub mu_r: f64,
    #[serde(default)]
    pub sigma_e: f64,
    #[serde(default)]
    pub sigma_m: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub blocks: Vec<MaterialBlock>,
}

fn one() -> f64 {
    1.0
}

/// Axis-aligned box of cells `[cells_min, cells_max)` overriding the
/// background material (dielectric slabs, lossy regions, PEC strips).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MaterialBlock {
    pub cells_min: Vec<usize>,
    pub cells_max: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_e: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_m: Option<f64>,
    #[serde(default)]
    pub pec: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BoundariesSection {
    pub x_min: FaceConfig,
    pub x_max: FaceConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_min: Option<FaceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_max: Option<FaceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_min: Option<FaceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_max: Option<FaceConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum FaceConfig {
    Named(String),
    Absorber { absorber: AbsorberConfig },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AbsorberConfig {
    pub thickness: usize,
    pub poly_order: u32,
    pub target_reflection: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub kind: String,
    pub component: String,
    pub cells: Vec<Vec<usize>>,
    pub waveform: WaveformConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WaveformConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaussian: Option<GaussianConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sinusoid: Option<SinusoidConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GaussianConfig {
    pub f_max: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SinusoidConfig {
    pub f0: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    pub name: String,
    pub component: String,
    pub cell: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub engine: String,
    pub s_factor: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ReductionSection {
    /// state dimension of the reduced model (2 * block order), even
    pub order: usize,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_arc_half_count")]
    pub arc_half_count: usize,
    pub f_max: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// force (or suppress) enforcement; defaults to `s_factor >= 1`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enforce: Option<bool>,
}

fn default_radius() -> f64 {
    1.1
}

fn default_arc_half_count() -> usize {
    2
}

fn default_gamma() -> f64 {
    fdtd_mor::stability::DEFAULT_GAMMA
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_method() -> String {
    "auto".into()
}

fn default_tolerance() -> f64 {
    fdtd_mor::solver::DEFAULT_ITERATIVE_TOL
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    pub directory: String,
    #[serde(default = "yes")]
    pub timeseries: bool,
    #[serde(default = "yes")]
    pub spectrum: bool,
    #[serde(default = "yes")]
    pub resonances: bool,
    #[serde(default)]
    pub eigenvalues: bool,
    #[serde(default)]
    pub singular_values: bool,
    #[serde(default)]
    pub matrix_dump: bool,
    #[serde(default)]
    pub model_binary: bool,
    /// run a paired full-order reference to populate the speedup column
    #[serde(default)]
    pub reference_full: bool,
    /// directory of a prior incident-only run; enables S-parameter output
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_params_reference: Option<String>,
    #[serde(default = "default_prominence")]
    pub resonance_prominence: f64,
    #[serde(default = "default_resonance_count")]
    pub resonance_count: usize,
}

fn yes() -> bool {
    true
}

fn default_prominence() -> f64 {
    0.05
}

fn default_resonance_count() -> usize {
    6
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Full,
    Reduced,
}

/// Scenario after validation, with core-domain types resolved.
#[derive(Debug)]
pub struct Validated {
    pub scenario: Scenario,
    pub grid: GridSpec,
    pub materials: MaterialMap,
    pub boundaries: BoundarySpec,
    pub sources: Vec<SourceSpec>,
    pub probes: Vec<ProbeSpec>,
    pub engine: Engine,
    pub solve_method: SolveMethod,
    pub solve_tolerance: f64,
}

pub fn load(path: &Path) -> Result<Validated, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<Validated, ScenarioError> {
    let scenario: Scenario = toml::from_str(text)?;
    validate(scenario)
}

fn cell3(v: &[usize], dim: usize, path: &str) -> Result<[usize; 3], ScenarioError> {
    if v.len() != dim {
        return Err(invalid(
            path,
            format!("expected {dim} indices, got {}", v.len()),
        ));
    }
    let mut c = [0usize; 3];
    c[..dim].copy_from_slice(v);
    Ok(c)
}

fn face(
    cfg: Option<&FaceConfig>,
    path: &str,
    required: bool,
) -> Result<FaceCondition, ScenarioError> {
    match cfg {
        None if required => Err(invalid(path, "boundary face missing for this dimensionality")),
        None => Ok(FaceCondition::Pec),
        Some(FaceConfig::Named(s)) if s == "pec" => Ok(FaceCondition::Pec),
        Some(FaceConfig::Named(s)) => Err(invalid(
            path,
            format!("unknown face condition `{s}` (expected \"pec\" or an absorber table)"),
        )),
        Some(FaceConfig::Absorber { absorber }) => Ok(FaceCondition::MatchedAbsorber {
            thickness: absorber.thickness,
            poly_order: absorber.poly_order,
            target_reflection: absorber.target_reflection,
        }),
    }
}

pub fn validate(scenario: Scenario) -> Result<Validated, ScenarioError> {
    let s = &scenario;
    let dim = s.grid.dimensionality;
    let grid = GridSpec::new(dim, &s.grid.cell_counts, &s.grid.cell_sizes)
        .map_err(|e| invalid("grid", e.to_string()))?;

    // materials: uniform background with box overrides
    let m = &s.materials;
    if !(m.epsilon_r > 0.0) || !(m.mu_r > 0.0) {
        return Err(invalid("materials", "epsilon_r and mu_r must be positive"));
    }
    if m.sigma_e < 0.0 || m.sigma_m < 0.0 {
        return Err(invalid("materials", "conductivities must be non-negative"));
    }
    let mut materials = MaterialMap::uniform(
        &grid,
        m.epsilon_r * fdtd_mor::constants::EPS0,
        m.mu_r * fdtd_mor::constants::MU0,
        m.sigma_e,
        m.sigma_m,
    )
    .map_err(|e| invalid("materials", e.to_string()))?;
    for (bi, block) in m.blocks.iter().enumerate() {
        let path = format!("materials.blocks[{bi}]");
        let lo = cell3(&block.cells_min, dim, &path)?;
        let hi = cell3(&block.cells_max, dim, &path)?;
        for a in 0..dim {
            if lo[a] >= hi[a] || hi[a] > grid.cells(a) {
                return Err(invalid(
                    &path,
                    format!("cells_min/cells_max out of range on axis {a}"),
                ));
            }
        }
        let hi = [
            if dim > 0 { hi[0] } else { 1 },
            if dim > 1 { hi[1] } else { 1 },
            if dim > 2 { hi[2] } else { 1 },
        ];
        for z in lo[2]..hi[2].max(lo[2] + 1) {
            for y in lo[1]..hi[1].max(lo[1] + 1) {
                for x in lo[0]..hi[0].max(lo[0] + 1) {
                    let ci = grid
                        .cell_index([x, y, z])
                        .ok_or_else(|| invalid(&path, "cell outside grid"))?;
                    if let Some(er) = block.epsilon_r {
                        materials.eps[ci] = er * fdtd_mor::constants::EPS0;
                    }
                    if let Some(mr) = block.mu_r {
                        materials.mu[ci] = mr * fdtd_mor::constants::MU0;
                    }
                    if let Some(se) = block.sigma_e {
                        materials.sigma_e[ci] = se;
                    }
                    if let Some(sm) = block.sigma_m {
                        materials.sigma_m[ci] = sm;
                    }
                    if block.pec {
                        materials.pec[ci] = true;
                    }
                }
            }
        }
    }
    materials
        .validate()
        .map_err(|e| invalid("materials", e.to_string()))?;

    let b = &s.boundaries;
    let boundaries = BoundarySpec {
        faces: [
            [
                face(Some(&b.x_min), "boundaries.x_min", true)?,
                face(Some(&b.x_max), "boundaries.x_max", true)?,
            ],
            [
                face(b.y_min.as_ref(), "boundaries.y_min", dim >= 2)?,
                face(b.y_max.as_ref(), "boundaries.y_max", dim >= 2)?,
            ],
            [
                face(b.z_min.as_ref(), "boundaries.z_min", dim >= 3)?,
                face(b.z_max.as_ref(), "boundaries.z_max", dim >= 3)?,
            ],
        ],
    };
    boundaries
        .validate(&grid)
        .map_err(|e| invalid("boundaries", e.to_string()))?;

    let mut sources = Vec::new();
    for (i, src) in s.sources.iter().enumerate() {
        let path = format!("sources[{i}]");
        let kind = match src.kind.as_str() {
            "electric" => SourceKind::ElectricCurrent,
            "magnetic" => SourceKind::MagneticCurrent,
            other => {
                return Err(invalid(
                    &format!("{path}.kind"),
                    format!("unknown source kind `{other}`"),
                ))
            }
        };
        let component = Component::parse(&src.component).ok_or_else(|| {
            invalid(
                &format!("{path}.component"),
                format!("unknown component `{}`", src.component),
            )
        })?;
        let mut cells = Vec::new();
        for (ci, c) in src.cells.iter().enumerate() {
            cells.push(cell3(c, dim, &format!("{path}.cells[{ci}]"))?);
        }
        if cells.is_empty() {
            return Err(invalid(&format!("{path}.cells"), "source has no locations"));
        }
        let w = &src.waveform;
        let n_set = usize::from(w.gaussian.is_some())
            + usize::from(w.sinusoid.is_some())
            + usize::from(w.samples.is_some());
        if n_set != 1 {
            return Err(invalid(
                &format!("{path}.waveform"),
                "exactly one of `gaussian`, `sinusoid`, `samples` must be set",
            ));
        }
        let waveform = if let Some(g) = w.gaussian {
            Waveform::GaussianPulse { f_max: g.f_max }
        } else if let Some(sn) = w.sinusoid {
            Waveform::Sinusoid { f0: sn.f0 }
        } else {
            Waveform::UserSamples(w.samples.clone().unwrap())
        };
        waveform
            .validate()
            .map_err(|e| invalid(&format!("{path}.waveform"), e.to_string()))?;
        sources.push(SourceSpec {
            kind,
            component,
            cells,
            waveform,
        });
    }

    let mut probes = Vec::new();
    let mut seen_names = std::collections::HashSet::new();
    for (i, p) in s.probes.iter().enumerate() {
        let path = format!("probes[{i}]");
        if !seen_names.insert(p.name.clone()) {
            return Err(invalid(&path, format!("duplicate probe name `{}`", p.name)));
        }
        let component = Component::parse(&p.component).ok_or_else(|| {
            invalid(
                &format!("{path}.component"),
                format!("unknown component `{}`", p.component),
            )
        })?;
        probes.push(ProbeSpec {
            name: p.name.clone(),
            component,
            cell: cell3(&p.cell, dim, &format!("{path}.cell"))?,
        });
    }

    let engine = match s.run.engine.as_str() {
        "full" => Engine::Full,
        "reduced" => Engine::Reduced,
        other => {
            return Err(invalid(
                "run.engine",
                format!("unknown engine `{other}` (expected \"full\" or \"reduced\")"),
            ))
        }
    };
    if !(s.run.s_factor > 0.0) {
        return Err(invalid("run.s_factor", "must be positive"));
    }
    if s.run.steps < 1 {
        return Err(invalid("run.steps", "must be at least 1"));
    }
    if engine == Engine::Reduced {
        let r = s
            .reduction
            .as_ref()
            .ok_or_else(|| invalid("reduction", "required when run.engine = \"reduced\""))?;
        if r.order < 2 || r.order % 2 != 0 {
            return Err(invalid("reduction.order", "must be even and >= 2"));
        }
        if !(r.radius > 1.0) {
            return Err(invalid("reduction.radius", "must exceed 1"));
        }
        if !(r.f_max > 0.0) {
            return Err(invalid("reduction.f_max", "must be positive"));
        }
        if !(r.gamma > 0.0 && r.gamma < 1.0) {
            return Err(invalid("reduction.gamma", "must lie in (0,1)"));
        }
    }

    let (solve_method, solve_tolerance) = match &s.solver {
        None => (SolveMethod::Auto, fdtd_mor::solver::DEFAULT_ITERATIVE_TOL),
        Some(cfg) => {
            let m = match cfg.method.as_str() {
                "direct" => SolveMethod::Direct,
                "iterative" => SolveMethod::Iterative,
                "auto" => SolveMethod::Auto,
                other => {
                    return Err(invalid(
                        "solver.method",
                        format!("unknown method `{other}`"),
                    ))
                }
            };
            if !(cfg.tolerance > 0.0) {
                return Err(invalid("solver.tolerance", "must be positive"));
            }
            (m, cfg.tolerance)
        }
    };

    if s.outputs.directory.is_empty() {
        return Err(invalid("outputs.directory", "must not be empty"));
    }
    if !(s.outputs.resonance_prominence > 0.0) {
        return Err(invalid("outputs.resonance_prominence", "must be positive"));
    }

    Ok(Validated {
        grid,
        materials,
        boundaries,
        sources,
        probes,
        engine,
        solve_method,
        solve_tolerance,
        scenario,
    })
}

/// Canonical TOML text of a scenario.
pub fn to_toml(s: &Scenario) -> String {
    toml::to_string_pretty(s).expect("scenario serialization")
}

/// FNV-1a over the canonical serialization; stamped into artifact headers.
pub fn content_hash(s: &Scenario) -> u64 {
    let text = to_toml(s);
    let mut h = 0xcbf29ce484222325u64;
    for b in text.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
