//! Experiment configuration (TOML). Parsing fills every default so the
//! emitted effective config parses back to the same value.

use serde::{Deserialize, Serialize};

use crate::bohm::DecomposeOptions;
use crate::complexified::RectLoop;
use crate::constants::{ELECTRON_MASS, PROTON_MASS};
use crate::error::{Error, Result};
use crate::evolve::EvolutionPlan;
use crate::field::{gaussian_packet_axes, harmonic_ground_state, plane_wave, vortex, WaveField};
use crate::grid::{make_grid, Grid};
use crate::interference::ScreenGeometry;
use crate::potential::{build_potential, PotentialSpec};
use crate::spectral::Backend;

fn cfg_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Rewrites parameter errors raised while building objects so they carry the config path.
fn in_section<T>(section: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::InvalidParameter { name, reason } => cfg_err(&format!("{section}.{name}"), reason),
        Error::Config { .. } => e,
        other => cfg_err(section, other.to_string()),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum UnitSystem {
    #[default]
    Natural,
    Si,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitsConfig {
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default)]
    pub system: UnitSystem,
}

impl Default for UnitsConfig {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
            system: UnitSystem::Natural,
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub points: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    Gaussian,
    HarmonicGround,
    PlaneWave,
    Vortex,
}

/// One width for every axis, or one per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Width {
    Uniform(f64),
    PerAxis(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub kind: InitialKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Width>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavevector: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    #[default]
    Free,
    Constant,
    Harmonic,
    TwoSlit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    #[serde(default)]
    pub kind: PotentialKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_wall: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thickness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slit_centers: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slit_width: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub steps: usize,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    #[serde(default = "yes")]
    pub write_snapshots: bool,
}

fn default_stride() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    /// 0 disables the stage.
    #[serde(default)]
    pub particles: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_bins")]
    pub equivariance_bins: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equivariance_tolerance: Option<f64>,
}

fn default_bins() -> usize {
    50
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            particles: 0,
            seed: 0,
            equivariance_bins: default_bins(),
            equivariance_tolerance: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopConfig {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_winding: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    #[serde(default = "default_backend")]
    pub backend: String,
    #[serde(default = "default_floor")]
    pub rho_floor: f64,
    #[serde(default = "default_norm_tol")]
    pub norm_tolerance: f64,
    #[serde(default = "yes")]
    pub residuals: bool,
    /// Snapshot used for residuals; middle snapshot when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_tolerance: Option<f64>,
    #[serde(default = "yes")]
    pub q_forms: bool,
    #[serde(default = "default_q_tol")]
    pub q_form_tolerance: f64,
    #[serde(default = "yes")]
    pub gradient_identity: bool,
    #[serde(default)]
    pub u_plus_q: bool,
    #[serde(default = "default_uq_tol")]
    pub u_plus_q_tolerance: f64,
    #[serde(default = "yes")]
    pub probes: bool,
    #[serde(default)]
    pub loops: Vec<LoopConfig>,
    #[serde(default = "default_circ_tol")]
    pub circulation_tolerance: f64,
}

fn default_backend() -> String {
    "spectral".into()
}
fn default_floor() -> f64 {
    crate::bohm::DEFAULT_RHO_FLOOR
}
fn default_norm_tol() -> f64 {
    1e-6
}
fn default_q_tol() -> f64 {
    1e-6
}
fn default_uq_tol() -> f64 {
    1e-4
}
fn default_circ_tol() -> f64 {
    1e-4
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        toml::from_str("").expect("all diagnostics keys have defaults")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterferenceConfig {
    pub screen_x: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slit_separation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub midline: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavenumber: Option<f64>,
    #[serde(default = "default_spacing_tol")]
    pub tolerance: f64,
}

fn default_spacing_tol() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedMass {
    pub name: String,
    pub kg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    #[serde(default = "default_masses")]
    pub masses: Vec<NamedMass>,
}

fn default_masses() -> Vec<NamedMass> {
    vec![
        NamedMass {
            name: "electron".into(),
            kg: ELECTRON_MASS,
        },
        NamedMass {
            name: "proton".into(),
            kg: PROTON_MASS,
        },
    ]
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        Self {
            masses: default_masses(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default = "yes")]
    pub field_csv: bool,
}

fn default_dir() -> String {
    "bohmlab_out".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            field_csv: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub units: UnitsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolution: Option<EvolutionConfig>,
    #[serde(default)]
    pub trajectories: TrajectoryConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interference: Option<InterferenceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantsConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Parses, fills defaults and validates.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        let key = msg
            .split('`')
            .nth(1)
            .filter(|_| msg.starts_with("unknown field") || msg.starts_with("missing field"))
            .map(str::to_string)
            .unwrap_or_else(|| "<document>".into());
        cfg_err(&key, e.to_string().trim_end())
    })?;
    cfg.resolve()?;
    cfg.validate()?;
    Ok(cfg)
}

/// Effective configuration as TOML.
pub fn emit_config(cfg: &ExperimentConfig) -> Result<String> {
    let body = toml::to_string(cfg).map_err(|e| cfg_err("<document>", e.to_string()))?;
    Ok(format!("# effective configuration, all defaults filled in\n{body}"))
}

fn check_len(key: &str, v: &[f64], dims: usize) -> Result<()> {
    if v.len() != dims {
        return Err(cfg_err(key, format!("expected {dims} components, got {}", v.len())));
    }
    Ok(())
}

fn forbid<T>(key: &str, v: &Option<T>, kind: &str) -> Result<()> {
    if v.is_some() {
        return Err(cfg_err(key, format!("does not apply to kind '{kind}'")));
    }
    Ok(())
}

fn require<T: Clone>(key: &str, v: &Option<T>) -> Result<T> {
    v.clone().ok_or_else(|| cfg_err(key, "required for this kind"))
}

impl ExperimentConfig {
    pub fn dims(&self) -> Option<usize> {
        self.grid.as_ref().map(|g| g.points.len())
    }

    /// Fills defaults that depend on other sections.
    fn resolve(&mut self) -> Result<()> {
        let dims = self.dims();
        if self.grid.is_some() && self.potential.is_none() {
            self.potential = Some(PotentialConfig::default());
        }
        if let (Some(d), Some(init)) = (dims, self.initial.as_mut()) {
            let zeros = vec![0.0; d];
            match init.kind {
                InitialKind::Gaussian => {
                    init.center.get_or_insert(zeros.clone());
                    init.wavevector.get_or_insert(zeros);
                }
                InitialKind::HarmonicGround | InitialKind::Vortex => {
                    init.center.get_or_insert(zeros);
                }
                InitialKind::PlaneWave => {}
            }
        }
        let mass = self.units.mass;
        if let (Some(d), Some(pot)) = (dims, self.potential.as_mut()) {
            if pot.kind == PotentialKind::Harmonic {
                pot.center.get_or_insert(vec![0.0; d]);
                pot.mass.get_or_insert(mass);
            }
        }
        if let Some(scr) = self.interference.as_mut() {
            if let Some(PotentialConfig {
                kind: PotentialKind::TwoSlit,
                x_wall,
                slit_centers,
                ..
            }) = &self.potential
            {
                if let (Some(x), Some(c)) = (x_wall, slit_centers) {
                    scr.wall_x.get_or_insert(*x);
                    scr.slit_separation.get_or_insert((c[0] - c[1]).abs());
                    scr.midline.get_or_insert(0.5 * (c[0] + c[1]));
                }
            }
            if let Some(k) = self.initial.as_ref().and_then(|i| i.wavevector.as_ref()) {
                if let Some(&k0) = k.first() {
                    scr.wavenumber.get_or_insert(k0);
                }
            }
            scr.midline.get_or_insert(0.0);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let u = &self.units;
        if !(u.hbar > 0.0 && u.hbar.is_finite()) {
            return Err(cfg_err("units.hbar", "must be positive"));
        }
        if !(u.mass > 0.0 && u.mass.is_finite()) {
            return Err(cfg_err("units.mass", "must be positive"));
        }
        if self.grid.is_none() {
            for (name, present) in [
                ("initial", self.initial.is_some()),
                ("potential", self.potential.is_some()),
                ("evolution", self.evolution.is_some()),
                ("interference", self.interference.is_some()),
            ] {
                if present {
                    return Err(cfg_err(name, "needs a [grid] section"));
                }
            }
            if self.trajectories.particles > 0 {
                return Err(cfg_err("trajectories.particles", "needs a [grid] section"));
            }
            if self.constants.is_none() && u.system != UnitSystem::Si {
                return Err(cfg_err("grid", "nothing to run: add [grid] or [constants]"));
            }
        } else {
            let grid = self.build_grid()?;
            if self.initial.is_none() {
                return Err(cfg_err("initial", "required with a [grid] section"));
            }
            if self.evolution.is_none() {
                return Err(cfg_err("evolution", "required with a [grid] section"));
            }
            self.initial_field(&grid)?;
            self.potential_spec()
                .and_then(|spec| in_section("potential", build_potential(&grid, &spec)))?;
            self.plan()?;
        }
        self.decompose_options()?;
        let d = &self.diagnostics;
        for (key, v) in [
            ("diagnostics.norm_tolerance", d.norm_tolerance),
            ("diagnostics.q_form_tolerance", d.q_form_tolerance),
            ("diagnostics.u_plus_q_tolerance", d.u_plus_q_tolerance),
            ("diagnostics.circulation_tolerance", d.circulation_tolerance),
        ] {
            if !(v > 0.0) {
                return Err(cfg_err(key, "must be positive"));
            }
        }
        if let Some(t) = d.residual_tolerance {
            if !(t > 0.0) {
                return Err(cfg_err("diagnostics.residual_tolerance", "must be positive"));
            }
        }
        if !d.loops.is_empty() && self.dims() != Some(2) {
            return Err(cfg_err("diagnostics.loops", "circulation loops need a 2D grid"));
        }
        for lp in &d.loops {
            if !(lp.upper[0] > lp.lower[0] && lp.upper[1] > lp.lower[1]) {
                return Err(cfg_err("diagnostics.loops.upper", "must exceed lower on both axes"));
            }
        }
        if self.trajectories.equivariance_bins == 0 {
            return Err(cfg_err("trajectories.equivariance_bins", "must be at least 1"));
        }
        if self.interference.is_some() {
            if self.dims() != Some(2) {
                return Err(cfg_err("interference", "needs a 2D grid"));
            }
            self.screen_geometry()?;
        }
        if let Some(c) = &self.constants {
            for m in &c.masses {
                if !(m.kg > 0.0 && m.kg.is_finite()) {
                    return Err(cfg_err("constants.masses.kg", format!("mass '{}' must be positive", m.name)));
                }
            }
        }
        if self.output.dir.trim().is_empty() {
            return Err(cfg_err("output.dir", "must not be empty"));
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<Grid> {
        let g = self.grid.as_ref().ok_or_else(|| cfg_err("grid", "missing section"))?;
        let dims = g.points.len();
        if !(1..=2).contains(&dims) {
            return Err(cfg_err("grid.points", "expected 1 or 2 axes"));
        }
        check_len("grid.min", &g.min, dims)?;
        check_len("grid.max", &g.max, dims)?;
        let extents: Vec<(f64, f64)> = g.min.iter().cloned().zip(g.max.iter().cloned()).collect();
        make_grid(dims, &extents, &g.points).map_err(|e| cfg_err("grid", e.to_string()))
    }

    pub fn initial_field(&self, grid: &Grid) -> Result<WaveField> {
        let init = self.initial.as_ref().ok_or_else(|| cfg_err("initial", "missing section"))?;
        let d = grid.dims();
        let kind = format!("{:?}", init.kind);
        let (hbar, mass) = (self.units.hbar, self.units.mass);
        let field = match init.kind {
            InitialKind::Gaussian => {
                forbid("initial.omega", &init.omega, &kind)?;
                forbid("initial.width", &init.width, &kind)?;
                let c = require("initial.center", &init.center)?;
                let k = require("initial.wavevector", &init.wavevector)?;
                check_len("initial.center", &c, d)?;
                check_len("initial.wavevector", &k, d)?;
                let sigmas = match require("initial.sigma", &init.sigma)? {
                    Width::Uniform(s) => vec![s; d],
                    Width::PerAxis(v) => {
                        check_len("initial.sigma", &v, d)?;
                        v
                    }
                };
                gaussian_packet_axes(grid, &c, &sigmas, &k)
            }
            InitialKind::HarmonicGround => {
                forbid("initial.sigma", &init.sigma, &kind)?;
                forbid("initial.wavevector", &init.wavevector, &kind)?;
                forbid("initial.width", &init.width, &kind)?;
                let c = require("initial.center", &init.center)?;
                check_len("initial.center", &c, d)?;
                harmonic_ground_state(grid, require("initial.omega", &init.omega)?, &c, hbar, mass)
            }
            InitialKind::PlaneWave => {
                forbid("initial.sigma", &init.sigma, &kind)?;
                forbid("initial.center", &init.center, &kind)?;
                forbid("initial.omega", &init.omega, &kind)?;
                forbid("initial.width", &init.width, &kind)?;
                let k = require("initial.wavevector", &init.wavevector)?;
                check_len("initial.wavevector", &k, d)?;
                plane_wave(grid, &k)
            }
            InitialKind::Vortex => {
                forbid("initial.sigma", &init.sigma, &kind)?;
                forbid("initial.wavevector", &init.wavevector, &kind)?;
                forbid("initial.omega", &init.omega, &kind)?;
                let c = require("initial.center", &init.center)?;
                check_len("initial.center", &c, d)?;
                vortex(grid, &c, require("initial.width", &init.width)?)
            }
        };
        in_section("initial", field.and_then(|f| f.with_units(hbar, mass)))
    }

    pub fn potential_spec(&self) -> Result<PotentialSpec> {
        let p = self.potential.clone().unwrap_or_default();
        let kind = format!("{:?}", p.kind);
        let forbid_all = |keys: &[(&str, bool)]| -> Result<()> {
            for (k, present) in keys {
                if *present {
                    return Err(cfg_err(&format!("potential.{k}"), format!("does not apply to kind '{kind}'")));
                }
            }
            Ok(())
        };
        let slit_keys = [
            ("x_wall", p.x_wall.is_some()),
            ("thickness", p.thickness.is_some()),
            ("height", p.height.is_some()),
            ("slit_centers", p.slit_centers.is_some()),
            ("slit_width", p.slit_width.is_some()),
        ];
        let harmonic_keys = [
            ("omega", p.omega.is_some()),
            ("mass", p.mass.is_some()),
            ("center", p.center.is_some()),
        ];
        match p.kind {
            PotentialKind::Free => {
                forbid_all(&slit_keys)?;
                forbid_all(&harmonic_keys)?;
                forbid_all(&[("value", p.value.is_some())])?;
                Ok(PotentialSpec::Free)
            }
            PotentialKind::Constant => {
                forbid_all(&slit_keys)?;
                forbid_all(&harmonic_keys)?;
                Ok(PotentialSpec::Constant(require("potential.value", &p.value)?))
            }
            PotentialKind::Harmonic => {
                forbid_all(&slit_keys)?;
                forbid_all(&[("value", p.value.is_some())])?;
                let center = require("potential.center", &p.center)?;
                if let Some(d) = self.dims() {
                    check_len("potential.center", &center, d)?;
                }
                Ok(PotentialSpec::Harmonic {
                    omega: require("potential.omega", &p.omega)?,
                    mass: require("potential.mass", &p.mass)?,
                    center,
                })
            }
            PotentialKind::TwoSlit => {
                forbid_all(&harmonic_keys)?;
                forbid_all(&[("value", p.value.is_some())])?;
                Ok(PotentialSpec::TwoSlit {
                    x_wall: require("potential.x_wall", &p.x_wall)?,
                    thickness: require("potential.thickness", &p.thickness)?,
                    height: require("potential.height", &p.height)?,
                    slit_centers: require("potential.slit_centers", &p.slit_centers)?,
                    slit_width: require("potential.slit_width", &p.slit_width)?,
                })
            }
        }
    }

    pub fn plan(&self) -> Result<EvolutionPlan> {
        let e = self.evolution.as_ref().ok_or_else(|| cfg_err("evolution", "missing section"))?;
        in_section("evolution", EvolutionPlan::new(e.dt, e.steps, e.snapshot_stride))
    }

    pub fn decompose_options(&self) -> Result<DecomposeOptions> {
        let d = &self.diagnostics;
        let backend: Backend = d
            .backend
            .parse()
            .map_err(|_| cfg_err("diagnostics.backend", format!("unknown backend '{}'", d.backend)))?;
        if !(d.rho_floor > 0.0 && d.rho_floor < 1.0) {
            return Err(cfg_err("diagnostics.rho_floor", "must lie in (0, 1)"));
        }
        Ok(DecomposeOptions::default().with_backend(backend).with_floor(d.rho_floor))
    }

    pub fn loops(&self) -> Vec<(RectLoop, Option<i64>)> {
        self.diagnostics
            .loops
            .iter()
            .map(|l| {
                (
                    RectLoop {
                        lower: l.lower,
                        upper: l.upper,
                    },
                    l.expected_winding,
                )
            })
            .collect()
    }

    pub fn screen_geometry(&self) -> Result<ScreenGeometry> {
        let s = self
            .interference
            .as_ref()
            .ok_or_else(|| cfg_err("interference", "missing section"))?;
        let g = ScreenGeometry {
            screen_x: s.screen_x,
            wall_x: require("interference.wall_x", &s.wall_x)?,
            slit_separation: require("interference.slit_separation", &s.slit_separation)?,
            midline: s.midline.unwrap_or(0.0),
            wavenumber: require("interference.wavenumber", &s.wavenumber)?,
        };
        in_section("interference", g.validate())?;
        if !(s.tolerance > 0.0) {
            return Err(cfg_err("interference.tolerance", "must be positive"));
        }
        Ok(g)
    }
}
