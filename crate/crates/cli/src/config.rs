//! Run configuration: a TOML file with flat top-level keys and optional
//! sections. Unknown keys are rejected so that typos surface as config
//! errors instead of silently falling back to defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use ergodic_core::discretize::{BoundaryCondition, Mesh};
use ergodic_core::eigen::{default_delta_sequence, EigenSettings};
use ergodic_core::solver::SolverSettings;
use ergodic_core::sweeps::{default_probes, DetectionPolicy, SweepSettings};
use ergodic_core::{Execution, Exponent, Geometry, Potential, ProblemSpec};
use serde::{Deserialize, Serialize};

use crate::catalog;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Discount,
    MSweep,
    BetaSweep,
    BetaBisect,
    Be0Floor,
    VerifyAnalytic,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Discount => "discount",
            Command::MSweep => "m-sweep",
            Command::BetaSweep => "beta-sweep",
            Command::BetaBisect => "beta-bisect",
            Command::Be0Floor => "be0-floor",
            Command::VerifyAnalytic => "verify-analytic",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An exponent as written in the file: a number or `"inf"`.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum MValue {
    Number(f64),
    Text(String),
}

impl MValue {
    fn exponent(&self) -> std::result::Result<Exponent, String> {
        let parsed = match self {
            MValue::Number(m) => Exponent::finite(*m),
            MValue::Text(s) => s.parse(),
        };
        parsed.map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeometryName {
    Line,
    Radial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    #[default]
    Direct,
    Discount,
    /// Both methods on the same mesh, with the disagreement reported.
    Cross,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryName {
    #[default]
    OutwardSlope,
    Reflecting,
    DirichletZero,
}

/// A catalog potential. Parameters a shape does not use are rejected.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub name: String,
    pub amplitude: Option<f64>,
    pub center: Option<f64>,
    pub width: Option<f64>,
    pub rate: Option<f64>,
    pub power: Option<f64>,
    pub value: Option<f64>,
    /// Decay constant in `|f| <= C0 <x>^{-m*}`.
    pub c0: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<PotentialConfig>,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        PotentialConfig {
            name: "bump".into(),
            amplitude: None,
            center: None,
            width: None,
            rate: None,
            power: None,
            value: None,
            c0: None,
            components: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Newton residual tolerance in the sup norm.
    pub solver: f64,
    pub max_iter: usize,
    pub min_step: f64,
    /// Reach large `m` and `m = inf` by continuation when a cold start fails.
    pub continuation: bool,
    /// Direct/discount gap that triggers a warning.
    pub disagreement: f64,
    /// Successive-radius change counted as stable.
    pub stabilization: f64,
    /// Smallest `|lambda|` counted as negative.
    pub detection_floor: f64,
    pub disagreement_factor: f64,
    /// Cross-check every sweep point with the discount method.
    pub cross_check: bool,
    /// Bracket width at which threshold bisection stops.
    pub beta: f64,
    /// Allowed `|lambda|` at the coupling floor.
    pub be0: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let solver = SolverSettings::default();
        let eigen = EigenSettings::default();
        let detection = DetectionPolicy::default();
        Tolerances {
            solver: solver.tol,
            max_iter: solver.max_iter,
            min_step: solver.min_step,
            continuation: solver.continuation,
            disagreement: eigen.disagreement_tol,
            stabilization: eigen.stabilization_tol,
            detection_floor: detection.floor,
            disagreement_factor: detection.disagreement_factor,
            cross_check: detection.cross_check,
            beta: 1e-3,
            be0: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct MSweepConfig {
    pub m_list: Vec<f64>,
    pub include_infinity: bool,
}

impl Default for MSweepConfig {
    fn default() -> Self {
        MSweepConfig {
            m_list: vec![4.0, 8.0, 16.0, 32.0, 64.0],
            include_infinity: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct BetaSweepConfig {
    pub betas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Plus,
    Minus,
    /// Both thresholds, bracketed from the probe list.
    #[default]
    Both,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct BetaBisectConfig {
    pub side: Side,
    /// `[zero side, negative side]`; when absent the probes bracket it.
    pub bracket: Option<[f64; 2]>,
    pub probes: Vec<f64>,
}

impl Default for BetaBisectConfig {
    fn default() -> Self {
        BetaBisectConfig {
            side: Side::Both,
            bracket: None,
            probes: default_probes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct Be0FloorConfig {
    pub m_list: Vec<MValue>,
    pub c0: f64,
}

impl Default for Be0FloorConfig {
    fn default() -> Self {
        Be0FloorConfig {
            m_list: vec![MValue::Number(3.0), MValue::Text("inf".into())],
            c0: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Injection {
    #[default]
    None,
    /// Flip the sign of `K_m` in the smooth subsolution.
    KSign,
    /// Ask the multi-solution family for `C = 0.6`.
    FamilyC,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Deliberate fault for mutation testing of the oracle suite.
    pub inject: Injection,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationConfig {
    /// `f -> f + epsilon phi` with `phi` drawn from the catalog by `--seed`.
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Fill `wall_ms`. Off by default so that reruns are byte-identical.
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub run_id: Option<String>,
    pub geometry: Option<GeometryName>,
    #[serde(rename = "N")]
    pub dim: usize,
    pub m: Option<MValue>,
    pub beta: f64,
    /// Constant added to the forcing.
    pub shift: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub n_cells: usize,
    pub method: MethodName,
    pub delta_sequence: Vec<f64>,
    pub output_dir: Option<PathBuf>,
    pub boundary: BoundaryName,
    pub boundary_slope: f64,
    pub potential: PotentialConfig,
    pub tolerances: Tolerances,
    pub m_sweep: MSweepConfig,
    pub beta_sweep: BetaSweepConfig,
    pub beta_bisect: BetaBisectConfig,
    pub be0_floor: Be0FloorConfig,
    pub verify: VerifyConfig,
    pub perturbation: PerturbationConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            run_id: None,
            geometry: None,
            dim: 1,
            m: None,
            beta: 0.0,
            shift: 0.0,
            radius: 60.0,
            n_cells: 4096,
            method: MethodName::Direct,
            delta_sequence: default_delta_sequence(),
            output_dir: None,
            boundary: BoundaryName::OutwardSlope,
            boundary_slope: 1.0,
            potential: PotentialConfig::default(),
            tolerances: Tolerances::default(),
            m_sweep: MSweepConfig::default(),
            beta_sweep: BetaSweepConfig::default(),
            beta_bisect: BetaBisectConfig::default(),
            be0_floor: Be0FloorConfig::default(),
            verify: VerifyConfig::default(),
            perturbation: PerturbationConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// A parsed configuration together with its source text, used to point
/// semantic errors at the offending line.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub run: RunConfig,
    source: String,
    origin: String,
}

impl LoadedConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text, &path.display().to_string())?;
        if cfg.run.run_id.is_none() {
            cfg.run.run_id = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(cfg)
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let run: RunConfig =
            toml::from_str(text).map_err(|e| CliError::config(format!("{origin}: {e}")))?;
        Ok(LoadedConfig {
            run,
            source: text.to_string(),
            origin: origin.to_string(),
        })
    }

    /// Configuration with every value at its default.
    pub fn empty() -> Self {
        LoadedConfig {
            run: RunConfig::default(),
            source: String::new(),
            origin: "<defaults>".into(),
        }
    }

    /// Config error naming the line that sets `key` (in `section`, or at
    /// top level) when the key appears in the source.
    pub fn error_at(&self, section: Option<&str>, key: &str, msg: impl fmt::Display) -> CliError {
        match locate(&self.source, section, key) {
            Some((line, text)) => CliError::config(format!(
                "{}: line {line}: `{}`: {msg}",
                self.origin,
                text.trim()
            )),
            None => {
                let path = match section {
                    Some(s) => format!("{s}.{key}"),
                    None => key.to_string(),
                };
                CliError::config(format!("{}: {path}: {msg}", self.origin))
            }
        }
    }

    pub fn run_id(&self, command: Command) -> String {
        self.run
            .run_id
            .clone()
            .unwrap_or_else(|| command.name().to_string())
    }

    pub fn exponent(&self) -> Result<Exponent> {
        let m = self
            .run
            .m
            .as_ref()
            .ok_or_else(|| self.error_at(None, "m", "this command needs an exponent m"))?;
        m.exponent().map_err(|e| self.error_at(None, "m", e))
    }

    pub fn geometry(&self) -> Result<Geometry> {
        let dim = self.run.dim;
        if dim == 0 {
            return Err(self.error_at(None, "N", "dimension must be positive"));
        }
        match self.run.geometry {
            Some(GeometryName::Line) if dim != 1 => {
                Err(self.error_at(None, "geometry", "line geometry requires N = 1"))
            }
            Some(GeometryName::Line) => Ok(Geometry::Line),
            Some(GeometryName::Radial) => Ok(Geometry::Radial),
            None if dim == 1 => Ok(Geometry::Line),
            None => Ok(Geometry::Radial),
        }
    }

    pub fn potential(&self, exponent: Option<&Exponent>) -> Result<Potential> {
        catalog::build(&self.run.potential, exponent)
            .map_err(|e| self.error_at(Some("potential"), "name", e))
    }

    /// The problem at the configured `m`, `beta`, shift and potential.
    pub fn spec_with(&self, exponent: Exponent) -> Result<ProblemSpec> {
        let geometry = self.geometry()?;
        let potential = self.potential(Some(&exponent))?;
        if !self.run.beta.is_finite() {
            return Err(self.error_at(None, "beta", "beta must be finite"));
        }
        if !self.run.shift.is_finite() {
            return Err(self.error_at(None, "shift", "shift must be finite"));
        }
        let spec = ProblemSpec::new(self.run.dim, exponent, self.run.beta, potential, geometry)
            .map_err(|e| self.error_at(None, "N", e))?;
        Ok(spec.with_shift(self.run.shift))
    }

    pub fn spec(&self) -> Result<ProblemSpec> {
        self.spec_with(self.exponent()?)
    }

    pub fn mesh(&self) -> Result<Mesh> {
        let geometry = self.geometry()?;
        if !(self.run.radius > 0.0 && self.run.radius.is_finite()) {
            return Err(self.error_at(None, "R", "truncation radius must be positive"));
        }
        let mesh = match geometry {
            Geometry::Line => Mesh::line(self.run.radius, self.run.n_cells),
            Geometry::Radial => Mesh::radial(self.run.dim, self.run.radius, self.run.n_cells),
        };
        mesh.map_err(|e| self.error_at(None, "n_cells", e))
    }

    pub fn deltas(&self) -> Result<Vec<f64>> {
        let d = &self.run.delta_sequence;
        if d.len() < 3 {
            return Err(self.error_at(None, "delta_sequence", "needs at least three discounts"));
        }
        if d.iter().any(|x| !(*x > 0.0 && x.is_finite())) || d.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(self.error_at(
                None,
                "delta_sequence",
                "discounts must be positive and strictly decreasing",
            ));
        }
        Ok(d.clone())
    }

    fn boundary(&self) -> Result<BoundaryCondition> {
        Ok(match self.run.boundary {
            BoundaryName::Reflecting => BoundaryCondition::Reflecting,
            BoundaryName::DirichletZero => BoundaryCondition::DirichletZero,
            BoundaryName::OutwardSlope => {
                let s = self.run.boundary_slope;
                if !(s.is_finite() && s >= 0.0) {
                    return Err(self.error_at(
                        None,
                        "boundary_slope",
                        "outward slope must be finite and nonnegative",
                    ));
                }
                BoundaryCondition::OutwardSlope(s)
            }
        })
    }

    pub fn sweep_settings(&self, execution: Execution) -> Result<SweepSettings> {
        let t = &self.run.tolerances;
        let positive = [
            ("solver", t.solver),
            ("min_step", t.min_step),
            ("disagreement", t.disagreement),
            ("stabilization", t.stabilization),
            ("detection_floor", t.detection_floor),
            ("beta", t.beta),
            ("be0", t.be0),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(self.error_at(Some("tolerances"), key, "must be positive"));
            }
        }
        if !(t.disagreement_factor >= 0.0 && t.disagreement_factor.is_finite()) {
            return Err(self.error_at(Some("tolerances"), "disagreement_factor", "must be nonnegative"));
        }
        if t.max_iter == 0 {
            return Err(self.error_at(Some("tolerances"), "max_iter", "must be positive"));
        }
        Ok(SweepSettings {
            eigen: EigenSettings {
                solver: SolverSettings {
                    tol: t.solver,
                    max_iter: t.max_iter,
                    min_step: t.min_step,
                    continuation: t.continuation,
                    boundary: self.boundary()?,
                },
                execution,
                disagreement_tol: t.disagreement,
                stabilization_tol: t.stabilization,
            },
            detection: DetectionPolicy {
                floor: t.detection_floor,
                disagreement_factor: t.disagreement_factor,
                cross_check: t.cross_check,
            },
            deltas: self.deltas()?,
        })
    }

    pub fn m_list(&self) -> Result<Vec<f64>> {
        let list = &self.run.m_sweep.m_list;
        if list.is_empty() {
            return Err(self.error_at(Some("m_sweep"), "m_list", "needs at least one exponent"));
        }
        for &m in list {
            Exponent::finite(m).map_err(|e| self.error_at(Some("m_sweep"), "m_list", e))?;
        }
        if list.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(self.error_at(Some("m_sweep"), "m_list", "exponents must be increasing"));
        }
        Ok(list.clone())
    }

    pub fn floor_exponents(&self) -> Result<Vec<Exponent>> {
        let list = &self.run.be0_floor.m_list;
        if list.is_empty() {
            return Err(self.error_at(Some("be0_floor"), "m_list", "needs at least one exponent"));
        }
        list.iter()
            .map(|m| m.exponent().map_err(|e| self.error_at(Some("be0_floor"), "m_list", e)))
            .collect()
    }

    pub fn betas(&self) -> Result<Vec<f64>> {
        let b = &self.run.beta_sweep.betas;
        if b.is_empty() {
            return Err(self.error_at(Some("beta_sweep"), "betas", "beta grid is empty"));
        }
        if b.iter().any(|x| !x.is_finite()) {
            return Err(self.error_at(Some("beta_sweep"), "betas", "couplings must be finite"));
        }
        Ok(b.clone())
    }
}

/// Line number (1-based) and text of the first assignment to `key` inside
/// `section` (`None` for the top level).
fn locate(source: &str, section: Option<&str>, key: &str) -> Option<(usize, String)> {
    let mut current: Option<String> = None;
    for (i, line) in source.lines().enumerate() {
        let t = line.trim();
        if let Some(header) = t.strip_prefix('[') {
            let name = header.trim_start_matches('[');
            let name = name.split(']').next().unwrap_or("").trim();
            current = Some(name.to_string());
            continue;
        }
        if current.as_deref() != section {
            continue;
        }
        if let Some((lhs, _)) = t.split_once('=') {
            if lhs.trim().trim_matches('"') == key {
                return Some((i + 1, line.to_string()));
            }
        }
    }
    None
}
