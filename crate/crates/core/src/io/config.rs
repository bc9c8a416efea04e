//! TOML run configuration. Unknown keys are rejected; every omitted key has
//! the default documented on its field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::elliptic::{EllipticOperatorSpec, OperatorKind, DEFAULT_TOL};
use crate::error::{FbError, Result};
use crate::evolution::{EvolutionConfig, DEFAULT_CFL};
use crate::fboperator::{Arity, FluxOptions, ProbeOrder, VelocityLaw};
use crate::geometry::{GraphInterface, PeriodicGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseCount {
    One,
    Two,
}

/// Whole run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// `"one"` (default) or `"two"`.
    #[serde(default = "default_phase")]
    pub phase: PhaseCount,
    /// Seed of every randomized suite; default 0, at most `2^63 - 1`.
    #[serde(default)]
    pub seed: u64,
    /// Band margin `delta`; default 0.1.
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub operator: OperatorConfig,
    #[serde(default)]
    pub law: LawConfig,
    #[serde(default)]
    pub initial: InitialProfile,
    #[serde(default)]
    pub evolution: EvolutionSection,
    #[serde(default)]
    pub linearize: LinearizeSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            phase: PhaseCount::One,
            seed: 0,
            delta: default_delta(),
            grid: GridConfig::default(),
            operator: OperatorConfig::default(),
            law: LawConfig::default(),
            initial: InitialProfile::default(),
            evolution: EvolutionSection::default(),
            linearize: LinearizeSection::default(),
            verify: VerifySection::default(),
            output: OutputConfig::default(),
        }
    }
}

fn default_phase() -> PhaseCount {
    PhaseCount::One
}

fn default_delta() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Columns; default 256.
    #[serde(default = "default_n")]
    pub n_x: usize,
    /// Row intervals; default 256.
    #[serde(default = "default_n")]
    pub n_y: usize,
    /// Period; default `2 pi`.
    #[serde(default = "default_period")]
    pub period: f64,
    /// One-phase only: box height. Default `n_y * period / n_x` (square cells).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height_cap: Option<f64>,
    /// Two-phase only and required there: strip height `L`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strip_height: Option<f64>,
}

fn default_n() -> usize {
    256
}

fn default_period() -> f64 {
    2.0 * std::f64::consts::PI
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_x: default_n(),
            n_y: default_n(),
            period: default_period(),
            height_cap: None,
            strip_height: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorName {
    Laplace,
    PucciPlus,
    PucciMinus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorEntry {
    /// Default `"laplace"`.
    #[serde(default = "default_operator")]
    pub kind: OperatorName,
    /// Default 1.
    #[serde(default = "one")]
    pub lambda: f64,
    /// Default 1.
    #[serde(default = "one")]
    pub big_lambda: f64,
}

fn default_operator() -> OperatorName {
    OperatorName::Laplace
}

fn one() -> f64 {
    1.0
}

impl Default for OperatorEntry {
    fn default() -> Self {
        Self {
            kind: OperatorName::Laplace,
            lambda: 1.0,
            big_lambda: 1.0,
        }
    }
}

impl OperatorEntry {
    pub fn spec(&self) -> Result<EllipticOperatorSpec> {
        let kind = match self.kind {
            OperatorName::Laplace => OperatorKind::Laplace,
            OperatorName::PucciPlus => OperatorKind::PucciPlus,
            OperatorName::PucciMinus => OperatorKind::PucciMinus,
        };
        EllipticOperatorSpec::new(kind, self.lambda, self.big_lambda)
    }
}

/// Bulk operators of the positive and negative phase.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    #[serde(default)]
    pub plus: OperatorEntry,
    #[serde(default)]
    pub minus: OperatorEntry,
}

/// Velocity law; default `identity`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawConfig {
    /// `g(a) = a`, or `G(a, b) = a - b` with two phases.
    #[default]
    Identity,
    /// `G(a, b) = a - b`; two phases only.
    Affine,
    /// `a^2` or `a^2 - b^2`.
    Squares,
    /// Piecewise-linear `r` through `[a, r(a)]` knots; `G = r(a) - r(b)` with two phases.
    Table { knots: Vec<[f64; 2]> },
}

impl LawConfig {
    pub fn build(&self, arity: Arity) -> Result<VelocityLaw> {
        match self {
            LawConfig::Identity => Ok(VelocityLaw::identity(arity)),
            LawConfig::Affine if arity == Arity::TwoPhase => Ok(VelocityLaw::identity(arity)),
            LawConfig::Affine => Err(FbError::Config("law.kind = \"affine\" needs phase = \"two\"".into())),
            LawConfig::Squares => Ok(VelocityLaw::squares(arity)),
            LawConfig::Table { knots } => VelocityLaw::table(arity, knots.iter().map(|k| (k[0], k[1])).collect()),
        }
    }
}

/// Initial interface; default flat at height 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialProfile {
    Flat { value: f64 },
    /// `mean + amp sin(2 pi mode x / period)`.
    Sine { mean: f64, amp: f64, mode: u32 },
    /// Whitespace-separated heights, one per column; relative paths resolve
    /// against the config file's directory.
    Samples { path: PathBuf },
}

impl Default for InitialProfile {
    fn default() -> Self {
        InitialProfile::Flat { value: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSection {
    /// Final time; default 1.
    #[serde(default = "one")]
    pub t_final: f64,
    /// Default 0.4.
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Step cap; default none.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_max: Option<f64>,
    /// Steps between frames; default 1.
    #[serde(default = "default_stride")]
    pub frame_stride: usize,
    /// Probe order 1 or 2; default 2.
    #[serde(default = "default_order")]
    pub order: ProbeOrder,
    /// Bulk residual target; default 1e-10.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Probe step; default `min(dx, dy)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_step: Option<f64>,
}

fn default_cfl() -> f64 {
    DEFAULT_CFL
}

fn default_stride() -> usize {
    1
}

fn default_order() -> ProbeOrder {
    ProbeOrder::Second
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

impl Default for EvolutionSection {
    fn default() -> Self {
        Self {
            t_final: 1.0,
            cfl: DEFAULT_CFL,
            dt_max: None,
            frame_stride: 1,
            order: ProbeOrder::Second,
            tol: DEFAULT_TOL,
            probe_step: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearizeSection {
    /// Base column; default 0.
    #[serde(default)]
    pub base_point: usize,
    /// Finite-difference step; default `1e-4 sup|f|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// Overrides the trial count of every randomized suite.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
}

/// Output file names, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Default `"out"`; `--out` overrides.
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_frames")]
    pub frames: String,
    #[serde(default = "default_summary")]
    pub summary: String,
    #[serde(default = "default_probe")]
    pub probe: String,
    #[serde(default = "default_kernel")]
    pub kernel: String,
    #[serde(default = "default_report")]
    pub report: String,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_frames() -> String {
    "frames.ndjson".into()
}
fn default_summary() -> String {
    "summary.csv".into()
}
fn default_probe() -> String {
    "probe.json".into()
}
fn default_kernel() -> String {
    "kernel.json".into()
}
fn default_report() -> String {
    "verify.json".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            frames: default_frames(),
            summary: default_summary(),
            probe: default_probe(),
            kernel: default_kernel(),
            report: default_report(),
        }
    }
}

impl RunConfig {
    /// Parses and validates TOML text; relative sample paths resolve against `base`.
    pub fn from_toml(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| FbError::Config(e.to_string()))?;
        if let (Some(base), InitialProfile::Samples { path }) = (base, &mut cfg.initial) {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| FbError::Config(e.to_string()))
    }

    pub fn arity(&self) -> Arity {
        match self.phase {
            PhaseCount::One => Arity::OnePhase,
            PhaseCount::Two => Arity::TwoPhase,
        }
    }

    /// Checks every constraint that does not need the samples file contents.
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        match self.phase {
            PhaseCount::One if g.strip_height.is_some() => {
                return Err(FbError::Config("grid.strip_height is only valid with phase = \"two\"".into()))
            }
            PhaseCount::Two if g.height_cap.is_some() => {
                return Err(FbError::Config(
                    "grid.height_cap is only valid with phase = \"one\"; use grid.strip_height".into(),
                ))
            }
            PhaseCount::Two if g.strip_height.is_none() => {
                return Err(FbError::Config("missing key grid.strip_height (two-phase strip height L)".into()))
            }
            _ => {}
        }
        self.grid()?;
        if self.seed > i64::MAX as u64 {
            return Err(FbError::Config(format!("seed {} exceeds the TOML integer range", self.seed)));
        }
        if !(self.delta > 0.0) {
            return Err(FbError::Config(format!("delta must be positive, got {}", self.delta)));
        }
        self.operator.plus.spec()?;
        self.operator.minus.spec()?;
        self.law.build(self.arity())?;
        match &self.initial {
            InitialProfile::Flat { value } if !value.is_finite() => {
                return Err(FbError::Config("initial.value must be finite".into()))
            }
            InitialProfile::Sine { mean, amp, .. } if !(mean.is_finite() && amp.is_finite()) => {
                return Err(FbError::Config("initial.mean and initial.amp must be finite".into()))
            }
            InitialProfile::Samples { path } if !path.is_file() => {
                return Err(FbError::Config(format!("initial.path {} does not exist", path.display())))
            }
            _ => {}
        }
        if self.evolution.probe_step.is_some_and(|h| !(h > 0.0)) {
            return Err(FbError::Config("evolution.probe_step must be positive".into()));
        }
        if !(self.evolution.tol > 0.0) {
            return Err(FbError::Config("evolution.tol must be positive".into()));
        }
        self.evolution_config()?.validate().map_err(|e| FbError::Config(e.to_string()))
    }

    pub fn grid(&self) -> Result<PeriodicGrid> {
        let g = &self.grid;
        let cap = match self.phase {
            PhaseCount::One => g.height_cap.unwrap_or(g.n_y as f64 * g.period / g.n_x.max(1) as f64),
            PhaseCount::Two => g
                .strip_height
                .ok_or_else(|| FbError::Config("missing key grid.strip_height".into()))?,
        };
        PeriodicGrid::new(g.n_x, g.n_y, g.period, cap).map_err(|e| FbError::Config(format!("grid: {e}")))
    }

    pub fn flux_options(&self) -> FluxOptions {
        FluxOptions {
            order: self.evolution.order,
            tol: self.evolution.tol,
            step: self.evolution.probe_step,
        }
    }

    pub fn evolution_config(&self) -> Result<EvolutionConfig> {
        let mut c = EvolutionConfig::new(self.evolution.t_final, self.law.build(self.arity())?);
        c.cfl = self.evolution.cfl;
        c.dt_max = self.evolution.dt_max.unwrap_or(f64::INFINITY);
        c.frame_stride = self.evolution.frame_stride;
        c.flux = self.flux_options();
        c.spec_plus = self.operator.plus.spec()?;
        c.spec_minus = self.operator.minus.spec()?;
        Ok(c)
    }

    /// Samples the initial profile on the grid.
    pub fn initial_interface(&self) -> Result<GraphInterface> {
        let grid = self.grid()?;
        let values: Vec<f64> = match &self.initial {
            InitialProfile::Flat { value } => vec![*value; grid.n_x()],
            InitialProfile::Sine { mean, amp, mode } => {
                let w = 2.0 * std::f64::consts::PI * *mode as f64 / grid.period();
                grid.xs().iter().map(|x| mean + amp * (w * x).sin()).collect()
            }
            InitialProfile::Samples { path } => {
                let text = std::fs::read_to_string(path)?;
                let v: std::result::Result<Vec<f64>, _> = text.split_whitespace().map(str::parse).collect();
                let v = v.map_err(|e| FbError::Config(format!("{}: {e}", path.display())))?;
                if v.len() != grid.n_x() {
                    return Err(FbError::Config(format!(
                        "{} holds {} samples, grid.n_x is {}",
                        path.display(),
                        v.len(),
                        grid.n_x()
                    )));
                }
                v
            }
        };
        match self.phase {
            PhaseCount::One => GraphInterface::one_phase(grid, values, self.delta),
            PhaseCount::Two => GraphInterface::two_phase(grid, values, self.delta),
        }
    }
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| FbError::Config(format!("{}: {e}", path.display())))?;
    RunConfig::from_toml(&text, path.parent())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_toml("[initial]\nkind = \"flat\"\nvalue = 1.0\n", None).unwrap();
        assert_eq!(c.evolution.cfl, 0.4);
        assert_eq!(c.evolution.tol, 1e-10);
        assert_eq!(c.evolution.order, ProbeOrder::Second);
        assert_eq!(c.phase, PhaseCount::One);
        let g = c.grid().unwrap();
        assert!((g.dx() - g.dy()).abs() < 1e-15);
    }

    #[test]
    fn two_phase_needs_strip_height() {
        let e = RunConfig::from_toml("phase = \"two\"\n", None).unwrap_err();
        assert!(e.to_string().contains("grid.strip_height"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = RunConfig::from_toml("[evolution]\ncfll = 0.3\n", None).unwrap_err();
        assert!(e.to_string().contains("cfll"), "{e}");
        let e = RunConfig::from_toml("[initial]\nkind = \"flat\"\nvalue = 1.0\nmode = 2\n", None).unwrap_err();
        assert!(e.to_string().contains("mode"), "{e}");
    }

    #[test]
    fn affine_is_two_phase_only() {
        assert!(RunConfig::from_toml("[law]\nkind = \"affine\"\n", None).is_err());
        let c = RunConfig::from_toml(
            "phase = \"two\"\n[grid]\nstrip_height = 3.0\n[law]\nkind = \"affine\"\n[initial]\nkind = \"flat\"\nvalue = 1.5\n",
            None,
        )
        .unwrap();
        assert_eq!(c.law.build(c.arity()).unwrap().eval(2.0, Some(0.5)), 1.5);
    }
}
