//! Experiment configuration: TOML (or JSON, by extension) with unknown keys
//! rejected.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::carleman::{CarlemanParams, InequalityQuadrature, DEFAULT_DELTA};
use crate::certifiers::{
    DecayOptions, FrequencyBoundOptions, GaussianBoundsOptions, ImpliedDoublingOptions, MuckenhouptOptions,
    SpaceTimeOptions, ThreeSphereOptions,
};
use crate::error::{ErrorKind, Result};
use crate::io::load_field;
use crate::numerics::{CoefficientField, CoefficientModel, QuadratureRule, SpaceTimeField, SpaceTimeGrid, MAX_DIM};
use crate::oracles::find;
use crate::solver::{solve, Direction, DirichletModes, LowerOrder, SolveSpec};

fn config_error(msg: impl Into<String>) -> crate::Error {
    ErrorKind::Config(msg.into()).at("cli", "config")
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub field: Option<FieldConfig>,
    pub quadrature: QuadratureRule,
    pub trace: TraceConfig,
    pub certify: CertifyConfig,
    pub carleman: CarlemanConfig,
    pub output: OutputConfig,
}

/// Exactly one of `oracle`, `file` or `solver`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    pub oracle: Option<String>,
    pub file: Option<PathBuf>,
    pub solver: Option<SolverConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub half_width: f64,
    pub spacing: f64,
    pub horizon: f64,
    pub time_step: f64,
}

impl GridConfig {
    pub fn build(&self) -> Result<SpaceTimeGrid> {
        SpaceTimeGrid::new(self.dim, self.half_width, self.spacing, self.horizon, self.time_step)
    }
}

/// Initial or terminal data of a solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum DataConfig {
    /// An oracle evaluated at the data time.
    Oracle(String),
    /// Amplitudes of the Dirichlet modes of the box.
    Modes(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub grid: GridConfig,
    pub direction: Direction,
    #[serde(default = "identity_model")]
    pub coefficients: CoefficientModel,
    #[serde(default = "one")]
    pub ellipticity: f64,
    #[serde(default)]
    pub lipschitz: f64,
    #[serde(default)]
    pub lower_order: LowerOrder,
    #[serde(default)]
    pub bound: f64,
    pub data: DataConfig,
}

fn identity_model() -> CoefficientModel {
    CoefficientModel::Identity
}

fn one() -> f64 {
    1.0
}

impl SolverConfig {
    pub fn spec(&self) -> Result<SolveSpec> {
        let grid = self.grid.build()?;
        let coefficients = match self.coefficients {
            CoefficientModel::Identity => CoefficientField::identity(grid),
            model => CoefficientField::new(grid, model, self.ellipticity, self.lipschitz)?,
        };
        let data: Arc<dyn SpaceTimeField> = match &self.data {
            DataConfig::Oracle(name) => find(name)?,
            DataConfig::Modes(a) => Arc::new(DirichletModes::new(grid.dim(), grid.half_width(), a.clone())?),
        };
        if data.dim() != grid.dim() {
            return Err(config_error(format!("data has dimension {}, grid {}", data.dim(), grid.dim())));
        }
        Ok(SolveSpec::from_field(coefficients, self.direction, self.lower_order, self.bound, &*data))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    pub offset: f64,
    pub center: Vec<f64>,
    pub times: Vec<f64>,
    /// Trace `uψ` instead of `u`.
    pub cutoff: bool,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self { offset: 1.0, center: Vec::new(), times: (0..=10).map(|i| i as f64 / 10.0).collect(), cutoff: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardyConfig {
    pub t: f64,
    pub a: Vec<f64>,
}

impl Default for HardyConfig {
    fn default() -> Self {
        Self { t: 0.0, a: vec![0.25, 1.0, 4.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImpliedConfig {
    pub radii: Vec<f64>,
    pub a_levels: u32,
    /// `N` and `Θ` of the hypothesis; taken from `frequency_bound_at_zero`
    /// when absent.
    pub n: Option<f64>,
    pub theta: Option<f64>,
}

impl Default for ImpliedConfig {
    fn default() -> Self {
        let d = ImpliedDoublingOptions::default();
        Self { radii: d.radii, a_levels: d.a_levels, n: None, theta: None }
    }
}

impl ImpliedConfig {
    pub fn options(&self) -> ImpliedDoublingOptions {
        ImpliedDoublingOptions { radii: self.radii.clone(), a_levels: self.a_levels }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadiiConfig {
    pub radii: Vec<f64>,
    /// Doubling constant handed over; computed when absent.
    pub doubling: Option<f64>,
}

impl Default for RadiiConfig {
    fn default() -> Self {
        Self { radii: crate::certifiers::dyadic(4), doubling: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpaceTimeConfig {
    pub radii: Vec<f64>,
    pub scale_radii: Vec<f64>,
    pub expect_scale_invariance: bool,
    pub doubling: Option<f64>,
}

impl Default for SpaceTimeConfig {
    fn default() -> Self {
        let d = SpaceTimeOptions::default();
        Self { radii: d.radii, scale_radii: d.scale_radii, expect_scale_invariance: d.expect_scale_invariance, doubling: None }
    }
}

impl SpaceTimeConfig {
    pub fn options(&self) -> SpaceTimeOptions {
        SpaceTimeOptions {
            radii: self.radii.clone(),
            scale_radii: self.scale_radii.clone(),
            expect_scale_invariance: self.expect_scale_invariance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussianConfig {
    pub grid: Option<GridConfig>,
    pub coefficients: CoefficientModel,
    pub ellipticity: f64,
    pub lipschitz: f64,
    pub lower_order: LowerOrder,
    /// Source point; the origin when empty.
    pub source: Vec<f64>,
    pub source_time: f64,
    pub times: Vec<f64>,
    pub noise: f64,
}

impl Default for GaussianConfig {
    fn default() -> Self {
        let d = GaussianBoundsOptions::default();
        Self {
            grid: None,
            coefficients: CoefficientModel::Identity,
            ellipticity: 1.0,
            lipschitz: 0.0,
            lower_order: LowerOrder::default(),
            source: Vec::new(),
            source_time: 0.0,
            times: d.times,
            noise: d.noise,
        }
    }
}

impl GaussianConfig {
    pub fn options(&self) -> GaussianBoundsOptions {
        GaussianBoundsOptions { times: self.times.clone(), noise: self.noise }
    }

    /// The configured coefficients on the configured grid, by default
    /// `n = 1`, `L = 6`, `h = 0.05`, `T = 1`, `Δt = 0.0025`.
    pub fn coefficients(&self) -> Result<CoefficientField> {
        let grid = match self.grid {
            Some(g) => g.build()?,
            None => SpaceTimeGrid::new(1, 6.0, 0.05, 1.0, 0.0025)?,
        };
        match self.coefficients {
            CoefficientModel::Identity => Ok(CoefficientField::identity(grid)),
            model => CoefficientField::new(grid, model, self.ellipticity, self.lipschitz),
        }
    }

    pub fn source_point(&self, dim: usize) -> Vec<f64> {
        if self.source.is_empty() {
            vec![0.0; dim]
        } else {
            self.source.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyConfig {
    pub hardy: HardyConfig,
    pub implied_doubling: ImpliedConfig,
    pub doubling: RadiiConfig,
    pub two_sphere: RadiiConfig,
    pub space_time: SpaceTimeConfig,
    pub decay: DecayOptions,
    pub frequency_bound: FrequencyBoundOptions,
    pub muckenhoupt: MuckenhouptOptions,
    pub three_sphere: ThreeSphereOptions,
    pub gaussian_bounds: GaussianConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CarlemanConfig {
    pub alpha: Vec<f64>,
    pub delta: f64,
    /// Gaussian offset; `1/(2α)` when absent.
    pub a: Option<f64>,
    /// `γ` values tabulated by `carleman weights`; `α/δ²` when absent.
    pub gamma: Option<Vec<f64>>,
    pub points: usize,
    pub tol: f64,
    pub ode_points: usize,
    pub quadrature: InequalityQuadrature,
    /// Also evaluate on the refined rule and report the change in `N*`.
    pub refine: bool,
    pub coefficients: CoefficientModel,
}

impl Default for CarlemanConfig {
    fn default() -> Self {
        Self {
            alpha: vec![4.0, 8.0],
            delta: DEFAULT_DELTA,
            a: None,
            gamma: None,
            points: 256,
            tol: 1e-12,
            ode_points: 24,
            quadrature: InequalityQuadrature::default(),
            refine: true,
            coefficients: CoefficientModel::Identity,
        }
    }
}

impl CarlemanConfig {
    pub fn params(&self, alpha: f64) -> Result<CarlemanParams> {
        CarlemanParams::new(alpha, self.delta, self.a.unwrap_or(0.5 / alpha))
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.gamma.clone().unwrap_or_else(|| self.alpha.iter().map(|a| a / (self.delta * self.delta)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

/// SHA-256 of a configuration's canonical text, in hex.
pub fn config_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl ExperimentConfig {
    /// Parses TOML, or JSON when `json` is set.
    pub fn parse(text: &str, json: bool) -> Result<Self> {
        let config: Self = if json {
            serde_json::from_str(text).map_err(|e| config_error(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| config_error(e.to_string()))?
        };
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ErrorKind::Io(format!("{}: {e}", path.display())).at("cli", "config"))?;
        let json = path.extension().is_some_and(|e| e == "json");
        let mut config = Self::parse(&text, json)?;
        // field files are relative to the config
        if let Some(FieldConfig { file: Some(f), .. }) = &mut config.field {
            if f.is_relative() {
                if let Some(dir) = path.parent() {
                    *f = dir.join(&*f);
                }
            }
        }
        config.validate()?;
        Ok(config)
    }

    /// Checks what can be checked without running anything.
    pub fn validate(&self) -> Result<()> {
        if let Some(field) = &self.field {
            let set = field.oracle.is_some() as u8 + field.file.is_some() as u8 + field.solver.is_some() as u8;
            if set != 1 {
                return Err(config_error("[field] needs exactly one of oracle, file, solver"));
            }
            if let Some(name) = &field.oracle {
                find(name)?;
            }
            if let Some(path) = &field.file {
                if !path.exists() {
                    return Err(config_error(format!("field file {} does not exist", path.display())));
                }
            }
            if let Some(s) = &field.solver {
                s.grid.build()?;
            }
        }
        let c = &self.certify;
        for (what, radii) in [
            ("doubling", &c.doubling.radii),
            ("two_sphere", &c.two_sphere.radii),
            ("implied_doubling", &c.implied_doubling.radii),
            ("space_time", &c.space_time.radii),
            ("frequency_bound", &c.frequency_bound.radii),
        ] {
            if let Some(r) = radii.iter().find(|&&r| !(r > 0.0 && r <= 0.5)) {
                return Err(config_error(format!("[certify.{what}] radius {r} outside (0, 1/2]")));
            }
        }
        if let Some(a) = c.hardy.a.iter().find(|&&a| !(a > 0.0)) {
            return Err(config_error(format!("[certify.hardy] a = {a} must be positive")));
        }
        if !(self.trace.offset > 0.0) || self.trace.center.len() > MAX_DIM {
            return Err(config_error("[trace] needs a positive offset and at most three center coordinates"));
        }
        for &alpha in &self.carleman.alpha {
            self.carleman.params(alpha)?;
        }
        if self.carleman.points < 2 || self.carleman.ode_points < 2 {
            return Err(config_error("[carleman] needs at least two points"));
        }
        Ok(())
    }

    /// Builds the configured field, solving if required.
    pub fn field(&self) -> Result<Arc<dyn SpaceTimeField>> {
        let field = self.field.as_ref().ok_or_else(|| config_error("no [field] section"))?;
        if let Some(name) = &field.oracle {
            return Ok(find(name)?);
        }
        if let Some(path) = &field.file {
            return Ok(Arc::new(load_field(path)?));
        }
        let solver = field.solver.as_ref().ok_or_else(|| config_error("empty [field] section"))?;
        Ok(Arc::new(solve(&solver.spec()?)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SOLVER: &str = r#"
name = "pinned"
[field.solver]
direction = "backward"
ellipticity = 0.8
lipschitz = 0.1
bound = 0.1
data = { modes = [1.0, -0.5] }
lower_order = { drift = [0.05, 0.0, 0.0], potential = 0.05 }
coefficients = { kind = "perturbed", epsilon = 0.1, wavenumber = 0.5, frequency = 0.5 }
grid = { dim = 1, half_width = 6.0, spacing = 0.5, horizon = 1.0, time_step = 0.1 }

[certify.doubling]
radii = [0.5, 0.25]
"#;

    #[test]
    fn parses_solver_config() {
        let c = ExperimentConfig::parse(SOLVER, false).unwrap();
        c.validate().unwrap();
        let s = c.field.as_ref().unwrap().solver.as_ref().unwrap();
        assert_eq!(s.data, DataConfig::Modes(vec![1.0, -0.5]));
        assert_eq!(c.certify.doubling.radii, vec![0.5, 0.25]);
        assert_eq!(c.certify.two_sphere.radii.len(), 4);
        assert_eq!(s.spec().unwrap().data.len(), 25);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(ExperimentConfig::parse("nmae = \"x\"", false).is_err());
        assert!(ExperimentConfig::parse("[certify.hardy]\nb = [1.0]", false).is_err());
        assert!(ExperimentConfig::parse("[certify.implied_doubling]\nradius = [0.5]", false).is_err());
        assert!(ExperimentConfig::parse(r#"{"name": "x", "extra": 1}"#, true).is_err());
    }

    #[test]
    fn rejects_large_radii_and_double_sources() {
        let c = ExperimentConfig::parse("[certify.doubling]\nradii = [0.75]", false).unwrap();
        assert!(c.validate().is_err());
        let c = ExperimentConfig::parse("[field]\noracle = \"x1\"\nfile = \"u.bin\"", false).unwrap();
        assert!(c.validate().is_err());
        let c = ExperimentConfig::parse("[field]\noracle = \"nope\"", false).unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn json_and_toml_agree() {
        let t = ExperimentConfig::parse("name = \"a\"\n[field]\noracle = \"x1\"\n[carleman]\nalpha = [4.0]", false).unwrap();
        let j = ExperimentConfig::parse(r#"{"name": "a", "field": {"oracle": "x1"}, "carleman": {"alpha": [4.0]}}"#, true)
            .unwrap();
        assert_eq!(t, j);
        assert_eq!(t.carleman.gammas(), vec![16.0]);
    }

    #[test]
    fn hash_is_sha256_hex() {
        assert_eq!(config_hash(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
