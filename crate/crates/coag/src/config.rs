//! Run configuration: one TOML file with nested sections.

use std::path::{Path, PathBuf};

use coag_core::integrator::{DtMode, DtPolicy, Schedule};
use coag_core::kernels::Kernel;
use coag_core::operators::Model;
use coag_core::sizedomain::InitialProfile;
use coag_core::testfn::TestFunction;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
    #[error("{field}: {message}")]
    Invalid { field: &'static str, message: String },
    #[error(transparent)]
    Core(#[from] coag_core::Error),
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Sce,
    Ohs,
    Generalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Constant,
    SingularProduct,
    Additive,
    #[serde(alias = "tabulated")]
    UserTabulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub family: FamilyKind,
    /// Overrides the family's growth constant.
    pub k: Option<f64>,
    pub sigma: Option<f64>,
    pub eta: Option<f64>,
    /// CSV with header `mu,nu,lambda`, relative to the config file.
    pub table: Option<PathBuf>,
    #[serde(default)]
    pub allow_large_sigma: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: f64,
    pub cells_per_decade: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_end: f64,
    #[serde(default = "default_mode")]
    pub dt_mode: DtMode,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_safety")]
    pub safety: f64,
    #[serde(default = "default_shrink")]
    pub max_shrink: u32,
    /// Explicit snapshot times; when empty, `snapshot_count` uniform times.
    #[serde(default)]
    pub snapshots: Vec<f64>,
    #[serde(default = "default_count")]
    pub snapshot_count: usize,
}

fn default_mode() -> DtMode {
    DtPolicy::default().mode
}
fn default_dt() -> f64 {
    DtPolicy::default().dt
}
fn default_tol() -> f64 {
    DtPolicy::default().tol
}
fn default_safety() -> f64 {
    DtPolicy::default().safety
}
fn default_shrink() -> u32 {
    DtPolicy::default().max_shrink
}
fn default_count() -> usize {
    10
}
fn default_true() -> bool {
    true
}

impl TimeSpec {
    pub fn policy(&self) -> DtPolicy {
        DtPolicy {
            mode: self.dt_mode,
            dt: self.dt,
            safety: self.safety,
            max_shrink: self.max_shrink,
            tol: self.tol,
        }
    }

    pub fn schedule(&self) -> Schedule {
        if self.snapshots.is_empty() {
            Schedule::uniform(self.t_end, self.snapshot_count.max(1))
        } else {
            Schedule::at(&self.snapshots)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSpec {
    #[serde(default)]
    pub omegas: Vec<TestFunction>,
    /// Cuts for the mass-flux identity; empty means `n/8, n/4, n/2, n`.
    #[serde(default)]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_true")]
    pub gauges: bool,
    #[serde(default = "default_true")]
    pub equicontinuity: bool,
    /// Test hook: scales one snapshot after the run so that a bound check fails.
    #[serde(default)]
    pub inject_corruption: bool,
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        Self {
            omegas: Vec::new(),
            lambdas: Vec::new(),
            gauges: true,
            equicontinuity: true,
            inject_corruption: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub directory: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            directory: None,
            formats: default_formats(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Empty means `2⁰ … 2⁻¹⁰`.
    #[serde(default)]
    pub eps: Vec<f64>,
    /// Truncation parameters; empty means the grid's `n` only.
    #[serde(default)]
    pub n: Vec<f64>,
    #[serde(default = "default_true")]
    pub eps_sweep: bool,
    #[serde(default)]
    pub n_sweep: bool,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_workers() -> usize {
    4
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            eps: Vec::new(),
            n: Vec::new(),
            eps_sweep: true,
            n_sweep: false,
            workers: default_workers(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySpec {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
}

fn default_samples() -> usize {
    10_000
}
fn default_fd_step() -> f64 {
    1e-3
}

impl Default for CertifySpec {
    fn default() -> Self {
        Self {
            samples: default_samples(),
            fd_step: default_fd_step(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    /// Required iff `model = "generalized"`.
    pub eps: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    pub kernel: KernelSpec,
    pub grid: GridSpec,
    pub initial: InitialProfile,
    pub time: TimeSpec,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub certify: CertifySpec,
    /// Directory of the config file, used to resolve relative paths.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            source: Box::new(e),
        })?;
        cfg.base_dir = origin
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file, returning it with its raw text.
    pub fn load(path: &Path) -> Result<(Self, String), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Ok((Self::from_toml(&text, path)?, text))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match (self.model, self.eps) {
            (ModelKind::Generalized, None) => {
                return Err(invalid("eps", "required when model = \"generalized\""))
            }
            (ModelKind::Generalized, Some(e)) if !(e > 0.0 && e <= 1.0) => {
                return Err(invalid("eps", format!("must lie in (0, 1], got {e}")))
            }
            (ModelKind::Sce | ModelKind::Ohs, Some(_)) => {
                return Err(invalid("eps", "only allowed when model = \"generalized\""))
            }
            _ => {}
        }
        if !(self.grid.n > 1.0 && self.grid.n.is_finite()) {
            return Err(invalid("grid.n", format!("must exceed 1, got {}", self.grid.n)));
        }
        if self.grid.cells_per_decade == 0 {
            return Err(invalid("grid.cells_per_decade", "must be at least 1"));
        }
        if !(self.time.t_end >= 0.0 && self.time.t_end.is_finite()) {
            return Err(invalid("time.t_end", format!("must be ≥ 0, got {}", self.time.t_end)));
        }
        if self
            .time
            .snapshots
            .iter()
            .any(|t| !(*t >= 0.0 && *t <= self.time.t_end))
        {
            return Err(invalid("time.snapshots", "times must lie in [0, t_end]"));
        }
        self.time.policy().validate()?;
        if let Some(e) = self.sweep.eps.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
            return Err(invalid("sweep.eps", format!("values must lie in (0, 1], got {e}")));
        }
        if let Some(n) = self.sweep.n.iter().find(|n| !(**n > 1.0)) {
            return Err(invalid("sweep.n", format!("values must exceed 1, got {n}")));
        }
        if self.sweep.workers == 0 {
            return Err(invalid("sweep.workers", "must be at least 1"));
        }
        if self.kernel.family == FamilyKind::UserTabulated && self.kernel.table.is_none() {
            return Err(invalid("kernel.table", "required for family = \"user_tabulated\""));
        }
        if self.kernel.family != FamilyKind::UserTabulated && self.kernel.table.is_some() {
            return Err(invalid("kernel.table", "only allowed for family = \"user_tabulated\""));
        }
        Ok(())
    }

    pub fn model(&self) -> Model {
        match self.model {
            ModelKind::Sce => Model::Sce,
            ModelKind::Ohs => Model::Ohs,
            ModelKind::Generalized => Model::Generalized {
                eps: self.eps.unwrap_or(1.0),
            },
        }
    }

    /// Builds the kernel, loading a table if needed, and checks `σ` and the
    /// initial data against it.
    pub fn kernel(&self) -> Result<Kernel, ConfigError> {
        let spec = &self.kernel;
        let base = match spec.family {
            FamilyKind::Constant => Kernel::constant(),
            FamilyKind::Additive => Kernel::additive(),
            FamilyKind::SingularProduct => {
                let sigma = spec
                    .sigma
                    .ok_or_else(|| invalid("kernel.sigma", "required for singular_product"))?;
                Kernel::singular_product(sigma)
            }
            FamilyKind::UserTabulated => {
                let rel = spec.table.as_ref().expect("validated");
                let path = self.base_dir.join(rel);
                let table = io::read_kernel_table(&path).map_err(|e| {
                    invalid("kernel.table", format!("{}: {e:#}", path.display()))
                })?;
                let k = spec
                    .k
                    .ok_or_else(|| invalid("kernel.k", "required for tabulated kernels"))?;
                Kernel::tabulated(table, k, spec.sigma.unwrap_or(0.0), spec.eta.unwrap_or(0.0))?
            }
        };
        let kernel = base.clone().with_constants(
            spec.k.unwrap_or(base.k),
            spec.sigma.unwrap_or(base.sigma),
            spec.eta.unwrap_or(base.eta),
        )?;
        kernel.check_sigma(spec.allow_large_sigma)?;
        self.initial.validate(kernel.sigma)?;
        Ok(kernel)
    }

    pub fn lambdas(&self) -> Vec<f64> {
        if self.diagnostics.lambdas.is_empty() {
            let n = self.grid.n;
            vec![n / 8.0, n / 4.0, n / 2.0, n]
        } else {
            self.diagnostics.lambdas.clone()
        }
    }

    pub fn eps_list(&self) -> Vec<f64> {
        if self.sweep.eps.is_empty() {
            (0..=10).map(|k| 0.5f64.powi(k)).collect()
        } else {
            self.sweep.eps.clone()
        }
    }

    pub fn n_list(&self) -> Vec<f64> {
        if self.sweep.n.is_empty() {
            vec![self.grid.n]
        } else {
            self.sweep.n.clone()
        }
    }

    pub fn output_dir(&self, cli_override: Option<&Path>) -> PathBuf {
        cli_override
            .map(Path::to_path_buf)
            .or_else(|| self.output.directory.as_ref().map(|d| self.base_dir.join(d)))
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn wants(&self, format: Format) -> bool {
        self.output.formats.contains(&format)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
model = "sce"
[kernel]
family = "constant"
[grid]
n = 100.0
cells_per_decade = 8
[initial]
profile = "exponential"
[time]
t_end = 1.0
"#;

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::from_toml(text, Path::new("run.toml"))
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse(MINIMAL).unwrap();
        assert_eq!(cfg.model(), Model::Sce);
        assert_eq!(cfg.time.policy(), DtPolicy::default());
        assert_eq!(cfg.lambdas(), vec![12.5, 25.0, 50.0, 100.0]);
        assert_eq!(cfg.eps_list().len(), 11);
        assert_eq!(cfg.eps_list()[10], 1.0 / 1024.0);
        assert!(cfg.wants(Format::Csv) && cfg.wants(Format::Json));
        assert_eq!(cfg.time.schedule().times.len(), 10);
    }

    #[test]
    fn eps_is_tied_to_the_model() {
        let gen = MINIMAL.replace("model = \"sce\"", "model = \"generalized\"");
        let err = parse(&gen).unwrap_err().to_string();
        assert!(err.contains("eps"), "{err}");
        let ok = gen.replace("model = \"generalized\"", "model = \"generalized\"\neps = 0.25");
        assert_eq!(parse(&ok).unwrap().model(), Model::Generalized { eps: 0.25 });
        let stray = MINIMAL.replace("model = \"sce\"", "model = \"sce\"\neps = 0.5");
        assert!(parse(&stray).is_err());
    }

    #[test]
    fn parse_errors_name_line_and_field() {
        let bad = MINIMAL.replace("cells_per_decade = 8", "cells_per_decade = \"eight\"");
        let err = parse(&bad).unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
        assert!(err.contains("cells_per_decade"), "{err}");
        let unknown = MINIMAL.replace("[time]", "[time]\nbogus = 1");
        assert!(parse(&unknown).unwrap_err().to_string().contains("bogus"));
    }

    #[test]
    fn initial_data_outside_the_space_is_rejected() {
        let text = MINIMAL
            .replace("family = \"constant\"", "family = \"singular_product\"\nsigma = 0.3")
            .replace("profile = \"exponential\"", "profile = \"singular_power\"\na = 0.5");
        let cfg = parse(&text).unwrap();
        let err = cfg.kernel().unwrap_err().to_string();
        assert!(err.contains("initial data not in 𝒴"), "{err}");
    }

    #[test]
    fn kernel_overrides_apply() {
        let text = MINIMAL.replace("family = \"constant\"", "family = \"constant\"\nk = 3.0\neta = 0.1");
        let k = parse(&text).unwrap().kernel().unwrap();
        assert_eq!((k.k, k.sigma, k.eta), (3.0, 0.0, 0.1));
        let large = MINIMAL.replace("family = \"constant\"", "family = \"singular_product\"\nsigma = 0.6");
        assert!(parse(&large).unwrap().kernel().is_err());
        let allowed = large.replace("sigma = 0.6", "sigma = 0.6\nallow_large_sigma = true");
        assert!(parse(&allowed).unwrap().kernel().is_ok());
    }

    #[test]
    fn omegas_parse_as_tagged_tables() {
        let text = format!(
            "{MINIMAL}\n[diagnostics]\nomegas = [{{ kind = \"bump\", center = 2.0, half_width = 1.0 }}, {{ kind = \"linear\" }}]\n"
        );
        let cfg = parse(&text).unwrap();
        assert_eq!(
            cfg.diagnostics.omegas,
            vec![
                TestFunction::Bump {
                    center: 2.0,
                    half_width: 1.0
                },
                TestFunction::Linear
            ]
        );
    }
}
