//! The four CLI commands. Each returns whether its checks passed; hard
//! errors propagate.

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use coag_core::diagnostics::DiagnosticsReport;
use coag_core::kernels::{certify_derivative, certify_growth, CertReport, Kernel};
use coag_core::operators::Model;
use coag_core::sizedomain::InitialProfile;
use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::experiments::{
    self, diagnose, mass_conservation_report, run_eps_sweep, run_n_sweep, validate_m0_riccati,
    validate_sce_constant_kernel, Check, MassReport, RunSpec, StepLog, SweepConfig,
};
use crate::io;

/// Flags shared by all commands.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Passed,
    BoundFailure,
}

impl Outcome {
    fn from(passed: bool) -> Self {
        if passed {
            Outcome::Passed
        } else {
            Outcome::BoundFailure
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Passed => 0,
            Outcome::BoundFailure => 2,
        }
    }
}

/// Machine-readable result of `sweep`, `check-kernel` and `validate`.
#[derive(Debug, Clone, Serialize)]
pub struct Summary<T: Serialize> {
    pub command: &'static str,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub details: T,
}

#[derive(Debug, Clone, Serialize)]
struct KernelInfo {
    family: &'static str,
    k: f64,
    sigma: f64,
    eta: f64,
}

impl From<&Kernel> for KernelInfo {
    fn from(k: &Kernel) -> Self {
        Self {
            family: k.family_name(),
            k: k.k,
            sigma: k.sigma,
            eta: k.eta,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct GridInfo {
    n: f64,
    cells_per_decade: usize,
    cells: usize,
}

/// Contents of `report.json` written by `simulate`.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationReport {
    model: &'static str,
    eps: Option<f64>,
    kernel: KernelInfo,
    grid: GridInfo,
    t_end: f64,
    steps: StepLog,
    outflux: f64,
    clipped: f64,
    ledger_closure: f64,
    passed: bool,
    diagnostics: DiagnosticsReport,
}

struct Prepared {
    cfg: RunConfig,
    out: PathBuf,
}

fn prepare(opts: &Options) -> Result<Prepared> {
    let (mut cfg, text) = RunConfig::load(&opts.config)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(t) = opts.threads {
        anyhow::ensure!(t > 0, "--threads must be at least 1");
        cfg.sweep.workers = t;
    }
    let out = cfg.output_dir(opts.out.as_deref());
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("config.toml"), &text).context("copying config")?;
    Ok(Prepared { cfg, out })
}

fn write_summary<T: Serialize>(p: &Prepared, summary: &Summary<T>) -> Result<()> {
    if p.cfg.wants(Format::Json) {
        io::write_json(&p.out.join("summary.json"), summary)?;
    }
    Ok(())
}

pub fn simulate(opts: &Options) -> Result<Outcome> {
    let p = prepare(opts)?;
    let cfg = &p.cfg;
    let spec = RunSpec::from_config(cfg)?;
    let mut run = experiments::run(&spec)?;
    if cfg.diagnostics.inject_corruption {
        experiments::corrupt(&mut run.trajectory);
    }
    let diagnostics = diagnose(&run, &cfg.diagnostics, &cfg.lambdas())?;
    let passed = diagnostics.all_passed();

    if cfg.wants(Format::Csv) {
        let dir = p.out.join("snapshots");
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        for (k, s) in run.trajectory.snapshots.iter().enumerate() {
            io::write_snapshot_csv(&dir.join(format!("snapshot_{k:04}.csv")), s)?;
        }
        io::write_moments_csv(&p.out.join("moments.csv"), &diagnostics.moments)?;
    }
    if cfg.wants(Format::Json) {
        let grid = run.grid();
        let report = SimulationReport {
            model: spec.model.name(),
            eps: spec.model.eps(),
            kernel: (&spec.kernel).into(),
            grid: GridInfo {
                n: grid.n(),
                cells_per_decade: grid.cells_per_decade(),
                cells: grid.len(),
            },
            t_end: spec.t_end,
            steps: run.log,
            outflux: run.trajectory.outflux_ledger.last().copied().unwrap_or(0.0),
            clipped: run.total_clipped(),
            ledger_closure: run.ledger_closure(),
            passed,
            diagnostics,
        };
        io::write_json(&p.out.join("report.json"), &report)?;
    }
    Ok(Outcome::from(passed))
}

#[derive(Debug, Clone, Serialize)]
struct SweepDetails {
    eps_sweep: Option<experiments::EpsSweepReport>,
    n_sweep_rows: usize,
}

pub fn sweep(opts: &Options) -> Result<Outcome> {
    let p = prepare(opts)?;
    let cfg = &p.cfg;
    let sc = SweepConfig::from_config(cfg)?;
    let mut checks = Vec::new();
    let mut details = SweepDetails {
        eps_sweep: None,
        n_sweep_rows: 0,
    };
    if cfg.sweep.eps_sweep {
        let rep = run_eps_sweep(&sc)?;
        if cfg.wants(Format::Csv) {
            io::write_distance_csv(&p.out.join("distance_eps.csv"), &rep.table)?;
        }
        for c in &rep.checks {
            let mut check = Check::at_most(format!("eps_monotone_n{}", c.n), c.worst_increase, c.floor);
            check.passed = c.monotone;
            checks.push(check);
            if let Some(d) = c.sce_identity {
                checks.push(Check::at_most(format!("eps1_vs_sce_n{}", c.n), d, 1e-10));
            }
        }
        checks.push(Check::at_most("failed_members", rep.failures.len() as f64, 0.0));
        details.eps_sweep = Some(rep);
    }
    if cfg.sweep.n_sweep {
        let table = run_n_sweep(&sc)?;
        let failed = table.rows.iter().filter(|r| r.distance.is_none()).count();
        checks.push(Check::at_most("n_sweep_failed_rows", failed as f64, 0.0));
        details.n_sweep_rows = table.rows.len();
        if cfg.wants(Format::Csv) {
            io::write_distance_csv(&p.out.join("distance_n.csv"), &table)?;
        }
    }
    let passed = checks.iter().all(|c| c.passed);
    write_summary(
        &p,
        &Summary {
            command: "sweep",
            passed,
            checks,
            details,
        },
    )?;
    Ok(Outcome::from(passed))
}

#[derive(Debug, Clone, Serialize)]
struct CertDetails {
    growth: CertReport,
    derivative: CertReport,
}

pub fn check_kernel(opts: &Options) -> Result<Outcome> {
    let p = prepare(opts)?;
    let cfg = &p.cfg;
    let kernel = cfg.kernel()?;
    let growth = certify_growth(&kernel, cfg.certify.samples, cfg.seed)?;
    let derivative = certify_derivative(&kernel, cfg.certify.samples, cfg.certify.fd_step, cfg.seed)?;
    let checks = vec![
        Check::at_most("growth_violations", growth.violations as f64, 0.0),
        Check::at_most("derivative_violations", derivative.violations as f64, 0.0),
    ];
    let passed = growth.passed && derivative.passed;
    write_summary(
        &p,
        &Summary {
            command: "check-kernel",
            passed,
            checks,
            details: CertDetails { growth, derivative },
        },
    )?;
    Ok(Outcome::from(passed))
}

#[derive(Debug, Clone, Serialize)]
struct ValidateDetails {
    sce: experiments::SceValidation,
    riccati: Vec<experiments::RiccatiValidation>,
    mass: MassReport,
}

/// Models checked against the Riccati law.
pub fn riccati_models() -> [Model; 5] {
    [
        Model::Sce,
        Model::Ohs,
        Model::Generalized { eps: 1.0 },
        Model::Generalized { eps: 0.25 },
        Model::Generalized { eps: 0.01 },
    ]
}

/// The analytic checks use `Λ ≡ 1` with exponential data on the configured
/// grid and time policy; the mass report uses the configuration as given.
pub fn validate(opts: &Options) -> Result<Outcome> {
    let p = prepare(opts)?;
    let cfg = &p.cfg;
    let spec = RunSpec::from_config(cfg)?;
    let analytic = RunSpec {
        kernel: Kernel::constant(),
        profile: InitialProfile::Exponential,
        ..spec.clone()
    };
    let sce = validate_sce_constant_kernel(&analytic)?;
    let mut checks: Vec<Check> = sce
        .checks
        .iter()
        .map(|c| Check {
            name: format!("sce_{}", c.name),
            ..c.clone()
        })
        .collect();
    let mut riccati = Vec::new();
    for m in riccati_models() {
        let r = validate_m0_riccati(&analytic, m)?;
        checks.push(Check::at_most(
            format!("riccati_{}_eps{}", r.model, r.eps),
            r.worst,
            experiments::RICCATI_TOL,
        ));
        riccati.push(r);
    }
    let half = spec.n / 2.0;
    let mut lambdas = cfg.lambdas();
    if !lambdas.contains(&half) {
        lambdas.push(half);
    }
    let mass = mass_conservation_report(&spec, &lambdas)?;
    checks.push(Check::at_most(
        "mass_ledger_closure",
        mass.ledger_closure,
        MassReport::closure_tolerance(spec.model),
    ));
    let at_half = mass.flux_at(half).map_or(f64::NAN, |f| f.worst_relative);
    checks.push(Check::at_most("flux_identity_half_n", at_half, 1e-3));
    let passed = checks.iter().all(|c| c.passed);
    write_summary(
        &p,
        &Summary {
            command: "validate",
            passed,
            checks,
            details: ValidateDetails { sce, riccati, mass },
        },
    )?;
    Ok(Outcome::from(passed))
}
