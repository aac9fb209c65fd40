//! Studies built from single runs: ε- and n-sweeps, the constant-kernel
//! analytic checks and mass-conservation reports.

use std::sync::Arc;

use coag_core::diagnostics::{
    equicontinuity_modulus, mass_flux_identity, moment_monotonicity, moment_table, psi1_moment_check,
    tail_flux_decay, theta, theta_bound_check, uniform_integrability_check, weak_form_residual,
    DiagnosticsReport, TailFluxRow, Verdict, BOUND_SLACK,
};
use coag_core::gauges::{build_gauge_from_tail, ConvexGauge, Gauge, TailTable};
use coag_core::integrator::{evolve, DtPolicy, Schedule, StepStats, NORM_SLACK};
use coag_core::kernels::{truncate, Kernel, KernelFamily};
use coag_core::operators::{CoagulationOperator, Model};
use coag_core::sizedomain::{
    make_grid, project, sample_initial, weighted_distance, InitialProfile, NumberDensity, SizeGrid,
    Trajectory, Weight,
};
use coag_core::testfn::TestFunction;
use coag_core::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{DiagnosticsSpec, RunConfig};

/// Clipped mass allowed along a run, relative to `M₁(0)`.
pub const CLIP_BUDGET: f64 = 1e-9;

/// Everything needed for one run.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub kernel: Kernel,
    pub model: Model,
    pub n: f64,
    pub cells_per_decade: usize,
    pub profile: InitialProfile,
    pub t_end: f64,
    pub policy: DtPolicy,
    pub schedule: Schedule,
}

impl RunSpec {
    pub fn from_config(cfg: &RunConfig) -> std::result::Result<Self, crate::config::ConfigError> {
        Ok(Self {
            kernel: cfg.kernel()?,
            model: cfg.model(),
            n: cfg.grid.n,
            cells_per_decade: cfg.grid.cells_per_decade,
            profile: cfg.initial,
            t_end: cfg.time.t_end,
            policy: cfg.time.policy(),
            schedule: cfg.time.schedule(),
        })
    }

    pub fn with_model(&self, model: Model) -> Self {
        Self {
            model,
            ..self.clone()
        }
    }

    pub fn with_n(&self, n: f64) -> Self {
        Self { n, ..self.clone() }
    }

    pub fn with_resolution(&self, cells_per_decade: usize) -> Self {
        Self {
            cells_per_decade,
            ..self.clone()
        }
    }

    pub fn grid(&self) -> Result<Arc<SizeGrid>> {
        Ok(Arc::new(make_grid(self.n, self.cells_per_decade)?))
    }

    pub fn initial(&self, grid: Arc<SizeGrid>) -> Result<NumberDensity> {
        sample_initial(&self.profile, grid, self.kernel.sigma)
    }
}

/// Per-step bookkeeping collected while integrating.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StepLog {
    pub steps: usize,
    pub rejections: u64,
    pub min_dt: f64,
    pub max_dt: f64,
    /// Largest single-step relative increase of `‖ζ‖_{L¹}`.
    pub worst_l1_increase: f64,
    /// Smallest cell value over all accepted states.
    pub min_value: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub spec: RunSpec,
    pub initial: NumberDensity,
    pub trajectory: Trajectory,
    pub operator: CoagulationOperator,
    pub log: StepLog,
}

impl RunOutput {
    pub fn grid(&self) -> &Arc<SizeGrid> {
        &self.initial.grid
    }

    /// `max_t |M₁(t) + outflux(t) − clipped(t) − M₁(0)| / M₁(0)`; absolute when
    /// `M₁(0) = 0`.
    pub fn ledger_closure(&self) -> f64 {
        let m1_0 = self.initial.moment(1.0);
        let scale = if m1_0 > 0.0 { m1_0 } else { 1.0 };
        let t = &self.trajectory;
        t.snapshots
            .iter()
            .zip(&t.outflux_ledger)
            .zip(&t.clip_ledger)
            .map(|((s, out), clip)| (s.moment(1.0) + out - clip - m1_0).abs() / scale)
            .fold(0.0, f64::max)
    }

    pub fn total_clipped(&self) -> f64 {
        self.trajectory.clip_ledger.last().copied().unwrap_or(0.0)
    }
}

pub fn run(spec: &RunSpec) -> Result<RunOutput> {
    let grid = spec.grid()?;
    let initial = spec.initial(grid)?;
    run_from(spec, initial)
}

/// Runs `spec` from given initial data on the data's grid.
pub fn run_from(spec: &RunSpec, initial: NumberDensity) -> Result<RunOutput> {
    let grid = initial.grid.clone();
    let kernel = truncate(&spec.kernel, spec.n)?;
    let operator = CoagulationOperator::new(grid, &kernel, spec.model)?;
    let mut log = StepLog {
        min_dt: f64::INFINITY,
        min_value: initial.values.iter().copied().fold(f64::INFINITY, f64::min),
        ..StepLog::default()
    };
    let mut last_l1 = initial.weighted_norm(Weight::One);
    let mut watch = |_t: f64, d: &NumberDensity, s: &StepStats| {
        // The initial state is reported with empty stats.
        if s.dt == 0.0 {
            return;
        }
        let l1 = d.weighted_norm(Weight::One);
        let rise = if last_l1 > 0.0 { (l1 - last_l1) / last_l1 } else { l1 };
        log.worst_l1_increase = if log.steps == 0 { rise } else { log.worst_l1_increase.max(rise) };
        last_l1 = l1;
        log.steps += 1;
        log.rejections += u64::from(s.rejections);
        log.min_dt = log.min_dt.min(s.dt);
        log.max_dt = log.max_dt.max(s.dt);
        log.min_value = d.values.iter().copied().fold(log.min_value, f64::min);
    };
    let trajectory = evolve(
        &initial,
        &operator,
        spec.t_end,
        &spec.policy,
        &spec.schedule,
        &mut [&mut watch],
    )?;
    if log.steps == 0 {
        log.min_dt = 0.0;
    }
    Ok(RunOutput {
        spec: spec.clone(),
        initial,
        trajectory,
        operator,
        log,
    })
}

/// Bumps used for equicontinuity when the config lists none.
pub fn default_bumps(n: f64) -> Vec<TestFunction> {
    [(0.5, 0.25), (2.0, 1.0), (0.2 * n, 0.1 * n)]
        .into_iter()
        .map(|(center, half_width)| TestFunction::Bump { center, half_width })
        .collect()
}

/// Test functions used for weak-form residuals when the config lists none.
pub fn default_omegas(n: f64) -> Vec<TestFunction> {
    vec![
        TestFunction::Constant { value: 1.0 },
        TestFunction::Linear,
        TestFunction::MinLinear { lambda: n / 2.0 },
        TestFunction::ExpDecay,
        TestFunction::Log1p,
    ]
}

/// Gauges built from the tails of the initial data: mass tail for sizes,
/// value tail of `μ^{-σ}ζ` for values.
pub fn initial_gauges(initial: &NumberDensity, sigma: f64) -> Result<(ConvexGauge, ConvexGauge)> {
    let g1 = build_gauge_from_tail(&TailTable::mass_tail(initial)?)?;
    let g2 = build_gauge_from_tail(&TailTable::value_tail(initial, sigma)?)?;
    Ok((g1, g2))
}

/// Runs every enabled check along a finished run.
pub fn diagnose(out: &RunOutput, spec: &DiagnosticsSpec, lambdas: &[f64]) -> Result<DiagnosticsReport> {
    let kernel = &out.spec.kernel;
    let sigma = kernel.sigma;
    let traj = &out.trajectory;
    let zeta_in = &out.initial;
    let horizon = out.spec.t_end;
    let m1_0 = zeta_in.moment(1.0);

    let gauges = if spec.gauges && m1_0 > 0.0 {
        Some(initial_gauges(zeta_in, sigma)?)
    } else {
        None
    };
    let (g1, g2): (Option<&dyn Gauge>, Option<&dyn Gauge>) = match &gauges {
        Some((a, b)) => (Some(a), Some(b)),
        None => (None, None),
    };

    let mut verdicts = vec![theta_bound_check(traj, zeta_in, sigma)];
    if let Some(g) = g1 {
        verdicts.push(psi1_moment_check(traj, zeta_in, g, kernel.k, horizon, sigma));
    }
    let integrability =
        g2.map(|g| uniform_integrability_check(traj, zeta_in, g, kernel.k, kernel.eta, horizon, sigma));

    let min_cell = traj
        .snapshots
        .iter()
        .map(|s| (s.time, -s.values.iter().copied().fold(f64::INFINITY, f64::min)));
    verdicts.push(Verdict::from_series("positivity", 0.0, min_cell));
    verdicts.push(Verdict::from_series(
        "clipped_mass",
        CLIP_BUDGET * m1_0,
        traj.snapshots.iter().zip(&traj.clip_ledger).map(|(s, c)| (s.time, *c)),
    ));
    verdicts.push(Verdict::from_series(
        "l1_step_increase",
        NORM_SLACK,
        std::iter::once((horizon, out.log.worst_l1_increase)),
    ));
    let monotonicity = moment_monotonicity(traj, sigma);
    verdicts.push(Verdict::from_series(
        "moment_monotonicity",
        BOUND_SLACK,
        std::iter::once((horizon, monotonicity.0.max(monotonicity.1))),
    ));

    let n = out.spec.n;
    let omegas = if spec.omegas.is_empty() {
        default_omegas(n)
    } else {
        spec.omegas.clone()
    };
    let centers = out.grid().centers();
    let mut weak_form = Vec::with_capacity(omegas.len());
    for w in &omegas {
        let rows = weak_form_residual(traj, &w.sample(centers), &out.operator)?;
        let worst = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
        weak_form.push((w.name(), worst));
    }

    let mut flux_identity = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let rows = mass_flux_identity(traj, lambda, &out.operator)?;
        let worst = rows.iter().map(|r| r.relative).fold(0.0, f64::max);
        let crossing = rows.last().map_or(0.0, |r| r.crossing);
        flux_identity.push((lambda, worst, crossing));
    }
    let tail_flux: Vec<TailFluxRow> = tail_flux_decay(traj, lambdas, &out.operator);

    let mut equicontinuity = Vec::new();
    if spec.equicontinuity {
        let mut bumps: Vec<TestFunction> = omegas
            .iter()
            .filter(|w| matches!(w, TestFunction::Bump { .. }))
            .copied()
            .collect();
        if bumps.is_empty() {
            bumps = default_bumps(n);
        }
        let th = theta(zeta_in, sigma);
        for b in &bumps {
            equicontinuity.push(equicontinuity_modulus(traj, b, sigma, kernel.k, th));
        }
    }

    Ok(DiagnosticsReport {
        moments: moment_table(traj, sigma, g1, g2),
        verdicts,
        integrability,
        weak_form,
        flux_identity,
        tail_flux,
        equicontinuity,
        monotonicity,
    })
}

/// Scales the middle snapshot by 10 so that the `Θ` bound fails. Test hook.
pub fn corrupt(traj: &mut Trajectory) {
    if traj.snapshots.is_empty() {
        return;
    }
    let mid = traj.snapshots.len() / 2;
    for v in &mut traj.snapshots[mid].values {
        *v = 10.0 * *v + 1.0;
    }
}

/// `ε` coordinate used in distance tables: the model's `ε`, 1 for the
/// Smoluchowski model and 0 for its transport limit.
pub fn eps_coordinate(model: Model) -> f64 {
    match model {
        Model::Sce => 1.0,
        Model::Ohs => 0.0,
        Model::Generalized { eps } => eps,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceRow {
    pub eps: f64,
    pub n: f64,
    pub time: f64,
    /// `None` if a member run failed.
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DistanceTable {
    pub rows: Vec<DistanceRow>,
}

impl DistanceTable {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows at time `t` for truncation `n`, in table order.
    pub fn at(&self, n: f64, t: f64) -> Vec<DistanceRow> {
        self.rows
            .iter()
            .filter(|r| r.n == n && (r.time - t).abs() <= 1e-12 * t.max(1.0))
            .copied()
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Template for every member; its model is used by the n-sweep.
    pub base: RunSpec,
    pub eps_list: Vec<f64>,
    pub n_list: Vec<f64>,
    pub workers: usize,
}

impl SweepConfig {
    pub fn from_config(cfg: &RunConfig) -> std::result::Result<Self, crate::config::ConfigError> {
        Ok(Self {
            base: RunSpec::from_config(cfg)?,
            eps_list: cfg.eps_list(),
            n_list: cfg.n_list(),
            workers: cfg.sweep.workers,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(e) = self.eps_list.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
            return Err(Error::Config(format!("sweep ε must lie in (0, 1], got {e}")));
        }
        if let Some(n) = self.n_list.iter().find(|n| !(**n > 1.0)) {
            return Err(Error::Config(format!("sweep n must exceed 1, got {n}")));
        }
        if self.workers == 0 {
            return Err(Error::Config("sweep needs at least one worker".into()));
        }
        Ok(())
    }

    fn times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self
            .base
            .schedule
            .times
            .iter()
            .copied()
            .filter(|t| *t <= self.base.t_end)
            .collect();
        t.push(self.base.t_end);
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
    }
}

/// Outcome of one member run, reduced to what sweeps need.
#[derive(Debug, Clone)]
struct Member {
    trajectory: Trajectory,
    theta_passed: bool,
}

fn run_member(spec: &RunSpec) -> std::result::Result<Member, String> {
    let out = run(spec).map_err(|e| e.to_string())?;
    let v = theta_bound_check(&out.trajectory, &out.initial, spec.kernel.sigma);
    Ok(Member {
        trajectory: out.trajectory,
        theta_passed: v.passed,
    })
}

fn snapshot_at(traj: &Trajectory, t: f64) -> Option<&NumberDensity> {
    traj.at_time(t, 1e-9 * t.max(1.0)).map(|(_, s)| s)
}

/// Per-`n` ingredients of the ε-sweep verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCheck {
    pub n: f64,
    /// Distance at the final time between the reference run and the same
    /// model at doubled resolution, projected back.
    pub floor: f64,
    /// Distance at the final time between the `ε = 1` member and a direct
    /// Smoluchowski run, if `ε = 1` is in the list.
    pub sce_identity: Option<f64>,
    /// Largest increase of the final-time distance as `ε` decreases.
    pub worst_increase: f64,
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsSweepReport {
    pub table: DistanceTable,
    pub checks: Vec<SweepCheck>,
    /// Members whose `Θ` bound failed or that did not finish.
    pub failures: Vec<String>,
}

impl EpsSweepReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.checks.iter().all(|c| c.monotone)
    }
}

#[derive(Debug, Clone, Copy)]
enum Job {
    Eps(usize, f64),
    Ohs(usize),
    OhsFine(usize),
    Sce(usize),
}

/// Distances at the snapshot times from each generalized run to the direct
/// OHS run on the same grid, for every `(ε, n)`.
pub fn run_eps_sweep(config: &SweepConfig) -> Result<EpsSweepReport> {
    config.validate()?;
    if config.eps_list.is_empty() {
        return Ok(EpsSweepReport {
            table: DistanceTable::default(),
            checks: Vec::new(),
            failures: Vec::new(),
        });
    }
    let times = config.times();
    let mut jobs = Vec::new();
    for (ni, _) in config.n_list.iter().enumerate() {
        jobs.extend([Job::Ohs(ni), Job::OhsFine(ni)]);
        if config.eps_list.contains(&1.0) {
            jobs.push(Job::Sce(ni));
        }
        jobs.extend(config.eps_list.iter().map(|e| Job::Eps(ni, *e)));
    }
    let spec_of = |job: Job| {
        let (ni, model, refine) = match job {
            Job::Eps(ni, eps) => (ni, Model::Generalized { eps }, 1),
            Job::Ohs(ni) => (ni, Model::Ohs, 1),
            Job::OhsFine(ni) => (ni, Model::Ohs, 2),
            Job::Sce(ni) => (ni, Model::Sce, 1),
        };
        config
            .base
            .with_n(config.n_list[ni])
            .with_model(model)
            .with_resolution(config.base.cells_per_decade * refine)
    };
    let results: Vec<std::result::Result<Member, String>> = config
        .pool()?
        .install(|| jobs.par_iter().map(|j| run_member(&spec_of(*j))).collect());

    let mut failures = Vec::new();
    for (job, res) in jobs.iter().zip(&results) {
        match res {
            Err(e) => failures.push(format!("{job:?}: {e}")),
            Ok(m) if !m.theta_passed => failures.push(format!("{job:?}: Θ bound violated")),
            Ok(_) => {}
        }
    }
    let find = |pred: &dyn Fn(&Job) -> bool| {
        jobs.iter()
            .zip(&results)
            .find(|(j, _)| pred(j))
            .and_then(|(_, r)| r.as_ref().ok())
    };
    let weight = Weight::Distance(config.base.kernel.sigma);
    let t_end = *times.last().expect("times include t_end");
    let mut table = DistanceTable::default();
    let mut checks = Vec::new();
    for (ni, &n) in config.n_list.iter().enumerate() {
        let reference = find(&|j| matches!(j, Job::Ohs(k) if *k == ni));
        let distance = |m: Option<&Member>, t: f64| -> Option<f64> {
            let a = snapshot_at(&m?.trajectory, t)?;
            let b = snapshot_at(&reference?.trajectory, t)?;
            weighted_distance(a, b, weight).ok()
        };
        let mut finals = Vec::new();
        for &eps in &config.eps_list {
            let m = find(&|j| matches!(j, Job::Eps(k, e) if *k == ni && *e == eps));
            for &t in &times {
                table.rows.push(DistanceRow {
                    eps,
                    n,
                    time: t,
                    distance: distance(m, t),
                });
            }
            finals.push((eps, distance(m, t_end)));
        }
        let floor = (|| {
            let fine = find(&|j| matches!(j, Job::OhsFine(k) if *k == ni))?;
            let coarse = snapshot_at(&reference?.trajectory, t_end)?;
            let projected = project(snapshot_at(&fine.trajectory, t_end)?, coarse.grid.clone());
            weighted_distance(&projected, coarse, weight).ok()
        })()
        .unwrap_or(f64::NAN);
        let sce_identity = config.eps_list.contains(&1.0).then(|| {
            (|| {
                let a = snapshot_at(&find(&|j| matches!(j, Job::Sce(k) if *k == ni))?.trajectory, t_end)?;
                let b = snapshot_at(
                    &find(&|j| matches!(j, Job::Eps(k, e) if *k == ni && *e == 1.0))?.trajectory,
                    t_end,
                )?;
                weighted_distance(a, b, weight).ok()
            })()
            .unwrap_or(f64::NAN)
        });
        finals.sort_by(|a, b| b.0.total_cmp(&a.0));
        let ds: Vec<f64> = finals.iter().filter_map(|(_, d)| *d).collect();
        let worst_increase = ds.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        let complete = ds.len() == finals.len();
        let monotone = complete && !(worst_increase > floor) && floor.is_finite();
        checks.push(SweepCheck {
            n,
            floor,
            sce_identity,
            worst_increase: worst_increase.max(f64::MIN),
            monotone: monotone || (complete && ds.len() < 2),
        });
    }
    Ok(EpsSweepReport {
        table,
        checks,
        failures,
    })
}

/// Distances between solutions at successive truncation parameters, the
/// larger one projected onto the smaller grid. Rows carry the larger `n`.
pub fn run_n_sweep(config: &SweepConfig) -> Result<DistanceTable> {
    config.validate()?;
    let mut ns = config.n_list.clone();
    ns.sort_by(f64::total_cmp);
    ns.dedup();
    if ns.len() < 2 {
        return Ok(DistanceTable::default());
    }
    let times = config.times();
    let results: Vec<std::result::Result<Member, String>> = config
        .pool()?
        .install(|| ns.par_iter().map(|n| run_member(&config.base.with_n(*n))).collect());
    let weight = Weight::Distance(config.base.kernel.sigma);
    let eps = eps_coordinate(config.base.model);
    let mut table = DistanceTable::default();
    for k in 1..ns.len() {
        for &t in &times {
            let distance = (|| {
                let small = snapshot_at(&results[k - 1].as_ref().ok()?.trajectory, t)?;
                let large = snapshot_at(&results[k].as_ref().ok()?.trajectory, t)?;
                weighted_distance(&project(large, small.grid.clone()), small, weight).ok()
            })();
            table.rows.push(DistanceRow {
                eps,
                n: ns[k],
                time: t,
                distance,
            });
        }
    }
    Ok(table)
}

/// One named quantity compared with a tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    /// Passes iff `value ≤ tolerance`.
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }

    /// Passes iff `value ≥ tolerance`.
    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            passed: value >= tolerance,
        }
    }
}

/// Cell averages of `(2/(2+t))² e^{-2μ/(2+t)}`.
pub fn constant_kernel_exact(grid: &SizeGrid, t: f64) -> Vec<f64> {
    let a = 2.0 / (2.0 + t);
    grid.edges()
        .windows(2)
        .map(|e| a * (-a * e[0]).exp() * -(-a * (e[1] - e[0])).exp_m1() / (e[1] - e[0]))
        .collect()
}

fn require_constant_kernel(spec: &RunSpec) -> Result<()> {
    match spec.kernel.family {
        KernelFamily::Constant { scale: 1.0 } => Ok(()),
        _ => Err(Error::Config(format!(
            "analytic checks need the unit constant kernel, got {}",
            spec.kernel.family_name()
        ))),
    }
}

pub const ANALYTIC_TIMES: [f64; 3] = [0.5, 1.0, 2.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceValidation {
    pub cells_per_decade: usize,
    /// `(t, error)` at `t = 0` and [`ANALYTIC_TIMES`].
    pub errors: Vec<(f64, f64)>,
    /// Error at `t = 1` on the doubled grid.
    pub refined_error: f64,
    /// `error / refined_error` at `t = 1`.
    pub refinement_ratio: f64,
    /// `∫ |ζ_h − ζ| (1 + μ) dμ` at `t = 1`, with `ζ_h` piecewise constant.
    /// Dominated by the reconstruction, not by the scheme.
    pub reconstruction_error: f64,
    pub ledger_closure: f64,
    pub checks: Vec<Check>,
}

impl SceValidation {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn sce_errors(spec: &RunSpec) -> Result<(Vec<(f64, f64)>, RunOutput)> {
    let out = run(spec)?;
    let grid = out.grid().clone();
    let weight = Weight::Distance(0.0);
    let mut errors = Vec::new();
    let exact0 = NumberDensity::from_values(grid.clone(), constant_kernel_exact(&grid, 0.0), 0.0)?;
    errors.push((0.0, weighted_distance(&out.initial, &exact0, weight)?));
    for t in ANALYTIC_TIMES {
        let s = snapshot_at(&out.trajectory, t).ok_or_else(|| Error::Config(format!("no snapshot at {t}")))?;
        let exact = NumberDensity::from_values(grid.clone(), constant_kernel_exact(&grid, t), t)?;
        errors.push((t, weighted_distance(s, &exact, weight)?));
    }
    Ok((errors, out))
}

/// Weighted-L¹ errors (weight `1 + μ`) of the Smoluchowski scheme with `Λ ≡ 1`
/// and exponential data against the closed-form solution, measured between
/// cell averages.
pub fn validate_sce_constant_kernel(spec: &RunSpec) -> Result<SceValidation> {
    require_constant_kernel(spec)?;
    if spec.profile != InitialProfile::Exponential {
        return Err(Error::Config("analytic check needs exponential initial data".into()));
    }
    let spec = RunSpec {
        model: Model::Sce,
        t_end: 2.0,
        schedule: Schedule::at(&ANALYTIC_TIMES),
        ..spec.clone()
    };
    let (errors, out) = sce_errors(&spec)?;
    let (fine, _) = sce_errors(&spec.with_resolution(2 * spec.cells_per_decade))?;
    let at1 = |e: &[(f64, f64)]| e.iter().find(|(t, _)| *t == 1.0).map(|p| p.1).unwrap_or(f64::NAN);
    let (e1, f1) = (at1(&errors), at1(&fine));
    let ratio = e1 / f1;

    let a = 2.0 / 3.0;
    let s1 = snapshot_at(&out.trajectory, 1.0).expect("checked above");
    let rule = coag_core::quadrature::GaussLegendre::new(16);
    let edges = out.grid().edges();
    let reconstruction_error = (0..out.grid().len())
        .map(|i| {
            rule.integrate_log(edges[i], edges[i + 1], |mu| {
                (s1.values[i] - a * a * (-a * mu).exp()).abs() * (1.0 + mu)
            })
        })
        .sum();
    let closure = out.ledger_closure();
    let checks = vec![
        Check::at_most("projection_error_t0", errors[0].1, 1e-3),
        Check::at_most("error_t1", e1, 2e-2),
        Check::at_least("refinement_ratio_t1", ratio, 2.0),
        Check::at_most("ledger_closure", closure, 1e-8),
    ];
    Ok(SceValidation {
        cells_per_decade: spec.cells_per_decade,
        errors,
        refined_error: f1,
        refinement_ratio: ratio,
        reconstruction_error,
        ledger_closure: closure,
        checks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiccatiValidation {
    pub model: String,
    pub eps: f64,
    /// `(t, M₀(t), 2/(2+t))`.
    pub rows: Vec<(f64, f64, f64)>,
    pub worst: f64,
    pub passed: bool,
}

/// Tolerance on `|M₀(t) − 2/(2+t)|`.
pub const RICCATI_TOL: f64 = 1e-3;

/// `M₀(t)` against `2/(2+t)` with the initial data rescaled to `M₀(0) = 1`.
pub fn validate_m0_riccati(spec: &RunSpec, model: Model) -> Result<RiccatiValidation> {
    require_constant_kernel(spec)?;
    let spec = RunSpec {
        model,
        t_end: 2.0,
        schedule: Schedule::at(&ANALYTIC_TIMES),
        ..spec.clone()
    };
    let initial = spec.initial(spec.grid()?)?;
    let m0 = initial.weighted_norm(Weight::One);
    if !(m0 > 0.0) {
        return Err(Error::Config("Riccati check needs nonzero initial data".into()));
    }
    let out = run_from(&spec, initial.scaled(1.0 / m0))?;
    let mut rows = vec![(0.0, out.initial.weighted_norm(Weight::One), 1.0)];
    for t in ANALYTIC_TIMES {
        let s = snapshot_at(&out.trajectory, t).ok_or_else(|| Error::Config(format!("no snapshot at {t}")))?;
        rows.push((t, s.weighted_norm(Weight::One), 2.0 / (2.0 + t)));
    }
    let worst = rows.iter().map(|(_, m, e)| (m - e).abs()).fold(0.0, f64::max);
    Ok(RiccatiValidation {
        model: model.name().into(),
        eps: eps_coordinate(model),
        rows,
        worst,
        passed: worst <= RICCATI_TOL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluxSummary {
    pub lambda: f64,
    /// Largest `|lhs − rhs| / M₁(0)` over the snapshots.
    pub worst_relative: f64,
    /// Transport crossing at the final time, see `FluxRow::crossing`.
    pub crossing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassReport {
    pub model: String,
    pub cells_per_decade: usize,
    /// `(t, M₁, cumulative outflux, cumulative clipped)`.
    pub series: Vec<(f64, f64, f64, f64)>,
    pub ledger_closure: f64,
    /// `|M₁(T) − M₁(0)| / M₁(0)`, boundary loss included.
    pub interior_drift: f64,
    pub flux: Vec<FluxSummary>,
    pub tail_flux: Vec<TailFluxRow>,
}

impl MassReport {
    /// Ledger tolerance: exact interior schemes close to roundoff, the
    /// transport model only to discretization accuracy.
    pub fn closure_tolerance(model: Model) -> f64 {
        match model {
            Model::Ohs => 1e-3,
            _ => 1e-8,
        }
    }

    pub fn flux_at(&self, lambda: f64) -> Option<&FluxSummary> {
        self.flux.iter().find(|f| f.lambda == lambda)
    }
}

/// `M₁` series, ledger closure and truncated flux identities at each cut.
pub fn mass_conservation_report(spec: &RunSpec, lambdas: &[f64]) -> Result<MassReport> {
    let out = run(spec)?;
    let traj = &out.trajectory;
    let mut series = vec![(out.initial.time, out.initial.moment(1.0), 0.0, 0.0)];
    for ((s, o), c) in traj.snapshots.iter().zip(&traj.outflux_ledger).zip(&traj.clip_ledger) {
        if s.time > out.initial.time {
            series.push((s.time, s.moment(1.0), *o, *c));
        }
    }
    let m1_0 = series[0].1;
    let m1_t = series.last().map_or(m1_0, |r| r.1);
    let interior_drift = if m1_0 > 0.0 {
        (m1_t - m1_0).abs() / m1_0
    } else {
        (m1_t - m1_0).abs()
    };
    let mut flux = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let rows = mass_flux_identity(traj, lambda, &out.operator)?;
        flux.push(FluxSummary {
            lambda,
            worst_relative: rows.iter().map(|r| r.relative).fold(0.0, f64::max),
            crossing: rows.last().map_or(0.0, |r| r.crossing),
        });
    }
    Ok(MassReport {
        model: spec.model.name().into(),
        cells_per_decade: spec.cells_per_decade,
        series,
        ledger_closure: out.ledger_closure(),
        interior_drift,
        flux,
        tail_flux: tail_flux_decay(traj, lambdas, &out.operator),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use coag_core::quadrature::GaussLegendre;

    fn base(kernel: Kernel, model: Model) -> RunSpec {
        RunSpec {
            kernel,
            model,
            n: 100.0,
            cells_per_decade: 8,
            profile: InitialProfile::Exponential,
            t_end: 1.0,
            policy: DtPolicy::default(),
            schedule: Schedule::uniform(1.0, 4),
        }
    }

    #[test]
    fn exact_cell_averages_match_quadrature() {
        let grid = make_grid(100.0, 8).unwrap();
        let rule = GaussLegendre::new(16);
        for t in [0.0, 1.0, 3.0] {
            let a = 2.0 / (2.0 + t);
            let avg = constant_kernel_exact(&grid, t);
            for (i, e) in grid.edges().windows(2).enumerate() {
                let q = rule.integrate(e[0], e[1], |mu| a * a * (-a * mu).exp()) / (e[1] - e[0]);
                assert!((avg[i] - q).abs() <= 1e-13 * q.max(1e-300), "cell {i} t={t}");
            }
        }
    }

    #[test]
    fn zero_data_gives_zero_everything() {
        let spec = RunSpec {
            profile: InitialProfile::Zero,
            ..base(Kernel::singular_product(0.2), Model::Ohs)
        };
        let rep = mass_conservation_report(&spec, &[25.0, 50.0]).unwrap();
        assert!(rep.series.iter().all(|r| r.1 == 0.0 && r.2 == 0.0 && r.3 == 0.0));
        assert_eq!(rep.ledger_closure, 0.0);
        assert!(rep.flux.iter().all(|f| f.worst_relative == 0.0));
    }

    #[test]
    fn riccati_at_time_zero_is_exact() {
        let rep = validate_m0_riccati(&base(Kernel::constant(), Model::Sce), Model::Sce).unwrap();
        assert_eq!(rep.rows[0].0, 0.0);
        assert!((rep.rows[0].1 - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn analytic_checks_reject_other_kernels() {
        let spec = base(Kernel::additive(), Model::Sce);
        assert!(matches!(validate_sce_constant_kernel(&spec), Err(Error::Config(_))));
        assert!(matches!(validate_m0_riccati(&spec, Model::Ohs), Err(Error::Config(_))));
        let spec = RunSpec {
            profile: InitialProfile::SingularPower { a: 0.3 },
            ..base(Kernel::constant(), Model::Sce)
        };
        assert!(matches!(validate_sce_constant_kernel(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn empty_sweeps_give_empty_tables() {
        let cfg = SweepConfig {
            base: base(Kernel::constant(), Model::Sce),
            eps_list: vec![],
            n_list: vec![100.0],
            workers: 2,
        };
        assert!(run_eps_sweep(&cfg).unwrap().table.is_empty());
        assert!(run_n_sweep(&cfg).unwrap().is_empty());
    }

    #[test]
    fn sweep_rejects_bad_members() {
        let cfg = SweepConfig {
            base: base(Kernel::constant(), Model::Sce),
            eps_list: vec![1.5],
            n_list: vec![100.0],
            workers: 1,
        };
        assert!(run_eps_sweep(&cfg).is_err());
    }

    #[test]
    fn eps_one_row_matches_direct_sce() {
        let cfg = SweepConfig {
            base: base(Kernel::singular_product(0.2), Model::Sce),
            eps_list: vec![1.0, 0.5],
            n_list: vec![100.0],
            workers: 2,
        };
        let rep = run_eps_sweep(&cfg).unwrap();
        assert!(rep.failures.is_empty(), "{:?}", rep.failures);
        assert!(rep.checks[0].sce_identity.unwrap() <= 1e-10);
        assert_eq!(rep.table.rows.len(), 2 * 4);
    }

    #[test]
    fn sweeps_are_deterministic() {
        let cfg = SweepConfig {
            base: base(Kernel::constant(), Model::Ohs),
            eps_list: vec![1.0, 0.25, 1.0 / 64.0],
            n_list: vec![10.0, 100.0],
            workers: 3,
        };
        let a = run_eps_sweep(&cfg).unwrap();
        let b = run_eps_sweep(&SweepConfig { workers: 1, ..cfg.clone() }).unwrap();
        assert_eq!(a, b);
        assert_eq!(run_n_sweep(&cfg).unwrap(), run_n_sweep(&cfg).unwrap());
    }

    #[test]
    fn n_sweep_distances_shrink_with_n() {
        let cfg = SweepConfig {
            base: base(Kernel::constant(), Model::Sce),
            eps_list: vec![],
            n_list: vec![10.0, 100.0, 1000.0],
            workers: 3,
        };
        let t = cfg.n_sweep_final(&run_n_sweep(&cfg).unwrap());
        assert_eq!(t.len(), 2);
        assert!(t[1] < t[0], "{t:?}");
    }

    impl SweepConfig {
        fn n_sweep_final(&self, table: &DistanceTable) -> Vec<f64> {
            table
                .rows
                .iter()
                .filter(|r| r.time == self.base.t_end)
                .map(|r| r.distance.unwrap())
                .collect()
        }
    }
}
