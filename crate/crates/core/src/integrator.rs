//! Classical RK4 time stepping with a positivity guard.
//!
//! A step is rejected and retried with half the step size when it produces a
//! cell below `-1e-12 · max`, a non-finite value, or a larger L¹ norm than the
//! state it started from. Surviving tiny negatives are clipped to zero and the
//! mass they represent is booked in the clip ledger. Outflux is integrated with
//! the same stage weights as the state, so the mass ledger closes to rounding.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{domain, Error, Result};
use crate::kernels::TruncatedKernel;
use crate::math::powf;
use crate::operators::RateOperator;
use crate::sizedomain::{NumberDensity, Trajectory};

/// Relative threshold below which negative cells cause a rejection.
pub const CLIP_THRESHOLD: f64 = 1e-12;

/// Relative slack for the L¹ monotonicity check.
pub const NORM_SLACK: f64 = 1e-12;

/// RK4 is stable on the negative real axis up to about `2.78 / |λ|`.
const RK4_STABILITY: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DtMode {
    Fixed,
    Adaptive,
}

/// Step-size policy. In fixed mode `dt` is the step; in adaptive mode it is the
/// first and the largest step.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DtPolicy {
    pub mode: DtMode,
    pub dt: f64,
    pub safety: f64,
    pub max_shrink: u32,
    /// Per-step relative error target of the adaptive controller.
    pub tol: f64,
}

impl Default for DtPolicy {
    fn default() -> Self {
        Self {
            mode: DtMode::Adaptive,
            dt: 0.05,
            safety: 0.8,
            max_shrink: 20,
            tol: 1e-9,
        }
    }
}

impl DtPolicy {
    pub fn fixed(dt: f64) -> Self {
        Self {
            mode: DtMode::Fixed,
            dt,
            ..Self::default()
        }
    }

    pub fn adaptive(dt_max: f64, tol: f64) -> Self {
        Self {
            mode: DtMode::Adaptive,
            dt: dt_max,
            tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(domain(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(domain(format!("safety must lie in (0, 1], got {}", self.safety)));
        }
        if !(self.tol > 0.0) {
            return Err(domain(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// What happened during one accepted step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepStats {
    /// Accepted step size.
    pub dt: f64,
    pub rejections: u32,
    /// Mass added back by clipping tiny negatives (a magnitude, ≥ 0).
    pub clipped_mass: f64,
    /// Mass that left through the upper boundary during the step.
    pub outflux: f64,
}

/// Step-size bound from the Lipschitz constant `2kn^{2+2σ}(1/ε+2)‖ζ‖` of the
/// truncated operator.
pub fn lipschitz_dt(kernel: &TruncatedKernel, eps: f64, l1_norm: f64, safety: f64) -> f64 {
    let k = &kernel.base;
    let lip = 2.0 * k.k * powf(kernel.n, 2.0 + 2.0 * k.sigma) * (1.0 / eps + 2.0) * l1_norm;
    if lip > 0.0 {
        safety / lip
    } else {
        f64::INFINITY
    }
}

fn l1(values: &[f64], widths: &[f64]) -> f64 {
    values.iter().zip(widths).map(|(v, w)| v.abs() * w).sum()
}

struct Rk4Result {
    values: Vec<f64>,
    outflux: f64,
    /// Stiffness at the starting state.
    stiffness: f64,
}

fn rk4(op: &dyn RateOperator, y: &[f64], dt: f64) -> Rk4Result {
    let len = y.len();
    let mut k1 = vec![0.0; len];
    let mut k2 = vec![0.0; len];
    let mut k3 = vec![0.0; len];
    let mut k4 = vec![0.0; len];
    let mut tmp = vec![0.0; len];
    let i1 = op.eval_into(y, &mut k1);
    for i in 0..len {
        tmp[i] = y[i] + 0.5 * dt * k1[i];
    }
    let i2 = op.eval_into(&tmp, &mut k2);
    for i in 0..len {
        tmp[i] = y[i] + 0.5 * dt * k2[i];
    }
    let i3 = op.eval_into(&tmp, &mut k3);
    for i in 0..len {
        tmp[i] = y[i] + dt * k3[i];
    }
    let i4 = op.eval_into(&tmp, &mut k4);
    let h6 = dt / 6.0;
    for i in 0..len {
        tmp[i] = y[i] + h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Rk4Result {
        values: tmp,
        outflux: h6
            * (i1.outflux_rate + 2.0 * i2.outflux_rate + 2.0 * i3.outflux_rate + i4.outflux_rate),
        stiffness: i1.stiffness,
    }
}

/// Checks a candidate state; returns the most negative cell on failure.
fn admissible(values: &[f64], widths: &[f64], prev_l1: f64) -> core::result::Result<(), f64> {
    let mut max = 0.0f64;
    let mut min = f64::INFINITY;
    for v in values {
        if !v.is_finite() {
            return Err(f64::NAN);
        }
        max = max.max(*v);
        min = min.min(*v);
    }
    if min < -CLIP_THRESHOLD * max {
        return Err(min);
    }
    let norm: f64 = values.iter().zip(widths).map(|(v, w)| v.max(0.0) * w).sum();
    if norm > prev_l1 * (1.0 + NORM_SLACK) {
        return Err(min.min(0.0));
    }
    Ok(())
}

/// Zeroes negative cells, returning the mass this adds.
fn clip(values: &mut [f64], centers: &[f64], widths: &[f64]) -> f64 {
    let mut added = 0.0;
    for ((v, x), w) in values.iter_mut().zip(centers).zip(widths) {
        if *v < 0.0 {
            added += -*v * x * w;
            *v = 0.0;
        }
    }
    added
}

/// One RK4 step with reject-and-halve, at most 20 halvings.
pub fn step(
    density: &NumberDensity,
    op: &dyn RateOperator,
    dt: f64,
) -> Result<(NumberDensity, StepStats)> {
    step_with(density, op, dt, DtPolicy::default().max_shrink)
}

/// One RK4 step with up to `max_shrink` halvings. The returned density sits at
/// `density.time + stats.dt`.
pub fn step_with(
    density: &NumberDensity,
    op: &dyn RateOperator,
    dt: f64,
    max_shrink: u32,
) -> Result<(NumberDensity, StepStats)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(domain(format!("dt must be positive, got {dt}")));
    }
    let (mut values, stats) = guarded_step(op, &density.values, density.time, dt, max_shrink)?;
    let grid = density.grid.clone();
    let clipped = clip(&mut values, grid.centers(), grid.widths());
    Ok((
        NumberDensity {
            grid,
            values,
            time: density.time + stats.dt,
        },
        StepStats {
            clipped_mass: clipped,
            ..stats
        },
    ))
}

fn guarded_step(
    op: &dyn RateOperator,
    y: &[f64],
    time: f64,
    mut dt: f64,
    max_shrink: u32,
) -> Result<(Vec<f64>, StepStats)> {
    let widths = op.grid().widths();
    let prev = l1(y, widths);
    let mut rejections = 0;
    loop {
        let r = rk4(op, y, dt);
        match admissible(&r.values, widths, prev) {
            Ok(()) => {
                return Ok((
                    r.values,
                    StepStats {
                        dt,
                        rejections,
                        clipped_mass: 0.0,
                        outflux: r.outflux,
                    },
                ))
            }
            Err(min_value) => {
                if rejections >= max_shrink {
                    return Err(Error::Stiffness {
                        time,
                        dt,
                        rejections,
                        min_value,
                    });
                }
                rejections += 1;
                dt *= 0.5;
            }
        }
    }
}

/// Which times end up in the trajectory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Schedule {
    /// Requested snapshot times; the final time is always included.
    pub times: Vec<f64>,
    /// Record every accepted step as well.
    pub every_step: bool,
}

impl Schedule {
    pub fn at(times: &[f64]) -> Self {
        Self {
            times: times.to_vec(),
            every_step: false,
        }
    }

    pub fn every_step() -> Self {
        Self {
            times: Vec::new(),
            every_step: true,
        }
    }

    /// `count` equally spaced times on `(0, t_end]`.
    pub fn uniform(t_end: f64, count: usize) -> Self {
        Self {
            times: (1..=count).map(|k| t_end * k as f64 / count as f64).collect(),
            every_step: false,
        }
    }
}

/// Receives every accepted state. Implemented for closures.
pub trait Observer {
    fn observe(&mut self, time: f64, density: &NumberDensity, stats: &StepStats);
}

impl<F: FnMut(f64, &NumberDensity, &StepStats)> Observer for F {
    fn observe(&mut self, time: f64, density: &NumberDensity, stats: &StepStats) {
        self(time, density, stats)
    }
}

/// Integrates from `initial.time` to `t_end`, landing exactly on every
/// scheduled time.
pub fn evolve(
    initial: &NumberDensity,
    op: &dyn RateOperator,
    t_end: f64,
    policy: &DtPolicy,
    schedule: &Schedule,
    observers: &mut [&mut dyn Observer],
) -> Result<Trajectory> {
    policy.validate()?;
    let t0 = initial.time;
    if !(t_end >= t0) || !t_end.is_finite() {
        return Err(domain(format!("final time {t_end} precedes start {t0}")));
    }
    if !op.grid().same_as(&initial.grid) {
        return Err(Error::Config("initial density and operator use different grids".into()));
    }
    let mut stops: Vec<f64> = schedule
        .times
        .iter()
        .copied()
        .filter(|t| *t > t0 && *t < t_end)
        .collect();
    stops.push(t_end);
    stops.sort_by(|a, b| a.total_cmp(b));
    stops.dedup();

    let grid = initial.grid.clone();
    let mut traj = Trajectory::new();
    let mut state = initial.clone();
    let mut outflux = 0.0;
    let mut clipped = 0.0;
    traj.push(state.clone(), 0.0, 0.0)?;
    let zero = StepStats::default();
    for o in observers.iter_mut() {
        o.observe(t0, &state, &zero);
    }
    if t_end == t0 {
        return Ok(traj);
    }

    let mut dt = policy.dt;
    let mut next = 0;
    while next < stops.len() {
        let target = stops[next];
        let remaining = target - state.time;
        let landing = dt >= remaining * (1.0 - 1e-12);
        let h = if landing { remaining } else { dt };
        let (mut values, mut stats, proposal) = match policy.mode {
            DtMode::Fixed => {
                let (v, s) = guarded_step(op, &state.values, state.time, h, policy.max_shrink)?;
                (v, s, policy.dt)
            }
            DtMode::Adaptive => adaptive_step(op, &state.values, state.time, h, policy)?,
        };
        let accepted_whole = stats.dt == h;
        stats.clipped_mass = clip(&mut values, grid.centers(), grid.widths());
        outflux += stats.outflux;
        clipped += stats.clipped_mass;
        state = NumberDensity {
            grid: grid.clone(),
            values,
            time: if landing && accepted_whole {
                target
            } else {
                state.time + stats.dt
            },
        };
        for o in observers.iter_mut() {
            o.observe(state.time, &state, &stats);
        }
        let at_stop = state.time == target;
        if at_stop || schedule.every_step {
            traj.push(state.clone(), outflux, clipped)?;
        }
        if at_stop {
            next += 1;
        }
        dt = match policy.mode {
            DtMode::Fixed => policy.dt,
            DtMode::Adaptive => proposal.min(policy.dt),
        };
    }
    Ok(traj)
}

/// Step-doubling RK4: compares one step of size `h` with two of size `h/2`,
/// keeps the latter, and proposes the next step size.
fn adaptive_step(
    op: &dyn RateOperator,
    y: &[f64],
    time: f64,
    h: f64,
    policy: &DtPolicy,
) -> Result<(Vec<f64>, StepStats, f64)> {
    let grid = op.grid();
    let widths = grid.widths();
    let weights: Vec<f64> = grid
        .centers()
        .iter()
        .zip(widths)
        .map(|(x, w)| (1.0 + x) * w)
        .collect();
    let prev = l1(y, widths);
    let mut h = h;
    let mut rejections = 0u32;
    loop {
        let full = rk4(op, y, h);
        let cap = if full.stiffness > 0.0 {
            policy.safety * RK4_STABILITY / full.stiffness
        } else {
            f64::INFINITY
        };
        let first = rk4(op, y, 0.5 * h);
        let second = rk4(op, &first.values, 0.5 * h);
        let scale: f64 = y.iter().zip(&weights).map(|(v, w)| v.abs() * w).sum();
        let diff: f64 = full
            .values
            .iter()
            .zip(&second.values)
            .zip(&weights)
            .map(|((a, b), w)| (a - b).abs() * w)
            .sum();
        let err = if scale > 0.0 { diff / scale } else { 0.0 };
        let ok_err = err <= policy.tol && h <= cap * (1.0 + 1e-12);
        let ok_state = admissible(&first.values, widths, prev).is_ok()
            && admissible(&second.values, widths, l1(&first.values, widths).max(0.0)).is_ok();
        if ok_err && ok_state {
            let factor = if err > 0.0 {
                (policy.safety * powf(policy.tol / err, 0.2)).clamp(0.2, 2.0)
            } else {
                2.0
            };
            let proposal = (h * factor).min(cap);
            return Ok((
                second.values,
                StepStats {
                    dt: h,
                    rejections,
                    clipped_mass: 0.0,
                    outflux: first.outflux + second.outflux,
                },
                proposal,
            ));
        }
        if rejections >= policy.max_shrink {
            let min_value = second.values.iter().fold(f64::INFINITY, |m, v| m.min(*v));
            return Err(Error::Stiffness {
                time,
                dt: h,
                rejections,
                min_value,
            });
        }
        rejections += 1;
        h = if !ok_state || !(err.is_finite()) {
            0.5 * h
        } else {
            let shrink = (policy.safety * powf(policy.tol / err, 0.2)).clamp(0.1, 0.5);
            (h * shrink).min(cap)
        };
    }
}
