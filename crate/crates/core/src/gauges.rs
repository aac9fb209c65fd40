//! Convex gauges `Ψ` with concave derivative, built constructively from the
//! tail of the initial data, and checks of the inequalities they satisfy.
//!
//! `Ψ'` is piecewise linear through `(r_j, j + 1)` with `r_0 = 0`, where `r_j`
//! is the smallest tabulated point above `r_{j-1}` whose tail is at most
//! `4^{-j}`. Gaps between breakpoints are forced to be nondecreasing, which is
//! exactly concavity of `Ψ'`. Past the last breakpoint `Ψ'` continues with the
//! last slope, so `Ψ(s)/s → ∞`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Error, Result};
use crate::math::{log_uniform, powf};
use crate::sizedomain::NumberDensity;

/// Number of breakpoints after which construction stops even if the tail has
/// not reached zero.
pub const MAX_BREAKPOINTS: usize = 64;

/// A convex function with `Ψ(0) = 0`.
pub trait Gauge {
    fn psi(&self, s: f64) -> f64;
    fn dpsi(&self, s: f64) -> f64;

    /// `Φ(s) = sΨ'(s) − Ψ(s)`.
    fn phi(&self, s: f64) -> f64 {
        s * self.dpsi(s) - self.psi(s)
    }

    /// Typical argument size, used to centre random checks.
    fn scale_hint(&self) -> f64;
}

/// Tail function `r ↦ T(r)` tabulated at increasing points, nonincreasing and
/// ending at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TailTable {
    pub r: Vec<f64>,
    pub tail: Vec<f64>,
}

impl TailTable {
    pub fn new(r: Vec<f64>, tail: Vec<f64>) -> Result<Self> {
        if r.len() != tail.len() || r.is_empty() {
            return Err(Error::Construction("tail table needs matching, nonempty columns".into()));
        }
        if r.windows(2).any(|w| !(w[1] > w[0])) || r[0] < 0.0 {
            return Err(Error::Construction("tail points must be nonnegative and increasing".into()));
        }
        if tail.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::Construction("tail values must be finite and nonnegative".into()));
        }
        if tail.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-12)) {
            return Err(Error::Construction("tail must be nonincreasing".into()));
        }
        Ok(Self { r, tail })
    }

    /// Tabulates an analytic tail at the given points.
    pub fn from_fn(points: &[f64], f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(points.to_vec(), points.iter().map(|r| f(*r)).collect())
    }

    /// `T(r) = Σ_{x_i ≥ r} x_i ζ_i Δ_i` at the cell edges, followed by `n` with
    /// tail zero. Feeds the size gauge `Ψ₁`.
    pub fn mass_tail(density: &NumberDensity) -> Result<Self> {
        let g = &density.grid;
        let len = g.len();
        let mut tail = vec![0.0; len + 1];
        for i in (0..len).rev() {
            tail[i] = tail[i + 1] + g.centers()[i] * density.values[i] * g.widths()[i];
        }
        let mut r = vec![0.0];
        r.extend_from_slice(g.edges());
        let mut t = vec![tail[0]];
        t.extend_from_slice(&tail);
        Self::new(r, t)
    }

    /// `T(r) = Σ_{h_i > r} h_i Δ_i` with `h_i = x_i^{-σ} ζ_i`, tabulated at the
    /// sorted cell values. Feeds the value gauge `Ψ₂`.
    pub fn value_tail(density: &NumberDensity, sigma: f64) -> Result<Self> {
        let g = &density.grid;
        let mut cells: Vec<(f64, f64)> = g
            .centers()
            .iter()
            .zip(g.widths())
            .zip(&density.values)
            .map(|((x, w), z)| (powf(*x, -sigma) * z, *w))
            .filter(|(h, _)| *h > 0.0)
            .collect();
        cells.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut r = vec![0.0];
        let mut t = vec![cells.iter().map(|(h, w)| h * w).sum::<f64>()];
        // Running tail after removing every cell with h ≤ r.
        let mut remaining = t[0];
        let mut k = 0;
        while k < cells.len() {
            let h = cells[k].0;
            while k < cells.len() && cells[k].0 == h {
                remaining -= cells[k].0 * cells[k].1;
                k += 1;
            }
            r.push(h);
            t.push(if k == cells.len() { 0.0 } else { remaining.max(0.0) });
        }
        Self::new(r, t)
    }

    /// Smallest tabulated index `k > after` with `T(r_k) ≤ target`.
    fn first_below(&self, after: usize, target: f64) -> Option<usize> {
        (after + 1..self.r.len()).find(|&k| self.tail[k] <= target)
    }

    /// Tail at `s` by step interpolation (value at the largest point ≤ s).
    pub fn at(&self, s: f64) -> f64 {
        let k = self.r.partition_point(|r| *r <= s);
        if k == 0 {
            self.tail[0]
        } else {
            self.tail[k - 1]
        }
    }
}

/// Piecewise-quadratic `Ψ` with piecewise-linear concave `Ψ'`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConvexGauge {
    breakpoints: Vec<f64>,
    slopes: Vec<f64>,
    /// `Ψ(r_j)`.
    values: Vec<f64>,
    /// `Σ_j Ψ'(r_{j+1}) (T(r_j) − T(r_{j+1}))`, an upper bound for `∫ Ψ' · tail measure`.
    gamma_bound: f64,
}

impl ConvexGauge {
    /// Builds a gauge from breakpoints and derivative values. Requires
    /// `r_0 = 0`, increasing `r`, nondecreasing `ψ`, and nonincreasing slopes
    /// of `ψ`.
    pub fn from_parts(breakpoints: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 || breakpoints.len() != slopes.len() {
            return Err(Error::Construction("gauge needs at least two breakpoints".into()));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::Construction("first breakpoint must be 0".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Construction("breakpoints must increase".into()));
        }
        if slopes[0] < 0.0 || slopes.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Construction("Ψ' must be nonnegative and nondecreasing".into()));
        }
        let secant: Vec<f64> = (0..breakpoints.len() - 1)
            .map(|j| (slopes[j + 1] - slopes[j]) / (breakpoints[j + 1] - breakpoints[j]))
            .collect();
        if secant.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-12) + 1e-300) {
            return Err(Error::Construction("Ψ' must be concave".into()));
        }
        let mut values = vec![0.0];
        for j in 0..breakpoints.len() - 1 {
            let h = breakpoints[j + 1] - breakpoints[j];
            values.push(values[j] + 0.5 * h * (slopes[j] + slopes[j + 1]));
        }
        Ok(Self {
            breakpoints,
            slopes,
            values,
            gamma_bound: 0.0,
        })
    }

    /// `Ψ(s) = s²`.
    pub fn quadratic() -> Self {
        Self::from_parts(vec![0.0, 1.0], vec![0.0, 2.0]).expect("valid quadratic gauge")
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// `Ψ'(r_j)`.
    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn gamma_bound(&self) -> f64 {
        self.gamma_bound
    }

    fn segment(&self, s: f64) -> usize {
        let last = self.breakpoints.len() - 2;
        let k = self.breakpoints.partition_point(|r| *r <= s);
        k.saturating_sub(1).min(last)
    }

    fn segment_slope(&self, j: usize) -> f64 {
        (self.slopes[j + 1] - self.slopes[j]) / (self.breakpoints[j + 1] - self.breakpoints[j])
    }

    /// `Ψ(r_J)/r_J` at the last stored breakpoint.
    pub fn superlinearity_witness(&self) -> f64 {
        let r = *self.breakpoints.last().unwrap();
        self.psi(r) / r
    }

    /// Rows `(r_j, Ψ(r_j), Ψ'(r_j))` for export.
    pub fn table(&self) -> Vec<(f64, f64, f64)> {
        self.breakpoints
            .iter()
            .zip(&self.values)
            .zip(&self.slopes)
            .map(|((r, v), s)| (*r, *v, *s))
            .collect()
    }
}

impl Gauge for ConvexGauge {
    fn psi(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let j = self.segment(s);
        let d = s - self.breakpoints[j];
        self.values[j] + self.slopes[j] * d + 0.5 * self.segment_slope(j) * d * d
    }

    fn dpsi(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return self.slopes[0];
        }
        let j = self.segment(s);
        self.slopes[j] + self.segment_slope(j) * (s - self.breakpoints[j])
    }

    fn scale_hint(&self) -> f64 {
        self.breakpoints[1]
    }
}

/// Constructs `Ψ` from a tail table: `Ψ'(r_j) = j + 1`, `r_j` the first table
/// point past `r_{j-1}` with tail `≤ 4^{-j}`, pushed right if needed to keep
/// gaps nondecreasing.
pub fn build_gauge_from_tail(tail: &TailTable) -> Result<ConvexGauge> {
    if tail.tail[tail.tail.len() - 1] > 0.0 {
        return Err(Error::Construction(format!(
            "tail does not decay on the tabulated range (last value {:e})",
            tail.tail[tail.tail.len() - 1]
        )));
    }
    if tail.r[0] != 0.0 {
        return Err(Error::Construction("tail table must start at r = 0".into()));
    }
    let mut r = vec![0.0];
    let mut idx = 0usize;
    let mut gap = 0.0f64;
    let mut target = 1.0;
    while r.len() < MAX_BREAKPOINTS {
        target *= 0.25;
        let Some(k) = tail.first_below(idx, target) else {
            break;
        };
        let prev = *r.last().unwrap();
        let mut next = tail.r[k];
        if next - prev < gap {
            next = prev + gap;
        }
        gap = next - prev;
        r.push(next);
        idx = tail.r.partition_point(|x| *x <= next).saturating_sub(1).max(k);
        if tail.at(next) == 0.0 {
            break;
        }
    }
    if r.len() < 2 {
        // Zero data: any valid gauge works.
        r.push(if tail.r.len() > 1 { tail.r[1] } else { 1.0 });
    }
    let slopes: Vec<f64> = (0..r.len()).map(|j| (j + 1) as f64).collect();
    let mut gauge = ConvexGauge::from_parts(r, slopes)?;
    let bp = &gauge.breakpoints;
    let mut bound = 0.0;
    for j in 0..bp.len() {
        let upper = if j + 1 < bp.len() { tail.at(bp[j + 1]) } else { 0.0 };
        let slope_above = (j + 2) as f64;
        bound += slope_above * (tail.at(bp[j]) - upper).max(0.0);
    }
    gauge.gamma_bound = bound;
    Ok(gauge)
}

/// `Ψ` on `[0, λ]`, continued affinely with slope `Ψ'(λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedGauge {
    pub base: ConvexGauge,
    pub lambda: f64,
}

pub fn truncate_gauge(gauge: &ConvexGauge, lambda: f64) -> Result<TruncatedGauge> {
    if !(lambda >= 2.0) {
        return Err(domain(format!("gauge truncation needs λ ≥ 2, got {lambda}")));
    }
    Ok(TruncatedGauge {
        base: gauge.clone(),
        lambda,
    })
}

impl Gauge for TruncatedGauge {
    fn psi(&self, s: f64) -> f64 {
        if s <= self.lambda {
            self.base.psi(s)
        } else {
            self.base.dpsi(self.lambda) * (s - self.lambda) + self.base.psi(self.lambda)
        }
    }

    fn dpsi(&self, s: f64) -> f64 {
        self.base.dpsi(s.min(self.lambda))
    }

    fn scale_hint(&self) -> f64 {
        self.base.scale_hint().min(self.lambda)
    }
}

/// Counts of randomized inequality checks.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InequalityReport {
    pub samples: usize,
    /// Violations of `Ψ(z) ≤ zΨ'(z) ≤ 2Ψ(z)`.
    pub violations_derivative: usize,
    /// Violations of `z₁Ψ'(z₂) ≤ Ψ(z₁) + Ψ(z₂)`.
    pub violations_young: usize,
    /// Violations of the two-sided superadditivity bound.
    pub violations_superadditive: usize,
    /// Largest relative excess over any bound (≤ 0 when everything holds).
    pub worst_excess: f64,
}

impl InequalityReport {
    pub fn passed(&self) -> bool {
        self.violations_derivative + self.violations_young + self.violations_superadditive == 0
    }
}

/// Checks the three gauge inequalities at `samples` log-uniform pairs spread
/// over six decades around the gauge's scale.
pub fn check_inequalities(gauge: &dyn Gauge, samples: usize, seed: u64) -> Result<InequalityReport> {
    if samples == 0 {
        return Err(domain("samples must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centre = gauge.scale_hint().max(1e-300);
    let (lo, hi) = (centre * 1e-3, centre * 1e3);
    let mut rep = InequalityReport {
        samples,
        violations_derivative: 0,
        violations_young: 0,
        violations_superadditive: 0,
        worst_excess: f64::NEG_INFINITY,
    };
    let tol = 1e-10;
    let record = |lhs: f64, rhs: f64, counter: &mut usize, worst: &mut f64| {
        let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
        let excess = (lhs - rhs) / scale;
        *worst = worst.max(excess);
        if excess > tol {
            *counter += 1;
        }
    };
    for _ in 0..samples {
        let z1 = log_uniform(lo, hi, rng.gen());
        let z2 = log_uniform(lo, hi, rng.gen());
        let (p1, p2) = (gauge.psi(z1), gauge.psi(z2));
        let d1 = z1 * gauge.dpsi(z1);
        let mut worst = rep.worst_excess;
        record(p1, d1, &mut rep.violations_derivative, &mut worst);
        record(d1, 2.0 * p1, &mut rep.violations_derivative, &mut worst);
        record(z1 * gauge.dpsi(z2), p1 + p2, &mut rep.violations_young, &mut worst);
        let gap = gauge.psi(z1 + z2) - p1 - p2;
        let upper = 2.0 * (z1 * p2 + z2 * p1) / (z1 + z2);
        // The lower bound compares against 0, so scale by the summands.
        let scale = (p1 + p2).max(f64::MIN_POSITIVE);
        let lower_excess = -gap / scale;
        worst = worst.max(lower_excess);
        if lower_excess > tol {
            rep.violations_superadditive += 1;
        }
        record(gap, upper, &mut rep.violations_superadditive, &mut worst);
        rep.worst_excess = worst;
    }
    Ok(rep)
}
