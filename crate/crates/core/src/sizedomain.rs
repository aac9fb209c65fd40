//! The truncated size axis `(1/n, n)`: geometric grids, cell-averaged number
//! densities, initial profiles and weighted norms.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{domain, Error, Result};
use crate::math::{ceil, exp, ln, log10, powf, sqrt};
use crate::quadrature::GaussLegendre;

/// Nodes per cell for initial-data cell averages.
pub const INITIAL_QUADRATURE_ORDER: usize = 16;

/// Geometric partition of `[1/n, n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeGrid {
    n: f64,
    cells_per_decade: usize,
    edges: Vec<f64>,
    centers: Vec<f64>,
    widths: Vec<f64>,
    ratio: f64,
}

/// Builds a geometric grid on `[1/n, n]` with about `cells_per_decade` cells
/// per factor of ten. The cell count is rounded up so every decade gets at
/// least the requested resolution, and both endpoints are exact.
pub fn make_grid(n: f64, cells_per_decade: usize) -> Result<SizeGrid> {
    if !(n > 1.0 && n.is_finite()) {
        return Err(domain(format!("grid parameter n must exceed 1, got {n}")));
    }
    if cells_per_decade < 4 {
        return Err(domain(format!(
            "cells_per_decade must be at least 4, got {cells_per_decade}"
        )));
    }
    let cells = ceil(2.0 * log10(n) * cells_per_decade as f64 - 1e-9).max(1.0) as usize;
    let lo = 1.0 / n;
    let step = 2.0 * ln(n) / cells as f64;
    let mut edges = Vec::with_capacity(cells + 1);
    edges.push(lo);
    for k in 1..cells {
        edges.push(exp(-ln(n) + step * k as f64));
    }
    edges.push(n);
    let centers = edges.windows(2).map(|w| sqrt(w[0] * w[1])).collect();
    let widths = edges.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(SizeGrid {
        n,
        cells_per_decade,
        edges,
        centers,
        widths,
        ratio: exp(step),
    })
}

impl SizeGrid {
    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn cells_per_decade(&self) -> usize {
        self.cells_per_decade
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    /// Common ratio of consecutive edges (and centers).
    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// Center of the virtual cell just above `n`, where out-of-range deposits
    /// are accounted.
    pub fn ghost_center(&self) -> f64 {
        self.centers[self.len() - 1] * self.ratio
    }

    /// Index of the cell `[x_{i-1/2}, x_{i+1/2})` containing `mu`.
    pub fn cell_of(&self, mu: f64) -> Option<usize> {
        if !(mu >= self.edges[0] && mu < self.edges[self.len()]) {
            return None;
        }
        let i = self.edges.partition_point(|e| *e <= mu) - 1;
        Some(i.min(self.len() - 1))
    }

    /// Same cell layout (bitwise equal edges).
    pub fn same_as(&self, other: &SizeGrid) -> bool {
        core::ptr::eq(self, other) || self.edges == other.edges
    }
}

/// Density weights for moments and norms.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Weight {
    One,
    Mass,
    /// `μ^{-σ}`.
    NegSigma(f64),
    /// `μ^{-2σ}`.
    NegTwoSigma(f64),
    /// `μ + μ^{-2σ}`.
    YNorm(f64),
    /// `μ^{-σ} + μ`.
    Distance(f64),
}

impl Weight {
    #[inline]
    pub fn at(&self, mu: f64) -> f64 {
        match *self {
            Weight::One => 1.0,
            Weight::Mass => mu,
            Weight::NegSigma(s) => powf(mu, -s),
            Weight::NegTwoSigma(s) => powf(mu, -2.0 * s),
            Weight::YNorm(s) => mu + powf(mu, -2.0 * s),
            Weight::Distance(s) => mu + powf(mu, -s),
        }
    }

    /// Weight sampled at the centers of `grid`.
    pub fn sample(&self, grid: &SizeGrid) -> Vec<f64> {
        grid.centers().iter().map(|x| self.at(*x)).collect()
    }
}

/// Cell averages of `ζ(·, t)` on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NumberDensity {
    pub grid: Arc<SizeGrid>,
    pub values: Vec<f64>,
    pub time: f64,
}

impl NumberDensity {
    pub fn zeros(grid: Arc<SizeGrid>) -> Self {
        let values = vec![0.0; grid.len()];
        Self {
            grid,
            values,
            time: 0.0,
        }
    }

    pub fn from_values(grid: Arc<SizeGrid>, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "density has {} values for a {}-cell grid",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(domain("density values must be finite and nonnegative"));
        }
        Ok(Self { grid, values, time })
    }

    /// `Σ_i w(x_i) ζ_i Δ_i`.
    pub fn weighted_norm(&self, weight: Weight) -> f64 {
        weighted_norm(self, weight)
    }

    /// `Σ_i x_i^p ζ_i Δ_i`.
    pub fn moment(&self, p: f64) -> f64 {
        let g = &self.grid;
        g.centers()
            .iter()
            .zip(g.widths())
            .zip(&self.values)
            .map(|((x, d), z)| powf(*x, p) * z * d)
            .sum()
    }

    /// Multiplies every cell by `factor`.
    pub fn scaled(mut self, factor: f64) -> Self {
        for v in &mut self.values {
            *v *= factor;
        }
        self
    }

    /// Particle numbers `N_i = ζ_i Δ_i`.
    pub fn numbers(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(self.grid.widths())
            .map(|(z, d)| z * d)
            .collect()
    }
}

/// `Σ_i w(x_i) ζ_i Δ_i` for `w` in the [`Weight`] catalogue.
pub fn weighted_norm(density: &NumberDensity, weight: Weight) -> f64 {
    let g = &density.grid;
    g.centers()
        .iter()
        .zip(g.widths())
        .zip(&density.values)
        .map(|((x, d), z)| weight.at(*x) * z * d)
        .sum()
}

/// `Σ_i w(x_i) |a_i − b_i| Δ_i` for densities on the same grid.
pub fn weighted_distance(a: &NumberDensity, b: &NumberDensity, weight: Weight) -> Result<f64> {
    if !a.grid.same_as(&b.grid) {
        return Err(Error::Config("densities live on different grids".into()));
    }
    let g = &a.grid;
    Ok(g.centers()
        .iter()
        .zip(g.widths())
        .zip(a.values.iter().zip(&b.values))
        .map(|((x, d), (u, v))| weight.at(*x) * (u - v).abs() * d)
        .sum())
}

/// Initial size distributions.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "profile", rename_all = "snake_case"))]
pub enum InitialProfile {
    /// `e^{-μ}`.
    Exponential,
    /// `μ^{-a} e^{-μ}`.
    SingularPower { a: f64 },
    /// Mass `mass` concentrated in the cell containing `mu0`.
    Monodisperse { mu0: f64, mass: f64 },
    Zero,
}

impl InitialProfile {
    /// Pointwise profile value, `None` for the monodisperse atom.
    pub fn density(&self, mu: f64) -> Option<f64> {
        match *self {
            InitialProfile::Exponential => Some(exp(-mu)),
            InitialProfile::SingularPower { a } => Some(powf(mu, -a) * exp(-mu)),
            InitialProfile::Monodisperse { .. } => None,
            InitialProfile::Zero => Some(0.0),
        }
    }

    /// Rejects data outside `𝒴 = L¹((μ + μ^{-2σ}) dμ)`.
    pub fn validate(&self, sigma: f64) -> Result<()> {
        match *self {
            InitialProfile::SingularPower { a } => {
                if !a.is_finite() || a < 0.0 {
                    return Err(domain(format!("singular power exponent must be ≥ 0, got {a}")));
                }
                if a + 2.0 * sigma >= 1.0 {
                    return Err(Error::InitialDataNotInY { a, sigma });
                }
            }
            InitialProfile::Monodisperse { mu0, mass } => {
                if !(mu0 > 0.0 && mass >= 0.0 && mass.is_finite()) {
                    return Err(domain(format!(
                        "monodisperse data needs mu0 > 0 and mass ≥ 0, got ({mu0}, {mass})"
                    )));
                }
            }
            InitialProfile::Exponential | InitialProfile::Zero => {}
        }
        Ok(())
    }
}

/// Cell averages of `profile` by 16-point Gauss–Legendre quadrature in `ln μ`
/// on each cell. Monodisperse data put its mass into one cell so that the
/// midpoint mass moment is exactly `mass`.
pub fn sample_initial(
    profile: &InitialProfile,
    grid: Arc<SizeGrid>,
    sigma: f64,
) -> Result<NumberDensity> {
    profile.validate(sigma)?;
    let mut values = vec![0.0; grid.len()];
    match *profile {
        InitialProfile::Monodisperse { mu0, mass } => {
            let i = grid.cell_of(mu0).ok_or_else(|| {
                domain(format!(
                    "monodisperse size {mu0} outside [{}, {})",
                    1.0 / grid.n(),
                    grid.n()
                ))
            })?;
            values[i] = mass / (grid.centers()[i] * grid.widths()[i]);
        }
        InitialProfile::Zero => {}
        _ => {
            let rule = GaussLegendre::new(INITIAL_QUADRATURE_ORDER);
            let edges = grid.edges();
            for (i, v) in values.iter_mut().enumerate() {
                let integral = rule.integrate_log(edges[i], edges[i + 1], |mu| {
                    profile.density(mu).unwrap_or(0.0)
                });
                *v = (integral / grid.widths()[i]).max(0.0);
            }
        }
    }
    Ok(NumberDensity {
        grid,
        values,
        time: 0.0,
    })
}

/// Cell averages of `f` over the cells of `grid`.
pub fn cell_averages(grid: &SizeGrid, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let rule = GaussLegendre::new(INITIAL_QUADRATURE_ORDER);
    let edges = grid.edges();
    (0..grid.len())
        .map(|i| rule.integrate_log(edges[i], edges[i + 1], &f) / grid.widths()[i])
        .collect()
}

/// Conservative transfer onto `target`, treating `ζ` as piecewise constant on
/// the source cells. Number is preserved on the overlap of the two domains.
pub fn project(density: &NumberDensity, target: Arc<SizeGrid>) -> NumberDensity {
    let src = &density.grid;
    let se = src.edges();
    let te = target.edges();
    let mut values = vec![0.0; target.len()];
    let (mut i, mut j) = (0, 0);
    while i < src.len() && j < target.len() {
        let lo = se[i].max(te[j]);
        let hi = se[i + 1].min(te[j + 1]);
        if hi > lo {
            values[j] += density.values[i] * (hi - lo);
        }
        if se[i + 1] <= te[j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }
    for (v, w) in values.iter_mut().zip(target.widths()) {
        *v /= w;
    }
    NumberDensity {
        grid: target,
        values,
        time: density.time,
    }
}

/// Snapshots of one run together with the boundary bookkeeping.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub snapshots: Vec<NumberDensity>,
    /// Cumulative mass routed past `n` up to each snapshot.
    pub outflux_ledger: Vec<f64>,
    /// Cumulative mass removed by negativity clipping up to each snapshot.
    pub clip_ledger: Vec<f64>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, snapshot: NumberDensity, outflux: f64, clipped: f64) -> Result<()> {
        if let Some(last) = self.snapshots.last() {
            if !(snapshot.time > last.time) {
                return Err(Error::Config(format!(
                    "snapshot time {} does not follow {}",
                    snapshot.time, last.time
                )));
            }
        }
        self.snapshots.push(snapshot);
        self.outflux_ledger.push(outflux);
        self.clip_ledger.push(clipped);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    pub fn first(&self) -> Option<&NumberDensity> {
        self.snapshots.first()
    }

    pub fn last(&self) -> Option<&NumberDensity> {
        self.snapshots.last()
    }

    /// Snapshot whose time is within `tol` of `t`.
    pub fn at_time(&self, t: f64, tol: f64) -> Option<(usize, &NumberDensity)> {
        self.snapshots
            .iter()
            .enumerate()
            .find(|(_, s)| (s.time - t).abs() <= tol)
    }
}
