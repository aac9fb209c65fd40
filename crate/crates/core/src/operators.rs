//! Discrete right-hand sides on a [`SizeGrid`].
//!
//! All operators work with particle numbers `N_i = ζ_i Δ_i` and a kernel
//! matrix sampled at cell centers. A collision of a larger particle `x_i` with a
//! smaller `x_j` (`j ≤ i`) happens at rate `Λ_ij N_i N_j` (half that on the
//! diagonal). In the ε-family each event removes `1/ε` particles from cell `i`
//! and one from cell `j`, and puts `1/ε` particles at `y = x_i + ε x_j`. The
//! deposit is split between the two centers bracketing `y` so that both number
//! and mass are preserved; deposits above the last center go to a ghost cell
//! whose mass is reported as outflux.
//!
//! When `y` lands in cell `i` itself the gain and loss of cell `i` are
//! combined before evaluation. The net loss is `x_j / (x_{i+1} - x_i)` per
//! event, free of `1/ε`, which keeps small-ε systems non-stiff and makes the
//! scheme reduce to the upwind OHS discretization once `ε` is below the grid
//! ratio minus one.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{config, domain, Result};
use crate::kernels::TruncatedKernel;
use crate::math::{floor, ln};
use crate::sizedomain::{NumberDensity, SizeGrid};

/// Which member of the equation family an operator discretizes.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "model", rename_all = "snake_case"))]
pub enum Model {
    /// Smoluchowski coagulation.
    Sce,
    /// Oort-Hulst-Safronov transport plus death.
    Ohs,
    /// The ε-family with `0 < ε ≤ 1`.
    Generalized { eps: f64 },
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Sce => "sce",
            Model::Ohs => "ohs",
            Model::Generalized { .. } => "generalized",
        }
    }

    pub fn eps(&self) -> Option<f64> {
        match self {
            Model::Generalized { eps } => Some(*eps),
            _ => None,
        }
    }
}

/// `ε` together with the truncation parameter it is used with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsParams {
    pub eps: f64,
    pub n: f64,
}

impl EpsParams {
    pub fn new(eps: f64, n: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(domain(format!("ε must lie in (0, 1], got {eps}")));
        }
        if !(n > 1.0) {
            return Err(domain(format!("truncation parameter must exceed 1, got {n}")));
        }
        Ok(Self { eps, n })
    }
}

/// Per-cell `dζ/dt` together with the mass leaving through the upper boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct RateField {
    pub grid: Arc<SizeGrid>,
    pub values: Vec<f64>,
    /// Mass per unit time routed past `n`.
    pub outflux_rate: f64,
}

/// Side information from one operator evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RateInfo {
    /// Mass per unit time routed past `n`.
    pub outflux_rate: f64,
    /// Largest per-particle loss rate over all cells, an estimate of the
    /// fastest decay mode.
    pub stiffness: f64,
}

/// A right-hand side `ζ ↦ dζ/dt` on a fixed grid.
pub trait RateOperator {
    fn grid(&self) -> &Arc<SizeGrid>;

    fn model(&self) -> Model;

    /// Writes `dζ/dt` for cell averages `values` into `out`.
    fn eval_into(&self, values: &[f64], out: &mut [f64]) -> RateInfo;

    fn eval(&self, density: &NumberDensity) -> RateField {
        let mut out = vec![0.0; density.values.len()];
        let info = self.eval_into(&density.values, &mut out);
        RateField {
            grid: self.grid().clone(),
            values: out,
            outflux_rate: info.outflux_rate,
        }
    }
}

/// Where the `1/ε` particles of one event go.
#[derive(Debug, Clone, Copy)]
struct Deposit {
    /// Lower bracketing center; `len` is the ghost cell.
    lo: usize,
    /// Particles placed at `lo` per event (already scaled by `1/ε`).
    to_lo: f64,
    /// Particles placed at `lo + 1` per event.
    to_hi: f64,
}

/// Discretized operator for one model on one grid with one kernel.
#[derive(Debug, Clone)]
pub struct CoagulationOperator {
    grid: Arc<SizeGrid>,
    kernel: TruncatedKernel,
    model: Model,
    /// Row-major kernel matrix at cell centers.
    lambda: Vec<f64>,
    /// Deposit table for pairs `j ≤ i`, triangular layout.
    deposits: Vec<Deposit>,
    /// `1/ε`, or 1 for the SCE and OHS models.
    inv_eps: f64,
    /// Centers followed by the ghost center.
    xs: Vec<f64>,
}

#[inline]
fn tri(i: usize, j: usize) -> usize {
    i * (i + 1) / 2 + j
}

impl CoagulationOperator {
    pub fn new(grid: Arc<SizeGrid>, kernel: &TruncatedKernel, model: Model) -> Result<Self> {
        if (grid.n() - kernel.n).abs() > 1e-12 * grid.n() {
            return Err(config(format!(
                "grid spans (1/{}, {}) but the kernel is truncated at n = {}",
                grid.n(),
                grid.n(),
                kernel.n
            )));
        }
        let eps = match model {
            Model::Generalized { eps } => {
                EpsParams::new(eps, grid.n())?;
                eps
            }
            _ => 1.0,
        };
        let len = grid.len();
        let centers = grid.centers();
        let mut lambda = vec![0.0; len * len];
        for i in 0..len {
            for j in 0..=i {
                let v = kernel.eval_unchecked(centers[i], centers[j]);
                lambda[i * len + j] = v;
                lambda[j * len + i] = v;
            }
        }
        let mut xs = centers.to_vec();
        xs.push(grid.ghost_center());
        let log_ratio = ln(grid.ratio());
        let mut deposits = Vec::new();
        if !matches!(model, Model::Ohs) {
            deposits.reserve(len * (len + 1) / 2);
            for i in 0..len {
                for j in 0..=i {
                    deposits.push(deposit(&xs, i, j, eps, log_ratio));
                }
            }
        }
        Ok(Self {
            grid,
            kernel: kernel.clone(),
            model,
            lambda,
            deposits,
            inv_eps: 1.0 / eps,
            xs,
        })
    }

    pub fn kernel(&self) -> &TruncatedKernel {
        &self.kernel
    }

    /// `Λ(x_i, x_j)`.
    pub fn lambda(&self, i: usize, j: usize) -> f64 {
        self.lambda[i * self.grid.len() + j]
    }

    /// OHS growth velocity `Σ_{j<i} x_j Λ_ij ζ_j Δ_j` of cell `i`.
    pub fn velocity(&self, values: &[f64], i: usize) -> f64 {
        let g = &self.grid;
        let row = &self.lambda[i * g.len()..(i + 1) * g.len()];
        (0..i)
            .map(|j| g.centers()[j] * row[j] * values[j] * g.widths()[j])
            .sum()
    }

    fn eval_generalized(&self, n: &[f64], dn: &mut [f64], loss: &mut [f64]) {
        let len = n.len();
        for i in 0..len {
            let ni = n[i];
            if ni == 0.0 {
                continue;
            }
            let row = &self.lambda[i * len..];
            let base = tri(i, 0);
            for j in 0..=i {
                let nj = n[j];
                if nj == 0.0 {
                    continue;
                }
                let mut u = row[j] * ni * nj;
                if j == i {
                    u *= 0.5;
                }
                let d = self.deposits[base + j];
                let self_loss = if d.lo == i { d.to_hi } else { self.inv_eps };
                dn[j] -= u;
                loss[j] += u;
                dn[i] -= u * self_loss;
                loss[i] += u * self_loss;
                if d.lo != i {
                    dn[d.lo] += u * d.to_lo;
                }
                dn[d.lo + 1] += u * d.to_hi;
            }
        }
    }

    fn eval_sce(&self, n: &[f64], dn: &mut [f64], loss: &mut [f64]) {
        let len = n.len();
        for i in 0..len {
            let ni = n[i];
            if ni == 0.0 {
                continue;
            }
            let row = &self.lambda[i * len..(i + 1) * len];
            let base = tri(i, 0);
            for j in 0..=i {
                let nj = n[j];
                if nj == 0.0 {
                    continue;
                }
                let mut u = row[j] * ni * nj;
                if j == i {
                    u *= 0.5;
                }
                let d = self.deposits[base + j];
                dn[d.lo] += u * d.to_lo;
                dn[d.lo + 1] += u * d.to_hi;
            }
            let death: f64 = row.iter().zip(n).map(|(l, nj)| l * nj).sum::<f64>() * ni;
            dn[i] -= death;
            loss[i] += death;
        }
    }

    fn eval_ohs(&self, n: &[f64], dn: &mut [f64], loss: &mut [f64]) {
        let len = n.len();
        let xs = &self.xs;
        for i in 0..len {
            let ni = n[i];
            if ni == 0.0 {
                continue;
            }
            let row = &self.lambda[i * len..(i + 1) * len];
            let mut v = 0.5 * xs[i] * row[i] * ni;
            for j in 0..i {
                v += xs[j] * row[j] * n[j];
            }
            let mut death = 0.5 * row[i] * ni;
            for j in i + 1..len {
                death += row[j] * n[j];
            }
            let flux = ni * v / (xs[i + 1] - xs[i]);
            let out = flux + ni * death;
            dn[i] -= out;
            loss[i] += out;
            dn[i + 1] += flux;
        }
    }
}

/// Brackets `y = x_i + ε x_j` between consecutive entries of `xs` (centers
/// plus ghost) and splits `1/ε` particles so number and mass are exact.
fn deposit(xs: &[f64], i: usize, j: usize, eps: f64, log_ratio: f64) -> Deposit {
    let ghost = xs.len() - 1;
    let shift = eps * xs[j];
    let y = xs[i] + shift;
    let inv_eps = 1.0 / eps;
    if y >= xs[ghost] {
        // Past the ghost center: only the mass matters, so park it in the ghost
        // slot with the equivalent particle count.
        return Deposit {
            lo: ghost,
            to_lo: inv_eps * y / xs[ghost],
            to_hi: 0.0,
        };
    }
    let mut lo = (i + floor(ln(y / xs[i]) / log_ratio) as usize).min(ghost - 1);
    while lo + 1 < ghost && xs[lo + 1] <= y {
        lo += 1;
    }
    while lo > i && xs[lo] > y {
        lo -= 1;
    }
    let gap = xs[lo + 1] - xs[lo];
    // y − x_lo computed without cancellation when lo = i.
    let above = if lo == i { shift } else { y - xs[lo] };
    Deposit {
        lo,
        to_lo: inv_eps * (xs[lo + 1] - y) / gap,
        to_hi: inv_eps * above / gap,
    }
}

impl RateOperator for CoagulationOperator {
    fn grid(&self) -> &Arc<SizeGrid> {
        &self.grid
    }

    fn model(&self) -> Model {
        self.model
    }

    fn eval_into(&self, values: &[f64], out: &mut [f64]) -> RateInfo {
        let len = self.grid.len();
        debug_assert_eq!(values.len(), len);
        debug_assert_eq!(out.len(), len);
        let widths = self.grid.widths();
        let n: Vec<f64> = values.iter().zip(widths).map(|(z, d)| z * d).collect();
        // Two extra slots: the ghost cell and a sink for zero-weight writes.
        let mut dn = vec![0.0; len + 2];
        let mut loss = vec![0.0; len];
        match self.model {
            Model::Generalized { .. } => self.eval_generalized(&n, &mut dn, &mut loss),
            Model::Sce => self.eval_sce(&n, &mut dn, &mut loss),
            Model::Ohs => self.eval_ohs(&n, &mut dn, &mut loss),
        }
        let mut stiffness: f64 = 0.0;
        for i in 0..len {
            out[i] = dn[i] / widths[i];
            if n[i] > 0.0 {
                stiffness = stiffness.max(loss[i] / n[i]);
            }
        }
        RateInfo {
            outflux_rate: dn[len] * self.xs[len],
            stiffness,
        }
    }
}

fn check_density(density: &NumberDensity, kernel: &TruncatedKernel) -> Result<()> {
    if (density.grid.n() - kernel.n).abs() > 1e-12 * kernel.n {
        return Err(config(format!(
            "density grid has n = {} but kernel has n = {}",
            density.grid.n(),
            kernel.n
        )));
    }
    Ok(())
}

/// `Q_{ε,n}(ζ)` for the ε-family.
pub fn generalized_rhs(
    density: &NumberDensity,
    kernel: &TruncatedKernel,
    params: EpsParams,
) -> Result<RateField> {
    check_density(density, kernel)?;
    if (params.n - kernel.n).abs() > 1e-12 * kernel.n {
        return Err(config(format!(
            "parameters use n = {} but kernel has n = {}",
            params.n, kernel.n
        )));
    }
    let op = CoagulationOperator::new(
        density.grid.clone(),
        kernel,
        Model::Generalized { eps: params.eps },
    )?;
    Ok(op.eval(density))
}

/// Smoluchowski right-hand side in gain/loss form.
pub fn sce_rhs(density: &NumberDensity, kernel: &TruncatedKernel) -> Result<RateField> {
    check_density(density, kernel)?;
    let op = CoagulationOperator::new(density.grid.clone(), kernel, Model::Sce)?;
    Ok(op.eval(density))
}

/// Upwind transport plus death for the OHS model.
pub fn ohs_rhs(density: &NumberDensity, kernel: &TruncatedKernel) -> Result<RateField> {
    check_density(density, kernel)?;
    let op = CoagulationOperator::new(density.grid.clone(), kernel, Model::Ohs)?;
    Ok(op.eval(density))
}

/// OHS velocity `Σ_{j<i} x_j Λ(x_i, x_j) ζ_j Δ_j` of cell `i`.
pub fn ohs_velocity(density: &NumberDensity, kernel: &TruncatedKernel, i: usize) -> Result<f64> {
    check_density(density, kernel)?;
    let g = &density.grid;
    if i >= g.len() {
        return Err(domain(format!("cell index {i} out of range for {} cells", g.len())));
    }
    let xi = g.centers()[i];
    Ok((0..i)
        .map(|j| {
            let xj = g.centers()[j];
            xj * kernel.eval_unchecked(xi, xj) * density.values[j] * g.widths()[j]
        })
        .sum())
}

/// `Σ_i ω(x_i) q_i Δ_i`.
pub fn weak_action(rhs: &RateField, omega: &[f64]) -> Result<f64> {
    weak_action_values(&rhs.grid, &rhs.values, omega)
}

pub fn weak_action_values(grid: &SizeGrid, values: &[f64], omega: &[f64]) -> Result<f64> {
    if omega.len() != grid.len() || values.len() != grid.len() {
        return Err(config(format!(
            "test function has {} samples, rate field {} values, grid {} cells",
            omega.len(),
            values.len(),
            grid.len()
        )));
    }
    Ok(values
        .iter()
        .zip(omega)
        .zip(grid.widths())
        .map(|((q, w), d)| q * w * d)
        .sum())
}
