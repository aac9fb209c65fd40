//! Moments, a-priori bound checks, test-function identities, weak-form and
//! flux-identity residuals along trajectories.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{config, domain, Result};
use crate::gauges::Gauge;
use crate::math::{exp, powf};
use crate::operators::{weak_action_values, CoagulationOperator, RateOperator};
use crate::sizedomain::{NumberDensity, Trajectory, Weight};
use crate::testfn::TestFunction;

/// Relative slack for bound verdicts and monotonicity checks.
pub const BOUND_SLACK: f64 = 1e-10;

/// One row of the moment table.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MomentRow {
    pub t: f64,
    pub m_neg2sigma: f64,
    pub m_negsigma: f64,
    pub m0: f64,
    pub m1: f64,
    /// `∫ Ψ₁(μ) ζ dμ`, NaN without a size gauge.
    pub psi1: f64,
    /// `∫ Ψ₂(μ^{-σ} ζ) dμ`, NaN without a value gauge.
    pub psi2int: f64,
}

/// `∫ Ψ(μ) ζ dμ` by the midpoint rule.
pub fn psi_moment(density: &NumberDensity, gauge: &dyn Gauge) -> f64 {
    let g = &density.grid;
    g.centers()
        .iter()
        .zip(g.widths())
        .zip(&density.values)
        .map(|((x, w), z)| gauge.psi(*x) * z * w)
        .sum()
}

/// `∫ Ψ(μ^{-σ} ζ) dμ` by the midpoint rule.
pub fn psi_integral(density: &NumberDensity, gauge: &dyn Gauge, sigma: f64) -> f64 {
    let g = &density.grid;
    g.centers()
        .iter()
        .zip(g.widths())
        .zip(&density.values)
        .map(|((x, w), z)| gauge.psi(powf(*x, -sigma) * z) * w)
        .sum()
}

pub fn moment_row(
    density: &NumberDensity,
    sigma: f64,
    gauge1: Option<&dyn Gauge>,
    gauge2: Option<&dyn Gauge>,
) -> MomentRow {
    MomentRow {
        t: density.time,
        m_neg2sigma: density.weighted_norm(Weight::NegTwoSigma(sigma)),
        m_negsigma: density.weighted_norm(Weight::NegSigma(sigma)),
        m0: density.weighted_norm(Weight::One),
        m1: density.weighted_norm(Weight::Mass),
        psi1: gauge1.map_or(f64::NAN, |g| psi_moment(density, g)),
        psi2int: gauge2.map_or(f64::NAN, |g| psi_integral(density, g, sigma)),
    }
}

pub fn moment_table(
    traj: &Trajectory,
    sigma: f64,
    gauge1: Option<&dyn Gauge>,
    gauge2: Option<&dyn Gauge>,
) -> Vec<MomentRow> {
    traj.snapshots
        .iter()
        .map(|s| moment_row(s, sigma, gauge1, gauge2))
        .collect()
}

/// Outcome of comparing a trajectory functional with an a-priori bound.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Verdict {
    pub name: String,
    pub bound: f64,
    /// Largest value attained along the trajectory.
    pub attained: f64,
    /// Time at which `attained` occurs.
    pub at_time: f64,
    /// `bound − attained`.
    pub margin: f64,
    pub passed: bool,
}

impl Verdict {
    /// Verdict for the largest value of `series` (pairs `(t, value)`) against `bound`.
    pub fn from_series(name: &str, bound: f64, series: impl Iterator<Item = (f64, f64)>) -> Self {
        let (mut attained, mut at_time) = (f64::NEG_INFINITY, 0.0);
        for (t, v) in series {
            if v > attained || v.is_nan() {
                attained = v;
                at_time = t;
            }
        }
        let margin = bound - attained;
        Self {
            name: name.into(),
            bound,
            attained,
            at_time,
            margin,
            passed: margin >= -BOUND_SLACK * bound.abs() && margin.is_finite(),
        }
    }
}

/// `Θ = ∫ (μ^{-2σ} + μ) ζ^{in} dμ`.
pub fn theta(zeta_in: &NumberDensity, sigma: f64) -> f64 {
    zeta_in.weighted_norm(Weight::YNorm(sigma))
}

/// `sup_t ∫ (μ^{-2σ} + μ) ζ(t) dμ ≤ Θ`.
pub fn theta_bound_check(traj: &Trajectory, zeta_in: &NumberDensity, sigma: f64) -> Verdict {
    let bound = theta(zeta_in, sigma);
    Verdict::from_series(
        "theta",
        bound,
        traj.snapshots
            .iter()
            .map(|s| (s.time, s.weighted_norm(Weight::YNorm(sigma)))),
    )
}

/// `sup_t ∫ Ψ₁(μ) ζ dμ ≤ Θ₂(T) = (Γ₁ + 6kTΨ₁(1)Θ²) exp(6kTΘ)`.
pub fn psi1_moment_check(
    traj: &Trajectory,
    zeta_in: &NumberDensity,
    gauge1: &dyn Gauge,
    k: f64,
    horizon: f64,
    sigma: f64,
) -> Verdict {
    let th = theta(zeta_in, sigma);
    let gamma1 = psi_moment(zeta_in, gauge1);
    let bound = (gamma1 + 6.0 * k * horizon * gauge1.psi(1.0) * th * th) * exp(6.0 * horizon * k * th);
    Verdict::from_series(
        "psi1_moment",
        bound,
        traj.snapshots.iter().map(|s| (s.time, psi_moment(s, gauge1))),
    )
}

/// Uniform-integrability verdict with both candidate growth constants.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntegrabilityVerdict {
    pub verdict: Verdict,
    pub gamma2: f64,
    /// `Γ₂ exp(kTΘ)`.
    pub bound_k: f64,
    /// `Γ₂ exp(ηTΘ)`.
    pub bound_eta: f64,
}

/// `sup_t ∫ Ψ₂(μ^{-σ} ζ) dμ ≤ Γ₂ exp(max(k, η) T Θ)`.
pub fn uniform_integrability_check(
    traj: &Trajectory,
    zeta_in: &NumberDensity,
    gauge2: &dyn Gauge,
    k: f64,
    eta: f64,
    horizon: f64,
    sigma: f64,
) -> IntegrabilityVerdict {
    let th = theta(zeta_in, sigma);
    let gamma2 = psi_integral(zeta_in, gauge2, sigma);
    let bound_k = gamma2 * exp(k * horizon * th);
    let bound_eta = gamma2 * exp(eta * horizon * th);
    let verdict = Verdict::from_series(
        "psi2_integral",
        bound_k.max(bound_eta),
        traj.snapshots
            .iter()
            .map(|s| (s.time, psi_integral(s, gauge2, sigma))),
    );
    IntegrabilityVerdict {
        verdict,
        gamma2,
        bound_k,
        bound_eta,
    }
}

/// Largest snapshot-to-snapshot increase of `M_{-2σ}` and `M₁`, relative to
/// their initial values. Nonpositive means both are nonincreasing.
pub fn moment_monotonicity(traj: &Trajectory, sigma: f64) -> (f64, f64) {
    let worst = |w: Weight| {
        let series: Vec<f64> = traj.snapshots.iter().map(|s| s.weighted_norm(w)).collect();
        let scale = series.first().copied().unwrap_or(0.0).abs().max(f64::MIN_POSITIVE);
        series
            .windows(2)
            .map(|p| (p[1] - p[0]) / scale)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    (worst(Weight::NegTwoSigma(sigma)), worst(Weight::Mass))
}

/// Which collision test function to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "variant", rename_all = "snake_case"))]
pub enum IdentityVariant {
    /// `τ ω'(ν) − ω(τ)` (transport form).
    Omega1,
    /// `ω(ν+τ) − ω(ν) − ω(τ)` (binary coagulation).
    OmegaTilde,
    /// `ω(ν+ετ) + (1−ε)ω(τ) − ω(ν) − ω(τ)`, the collision average before the
    /// rate is divided by `ε`.
    Omega2Eps { eps: f64 },
    /// `(ω(ν+ετ) − ω(ν))/ε − ω(τ)`.
    OmegaEps { eps: f64 },
}

/// Evaluates a collision test function at `(ν, τ)`.
pub fn test_identity(omega: &TestFunction, variant: IdentityVariant, nu: f64, tau: f64) -> Result<f64> {
    if !(nu > 0.0 && tau > 0.0) {
        return Err(domain(format!("identity arguments must be positive, got ({nu}, {tau})")));
    }
    let check_eps = |eps: f64| -> Result<()> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(domain(format!("ε must lie in (0, 1], got {eps}")));
        }
        Ok(())
    };
    Ok(match variant {
        IdentityVariant::Omega1 => tau * omega.derivative(nu) - omega.value(tau),
        IdentityVariant::OmegaTilde => omega.value(nu + tau) - omega.value(nu) - omega.value(tau),
        IdentityVariant::Omega2Eps { eps } => {
            check_eps(eps)?;
            eps * tau * omega.difference_quotient(nu, eps * tau) - eps * omega.value(tau)
        }
        IdentityVariant::OmegaEps { eps } => {
            check_eps(eps)?;
            tau * omega.difference_quotient(nu, eps * tau) - omega.value(tau)
        }
    })
}

/// One entry of a residual series.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResidualRow {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Cumulative trapezoid of `values` over `times`.
fn trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut acc = vec![0.0; times.len()];
    for k in 1..times.len() {
        acc[k] = acc[k - 1] + 0.5 * (times[k] - times[k - 1]) * (values[k] + values[k - 1]);
    }
    acc
}

/// `|∫ω(ζ(t) − ζ(0)) − ∫₀ᵗ Σ ω_i Q_i Δ_i ds|` with the time integral by the
/// trapezoid rule over the snapshots.
pub fn weak_form_residual(
    traj: &Trajectory,
    omega: &[f64],
    op: &dyn RateOperator,
) -> Result<Vec<ResidualRow>> {
    let Some(first) = traj.first() else {
        return Ok(Vec::new());
    };
    let grid = op.grid();
    if omega.len() != grid.len() {
        return Err(config(format!(
            "test function has {} samples for a {}-cell grid",
            omega.len(),
            grid.len()
        )));
    }
    let mut rates = Vec::with_capacity(traj.len());
    let mut out = vec![0.0; grid.len()];
    for s in &traj.snapshots {
        op.eval_into(&s.values, &mut out);
        rates.push(weak_action_values(grid, &out, omega)?);
    }
    let times = traj.times();
    let rhs = trapezoid(&times, &rates);
    let base = weak_action_values(grid, &first.values, omega)?;
    Ok(traj
        .snapshots
        .iter()
        .zip(rhs)
        .map(|(s, r)| {
            let lhs = weak_action_values(grid, &s.values, omega).unwrap_or(f64::NAN) - base;
            ResidualRow {
                t: s.time,
                lhs,
                rhs: r,
                residual: (lhs - r).abs(),
            }
        })
        .collect())
}

/// Mass balance below a cut `λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FluxRow {
    pub t: f64,
    /// `∫₀^λ μ (ζ(t) − ζ(0)) dμ`.
    pub lhs: f64,
    /// `−∫₀ᵗ ∫_{μ≥λ} ∫_{ν<λ} ν Λ ζ(μ) ζ(ν)`.
    pub rhs: f64,
    /// `|lhs − rhs|`.
    pub residual: f64,
    /// `residual / M₁(0)`.
    pub relative: f64,
    /// Time integral of the mass moved across `λ` by the discrete scheme
    /// beyond the collision term, i.e. growth of particles from below `λ` to
    /// above it.
    pub crossing: f64,
}

fn collision_flux(op: &CoagulationOperator, n: &[f64], above: impl Fn(usize) -> bool, below: impl Fn(usize) -> bool) -> f64 {
    let grid = op.grid();
    let xs = grid.centers();
    let mut total = 0.0;
    for i in 0..n.len() {
        if n[i] == 0.0 || !above(i) {
            continue;
        }
        let mut row = 0.0;
        for j in 0..n.len() {
            if below(j) {
                row += xs[j] * op.lambda(i, j) * n[j];
            }
        }
        total += row * n[i];
    }
    total
}

/// Both sides of the truncated mass balance at `λ` along a trajectory.
pub fn mass_flux_identity(traj: &Trajectory, lambda: f64, op: &CoagulationOperator) -> Result<Vec<FluxRow>> {
    let grid = op.grid().clone();
    let n = grid.n();
    if !(lambda > 1.0 / n && lambda <= n) {
        return Err(domain(format!("λ must lie in (1/n, n], got {lambda}")));
    }
    let Some(first) = traj.first() else {
        return Ok(Vec::new());
    };
    let xs = grid.centers();
    let omega: Vec<f64> = xs.iter().map(|x| if *x < lambda { *x } else { 0.0 }).collect();
    let m1_0 = first.weighted_norm(Weight::Mass);
    let mut collision = Vec::with_capacity(traj.len());
    let mut exact = Vec::with_capacity(traj.len());
    let mut out = vec![0.0; grid.len()];
    for s in &traj.snapshots {
        let nums = s.numbers();
        collision.push(collision_flux(op, &nums, |i| xs[i] >= lambda, |j| xs[j] < lambda));
        op.eval_into(&s.values, &mut out);
        exact.push(weak_action_values(&grid, &out, &omega)?);
    }
    let times = traj.times();
    let coll = trapezoid(&times, &collision);
    let ex = trapezoid(&times, &exact);
    let base = weak_action_values(&grid, &first.values, &omega)?;
    Ok(traj
        .snapshots
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let lhs = weak_action_values(&grid, &s.values, &omega).unwrap_or(f64::NAN) - base;
            let rhs = -coll[k];
            let residual = (lhs - rhs).abs();
            FluxRow {
                t: s.time,
                lhs,
                rhs,
                residual,
                relative: if m1_0 > 0.0 { residual / m1_0 } else { residual },
                crossing: -(ex[k] - rhs),
            }
        })
        .collect())
}

/// Time-integrated tail flux at one cut, split by partner size.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TailFluxRow {
    pub lambda: f64,
    /// Partners `ν < 1`.
    pub sigma1: f64,
    /// Partners `1 ≤ ν < λ`.
    pub sigma2: f64,
    pub total: f64,
}

/// `∫₀ᵀ ∫_{μ≥λ} ∫_{ν<λ} ν Λ ζ(μ) ζ(ν)` for each `λ`, split at `ν = 1`.
pub fn tail_flux_decay(traj: &Trajectory, lambdas: &[f64], op: &CoagulationOperator) -> Vec<TailFluxRow> {
    let grid = op.grid().clone();
    let xs = grid.centers();
    let times = traj.times();
    let numbers: Vec<Vec<f64>> = traj.snapshots.iter().map(|s| s.numbers()).collect();
    lambdas
        .iter()
        .map(|&lambda| {
            let mut s1 = Vec::with_capacity(numbers.len());
            let mut s2 = Vec::with_capacity(numbers.len());
            for nums in &numbers {
                s1.push(collision_flux(op, nums, |i| xs[i] >= lambda, |j| xs[j] < lambda.min(1.0)));
                s2.push(collision_flux(op, nums, |i| xs[i] >= lambda, |j| xs[j] >= 1.0 && xs[j] < lambda));
            }
            let sigma1 = *trapezoid(&times, &s1).last().unwrap_or(&0.0);
            let sigma2 = *trapezoid(&times, &s2).last().unwrap_or(&0.0);
            TailFluxRow {
                lambda,
                sigma1,
                sigma2,
                total: sigma1 + sigma2,
            }
        })
        .collect()
}

/// Measured time-Lipschitz constant of `t ↦ ∫ μ^{-σ} ω ζ(t)` against the
/// a-priori constant.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EquicontinuityRow {
    pub omega: String,
    pub modulus: f64,
    /// `k (‖ω‖_{W^{1,∞}} + ‖ω‖_∞) Θ²`.
    pub bound: f64,
    pub passed: bool,
}

/// Largest `|∫ μ^{-σ} ω (ζ(t₂) − ζ(t₁))| / (t₂ − t₁)` over consecutive
/// snapshots; by the triangle inequality this is the maximum over all pairs.
pub fn equicontinuity_modulus(
    traj: &Trajectory,
    omega: &TestFunction,
    sigma: f64,
    k: f64,
    theta_value: f64,
) -> EquicontinuityRow {
    let mut modulus: f64 = 0.0;
    let mut bound = f64::NAN;
    if let Some(first) = traj.first() {
        let grid = &first.grid;
        let (lo, hi) = (1.0 / grid.n(), grid.n());
        let weights: Vec<f64> = grid
            .centers()
            .iter()
            .zip(grid.widths())
            .map(|(x, w)| powf(*x, -sigma) * omega.value(*x) * w)
            .collect();
        let series: Vec<f64> = traj
            .snapshots
            .iter()
            .map(|s| s.values.iter().zip(&weights).map(|(z, w)| z * w).sum())
            .collect();
        for (p, v) in traj.snapshots.windows(2).zip(series.windows(2)) {
            let dt = p[1].time - p[0].time;
            if dt > 0.0 {
                modulus = modulus.max((v[1] - v[0]).abs() / dt);
            }
        }
        bound = k * (omega.w1inf_norm(lo, hi) + omega.sup_abs(lo, hi)) * theta_value * theta_value;
    }
    EquicontinuityRow {
        omega: omega.name(),
        modulus,
        bound,
        passed: !(modulus > bound),
    }
}

/// Everything checked along one trajectory.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiagnosticsReport {
    pub moments: Vec<MomentRow>,
    pub verdicts: Vec<Verdict>,
    pub integrability: Option<IntegrabilityVerdict>,
    pub weak_form: Vec<(String, f64)>,
    pub flux_identity: Vec<(f64, f64, f64)>,
    pub tail_flux: Vec<TailFluxRow>,
    pub equicontinuity: Vec<EquicontinuityRow>,
    /// Largest relative increases of `M_{-2σ}` and `M₁` between snapshots.
    pub monotonicity: (f64, f64),
}

impl DiagnosticsReport {
    /// All bound verdicts (including integrability and equicontinuity) pass.
    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
            && self.integrability.as_ref().is_none_or(|v| v.verdict.passed)
            && self.equicontinuity.iter().all(|e| e.passed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testfn::smooth_library;

    #[test]
    fn identity_examples() {
        let lin = TestFunction::Linear;
        for eps in [1.0, 0.3, 1e-4] {
            assert_eq!(test_identity(&lin, IdentityVariant::OmegaEps { eps }, 2.0, 0.7).unwrap(), 0.0);
        }
        let one = TestFunction::Constant { value: 1.0 };
        assert_eq!(test_identity(&one, IdentityVariant::OmegaEps { eps: 0.5 }, 2.0, 1.0).unwrap(), -1.0);
        assert_eq!(test_identity(&one, IdentityVariant::Omega1, 2.0, 1.0).unwrap(), -1.0);
        assert_eq!(test_identity(&one, IdentityVariant::OmegaTilde, 2.0, 1.0).unwrap(), -1.0);

        let sq = TestFunction::Monomial { p: 2.0 };
        let we = test_identity(&sq, IdentityVariant::OmegaEps { eps: 1e-4 }, 2.0, 1.0).unwrap();
        let w1 = test_identity(&sq, IdentityVariant::Omega1, 2.0, 1.0).unwrap();
        assert!((we - 3.0001).abs() < 1e-12);
        assert_eq!(w1, 3.0);
        assert!(((we - w1) - 1e-4).abs() < 1e-15);
    }

    #[test]
    fn eps_one_is_binary_coagulation() {
        for f in smooth_library() {
            for (nu, tau) in [(2.0, 1.0), (0.5, 0.1), (7.0, 3.0)] {
                let a = test_identity(&f, IdentityVariant::OmegaEps { eps: 1.0 }, nu, tau).unwrap();
                let b = test_identity(&f, IdentityVariant::OmegaTilde, nu, tau).unwrap();
                assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
                let c = test_identity(&f, IdentityVariant::Omega2Eps { eps: 1.0 }, nu, tau).unwrap();
                assert!((a - c).abs() <= 1e-14 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let f = TestFunction::Linear;
        assert!(test_identity(&f, IdentityVariant::Omega1, 0.0, 1.0).is_err());
        assert!(test_identity(&f, IdentityVariant::OmegaEps { eps: 0.0 }, 1.0, 1.0).is_err());
        assert!(test_identity(&f, IdentityVariant::OmegaEps { eps: 1.5 }, 1.0, 1.0).is_err());
    }

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let t = [0.0, 0.5, 1.5, 2.0];
        let v: Vec<f64> = t.iter().map(|x| 3.0 * x + 1.0).collect();
        let acc = trapezoid(&t, &v);
        assert!((acc[3] - (1.5 * 4.0 + 2.0)).abs() < 1e-14);
    }
}
