//! Coagulation kernels, their truncation to `(1/n, n)²` and randomized
//! certification against the singular growth and derivative assumptions.
//!
//! A [`Kernel`] pairs a concrete rate function with the constants `k`, `σ` and
//! `η` it is claimed to satisfy:
//!
//! ```text
//! Λ(μ,ν) ≤ k (μν)^{-σ}     on (0,1)²
//! Λ(μ,ν) ≤ k μ ν^{-σ}      on [1,∞) × (0,1)
//! Λ(μ,ν) ≤ k (μ+ν)         on [1,∞)²
//! ∂_μ Λ(μ,ν) ≥ -η μ^{-σ-1} ν^{-σ}
//! ```
//!
//! [`certify_growth`] and [`certify_derivative`] check those claims by sampling.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Error, Result};
use crate::math::{ln, log_uniform, powf};

/// Largest `σ` accepted without an explicit override.
pub const SIGMA_LIMIT: f64 = 0.5;

/// Upper cap for sampling the unbounded regimes.
pub const DEFAULT_SAMPLE_CAP: f64 = 1e6;

/// Lower cap for sampling `(0, 1)`.
pub const SAMPLE_FLOOR: f64 = 1e-6;

/// Growth-ratio slack for [`certify_growth`].
pub const GROWTH_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "snake_case"))]
pub enum KernelFamily {
    /// `Λ = scale`.
    Constant { scale: f64 },
    /// `Λ = scale · (μν)^{-exponent}`.
    SingularProduct { scale: f64, exponent: f64 },
    /// `Λ = scale · (μ + ν)`.
    Additive { scale: f64 },
    /// Bilinear interpolation in `(ln μ, ln ν)`.
    Tabulated(TabulatedKernel),
}

/// A symmetric nonnegative coagulation rate with its growth metadata.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Kernel {
    pub family: KernelFamily,
    /// Growth constant `k`.
    pub k: f64,
    /// Singularity exponent `σ`.
    pub sigma: f64,
    /// Derivative bound constant `η`.
    pub eta: f64,
}

impl Kernel {
    /// `Λ ≡ 1` with `k = 1`, `σ = 0`, `η = 0`.
    pub fn constant() -> Self {
        Self {
            family: KernelFamily::Constant { scale: 1.0 },
            k: 1.0,
            sigma: 0.0,
            eta: 0.0,
        }
    }

    /// `Λ = (μν)^{-σ}` with `k = 1` and `η = σ`, which is the tightest choice.
    pub fn singular_product(sigma: f64) -> Self {
        Self {
            family: KernelFamily::SingularProduct {
                scale: 1.0,
                exponent: sigma,
            },
            k: 1.0,
            sigma,
            eta: sigma,
        }
    }

    /// `Λ = μ + ν`. On `(0,1)²` it is bounded by 2, hence `k = 2`.
    pub fn additive() -> Self {
        Self {
            family: KernelFamily::Additive { scale: 1.0 },
            k: 2.0,
            sigma: 0.0,
            eta: 0.0,
        }
    }

    pub fn tabulated(table: TabulatedKernel, k: f64, sigma: f64, eta: f64) -> Result<Self> {
        Self {
            family: KernelFamily::Tabulated(table),
            k,
            sigma,
            eta,
        }
        .with_constants(k, sigma, eta)
    }

    /// Replaces the claimed constants, validating their signs.
    pub fn with_constants(mut self, k: f64, sigma: f64, eta: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(domain(format!("growth constant k must be positive, got {k}")));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(domain(format!("σ must be nonnegative, got {sigma}")));
        }
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(domain(format!("η must be nonnegative, got {eta}")));
        }
        self.k = k;
        self.sigma = sigma;
        self.eta = eta;
        Ok(self)
    }

    /// Rejects `σ ≥ 0.5` unless `allow_large_sigma` is set.
    pub fn check_sigma(&self, allow_large_sigma: bool) -> Result<()> {
        if self.sigma >= SIGMA_LIMIT && !allow_large_sigma {
            return Err(domain(format!(
                "σ = {} ≥ {SIGMA_LIMIT} requires an explicit override",
                self.sigma
            )));
        }
        Ok(())
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            KernelFamily::Constant { .. } => "constant",
            KernelFamily::SingularProduct { .. } => "singular_product",
            KernelFamily::Additive { .. } => "additive",
            KernelFamily::Tabulated(_) => "user_tabulated",
        }
    }

    /// `Λ(μ, ν)` for `μ, ν > 0`.
    pub fn eval(&self, mu: f64, nu: f64) -> Result<f64> {
        if !(mu > 0.0 && nu > 0.0) {
            return Err(domain(format!(
                "kernel arguments must be positive, got ({mu}, {nu})"
            )));
        }
        Ok(self.eval_unchecked(mu, nu))
    }

    /// Evaluation without the positivity check. Arguments are put in canonical
    /// order first so the result is symmetric bit for bit.
    #[inline]
    pub(crate) fn eval_unchecked(&self, mu: f64, nu: f64) -> f64 {
        let (a, b) = if mu >= nu { (mu, nu) } else { (nu, mu) };
        match &self.family {
            KernelFamily::Constant { scale } => *scale,
            KernelFamily::SingularProduct { scale, exponent } => scale * powf(a * b, -exponent),
            KernelFamily::Additive { scale } => scale * (a + b),
            KernelFamily::Tabulated(t) => t.lookup(a, b),
        }
    }

    /// The regime bound of the growth assumption at `(μ, ν)`.
    pub fn growth_bound(&self, mu: f64, nu: f64) -> f64 {
        let (big, small) = if mu >= nu { (mu, nu) } else { (nu, mu) };
        let (k, s) = (self.k, self.sigma);
        if big < 1.0 {
            k * powf(big * small, -s)
        } else if small < 1.0 {
            k * big * powf(small, -s)
        } else {
            k * (big + small)
        }
    }

    /// `-η μ^{-σ-1} ν^{-σ}`, the lower bound claimed for `∂_μ Λ`.
    pub fn derivative_floor(&self, mu: f64, nu: f64) -> f64 {
        -self.eta * powf(mu, -self.sigma - 1.0) * powf(nu, -self.sigma)
    }
}

/// A kernel tabulated on a tensor grid of positive sizes, interpolated
/// bilinearly in log-log coordinates and clamped outside the table.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TabulatedKernel {
    mu: Vec<f64>,
    nu: Vec<f64>,
    /// Row-major, `values[i * nu.len() + j] = Λ(mu[i], nu[j])`.
    values: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(skip))]
    log_mu: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(skip))]
    log_nu: Vec<f64>,
}

impl TabulatedKernel {
    pub fn new(mu: Vec<f64>, nu: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let check_axis = |axis: &[f64], name: &str| -> Result<()> {
            if axis.len() < 2 {
                return Err(Error::Construction(format!("{name} axis needs at least 2 nodes")));
            }
            if axis.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::Construction(format!("{name} nodes must be positive")));
            }
            if axis.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Construction(format!(
                    "{name} nodes must be strictly increasing"
                )));
            }
            Ok(())
        };
        check_axis(&mu, "mu")?;
        check_axis(&nu, "nu")?;
        if values.len() != mu.len() * nu.len() {
            return Err(Error::Construction(format!(
                "expected {} table values, got {}",
                mu.len() * nu.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Construction("kernel values must be nonnegative".into()));
        }
        let log_mu = mu.iter().map(|v| ln(*v)).collect();
        let log_nu = nu.iter().map(|v| ln(*v)).collect();
        Ok(Self {
            mu,
            nu,
            values,
            log_mu,
            log_nu,
        })
    }

    /// Builds a table from `(μ, ν, Λ)` triples covering a full tensor grid, in
    /// any order.
    pub fn from_triples(rows: &[(f64, f64, f64)]) -> Result<Self> {
        let mut mu: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let mut nu: Vec<f64> = rows.iter().map(|r| r.1).collect();
        sort_dedup(&mut mu);
        sort_dedup(&mut nu);
        let mut values = alloc::vec![f64::NAN; mu.len() * nu.len()];
        for &(m, n, v) in rows {
            let i = mu.binary_search_by(|x| x.total_cmp(&m)).unwrap();
            let j = nu.binary_search_by(|x| x.total_cmp(&n)).unwrap();
            values[i * nu.len() + j] = v;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Construction(
                "tabulated kernel rows do not cover a full (mu, nu) grid".into(),
            ));
        }
        Self::new(mu, nu, values)
    }

    /// Tabulates `f` on the tensor grid `nodes × nodes`.
    pub fn from_fn(nodes: &[f64], f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(nodes.len() * nodes.len());
        for &m in nodes {
            for &n in nodes {
                values.push(f(m, n));
            }
        }
        Self::new(nodes.to_vec(), nodes.to_vec(), values)
    }

    pub fn mu_nodes(&self) -> &[f64] {
        &self.mu
    }

    pub fn nu_nodes(&self) -> &[f64] {
        &self.nu
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn lookup(&self, mu: f64, nu: f64) -> f64 {
        // serde(skip) leaves the log axes empty after deserialization.
        let (lm, ln_) = if self.log_mu.len() == self.mu.len() {
            (&self.log_mu[..], &self.log_nu[..])
        } else {
            return Self::new(self.mu.clone(), self.nu.clone(), self.values.clone())
                .map(|t| t.lookup(mu, nu))
                .unwrap_or(0.0);
        };
        let (i, s) = bracket(lm, ln(mu));
        let (j, t) = bracket(ln_, ln(nu));
        let w = self.nu.len();
        let v00 = self.values[i * w + j];
        let v01 = self.values[i * w + j + 1];
        let v10 = self.values[(i + 1) * w + j];
        let v11 = self.values[(i + 1) * w + j + 1];
        (1.0 - s) * ((1.0 - t) * v00 + t * v01) + s * ((1.0 - t) * v10 + t * v11)
    }
}

fn sort_dedup(v: &mut Vec<f64>) {
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup();
}

/// Index of the left node and the clamped fractional position inside the interval.
fn bracket(axis: &[f64], x: f64) -> (usize, f64) {
    let last = axis.len() - 1;
    if x <= axis[0] {
        return (0, 0.0);
    }
    if x >= axis[last] {
        return (last - 1, 1.0);
    }
    let i = axis.partition_point(|v| *v <= x) - 1;
    let i = i.min(last - 1);
    (i, (x - axis[i]) / (axis[i + 1] - axis[i]))
}

/// A kernel masked to zero outside `(1/n, n)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedKernel {
    pub base: Kernel,
    pub n: f64,
}

impl TruncatedKernel {
    #[inline]
    pub fn contains(&self, mu: f64) -> bool {
        mu > 1.0 / self.n && mu < self.n
    }

    /// `Λ_n(μ, ν)`.
    pub fn eval(&self, mu: f64, nu: f64) -> Result<f64> {
        if !(mu > 0.0 && nu > 0.0) {
            return Err(domain(format!(
                "kernel arguments must be positive, got ({mu}, {nu})"
            )));
        }
        Ok(self.eval_unchecked(mu, nu))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, mu: f64, nu: f64) -> f64 {
        if !(self.contains(mu) && self.contains(nu)) {
            return 0.0;
        }
        let v = self.base.eval_unchecked(mu, nu);
        debug_assert!(
            v <= self.sup_bound() * (1.0 + 1e-12),
            "truncated kernel value {v} exceeds 2 k n^(2+2σ) = {}",
            self.sup_bound()
        );
        v
    }

    /// `2 k n^{2+2σ}`, the uniform bound on the truncated kernel.
    pub fn sup_bound(&self) -> f64 {
        2.0 * self.base.k * powf(self.n, 2.0 + 2.0 * self.base.sigma)
    }
}

/// Masks `kernel` outside `(1/n, n)²`.
pub fn truncate(kernel: &Kernel, n: f64) -> Result<TruncatedKernel> {
    if !(n > 1.0 && n.is_finite()) {
        return Err(domain(format!("truncation parameter must exceed 1, got {n}")));
    }
    Ok(TruncatedKernel {
        base: kernel.clone(),
        n,
    })
}

/// Outcome of a randomized certification scan.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CertReport {
    pub check: &'static str,
    pub passed: bool,
    pub samples: usize,
    pub violations: usize,
    /// Growth: worst `Λ / bound`. Derivative: worst `(floor - estimate) / |floor|`
    /// style margin (positive means violation).
    pub worst: f64,
    /// Sample attaining `worst`, as `(μ, ν, observed, bound)`.
    pub witness: Option<(f64, f64, f64, f64)>,
}

/// Draws `(μ, ν)` from regime `r` (0: `(0,1)²`, 1: `[1,cap)×(0,1)`, 2: `[1,cap)²`).
fn sample_regime(rng: &mut ChaCha8Rng, regime: usize, cap: f64) -> (f64, f64) {
    let mut draw = |lo: f64, hi: f64| log_uniform(lo, hi, rng.gen::<f64>());
    match regime {
        0 => (draw(SAMPLE_FLOOR, 1.0), draw(SAMPLE_FLOOR, 1.0)),
        1 => (draw(1.0, cap), draw(SAMPLE_FLOOR, 1.0)),
        _ => (draw(1.0, cap), draw(1.0, cap)),
    }
}

/// Samples the three growth regimes log-uniformly (upper cap
/// [`DEFAULT_SAMPLE_CAP`]) and reports the worst ratio `Λ / bound`.
pub fn certify_growth(kernel: &Kernel, sample_count: usize, seed: u64) -> Result<CertReport> {
    certify_growth_capped(kernel, sample_count, seed, DEFAULT_SAMPLE_CAP)
}

pub fn certify_growth_capped(
    kernel: &Kernel,
    sample_count: usize,
    seed: u64,
    cap: f64,
) -> Result<CertReport> {
    if sample_count == 0 {
        return Err(domain("sample_count must be at least 1"));
    }
    if !(cap > 1.0) {
        return Err(domain("sampling cap must exceed 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    let mut violations = 0;
    for s in 0..sample_count {
        let (mu, nu) = sample_regime(&mut rng, s % 3, cap);
        let value = kernel.eval_unchecked(mu, nu);
        let bound = kernel.growth_bound(mu, nu);
        let ratio = value / bound;
        if !(ratio <= 1.0 + GROWTH_SLACK) {
            violations += 1;
        }
        if ratio > worst || witness.is_none() {
            worst = ratio;
            witness = Some((mu, nu, value, bound));
        }
    }
    Ok(CertReport {
        check: "growth",
        passed: violations == 0,
        samples: sample_count,
        violations,
        worst,
        witness,
    })
}

/// Checks `∂_μ Λ ≥ -η μ^{-σ-1} ν^{-σ}` with central differences of relative
/// step `fd_step`. The tolerance is `C h²` with `C` taken from a Richardson
/// comparison of the `h` and `h/2` estimates.
pub fn certify_derivative(
    kernel: &Kernel,
    sample_count: usize,
    fd_step: f64,
    seed: u64,
) -> Result<CertReport> {
    if sample_count == 0 {
        return Err(domain("sample_count must be at least 1"));
    }
    if !(fd_step > 0.0 && fd_step < 0.5) {
        return Err(domain(format!("fd_step must lie in (0, 0.5), got {fd_step}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    let mut violations = 0;
    for s in 0..sample_count {
        let (mu, nu) = sample_regime(&mut rng, s % 3, DEFAULT_SAMPLE_CAP);
        let (mu, nu) = if rng.gen::<bool>() { (mu, nu) } else { (nu, mu) };
        let (estimate, tol) = central_difference(kernel, mu, nu, fd_step);
        let floor = kernel.derivative_floor(mu, nu);
        let scale = floor.abs().max(estimate.abs()).max(f64::MIN_POSITIVE);
        let shortfall = (floor - tol - estimate) / scale;
        if estimate < floor - tol {
            violations += 1;
        }
        if shortfall > worst || witness.is_none() {
            worst = shortfall;
            witness = Some((mu, nu, estimate, floor));
        }
    }
    Ok(CertReport {
        check: "derivative",
        passed: violations == 0,
        samples: sample_count,
        violations,
        worst,
        witness,
    })
}

/// Returns the `h/2` central-difference estimate of `∂_μ Λ` and its tolerance.
fn central_difference(kernel: &Kernel, mu: f64, nu: f64, h: f64) -> (f64, f64) {
    let d = |step: f64| {
        let dm = step * mu;
        (kernel.eval_unchecked(mu + dm, nu) - kernel.eval_unchecked(mu - dm, nu)) / (2.0 * dm)
    };
    let coarse = d(h);
    let fine = d(0.5 * h);
    // fine − exact ≈ C (h/2)², coarse − exact ≈ C h²  ⇒  C h² ≈ 4/3 |coarse − fine|.
    let richardson = 4.0 / 3.0 * (coarse - fine).abs();
    let roundoff = 1e-9 * (kernel.eval_unchecked(mu, nu).abs() / (h * mu)).max(fine.abs());
    (fine, richardson + roundoff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn eval_examples() {
        assert_eq!(Kernel::constant().eval(3.7, 0.2).unwrap(), 1.0);
        let sp = Kernel::singular_product(0.5);
        assert!((sp.eval(0.25, 0.25).unwrap() - 4.0).abs() < 1e-15);
        assert_eq!(Kernel::additive().eval(2.0, 3.0).unwrap(), 5.0);
    }

    #[test]
    fn eval_rejects_nonpositive() {
        let k = Kernel::constant();
        assert!(matches!(k.eval(0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(k.eval(1.0, -2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn truncation_masks_outside() {
        let t = truncate(&Kernel::constant(), 4.0).unwrap();
        assert_eq!(t.eval(0.5, 0.5).unwrap(), 1.0);
        assert_eq!(t.eval(5.0, 0.5).unwrap(), 0.0);
        assert_eq!(t.eval(0.2, 0.5).unwrap(), 0.0);
        assert!(matches!(truncate(&Kernel::constant(), 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn truncated_singular_product_respects_sup_bound() {
        let t = truncate(&Kernel::singular_product(0.5), 10.0).unwrap();
        let bound = 2.0 * 1.0 * 1e3;
        assert!((t.sup_bound() - bound).abs() < 1e-9);
        let mut sup: f64 = 0.0;
        for i in 1..400 {
            for j in 1..400 {
                let mu = libm::pow(10.0, -1.0 + 2.0 * i as f64 / 400.0);
                let nu = libm::pow(10.0, -1.0 + 2.0 * j as f64 / 400.0);
                sup = sup.max(t.eval(mu, nu).unwrap());
            }
        }
        assert!(sup <= bound, "sup {sup}");
    }

    #[test]
    fn growth_certificates() {
        let sp = certify_growth(&Kernel::singular_product(0.3), 3000, 7).unwrap();
        assert!(sp.passed);
        assert!((sp.worst - 1.0).abs() < 1e-12, "worst {}", sp.worst);

        let c = Kernel::constant().with_constants(1.0, 0.1, 0.0).unwrap();
        assert!(certify_growth(&c, 3000, 1).unwrap().passed);

        assert!(certify_growth(&Kernel::additive(), 3000, 2).unwrap().passed);
    }

    #[test]
    fn product_kernel_fails_growth_with_witness() {
        let nodes: Vec<f64> = (0..=60).map(|i| libm::pow(10.0, -6.0 + 0.2 * i as f64)).collect();
        let table = TabulatedKernel::from_fn(&nodes, |m, n| m * n).unwrap();
        let k = Kernel::tabulated(table, 1.0, 0.0, 0.0).unwrap();
        // Direct witness at a table node.
        let v = k.eval(1e3, 1e3).unwrap();
        assert!((v - 1e6).abs() < 1e-6 && v > k.growth_bound(1e3, 1e3));
        let rep = certify_growth(&k, 3000, 3).unwrap();
        assert!(!rep.passed);
        let (mu, nu, val, bound) = rep.witness.unwrap();
        assert!(mu >= 1.0 && nu >= 1.0 && val > bound);
    }

    #[test]
    fn derivative_certificates() {
        assert!(certify_derivative(&Kernel::constant(), 3000, 1e-3, 5).unwrap().passed);
        let sp = Kernel::singular_product(0.5);
        let rep = certify_derivative(&sp, 3000, 1e-3, 6).unwrap();
        assert!(rep.passed, "{rep:?}");
        // η = 0 understates the singular product's negative slope.
        let tight = sp.clone().with_constants(1.0, 0.5, 0.0).unwrap();
        assert!(!certify_derivative(&tight, 300, 1e-3, 6).unwrap().passed);
    }

    #[test]
    fn decaying_kernel_violates_zero_eta() {
        let nodes: Vec<f64> = (0..=120).map(|i| libm::pow(10.0, -6.0 + 0.1 * i as f64)).collect();
        let table = TabulatedKernel::from_fn(&nodes, |m, n| libm::exp(-(m + n))).unwrap();
        let k = Kernel::tabulated(table, 1.0, 0.0, 0.0).unwrap();
        let rep = certify_derivative(&k, 3000, 1e-3, 11).unwrap();
        assert!(!rep.passed);
        let (_, _, est, floor) = rep.witness.unwrap();
        assert!(est < floor);
    }

    #[test]
    fn sigma_override() {
        let k = Kernel::singular_product(0.6);
        assert!(k.check_sigma(false).is_err());
        assert!(k.check_sigma(true).is_ok());
        assert!(Kernel::singular_product(0.2).check_sigma(false).is_ok());
    }

    #[test]
    fn tabulated_from_triples_roundtrip() {
        let rows = vec![(1.0, 1.0, 2.0), (1.0, 2.0, 3.0), (2.0, 1.0, 3.0), (2.0, 2.0, 4.0)];
        let t = TabulatedKernel::from_triples(&rows).unwrap();
        let k = Kernel::tabulated(t, 4.0, 0.0, 0.0).unwrap();
        assert!((k.eval(2.0, 2.0).unwrap() - 4.0).abs() < 1e-15);
        assert!((k.eval(1.0, 2.0).unwrap() - 3.0).abs() < 1e-15);
        assert!(TabulatedKernel::from_triples(&rows[..3]).is_err());
    }

    #[test]
    fn metadata_validation() {
        assert!(Kernel::constant().with_constants(0.0, 0.0, 0.0).is_err());
        assert!(Kernel::constant().with_constants(1.0, -0.1, 0.0).is_err());
        assert!(Kernel::constant().with_constants(1.0, 0.0, -1.0).is_err());
    }
}
