//! Test functions `ω` for weak-form checks, with exact first and second
//! derivatives and difference quotients evaluated without cancellation.

use crate::math::{exp, powf};

/// Golden-section iterations used for bump-function suprema.
const GOLDEN_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum TestFunction {
    /// `ω ≡ value`.
    Constant { value: f64 },
    /// `ω(μ) = μ`.
    Linear,
    /// `ω(μ) = min(μ, λ)`.
    MinLinear { lambda: f64 },
    /// `ω(μ) = μ^p`, `p > 0`.
    Monomial { p: f64 },
    /// `ω(μ) = e^{-μ}`.
    ExpDecay,
    /// `ω(μ) = ln(1 + μ)`.
    Log1p,
    /// `ω(μ) = exp(1 - 1/(1 - u²))` with `u = (μ - center)/half_width`, zero for `|u| ≥ 1`.
    Bump { center: f64, half_width: f64 },
}

impl TestFunction {
    pub fn name(&self) -> alloc::string::String {
        use alloc::format;
        match self {
            TestFunction::Constant { value } => format!("constant({value})"),
            TestFunction::Linear => "linear".into(),
            TestFunction::MinLinear { lambda } => format!("min_linear({lambda})"),
            TestFunction::Monomial { p } => format!("monomial({p})"),
            TestFunction::ExpDecay => "exp_decay".into(),
            TestFunction::Log1p => "log1p".into(),
            TestFunction::Bump { center, half_width } => format!("bump({center},{half_width})"),
        }
    }

    pub fn value(&self, mu: f64) -> f64 {
        match *self {
            TestFunction::Constant { value } => value,
            TestFunction::Linear => mu,
            TestFunction::MinLinear { lambda } => mu.min(lambda),
            TestFunction::Monomial { p } => powf(mu, p),
            TestFunction::ExpDecay => exp(-mu),
            TestFunction::Log1p => libm::log1p(mu),
            TestFunction::Bump { center, half_width } => {
                let u = (mu - center) / half_width;
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    exp(1.0 - 1.0 / (1.0 - u * u))
                }
            }
        }
    }

    /// `ω'(μ)`; for `MinLinear` the right derivative.
    pub fn derivative(&self, mu: f64) -> f64 {
        match *self {
            TestFunction::Constant { .. } => 0.0,
            TestFunction::Linear => 1.0,
            TestFunction::MinLinear { lambda } => {
                if mu < lambda {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::Monomial { p } => p * powf(mu, p - 1.0),
            TestFunction::ExpDecay => -exp(-mu),
            TestFunction::Log1p => 1.0 / (1.0 + mu),
            TestFunction::Bump { center, half_width } => {
                let u = (mu - center) / half_width;
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    bump_du(u) / half_width
                }
            }
        }
    }

    /// `ω''(μ)`, zero across the kink of `MinLinear`.
    pub fn second_derivative(&self, mu: f64) -> f64 {
        match *self {
            TestFunction::Constant { .. } | TestFunction::Linear | TestFunction::MinLinear { .. } => 0.0,
            TestFunction::Monomial { p } => p * (p - 1.0) * powf(mu, p - 2.0),
            TestFunction::ExpDecay => exp(-mu),
            TestFunction::Log1p => -1.0 / ((1.0 + mu) * (1.0 + mu)),
            TestFunction::Bump { center, half_width } => {
                let u = (mu - center) / half_width;
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    bump_du2(u) / (half_width * half_width)
                }
            }
        }
    }

    /// `(ω(ν + h) − ω(ν)) / h` for `h > 0`, in closed form where one exists.
    pub fn difference_quotient(&self, nu: f64, h: f64) -> f64 {
        match *self {
            TestFunction::Constant { .. } => 0.0,
            TestFunction::Linear => 1.0,
            TestFunction::MinLinear { lambda } => {
                if nu + h <= lambda {
                    1.0
                } else if nu >= lambda {
                    0.0
                } else {
                    (lambda - nu) / h
                }
            }
            TestFunction::Monomial { p } => {
                if p == 2.0 {
                    2.0 * nu + h
                } else if p == 3.0 {
                    3.0 * nu * nu + 3.0 * nu * h + h * h
                } else {
                    powf(nu, p) * libm::expm1(p * libm::log1p(h / nu)) / h
                }
            }
            TestFunction::ExpDecay => exp(-nu) * libm::expm1(-h) / h,
            TestFunction::Log1p => libm::log1p(h / (1.0 + nu)) / h,
            TestFunction::Bump { .. } => (self.value(nu + h) - self.value(nu)) / h,
        }
    }

    /// `sup |ω|` over `[lo, hi]`.
    pub fn sup_abs(&self, lo: f64, hi: f64) -> f64 {
        match *self {
            TestFunction::Constant { value } => value.abs(),
            TestFunction::Linear => hi,
            TestFunction::MinLinear { lambda } => hi.min(lambda),
            TestFunction::Monomial { p } => powf(hi, p),
            TestFunction::ExpDecay => exp(-lo),
            TestFunction::Log1p => libm::log1p(hi),
            TestFunction::Bump { center, .. } => {
                let c = center.clamp(lo, hi);
                self.value(c)
            }
        }
    }

    /// `sup |ω'|` over `[lo, hi]`.
    pub fn sup_abs_derivative(&self, lo: f64, hi: f64) -> f64 {
        match *self {
            TestFunction::Constant { .. } => 0.0,
            TestFunction::Linear => 1.0,
            TestFunction::MinLinear { lambda } => {
                if lo < lambda {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::Monomial { .. } => {
                let a = self.derivative(lo).abs();
                let b = self.derivative(hi).abs();
                a.max(b)
            }
            TestFunction::ExpDecay => exp(-lo),
            TestFunction::Log1p => 1.0 / (1.0 + lo),
            TestFunction::Bump { center, half_width } => {
                // |ω'| rises then falls on each side of the center.
                let left = golden_max(|mu| self.derivative(mu).abs(), (center - half_width).max(lo), center.clamp(lo, hi));
                let right = golden_max(|mu| self.derivative(mu).abs(), center.clamp(lo, hi), (center + half_width).min(hi));
                left.max(right)
            }
        }
    }

    /// `sup |ω''|` over `[lo, hi]`. Exact for every variant except `Bump`,
    /// where it is a dense scan.
    pub fn sup_abs_second(&self, lo: f64, hi: f64) -> f64 {
        match self {
            TestFunction::Bump { .. } => {
                let steps = 4096;
                (0..=steps)
                    .map(|k| self.second_derivative(lo + (hi - lo) * k as f64 / steps as f64).abs())
                    .fold(0.0, f64::max)
            }
            // |ω''| is monotone for all other variants.
            _ => self.second_derivative(lo).abs().max(self.second_derivative(hi).abs()),
        }
    }

    /// `‖ω‖_{W^{1,∞}} = sup|ω| + sup|ω'|` over `[lo, hi]`.
    pub fn w1inf_norm(&self, lo: f64, hi: f64) -> f64 {
        self.sup_abs(lo, hi) + self.sup_abs_derivative(lo, hi)
    }

    /// Samples at the centers of a grid.
    pub fn sample(&self, centers: &[f64]) -> alloc::vec::Vec<f64> {
        centers.iter().map(|x| self.value(*x)).collect()
    }

    /// Whether `ω'` vanishes outside a bounded set.
    pub fn has_compact_derivative(&self) -> bool {
        matches!(
            self,
            TestFunction::Constant { .. } | TestFunction::MinLinear { .. } | TestFunction::Bump { .. }
        )
    }
}

/// `d/du exp(1 − 1/(1−u²))`.
fn bump_du(u: f64) -> f64 {
    let q = 1.0 - u * u;
    exp(1.0 - 1.0 / q) * (-2.0 * u / (q * q))
}

fn bump_du2(u: f64) -> f64 {
    let q = 1.0 - u * u;
    let g = exp(1.0 - 1.0 / q);
    let h = -2.0 * u / (q * q);
    let dh = -2.0 / (q * q) - 8.0 * u * u / (q * q * q);
    g * (h * h + dh)
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    if !(b > a) {
        return f(a).max(f(b));
    }
    let r = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    for _ in 0..GOLDEN_STEPS {
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - r * (b - a);
        d = a + r * (b - a);
        if b - a <= 1e-15 * b.abs().max(1.0) {
            break;
        }
    }
    f(0.5 * (a + b)).max(f(a)).max(f(b))
}

/// The five smooth functions used for second-order Taylor checks.
pub fn smooth_library() -> [TestFunction; 5] {
    [
        TestFunction::Monomial { p: 2.0 },
        TestFunction::Monomial { p: 3.0 },
        TestFunction::ExpDecay,
        TestFunction::Log1p,
        TestFunction::Monomial { p: 1.5 },
    ]
}
