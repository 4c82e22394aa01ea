//! Model ingredients: the influence function ψ, the delay kernel α, the delay
//! function τ, the normalizer h(t) = ∫₀^{τ(t)} α(s) ds, and the scalar special
//! functions used by the decay estimates (tail integrals of ψ, the principal
//! branch of the Lambert W function, and the Halanay rate).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, grid_trapezoid};

/// Value of an improper integral that may diverge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tail {
    Finite(f64),
    Infinite,
}

impl Tail {
    pub fn is_infinite(self) -> bool {
        matches!(self, Tail::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Tail::Finite(v) => Some(v),
            Tail::Infinite => None,
        }
    }

    /// `f64::INFINITY` for the divergent case.
    pub fn as_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl fmt::Display for Tail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tail::Finite(v) => write!(f, "{v}"),
            Tail::Infinite => f.write_str("inf"),
        }
    }
}

/// Serialized as a number, or the string "inf" for the divergent case.
impl Serialize for Tail {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Tail::Finite(v) => serializer.serialize_f64(*v),
            Tail::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Tail {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Number(v) => Ok(Tail::Finite(v)),
            Repr::Text(s) if s == "inf" => Ok(Tail::Infinite),
            Repr::Text(s) => Err(serde::de::Error::custom(format!(
                "expected a number or \"inf\", got {s:?}"
            ))),
        }
    }
}

/// On-disk form of every family: a tag plus a map of numeric parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl FamilySpec {
    fn new(family: &str, params: &[(&str, f64)]) -> Self {
        FamilySpec {
            family: family.to_string(),
            params: params.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
        }
    }

    fn take(&self, key: &str) -> Result<f64> {
        let v = *self.params.get(key).ok_or_else(|| {
            Error::invalid(
                format!("params.{key}"),
                format!("missing parameter for family `{}`", self.family),
            )
        })?;
        if !v.is_finite() {
            return Err(Error::invalid(format!("params.{key}"), "must be finite"));
        }
        Ok(v)
    }

    fn expect_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::invalid(
                format!("params.{k}"),
                format!("unknown parameter for family `{}`", self.family),
            )),
            None => Ok(()),
        }
    }
}

// ---------------------------------------------------------------------------
// Influence function ψ
// ---------------------------------------------------------------------------

/// Parameterized family of ψ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InfluenceFamily {
    /// ψ(r) = (1 + r²)^(−β)
    CuckerSmale { beta: f64 },
    /// ψ(r) = (1 + r)^(−p)
    PowerTail { p: f64 },
    /// ψ(r) = e^(−r)
    Exponential,
    /// ψ ≡ 1
    Constant,
}

/// A bounded, positive, nonincreasing, Lipschitz influence function with ψ(0) = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FamilySpec", into = "FamilySpec")]
pub struct InfluenceFunction {
    family: InfluenceFamily,
}

impl InfluenceFunction {
    pub fn cucker_smale(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::invalid(
                "params.beta",
                format!("must be finite and >= 0, got {beta}"),
            ));
        }
        Ok(InfluenceFunction {
            family: InfluenceFamily::CuckerSmale { beta },
        })
    }

    pub fn power_tail(p: f64) -> Result<Self> {
        if !(p.is_finite() && p >= 0.0) {
            return Err(Error::invalid(
                "params.p",
                format!("must be finite and >= 0, got {p}"),
            ));
        }
        Ok(InfluenceFunction {
            family: InfluenceFamily::PowerTail { p },
        })
    }

    pub fn exponential() -> Self {
        InfluenceFunction {
            family: InfluenceFamily::Exponential,
        }
    }

    pub fn constant() -> Self {
        InfluenceFunction {
            family: InfluenceFamily::Constant,
        }
    }

    pub fn family(&self) -> InfluenceFamily {
        self.family
    }

    /// Whether ∫₀^∞ ψ converges, decided analytically per family.
    pub fn is_integrable(&self) -> bool {
        match self.family {
            InfluenceFamily::CuckerSmale { beta } => beta > 0.5,
            InfluenceFamily::PowerTail { p } => p > 1.0,
            InfluenceFamily::Exponential => true,
            InfluenceFamily::Constant => false,
        }
    }

    /// ψ(r) without the domain check; `r` must be nonnegative.
    #[inline]
    pub(crate) fn eval_unchecked(&self, r: f64) -> f64 {
        match self.family {
            InfluenceFamily::CuckerSmale { beta } => {
                if beta == 0.5 {
                    1.0 / (1.0 + r * r).sqrt()
                } else if beta == 1.0 {
                    1.0 / (1.0 + r * r)
                } else {
                    (1.0 + r * r).powf(-beta)
                }
            }
            InfluenceFamily::PowerTail { p } => (1.0 + r).powf(-p),
            InfluenceFamily::Exponential => (-r).exp(),
            InfluenceFamily::Constant => 1.0,
        }
    }

    /// ψ(r).
    pub fn evaluate(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::Domain {
                what: "influence distance r",
                expected: "r >= 0",
                value: r,
            });
        }
        Ok(self.eval_unchecked(r))
    }

    /// ∫_d^∞ ψ(z) dz in closed form, or [`Tail::Infinite`] for heavy tails.
    pub fn tail_integral(&self, d: f64) -> Result<Tail> {
        if !(d >= 0.0) {
            return Err(Error::Domain {
                what: "tail integral lower limit d",
                expected: "d >= 0",
                value: d,
            });
        }
        if !self.is_integrable() {
            return Ok(Tail::Infinite);
        }
        let v = match self.family {
            InfluenceFamily::CuckerSmale { beta } => cucker_smale_tail(beta, d),
            InfluenceFamily::PowerTail { p } => (1.0 + d).powf(1.0 - p) / (p - 1.0),
            InfluenceFamily::Exponential => (-d).exp(),
            InfluenceFamily::Constant => unreachable!(),
        };
        Ok(Tail::Finite(v))
    }

    /// ∫_a^b ψ(z) dz for 0 ≤ a, b (signed: negative when b < a). Closed forms
    /// where available, adaptive quadrature otherwise.
    pub fn integral(&self, a: f64, b: f64) -> Result<f64> {
        if !(a >= 0.0 && b >= 0.0) {
            return Err(Error::Domain {
                what: "influence integral limits",
                expected: "a >= 0 and b >= 0",
                value: a.min(b),
            });
        }
        if a == b {
            return Ok(0.0);
        }
        if b < a {
            return Ok(-self.integral(b, a)?);
        }
        let v = match self.family {
            InfluenceFamily::Constant => b - a,
            InfluenceFamily::Exponential => (-a).exp() * -(-(b - a)).exp_m1(),
            InfluenceFamily::PowerTail { p } => {
                if p == 0.0 {
                    b - a
                } else if p == 1.0 {
                    ((1.0 + b) / (1.0 + a)).ln()
                } else {
                    ((1.0 + b).powf(1.0 - p) - (1.0 + a).powf(1.0 - p)) / (1.0 - p)
                }
            }
            InfluenceFamily::CuckerSmale { beta } => {
                if beta == 0.0 {
                    b - a
                } else if beta == 0.5 {
                    b.asinh() - a.asinh()
                } else if beta == 1.0 {
                    // atan(b) - atan(a) without cancellation
                    ((b - a) / (1.0 + a * b)).atan()
                } else if beta > 0.5 {
                    cucker_smale_tail(beta, a) - cucker_smale_tail(beta, b)
                } else {
                    self.quadrature(a, b)
                }
            }
        };
        Ok(v)
    }

    /// Adaptive Simpson over geometrically growing panels, so that very long
    /// ranges of a slowly decaying ψ stay well resolved.
    fn quadrature(&self, a: f64, b: f64) -> f64 {
        let f = |z: f64| self.eval_unchecked(z);
        let mut total = 0.0;
        let mut lo = a;
        while lo < b {
            let hi = (2.0 * lo + 1.0).min(b);
            let scale = (hi - lo) * self.eval_unchecked(lo);
            total += adaptive_simpson(&f, lo, hi, 1e-13 * scale.max(1e-300));
            lo = hi;
        }
        total
    }
}

/// ∫_d^∞ (1 + z²)^(−β) dz for β > 1/2.
///
/// With u = 1/(1 + z²) the integral becomes ½ B(u_d; β − ½, ½), an incomplete
/// beta function.
fn cucker_smale_tail(beta: f64, d: f64) -> f64 {
    if beta == 1.0 {
        return (1.0 / d).atan(); // π/2 − atan(d), stable for large d
    }
    let a = beta - 0.5;
    let u = 1.0 / (1.0 + d * d);
    if u >= 1.0 {
        return 0.5 * statrs::function::beta::ln_beta(a, 0.5).exp();
    }
    let complete = statrs::function::beta::ln_beta(a, 0.5).exp();
    0.5 * complete * statrs::function::beta::beta_reg(a, 0.5, u)
}

impl TryFrom<FamilySpec> for InfluenceFunction {
    type Error = Error;

    fn try_from(spec: FamilySpec) -> Result<Self> {
        match spec.family.as_str() {
            "cucker_smale" => {
                spec.expect_keys(&["beta"])?;
                InfluenceFunction::cucker_smale(spec.take("beta")?)
            }
            "power_tail" => {
                spec.expect_keys(&["p"])?;
                InfluenceFunction::power_tail(spec.take("p")?)
            }
            "exponential" => {
                spec.expect_keys(&[])?;
                Ok(InfluenceFunction::exponential())
            }
            "constant" => {
                spec.expect_keys(&[])?;
                Ok(InfluenceFunction::constant())
            }
            other => Err(Error::invalid(
                "family",
                format!(
                    "unknown influence family `{other}` \
                     (expected cucker_smale, power_tail, exponential or constant)"
                ),
            )),
        }
    }
}

impl From<InfluenceFunction> for FamilySpec {
    fn from(psi: InfluenceFunction) -> Self {
        match psi.family {
            InfluenceFamily::CuckerSmale { beta } => {
                FamilySpec::new("cucker_smale", &[("beta", beta)])
            }
            InfluenceFamily::PowerTail { p } => FamilySpec::new("power_tail", &[("p", p)]),
            InfluenceFamily::Exponential => FamilySpec::new("exponential", &[]),
            InfluenceFamily::Constant => FamilySpec::new("constant", &[]),
        }
    }
}

// ---------------------------------------------------------------------------
// Delay kernel α
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    /// α(s) = c on [0, τ₀]
    Constant { c: f64 },
    /// α(s) = e^(−λ s)
    ExponentialDecay { lambda: f64 },
    /// Unit point mass at s = τ̄ (discrete delay).
    Dirac { tau_bar: f64 },
}

/// Nonnegative weight α on [0, τ₀] of the distributed delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FamilySpec", into = "FamilySpec")]
pub struct DelayKernel {
    family: KernelFamily,
}

impl DelayKernel {
    pub fn constant(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::invalid(
                "params.c",
                format!("must be finite and > 0, got {c}"),
            ));
        }
        Ok(DelayKernel {
            family: KernelFamily::Constant { c },
        })
    }

    pub fn exponential_decay(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::invalid(
                "params.lambda",
                format!("must be finite and >= 0, got {lambda}"),
            ));
        }
        Ok(DelayKernel {
            family: KernelFamily::ExponentialDecay { lambda },
        })
    }

    pub fn dirac(tau_bar: f64) -> Result<Self> {
        if !(tau_bar.is_finite() && tau_bar > 0.0) {
            return Err(Error::invalid(
                "params.tau_bar",
                format!("must be finite and > 0, got {tau_bar}"),
            ));
        }
        Ok(DelayKernel {
            family: KernelFamily::Dirac { tau_bar },
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn dirac_lag(&self) -> Option<f64> {
        match self.family {
            KernelFamily::Dirac { tau_bar } => Some(tau_bar),
            _ => None,
        }
    }

    /// Density α(s) of the absolutely continuous families (0 for Dirac).
    #[inline]
    pub fn density(&self, s: f64) -> f64 {
        match self.family {
            KernelFamily::Constant { c } => c,
            KernelFamily::ExponentialDecay { lambda } => (-lambda * s).exp(),
            KernelFamily::Dirac { .. } => 0.0,
        }
    }

    /// ∫₀^upper α(s) ds. The Dirac mass counts fully once `upper ≥ τ̄`.
    pub fn mass(&self, upper: f64) -> f64 {
        match self.family {
            KernelFamily::Constant { c } => c * upper,
            KernelFamily::ExponentialDecay { lambda } => {
                if lambda == 0.0 {
                    upper
                } else {
                    -(-lambda * upper).exp_m1() / lambda
                }
            }
            KernelFamily::Dirac { tau_bar } => {
                if tau_bar <= upper * (1.0 + 1e-12) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// ∫₀^upper α(s) g(s) ds by composite trapezoid on the grid `j * step`
    /// (point evaluation g(τ̄) for the Dirac kernel).
    pub fn weighted_integral<G: FnMut(f64) -> f64>(&self, upper: f64, step: f64, mut g: G) -> f64 {
        match self.family {
            KernelFamily::Dirac { tau_bar } => {
                if tau_bar <= upper * (1.0 + 1e-12) {
                    g(tau_bar)
                } else {
                    0.0
                }
            }
            _ => grid_trapezoid(0.0, upper, 0.0, step)
                .into_iter()
                .map(|(s, w)| w * self.density(s) * g(s))
                .sum(),
        }
    }
}

impl TryFrom<FamilySpec> for DelayKernel {
    type Error = Error;

    fn try_from(spec: FamilySpec) -> Result<Self> {
        match spec.family.as_str() {
            "constant" => {
                spec.expect_keys(&["c"])?;
                DelayKernel::constant(spec.params.get("c").copied().unwrap_or(1.0))
            }
            "exponential_decay" => {
                spec.expect_keys(&["lambda"])?;
                DelayKernel::exponential_decay(spec.take("lambda")?)
            }
            "dirac" => {
                spec.expect_keys(&["tau_bar"])?;
                DelayKernel::dirac(spec.take("tau_bar")?)
            }
            other => Err(Error::invalid(
                "family",
                format!("unknown delay kernel `{other}` (expected constant, exponential_decay or dirac)"),
            )),
        }
    }
}

impl From<DelayKernel> for FamilySpec {
    fn from(k: DelayKernel) -> Self {
        match k.family {
            KernelFamily::Constant { c } => FamilySpec::new("constant", &[("c", c)]),
            KernelFamily::ExponentialDecay { lambda } => {
                FamilySpec::new("exponential_decay", &[("lambda", lambda)])
            }
            KernelFamily::Dirac { tau_bar } => FamilySpec::new("dirac", &[("tau_bar", tau_bar)]),
        }
    }
}

// ---------------------------------------------------------------------------
// Delay function τ
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DelayFamily {
    ConstantDelay {
        tau: f64,
    },
    /// τ(t) = τ* + (τ₀ − τ*) e^(−rate t)
    SmoothDecreasing {
        tau_star: f64,
        tau0: f64,
        rate: f64,
    },
}

/// Nonincreasing delay τ(t) with τ* ≤ τ(t) ≤ τ₀ = τ(0) and τ* > 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FamilySpec", into = "FamilySpec")]
pub struct DelayFunction {
    family: DelayFamily,
}

impl DelayFunction {
    pub fn constant(tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::invalid(
                "params.tau",
                format!("must be finite and > 0, got {tau}"),
            ));
        }
        Ok(DelayFunction {
            family: DelayFamily::ConstantDelay { tau },
        })
    }

    pub fn smooth_decreasing(tau_star: f64, tau0: f64, rate: f64) -> Result<Self> {
        if !(tau_star.is_finite() && tau_star > 0.0) {
            return Err(Error::invalid(
                "params.tau_star",
                format!("must be finite and > 0, got {tau_star}"),
            ));
        }
        if !(tau0.is_finite() && tau0 >= tau_star) {
            return Err(Error::invalid(
                "params.tau0",
                format!("must be finite and >= tau_star, got {tau0}"),
            ));
        }
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::invalid(
                "params.rate",
                format!("must be finite and >= 0, got {rate}"),
            ));
        }
        Ok(DelayFunction {
            family: DelayFamily::SmoothDecreasing {
                tau_star,
                tau0,
                rate,
            },
        })
    }

    pub fn family(&self) -> DelayFamily {
        self.family
    }

    /// τ(t) for t ≥ 0.
    #[inline]
    pub fn at(&self, t: f64) -> f64 {
        match self.family {
            DelayFamily::ConstantDelay { tau } => tau,
            DelayFamily::SmoothDecreasing {
                tau_star,
                tau0,
                rate,
            } => tau_star + (tau0 - tau_star) * (-rate * t.max(0.0)).exp(),
        }
    }

    /// τ₀ = τ(0), the longest delay.
    pub fn tau0(&self) -> f64 {
        self.at(0.0)
    }

    /// Lower bound τ*.
    pub fn tau_star(&self) -> f64 {
        match self.family {
            DelayFamily::ConstantDelay { tau } => tau,
            DelayFamily::SmoothDecreasing {
                tau_star,
                rate,
                tau0,
            } => {
                if rate == 0.0 {
                    tau0
                } else {
                    tau_star
                }
            }
        }
    }
}

impl TryFrom<FamilySpec> for DelayFunction {
    type Error = Error;

    fn try_from(spec: FamilySpec) -> Result<Self> {
        match spec.family.as_str() {
            "constant_delay" => {
                spec.expect_keys(&["tau"])?;
                DelayFunction::constant(spec.take("tau")?)
            }
            "smooth_decreasing" => {
                spec.expect_keys(&["tau_star", "tau0", "rate"])?;
                DelayFunction::smooth_decreasing(spec.take("tau_star")?, spec.take("tau0")?, spec.take("rate")?)
            }
            other => Err(Error::invalid(
                "family",
                format!("unknown delay function `{other}` (expected constant_delay or smooth_decreasing)"),
            )),
        }
    }
}

impl From<DelayFunction> for FamilySpec {
    fn from(d: DelayFunction) -> Self {
        match d.family {
            DelayFamily::ConstantDelay { tau } => {
                FamilySpec::new("constant_delay", &[("tau", tau)])
            }
            DelayFamily::SmoothDecreasing {
                tau_star,
                tau0,
                rate,
            } => FamilySpec::new(
                "smooth_decreasing",
                &[("tau_star", tau_star), ("tau0", tau0), ("rate", rate)],
            ),
        }
    }
}

// ---------------------------------------------------------------------------
// Free operations
// ---------------------------------------------------------------------------

pub fn evaluate_psi(psi: &InfluenceFunction, r: f64) -> Result<f64> {
    psi.evaluate(r)
}

pub fn tail_integral(psi: &InfluenceFunction, d: f64) -> Result<Tail> {
    psi.tail_integral(d)
}

/// h(t) = ∫₀^{τ(t)} α(s) ds; identically 1 for the Dirac kernel.
pub fn h_of_t(kernel: &DelayKernel, tau: &DelayFunction, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain {
            what: "time t",
            expected: "t >= 0",
            value: t,
        });
    }
    Ok(match kernel.family {
        KernelFamily::Dirac { .. } => 1.0,
        _ => kernel.mass(tau.at(t)),
    })
}

/// Principal branch W₀ of the Lambert W (product logarithm) on [0, ∞):
/// the unique w ≥ 0 with w e^w = z.
pub fn lambert_w0(z: f64) -> Result<f64> {
    if !(z >= 0.0) {
        return Err(Error::Domain {
            what: "Lambert W argument",
            expected: "z >= 0",
            value: z,
        });
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    if z.is_infinite() {
        return Ok(f64::INFINITY);
    }
    if z > 1e20 {
        return Ok(lambert_w0_of_ln(z.ln()));
    }
    let mut w = z.ln_1p();
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - z;
        if f == 0.0 {
            break;
        }
        let wp1 = w + 1.0;
        // Halley update for f(w) = w e^w − z
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        let next = w - step;
        let done = (next - w).abs() <= 4.0 * f64::EPSILON * next.abs().max(f64::MIN_POSITIVE);
        w = next.max(0.0);
        if done {
            break;
        }
    }
    Ok(w)
}

/// W₀(e^{lz}) for large arguments: Newton on w + ln w = lz, which avoids
/// overflow of w e^w.
fn lambert_w0_of_ln(lz: f64) -> f64 {
    let mut w = lz - lz.ln();
    for _ in 0..64 {
        let step = (w + w.ln() - lz) / (1.0 + 1.0 / w);
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * w {
            break;
        }
    }
    w
}

/// γ = 1 − τ₀⁻¹ W₀(a τ₀ e^{τ₀}): the exponential rate for u′ ≤ a sup u − u
/// over a delay window of length τ₀.
pub fn halanay_rate(a: f64, tau0: f64) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::Domain {
            what: "Halanay coefficient a",
            expected: "0 < a < 1",
            value: a,
        });
    }
    if !(tau0 > 0.0 && tau0.is_finite()) {
        return Err(Error::Domain {
            what: "Halanay delay tau0",
            expected: "0 < tau0 < inf",
            value: tau0,
        });
    }
    let arg = a * tau0 * tau0.exp();
    let w = if arg > 1e20 {
        lambert_w0_of_ln(a.ln() + tau0.ln() + tau0)
    } else {
        lambert_w0(arg)?
    };
    Ok(1.0 - w / tau0)
}

/// Explicit Euler solution of u′ = a·sup_{[t−τ₀, t]} u − u from u ≡ 1 on
/// [−τ₀, 0], with Δt = τ₀/1000 up to 20τ₀. Returns max_t u(t)·e^{γt}, which
/// is ≤ 1 + 10⁻³ when the rate γ is valid.
pub fn halanay_oracle(a: f64, tau0: f64, gamma: f64) -> Result<f64> {
    halanay_rate(a, tau0)?;
    const PER_WINDOW: usize = 1000;
    let dt = tau0 / PER_WINDOW as f64;
    let steps = 20 * PER_WINDOW;
    let mut u = vec![1.0; PER_WINDOW + 1];
    u.reserve(steps);
    // indices of a decreasing run of u over the current window
    let mut window: std::collections::VecDeque<usize> = (PER_WINDOW..=PER_WINDOW).collect();
    let mut worst: f64 = 1.0;
    for k in 0..steps {
        let now = PER_WINDOW + k;
        while window.front().is_some_and(|&j| j + PER_WINDOW < now) {
            window.pop_front();
        }
        let sup = u[*window.front().expect("window holds the current node")];
        let next = u[now] + dt * (a * sup - u[now]);
        u.push(next);
        while window.back().is_some_and(|&j| u[j] <= next) {
            window.pop_back();
        }
        window.push_back(now + 1);
        worst = worst.max(next * (gamma * (k + 1) as f64 * dt).exp());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bisect_w(z: f64) -> f64 {
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64.max(z.ln_1p()) + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid.exp() < z {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn psi_examples() {
        let cs = InfluenceFunction::cucker_smale(0.25).unwrap();
        assert_eq!(cs.evaluate(0.0).unwrap(), 1.0);
        assert_relative_eq!(
            InfluenceFunction::exponential().evaluate(1.0).unwrap(),
            0.367879441171442,
            epsilon = 1e-12
        );
        let cs = InfluenceFunction::cucker_smale(0.5).unwrap();
        assert_relative_eq!(
            cs.evaluate(2.0).unwrap(),
            0.447213595499958,
            epsilon = 1e-12
        );
        assert!(cs.evaluate(-1.0).is_err());
    }

    #[test]
    fn psi_at_zero_is_one_for_every_family() {
        for psi in [
            InfluenceFunction::cucker_smale(1.7).unwrap(),
            InfluenceFunction::power_tail(3.0).unwrap(),
            InfluenceFunction::exponential(),
            InfluenceFunction::constant(),
        ] {
            assert_eq!(psi.evaluate(0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn rejects_increasing_parameterizations() {
        assert!(InfluenceFunction::cucker_smale(-0.1).is_err());
        assert!(InfluenceFunction::power_tail(-2.0).is_err());
        assert!(InfluenceFunction::cucker_smale(f64::NAN).is_err());
    }

    #[test]
    fn tail_examples() {
        assert_eq!(
            InfluenceFunction::exponential().tail_integral(0.0).unwrap(),
            Tail::Finite(1.0)
        );
        let p2 = InfluenceFunction::power_tail(2.0).unwrap();
        assert_relative_eq!(
            p2.tail_integral(1.0).unwrap().finite().unwrap(),
            0.5,
            epsilon = 1e-15
        );
        let heavy = InfluenceFunction::cucker_smale(0.25).unwrap();
        for d in [0.0, 1.0, 1e3] {
            assert!(heavy.tail_integral(d).unwrap().is_infinite());
        }
        assert!(InfluenceFunction::constant()
            .tail_integral(2.0)
            .unwrap()
            .is_infinite());
        assert!(p2.tail_integral(-0.5).is_err());
    }

    #[test]
    fn cucker_smale_tail_beta_one_is_arctan() {
        let psi = InfluenceFunction::cucker_smale(1.0).unwrap();
        let t = psi.tail_integral(2.0).unwrap().finite().unwrap();
        assert_relative_eq!(
            t,
            std::f64::consts::FRAC_PI_2 - 2f64.atan(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn cucker_smale_general_beta_tail() {
        // β = 3/2: ∫_d^∞ (1+z²)^{-3/2} dz = 1 − d/√(1+d²)
        let psi = InfluenceFunction::cucker_smale(1.5).unwrap();
        for d in [0.0, 0.3, 2.0, 10.0] {
            let t = psi.tail_integral(d).unwrap().finite().unwrap();
            assert_relative_eq!(t, 1.0 - d / (1.0 + d * d).sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn segment_integral_heavy_tail_against_simpson() {
        let psi = InfluenceFunction::cucker_smale(0.25).unwrap();
        let v = psi.integral(0.5, 40.0).unwrap();
        let f = |z: f64| (1.0 + z * z).powf(-0.25);
        let n = 200_000;
        let h = 39.5 / n as f64;
        let mut s = f(0.5) + f(40.0);
        for k in 1..n {
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(0.5 + k as f64 * h);
        }
        assert_relative_eq!(v, s * h / 3.0, max_relative = 1e-10);
        assert_relative_eq!(psi.integral(40.0, 0.5).unwrap(), -v);
    }

    #[test]
    fn h_examples() {
        let k = DelayKernel::constant(1.0).unwrap();
        let tau = DelayFunction::constant(0.5).unwrap();
        assert_relative_eq!(h_of_t(&k, &tau, 7.0).unwrap(), 0.5);
        let k = DelayKernel::exponential_decay(1.0).unwrap();
        let tau = DelayFunction::constant(2.0).unwrap();
        assert_relative_eq!(
            h_of_t(&k, &tau, 0.0).unwrap(),
            1.0 - (-2f64).exp(),
            epsilon = 1e-15
        );
        let k = DelayKernel::dirac(0.3).unwrap();
        let tau = DelayFunction::constant(0.5).unwrap();
        assert_eq!(h_of_t(&k, &tau, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn smooth_delay_bounds() {
        let tau = DelayFunction::smooth_decreasing(0.2, 0.5, 1.0).unwrap();
        assert_eq!(tau.tau0(), 0.5);
        assert_eq!(tau.tau_star(), 0.2);
        let mut prev = tau.at(0.0);
        for k in 1..200 {
            let cur = tau.at(k as f64 * 0.1);
            assert!(cur <= prev && cur >= 0.2);
            prev = cur;
        }
        assert!(DelayFunction::smooth_decreasing(0.5, 0.2, 1.0).is_err());
        assert!(DelayFunction::smooth_decreasing(0.0, 0.2, 1.0).is_err());
    }

    #[test]
    fn lambert_examples() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert_relative_eq!(
            lambert_w0(std::f64::consts::E).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        let oracle = bisect_w(1.0);
        assert_relative_eq!(oracle, 0.567143290409784, epsilon = 1e-12);
        assert_relative_eq!(lambert_w0(1.0).unwrap(), oracle, epsilon = 1e-12);
        assert!(lambert_w0(-0.1).is_err());
    }

    #[test]
    fn lambert_round_trip_log_spaced() {
        for k in 0..=160 {
            let z = 10f64.powf(-8.0 + 0.1 * k as f64);
            let w = lambert_w0(z).unwrap();
            assert!((w * w.exp() - z).abs() <= 1e-12 * z.max(1.0), "z = {z}");
            assert_relative_eq!(w, bisect_w(z), max_relative = 1e-12);
        }
        let w = lambert_w0(1e200).unwrap();
        assert_relative_eq!(w + w.ln(), 200.0 * 10f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn halanay_examples() {
        // frozen from the bisection oracle: W(0.5 e) = 0.685076...
        let w = bisect_w(0.5 * std::f64::consts::E);
        let expected = 1.0 - w;
        assert_relative_eq!(expected, 0.3149, epsilon = 1e-4);
        assert_relative_eq!(halanay_rate(0.5, 1.0).unwrap(), expected, epsilon = 1e-12);
        assert_relative_eq!(halanay_rate(1e-12, 1.0).unwrap(), 1.0, epsilon = 1e-11);
        assert!(halanay_rate(0.3, 1.0).unwrap() > halanay_rate(0.6, 1.0).unwrap());
        assert!(halanay_rate(1.0, 1.0).is_err());
        assert!(halanay_rate(0.0, 1.0).is_err());
        assert!(halanay_rate(0.5, 0.0).is_err());
    }

    #[test]
    fn halanay_oracle_bounds() {
        let g = halanay_rate(0.5, 1.0).unwrap();
        let worst = halanay_oracle(0.5, 1.0, g).unwrap();
        assert!(worst <= 1.0 + 1e-3, "{worst}");
        // a rate well above the true one is violated
        assert!(halanay_oracle(0.5, 1.0, g + 0.1).unwrap() > 1.1);
        assert!(halanay_oracle(1.5, 1.0, g).is_err());
    }

    #[test]
    fn family_spec_parsing() {
        let psi: InfluenceFunction =
            serde_json::from_str(r#"{"family":"cucker_smale","params":{"beta":0.25}}"#).unwrap();
        assert_eq!(psi.family(), InfluenceFamily::CuckerSmale { beta: 0.25 });
        let psi: InfluenceFunction = serde_json::from_str(r#"{"family":"exponential"}"#).unwrap();
        assert_eq!(psi, InfluenceFunction::exponential());
        let err =
            serde_json::from_str::<InfluenceFunction>(r#"{"family":"cucker_smale","params":{}}"#)
                .unwrap_err()
                .to_string();
        assert!(err.contains("beta"), "{err}");
        assert!(serde_json::from_str::<InfluenceFunction>(r#"{"family":"gauss"}"#).is_err());
        let k: DelayKernel =
            serde_json::from_str(r#"{"family":"dirac","params":{"tau_bar":0.3}}"#).unwrap();
        assert_eq!(k.dirac_lag(), Some(0.3));
        let json = serde_json::to_string(&DelayFunction::smooth_decreasing(0.1, 0.4, 2.0).unwrap())
            .unwrap();
        let back: DelayFunction = serde_json::from_str(&json).unwrap();
        assert_eq!(back.tau0(), 0.4);
    }
}
