//! Exact derivatives of `f^alpha`, the flatness constant `a(beta)` and the
//! quantities built from it.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::function_model::{paper_floor, Differentiable};
use crate::holder_analysis::{NEGATIVITY_TOLERANCE, ZERO_FLOOR};
use crate::numfmt;

/// Largest derivative order handled by [`faa_tuples`].
pub const MAX_FAA_ORDER: usize = 20;

/// Default constant budget for derivative bound checks.
pub const DEFAULT_BOUND_BUDGET: f64 = 1e4;

const BISECTION_LO: f64 = 1e-15;
const BISECTION_HI: f64 = 2.0;
const BISECTION_TOL: f64 = 1e-12;

/// A solution `m` of `sum_j j m_j = k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionTuple {
    pub m: Vec<usize>,
    pub k: usize,
    /// `M = sum_j m_j`, the order of the outer derivative in the term.
    pub total: usize,
    /// `k! / (m_1! ... m_k!)`.
    pub weight: f64,
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

fn enumerate(k: usize) -> Vec<PartitionTuple> {
    fn rec(j: usize, k: usize, remaining: usize, m: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if j == k {
            if remaining.is_multiple_of(k) {
                m[k - 1] = remaining / k;
                out.push(m.clone());
            }
            return;
        }
        for c in (0..=remaining / j).rev() {
            m[j - 1] = c;
            rec(j + 1, k, remaining - c * j, m, out);
        }
        m[j - 1] = 0;
    }
    let mut raw = Vec::new();
    rec(1, k, k, &mut vec![0; k], &mut raw);
    let kf = factorial(k);
    raw.into_iter()
        .map(|m| {
            let denom: u128 = m.iter().map(|&c| factorial(c)).product();
            PartitionTuple {
                total: m.iter().sum(),
                weight: (kf / denom) as f64,
                k,
                m,
            }
        })
        .collect()
}

fn tuple_cache() -> &'static [Vec<PartitionTuple>] {
    static CACHE: OnceLock<Vec<Vec<PartitionTuple>>> = OnceLock::new();
    CACHE.get_or_init(|| (1..=MAX_FAA_ORDER).map(enumerate).collect())
}

/// All index tuples of the order-`k` Faà di Bruno sum, with `m_1` descending,
/// then `m_2` descending, and so on.
pub fn faa_tuples(k: usize) -> Result<&'static [PartitionTuple]> {
    if !(1..=MAX_FAA_ORDER).contains(&k) {
        return Err(Error::RangeError(format!(
            "Faà di Bruno order {k} outside 1..={MAX_FAA_ORDER}"
        )));
    }
    Ok(&tuple_cache()[k - 1])
}

/// `alpha (alpha - 1) ... (alpha - r + 1)`.
pub fn falling_factorial(alpha: f64, r: usize) -> f64 {
    (0..r).fold(1.0, |acc, i| acc * (alpha - i as f64))
}

/// `d^k/dx^k f(x)^alpha` by Faà di Bruno's formula.
///
/// At a zero of `f` the result is 0 when every derivative of order `1..=k`
/// vanishes there too, and [`Error::SingularPoint`] otherwise.
pub fn power_derivative<D: Differentiable + ?Sized>(
    f: &D,
    alpha: f64,
    k: usize,
    x: f64,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "exponent must lie in (0, 1], got {alpha}"
        )));
    }
    if alpha == 1.0 {
        return f.derivative(x, k);
    }
    let fx = f.value(x)?;
    if fx < -NEGATIVITY_TOLERANCE || fx.is_nan() {
        return Err(Error::NegativityError { x, value: fx });
    }
    let fx = fx.max(0.0);
    if k == 0 {
        return Ok(fx.powf(alpha));
    }
    let tuples = faa_tuples(k)?;
    let derivs = (1..=k)
        .map(|j| f.derivative(x, j))
        .collect::<Result<Vec<f64>>>()?;

    if fx < ZERO_FLOOR {
        return match derivs.iter().position(|&d| d != 0.0) {
            Some(j) => Err(Error::SingularPoint { x, order: j + 1 }),
            None => Ok(0.0),
        };
    }

    // d_j / j!, the Taylor coefficients of f at x
    let mut taylor = derivs;
    let mut fact = 1.0;
    for (j, t) in taylor.iter_mut().enumerate() {
        fact *= (j + 1) as f64;
        *t /= fact;
    }

    let mut sum = 0.0;
    for tuple in tuples {
        let c = falling_factorial(alpha, tuple.total);
        let mut term = c * tuple.weight * fx.powf(alpha - tuple.total as f64);
        for (j, &mj) in tuple.m.iter().enumerate() {
            if mj > 0 {
                term *= taylor[j].powi(mj as i32);
            }
        }
        if term != 0.0 {
            sum += term;
        }
    }
    Ok(sum)
}

/// `f^alpha` as a [`Differentiable`], with derivatives from [`power_derivative`].
#[derive(Debug, Clone, Copy)]
pub struct Root<D> {
    pub base: D,
    pub alpha: f64,
}

impl<D: Differentiable> Root<D> {
    pub fn new(base: D, alpha: f64) -> Self {
        Self { base, alpha }
    }
}

impl<D: Differentiable> Differentiable for Root<D> {
    fn derivative(&self, x: f64, order: usize) -> Result<f64> {
        power_derivative(&self.base, self.alpha, order, x)
    }

    fn max_order(&self) -> usize {
        self.base.max_order().min(MAX_FAA_ORDER)
    }

    fn domain(&self) -> (f64, f64) {
        self.base.domain()
    }
}

/// The largest `a` with `(e^a - 1) + a^beta / floor(beta)! <= 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatnessConstant {
    #[serde(with = "numfmt::real")]
    pub beta: f64,
    #[serde(with = "numfmt::real")]
    pub a: f64,
    #[serde(with = "numfmt::real")]
    pub residual: f64,
}

/// `(e^a - 1) + a^beta / floor(beta)! - 1/2`, increasing in `a`.
pub fn flatness_residual(beta: f64, a: f64) -> f64 {
    let fact = factorial(paper_floor(beta)) as f64;
    a.exp_m1() + a.powf(beta) / fact - 0.5
}

pub fn flatness_constant(beta: f64) -> Result<FlatnessConstant> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "smoothness index must be positive, got {beta}"
        )));
    }
    let (mut lo, mut hi) = (BISECTION_LO, BISECTION_HI);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if flatness_residual(beta, mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(FlatnessConstant {
        beta,
        a: lo,
        residual: flatness_residual(beta, lo),
    })
}

/// `a(beta) (f(x) / norm)^(1/beta)` from the value `f(x)`.
pub fn radius_from_value(beta: f64, fx: f64, norm: f64) -> Result<f64> {
    if !(norm > 0.0) {
        return Err(Error::InvalidParameter(format!("norm must be positive, got {norm}")));
    }
    if fx < -NEGATIVITY_TOLERANCE {
        return Err(Error::NegativityError { x: f64::NAN, value: fx });
    }
    if fx <= 0.0 {
        return Ok(0.0);
    }
    Ok(flatness_constant(beta)?.a * (fx / norm).powf(1.0 / beta))
}

/// Half-width of the window around `x` on which `f` stays within a factor 2 of
/// `f(x)`, given `norm = ||f||_{H^beta}`.
pub fn stability_radius<D: Differentiable + ?Sized>(
    f: &D,
    beta: f64,
    x: f64,
    norm: f64,
) -> Result<f64> {
    let fx = f.value(x)?;
    radius_from_value(beta, fx, norm).map_err(|e| match e {
        Error::NegativityError { value, .. } => Error::NegativityError { x, value },
        other => other,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeBound {
    #[serde(with = "numfmt::real")]
    pub lhs: f64,
    #[serde(with = "numfmt::real")]
    pub rhs: f64,
    #[serde(with = "numfmt::real")]
    pub ratio: f64,
    pub ok: bool,
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else if rhs == 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    }
}

/// Compares `|(f^alpha)^{(k)}(x)|` with `norm^{k/beta} f(x)^{alpha - k/beta}`.
pub fn derivative_bound_check<D: Differentiable + ?Sized>(
    f: &D,
    alpha: f64,
    beta: f64,
    k: usize,
    x: f64,
    norm: f64,
    budget: f64,
) -> Result<DerivativeBound> {
    if (k as f64) >= beta {
        return Err(Error::InvalidParameter(format!(
            "derivative order {k} must be below {beta}"
        )));
    }
    let fx = f.value(x)?;
    if !(fx > 0.0) {
        return Err(Error::SingularPoint { x, order: k });
    }
    let lhs = power_derivative(f, alpha, k, x)?.abs();
    let e = k as f64 / beta;
    let rhs = norm.powf(e) * fx.powf(alpha - e);
    let ratio = ratio(lhs, rhs);
    Ok(DerivativeBound {
        lhs,
        rhs,
        ratio,
        ok: lhs <= budget * rhs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootIncrement {
    #[serde(with = "numfmt::real")]
    pub lhs: f64,
    #[serde(with = "numfmt::real")]
    pub rhs_scale: f64,
    #[serde(with = "numfmt::real")]
    pub ratio: f64,
}

/// Increment of the `floor(beta)`-th derivative of `f^alpha` between `x` and
/// `y`, against `seminorm_sum |x - y|^{beta - floor(beta)} / min(f(x), f(y))^{1 - alpha}`.
///
/// `seminorm_sum` is `|f|_{C^beta} + |f|_{H^beta}`, supplied by the caller.
pub fn local_root_holder<D: Differentiable + ?Sized>(
    f: &D,
    alpha: f64,
    beta: f64,
    x: f64,
    y: f64,
    seminorm_sum: f64,
) -> Result<RootIncrement> {
    let k = paper_floor(beta);
    let (fx, fy) = (f.value(x)?, f.value(y)?);
    for (p, v) in [(x, fx), (y, fy)] {
        if !(v > 0.0) {
            return Err(Error::SingularPoint { x: p, order: 0 });
        }
    }
    let lhs = (power_derivative(f, alpha, k, x)? - power_derivative(f, alpha, k, y)?).abs();
    let rhs_scale =
        seminorm_sum * (x - y).abs().powf(beta - k as f64) / fx.min(fy).powf(1.0 - alpha);
    Ok(RootIncrement {
        lhs,
        rhs_scale,
        ratio: ratio(lhs, rhs_scale),
    })
}

/// Finest level below which wavelets around `x0` may see `f` vanish.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticalLevel {
    Level(u32),
    /// `f(x0) = 0`: no level is fine enough.
    Unbounded,
}

impl CriticalLevel {
    pub fn level(self) -> Option<u32> {
        match self {
            Self::Level(j) => Some(j),
            Self::Unbounded => None,
        }
    }
}

impl fmt::Display for CriticalLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Level(j) => write!(f, "{j}"),
            Self::Unbounded => f.write_str("unbounded"),
        }
    }
}

impl Serialize for CriticalLevel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Level(j) => s.serialize_u32(*j),
            Self::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for CriticalLevel {
    fn deserialize<De: Deserializer<'de>>(d: De) -> std::result::Result<Self, De::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Level(u32),
            Tag(String),
        }
        match Repr::deserialize(d)? {
            Repr::Level(j) => Ok(Self::Level(j)),
            Repr::Tag(t) if t == "unbounded" => Ok(Self::Unbounded),
            Repr::Tag(t) => Err(serde::de::Error::custom(format!("unknown level tag {t:?}"))),
        }
    }
}

/// Smallest `j >= 0` with `2^j >= support_length a(beta)^{-1} (norm / f(x0))^{1/beta}`.
pub fn level_from_value(beta: f64, fx0: f64, support_length: f64, norm: f64) -> Result<CriticalLevel> {
    if !(norm > 0.0 && support_length > 0.0) {
        return Err(Error::InvalidParameter(
            "norm and support length must be positive".into(),
        ));
    }
    if fx0 < -NEGATIVITY_TOLERANCE {
        return Err(Error::NegativityError { x: f64::NAN, value: fx0 });
    }
    if fx0 < ZERO_FLOOR {
        return Ok(CriticalLevel::Unbounded);
    }
    let a = flatness_constant(beta)?.a;
    let target = support_length / a * (norm / fx0).powf(1.0 / beta);
    if !target.is_finite() || target.log2() > u32::MAX as f64 / 2.0 {
        return Ok(CriticalLevel::Unbounded);
    }
    let mut j = target.log2().ceil().max(0.0) as i32;
    while j > 0 && 2f64.powi(j - 1) >= target {
        j -= 1;
    }
    while 2f64.powi(j) < target {
        j += 1;
    }
    Ok(CriticalLevel::Level(j as u32))
}

pub fn critical_level<D: Differentiable + ?Sized>(
    f: &D,
    beta: f64,
    x0: f64,
    support_length: f64,
    norm: f64,
) -> Result<CriticalLevel> {
    level_from_value(beta, f.value(x0)?, support_length, norm)
}
