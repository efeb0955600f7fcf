//! Non-negative test functions on `[0, 1]` with exact derivatives, and their
//! dyadic samples.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt::fmt17;

/// Sentinel for "derivatives of every order are available".
pub const UNLIMITED: usize = usize::MAX;

/// Finest grid level accepted by [`sample`].
pub const MAX_GRID_LEVEL: u32 = 24;

/// Highest derivative order served by finite differences on a [`GridFunction`].
pub const MAX_TABULATED_ORDER: usize = 4;

/// Largest integer strictly smaller than `beta`.
///
/// This is not `f64::floor`: at integers it is one less, so `paper_floor(2.0) == 1`.
/// Every Hölder exponent split in the crate goes through here.
pub fn paper_floor(beta: f64) -> usize {
    if !(beta > 0.0) {
        return 0;
    }
    let f = beta.floor();
    if f == beta {
        (f as usize).saturating_sub(1)
    } else {
        f as usize
    }
}

/// Something whose derivatives can be evaluated pointwise.
///
/// Implemented by [`FunctionSpec`] as well as by the composite views used by the
/// analysis code (roots, products, extensions).
pub trait Differentiable: Sync {
    /// `f^{(order)}(x)`.
    fn derivative(&self, x: f64, order: usize) -> Result<f64>;

    /// Highest order accepted by [`Differentiable::derivative`], or [`UNLIMITED`].
    fn max_order(&self) -> usize;

    /// Closed interval on which the function is defined.
    fn domain(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn value(&self, x: f64) -> Result<f64> {
        self.derivative(x, 0)
    }
}

impl<T: Differentiable + ?Sized> Differentiable for &T {
    fn derivative(&self, x: f64, order: usize) -> Result<f64> {
        (**self).derivative(x, order)
    }
    fn max_order(&self) -> usize {
        (**self).max_order()
    }
    fn domain(&self) -> (f64, f64) {
        (**self).domain()
    }
}

/// Samples of a function at the dyadic nodes `x_i = i 2^{-J}`, `i = 0..=2^J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct GridFunction {
    level: u32,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawGrid {
    level: u32,
    values: Vec<f64>,
}

impl TryFrom<RawGrid> for GridFunction {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        GridFunction::new(raw.level, raw.values)
    }
}

impl GridFunction {
    pub fn new(level: u32, values: Vec<f64>) -> Result<Self> {
        if level > MAX_GRID_LEVEL {
            return Err(Error::ResolutionError {
                level,
                reason: format!("grid level must be at most {MAX_GRID_LEVEL}"),
            });
        }
        let expected = (1usize << level) + 1;
        if values.len() != expected {
            return Err(Error::InvalidParameter(format!(
                "grid of level {level} needs {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite grid value at index {i}"
            )));
        }
        Ok(Self { level, values })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "value"])?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([fmt17(self.node(i)), fmt17(*v)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "value" {
            return Err(Error::InvalidParameter(
                "grid CSV must have header `x,value`".into(),
            ));
        }
        let mut xs = Vec::new();
        let mut values = Vec::new();
        for row in r.records() {
            let row = row?;
            let parse = |s: &str| {
                crate::numfmt::parse_real(s)
                    .ok_or_else(|| Error::InvalidParameter(format!("bad number `{s}`")))
            };
            xs.push(parse(&row[0])?);
            values.push(parse(&row[1])?);
        }
        let cells = values.len().saturating_sub(1);
        if cells == 0 || !cells.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "grid CSV has {} rows; expected 2^J + 1",
                values.len()
            )));
        }
        let grid = GridFunction::new(cells.trailing_zeros(), values)?;
        for (i, x) in xs.iter().enumerate() {
            if (x - grid.node(i)).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "row {i}: x = {x} is not the dyadic node {}",
                    grid.node(i)
                )));
            }
        }
        Ok(grid)
    }

    /// Highest finite-difference order the grid is large enough for.
    pub fn max_order(&self) -> usize {
        // a one-sided stencil of order m uses m + 2 nodes
        (self.values.len().saturating_sub(2)).min(MAX_TABULATED_ORDER)
    }

    /// Second-order accurate finite-difference derivative at node `i`.
    pub fn node_derivative(&self, i: usize, order: usize) -> Result<f64> {
        if order > self.max_order() {
            return Err(Error::OrderUnavailable {
                order,
                available: self.max_order(),
            });
        }
        let f = &self.values;
        if order == 0 {
            return Ok(f[i]);
        }
        let n = f.len() - 1;
        let h = self.spacing();
        let scale = h.powi(order as i32);
        let radius = if order <= 2 { 1 } else { 2 };
        if i >= radius && i + radius <= n {
            let d = match order {
                1 => (f[i + 1] - f[i - 1]) / 2.0,
                2 => f[i + 1] - 2.0 * f[i] + f[i - 1],
                3 => (f[i + 2] - 2.0 * f[i + 1] + 2.0 * f[i - 1] - f[i - 2]) / 2.0,
                _ => f[i + 2] - 4.0 * f[i + 1] + 6.0 * f[i] - 4.0 * f[i - 1] + f[i - 2],
            };
            return Ok(d / scale);
        }
        let coeffs: &[f64] = match order {
            1 => &[-1.5, 2.0, -0.5],
            2 => &[2.0, -5.0, 4.0, -1.0],
            3 => &[-2.5, 9.0, -12.0, 7.0, -1.5],
            _ => &[3.0, -14.0, 26.0, -24.0, 11.0, -2.0],
        };
        let d: f64 = if i + coeffs.len() - 1 <= n {
            coeffs.iter().enumerate().map(|(k, c)| c * f[i + k]).sum()
        } else {
            let sign = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
            coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| sign * c * f[i - k])
                .sum()
        };
        Ok(d / scale)
    }

    /// Derivative at an arbitrary point: node stencils, then linear interpolation.
    pub fn derivative_at(&self, x: f64, order: usize) -> Result<f64> {
        check_unit(x)?;
        let n = self.values.len() - 1;
        let t = x / self.spacing();
        let i = (t.floor() as usize).min(n);
        let frac = t - i as f64;
        let left = self.node_derivative(i, order)?;
        if frac == 0.0 || i == n {
            return Ok(left);
        }
        let right = self.node_derivative(i + 1, order)?;
        Ok(left + frac * (right - left))
    }
}

fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::DomainError { x, lo: 0.0, hi: 1.0 })
    }
}

/// One `coeff * function` term of [`FunctionSpec::ScaledSum`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledTerm {
    pub coeff: f64,
    pub function: FunctionSpec,
}

/// Closed-form function families on `[0, 1]`.
///
/// JSON form is tagged by `family`, e.g. `{"family": "power", "gamma": 2.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FunctionSpec {
    /// `x^gamma`
    Power { gamma: f64 },
    /// `x + q`
    AffinePlus { q: f64 },
    /// `c`
    Constant { c: f64 },
    /// `(x - x0)^2`
    ShiftedSquare { x0: f64 },
    /// `x^beta + delta^(beta-2) x^2 + delta^beta`
    FlatFamily { beta: f64, delta: f64 },
    /// `sum coeff_i f_i`
    ScaledSum { terms: Vec<ScaledTerm> },
    /// Samples with finite-difference derivatives.
    Tabulated(GridFunction),
}

impl FunctionSpec {
    pub fn power(gamma: f64) -> Self {
        FunctionSpec::Power { gamma }
    }

    pub fn affine_plus(q: f64) -> Self {
        FunctionSpec::AffinePlus { q }
    }

    pub fn constant(c: f64) -> Self {
        FunctionSpec::Constant { c }
    }

    pub fn shifted_square(x0: f64) -> Self {
        FunctionSpec::ShiftedSquare { x0 }
    }

    pub fn flat_family(beta: f64, delta: f64) -> Self {
        FunctionSpec::FlatFamily { beta, delta }
    }

    pub fn scaled_sum<I: IntoIterator<Item = (f64, FunctionSpec)>>(terms: I) -> Self {
        FunctionSpec::ScaledSum {
            terms: terms
                .into_iter()
                .map(|(coeff, function)| ScaledTerm { coeff, function })
                .collect(),
        }
    }

    pub fn scaled(self, coeff: f64) -> Self {
        Self::scaled_sum([(coeff, self)])
    }

    /// The `family` tag of the JSON form.
    pub fn family_name(&self) -> &'static str {
        match self {
            FunctionSpec::Power { .. } => "power",
            FunctionSpec::AffinePlus { .. } => "affine_plus",
            FunctionSpec::Constant { .. } => "constant",
            FunctionSpec::ShiftedSquare { .. } => "shifted_square",
            FunctionSpec::FlatFamily { .. } => "flat_family",
            FunctionSpec::ScaledSum { .. } => "scaled_sum",
            FunctionSpec::Tabulated(_) => "tabulated",
        }
    }

    /// Parses and validates the JSON form.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: FunctionSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("function specs always serialize")
    }

    /// Checks the parameter constraints of each family.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self {
            FunctionSpec::Power { gamma } if !(gamma.is_finite() && *gamma > 0.0) => {
                bad(format!("power: gamma must be positive, got {gamma}"))
            }
            FunctionSpec::AffinePlus { q } if !(q.is_finite() && *q > 0.0) => {
                bad(format!("affine_plus: q must be positive, got {q}"))
            }
            FunctionSpec::Constant { c } if !(c.is_finite() && *c >= 0.0) => {
                bad(format!("constant: c must be non-negative, got {c}"))
            }
            FunctionSpec::ShiftedSquare { x0 } if !(0.0..=1.0).contains(x0) => {
                bad(format!("shifted_square: x0 must lie in [0, 1], got {x0}"))
            }
            FunctionSpec::FlatFamily { beta, delta }
                if !(beta.is_finite() && *beta >= 2.0 && delta.is_finite() && *delta >= 0.0) =>
            {
                bad(format!(
                    "flat_family: need beta >= 2 and delta >= 0, got beta={beta}, delta={delta}"
                ))
            }
            FunctionSpec::ScaledSum { terms } => {
                if terms.is_empty() {
                    return bad("scaled_sum: empty term list".into());
                }
                for t in terms {
                    if !t.coeff.is_finite() {
                        return bad(format!("scaled_sum: non-finite coefficient {}", t.coeff));
                    }
                    t.function.validate()?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Order up to which [`FunctionSpec::evaluate`] is available.
    pub fn max_exact_derivative(&self) -> usize {
        match self {
            FunctionSpec::Power { gamma } => power_max_order(*gamma),
            FunctionSpec::FlatFamily { beta, .. } => power_max_order(*beta),
            FunctionSpec::AffinePlus { .. }
            | FunctionSpec::Constant { .. }
            | FunctionSpec::ShiftedSquare { .. } => UNLIMITED,
            FunctionSpec::ScaledSum { terms } => terms
                .iter()
                .map(|t| t.function.max_exact_derivative())
                .min()
                .unwrap_or(UNLIMITED),
            FunctionSpec::Tabulated(g) => g.max_order(),
        }
    }

    pub fn is_closed_form(&self) -> bool {
        match self {
            FunctionSpec::Tabulated(_) => false,
            FunctionSpec::ScaledSum { terms } => terms.iter().all(|t| t.function.is_closed_form()),
            _ => true,
        }
    }

    /// `f^{(order)}(x)` for `x` in `[0, 1]`.
    pub fn evaluate(&self, x: f64, order: usize) -> Result<f64> {
        check_unit(x)?;
        self.check_order(order)?;
        self.formula(x, order)
    }

    fn check_order(&self, order: usize) -> Result<()> {
        let available = self.max_exact_derivative();
        if order > available {
            Err(Error::OrderUnavailable { order, available })
        } else {
            Ok(())
        }
    }

    /// The defining formula at any real `x`, without a domain check.
    fn formula(&self, x: f64, order: usize) -> Result<f64> {
        Ok(match self {
            FunctionSpec::Power { gamma } => power_derivative_closed(*gamma, x, order),
            FunctionSpec::AffinePlus { q } => match order {
                0 => x + q,
                1 => 1.0,
                _ => 0.0,
            },
            FunctionSpec::Constant { c } => {
                if order == 0 {
                    *c
                } else {
                    0.0
                }
            }
            FunctionSpec::ShiftedSquare { x0 } => match order {
                0 => (x - x0) * (x - x0),
                1 => 2.0 * (x - x0),
                2 => 2.0,
                _ => 0.0,
            },
            FunctionSpec::FlatFamily { beta, delta } => {
                let mut v = power_derivative_closed(*beta, x, order)
                    + delta.powf(beta - 2.0) * power_derivative_closed(2.0, x, order);
                if order == 0 {
                    v += delta.powf(*beta);
                }
                v
            }
            FunctionSpec::ScaledSum { terms } => {
                let mut acc = 0.0;
                for t in terms {
                    if t.coeff != 0.0 {
                        acc += t.coeff * t.function.formula(x, order)?;
                    }
                }
                acc
            }
            FunctionSpec::Tabulated(g) => g.derivative_at(x, order)?,
        })
    }
}

impl Differentiable for FunctionSpec {
    fn derivative(&self, x: f64, order: usize) -> Result<f64> {
        self.evaluate(x, order)
    }

    fn max_order(&self) -> usize {
        self.max_exact_derivative()
    }
}

fn power_max_order(gamma: f64) -> usize {
    if gamma.fract() == 0.0 {
        UNLIMITED
    } else {
        gamma.ceil() as usize
    }
}

/// `d^order/dx^order x^gamma` from the falling factorial.
fn power_derivative_closed(gamma: f64, x: f64, order: usize) -> f64 {
    let mut coeff = 1.0;
    for r in 0..order {
        coeff *= gamma - r as f64;
    }
    if coeff == 0.0 {
        return 0.0;
    }
    let e = gamma - order as f64;
    let p = if e.fract() == 0.0 && e.abs() < i32::MAX as f64 {
        x.powi(e as i32)
    } else {
        x.powf(e)
    };
    coeff * p
}

/// Samples `f` at the nodes `i 2^{-level}` of `[0, 1]`.
pub fn sample<D: Differentiable + ?Sized>(f: &D, level: u32) -> Result<GridFunction> {
    if level > MAX_GRID_LEVEL {
        return Err(Error::ResolutionError {
            level,
            reason: format!("sampling supports 0..={MAX_GRID_LEVEL}"),
        });
    }
    let n = 1usize << level;
    let h = (-(level as f64)).exp2();
    let values = (0..=n)
        .into_par_iter()
        .map(|i| f.value(i as f64 * h))
        .collect::<Result<Vec<_>>>()?;
    GridFunction::new(level, values)
}

/// `F(x) = int_0^x f(u) du` as a closed-form spec.
pub fn antiderivative(spec: &FunctionSpec) -> Result<FunctionSpec> {
    let pow = FunctionSpec::power;
    let sum = |terms: Vec<(f64, FunctionSpec)>| {
        let kept: Vec<_> = terms.into_iter().filter(|(c, _)| *c != 0.0).collect();
        if kept.is_empty() {
            FunctionSpec::constant(0.0)
        } else {
            FunctionSpec::scaled_sum(kept)
        }
    };
    Ok(match spec {
        FunctionSpec::Constant { c } if *c == 0.0 => FunctionSpec::constant(0.0),
        FunctionSpec::Constant { c } if *c == 1.0 => pow(1.0),
        FunctionSpec::Constant { c } => sum(vec![(*c, pow(1.0))]),
        FunctionSpec::Power { gamma } => sum(vec![(1.0 / (gamma + 1.0), pow(gamma + 1.0))]),
        FunctionSpec::AffinePlus { q } => sum(vec![(0.5, pow(2.0)), (*q, pow(1.0))]),
        FunctionSpec::ShiftedSquare { x0 } => sum(vec![
            (1.0 / 3.0, pow(3.0)),
            (-x0, pow(2.0)),
            (x0 * x0, pow(1.0)),
        ]),
        FunctionSpec::FlatFamily { beta, delta } => sum(vec![
            (1.0 / (beta + 1.0), pow(beta + 1.0)),
            (delta.powf(beta - 2.0) / 3.0, pow(3.0)),
            (delta.powf(*beta), pow(1.0)),
        ]),
        FunctionSpec::ScaledSum { terms } => {
            let mut out = Vec::with_capacity(terms.len());
            for t in terms {
                out.push((t.coeff, antiderivative(&t.function)?));
            }
            sum(out)
        }
        FunctionSpec::Tabulated(_) => {
            return Err(Error::Unsupported(
                "antiderivative of tabulated data; use cumulative_trapezoid".into(),
            ))
        }
    })
}

/// Running trapezoid integral of tabulated data.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedAntiderivative {
    pub grid: GridFunction,
    /// Quadrature error is `O(2^{-error_order * J})` for `C^2` data.
    pub error_order: u32,
}

pub fn cumulative_trapezoid(g: &GridFunction) -> TabulatedAntiderivative {
    let h = g.spacing();
    let v = g.values();
    let mut out = Vec::with_capacity(v.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in v.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    TabulatedAntiderivative {
        grid: GridFunction::new(g.level(), out).expect("same shape as input"),
        error_order: 2,
    }
}

/// A closed-form spec evaluated by its formula on `[-1, 2]`.
#[derive(Debug, Clone, Copy)]
pub struct Extended<'a> {
    spec: &'a FunctionSpec,
}

pub const EXTENSION_DOMAIN: (f64, f64) = (-1.0, 2.0);

impl<'a> Extended<'a> {
    pub fn new(spec: &'a FunctionSpec) -> Result<Self> {
        if !spec.is_closed_form() {
            return Err(Error::Unsupported("extension of tabulated data".into()));
        }
        Ok(Self { spec })
    }

    pub fn spec(&self) -> &FunctionSpec {
        self.spec
    }

    /// Fails with `ExtensionNotNonnegative` if the formula dips below zero (or is
    /// undefined) at a node of spacing `2^{-level}` on `[-1, 2]`.
    pub fn ensure_nonnegative(&self, level: u32) -> Result<()> {
        let (lo, hi) = EXTENSION_DOMAIN;
        let cells = ((hi - lo) * (level as f64).exp2()).round() as usize;
        let h = (hi - lo) / cells as f64;
        for i in 0..=cells {
            let x = lo + i as f64 * h;
            let v = self.spec.formula(x, 0)?;
            if v.is_nan() || v < -1e-12 {
                return Err(Error::ExtensionNotNonnegative { x, value: v });
            }
        }
        Ok(())
    }
}

impl Differentiable for Extended<'_> {
    fn derivative(&self, x: f64, order: usize) -> Result<f64> {
        let (lo, hi) = EXTENSION_DOMAIN;
        if !(lo..=hi).contains(&x) {
            return Err(Error::DomainError { x, lo, hi });
        }
        self.spec.check_order(order)?;
        self.spec.formula(x, order)
    }

    fn max_order(&self) -> usize {
        self.spec.max_exact_derivative()
    }

    fn domain(&self) -> (f64, f64) {
        EXTENSION_DOMAIN
    }
}

/// Pointwise product, differentiated by the Leibniz rule.
#[derive(Debug, Clone, Copy)]
pub struct ProductOf<A, B> {
    pub left: A,
    pub right: B,
}

impl<A: Differentiable, B: Differentiable> Differentiable for ProductOf<A, B> {
    fn derivative(&self, x: f64, order: usize) -> Result<f64> {
        let mut acc = 0.0;
        let mut binom = 1.0;
        for r in 0..=order {
            acc += binom * self.left.derivative(x, r)? * self.right.derivative(x, order - r)?;
            binom = binom * (order - r) as f64 / (r + 1) as f64;
        }
        Ok(acc)
    }

    fn max_order(&self) -> usize {
        self.left.max_order().min(self.right.max_order())
    }

    fn domain(&self) -> (f64, f64) {
        let (a, b) = self.left.domain();
        let (c, d) = self.right.domain();
        (a.max(c), b.min(d))
    }
}
