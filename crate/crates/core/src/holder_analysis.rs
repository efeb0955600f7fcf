//! Classical Hölder seminorms and the flatness seminorm `|f|_{H^beta}` on dyadic
//! grids.
//!
//! All sups are taken over grid nodes, so every value here is a lower bound of
//! the continuum quantity; results carry the grid level they were computed on.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function_model::{paper_floor, Differentiable};
use crate::numfmt;

/// Values of `f` below this are exact zeros for the flatness ratio.
pub const ZERO_FLOOR: f64 = 1e-300;

/// Grid values below `-NEGATIVITY_TOLERANCE` are rejected.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-12;

/// Above this many cells the Hölder pair sweep is no longer exhaustive.
pub const FULL_PAIR_CELLS: usize = 1 << 12;

/// Index separation covered exhaustively on fine grids.
pub const LOCAL_PAIR_RADIUS: usize = 1024;

/// Dyadic grid of spacing `2^{-level}` over a closed interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    lo: f64,
    level: u32,
    cells: usize,
}

impl Grid {
    pub fn over(domain: (f64, f64), level: u32) -> Self {
        let (lo, hi) = domain;
        let cells = ((hi - lo) * (level as f64).exp2()).round() as usize;
        Self { lo, level, cells }
    }

    pub fn unit(level: u32) -> Self {
        Self::over((0.0, 1.0), level)
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn spacing(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    pub fn node(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.spacing()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.cells).map(|i| self.node(i))
    }

    /// `order`-th derivative at every node.
    pub fn tabulate<D: Differentiable + ?Sized>(&self, f: &D, order: usize) -> Result<Vec<f64>> {
        (0..=self.cells)
            .into_par_iter()
            .map(|i| f.derivative(self.node(i), order))
            .collect()
    }
}

/// Location attaining (approximately) a grid sup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// Flatness ratio of derivative order `j` at `x`.
    Order {
        j: usize,
        #[serde(with = "numfmt::real")]
        x: f64,
    },
    /// Hölder increment quotient between `x` and `y`.
    Pair {
        #[serde(with = "numfmt::real")]
        x: f64,
        #[serde(with = "numfmt::real")]
        y: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeminormResult {
    #[serde(with = "numfmt::real")]
    pub value: f64,
    #[serde(with = "numfmt::real_map")]
    pub per_order: BTreeMap<usize, f64>,
    pub witness: Vec<Witness>,
    pub grid_level: u32,
}

impl SeminormResult {
    fn zero(grid_level: u32) -> Self {
        Self {
            value: 0.0,
            per_order: BTreeMap::new(),
            witness: Vec::new(),
            grid_level,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// First maximum in index order; `None` only for an empty slice.
fn first_argmax(values: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if !(v > b) => {}
            _ => best = Some((i, v)),
        }
    }
    best
}

fn require_order<D: Differentiable + ?Sized>(f: &D, order: usize) -> Result<()> {
    let available = f.max_order();
    if order > available {
        Err(Error::OrderUnavailable { order, available })
    } else {
        Ok(())
    }
}

/// `sup |f^{(order)}|` over the grid, with the first maximizing node.
pub fn sup_norm<D: Differentiable + ?Sized>(f: &D, order: usize, level: u32) -> Result<(f64, f64)> {
    require_order(f, order)?;
    let grid = Grid::over(f.domain(), level);
    let vals: Vec<f64> = grid.tabulate(f, order)?.into_iter().map(f64::abs).collect();
    let (i, v) = first_argmax(&vals).expect("grids have at least one node");
    Ok((v, grid.node(i)))
}

/// `|f|_{C^beta}`: the sup over node pairs of the `floor(beta)`-th derivative
/// increment divided by `|x - y|^{beta - floor(beta)}`.
pub fn holder_seminorm<D: Differentiable + ?Sized>(
    f: &D,
    beta: f64,
    level: u32,
) -> Result<SeminormResult> {
    check_beta(beta)?;
    let k = paper_floor(beta);
    require_order(f, k)?;
    let exponent = beta - k as f64;
    let grid = Grid::over(f.domain(), level);
    let d = grid.tabulate(f, k)?;
    let mut out = SeminormResult::zero(level);

    if let Some(i) = d.iter().position(|v| !v.is_finite()) {
        let l = if i < grid.cells() { i + 1 } else { i - 1 };
        out.value = f64::INFINITY;
        out.per_order.insert(k, f64::INFINITY);
        out.witness.push(Witness::Pair {
            x: grid.node(i),
            y: grid.node(l),
        });
        return Ok(out);
    }
    if grid.cells() == 0 {
        out.per_order.insert(k, 0.0);
        return Ok(out);
    }

    let (value, i, l) = pair_sup(&d, &grid, exponent);
    out.value = value;
    out.per_order.insert(k, value);
    out.witness.push(Witness::Pair {
        x: grid.node(i),
        y: grid.node(l),
    });
    Ok(out)
}

/// Sup of `|d[i] - d[l]| / ((l - i) h)^s` over the pair set of the grid.
///
/// Small grids use every pair. Larger ones use all pairs up to index separation
/// [`LOCAL_PAIR_RADIUS`] plus every pair of the sub-lattice with
/// [`FULL_PAIR_CELLS`] cells, so the pair set of level `J` contains that of any
/// coarser level up to 12.
fn pair_sup(d: &[f64], grid: &Grid, exponent: f64) -> (f64, usize, usize) {
    let n = grid.cells();
    let h = grid.spacing();
    let denom: Vec<f64> = (0..=n).map(|m| (m as f64 * h).powf(exponent)).collect();
    let stride = if n <= FULL_PAIR_CELLS {
        1
    } else {
        n / FULL_PAIR_CELLS
    };
    let radius = if stride == 1 { n } else { LOCAL_PAIR_RADIUS };

    let best_from = |i: usize| -> (f64, usize, usize) {
        let mut best = (0.0f64, i, (i + 1).min(n));
        let local_end = (i + radius).min(n);
        for l in i + 1..=local_end {
            let q = (d[i] - d[l]).abs() / denom[l - i];
            if q > best.0 {
                best = (q, i, l);
            }
        }
        if stride > 1 && i.is_multiple_of(stride) {
            let mut l = (local_end / stride + 1) * stride;
            while l <= n {
                let q = (d[i] - d[l]).abs() / denom[l - i];
                if q > best.0 {
                    best = (q, i, l);
                }
                l += stride;
            }
        }
        best
    };

    (0..n)
        .into_par_iter()
        .map(best_from)
        .reduce(
            || (0.0, 0, 1.min(n)),
            |a, b| {
                if b.0 > a.0 || (b.0 == a.0 && (b.1, b.2) < (a.1, a.2)) {
                    b
                } else {
                    a
                }
            },
        )
}

/// The three terms of `||f||_{C^beta}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderNorm {
    #[serde(with = "numfmt::real")]
    pub sup: f64,
    #[serde(with = "numfmt::real")]
    pub derivative_sup: f64,
    pub seminorm: SeminormResult,
    #[serde(with = "numfmt::real")]
    pub total: f64,
}

pub fn holder_norm_parts<D: Differentiable + ?Sized>(
    f: &D,
    beta: f64,
    level: u32,
) -> Result<HolderNorm> {
    let seminorm = holder_seminorm(f, beta, level)?;
    let (sup, _) = sup_norm(f, 0, level)?;
    let (derivative_sup, _) = sup_norm(f, paper_floor(beta), level)?;
    Ok(HolderNorm {
        sup,
        derivative_sup,
        total: sup + derivative_sup + seminorm.value,
        seminorm,
    })
}

/// `||f||_inf + ||f^{(floor beta)}||_inf + |f|_{C^beta}`.
pub fn holder_norm<D: Differentiable + ?Sized>(f: &D, beta: f64, level: u32) -> Result<f64> {
    Ok(holder_norm_parts(f, beta, level)?.total)
}

/// `(|d|^beta / f^(beta - j))^(1/j)`, with `0/0 = 0` and `positive/0 = inf`.
pub fn flatness_ratio(f_value: f64, derivative: f64, beta: f64, j: usize) -> f64 {
    let d = derivative.abs();
    if d == 0.0 {
        return 0.0;
    }
    if f_value < ZERO_FLOOR {
        return f64::INFINITY;
    }
    let jf = j as f64;
    ((beta / jf) * d.ln() - ((beta - jf) / jf) * f_value.ln()).exp()
}

/// Values of `f` at the grid nodes, rejecting negative ones and clamping
/// round-off negatives to zero.
fn nonnegative_values<D: Differentiable + ?Sized>(f: &D, grid: &Grid) -> Result<Vec<f64>> {
    let vals = grid.tabulate(f, 0)?;
    for (i, &v) in vals.iter().enumerate() {
        if v.is_nan() || v < -NEGATIVITY_TOLERANCE {
            return Err(Error::NegativityError {
                x: grid.node(i),
                value: v,
            });
        }
    }
    Ok(vals.into_iter().map(|v| v.max(0.0)).collect())
}

/// Flatness ratios per order, `ratios[j - 1][i]`.
fn flatness_ratios<D: Differentiable + ?Sized>(
    f: &D,
    beta: f64,
    grid: &Grid,
) -> Result<Vec<Vec<f64>>> {
    let top = paper_floor(beta);
    require_order(f, top)?;
    let vals = nonnegative_values(f, grid)?;
    (1..=top)
        .map(|j| {
            let d = grid.tabulate(f, j)?;
            d.iter()
                .zip(&vals)
                .enumerate()
                .map(|(i, (&dj, &fv))| {
                    if dj.is_nan() {
                        Err(Error::InvalidParameter(format!(
                            "derivative of order {j} is NaN at x = {}",
                            grid.node(i)
                        )))
                    } else {
                        Ok(flatness_ratio(fv, dj, beta, j))
                    }
                })
                .collect()
        })
        .collect()
}

/// `|f|_{H^beta} = max_{1 <= j < beta} sup_x (|f^{(j)}|^beta / f^(beta - j))^(1/j)`.
///
/// Zero for `beta <= 1`. Infinite, with a witness, when `f` vanishes at a node
/// where some lower derivative does not.
pub fn flatness_seminorm<D: Differentiable + ?Sized>(
    f: &D,
    beta: f64,
    level: u32,
) -> Result<SeminormResult> {
    check_beta(beta)?;
    let grid = Grid::over(f.domain(), level);
    let mut out = SeminormResult::zero(level);
    if beta <= 1.0 {
        // still reject negative input
        nonnegative_values(f, &grid)?;
        return Ok(out);
    }
    let ratios = flatness_ratios(f, beta, &grid)?;
    let mut best: Option<(f64, usize)> = None;
    for (idx, r) in ratios.iter().enumerate() {
        let j = idx + 1;
        let (i, v) = first_argmax(r).expect("non-empty grid");
        out.per_order.insert(j, v);
        out.witness.push(Witness::Order { j, x: grid.node(i) });
        if best.is_none_or(|(b, _)| v > b) {
            best = Some((v, idx));
        }
    }
    if let Some((v, idx)) = best {
        out.value = v;
        // maximizing order first
        let w = out.witness.remove(idx);
        out.witness.insert(0, w);
    }
    Ok(out)
}

/// `||f||_{C^beta} + |f|_{H^beta}` with its parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatNorm {
    pub holder: HolderNorm,
    pub flatness: SeminormResult,
    #[serde(with = "numfmt::real")]
    pub total: f64,
}

pub fn flat_norm_parts<D: Differentiable + ?Sized>(
    f: &D,
    beta: f64,
    level: u32,
) -> Result<FlatNorm> {
    let flatness = flatness_seminorm(f, beta, level)?;
    let holder = holder_norm_parts(f, beta, level)?;
    Ok(FlatNorm {
        total: holder.total + flatness.value,
        holder,
        flatness,
    })
}

pub fn flat_norm<D: Differentiable + ?Sized>(f: &D, beta: f64, level: u32) -> Result<f64> {
    Ok(flat_norm_parts(f, beta, level)?.total)
}

/// At most this many violating nodes are listed by [`membership`].
pub const MAX_LISTED_VIOLATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub member: bool,
    #[serde(with = "numfmt::real")]
    pub seminorm: f64,
    #[serde(with = "numfmt::real")]
    pub holder_norm: f64,
    pub violating_points: Vec<Witness>,
}

/// Whether `|f^{(j)}|^beta <= kappa^j f^(beta - j)` at every node and order, and
/// the classical Hölder norm is finite.
pub fn membership<D: Differentiable + ?Sized>(
    f: &D,
    beta: f64,
    kappa_budget: f64,
    level: u32,
) -> Result<Membership> {
    let seminorm = flatness_seminorm(f, beta, level)?;
    let holder = holder_norm(f, beta, level)?;
    let mut violating_points = Vec::new();
    if beta > 1.0 {
        let grid = Grid::over(f.domain(), level);
        let ratios = flatness_ratios(f, beta, &grid)?;
        'outer: for (idx, r) in ratios.iter().enumerate() {
            for (i, &v) in r.iter().enumerate() {
                if v > kappa_budget * (1.0 + 1e-12) {
                    violating_points.push(Witness::Order {
                        j: idx + 1,
                        x: grid.node(i),
                    });
                    if violating_points.len() >= MAX_LISTED_VIOLATIONS {
                        break 'outer;
                    }
                }
            }
        }
    }
    Ok(Membership {
        member: seminorm.value <= kappa_budget && holder.is_finite(),
        seminorm: seminorm.value,
        holder_norm: holder,
        violating_points,
    })
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "smoothness index must be positive, got {beta}"
        )))
    }
}
