//! Orthonormal Daubechies wavelet analysis of sampled functions on `[0, 1]`.
//!
//! Coefficients come from the periodized filter cascade applied to
//! `2^{-J/2}`-scaled samples. Every coefficient carries an interior flag telling
//! whether its wavelet is supported inside `[0, 1]` without wrapping; the
//! `interior_only` mode restricts all level statistics to those.

mod filters;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function_model::{sample, Differentiable, GridFunction};
use crate::holder_analysis::{flat_norm, holder_seminorm};
use crate::numfmt;
use crate::root_calculus::{level_from_value, CriticalLevel, Root};

pub const MAX_ORDER: usize = 10;

/// Coarsest level used when none is given.
pub const DEFAULT_COARSE_LEVEL: u32 = 4;

/// The finest two detail levels are left out of default fits.
pub const FINE_LEVELS_SKIPPED: u32 = 2;

/// Coefficients at or below `NOISE_FACTOR * eps * max |scaled sample|` are
/// indistinguishable from round-off.
pub const NOISE_FACTOR: f64 = 64.0;

const FILTER_TOLERANCE: f64 = 1e-10;

/// Below this input length the cascade runs sequentially.
const PARALLEL_THRESHOLD: usize = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    InteriorOnly,
    Periodized,
}

impl BoundaryMode {
    pub fn interior_only(self) -> bool {
        self == Self::InteriorOnly
    }
}

impl fmt::Display for BoundaryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::InteriorOnly => "interior_only",
            Self::Periodized => "periodized",
        })
    }
}

impl FromStr for BoundaryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interior" | "interior_only" => Ok(Self::InteriorOnly),
            "periodized" => Ok(Self::Periodized),
            other => Err(Error::InvalidParameter(format!(
                "unknown boundary mode {other:?} (expected interior or periodized)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletBasis {
    pub order: usize,
    #[serde(with = "numfmt::real_vec")]
    pub lowpass: Vec<f64>,
    #[serde(with = "numfmt::real_vec")]
    pub highpass: Vec<f64>,
    /// `2S - 1`, the length of the support of the mother wavelet.
    pub support_length: f64,
    pub boundary_mode: BoundaryMode,
}

impl WaveletBasis {
    pub fn filter_len(&self) -> usize {
        self.lowpass.len()
    }
}

/// Quadrature mirror of `h`: `g_n = (-1)^n h_{L-1-n}`.
fn highpass_of(h: &[f64]) -> Vec<f64> {
    let l = h.len();
    (0..l)
        .map(|n| if n % 2 == 0 { h[l - 1 - n] } else { -h[l - 1 - n] })
        .collect()
}

fn validate_filter(order: usize, h: &[f64], g: &[f64]) -> Result<()> {
    let fail = |reason: String| Err(Error::FilterValidation { order, reason });
    let l = h.len();
    for m in 0..l / 2 {
        let s: f64 = (0..l - 2 * m).map(|n| h[n] * h[n + 2 * m]).sum();
        let target = if m == 0 { 1.0 } else { 0.0 };
        if (s - target).abs() > FILTER_TOLERANCE {
            return fail(format!("shift-{m} autocorrelation is {s}"));
        }
    }
    let sum: f64 = h.iter().sum();
    if (sum - std::f64::consts::SQRT_2).abs() > FILTER_TOLERANCE {
        return fail(format!("coefficient sum is {sum}"));
    }
    // moments in the centred, rescaled variable keep the terms O(1)
    let centre = (l as f64 - 1.0) / 2.0;
    let half = l as f64 / 2.0;
    for i in 0..order {
        let moment: f64 = g
            .iter()
            .enumerate()
            .map(|(n, c)| c * ((n as f64 - centre) / half).powi(i as i32))
            .sum();
        if moment.abs() > FILTER_TOLERANCE {
            return fail(format!("highpass moment {i} is {moment}"));
        }
    }
    Ok(())
}

/// Daubechies extremal-phase basis with `order` vanishing moments.
pub fn build_basis(order: usize, boundary_mode: BoundaryMode) -> Result<WaveletBasis> {
    let h = filters::lowpass(order).ok_or(Error::UnsupportedOrder(order))?;
    let g = highpass_of(h);
    validate_filter(order, h, &g)?;
    Ok(WaveletBasis {
        order,
        lowpass: h.to_vec(),
        highpass: g,
        support_length: (2 * order - 1) as f64,
        boundary_mode,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletDecomposition {
    pub basis: WaveletBasis,
    pub j_max: u32,
    pub j_coarse: u32,
    #[serde(with = "numfmt::real_vec")]
    pub scaling_coeffs: Vec<f64>,
    pub scaling_interior: Vec<bool>,
    /// `detail_coeffs[j - j_coarse][k]`.
    pub detail_coeffs: Vec<Vec<f64>>,
    pub interior_mask: Vec<Vec<bool>>,
    #[serde(with = "numfmt::real")]
    pub noise_floor: f64,
}

/// Whether the level-`j` coefficient `k` of a `2^J`-sample cascade with filter
/// length `l` only touches samples `0..2^J` without wrapping.
pub fn is_interior(j_max: u32, j: u32, k: usize, l: usize) -> bool {
    let s = 1usize << (j_max - j);
    s * k + (l - 1) * (s - 1) < 1usize << j_max
}

fn analysis_step(a: &[f64], h: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = a.len();
    let one = |k: usize| -> (f64, f64) {
        let (mut s, mut d) = (0.0, 0.0);
        for (t, (&hn, &gn)) in h.iter().zip(g).enumerate() {
            let v = a[(2 * k + t) % n];
            s += hn * v;
            d += gn * v;
        }
        (s, d)
    };
    if n >= PARALLEL_THRESHOLD {
        (0..n / 2).into_par_iter().map(one).unzip()
    } else {
        (0..n / 2).map(one).unzip()
    }
}

fn synthesis_step(a: &[f64], d: &[f64], h: &[f64], g: &[f64]) -> Vec<f64> {
    let n = 2 * a.len();
    let mut out = vec![0.0; n];
    for k in 0..a.len() {
        for (t, (&hn, &gn)) in h.iter().zip(g).enumerate() {
            out[(2 * k + t) % n] += hn * a[k] + gn * d[k];
        }
    }
    out
}

/// Wavelet coefficients of the sampled function down to level `j_coarse`.
///
/// Uses the first `2^J` samples; the node `x = 1` is dropped.
pub fn decompose(
    g: &GridFunction,
    basis: &WaveletBasis,
    j_coarse: u32,
) -> Result<WaveletDecomposition> {
    let j_max = g.level();
    if j_max < j_coarse + 4 {
        return Err(Error::ResolutionError {
            level: j_max,
            reason: format!("need at least 4 levels above the coarse level {j_coarse}"),
        });
    }
    let scale = (-(j_max as f64) / 2.0).exp2();
    let n = 1usize << j_max;
    let input: Vec<f64> = g.values()[..n].iter().map(|v| v * scale).collect();
    Ok(decompose_scaled(input, basis, j_coarse))
}

fn decompose_scaled(input: Vec<f64>, basis: &WaveletBasis, j_coarse: u32) -> WaveletDecomposition {
    let j_max = input.len().trailing_zeros();
    let peak = input.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let l = basis.filter_len();
    let mut a = input;
    let mut details = Vec::new();
    for _ in j_coarse..j_max {
        let (next, d) = analysis_step(&a, &basis.lowpass, &basis.highpass);
        details.push(d);
        a = next;
    }
    details.reverse();
    let interior_mask = details
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let j = j_coarse + i as u32;
            (0..d.len()).map(|k| is_interior(j_max, j, k, l)).collect()
        })
        .collect();
    WaveletDecomposition {
        scaling_interior: (0..a.len()).map(|k| is_interior(j_max, j_coarse, k, l)).collect(),
        scaling_coeffs: a,
        detail_coeffs: details,
        interior_mask,
        noise_floor: NOISE_FACTOR * f64::EPSILON * peak,
        basis: basis.clone(),
        j_max,
        j_coarse,
    }
}

/// Inverse cascade; returns the `2^J` samples (unscaled).
pub fn reconstruct(dec: &WaveletDecomposition) -> Vec<f64> {
    let b = &dec.basis;
    let mut a = dec.scaling_coeffs.clone();
    for d in &dec.detail_coeffs {
        a = synthesis_step(&a, d, &b.lowpass, &b.highpass);
    }
    let scale = (dec.j_max as f64 / 2.0).exp2();
    a.iter_mut().for_each(|v| *v *= scale);
    a
}

impl WaveletDecomposition {
    /// Detail levels `j_coarse..=j_max - 1`.
    pub fn levels(&self) -> std::ops::RangeInclusive<u32> {
        self.j_coarse..=self.j_max - 1
    }

    /// Default fit window, dropping the finest [`FINE_LEVELS_SKIPPED`] levels.
    pub fn default_fit_range(&self) -> (u32, u32) {
        (self.j_coarse, self.j_max - 1 - FINE_LEVELS_SKIPPED)
    }

    pub fn details(&self, j: u32) -> Result<(&[f64], &[bool])> {
        if !self.levels().contains(&j) {
            return Err(Error::RangeError(format!(
                "level {j} outside {}..={}",
                self.j_coarse,
                self.j_max - 1
            )));
        }
        let i = (j - self.j_coarse) as usize;
        Ok((&self.detail_coeffs[i], &self.interior_mask[i]))
    }

    /// Level sup as used by the checks: sups at or below the noise floor
    /// count as zero.
    pub fn resolved_sup(&self, j: u32, interior_only: bool) -> Result<f64> {
        let s = level_sup(self, j, interior_only)?;
        Ok(if s <= self.noise_floor { 0.0 } else { s })
    }

    /// Sum of squares of all coefficients.
    pub fn energy(&self) -> f64 {
        self.scaling_coeffs
            .iter()
            .chain(self.detail_coeffs.iter().flatten())
            .map(|c| c * c)
            .sum()
    }

    /// Rows `j,k,coefficient,interior` for every detail coefficient.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["j", "k", "coefficient", "interior"])?;
        for j in self.levels() {
            let (d, mask) = self.details(j)?;
            for (k, (c, m)) in d.iter().zip(mask).enumerate() {
                w.write_record([
                    j.to_string(),
                    k.to_string(),
                    numfmt::fmt17(*c),
                    m.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// `max_k |d_{j,k}|`, optionally over interior wavelets only (0 if none).
pub fn level_sup(dec: &WaveletDecomposition, j: u32, interior_only: bool) -> Result<f64> {
    let (d, mask) = dec.details(j)?;
    Ok(d.iter()
        .zip(mask)
        .filter(|(_, &m)| m || !interior_only)
        .fold(0.0f64, |acc, (c, _)| acc.max(c.abs())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySlopeFit {
    pub j_lo: u32,
    pub j_hi: u32,
    /// Levels that entered the regression.
    pub levels: Vec<u32>,
    #[serde(with = "numfmt::real_vec")]
    pub level_sups: Vec<f64>,
    #[serde(with = "numfmt::real")]
    pub slope: f64,
    #[serde(with = "numfmt::real")]
    pub intercept: f64,
    #[serde(with = "numfmt::real")]
    pub r_squared: f64,
    #[serde(with = "numfmt::real")]
    pub regularity_estimate: f64,
    /// Levels whose sup is at or below the noise floor.
    pub excluded_levels: Vec<u32>,
    pub interior_only: bool,
}

/// Least-squares line through `(x, y)`: slope, intercept, r².
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    (slope, intercept, r2)
}

/// Fits `log2 sup_k |d_{j,k}|` against `j` over `j_lo..=j_hi`; the decay
/// exponent `-slope - 1/2` estimates the regularity.
pub fn decay_fit(
    dec: &WaveletDecomposition,
    j_lo: u32,
    j_hi: u32,
    interior_only: bool,
) -> Result<DecaySlopeFit> {
    if j_hi < j_lo + 3 {
        return Err(Error::InvalidParameter(format!(
            "fit window {j_lo}..={j_hi} spans fewer than 4 levels"
        )));
    }
    let mut levels = Vec::new();
    let mut level_sups = Vec::new();
    let mut excluded_levels = Vec::new();
    for j in j_lo..=j_hi {
        let s = level_sup(dec, j, interior_only)?;
        if s > dec.noise_floor {
            levels.push(j);
            level_sups.push(s);
        } else {
            excluded_levels.push(j);
        }
    }
    if levels.len() < 4 {
        return Err(Error::DegenerateFit {
            usable: levels.len(),
        });
    }
    let xs: Vec<f64> = levels.iter().map(|&j| j as f64).collect();
    let ys: Vec<f64> = level_sups.iter().map(|s| s.log2()).collect();
    let (slope, intercept, r_squared) = linear_fit(&xs, &ys);
    Ok(DecaySlopeFit {
        j_lo,
        j_hi,
        levels,
        level_sups,
        slope,
        intercept,
        r_squared,
        regularity_estimate: -slope - 0.5,
        excluded_levels,
        interior_only,
    })
}

/// `max_k |<f, phi_k>| + sup_j 2^{j(s + 1/2)} max_k |<f, psi_{j,k}>|` over the
/// available levels, restricted to interior wavelets in `interior_only` mode.
pub fn besov_norm_estimate(dec: &WaveletDecomposition, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::InvalidParameter(format!("smoothness must be positive, got {s}")));
    }
    let interior = dec.basis.boundary_mode.interior_only();
    let scaling = dec
        .scaling_coeffs
        .iter()
        .zip(&dec.scaling_interior)
        .filter(|(_, &m)| m || !interior)
        .fold(0.0f64, |acc, (c, _)| acc.max(c.abs()));
    let mut detail = 0.0f64;
    for j in dec.levels() {
        detail = detail.max((j as f64 * (s + 0.5)).exp2() * level_sup(dec, j, interior)?);
    }
    Ok(scaling + detail)
}

/// Per-level ratios of a decay check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRatios {
    pub levels: Vec<u32>,
    #[serde(with = "numfmt::real_vec")]
    pub ratios: Vec<f64>,
    #[serde(with = "numfmt::real")]
    pub max_ratio: f64,
}

impl LevelRatios {
    fn from_pairs(pairs: Vec<(u32, f64)>) -> Self {
        let (levels, ratios): (Vec<u32>, Vec<f64>) = pairs.into_iter().unzip();
        let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
        Self {
            levels,
            ratios,
            max_ratio,
        }
    }

    /// Whether the ratios level off: the maximum over the whole window is at
    /// most `factor` times the maximum over its first half.
    pub fn is_stable(&self, factor: f64) -> bool {
        if self.ratios.is_empty() {
            return true;
        }
        let half = self.ratios.len().div_ceil(2);
        let head = self.ratios[..half].iter().cloned().fold(0.0, f64::max);
        self.max_ratio <= factor * head
    }
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalDecayReport {
    #[serde(with = "numfmt::real")]
    pub beta: f64,
    #[serde(with = "numfmt::real")]
    pub holder_seminorm: f64,
    pub ratios: LevelRatios,
    pub boundary_mode: BoundaryMode,
}

fn require_below_order(beta: f64, basis: &WaveletBasis) -> Result<()> {
    if beta >= basis.order as f64 {
        Err(Error::RegularityMismatch {
            beta,
            order: basis.order,
        })
    } else {
        Ok(())
    }
}

/// `sup_k |<f, psi_{j,k}>| 2^{j(beta + 1/2)} / |f|_{C^beta}` per level of the
/// default window.
pub fn classical_decay_check<D: Differentiable + ?Sized>(
    f: &D,
    beta: f64,
    basis: &WaveletBasis,
    j_max: u32,
) -> Result<ClassicalDecayReport> {
    require_below_order(beta, basis)?;
    let dec = decompose(&sample(f, j_max)?, basis, DEFAULT_COARSE_LEVEL)?;
    let semi = holder_seminorm(f, beta, j_max)?.value;
    let interior = basis.boundary_mode.interior_only();
    let (lo, hi) = dec.default_fit_range();
    let pairs = (lo..=hi)
        .map(|j| {
            let s = dec.resolved_sup(j, interior)?;
            Ok((j, ratio(s * (j as f64 * (beta + 0.5)).exp2(), semi)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassicalDecayReport {
        beta,
        holder_seminorm: semi,
        ratios: LevelRatios::from_pairs(pairs),
        boundary_mode: basis.boundary_mode,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalDecay {
    #[serde(with = "numfmt::real")]
    pub x0: f64,
    #[serde(with = "numfmt::real")]
    pub f_x0: f64,
    pub critical_level: CriticalLevel,
    pub ratios: LevelRatios,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropDecayReport {
    #[serde(with = "numfmt::real")]
    pub alpha: f64,
    #[serde(with = "numfmt::real")]
    pub beta: f64,
    #[serde(with = "numfmt::real")]
    pub flat_norm: f64,
    pub global: LevelRatios,
    pub local: Option<LocalDecay>,
    pub boundary_mode: BoundaryMode,
}

/// Coefficients of `f^alpha` against the two bounds: globally
/// `||f||^alpha 2^{-j(alpha beta + 1/2)}`, and near `x0` (from the critical
/// level on) `||f|| f(x0)^{alpha - 1} 2^{-j(beta + 1/2)}` for the wavelets whose
/// support contains `x0`.
pub fn prop_decay_check<D: Differentiable + ?Sized>(
    f: &D,
    alpha: f64,
    beta: f64,
    basis: &WaveletBasis,
    j_max: u32,
    x0: Option<f64>,
) -> Result<PropDecayReport> {
    require_below_order(beta, basis)?;
    let norm = flat_norm(f, beta, j_max)?;
    if !norm.is_finite() {
        return Err(Error::InfiniteNorm);
    }
    let dec = decompose(&sample(&Root::new(f, alpha), j_max)?, basis, DEFAULT_COARSE_LEVEL)?;
    let interior = basis.boundary_mode.interior_only();
    let (lo, hi) = dec.default_fit_range();

    let global = (lo..=hi)
        .map(|j| {
            let s = dec.resolved_sup(j, interior)?;
            let bound = norm.powf(alpha) * (-(j as f64) * (alpha * beta + 0.5)).exp2();
            Ok((j, ratio(s, bound)))
        })
        .collect::<Result<Vec<_>>>()?;

    let local = match x0 {
        None => None,
        Some(x0) => {
            let fx0 = f.value(x0)?;
            if !(fx0 > 0.0) {
                return Err(Error::SingularPoint { x: x0, order: 0 });
            }
            let critical_level = level_from_value(beta, fx0, basis.support_length, norm)?;
            let start = critical_level.level().map_or(u32::MAX, |c| c.max(lo));
            let width = basis.support_length;
            let mut pairs = Vec::new();
            for j in start..=hi {
                let (d, mask) = dec.details(j)?;
                let step = (-(j as f64)).exp2();
                let s = d
                    .iter()
                    .zip(mask)
                    .enumerate()
                    .filter(|(k, (_, &m))| {
                        let k = *k as f64;
                        (m || !interior) && k * step <= x0 && x0 <= (k + width) * step
                    })
                    .fold(0.0f64, |acc, (_, (c, _))| acc.max(c.abs()));
                let s = if s <= dec.noise_floor { 0.0 } else { s };
                let bound =
                    norm * fx0.powf(alpha - 1.0) * (-(j as f64) * (beta + 0.5)).exp2();
                pairs.push((j, ratio(s, bound)));
            }
            Some(LocalDecay {
                x0,
                f_x0: fx0,
                critical_level,
                ratios: LevelRatios::from_pairs(pairs),
            })
        }
    };

    Ok(PropDecayReport {
        alpha,
        beta,
        flat_norm: norm,
        global: LevelRatios::from_pairs(global),
        local,
        boundary_mode: basis.boundary_mode,
    })
}

/// Per-level sups keyed by level, for reports.
pub fn level_sups(dec: &WaveletDecomposition, interior_only: bool) -> Result<BTreeMap<u32, f64>> {
    dec.levels()
        .map(|j| Ok((j, level_sup(dec, j, interior_only)?)))
        .collect()
}
