//! Acceptance checks, one `PASS`/`FAIL` line per criterion.
//!
//! Expected values come from oracles written here: closed forms, brute-force
//! sweeps, Richardson-extrapolated finite differences and convolution with
//! explicit filters. The library is only trusted for the quantity under test.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use holdercone::function_model::Differentiable;
use holdercone::holder_analysis::{flat_norm, flatness_seminorm};
use holdercone::root_calculus::{critical_level, power_derivative, stability_radius, Root};
use holdercone::theorem_suite::{verify_auto_flatness, ClaimId, Verdict, VerificationReport};
use holdercone::wavelet_engine::{
    besov_norm_estimate, build_basis, decay_fit, decompose, prop_decay_check, reconstruct,
    BoundaryMode, WaveletDecomposition,
};
use holdercone::{sample, FunctionSpec, GridFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "closed-form seminorm", limit: secs(1), run: closed_form_seminorm },
        Criterion { id: 2, name: "membership iff", limit: secs(5), run: membership_iff },
        Criterion { id: 3, name: "cone algebra fuzz", limit: secs(60), run: cone_fuzz },
        Criterion { id: 4, name: "auto-flatness constant", limit: secs(30), run: auto_flatness },
        Criterion { id: 5, name: "Faa di Bruno vs finite differences", limit: secs(10), run: faa_di_bruno },
        Criterion { id: 6, name: "local stability", limit: secs(10), run: local_stability },
        Criterion { id: 7, name: "root decay and Besov ratio", limit: secs(30), run: main_decay },
        Criterion { id: 8, name: "Lipschitz cap of the square root", limit: secs(10), run: lipschitz_cap },
        Criterion { id: 9, name: "wavelet infrastructure", limit: secs(10), run: wavelet_infrastructure },
        Criterion { id: 10, name: "decay ratios by level", limit: secs(30), run: level_ratios },
        Criterion { id: 11, name: "suite determinism", limit: secs(180), run: suite_determinism },
    ];
    let mut failures = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(c.run)
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > c.limit => Err(format!(
                "{detail}; took {:.2}s, limit {}s",
                elapsed.as_secs_f64(),
                c.limit.as_secs()
            )),
            other => other,
        };
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{tag} criterion {:>2} ({}) [{:.2}s]: {detail}",
            c.id,
            c.name,
            elapsed.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn closed_form_seminorm() -> Outcome {
    // |f'|^2 / f = 1 / (x + q) peaks at x = 0 with value 1/q.
    let q = 0.5;
    let got = ok(flatness_seminorm(&FunctionSpec::affine_plus(q), 2.0, 14))?.value;
    ensure((got - 1.0 / q).abs() <= 1e-4, || format!("got {got}, expected {}", 1.0 / q))?;
    Ok(format!("|f| = {got:.12}"))
}

fn membership_iff() -> Outcome {
    let mut cells = Vec::new();
    for gamma in [1.0, 2.0, 3.0] {
        for beta in [1.5, 2.0, 2.5, 3.0] {
            let v = ok(flatness_seminorm(&FunctionSpec::power(gamma), beta, 12))?.value;
            let expect_finite = beta <= gamma;
            ensure(v.is_finite() == expect_finite, || {
                format!("gamma={gamma} beta={beta}: seminorm {v}, expected finite={expect_finite}")
            })?;
            cells.push((if v.is_finite() { "F" } else { "inf" }).to_string());
        }
    }
    Ok(format!("12 cells agree [{}]", cells.join(" ")))
}

/// A random member of the cone for exponents up to `beta`.
fn random_member(rng: &mut ChaCha8Rng, beta: f64) -> FunctionSpec {
    let spec = match rng.gen_range(0..5) {
        0 => FunctionSpec::constant(rng.gen_range(0.1..3.0)),
        1 => FunctionSpec::affine_plus(rng.gen_range(0.05..2.0)),
        2 => FunctionSpec::power(rng.gen_range(beta..beta + 3.0)),
        3 => FunctionSpec::flat_family(rng.gen_range(beta..beta + 2.0), rng.gen_range(0.02..0.3)),
        _ => FunctionSpec::scaled_sum([
            (rng.gen_range(0.1..2.0), FunctionSpec::power(rng.gen_range(beta..beta + 2.0))),
            (rng.gen_range(0.1..2.0), FunctionSpec::affine_plus(rng.gen_range(0.1..1.0))),
        ]),
    };
    spec.scaled(rng.gen_range(0.2..5.0))
}

fn cone_fuzz() -> Outcome {
    const LEVEL: u32 = 9;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_c0de);
    let mut worst_triangle = 0.0f64;
    let mut worst_homogeneity = 0.0f64;
    let mut worst_product = 0.0f64;
    for trial in 0..1000 {
        let beta = rng.gen_range(1.05..4.0);
        let f = random_member(&mut rng, beta);
        let g = random_member(&mut rng, beta);
        let sf = ok(flatness_seminorm(&f, beta, LEVEL))?.value;
        let sg = ok(flatness_seminorm(&g, beta, LEVEL))?.value;
        let sum = FunctionSpec::scaled_sum([(1.0, f.clone()), (1.0, g.clone())]);
        let ss = ok(flatness_seminorm(&sum, beta, LEVEL))?.value;
        let excess = ss - (sf + sg);
        worst_triangle = worst_triangle.max(excess);
        ensure(excess <= 1e-9 * (1.0 + sf + sg), || {
            format!("trial {trial}: |f+g| = {ss} > {sf} + {sg} for {f:?}, {g:?}, beta {beta}")
        })?;

        let lambda = rng.gen_range(0.1..10.0);
        let sl = ok(flatness_seminorm(&f.clone().scaled(lambda), beta, LEVEL))?.value;
        let gap = (sl - lambda * sf).abs() / (1.0 + lambda * sf);
        worst_homogeneity = worst_homogeneity.max(gap);
        ensure(gap <= 1e-9, || {
            format!("trial {trial}: |{lambda} f| = {sl}, {lambda} |f| = {}", lambda * sf)
        })?;

        let nf = ok(flat_norm(&f, beta, LEVEL))?;
        let ng = ok(flat_norm(&g, beta, LEVEL))?;
        let product = holdercone::function_model::ProductOf { left: &f, right: &g };
        let np = ok(flat_norm(&product, beta, LEVEL))?;
        let r = np / (nf * ng);
        worst_product = worst_product.max(r / (beta + 2.0).exp2());
        ensure(r <= (beta + 2.0).exp2(), || {
            format!("trial {trial}: product ratio {r} above 2^(beta+2) for {f:?}, {g:?}, beta {beta}")
        })?;
    }
    Ok(format!(
        "max triangle excess {worst_triangle:.2e}, max homogeneity gap {worst_homogeneity:.2e}, \
         max product ratio {worst_product:.3} of budget"
    ))
}

/// `a (x - x0)^2 + b x^2 + c x^4 + d` with non-negative coefficients.
struct Quartic {
    a: f64,
    x0: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl Quartic {
    fn value(&self, x: f64) -> f64 {
        self.a * (x - self.x0).powi(2) + self.b * x * x + self.c * x.powi(4) + self.d
    }

    fn slope(&self, x: f64) -> f64 {
        2.0 * self.a * (x - self.x0) + 2.0 * self.b * x + 4.0 * self.c * x.powi(3)
    }

    fn spec(&self) -> FunctionSpec {
        FunctionSpec::scaled_sum([
            (self.a, FunctionSpec::shifted_square(self.x0)),
            (self.b, FunctionSpec::power(2.0)),
            (self.c, FunctionSpec::power(4.0)),
            (self.d, FunctionSpec::constant(1.0)),
        ])
    }

    /// Brute-force `sup |f'(x) - f'(y)| / |x - y|^{beta - 1}` over `[-1, 2]`.
    fn extension_seminorm(&self, beta: f64) -> f64 {
        let n = 600;
        let xs: Vec<f64> = (0..=n).map(|i| -1.0 + 3.0 * i as f64 / n as f64).collect();
        let ds: Vec<f64> = xs.iter().map(|&x| self.slope(x)).collect();
        let mut best = 0.0f64;
        for i in 0..xs.len() {
            for k in i + 1..xs.len() {
                best = best.max((ds[i] - ds[k]).abs() / (xs[k] - xs[i]).powf(beta - 1.0));
            }
        }
        best
    }

    /// `sup_x |f'(x)|^beta / f(x)^{beta - 1}` on a fine grid of `[0, 1]`.
    fn flatness(&self, beta: f64) -> f64 {
        (0..=1 << 14)
            .map(|i| {
                let x = i as f64 / (1 << 14) as f64;
                let (v, d) = (self.value(x), self.slope(x).abs());
                if d == 0.0 {
                    0.0
                } else {
                    d.powf(beta) / v.powf(beta - 1.0)
                }
            })
            .fold(0.0, f64::max)
    }
}

fn auto_flatness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xf1a7);
    let mut worst = 0.0f64;
    for trial in 0..50 {
        let q = Quartic {
            a: rng.gen_range(0.0..3.0),
            x0: rng.gen_range(0.0..1.0),
            b: rng.gen_range(0.0..2.0),
            c: rng.gen_range(0.0..2.0),
            d: if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..1.0) },
        };
        let beta = rng.gen_range(1.0f64..2.0).max(1.01);
        let beta = if trial % 10 == 0 { 2.0 } else { beta };
        let budget = beta.exp2();

        // The oracle undersamples the extension seminorm, so its ratio is an upper bound
        // for the true one.
        let oracle = q.flatness(beta) / q.extension_seminorm(beta);
        let report = ok(verify_auto_flatness(&q.spec(), beta, 10))?;
        worst = worst.max(oracle / budget).max(report.measured_constant / budget);
        ensure(oracle <= budget, || {
            format!("trial {trial}: oracle ratio {oracle} above 2^beta = {budget} (beta {beta})")
        })?;
        ensure(report.verdict == Verdict::Pass, || {
            format!(
                "trial {trial}: library ratio {} above {budget} (beta {beta})",
                report.measured_constant
            )
        })?;
    }
    Ok(format!("50 functions, worst ratio {worst:.3} of 2^beta"))
}

/// Richardson-extrapolated central differences of order `k`.
fn fd_derivative(g: &dyn Fn(f64) -> f64, x: f64, k: usize, h0: f64) -> f64 {
    let binom = |n: usize, r: usize| (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
    let diff = |h: f64| {
        (0..=k)
            .map(|i| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                sign * binom(k, i) * g(x + (k as f64 / 2.0 - i as f64) * h)
            })
            .sum::<f64>()
            / h.powi(k as i32)
    };
    let mut table: Vec<f64> = (0..4).map(|i| diff(h0 / 2f64.powi(i))).collect();
    for m in 1..4 {
        let factor = 4f64.powi(m);
        table = table.windows(2).map(|w| (factor * w[1] - w[0]) / (factor - 1.0)).collect();
    }
    table[0]
}

fn faa_di_bruno() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xfaa);
    let h0 = 0.05;
    let mut cases = 0;
    let mut worst = 0.0f64;
    while cases < 500 {
        let k = rng.gen_range(1..=4usize);
        let spec = match rng.gen_range(0..4) {
            0 => FunctionSpec::affine_plus(rng.gen_range(0.01..2.0)),
            1 => FunctionSpec::flat_family(rng.gen_range(k.max(2) as f64..6.5), rng.gen_range(0.05..0.4)),
            2 => FunctionSpec::power(rng.gen_range(4.0..7.0)),
            _ => FunctionSpec::scaled_sum([
                (rng.gen_range(0.1..2.0), FunctionSpec::shifted_square(rng.gen_range(0.0..1.0))),
                (rng.gen_range(0.05..1.0), FunctionSpec::constant(1.0)),
            ]),
        };
        let alpha = rng.gen_range(0.05..1.0);
        let x = rng.gen_range(0.2..0.8);
        let reach = k as f64 / 2.0 * h0;
        let floor = (0..=20)
            .map(|i| spec.evaluate(x - reach + 2.0 * reach * i as f64 / 20.0, 0).unwrap())
            .fold(f64::INFINITY, f64::min);
        if floor < 0.01 {
            continue;
        }
        cases += 1;
        let g = |t: f64| spec.evaluate(t, 0).unwrap().powf(alpha);
        let exact = ok(power_derivative(&spec, alpha, k, x))?;
        let fd = fd_derivative(&g, x, k, h0);
        let scale = exact.abs().max(g(x));
        let rel = (fd - exact).abs() / scale;
        worst = worst.max(rel);
        ensure(rel <= 1e-5, || {
            format!("{spec:?} alpha={alpha} k={k} x={x}: exact {exact}, finite differences {fd}")
        })?;
    }
    Ok(format!("500 cases, worst relative error {worst:.2e}"))
}

fn local_stability() -> Outcome {
    const LEVEL: u32 = 14;
    let mut summary = Vec::new();
    for delta in [0.05, 0.1, 0.2] {
        let f = FunctionSpec::flat_family(4.0, delta);
        let norm = ok(flat_norm(&f, 4.0, LEVEL))?;
        let n = 1usize << LEVEL;
        let mut violations = 0usize;
        let mut worst = 0.0f64;
        for i in 0..=n {
            let x = i as f64 / n as f64;
            let fx = ok(f.value(x))?;
            let r = ok(stability_radius(&f, 4.0, x, norm))?;
            for y in [(x + r).min(1.0), (x - r).max(0.0)] {
                let step = (ok(f.value(y))? - fx).abs();
                let q = if step == 0.0 { 0.0 } else { step / (0.5 * fx) };
                worst = worst.max(q);
                if step > 0.5 * fx + 1e-12 {
                    violations += 1;
                }
            }
        }
        ensure(violations == 0, || format!("delta {delta}: {violations} violations"))?;
        summary.push(format!("delta {delta}: worst {worst:.3}"));
    }
    Ok(format!("zero violations ({})", summary.join(", ")))
}

fn root_decomposition(f: &FunctionSpec, order: usize, level: u32) -> Result<WaveletDecomposition, String> {
    let basis = ok(build_basis(order, BoundaryMode::InteriorOnly))?;
    let root = Root::new(f, 0.5);
    ok(decompose(&ok(sample(&root, level))?, &basis, 4))
}

fn main_decay() -> Outcome {
    let mut estimates = Vec::new();
    let mut ratios = Vec::new();
    for delta in [0.02, 0.05, 0.1, 0.2] {
        let f = FunctionSpec::flat_family(4.0, delta);
        let dec = root_decomposition(&f, 4, 14)?;
        let fit = ok(decay_fit(&dec, 4, 11, true))?;
        ensure(fit.regularity_estimate >= 1.8, || {
            format!("delta {delta}: estimate {} below 1.8", fit.regularity_estimate)
        })?;
        let besov = ok(besov_norm_estimate(&dec, 2.0))?;
        let norm = ok(flat_norm(&f, 4.0, 14))?;
        estimates.push(fit.regularity_estimate);
        ratios.push(besov / norm.sqrt());
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let spread = ratios.iter().map(|r| (r / mean - 1.0).abs()).fold(0.0, f64::max);
    ensure(spread <= 0.25, || format!("Besov ratios {ratios:?} deviate {spread:.3} from their mean"))?;
    Ok(format!(
        "estimates {:.3?}, Besov ratios {:.4?} (max deviation {:.1}%)",
        estimates,
        ratios,
        100.0 * spread
    ))
}

fn lipschitz_cap() -> Outcome {
    let dec = root_decomposition(&FunctionSpec::shifted_square(0.5), 4, 14)?;
    let fit = ok(decay_fit(&dec, 4, 11, true))?;
    let est = fit.regularity_estimate;
    ensure((0.85..=1.2).contains(&est), || format!("estimate {est} outside [0.85, 1.2]"))?;
    Ok(format!("estimate {est:.4}, r^2 {:.4}", fit.r_squared))
}

/// One analysis step by direct convolution of the filters with wrap-around.
fn analysis_step(a: &[f64], h: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = a.len();
    let l = h.len();
    let g: Vec<f64> = (0..l)
        .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } * h[l - 1 - i])
        .collect();
    let mut lo = vec![0.0; n / 2];
    let mut hi = vec![0.0; n / 2];
    for k in 0..n / 2 {
        for i in 0..l {
            let s = a[(2 * k + i) % n];
            lo[k] += h[i] * s;
            hi[k] += g[i] * s;
        }
    }
    (lo, hi)
}

fn wavelet_infrastructure() -> Outcome {
    let mut worst_rec = 0.0f64;
    let mut worst_moment = 0.0f64;
    let mut worst_gram = 0.0f64;
    let mut worst_oracle = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(0x3a7e);
    for order in 1..=10usize {
        let periodic = ok(build_basis(order, BoundaryMode::Periodized))?;
        let interior = ok(build_basis(order, BoundaryMode::InteriorOnly))?;

        let level = 12;
        let n = 1usize << level;
        let values: Vec<f64> = (0..=n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = ok(GridFunction::new(level, values.clone()))?;
        let dec = ok(decompose(&g, &periodic, 3))?;
        let back = reconstruct(&dec);
        let rec = back
            .iter()
            .zip(&values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst_rec = worst_rec.max(rec);
        ensure(rec <= 1e-10, || format!("order {order}: reconstruction error {rec:.3e}"))?;

        // Finest detail level against an explicit convolution.
        let scale = (-(level as f64) / 2.0).exp2();
        let scaled: Vec<f64> = values[..n].iter().map(|v| v * scale).collect();
        let (_, finest) = analysis_step(&scaled, &periodic.lowpass);
        let (d, _) = ok(dec.details(level - 1))?;
        let gap = finest.iter().zip(d).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst_oracle = worst_oracle.max(gap);
        ensure(gap <= 1e-12, || format!("order {order}: finest details differ by {gap:.3e}"))?;

        let degree = order as i32 - 1;
        let poly: Vec<f64> = (0..=n).map(|i| (i as f64 / n as f64).powi(degree)).collect();
        let pdec = ok(decompose(&ok(GridFunction::new(level, poly))?, &interior, 3))?;
        for j in pdec.levels() {
            let (d, mask) = ok(pdec.details(j))?;
            for (c, &m) in d.iter().zip(mask) {
                if m {
                    worst_moment = worst_moment.max(c.abs());
                }
            }
        }
        ensure(worst_moment <= 1e-9, || {
            format!("order {order}: interior coefficient {worst_moment:.3e} on a degree-{degree} polynomial")
        })?;

        let gram = gram_defect(&periodic, 6)?;
        worst_gram = worst_gram.max(gram);
        ensure(gram <= 1e-8, || format!("order {order}: Gram defect {gram:.3e}"))?;
    }
    Ok(format!(
        "orders 1..=10: reconstruction {worst_rec:.1e}, convolution oracle {worst_oracle:.1e}, \
         moments {worst_moment:.1e}, Gram {worst_gram:.1e}"
    ))
}

/// Largest deviation from the identity of the Gram matrix of the periodized
/// basis functions at `level`, each synthesized from a unit coefficient.
fn gram_defect(basis: &holdercone::wavelet_engine::WaveletBasis, level: u32) -> Result<f64, String> {
    let n = 1usize << level;
    let zero = ok(GridFunction::new(level, vec![0.0; n + 1]))?;
    let template = ok(decompose(&zero, basis, 2))?;
    let mut slots = Vec::new();
    for k in 0..template.scaling_coeffs.len() {
        slots.push((None, k));
    }
    for (i, row) in template.detail_coeffs.iter().enumerate() {
        for k in 0..row.len() {
            slots.push((Some(i), k));
        }
    }
    let scale = (-(level as f64) / 2.0).exp2();
    let vectors: Vec<Vec<f64>> = slots
        .iter()
        .map(|&(row, k)| {
            let mut dec = template.clone();
            match row {
                None => dec.scaling_coeffs[k] = 1.0,
                Some(i) => dec.detail_coeffs[i][k] = 1.0,
            }
            reconstruct(&dec).iter().take(n).map(|v| v * scale).collect()
        })
        .collect();
    let mut worst = 0.0f64;
    for (a, va) in vectors.iter().enumerate() {
        for (b, vb) in vectors.iter().enumerate() {
            let dot: f64 = va.iter().zip(vb).map(|(x, y)| x * y).sum();
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).abs());
        }
    }
    ensure(vectors.len() == n, || format!("{} basis functions for {n} samples", vectors.len()))?;
    Ok(worst)
}

fn level_ratios() -> Outcome {
    let basis = ok(build_basis(5, BoundaryMode::InteriorOnly))?;
    let x0 = 0.9;
    let mut summary = Vec::new();
    for delta in [0.05, 0.1, 0.2] {
        let f = FunctionSpec::flat_family(4.0, delta);
        let report = ok(prop_decay_check(&f, 0.5, 4.0, &basis, 14, Some(x0)))?;
        let global = &report.global;
        ensure(global.levels.first() == Some(&4) && global.levels.last() == Some(&11), || {
            format!("delta {delta}: global levels {:?}", global.levels)
        })?;
        ensure(global.max_ratio.is_finite() && global.is_stable(2.0), || {
            format!("delta {delta}: global ratios {:?}", global.ratios)
        })?;
        let local = report.local.ok_or("no local report")?;
        let norm = ok(flat_norm(&f, 4.0, 14))?;
        let expected = ok(critical_level(&f, 4.0, x0, basis.support_length, norm))?
            .level()
            .ok_or("critical level unbounded")?;
        let first = local.ratios.levels.first().copied();
        ensure(local.critical_level.level() == Some(expected), || {
            format!("delta {delta}: critical level {:?}, expected {expected}", local.critical_level)
        })?;
        ensure(first == Some(expected.max(4)) || (expected > 11 && first.is_none()), || {
            format!("delta {delta}: local levels {:?} with critical level {expected}", local.ratios.levels)
        })?;
        ensure(local.ratios.max_ratio.is_finite() && local.ratios.is_stable(2.0), || {
            format!("delta {delta}: local ratios {:?}", local.ratios.ratios)
        })?;
        summary.push(format!(
            "delta {delta}: global max {:.2e}, local from j={expected} max {:.2e}",
            global.max_ratio, local.ratios.max_ratio
        ));
    }
    Ok(summary.join("; "))
}

fn run_suite_binary(out: &Path) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_holdercone"))
        .arg("suite")
        .arg("--out")
        .arg(out)
        .status()
        .map_err(|e| e.to_string())?;
    ensure(status.code() == Some(0), || format!("suite exited with {status}"))?;
    std::fs::read(out.join("suite_report.json")).map_err(|e| e.to_string())
}

fn suite_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = run_suite_binary(&dir.path().join("first"))?;
    let second = run_suite_binary(&dir.path().join("second"))?;
    ensure(first == second, || "suite_report.json differs between runs".to_string())?;
    let reports: Vec<VerificationReport> = ok(serde_json::from_slice(&first))?;
    let constant = FunctionSpec::constant(1.0);
    let boundary = reports.iter().find(|r| {
        r.claim_id == ClaimId::FxFxRel && r.functions.first() == Some(&constant)
    });
    let boundary = boundary.ok_or("no boundary relation report for the constant function")?;
    ensure(boundary.verdict == Verdict::Fail && boundary.allow_listed, || {
        format!(
            "constant boundary report has verdict {} and allow_listed {}",
            boundary.verdict, boundary.allow_listed
        )
    })?;
    Ok(format!(
        "{} reports, {} bytes identical; constant boundary ratio {:.3} allow-listed",
        reports.len(),
        first.len(),
        boundary.measured_constant
    ))
}
