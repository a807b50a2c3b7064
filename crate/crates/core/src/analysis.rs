//! Empirical operator norms, the L^p-improving region and modulus-of-continuity exponents.
//!
//! Everything here produces lower bounds: a norm estimate is the largest
//! quotient `‖T f‖_s / ‖f‖_r` seen over a finite family of test functions.
//! Since the operators are linear, `T` is applied once per test function and
//! the quotients for every `(r, s)` pair reuse those outputs.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloud::lp_norm;
use crate::error::{Error, Result};
use crate::geometry::{exp_combination, GradedFieldSystem, VectorField};
use crate::numerics::line_fit;
use crate::sht::DiscreteSHT;

/// A linear map on grid functions.
pub type Apply<'a> = &'a (dyn Fn(&[f64]) -> Result<Vec<f64>> + Sync);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormMethod {
    RandomFunction,
    SpikeFamily,
    CoordinateAscent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormEstimate {
    pub r: f64,
    pub s: f64,
    pub value: f64,
    /// Which family produced the maximum.
    pub method: NormMethod,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormBudget {
    pub random: usize,
    pub spike_levels: usize,
    pub ascent_rounds: usize,
}

impl Default for NormBudget {
    fn default() -> Self {
        NormBudget { random: 12, spike_levels: 3, ascent_rounds: 4 }
    }
}

fn quotient(w: &[f64], f: &[f64], tf: &[f64], r: f64, s: f64) -> f64 {
    let den = lp_norm(w, f, r);
    if den == 0.0 {
        0.0
    } else {
        lp_norm(w, tf, s) / den
    }
}

/// Sum of a few Gaussian bumps with random centres, widths and signs. Widths
/// are a fraction of each axis' extent, never below two cells of that axis, so
/// anisotropic clouds resolve every bump.
pub fn random_smooth(sht: &DiscreteSHT, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (lo, hi) = (sht.cloud().lo(), sht.cloud().hi());
    let h = sht.cloud().spacing();
    let bumps: Vec<(Vec<f64>, Vec<f64>, f64)> = (0..rng.gen_range(1..5))
        .map(|_| {
            let c: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| a + (b - a) * rng.gen_range(0.25..0.75)).collect();
            let frac = rng.gen_range(0.01..0.2);
            let widths = (0..lo.len()).map(|a| ((hi[a] - lo[a]) * frac).max(2.0 * h[a])).collect();
            (c, widths, if rng.gen::<bool>() { 1.0 } else { -1.0 })
        })
        .collect();
    sht.cloud().sample(|x| {
        bumps
            .iter()
            .map(|(c, wd, sg)| {
                let q: f64 = x.iter().zip(c).zip(wd).map(|((a, b), w)| ((a - b) / w).powi(2)).sum();
                sg * (-0.5 * q).exp()
            })
            .sum()
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpikeKind {
    /// Cube of side `w`.
    Box,
    /// Thin (`w`) along one axis, long along the others.
    Slab(usize),
    /// Random signs on blocks of side `w`.
    Blocks,
    /// The adjoint applied to a box of side `w`.
    Dual,
}

#[derive(Clone, Debug)]
pub struct Spike {
    pub kind: SpikeKind,
    pub level: usize,
    pub width: f64,
    pub values: Vec<f64>,
}

/// Test functions concentrating at `center` with the given widths (one level per width).
pub fn spike_family(sht: &DiscreteSHT, center: &[f64], widths: &[f64], adjoint: Option<Apply>, seed: u64) -> Result<Vec<Spike>> {
    let dim = sht.dim();
    let long = 0.25 * (sht.cloud().hi()[0] - sht.cloud().lo()[0]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (level, &w) in widths.iter().enumerate() {
        let boxf = sht.cloud().sample(|x| if (0..dim).all(|a| (x[a] - center[a]).abs() < 0.5 * w) { 1.0 } else { 0.0 });
        out.push(Spike { kind: SpikeKind::Box, level, width: w, values: boxf.clone() });
        for axis in 0..dim {
            let slab = sht.cloud().sample(|x| {
                let inside = (0..dim).all(|a| (x[a] - center[a]).abs() < if a == axis { 0.5 * w } else { long });
                if inside {
                    1.0
                } else {
                    0.0
                }
            });
            out.push(Spike { kind: SpikeKind::Slab(axis), level, width: w, values: slab });
        }
        let mut signs: std::collections::HashMap<Vec<i64>, f64> = Default::default();
        let blocks: Vec<f64> = (0..sht.len())
            .map(|i| {
                let x = sht.point(i);
                if (0..dim).any(|a| (x[a] - center[a]).abs() >= long) {
                    return 0.0;
                }
                let key: Vec<i64> = x.iter().map(|v| (v / w).floor() as i64).collect();
                *signs.entry(key).or_insert_with(|| if rng.gen::<bool>() { 1.0 } else { -1.0 })
            })
            .collect();
        out.push(Spike { kind: SpikeKind::Blocks, level, width: w, values: blocks });
        if let Some(adj) = adjoint {
            out.push(Spike { kind: SpikeKind::Dual, level, width: w, values: adj(&boxf)? });
        }
    }
    Ok(out)
}

/// Largest `‖T f‖_s / ‖f‖_r` over random smooth fields, spikes around the
/// cloud centre, and coordinate ascent over combinations of the best of them.
pub fn estimate_norm(sht: &DiscreteSHT, apply: Apply, r: f64, s: f64, budget: NormBudget, seed: u64) -> Result<NormEstimate> {
    if !(r >= 1.0 && s >= 1.0) {
        return Err(Error::Contract(format!("norm exponents must be at least one, got r={r}, s={s}")));
    }
    let w = sht.weights();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis: Vec<(Vec<f64>, Vec<f64>, NormMethod)> = Vec::new();
    for _ in 0..budget.random {
        let f = random_smooth(sht, &mut rng);
        let tf = apply(&f)?;
        basis.push((f, tf, NormMethod::RandomFunction));
    }
    let center: Vec<f64> = sht.cloud().lo().iter().zip(sht.cloud().hi()).map(|(a, b)| 0.5 * (a + b)).collect();
    let h = sht.cloud().spacing().iter().copied().fold(f64::INFINITY, f64::min);
    let widths: Vec<f64> = (0..budget.spike_levels).map(|l| 16.0 * h / 2f64.powi(l as i32)).collect();
    for sp in spike_family(sht, &center, &widths, None, seed)? {
        let tf = apply(&sp.values)?;
        basis.push((sp.values, tf, NormMethod::SpikeFamily));
    }
    let mut best = (0.0f64, NormMethod::RandomFunction, usize::MAX);
    for (i, (f, tf, m)) in basis.iter().enumerate() {
        let q = quotient(w, f, tf, r, s);
        if q > best.0 {
            best = (q, *m, i);
        }
    }
    let mut samples = basis.len();
    if best.2 != usize::MAX && budget.ascent_rounds > 0 {
        // Ascent over f = Σ c_m g_m starting from the best single function; T f is the same combination.
        let mut coef = vec![0.0; basis.len()];
        coef[best.2] = 1.0;
        let combine = |c: &[f64], which: usize| -> Vec<f64> {
            let mut out = vec![0.0; w.len()];
            for (m, &cm) in c.iter().enumerate() {
                if cm != 0.0 {
                    let v = if which == 0 { &basis[m].0 } else { &basis[m].1 };
                    out.iter_mut().zip(v).for_each(|(o, x)| *o += cm * x);
                }
            }
            out
        };
        let mut step = 0.5;
        let mut current = best.0;
        for _ in 0..budget.ascent_rounds {
            for m in 0..coef.len() {
                for sign in [1.0, -1.0] {
                    let mut trial = coef.clone();
                    trial[m] += sign * step;
                    let q = quotient(w, &combine(&trial, 0), &combine(&trial, 1), r, s);
                    samples += 1;
                    if q > current {
                        current = q;
                        coef = trial;
                    }
                }
            }
            step *= 0.5;
        }
        if current > best.0 {
            best = (current, NormMethod::CoordinateAscent, best.2);
        }
    }
    Ok(NormEstimate { r, s, value: best.0, method: best.1, samples, seed })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionPoint {
    pub r: f64,
    pub s: f64,
    /// Worst quotient over the family at each refinement level, coarse first.
    pub levels: Vec<f64>,
    pub growth: f64,
    pub bounded: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImprovingRegion {
    pub points: Vec<RegionPoint>,
    pub convex: bool,
    pub threshold: f64,
}

/// Growth factor across refinement levels below which a pair counts as bounded.
pub const STABILITY: f64 = 1.1;

/// Verdict per `(r, s)`: bounded when the worst quotient over the spike families
/// grows by less than [`STABILITY`] from the coarsest to any finer level.
pub fn map_improving_region(sht: &DiscreteSHT, apply: Apply, adjoint: Option<Apply>, pairs: &[(f64, f64)], widths: &[f64], seed: u64) -> Result<ImprovingRegion> {
    if widths.len() < 2 {
        return Err(Error::Contract("the region map needs at least two refinement levels".into()));
    }
    let w = sht.weights();
    let center: Vec<f64> = sht.cloud().lo().iter().zip(sht.cloud().hi()).map(|(a, b)| 0.5 * (a + b)).collect();
    let family = spike_family(sht, &center, widths, adjoint, seed)?;
    let outputs: Vec<Vec<f64>> = family.iter().map(|sp| apply(&sp.values)).collect::<Result<_>>()?;
    let mut points = Vec::with_capacity(pairs.len());
    for &(r, s) in pairs {
        let mut levels = vec![0.0f64; widths.len()];
        for (sp, tf) in family.iter().zip(&outputs) {
            levels[sp.level] = levels[sp.level].max(quotient(w, &sp.values, tf, r, s));
        }
        let growth = levels[1..].iter().fold(0.0f64, |m, &q| m.max(q / levels[0]));
        points.push(RegionPoint { r, s, levels, growth, bounded: growth < STABILITY });
    }
    let convex = interpolation_convex(&points);
    Ok(ImprovingRegion { points, convex, threshold: STABILITY })
}

/// Accepted pairs are joined, in the `(1/r, 1/s)` plane, by segments that stay
/// within one grid step of accepted samples.
fn interpolation_convex(points: &[RegionPoint]) -> bool {
    let coords: Vec<(f64, f64, bool)> = points.iter().map(|p| (1.0 / p.r, 1.0 / p.s, p.bounded)).collect();
    let step = grid_step(&coords);
    let accepted: Vec<(f64, f64)> = coords.iter().filter(|c| c.2).map(|c| (c.0, c.1)).collect();
    for (i, p) in accepted.iter().enumerate() {
        for q in &accepted[i + 1..] {
            for k in 1..10 {
                let l = k as f64 / 10.0;
                let m = (p.0 + l * (q.0 - p.0), p.1 + l * (q.1 - p.1));
                let near = accepted.iter().any(|a| (a.0 - m.0).abs().max((a.1 - m.1).abs()) <= step * (1.0 + 1e-9));
                if !near {
                    return false;
                }
            }
        }
    }
    true
}

fn grid_step(coords: &[(f64, f64, bool)]) -> f64 {
    let mut step = f64::INFINITY;
    for (i, a) in coords.iter().enumerate() {
        for b in &coords[i + 1..] {
            let d = (a.0 - b.0).abs().max((a.1 - b.1).abs());
            if d > 1e-12 {
                step = step.min(d);
            }
        }
    }
    if step.is_finite() {
        step
    } else {
        0.0
    }
}

impl ImprovingRegion {
    /// Smallest accepted `1/s` at exponent `r`, walking down from the diagonal
    /// and stopping at the first rejection.
    pub fn frontier(&self, r: f64) -> Option<f64> {
        let mut row: Vec<&RegionPoint> = self.points.iter().filter(|p| (p.r - r).abs() < 1e-12 && 1.0 / p.s <= 1.0 / p.r + 1e-12).collect();
        row.sort_by(|a, b| (1.0 / b.s).total_cmp(&(1.0 / a.s)));
        let mut last = None;
        for p in row {
            if !p.bounded {
                break;
            }
            last = Some(1.0 / p.s);
        }
        last
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,s,inv_r,inv_s,growth,bounded\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{},{},{},{}", p.r, p.s, 1.0 / p.r, 1.0 / p.s, p.growth, p.bounded);
        }
        out
    }
}

/// `(1/2, 1/s)` pairs on a grid of step `step` from the diagonal down to `lowest`.
pub fn pairs_at(r: f64, lowest: f64, step: f64) -> Vec<(f64, f64)> {
    let top = 1.0 / r;
    let n = ((top - lowest) / step).round() as usize;
    (0..=n).map(|k| (r, 1.0 / (top - k as f64 * step))).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModulusFit {
    /// `(|b|, sup_f ‖T f - (T f)∘θ_b‖₂ / ‖f‖₂)`.
    pub rows: Vec<(f64, f64)>,
    pub exponent: f64,
    pub r2: f64,
    /// Range of `|b|` used by the regression.
    pub window: (f64, f64),
}

impl ModulusFit {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("b,difference\n");
        for (b, d) in &self.rows {
            let _ = writeln!(out, "{b},{d}");
        }
        out
    }
}

/// `θ_b(x) = exp(Σ_i b^{d_i} u_i X_i)(x)` for a graded system and a direction `u`.
pub fn graded_flow<'a>(sys: &'a GradedFieldSystem, direction: &[f64]) -> impl Fn(f64, &[f64]) -> Result<Vec<f64>> + Sync + 'a {
    let dir = direction.to_vec();
    move |b: f64, x: &[f64]| {
        let fields: Vec<&VectorField> = sys.fields().iter().collect();
        let coeffs: Vec<f64> = sys.degrees().iter().zip(&dir).map(|(&d, u)| b.signum() * b.abs().powi(d as i32) * u).collect();
        exp_combination(&fields, &coeffs, x, 1e-2, sys.domain())
    }
}

/// Differences `‖T f - (T f)∘θ_b‖₂ / ‖f‖₂`, maximised over `samples`, and the
/// log-log slope over `|b|` in `window`. At `b = 0` the flow is the identity and
/// the difference is exactly zero. Flows leaving the box are an error only where
/// some output is nonzero.
pub fn modulus_exponent(
    sht: &DiscreteSHT,
    apply: Apply,
    flow: &(dyn Fn(f64, &[f64]) -> Result<Vec<f64>> + Sync),
    bs: &[f64],
    samples: &[Vec<f64>],
    window: (f64, f64),
) -> Result<ModulusFit> {
    let w = sht.weights();
    let outputs: Vec<(f64, Vec<f64>)> = samples.iter().map(|f| Ok((lp_norm(w, f, 2.0), apply(f)?))).collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(bs.len());
    for &b in bs {
        if b == 0.0 {
            rows.push((0.0, 0.0));
            continue;
        }
        // Outputs are zero outside the box, so a flow that leaves it is harmless
        // wherever every output already vanishes.
        let moved: Vec<Option<Vec<f64>>> = (0..sht.len())
            .map(|x| match flow(b, sht.point(x)) {
                Ok(y) => Ok(Some(y)),
                Err(Error::DomainExit(_)) if outputs.iter().all(|(_, tf)| tf[x] == 0.0) => Ok(None),
                Err(e) => Err(e),
            })
            .collect::<Result<_>>()?;
        let mut worst = 0.0f64;
        for (norm, tf) in &outputs {
            if *norm == 0.0 {
                continue;
            }
            let diff: Vec<f64> = moved.iter().zip(tf).map(|(y, v)| y.as_ref().map_or(0.0, |y| v - sht.cloud().interpolate(tf, y))).collect();
            worst = worst.max(lp_norm(w, &diff, 2.0) / norm);
        }
        rows.push((b.abs(), worst));
    }
    let fit: Vec<(f64, f64)> = rows.iter().copied().filter(|&(b, d)| b >= window.0 && b <= window.1 && d > 0.0).collect();
    if fit.len() < 2 {
        return Err(Error::Contract("modulus fit needs at least two positive differences in the window".into()));
    }
    let xs: Vec<f64> = fit.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = fit.iter().map(|p| p.1.ln()).collect();
    let lf = line_fit(&xs, &ys);
    Ok(ModulusFit { rows, exponent: lf.slope, r2: lf.r2, window })
}

/// Log-spaced magnitudes from `lo` to `hi`.
pub fn log_range(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| lo * (hi / lo).powf(i as f64 / (count - 1).max(1) as f64)).collect()
}
