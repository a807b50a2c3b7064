use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics;
use super::curve::CurveFamily;
use super::field::{lie_bracket, Domain, GradedFieldSystem, VectorField};
use super::taylor::expand_taylor_fields;

/// Relative singular-value threshold for rank decisions.
pub const RANK_TOL: f64 = 1e-9;

/// Smallest `m <= m_max` such that brackets of length `<= m` span `R^n` at `x`.
pub fn hormander_type(fields: &[VectorField], x: &[f64], m_max: u32) -> Option<u32> {
    let n = x.len();
    let probe = local_probe(x);
    let base: Vec<VectorField> = fields.iter().filter(|f| !f.vanishes(&probe)).cloned().collect();
    if base.is_empty() || m_max == 0 {
        return None;
    }
    let mut level = base.clone();
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    for m in 1..=m_max {
        if m > 1 {
            let mut next = Vec::new();
            for a in &base {
                for b in &level {
                    let c = lie_bracket(a, b);
                    if !c.vanishes(&probe) {
                        next.push(c);
                    }
                }
            }
            level = dedup(next);
        }
        vectors.extend(level.iter().map(|f| f.eval(x)));
        if numerics::rank(&vectors, RANK_TOL) == n {
            return Some(m);
        }
        if level.is_empty() {
            return None;
        }
    }
    None
}

/// `x` and its neighbours at distance 0.05 along each axis; fields that vanish on
/// all of them are treated as zero.
fn local_probe(x: &[f64]) -> Vec<Vec<f64>> {
    let mut out = vec![x.to_vec()];
    for i in 0..x.len() {
        for s in [0.05, -0.05] {
            let mut p = x.to_vec();
            p[i] += s;
            out.push(p);
        }
    }
    out
}

/// Hörmander type of the Taylor fields of `curve` at its base point (the origin).
pub fn curve_hormander_type(curve: &CurveFamily, m_max: u32) -> Result<Option<u32>> {
    let fields = taylor_list(curve)?;
    let fs: Vec<VectorField> = fields.into_iter().map(|(f, _)| f).collect();
    Ok(hormander_type(&fs, &vec![0.0; curve.dim()], m_max))
}

/// Taylor order used when a curve is turned into a field list.
fn taylor_order(curve: &CurveFamily) -> u32 {
    (curve.dim() as u32 + 2).min(super::taylor::MAX_NUMERIC_ORDER)
}

/// Nonvanishing Taylor fields with degree `|α|`.
fn taylor_list(curve: &CurveFamily) -> Result<Vec<(VectorField, u32)>> {
    let samples = curve.domain().sample_grid(3);
    Ok(expand_taylor_fields(curve, taylor_order(curve))?
        .into_iter()
        .filter(|t| !t.field.vanishes(&samples))
        .map(|t| {
            let d = t.order();
            (t.field, d)
        })
        .collect())
}

fn same_field(a: &VectorField, b: &VectorField) -> bool {
    match (a.polys(), b.polys()) {
        (Some(p), Some(q)) => {
            p == q || p.iter().zip(q).all(|(u, v)| u.add(v).is_zero())
        }
        _ => false,
    }
}

fn dedup(fields: Vec<VectorField>) -> Vec<VectorField> {
    let mut out: Vec<VectorField> = Vec::new();
    for f in fields {
        if !out.iter().any(|g| same_field(g, &f)) {
            out.push(f);
        }
    }
    out
}

fn dedup_graded(fields: Vec<(VectorField, u32)>) -> Vec<(VectorField, u32)> {
    let mut out: Vec<(VectorField, u32)> = Vec::new();
    for (f, d) in fields {
        if !out.iter().any(|(g, e)| *e == d && same_field(g, &f)) {
            out.push((f, d));
        }
    }
    out
}

/// Closure of a raw graded list: Steps I-III applied to `fields` at base point `x0`.
pub fn close_graded_fields(fields: &[(VectorField, u32)], x0: &[f64], m0: u32, domain: Domain) -> Result<GradedFieldSystem> {
    let all: Vec<VectorField> = fields.iter().map(|(f, _)| f.clone()).collect();
    if hormander_type(&all, x0, m0).is_none() {
        return Err(Error::Curvature(format!("fields are not of type {m0} at {x0:?}")));
    }
    // Step I: shortest prefix of type m0.
    let mut prefix = 0;
    for r in 1..=fields.len() {
        let part: Vec<VectorField> = fields[..r].iter().map(|(f, _)| f.clone()).collect();
        if hormander_type(&part, x0, m0).is_some() {
            prefix = r;
            break;
        }
    }
    let chosen = &fields[..prefix];
    // Step II: commutators of the chosen list up to length m0.
    let mut commutators = chosen.to_vec();
    let mut level = chosen.to_vec();
    for _ in 1..m0 {
        let mut next = Vec::new();
        for (a, da) in chosen {
            for (b, db) in &level {
                let c = lie_bracket(a, b);
                if !c.vanishes(&[]) {
                    next.push((c, da + db));
                }
            }
        }
        level = dedup_graded(next);
        commutators.extend(level.iter().cloned());
    }
    let top = commutators.iter().map(|(_, d)| *d).max().unwrap_or(1);
    // Step III: everything generated by the full list with degree <= top.
    let gens: Vec<(VectorField, u32)> = fields.iter().filter(|(_, d)| *d <= top).cloned().collect();
    let mut result = gens.clone();
    let mut level = gens.clone();
    loop {
        let mut next = Vec::new();
        for (a, da) in &gens {
            for (b, db) in &level {
                if da + db > top {
                    continue;
                }
                let c = lie_bracket(a, b);
                if !c.vanishes(&[]) {
                    next.push((c, da + db));
                }
            }
        }
        let fresh: Vec<(VectorField, u32)> = dedup_graded(next)
            .into_iter()
            .filter(|(f, d)| !result.iter().any(|(g, e)| e == d && same_field(g, f)))
            .collect();
        if fresh.is_empty() {
            break;
        }
        result.extend(fresh.iter().cloned());
        level = fresh;
    }
    result.sort_by_key(|(_, d)| *d);
    GradedFieldSystem::new(result, domain)
}

/// Graded system generated by the Taylor fields of `curve` at the origin.
pub fn generate_graded_system(curve: &CurveFamily, m0: u32) -> Result<GradedFieldSystem> {
    let fields = taylor_list(curve)?;
    if fields.is_empty() {
        return Err(Error::Curvature(format!("curve `{}` has no nonzero Taylor fields", curve.name())));
    }
    close_graded_fields(&fields, &vec![0.0; curve.dim()], m0, curve.domain().clone())
}

/// Witness for the curvature condition: minor columns `xi`, derivative multi-index `beta`.
#[derive(Clone, Debug, PartialEq)]
pub struct CjWitness {
    pub xi: Vec<usize>,
    pub beta: Vec<u32>,
    pub magnitude: f64,
}

/// Absolute threshold separating a nonzero Taylor coefficient from fit noise.
pub const CJ_TOL: f64 = 1e-6;

/// `Γ(x, τ) = γ_{τ_n} ∘ ... ∘ γ_{τ_1}(x)` with `τ ∈ R^{kn}`.
pub fn iterated_map(curve: &CurveFamily, x: &[f64], tau: &[f64]) -> Vec<f64> {
    let k = curve.params();
    let mut y = x.to_vec();
    for t in tau.chunks(k) {
        y = curve.eval(t, &y);
    }
    y
}

/// Searches Taylor coefficients of `n × n` minors of `∂Γ/∂τ(0, τ)` up to order `m_max`.
pub fn curvature_cj_check(curve: &CurveFamily, m_max: u32) -> Result<Option<CjWitness>> {
    if m_max > 6 {
        return Err(Error::Resolution(format!("Taylor search order {m_max} exceeds the fit limit 6")));
    }
    let (n, k) = (curve.dim(), curve.params());
    let m = n * k;
    let x0 = vec![0.0; n];
    let basis = numerics::multi_indices(m, m_max);
    let r = 0.05 * curve.radius().min(1.0) / 0.25;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let count = (3 * basis.len()).max(24);
    let taus: Vec<Vec<f64>> = (0..count).map(|_| (0..m).map(|_| rng.gen_range(-r..r)).collect()).collect();
    let minors = combinations(m, n);
    let values: Vec<Vec<f64>> = taus
        .iter()
        .map(|tau| {
            let jac = jacobian(curve, &x0, tau);
            minors
                .iter()
                .map(|xi| {
                    let cols: Vec<&[f64]> = xi.iter().map(|&c| jac[c].as_slice()).collect();
                    numerics::det(&cols)
                })
                .collect()
        })
        .collect();
    let coeffs = numerics::fit_monomials(&taus, &values, &basis);
    for (bi, beta) in basis.iter().enumerate() {
        for (xi, c) in minors.iter().zip(&coeffs) {
            let d = c[bi] * numerics::factorial_multi(beta);
            if d.abs() > CJ_TOL {
                return Ok(Some(CjWitness { xi: xi.clone(), beta: beta.clone(), magnitude: d.abs() }));
            }
        }
    }
    Ok(None)
}

/// Columns `∂Γ/∂τ_c` at `(x, τ)`.
fn jacobian(curve: &CurveFamily, x: &[f64], tau: &[f64]) -> Vec<Vec<f64>> {
    (0..tau.len())
        .map(|c| {
            numerics::derivative(
                |s| {
                    let mut t = tau.to_vec();
                    t[c] += s;
                    iterated_map(curve, x, &t)
                },
                0.0,
                1e-3,
            )
        })
        .collect()
}

pub(crate) fn combinations(m: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(n);
    fn rec(start: usize, m: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, n, cur, out);
            cur.pop();
        }
    }
    rec(0, m, n, &mut cur, &mut out);
    out
}
