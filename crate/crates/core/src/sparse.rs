//! Sparse families, sparse forms, and the recursive selection of a sparse
//! family that dominates a singular Radon transform.
//!
//! Selection starts from a cube `Q₀` holding the supports of `f₁, f₂`. It
//! marks where the dyadic maximal functions of `f₁` (exponent `r`) and `f₂`
//! (exponent `s′`) exceed `D` times their averages. It then doubles `D` until
//! the marked set `E` fills at most `(1-σ)μ(Q₀)`, Whitney-decomposes `E`, and
//! repeats inside every Whitney cube. `Q₀ ∖ E` is the witness of `Q₀`.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::cloud::{conjugate, pairing, set_average};
use crate::decomposition::{perfectness_constant, whitney_with_perfectness};
use crate::dyadic::{CubeId, DyadicGrid};
use crate::error::{contract, Error, Result};
use crate::operators::RadonOperator;
use crate::sht::DiscreteSHT;

/// Cubes with at most this many points end the recursion.
pub const TERMINAL_POINTS: usize = 64;
/// Recursion depth at which every cube is terminal.
pub const TERMINAL_DEPTH: usize = 12;
/// Largest threshold multiplier tried is `2^MAX_DOUBLINGS`.
pub const MAX_DOUBLINGS: i32 = 60;
/// Relative slack for comparing measures that were summed in different orders.
const MASS_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SparseCube {
    pub id: CubeId,
    pub center: usize,
    /// `ℓ(Q)`.
    pub side: f64,
    pub members: Vec<usize>,
    pub measure: f64,
    /// `E(Q) ⊆ Q`.
    pub witness: Vec<usize>,
}

impl SparseCube {
    fn from_grid(g: &DyadicGrid, id: CubeId, witness: Vec<usize>) -> SparseCube {
        let q = g.cube(id);
        SparseCube { id, center: q.center, side: g.side(id.generation), members: q.members.clone(), measure: q.measure, witness }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseFamily {
    pub cubes: Vec<SparseCube>,
    pub sigma: f64,
    /// Seed of the grid the cubes were taken from.
    pub grid: u64,
}

impl SparseFamily {
    /// Grid cubes with canonical witnesses `E(Q) = Q ∖ ⋃{P ∈ S : P ⊊ Q}`.
    pub fn canonical(g: &DyadicGrid, ids: &[CubeId], sigma: f64) -> SparseFamily {
        let n = g.sht().len();
        let cubes: Vec<SparseCube> = ids.iter().map(|&id| SparseCube::from_grid(g, id, Vec::new())).collect();
        let witnesses: Vec<Vec<usize>> = cubes
            .iter()
            .map(|q| {
                let covered = strict_union(&cubes, q, n);
                q.members.iter().copied().filter(|&m| !covered[m]).collect()
            })
            .collect();
        let cubes = cubes.into_iter().zip(witnesses).map(|(q, w)| SparseCube { witness: w, ..q }).collect();
        SparseFamily { cubes, sigma, grid: g.seed() }
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn max_generation(&self) -> usize {
        self.cubes.iter().map(|q| q.id.generation).max().unwrap_or(0)
    }

    pub fn dump(&self, s: &DiscreteSHT) -> String {
        let mut out = format!("sigma {}\ngrid {}\ncubes {}\n", self.sigma, self.grid, self.cubes.len());
        for q in &self.cubes {
            let _ = writeln!(
                out,
                "cube {}:{} generation {} center {} mass {:.12e} witness {:.12e}",
                q.id.generation,
                q.id.rank,
                q.id.generation,
                q.center,
                q.measure,
                s.measure(&q.witness)
            );
        }
        out
    }
}

/// Mask of `⋃{P ∈ cubes : P ⊊ Q}` as point sets.
fn strict_union(cubes: &[SparseCube], q: &SparseCube, n: usize) -> Vec<bool> {
    let mut inside = vec![false; n];
    for &m in &q.members {
        inside[m] = true;
    }
    let mut covered = vec![false; n];
    for p in cubes {
        if p.members.len() < q.members.len() && p.members.iter().all(|&m| inside[m]) {
            for &m in &p.members {
                covered[m] = true;
            }
        }
    }
    covered
}

/// Both characterisations of sparseness, checked exhaustively.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseCheck {
    /// Witnesses are disjoint, lie in their cubes and carry a `σ` share of the mass.
    pub witnesses: bool,
    /// `μ(⋃_{P ⊊ Q} P) <= (1-σ)μ(Q)` for every `Q`.
    pub union: bool,
    /// `min_Q μ(E(Q)) / μ(Q)`.
    pub worst_ratio: f64,
    /// `max_Q μ(⋃_{P ⊊ Q} P) / μ(Q)`.
    pub worst_union: f64,
}

impl SparseCheck {
    pub fn holds(&self) -> bool {
        self.witnesses && self.union
    }
}

pub fn verify_sparse(family: &SparseFamily, s: &DiscreteSHT) -> SparseCheck {
    let n = s.len();
    let sigma = family.sigma;
    let mut hits = vec![0u32; n];
    let mut witnesses = true;
    let mut worst_ratio = f64::INFINITY;
    let mut worst_union = 0.0f64;
    let mut union = true;
    for q in &family.cubes {
        let mut inside = vec![false; n];
        for &m in &q.members {
            inside[m] = true;
        }
        for &e in &q.witness {
            hits[e] += 1;
            witnesses &= inside[e];
        }
        let share = s.measure(&q.witness);
        witnesses &= sigma * q.measure <= share * (1.0 + MASS_SLACK);
        worst_ratio = worst_ratio.min(share / q.measure);

        let covered = strict_union(&family.cubes, q, n);
        let taken: f64 = q.members.iter().filter(|&&m| covered[m]).map(|&m| s.weights()[m]).sum::<f64>() + 0.0;
        union &= taken <= (1.0 - sigma) * q.measure * (1.0 + MASS_SLACK);
        worst_union = worst_union.max(taken / q.measure);
    }
    witnesses &= hits.iter().all(|&h| h <= 1);
    if family.cubes.is_empty() {
        worst_ratio = 1.0;
    }
    SparseCheck { witnesses, union, worst_ratio, worst_union }
}

/// `Σ_Q μ(Q) ⟨f⟩_{Q,r} ⟨g⟩_{Q',s}` where `Q'` is `Q`, or the ball of radius
/// `dilation · ℓ(Q)` about its centre when a dilation is given.
pub fn sparse_form(family: &SparseFamily, s: &DiscreteSHT, f: &[f64], g: &[f64], r: f64, t: f64, dilation: Option<f64>) -> f64 {
    let w = s.weights();
    family
        .cubes
        .par_iter()
        .map(|q| {
            let fa = set_average(w, f, &q.members, r);
            if fa == 0.0 {
                return 0.0;
            }
            let ga = match dilation {
                Some(k) => set_average(w, g, &s.closed_ball(q.center, k * q.side), t),
                None => set_average(w, g, &q.members, t),
            };
            q.measure * fa * ga
        })
        .sum()
}

/// How far the operator moves points, in units of cube sides.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupportConstants {
    /// `max_j max ρ(x, γ_{δ^j t} x) / ℓ_j`.
    pub displacement: f64,
    /// Radius multiplier with `supp T_Q f ⊆ B(x_Q, κ′ℓ(Q))` for the pieces at or below the scale of `Q`.
    pub kappa_prime: f64,
}

pub fn support_constants(op: &RadonOperator, g: &DyadicGrid) -> Result<SupportConstants> {
    let (a, b) = (op.ladder().delta(), g.delta());
    contract((a - b).abs() <= 1e-12 * b, || format!("kernel ladder ratio {a} differs from grid ratio {b}"))?;
    let disp = op.displacements()?;
    let displacement = disp.iter().enumerate().map(|(j, d)| d / g.side(j)).fold(0.0, f64::max);
    let kappa = g.sht().kappa();
    Ok(SupportConstants { displacement, kappa_prime: kappa * (g.outer() + displacement) })
}

/// Whitney constant and the quantities constraining it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WhitneyConstant {
    pub value: f64,
    /// Bound on `δ^{k′-j}`; lies within a factor 2 of its large-constant limit.
    pub upper_spread: f64,
    pub upper_limit: f64,
    /// Bound on `δ^{k-k′}`; lies within a factor 2 of its large-constant limit.
    pub lower_spread: f64,
    pub lower_limit: f64,
    /// `(c′/(2𝔠) - 1)/3`, at least `100 ×` the displacement constant.
    pub separation: f64,
}

/// Smallest constant on the menu `2κ²𝔠 · 2^{i/4}`, `i >= 1`, for which the
/// scale-gap bounds sit within a factor 2 of their limits and the separation
/// dominates the displacement constant a hundredfold.
pub fn whitney_constant(g: &DyadicGrid, displacement: f64) -> Result<WhitneyConstant> {
    let c = g.outer();
    let d = g.delta();
    let kappa = g.sht().kappa();
    let upper_limit = 72.0 * c * c / (d * d * d);
    let lower_limit = d * d / (72.0 * c * c);
    let base = 2.0 * kappa * kappa * c;
    for i in 1..=400 {
        let v = base * 2f64.powf(i as f64 / 4.0);
        let shrink = (v * d / (2.0 * c) - 1.0) / 3.0;
        if shrink <= 0.0 {
            continue;
        }
        let spread = displacement + 2.0 * c / d + 12.0 * c * v / (d * d);
        let upper_spread = spread / shrink;
        let separation = (v / (2.0 * c) - 1.0) / 3.0;
        let lower_spread = (separation - displacement) / (2.0 * c / d + 12.0 * c * v / (d * d));
        let banded = |x: f64, l: f64| x >= 0.5 * l && x <= 2.0 * l;
        if banded(upper_spread, upper_limit) && banded(lower_spread, lower_limit) && separation >= 100.0 * displacement {
            return Ok(WhitneyConstant { value: v, upper_spread, upper_limit, lower_spread, lower_limit, separation });
        }
    }
    Err(Error::ConstantInfeasible(format!("no menu value satisfies the scale-gap bands with 𝔠 = {c}, δ = {d}, displacement {displacement}")))
}

/// Smallest menu constant accepted by the Whitney decomposition itself.
pub fn smallest_whitney_constant(g: &DyadicGrid) -> f64 {
    let kappa = g.sht().kappa();
    2.0 * kappa * kappa * g.outer() * 2f64.powf(0.25)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WhitneyRule {
    /// Constant from [`whitney_constant`].
    Constrained,
    /// Constant from [`smallest_whitney_constant`]: finer Whitney cubes, deeper recursion.
    Smallest,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectParams {
    pub r: f64,
    pub s: f64,
    pub sigma: f64,
    pub whitney: WhitneyRule,
}

/// One processed cube of the recursion.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub cube: CubeId,
    pub depth: usize,
    /// Threshold multiplier `D`, absent for terminal cubes.
    pub threshold: Option<f64>,
    /// `μ(E) / μ(Q)`.
    pub level_ratio: f64,
    pub whitney_cubes: usize,
    pub atoms: usize,
}

#[derive(Clone, Debug)]
pub struct Selection {
    pub family: SparseFamily,
    pub trace: Vec<TraceRow>,
    pub support: SupportConstants,
    pub whitney_constant: f64,
}

impl Selection {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("generation,rank,depth,threshold,level_ratio,whitney_cubes,atoms\n");
        for t in &self.trace {
            let d = t.threshold.map_or(String::from("terminal"), |d| d.to_string());
            let _ = writeln!(out, "{},{},{},{},{},{},{}", t.cube.generation, t.cube.rank, t.depth, d, t.level_ratio, t.whitney_cubes, t.atoms);
        }
        out
    }
}

/// `max(|f(x)|, sup_{P ∋ x, P ⊆ Q} ⟨|f|^p⟩_P^{1/p})` for the members of `Q`, in member order.
fn local_maximal(g: &DyadicGrid, id: CubeId, f: &[f64], p: f64) -> Vec<f64> {
    let w = g.sht().weights();
    let members = &g.cube(id).members;
    let mut m: Vec<f64> = members.iter().map(|&x| f[x].abs()).collect();
    for k in id.generation..=g.k_max() {
        let mut sums: HashMap<usize, (f64, f64)> = HashMap::new();
        for &x in members {
            let e = sums.entry(g.owner(k, x)).or_insert((0.0, 0.0));
            e.0 += w[x] * f[x].abs().powf(p);
            e.1 += w[x];
        }
        for (mx, &x) in m.iter_mut().zip(members) {
            let (num, mass) = sums[&g.owner(k, x)];
            *mx = mx.max((num / mass).powf(1.0 / p));
        }
    }
    m
}

struct Step {
    cube: SparseCube,
    row: TraceRow,
    children: Vec<CubeId>,
}

/// Selection state shared across inputs: support constants, Whitney
/// constant and perfectness are measured once per operator and grid.
pub struct Selector<'a> {
    op: &'a RadonOperator,
    grid: &'a DyadicGrid,
    params: SelectParams,
    support: SupportConstants,
    constant: f64,
    perfectness: f64,
}

impl<'a> Selector<'a> {
    pub fn new(op: &'a RadonOperator, grid: &'a DyadicGrid, params: SelectParams) -> Result<Selector<'a>> {
        contract(params.sigma > 0.0 && params.sigma < 1.0, || format!("sparseness {} outside (0, 1)", params.sigma))?;
        contract(params.r >= 1.0 && params.s >= 1.0, || "exponents below one".into())?;
        let support = support_constants(op, grid)?;
        let constant = match params.whitney {
            WhitneyRule::Constrained => whitney_constant(grid, support.displacement)?.value,
            WhitneyRule::Smallest => smallest_whitney_constant(grid),
        };
        Ok(Selector { op, grid, params, support, constant, perfectness: perfectness_constant(grid.sht()) })
    }

    pub fn support(&self) -> SupportConstants {
        self.support
    }

    pub fn whitney_constant(&self) -> f64 {
        self.constant
    }

    pub fn operator(&self) -> &RadonOperator {
        self.op
    }

    /// Recursive selection from `Q₀`; `f₁, f₂` must vanish off `Q₀`.
    pub fn select(&self, q0: CubeId, f1: &[f64], f2: &[f64]) -> Result<Selection> {
        let g = self.grid;
        let s = g.sht();
        let n = s.len();
        contract(f1.len() == n && f2.len() == n, || "input length differs from the cloud".into())?;
        let mut inside = vec![false; n];
        for &m in &g.cube(q0).members {
            inside[m] = true;
        }
        contract((0..n).all(|x| inside[x] || (f1[x] == 0.0 && f2[x] == 0.0)), || "inputs are not supported in the starting cube".into())?;

        let mut cubes = Vec::new();
        let mut trace = Vec::new();
        let mut frontier = vec![(q0, 0usize)];
        while !frontier.is_empty() {
            let steps: Vec<Step> = frontier.par_iter().map(|&(id, depth)| self.step(id, depth, f1, f2)).collect::<Result<_>>()?;
            let mut next = Vec::new();
            for (st, &(_, depth)) in steps.into_iter().zip(&frontier) {
                next.extend(st.children.iter().map(|&c| (c, depth + 1)));
                cubes.push(st.cube);
                trace.push(st.row);
            }
            frontier = next;
        }
        let family = SparseFamily { cubes, sigma: self.params.sigma, grid: g.seed() };
        Ok(Selection { family, trace, support: self.support, whitney_constant: self.constant })
    }

    fn step(&self, id: CubeId, depth: usize, f1: &[f64], f2: &[f64]) -> Result<Step> {
        let g = self.grid;
        let s = g.sht();
        let w = s.weights();
        let p = self.params;
        let q = g.cube(id);
        let terminal = || Step {
            cube: SparseCube::from_grid(g, id, q.members.clone()),
            row: TraceRow { cube: id, depth, threshold: None, level_ratio: 0.0, whitney_cubes: 0, atoms: 0 },
            children: Vec::new(),
        };
        if q.members.len() <= TERMINAL_POINTS || depth >= TERMINAL_DEPTH {
            return Ok(terminal());
        }
        let dual = conjugate(p.s);
        let a1 = set_average(w, f1, &q.members, p.r);
        let a2 = set_average(w, f2, &s.closed_ball(q.center, self.support.kappa_prime * g.side(id.generation)), dual);
        if a1 == 0.0 || a2 == 0.0 {
            return Ok(terminal());
        }
        let m1 = local_maximal(g, id, f1, p.r);
        let m2 = local_maximal(g, id, f2, dual);
        let budget = (1.0 - p.sigma) * q.measure;
        let mut chosen = None;
        for k in 1..=MAX_DOUBLINGS {
            let d = 2f64.powi(k);
            let level: Vec<usize> = (0..q.members.len()).filter(|&i| m1[i] > d * a1 || m2[i] > d * a2).map(|i| q.members[i]).collect();
            if s.measure(&level) <= budget {
                chosen = Some((d, level));
                break;
            }
        }
        let (d, level) = chosen.ok_or_else(|| {
            Error::Selection(format!("level set of cube {}:{} exceeds {:.3} of its mass for every D <= 2^{MAX_DOUBLINGS}", id.generation, id.rank, 1.0 - p.sigma))
        })?;
        let mut omega = vec![false; s.len()];
        for &x in &level {
            omega[x] = true;
        }
        let fam = whitney_with_perfectness(g, &omega, self.constant, self.perfectness)?;
        let witness: Vec<usize> = q.members.iter().copied().filter(|&x| !omega[x]).collect();
        Ok(Step {
            cube: SparseCube::from_grid(g, id, witness),
            row: TraceRow { cube: id, depth, threshold: Some(d), level_ratio: s.measure(&level) / q.measure + 0.0, whitney_cubes: fam.cubes.len(), atoms: fam.atoms.len() },
            children: fam.cubes,
        })
    }
}

/// One-shot [`Selector::select`].
pub fn sparse_select(op: &RadonOperator, g: &DyadicGrid, q0: CubeId, f1: &[f64], f2: &[f64], params: SelectParams) -> Result<Selection> {
    Selector::new(op, g, params)?.select(q0, f1, f2)
}

/// `|⟨T f₁, f₂⟩|` against the dilated sparse form with exponents `(r, s′)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domination {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`, zero when both vanish.
    pub ratio: f64,
}

pub fn domination_check(op: &RadonOperator, family: &SparseFamily, f1: &[f64], f2: &[f64], r: f64, s_exp: f64, kappa_prime: f64) -> Result<Domination> {
    let sht = op.sht();
    let lhs = pairing(sht.weights(), &op.apply_full(f1)?, f2).abs();
    let rhs = sparse_form(family, sht, f1, f2, r, conjugate(s_exp), Some(kappa_prime));
    if rhs == 0.0 {
        if lhs > 0.0 {
            return Err(Error::Domination(format!("pairing {lhs:e} against a vanishing sparse form")));
        }
        return Ok(Domination { lhs, rhs, ratio: 0.0 });
    }
    Ok(Domination { lhs, rhs, ratio: lhs / rhs })
}

/// The generation-`k` cube containing point `x`, usable as a starting cube.
pub fn starting_cube(g: &DyadicGrid, x: usize, k: usize) -> Result<CubeId> {
    contract(k <= g.k_max(), || format!("starting generation {k} beyond the finest generation {}", g.k_max()))?;
    contract(x < g.sht().len(), || format!("point {x} outside the cloud"))?;
    Ok(g.containing_cube(x, k).id)
}

/// Random pair on `Q₀` with values in `[-1, 1]`, constant on each cell of a
/// fixed `blocks^d` lattice over the box, so the pair means the same
/// function at every cloud resolution.
pub fn random_block_pair(g: &DyadicGrid, q0: CubeId, blocks: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    use rand::{Rng, SeedableRng};
    let s = g.sht();
    let cloud = s.cloud();
    let dim = s.dim();
    let cells = blocks.pow(dim as u32);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let v1: Vec<f64> = (0..cells).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let v2: Vec<f64> = (0..cells).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let cell = |x: &[f64]| {
        (0..dim).rev().fold(0usize, |acc, a| {
            let u = (x[a] - cloud.lo()[a]) / (cloud.hi()[a] - cloud.lo()[a]);
            acc * blocks + ((u * blocks as f64) as usize).min(blocks - 1)
        })
    };
    let mut f1 = vec![0.0; s.len()];
    let mut f2 = vec![0.0; s.len()];
    for &m in &g.cube(q0).members {
        let c = cell(s.point(m));
        f1[m] = v1[c];
        f2[m] = v2[c];
    }
    (f1, f2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{build_grid_with, GridMode};
    use crate::sht::presets;
    use std::sync::Arc;

    fn interval() -> DyadicGrid {
        build_grid_with(Arc::new(presets::unit_interval(256)), 0.5, 0, GridMode::Classical).unwrap()
    }

    fn id(generation: usize, rank: usize) -> CubeId {
        CubeId { generation, rank }
    }

    #[test]
    fn starting_cube_rejects_missing_generations() {
        let g = interval();
        let q = starting_cube(&g, 200, 2).unwrap();
        assert!(g.cube(q).members.contains(&200));
        assert!(starting_cube(&g, 0, g.k_max() + 1).is_err());
        assert!(starting_cube(&g, 256, 0).is_err());
    }

    #[test]
    fn form_of_a_single_cube_is_its_measure() {
        let g = interval();
        let s = g.sht();
        let fam = SparseFamily::canonical(&g, &[id(0, 0)], 0.5);
        let one = vec![1.0; s.len()];
        assert!((sparse_form(&fam, s, &one, &one, 1.0, 1.0, None) - 1.0).abs() < 1e-12);
        let empty = SparseFamily::canonical(&g, &[], 0.5);
        assert_eq!(sparse_form(&empty, s, &one, &one, 1.0, 1.0, None), 0.0);
    }

    #[test]
    fn nested_pair_has_form_five_quarters_and_ratio_three_quarters() {
        let g = interval();
        let s = g.sht();
        let fam = SparseFamily::canonical(&g, &[id(0, 0), id(2, 0)], 0.5);
        let one = vec![1.0; s.len()];
        assert!((sparse_form(&fam, s, &one, &one, 1.0, 1.0, None) - 1.25).abs() < 1e-12);
        let chk = verify_sparse(&fam, s);
        assert!(chk.holds());
        assert!((chk.worst_ratio - 0.75).abs() < 1e-12);
    }

    #[test]
    fn all_descendants_are_not_sparse() {
        let g = interval();
        let ids: Vec<CubeId> = g.cubes().map(|q| q.id).collect();
        for sigma in [0.01, 0.5] {
            let chk = verify_sparse(&SparseFamily::canonical(&g, &ids, sigma), g.sht());
            assert!(!chk.holds());
            assert_eq!(chk.worst_ratio, 0.0);
        }
        let single = SparseFamily::canonical(&g, &[id(3, 2)], 1.0);
        assert!(verify_sparse(&single, g.sht()).holds());
    }

    #[test]
    fn overlapping_witnesses_are_rejected() {
        let g = interval();
        let mut fam = SparseFamily::canonical(&g, &[id(1, 0), id(1, 1)], 0.5);
        let stolen = fam.cubes[1].witness[0];
        fam.cubes[0].witness.push(stolen);
        let chk = verify_sparse(&fam, g.sht());
        assert!(!chk.witnesses);
    }

    #[test]
    fn whitney_constant_meets_its_bands() {
        let g = interval();
        let wc = whitney_constant(&g, 0.3).unwrap();
        assert!(wc.separation >= 30.0);
        assert!(wc.upper_spread <= 2.0 * wc.upper_limit && wc.lower_spread >= 0.5 * wc.lower_limit);
        assert!(wc.value > 2.0 * g.outer());
        assert!(smallest_whitney_constant(&g) > 2.0 * g.outer());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn family(g: &DyadicGrid, picks: &[(usize, usize)]) -> SparseFamily {
            let mut ids: Vec<CubeId> = picks.iter().map(|&(k, r)| id(k, r % g.generation(k).len())).collect();
            ids.sort();
            ids.dedup();
            SparseFamily::canonical(g, &ids, 0.5)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn form_is_monotone_and_homogeneous(
                picks in proptest::collection::vec((0usize..6, 0usize..256), 1..6),
                extra in (0usize..6, 0usize..256),
                vals in proptest::collection::vec(0.0f64..4.0, 256),
                lam in 0.1f64..10.0,
            ) {
                let g = interval();
                let s = g.sht();
                let f: Vec<f64> = vals.clone();
                let h: Vec<f64> = vals.iter().rev().copied().collect();
                let small = family(&g, &picks);
                let mut more = picks.clone();
                more.push(extra);
                let large = family(&g, &more);
                let a = sparse_form(&small, s, &f, &h, 2.0, 1.5, None);
                let b = sparse_form(&large, s, &f, &h, 2.0, 1.5, None);
                prop_assert!(a <= b * (1.0 + 1e-12));
                let scaled: Vec<f64> = f.iter().map(|v| lam * v).collect();
                let c = sparse_form(&small, s, &scaled, &h, 2.0, 1.5, None);
                prop_assert!((c - lam * a).abs() <= 1e-9 * (1.0 + c.abs()));
            }

            #[test]
            fn root_term_bounds_the_form(vals in proptest::collection::vec(0.0f64..4.0, 256)) {
                let g = interval();
                let s = g.sht();
                let fam = family(&g, &[(0, 0), (3, 1), (5, 9)]);
                let h: Vec<f64> = vals.iter().map(|v| 4.0 - v).collect();
                let total = sparse_form(&fam, s, &vals, &h, 1.5, 2.0, None);
                let w = s.weights();
                let all: Vec<usize> = (0..s.len()).collect();
                let root = s.total_measure() * set_average(w, &vals, &all, 1.5) * set_average(w, &h, &all, 2.0);
                prop_assert!(total >= root * (1.0 - 1e-12));
            }

            #[test]
            fn canonical_witnesses_are_disjoint(picks in proptest::collection::vec((0usize..6, 0usize..256), 1..8)) {
                let g = interval();
                let fam = family(&g, &picks);
                let mut hits = vec![0u8; g.sht().len()];
                for q in &fam.cubes {
                    for &e in &q.witness {
                        hits[e] += 1;
                    }
                }
                prop_assert!(hits.iter().all(|&h| h <= 1));
            }
        }
    }
}
