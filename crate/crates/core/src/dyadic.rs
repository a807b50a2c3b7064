//! Nested dyadic systems on a discretized space of homogeneous type.
//!
//! Centres of generation `k` form a greedy maximal net with separation
//! `s_k = s_0 δ^k`, nested in the next generation. Every point joins its
//! nearest finest centre and inherits that centre's ancestry, so cubes of all
//! generations nest by construction. The inner and outer sandwich radii are
//! measured afterwards and fixed as `ℓ(Q) = unit · δ^k` and `𝔠`.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sht::DiscreteSHT;

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CubeId {
    pub generation: usize,
    pub rank: usize,
}

#[derive(Clone, Debug)]
pub struct DyadicCube {
    pub id: CubeId,
    pub center: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Sorted point indices.
    pub members: Vec<usize>,
    pub measure: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GridMode {
    /// Greedy nested nets; any `0 < δ < 1`.
    Greedy,
    /// Standard dyadic intervals on a one-dimensional cloud of `2^m` points, `δ = 1/2`.
    Classical,
}

#[derive(Clone, Debug)]
pub struct DyadicGrid {
    sht: Arc<DiscreteSHT>,
    delta: f64,
    unit: f64,
    outer: f64,
    epsilon: f64,
    seed: u64,
    generations: Vec<Vec<DyadicCube>>,
    owner: Vec<Vec<u32>>,
}

/// Smallest child-to-parent mass ratio accepted before rebuilding with the next seed.
pub const MIN_EPSILON: f64 = 1e-3;
const REBUILDS: u64 = 8;

/// Builds a grid; a grid whose child-mass ratio falls below [`MIN_EPSILON`]
/// is discarded and rebuilt from the next seed.
pub fn build_grid(sht: Arc<DiscreteSHT>, delta: f64, seed: u64) -> Result<DyadicGrid> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Contract(format!("grid ratio {delta} outside (0, 1)")));
    }
    let mut last = None;
    for s in seed..seed + REBUILDS {
        let g = greedy(sht.clone(), delta, s)?;
        if g.epsilon >= MIN_EPSILON {
            return Ok(g);
        }
        last = Some(g.epsilon);
    }
    Err(Error::Resolution(format!("child mass ratio {last:?} stays below {MIN_EPSILON} for {REBUILDS} seeds")))
}

pub fn build_grid_with(sht: Arc<DiscreteSHT>, delta: f64, seed: u64, mode: GridMode) -> Result<DyadicGrid> {
    match mode {
        GridMode::Greedy => build_grid(sht, delta, seed),
        GridMode::Classical => classical(sht, delta),
    }
}

/// Point visiting order: index order for seed 0, a seeded shuffle otherwise.
fn visit_order(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if seed != 0 {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    order
}

/// Nearest point `j` with `label[j] != NONE`, ties to the smaller index.
fn nearest_labelled(sht: &DiscreteSHT, i: usize, label: &[u32], listed: &[usize]) -> usize {
    if label[i] != NONE {
        return i;
    }
    let better = |d: f64, j: usize, best: (f64, usize)| d < best.0 || (d == best.0 && j < best.1);
    if sht.window(1.0).is_none() {
        let mut best = (f64::INFINITY, usize::MAX);
        for &j in listed {
            let d = sht.dist(i, j);
            if better(d, j, best) {
                best = (d, j);
            }
        }
        return best.1;
    }
    let cloud = sht.cloud();
    let c = cloud.multi(i);
    let mut r = 2.0 * sht.spacing();
    loop {
        let rad = sht.window(r).unwrap();
        let mut best = (f64::INFINITY, usize::MAX);
        cloud.for_each_in_window(&c, &rad, |j| {
            if label[j] != NONE {
                let d = sht.dist(i, j);
                if better(d, j, best) {
                    best = (d, j);
                }
            }
        });
        let full = rad.iter().zip(cloud.counts()).all(|(&w, &n)| w >= n);
        if best.0 < r || full {
            return best.1;
        }
        r *= 2.0;
    }
}

fn greedy(sht: Arc<DiscreteSHT>, delta: f64, seed: u64) -> Result<DyadicGrid> {
    let n = sht.len();
    let diam = sht.diameter();
    let sep0 = if diam > 0.0 { diam * (1.0 + 1e-9) } else { 1.0 };
    let floor = 8.0 * sht.spacing();
    let mut k_max = 0usize;
    while sep0 * delta.powi(k_max as i32 + 1) >= floor && k_max < 64 {
        k_max += 1;
    }
    let order = visit_order(n, seed);

    // Nested nets, coarse to fine.
    let mut nets: Vec<Vec<usize>> = Vec::with_capacity(k_max + 1);
    let mut covered = vec![false; n];
    for k in 0..=k_max {
        let s = sep0 * delta.powi(k as i32);
        covered.iter_mut().for_each(|c| *c = false);
        let mut centers: Vec<usize> = nets.last().cloned().unwrap_or_default();
        for &c in &centers {
            for j in sht.ball(c, s) {
                covered[j] = true;
            }
        }
        for &p in &order {
            if !covered[p] {
                centers.push(p);
                for j in sht.ball(p, s) {
                    covered[j] = true;
                }
            }
        }
        if centers.is_empty() {
            return Err(Error::Resolution(format!("empty net at generation {k}")));
        }
        nets.push(centers);
    }

    // Rank of each centre per generation, and its parent rank.
    let mut rank_of: Vec<Vec<u32>> = Vec::with_capacity(k_max + 1);
    for net in &nets {
        let mut r = vec![NONE; n];
        for (i, &c) in net.iter().enumerate() {
            r[c] = i as u32;
        }
        rank_of.push(r);
    }
    let mut parent_rank: Vec<Vec<u32>> = vec![Vec::new(); k_max + 1];
    for k in 1..=k_max {
        parent_rank[k] = nets[k]
            .iter()
            .map(|&c| rank_of[k - 1][nearest_labelled(&sht, c, &rank_of[k - 1], &nets[k - 1])])
            .collect();
    }

    // Finest membership by nearest centre, coarser ones through the parent chain.
    let mut owner: Vec<Vec<u32>> = vec![vec![NONE; n]; k_max + 1];
    for p in 0..n {
        let c = nearest_labelled(&sht, p, &rank_of[k_max], &nets[k_max]);
        let mut r = rank_of[k_max][c];
        owner[k_max][p] = r;
        for k in (1..=k_max).rev() {
            r = parent_rank[k][r as usize];
            owner[k - 1][p] = r;
        }
    }

    let generations = assemble(&sht, &nets, &owner, &parent_rank);

    // Measured sandwich radii in units of the separation.
    let mut inner = f64::INFINITY;
    let mut outer = 0.0f64;
    for (k, gen) in generations.iter().enumerate() {
        let s = sep0 * delta.powi(k as i32);
        for q in gen {
            let far = q.members.iter().map(|&m| sht.dist(q.center, m)).fold(0.0, f64::max);
            outer = outer.max(far / s);
            if gen.len() > 1 {
                inner = inner.min(nearest_outside(&sht, q.center, &owner[k], q.id.rank as u32) / s);
            }
        }
    }
    if !inner.is_finite() {
        // A single generation with a single cube: the whole space.
        inner = outer.max(f64::MIN_POSITIVE);
    }
    let epsilon = child_mass_ratio(&generations);
    Ok(DyadicGrid {
        sht,
        delta,
        unit: inner * sep0,
        outer: (outer / inner).max(1.0),
        epsilon,
        seed,
        generations,
        owner,
    })
}

/// Smallest distance from `c` to a point owned by a different cube.
fn nearest_outside(sht: &DiscreteSHT, c: usize, owner: &[u32], rank: u32) -> f64 {
    let mask: Vec<bool> = owner.iter().map(|&o| o != rank).collect();
    sht.dist_to_set(c, &mask)
}

fn assemble(sht: &DiscreteSHT, nets: &[Vec<usize>], owner: &[Vec<u32>], parent_rank: &[Vec<u32>]) -> Vec<Vec<DyadicCube>> {
    let mut generations: Vec<Vec<DyadicCube>> = nets
        .iter()
        .enumerate()
        .map(|(k, net)| {
            net.iter()
                .enumerate()
                .map(|(r, &c)| DyadicCube {
                    id: CubeId { generation: k, rank: r },
                    center: c,
                    parent: if k == 0 { None } else { Some(parent_rank[k][r] as usize) },
                    children: Vec::new(),
                    members: Vec::new(),
                    measure: 0.0,
                })
                .collect()
        })
        .collect();
    for (k, own) in owner.iter().enumerate() {
        for (p, &r) in own.iter().enumerate() {
            let q = &mut generations[k][r as usize];
            q.members.push(p);
            q.measure += sht.weights()[p];
        }
    }
    for k in 1..generations.len() {
        for r in 0..generations[k].len() {
            if let Some(p) = generations[k][r].parent {
                generations[k - 1][p].children.push(r);
            }
        }
    }
    generations
}

fn child_mass_ratio(generations: &[Vec<DyadicCube>]) -> f64 {
    let mut eps = 1.0f64;
    for k in 1..generations.len() {
        for q in &generations[k] {
            let p = &generations[k - 1][q.parent.unwrap()];
            eps = eps.min(q.measure / p.measure);
        }
    }
    eps
}

/// Standard dyadic intervals on a one-dimensional Euclidean cloud of `2^m`
/// points, centred at the point just left of each midpoint.
fn classical(sht: Arc<DiscreteSHT>, delta: f64) -> Result<DyadicGrid> {
    let n = sht.len();
    if sht.dim() != 1 || !n.is_power_of_two() || delta != 0.5 || !matches!(sht.metric(), crate::sht::Metric::Euclidean) {
        return Err(Error::Contract("classical dyadic intervals need a 1-D Euclidean cloud of 2^m points and δ = 1/2".into()));
    }
    let m = n.trailing_zeros() as usize;
    let length = sht.cloud().hi()[0] - sht.cloud().lo()[0];
    let h = sht.cloud().spacing()[0];
    // ℓ_k = length 2^{-k-1}; keep generations whose inner radius spans four cells.
    let mut k_max = 0;
    while k_max < m && length * 0.5f64.powi(k_max as i32 + 2) >= 4.0 * h {
        k_max += 1;
    }
    let mut nets = Vec::new();
    let mut owner = Vec::new();
    let mut parent_rank = Vec::new();
    for k in 0..=k_max {
        let size = n >> k;
        nets.push((0..(1usize << k)).map(|r| r * size + size / 2 - 1).collect::<Vec<_>>());
        owner.push((0..n).map(|p| (p / size) as u32).collect::<Vec<_>>());
        parent_rank.push((0..(1usize << k)).map(|r| (r / 2) as u32).collect::<Vec<_>>());
    }
    let generations = assemble(&sht, &nets, &owner, &parent_rank);
    let unit = length / 2.0;
    let mut outer = 1.0f64;
    for (k, gen) in generations.iter().enumerate() {
        let l = unit * delta.powi(k as i32);
        for q in gen {
            for &p in &q.members {
                outer = outer.max(sht.dist(q.center, p) / l);
            }
        }
    }
    let epsilon = child_mass_ratio(&generations);
    Ok(DyadicGrid { sht, delta, unit, outer, epsilon, seed: 0, generations, owner })
}

/// Outcome of the exhaustive check of the six grid properties.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AxiomReport {
    pub partition: bool,
    pub nested: bool,
    pub has_children: bool,
    pub unique_parent: bool,
    pub child_mass: bool,
    pub sandwich: bool,
    pub failures: Vec<String>,
}

impl AxiomReport {
    pub fn passed(&self) -> usize {
        [self.partition, self.nested, self.has_children, self.unique_parent, self.child_mass, self.sandwich]
            .iter()
            .filter(|&&b| b)
            .count()
    }

    pub fn all(&self) -> bool {
        self.passed() == 6
    }
}

impl DyadicGrid {
    pub fn sht(&self) -> &DiscreteSHT {
        &self.sht
    }

    pub fn sht_arc(&self) -> &Arc<DiscreteSHT> {
        &self.sht
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Outer sandwich constant `𝔠`.
    pub fn outer(&self) -> f64 {
        self.outer
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `ℓ(Q)` of generation-`k` cubes.
    pub fn side(&self, k: usize) -> f64 {
        self.unit * self.delta.powi(k as i32)
    }

    pub fn k_max(&self) -> usize {
        self.generations.len() - 1
    }

    pub fn generation(&self, k: usize) -> &[DyadicCube] {
        &self.generations[k]
    }

    pub fn generations(&self) -> &[Vec<DyadicCube>] {
        &self.generations
    }

    pub fn cube(&self, id: CubeId) -> &DyadicCube {
        &self.generations[id.generation][id.rank]
    }

    pub fn len(&self) -> usize {
        self.generations.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cubes(&self) -> impl Iterator<Item = &DyadicCube> {
        self.generations.iter().flatten()
    }

    /// Rank of the generation-`k` cube holding point `x`.
    pub fn owner(&self, k: usize, x: usize) -> usize {
        self.owner[k][x] as usize
    }

    /// The unique generation-`k` cube containing `x`.
    pub fn containing_cube(&self, x: usize, k: usize) -> &DyadicCube {
        &self.generations[k][self.owner[k][x] as usize]
    }

    /// `λQ`, the closed ball about the centre of radius `λ 𝔠 ℓ(Q)`.
    pub fn dilate(&self, q: &DyadicCube, lambda: f64) -> Result<Vec<usize>> {
        if lambda < 1.0 {
            return Err(Error::Contract(format!("cube dilation factor {lambda} is below one")));
        }
        Ok(self.sht.closed_ball(q.center, lambda * self.outer * self.side(q.id.generation)))
    }

    /// Exhaustive check of partition, nesting, children, parents, child mass and sandwich.
    pub fn verify(&self) -> AxiomReport {
        let n = self.sht.len();
        let mut rep = AxiomReport { partition: true, nested: true, has_children: true, unique_parent: true, child_mass: true, sandwich: true, failures: Vec::new() };
        for (k, gen) in self.generations.iter().enumerate() {
            let mut hits = vec![0u32; n];
            for q in gen {
                for &m in &q.members {
                    hits[m] += 1;
                }
            }
            if hits.iter().any(|&h| h != 1) {
                rep.partition = false;
                rep.failures.push(format!("generation {k} is not a partition"));
            }
            for q in gen {
                if k > 0 {
                    match q.parent {
                        Some(p) if p < self.generations[k - 1].len() => {
                            let parent = &self.generations[k - 1][p];
                            if !is_subset(&q.members, &parent.members) {
                                rep.unique_parent = false;
                                rep.failures.push(format!("cube {:?} escapes its parent", q.id));
                            }
                            if q.measure < self.epsilon * parent.measure * (1.0 - 1e-12) {
                                rep.child_mass = false;
                                rep.failures.push(format!("cube {:?} is lighter than ε of its parent", q.id));
                            }
                        }
                        _ => {
                            rep.unique_parent = false;
                            rep.failures.push(format!("cube {:?} has no parent", q.id));
                        }
                    }
                    // Nesting: every member shares this cube's ancestor at every coarser generation.
                    for j in 0..k {
                        let a = self.owner[j][q.members[0]];
                        if q.members.iter().any(|&m| self.owner[j][m] != a) {
                            rep.nested = false;
                            rep.failures.push(format!("cube {:?} straddles generation {j}", q.id));
                            break;
                        }
                    }
                }
                if k < self.k_max() && q.children.is_empty() {
                    rep.has_children = false;
                    rep.failures.push(format!("cube {:?} has no child", q.id));
                }
                let l = self.side(k);
                let inner = self.sht.ball(q.center, l);
                let outer_ok = q.members.iter().all(|&m| self.sht.dist(q.center, m) <= self.outer * l * (1.0 + 1e-12));
                if !is_subset(&inner, &q.members) || !outer_ok {
                    rep.sandwich = false;
                    rep.failures.push(format!("cube {:?} breaks the sandwich", q.id));
                }
            }
        }
        rep
    }

    /// Structured text: one line per cube with generation, centre, size and parent.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# delta={} unit={} outer={} epsilon={} seed={}", self.delta, self.unit, self.outer, self.epsilon, self.seed);
        let _ = writeln!(out, "# generation rank center members parent");
        for q in self.cubes() {
            let c: Vec<String> = self.sht.point(q.center).iter().map(|v| format!("{v:.6}")).collect();
            let parent = q.parent.map_or("-".to_string(), |p| format!("{}:{}", q.id.generation - 1, p));
            let _ = writeln!(out, "{} {} {} {} {}", q.id.generation, q.id.rank, c.join(","), q.members.len(), parent);
        }
        out
    }

    /// Generation shift `N_w` with `δ^{N_w + 1} < w <= δ^{N_w}`.
    pub fn shift_for(&self, w: f64) -> i64 {
        let d = self.delta;
        let mut n = (w.ln() / d.ln()).floor() as i64;
        while d.powi(n as i32) < w {
            n -= 1;
        }
        while d.powi(n as i32 + 1) >= w {
            n += 1;
        }
        n
    }

    /// The same cubes read at the metric `ρ / w`.
    pub fn rescaled(&self, w: f64) -> Result<RescaledGrid<'_>> {
        if !(w > 0.0) {
            return Err(Error::Contract(format!("rescaling factor {w} must be positive")));
        }
        Ok(RescaledGrid { base: self, w, shift: self.shift_for(w) })
    }
}

fn is_subset(a: &[usize], b: &[usize]) -> bool {
    // Both sorted.
    let mut j = 0;
    for &x in a {
        while j < b.len() && b[j] < x {
            j += 1;
        }
        if j == b.len() || b[j] != x {
            return false;
        }
    }
    true
}

/// Generation `k` of the rescaled grid is generation `k + N_w` of the base grid.
#[derive(Clone, Copy, Debug)]
pub struct RescaledGrid<'a> {
    base: &'a DyadicGrid,
    w: f64,
    shift: i64,
}

impl<'a> RescaledGrid<'a> {
    pub fn shift(&self) -> i64 {
        self.shift
    }

    /// Reported outer constant `𝔠 / δ`.
    pub fn outer(&self) -> f64 {
        self.base.outer / self.base.delta
    }

    pub fn delta(&self) -> f64 {
        self.base.delta
    }

    pub fn epsilon(&self) -> f64 {
        self.base.epsilon
    }

    /// Rescaled generations available: `-N_w ..= k_max - N_w`.
    pub fn range(&self) -> std::ops::RangeInclusive<i64> {
        -self.shift..=self.base.k_max() as i64 - self.shift
    }

    pub fn generation(&self, k: i64) -> &'a [DyadicCube] {
        self.base.generation((k + self.shift) as usize)
    }

    /// Exhaustive sandwich check under `ρ / w` with `ℓ = unit δ^k` and the outer constant `𝔠/δ`.
    pub fn verify_sandwich(&self) -> bool {
        let s = self.base.sht();
        let unit = self.base.unit;
        self.range().all(|k| {
            let l = unit * self.base.delta.powi(k as i32);
            self.generation(k).iter().all(|q| {
                let inner = s.ball(q.center, self.w * l);
                let far = q.members.iter().map(|&m| s.dist(q.center, m) / self.w).fold(0.0, f64::max);
                is_subset(&inner, &q.members) && far <= self.outer() * l * (1.0 + 1e-12)
            })
        })
    }
}

#[derive(Clone, Debug)]
pub struct AdjacentReport {
    pub grids: Vec<DyadicGrid>,
    /// Largest over the sampled balls of the best `ℓ(Q) / r`.
    pub cover_constant: f64,
    /// Balls with no cube satisfying `ℓ(Q) <= target · r`.
    pub failures: usize,
    pub balls: usize,
}

/// Builds one grid per seed and, for `balls` random balls, finds the cube of
/// smallest side containing each ball across the whole family.
pub fn adjacent_grids(sht: Arc<DiscreteSHT>, delta: f64, seeds: &[u64], balls: usize, ball_seed: u64, target: f64) -> Result<AdjacentReport> {
    let kappa = sht.kappa();
    if 96.0 * kappa.powi(6) * delta > 1.0 {
        return Err(Error::Contract(format!("96 κ^6 δ = {} exceeds one", 96.0 * kappa.powi(6) * delta)));
    }
    let grids: Vec<DyadicGrid> = seeds.iter().map(|&s| build_grid(sht.clone(), delta, s)).collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(ball_seed);
    let (lo, hi) = (sht.min_scale(), sht.diameter() / 2.0);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..balls {
        let x = rng.gen_range(0..sht.len());
        let r = if hi > lo { lo * (hi / lo).powf(rng.gen::<f64>()) } else { lo };
        let ball = sht.ball(x, r);
        let best = grids.iter().map(|g| covering_side(g, x, &ball)).fold(f64::INFINITY, f64::min) / r;
        worst = worst.max(best);
        if best > target {
            failures += 1;
        }
    }
    Ok(AdjacentReport { grids, cover_constant: worst, failures, balls })
}

/// Side of the finest cube of `g` containing all of `ball` (which contains `x`).
pub fn covering_side(g: &DyadicGrid, x: usize, ball: &[usize]) -> f64 {
    for k in (0..=g.k_max()).rev() {
        let o = g.owner[k][x];
        if ball.iter().all(|&y| g.owner[k][y] == o) {
            return g.side(k);
        }
    }
    f64::INFINITY
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sht::presets;

    fn interval(n: usize) -> Arc<DiscreteSHT> {
        Arc::new(presets::unit_interval(n))
    }

    #[test]
    fn classical_intervals() {
        let g = build_grid_with(interval(256), 0.5, 0, GridMode::Classical).unwrap();
        for k in 0..=g.k_max() {
            assert_eq!(g.generation(k).len(), 1 << k);
            let total: f64 = g.generation(k).iter().map(|q| q.measure).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        assert!(g.verify().all(), "{:?}", g.verify().failures);
        assert_eq!(g.epsilon(), 0.5);
        // k = 5 interval containing x is [⌊32x⌋/32, ...).
        for x in [0, 37, 130, 255] {
            let q = g.containing_cube(x, 5);
            let p = g.sht().point(x)[0];
            assert_eq!(q.id.rank, (32.0 * p).floor() as usize);
        }
    }

    #[test]
    fn greedy_grids_satisfy_all_axioms() {
        for (sht, delta) in [
            (Arc::new(presets::unit_square(32)), 0.25),
            (Arc::new(presets::parabola_grid(16, 64)), 0.125),
            (interval(1024), 0.25),
        ] {
            let g = build_grid(sht, delta, 0).unwrap();
            let rep = g.verify();
            assert!(rep.all(), "{:?}", rep.failures);
            assert!(g.outer().is_finite() && g.epsilon() >= MIN_EPSILON);
            for k in 0..=g.k_max() {
                let total: f64 = g.generation(k).iter().map(|q| q.measure).sum();
                assert!((total - g.sht().total_measure()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn construction_is_deterministic() {
        let s = Arc::new(presets::parabola_grid(16, 64));
        let a = build_grid(s.clone(), 0.25, 3).unwrap();
        let b = build_grid(s, 0.25, 3).unwrap();
        assert_eq!(a.dump(), b.dump());
    }

    #[test]
    fn containing_cube_of_a_center_is_its_cube() {
        let g = build_grid(Arc::new(presets::unit_square(32)), 0.25, 0).unwrap();
        for k in 0..=g.k_max() {
            for q in g.generation(k) {
                assert_eq!(g.containing_cube(q.center, k).id, q.id);
            }
        }
        assert_eq!(g.containing_cube(17, 0).id.rank, 0);
    }

    #[test]
    fn dilation() {
        let g = build_grid_with(interval(256), 0.5, 0, GridMode::Classical).unwrap();
        let q = &g.generation(3)[2];
        assert!(is_subset(&q.members, &g.dilate(q, 1.0).unwrap()));
        assert_eq!(g.dilate(q, 1e6).unwrap().len(), 256);
        assert!(g.dilate(q, 0.5).is_err());
        // λ = 3: interval of length min(1, 3·𝔠·2^{-k}) about the centre (radius 3𝔠ℓ).
        let d = g.dilate(q, 3.0).unwrap();
        let c = g.sht().point(q.center)[0];
        let r = 3.0 * g.outer() * g.side(3);
        let expected = (0..256).filter(|&i| (g.sht().point(i)[0] - c).abs() <= r).count();
        assert_eq!(d.len(), expected);
    }

    #[test]
    fn rescaling_shifts_generations() {
        let g = build_grid(interval(4096), 0.25, 0).unwrap();
        assert_eq!(g.shift_for(1.0), 0);
        assert_eq!(g.shift_for(0.25f64.powi(3)), 3);
        assert_eq!(g.shift_for(0.25f64.powf(2.5)), 2);
        let r = g.rescaled(0.25f64.powf(2.5)).unwrap();
        assert_eq!(r.generation(0)[0].members, g.generation(2)[0].members);
        assert!(r.verify_sandwich());
        assert_eq!(r.delta(), g.delta());
        assert_eq!(r.epsilon(), g.epsilon());
        assert!(g.rescaled(1.0).unwrap().verify_sandwich());
    }

    #[test]
    fn adjacent_family_hypothesis() {
        assert!(adjacent_grids(interval(256), 0.05, &[0], 1, 0, 1e9).is_err());
        let rep = adjacent_grids(interval(4096), 1.0 / 128.0, &[0, 1, 2], 50, 7, f64::INFINITY).unwrap();
        assert_eq!(rep.failures, 0);
        assert!(rep.cover_constant.is_finite());
        // A cube's own inner ball is covered by that cube.
        let g = &rep.grids[0];
        let q = &g.generation(1)[0];
        let ball = g.sht().ball(q.center, g.side(1));
        assert!(covering_side(g, q.center, &ball) / g.side(1) <= g.outer() / g.delta());
    }
}
