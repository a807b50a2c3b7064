//! Dyadic maximal functions, Whitney decompositions of open sets and
//! Calderón–Zygmund decompositions on a dyadic grid.
//!
//! The dyadic tower stops at the finest resolved generation. Below it every
//! point is treated as its own cube (a singleton level), which is the discrete
//! stand-in for Lebesgue differentiation: averages over singletons are point
//! values, so `|f| <= M f` holds everywhere.

use std::fmt::Write as _;

use crate::dyadic::{CubeId, DyadicGrid};
use crate::error::{Error, Result};
use crate::sht::{DiscreteSHT, Metric};

/// Per-cube averages `⟨|f|^p⟩_Q^{1/p}` for every generation.
pub fn cube_averages(g: &DyadicGrid, f: &[f64], p: f64) -> Vec<Vec<f64>> {
    let w = g.sht().weights();
    g.generations()
        .iter()
        .map(|gen| {
            gen.iter()
                .map(|q| {
                    let s: f64 = q.members.iter().map(|&i| w[i] * f[i].abs().powf(p)).sum();
                    (s / q.measure).powf(1.0 / p)
                })
                .collect()
        })
        .collect()
}

/// `M^D_p f(x) = sup_{Q ∋ x} ⟨|f|^p⟩_Q^{1/p}`, the supremum including the singleton level.
pub fn dyadic_maximal(g: &DyadicGrid, f: &[f64], p: f64) -> Result<Vec<f64>> {
    if !(p >= 1.0) {
        return Err(Error::Contract(format!("maximal exponent {p} below one")));
    }
    let avg = cube_averages(g, f, p);
    let mut m: Vec<f64> = f.iter().map(|v| v.abs()).collect();
    for (k, gen) in avg.iter().enumerate() {
        for (x, mx) in m.iter_mut().enumerate() {
            *mx = mx.max(gen[g.owner(k, x)]);
        }
    }
    Ok(m)
}

/// Dyadic maximal function restricted to the tower (no singleton level).
pub fn dyadic_maximal_tower(g: &DyadicGrid, f: &[f64], p: f64) -> Vec<f64> {
    let avg = cube_averages(g, f, p);
    (0..f.len()).map(|x| (0..avg.len()).map(|k| avg[k][g.owner(k, x)]).fold(0.0, f64::max)).collect()
}

/// Lower and upper comparison bounds of a Whitney cube, with the worst ratios seen.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WhitneyReport {
    pub covers: bool,
    pub disjoint: bool,
    pub inside: bool,
    pub lower: bool,
    pub upper: bool,
    /// Smallest `dist(Q, Y) / diam(Q)` over cubes.
    pub min_ratio: f64,
    /// Largest `dist(Q, Y) / diam(Q)` over cubes.
    pub max_ratio: f64,
    pub lower_factor: f64,
    pub upper_factor: f64,
}

impl WhitneyReport {
    pub fn holds(&self) -> bool {
        self.covers && self.disjoint && self.inside && self.lower && self.upper
    }
}

/// Disjoint dyadic cubes covering `Ω`, plus points finer than the grid resolves.
#[derive(Clone, Debug)]
pub struct WhitneyFamily {
    pub cubes: Vec<CubeId>,
    /// Points of `Ω` whose Whitney generation lies below the finest one.
    pub atoms: Vec<usize>,
    /// The complement `Y = X \ Ω`.
    pub complement: Vec<usize>,
    pub constant: f64,
    /// Uniform perfectness constant used in the upper bound.
    pub perfectness: f64,
    pub report: WhitneyReport,
}

impl WhitneyFamily {
    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty() && self.atoms.is_empty()
    }

    pub fn dump(&self, g: &DyadicGrid) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# constant={} perfectness={} cubes={} atoms={}", self.constant, self.perfectness, self.cubes.len(), self.atoms.len());
        let _ = writeln!(out, "# generation rank members");
        for id in &self.cubes {
            let _ = writeln!(out, "{} {} {}", id.generation, id.rank, g.cube(*id).members.len());
        }
        out
    }
}

/// Uniform perfectness constant for the upper Whitney bound: 3 for path
/// metrics, otherwise the smallest menu value that passes a sampled check.
pub fn perfectness_constant(s: &DiscreteSHT) -> f64 {
    if matches!(s.metric(), Metric::Table(_)) {
        return 3.0;
    }
    for a in [1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 16.0] {
        if crate::sht::uniform_perfectness_check(s, a, 200, 11).map(|r| r.holds).unwrap_or(false) {
            return a;
        }
    }
    32.0
}

/// Whitney decomposition of `Ω` (a membership mask) with constant `c′ > 2κ²𝔠`.
///
/// A point at distance `d` from `Y` lives in layer `k` when
/// `c′ℓ_k < d <= c′ℓ_{k-1}`; generation-`k` cubes meeting layer `k` are
/// collected and only maximal ones kept.
pub fn whitney(g: &DyadicGrid, omega: &[bool], constant: f64) -> Result<WhitneyFamily> {
    let s = g.sht();
    let kappa = s.kappa();
    if !(constant > 2.0 * kappa * kappa * g.outer()) {
        return Err(Error::Contract(format!("Whitney constant {constant} must exceed 2κ²𝔠 = {}", 2.0 * kappa * kappa * g.outer())));
    }
    whitney_unchecked(g, omega, constant, perfectness_constant(s))
}

pub fn whitney_with_perfectness(g: &DyadicGrid, omega: &[bool], constant: f64, perfectness: f64) -> Result<WhitneyFamily> {
    let kappa = g.sht().kappa();
    if !(constant > 2.0 * kappa * kappa * g.outer()) {
        return Err(Error::Contract(format!("Whitney constant {constant} must exceed 2κ²𝔠 = {}", 2.0 * kappa * kappa * g.outer())));
    }
    whitney_unchecked(g, omega, constant, perfectness)
}

fn whitney_unchecked(g: &DyadicGrid, omega: &[bool], constant: f64, perfectness: f64) -> Result<WhitneyFamily> {
    let s = g.sht();
    let n = s.len();
    let complement: Vec<usize> = (0..n).filter(|&i| !omega[i]).collect();
    let members: Vec<usize> = (0..n).filter(|&i| omega[i]).collect();
    let empty = WhitneyFamily { cubes: Vec::new(), atoms: Vec::new(), complement: complement.clone(), constant, perfectness, report: WhitneyReport::default() };
    if members.is_empty() {
        let mut fam = empty;
        fam.report = WhitneyReport { covers: true, disjoint: true, inside: true, lower: true, upper: true, ..Default::default() };
        return Ok(fam);
    }
    if complement.is_empty() {
        // Ω = X: the whole space is the root cube.
        let mut fam = empty;
        fam.cubes = g.generation(0).iter().map(|q| q.id).collect();
        fam.report = WhitneyReport { covers: true, disjoint: true, inside: true, lower: true, upper: true, ..Default::default() };
        return Ok(fam);
    }
    let not_omega: Vec<bool> = omega.iter().map(|b| !b).collect();
    let dist: Vec<f64> = (0..n).map(|i| if omega[i] { s.dist_to_set(i, &not_omega) } else { 0.0 }).collect();

    // Layer of each point of Ω: largest k with c′ℓ_k < d, coarsest layer 0.
    let kmax = g.k_max() as i64;
    let mut marked: Vec<Vec<bool>> = g.generations().iter().map(|gen| vec![false; gen.len()]).collect();
    let mut fine: Vec<usize> = Vec::new();
    for &x in &members {
        let d = dist[x];
        let mut k = 0i64;
        while k <= kmax && constant * g.side(k as usize) >= d {
            k += 1;
        }
        if k > kmax {
            fine.push(x);
        } else {
            marked[k as usize][g.owner(k as usize, x)] = true;
        }
    }
    // Maximal selection, coarse to fine.
    let mut covered = vec![false; n];
    let mut cubes = Vec::new();
    for (k, gen) in g.generations().iter().enumerate() {
        for (r, q) in gen.iter().enumerate() {
            if marked[k][r] && !covered[q.center] {
                for &m in &q.members {
                    covered[m] = true;
                }
                cubes.push(q.id);
            }
        }
    }
    let atoms: Vec<usize> = members.iter().copied().filter(|&x| !covered[x]).collect();
    debug_assert!(fine.iter().all(|x| atoms.contains(x) || covered[*x]));
    let report = whitney_report(g, omega, &cubes, &atoms, &dist, constant, perfectness);
    Ok(WhitneyFamily { cubes, atoms, complement, constant, perfectness, report })
}

/// Exhaustive check of cover, disjointness and the two distance comparisons.
fn whitney_report(g: &DyadicGrid, omega: &[bool], cubes: &[CubeId], atoms: &[usize], dist: &[f64], constant: f64, perfectness: f64) -> WhitneyReport {
    let s = g.sht();
    let kappa = s.kappa();
    let mut hits = vec![0u32; s.len()];
    for id in cubes {
        for &m in &g.cube(*id).members {
            hits[m] += 1;
        }
    }
    for &a in atoms {
        hits[a] += 1;
    }
    let disjoint = hits.iter().all(|&h| h <= 1);
    let covers = omega.iter().zip(&hits).all(|(&o, &h)| !o || h >= 1);
    let inside = omega.iter().zip(&hits).all(|(&o, &h)| o || h == 0);
    let lower_factor = constant / (2.0 * kappa * kappa * g.outer()) - 1.0;
    let upper_factor = perfectness * constant / g.delta();
    let mut rep = WhitneyReport { covers, disjoint, inside, lower: true, upper: true, min_ratio: f64::INFINITY, max_ratio: 0.0, lower_factor, upper_factor };
    for id in cubes {
        let q = g.cube(*id);
        let d = q.members.iter().map(|&m| dist[m]).fold(f64::INFINITY, f64::min);
        let diam = s.set_diameter(&q.members);
        if d < lower_factor * diam {
            rep.lower = false;
        }
        if d > upper_factor * diam {
            rep.upper = false;
        }
        if diam > 0.0 {
            rep.min_ratio = rep.min_ratio.min(d / diam);
            rep.max_ratio = rep.max_ratio.max(d / diam);
        }
    }
    rep
}

/// One selected set of a CZ decomposition with its mean.
#[derive(Clone, Debug, PartialEq)]
pub struct CzCube {
    /// `None` for a singleton below the finest generation.
    pub id: Option<CubeId>,
    pub members: Vec<usize>,
    pub mean: f64,
    /// `f - mean` on `members`, aligned with them.
    pub bad: Vec<f64>,
}

impl CzCube {
    /// `∫ b_j dμ`.
    pub fn integral(&self, s: &DiscreteSHT) -> f64 {
        let w = s.weights();
        self.members.iter().zip(&self.bad).map(|(&i, b)| w[i] * b).sum()
    }
}

#[derive(Clone, Debug)]
pub struct CzResult {
    pub good: Vec<f64>,
    pub cubes: Vec<CzCube>,
    pub lambda: f64,
    /// `max(1, sup |g| / λ)`.
    pub bound: f64,
}

impl CzResult {
    /// `g + Σ b_j` as a dense vector.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = self.good.clone();
        for c in &self.cubes {
            for (&i, b) in c.members.iter().zip(&c.bad) {
                out[i] += b;
            }
        }
        out
    }

    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# lambda={} bound={} cubes={}", self.lambda, self.bound, self.cubes.len());
        let _ = writeln!(out, "# generation rank members mean");
        for c in &self.cubes {
            match c.id {
                Some(id) => {
                    let _ = writeln!(out, "{} {} {} {}", id.generation, id.rank, c.members.len(), c.mean);
                }
                None => {
                    let _ = writeln!(out, "point {} 1 {}", c.members[0], c.mean);
                }
            }
        }
        out
    }
}

/// Calderón–Zygmund decomposition at height `λ > ⟨|f|⟩_X`: maximal cubes
/// (singletons included) with `⟨|f|⟩_Q > λ`, `b_j = (f - ⟨f⟩_{Q_j}) 1_{Q_j}`.
pub fn cz_decompose(g: &DyadicGrid, f: &[f64], lambda: f64) -> Result<CzResult> {
    let s = g.sht();
    let global: f64 = s.weights().iter().zip(f).map(|(w, v)| w * v.abs()).sum::<f64>() / s.total_measure();
    if !(lambda > global) {
        return Err(Error::Contract(format!("CZ height {lambda} must exceed the global average {global}")));
    }
    let avg = cube_averages(g, f, 1.0);
    let mut covered = vec![false; s.len()];
    let mut sets: Vec<(Option<CubeId>, Vec<usize>)> = Vec::new();
    for (k, gen) in g.generations().iter().enumerate() {
        for (r, q) in gen.iter().enumerate() {
            if avg[k][r] > lambda && !covered[q.center] {
                for &m in &q.members {
                    covered[m] = true;
                }
                sets.push((Some(q.id), q.members.clone()));
            }
        }
    }
    for x in 0..s.len() {
        if !covered[x] && f[x].abs() > lambda {
            sets.push((None, vec![x]));
        }
    }
    Ok(cz_prescribed(s, f, sets, lambda))
}

/// The same split over a caller-supplied disjoint family of sets, as used
/// with Whitney cubes: `g = f` off the family and `⟨f⟩_Q` on each set.
pub fn cz_prescribed(s: &DiscreteSHT, f: &[f64], sets: Vec<(Option<CubeId>, Vec<usize>)>, lambda: f64) -> CzResult {
    let w = s.weights();
    let mut good = f.to_vec();
    let mut cubes = Vec::with_capacity(sets.len());
    for (id, members) in sets {
        let mass: f64 = members.iter().map(|&i| w[i]).sum();
        let mean = members.iter().map(|&i| w[i] * f[i]).sum::<f64>() / mass;
        let bad: Vec<f64> = members.iter().map(|&i| f[i] - mean).collect();
        for &i in &members {
            good[i] = mean;
        }
        cubes.push(CzCube { id, members, mean, bad });
    }
    let sup = good.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let bound = if lambda > 0.0 { (sup / lambda).max(1.0) } else { f64::INFINITY };
    CzResult { good, cubes, lambda, bound }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{build_grid, build_grid_with, GridMode};
    use crate::sht::presets;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn classical(n: usize) -> DyadicGrid {
        build_grid_with(Arc::new(presets::unit_interval(n)), 0.5, 0, GridMode::Classical).unwrap()
    }

    #[test]
    fn maximal_function_examples() {
        let g = classical(256);
        let m = dyadic_maximal(&g, &vec![-3.0; 256], 1.0).unwrap();
        assert!(m.iter().all(|v| (v - 3.0).abs() < 1e-12));
        // 1_{[0,1/4]}: at 3/8 the best ancestor is [0,1/2] with average 1/2.
        let f: Vec<f64> = (0..256).map(|i| if i < 64 { 1.0 } else { 0.0 }).collect();
        let m = dyadic_maximal(&g, &f, 1.0).unwrap();
        assert!((m[96] - 0.5).abs() < 1e-12);
        assert!(m[..64].iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!(dyadic_maximal(&g, &f, 0.5).is_err());
    }

    #[test]
    fn maximal_of_a_cube_indicator() {
        let g = build_grid(Arc::new(presets::unit_square(32)), 0.25, 0).unwrap();
        let q = &g.generation(1)[2];
        let mut f = vec![0.0; 1024];
        for &m in &q.members {
            f[m] = 1.0;
        }
        let m = dyadic_maximal(&g, &f, 2.0).unwrap();
        assert!(q.members.iter().all(|&i| (m[i] - 1.0).abs() < 1e-12));
    }

    #[test]
    fn whitney_on_punctured_interval() {
        // [-1, 1] minus the point nearest 0.
        let cloud = crate::Cloud::new(vec![-1.0], vec![1.0], vec![1023]).unwrap();
        let s = Arc::new(DiscreteSHT::new(cloud, Metric::Euclidean).unwrap());
        let g = build_grid(s, 0.5, 0).unwrap();
        let omega: Vec<bool> = (0..1023).map(|i| i != 511).collect();
        let c = 2.0 * g.outer() * 1.5;
        let fam = whitney_with_perfectness(&g, &omega, c, 2.0).unwrap();
        assert!(fam.report.holds(), "{:?}", fam.report);
        assert!(!fam.cubes.is_empty());
        assert_eq!(fam.complement, vec![511]);
        // Cube sizes shrink towards the puncture.
        let near = fam.cubes.iter().map(|id| id.generation).max().unwrap();
        let far = fam.cubes.iter().map(|id| id.generation).min().unwrap();
        assert!(near > far);
    }

    #[test]
    fn whitney_edge_cases() {
        let g = classical(256);
        assert!(whitney(&g, &vec![false; 256], 3.0 * g.outer()).unwrap().is_empty());
        assert!(whitney(&g, &vec![true; 256], 0.5).is_err());
        let all = whitney(&g, &vec![true; 256], 3.0 * g.outer()).unwrap();
        assert_eq!(all.cubes.len(), 1);
    }

    #[test]
    fn whitney_single_cube_far_from_complement() {
        // Ω = one generation-1 interval; Y is its complement, at distance comparable to its size.
        let g = classical(1024);
        let q = &g.generation(1)[0];
        let omega: Vec<bool> = (0..1024).map(|i| q.members.binary_search(&i).is_ok()).collect();
        let fam = whitney_with_perfectness(&g, &omega, 2.5 * g.outer(), 2.0).unwrap();
        assert!(fam.report.covers && fam.report.disjoint && fam.report.inside);
    }

    #[test]
    fn cz_examples() {
        let g = classical(256);
        let z = cz_decompose(&g, &vec![0.0; 256], 1.0).unwrap();
        assert!(z.cubes.is_empty() && z.good.iter().all(|&v| v == 0.0));
        let f: Vec<f64> = (0..256).map(|i| if i < 64 { 1.0 } else { 0.0 }).collect();
        let r = cz_decompose(&g, &f, 0.5).unwrap();
        assert_eq!(r.cubes.len(), 1);
        assert_eq!(r.cubes[0].id, Some(CubeId { generation: 2, rank: 0 }));
        assert!(r.cubes[0].bad.iter().all(|&b| b == 0.0));
        assert!(r.good.iter().all(|v| v.abs() <= 1.0));
        assert!(cz_decompose(&g, &f, 0.2).is_err());
    }

    #[test]
    fn cz_random_functions() {
        let g = classical(1024);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let f: Vec<f64> = (0..1024).map(|_| rng.gen::<f64>().powi(6) * 10.0 - 1.0).collect();
            let avg: f64 = f.iter().map(|v| v.abs()).sum::<f64>() / 1024.0;
            let r = cz_decompose(&g, &f, 2.0 * avg).unwrap();
            let back = r.reconstruct();
            assert!(back.iter().zip(&f).all(|(a, b)| (a - b).abs() <= 1e-12));
            assert!(r.cubes.iter().all(|c| c.integral(g.sht()).abs() <= 1e-10));
            assert!(r.bound <= 8.0 + 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn maximal_is_sublinear_and_weak_type(
            f in proptest::collection::vec(-5.0f64..5.0, 256),
            h in proptest::collection::vec(-5.0f64..5.0, 256),
            c in -3.0f64..3.0,
            lambda in 0.1f64..4.0,
        ) {
            let g = classical(256);
            let mf = dyadic_maximal(&g, &f, 1.0).unwrap();
            let mh = dyadic_maximal(&g, &h, 1.0).unwrap();
            let sum: Vec<f64> = f.iter().zip(&h).map(|(a, b)| a + b).collect();
            let ms = dyadic_maximal(&g, &sum, 1.0).unwrap();
            for i in 0..256 {
                prop_assert!(ms[i] <= mf[i] + mh[i] + 1e-12);
            }
            let cf: Vec<f64> = f.iter().map(|v| c * v).collect();
            let mc = dyadic_maximal(&g, &cf, 1.0).unwrap();
            for i in 0..256 {
                prop_assert!((mc[i] - c.abs() * mf[i]).abs() <= 1e-9 * (1.0 + mf[i]));
            }
            let w = g.sht().weights();
            let level: f64 = (0..256).filter(|&i| mf[i] > lambda).map(|i| w[i]).sum();
            let l1: f64 = (0..256).map(|i| w[i] * f[i].abs()).sum();
            prop_assert!(level <= l1 / lambda + 1e-12);
        }
    }
}
