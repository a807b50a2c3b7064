//! Discretized spaces of homogeneous type: a lattice cloud, its cell-volume
//! measure and a (quasi-)metric, with doubling and perfectness diagnostics.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloud::Cloud;
use crate::error::{Error, Result};
use crate::geometry::{CcTable, GradedFieldSystem, NodeLattice, ReachOptions};

#[derive(Clone, Debug)]
pub enum Metric {
    Euclidean,
    /// `max_a (|Δ_a| / scale_a)^{1/degree_a}`.
    Anisotropic { scales: Vec<f64>, degrees: Vec<u32> },
    /// Korányi gauge of the first Heisenberg group.
    Heisenberg,
    /// Carnot–Carathéodory graph distances precomputed on the cloud nodes.
    Table(Arc<CcTable>),
}

impl Metric {
    /// The closed-form metric of the parabola fields `(-∂_1, 1), (-2∂_2, 2)`.
    pub fn parabola() -> Metric {
        Metric::Anisotropic { scales: vec![1.0, 2.0], degrees: vec![1, 2] }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Anisotropic { .. } => "anisotropic",
            Metric::Heisenberg => "heisenberg",
            Metric::Table(_) => "cc-table",
        }
    }

    /// Closed-form distance; `None` for table-backed metrics.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        match self {
            Metric::Euclidean => Some(x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()),
            Metric::Anisotropic { scales, degrees } => Some(
                x.iter()
                    .zip(y)
                    .enumerate()
                    .map(|(a, (u, v))| {
                        let r = (u - v).abs() / scales[a];
                        match degrees[a] {
                            1 => r,
                            2 => r.sqrt(),
                            d => r.powf(1.0 / d as f64),
                        }
                    })
                    .fold(0.0, f64::max),
            ),
            Metric::Heisenberg => {
                let (dx, dy) = (y[0] - x[0], y[1] - x[1]);
                let tau = y[2] - x[2] - 0.5 * (x[0] * y[1] - x[1] * y[0]);
                Some(((dx * dx + dy * dy).powi(2) + 16.0 * tau * tau).powf(0.25))
            }
            Metric::Table(_) => None,
        }
    }

    fn is_max_type(&self) -> bool {
        matches!(self, Metric::Anisotropic { .. })
    }
}

/// A lattice cloud with quadrature weights and a quasi-metric.
#[derive(Clone, Debug)]
pub struct DiscreteSHT {
    cloud: Cloud,
    weights: Vec<f64>,
    metric: Metric,
    kappa: f64,
    spacing: f64,
    diameter: f64,
}

impl DiscreteSHT {
    /// Cell-volume weights. Table metrics must live on exactly the cloud nodes.
    pub fn new(cloud: Cloud, metric: Metric) -> Result<DiscreteSHT> {
        if let Metric::Anisotropic { scales, degrees } = &metric {
            if scales.len() != cloud.dim() || degrees.len() != cloud.dim() {
                return Err(Error::Parse("anisotropic metric dimension differs from the cloud".into()));
            }
            if scales.iter().any(|s| !(*s > 0.0)) || degrees.contains(&0) {
                return Err(Error::Parse("anisotropic metric needs positive scales and degrees".into()));
            }
        }
        if matches!(metric, Metric::Heisenberg) && cloud.dim() != 3 {
            return Err(Error::Parse("the Heisenberg gauge lives in three dimensions".into()));
        }
        if let Metric::Table(t) = &metric {
            let lat = t.lattice();
            let origin: Vec<f64> = (0..cloud.dim()).map(|a| cloud.lo()[a] + 0.5 * cloud.spacing()[a]).collect();
            let same = lat.counts == cloud.counts()
                && lat.origin.iter().zip(&origin).all(|(a, b)| (a - b).abs() < 1e-12)
                && lat.spacing.iter().zip(cloud.spacing()).all(|(a, b)| (a - b).abs() < 1e-12);
            if !same {
                return Err(Error::Parse("distance table lattice does not match the cloud".into()));
            }
        }
        let weights = vec![cloud.cell_volume(); cloud.len()];
        let mut s = DiscreteSHT { cloud, weights, metric, kappa: 1.0, spacing: 0.0, diameter: 0.0 };
        s.spacing = s.compute_spacing();
        s.diameter = s.compute_diameter();
        if matches!(s.metric, Metric::Table(_)) {
            // Graph distances are only approximately metric; store what the cloud shows.
            s.kappa = quasi_triangle_constant(&s, 20_000, 0x6b61_7070).max(1.0);
        }
        Ok(s)
    }

    /// Cloud on the system's domain with a precomputed graph-distance table.
    pub fn carnot_caratheodory(sys: &GradedFieldSystem, counts: Vec<usize>, opts: &ReachOptions) -> Result<DiscreteSHT> {
        let d = sys.domain();
        let cloud = Cloud::new(d.lo.clone(), d.hi.clone(), counts)?;
        let lattice = NodeLattice {
            origin: (0..cloud.dim()).map(|a| cloud.lo()[a] + 0.5 * cloud.spacing()[a]).collect(),
            spacing: cloud.spacing().to_vec(),
            counts: cloud.counts().to_vec(),
        };
        let table = CcTable::build(sys, &lattice, opts)?;
        DiscreteSHT::new(cloud, Metric::Table(Arc::new(table)))
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<DiscreteSHT> {
        if weights.len() != self.len() || weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::Contract("weights must be positive, finite and one per point".into()));
        }
        self.weights = weights;
        Ok(self)
    }

    pub fn cloud(&self) -> &Cloud {
        &self.cloud
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.cloud.dim()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.cloud.point(i)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Largest distance between a point and its lattice neighbour along one axis.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Smallest scale treated as resolved: four lattice spacings.
    pub fn min_scale(&self) -> f64 {
        4.0 * self.spacing
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn total_measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn measure(&self, set: &[usize]) -> f64 {
        set.iter().map(|&i| self.weights[i]).sum()
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        match &self.metric {
            Metric::Table(t) => t.distance(i, j),
            m => m.eval(self.cloud.point(i), self.cloud.point(j)).expect("closed-form metric"),
        }
    }

    /// Distance between arbitrary positions; table metrics snap to the nearest nodes.
    pub fn dist_points(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.metric {
            Metric::Table(t) => t.distance(self.cloud.nearest(x), self.cloud.nearest(y)),
            m => m.eval(x, y).expect("closed-form metric"),
        }
    }

    /// Per-axis cell radius of a lattice window containing every ball of radius `r`,
    /// or `None` when no such bound is known.
    pub fn window(&self, r: f64) -> Option<Vec<usize>> {
        let h = self.cloud.spacing();
        let widths: Vec<f64> = match &self.metric {
            Metric::Euclidean => vec![r; self.dim()],
            Metric::Anisotropic { scales, degrees } => {
                (0..self.dim()).map(|a| scales[a] * r.powi(degrees[a] as i32)).collect()
            }
            Metric::Heisenberg => {
                let reach = self.cloud.lo()[0].abs().max(self.cloud.hi()[0].abs())
                    + self.cloud.lo()[1].abs().max(self.cloud.hi()[1].abs());
                vec![r, r, r * r / 4.0 + 0.5 * reach * r]
            }
            Metric::Table(_) => return None,
        };
        Some(
            widths
                .iter()
                .zip(h)
                .zip(self.cloud.counts())
                .map(|((w, h), &c)| ((w / h).ceil().min(c as f64)) as usize)
                .collect(),
        )
    }

    /// Calls `f(j, ρ(i, j))` for every `j` that may lie within `r` of `i`.
    fn for_each_near(&self, i: usize, r: f64, mut f: impl FnMut(usize, f64)) {
        match self.window(r) {
            Some(rad) => {
                let c = self.cloud.multi(i);
                self.cloud.for_each_in_window(&c, &rad, |j| f(j, self.dist(i, j)));
            }
            None => (0..self.len()).for_each(|j| f(j, self.dist(i, j))),
        }
    }

    /// `B(x, r) = {y : ρ(x, y) < r}`, sorted.
    pub fn ball(&self, i: usize, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_near(i, r, |j, d| {
            if d < r {
                out.push(j)
            }
        });
        out.sort_unstable();
        out
    }

    /// `{y : ρ(x, y) <= r}`, sorted.
    pub fn closed_ball(&self, i: usize, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_near(i, r * (1.0 + 1e-12), |j, d| {
            if d <= r {
                out.push(j)
            }
        });
        out.sort_unstable();
        out
    }

    /// Minimal distance from `i` to a point with `in_set[j]`; infinite for an empty set.
    pub fn dist_to_set(&self, i: usize, in_set: &[bool]) -> f64 {
        if in_set[i] {
            return 0.0;
        }
        if self.window(1.0).is_none() {
            return (0..self.len()).filter(|&j| in_set[j]).map(|j| self.dist(i, j)).fold(f64::INFINITY, f64::min);
        }
        let mut r = 2.0 * self.spacing.max(f64::MIN_POSITIVE);
        loop {
            let mut best = f64::INFINITY;
            self.for_each_near(i, r, |j, d| {
                if in_set[j] && d < best {
                    best = d;
                }
            });
            if best < r {
                return best;
            }
            let rad = self.window(r).unwrap();
            if rad.iter().zip(self.cloud.counts()).all(|(&w, &c)| w >= c) {
                return best;
            }
            r *= 2.0;
        }
    }

    /// Exact diameter of a subset.
    pub fn set_diameter(&self, set: &[usize]) -> f64 {
        if set.len() < 2 {
            return 0.0;
        }
        if self.metric.is_max_type() || (self.dim() == 1 && !matches!(self.metric, Metric::Table(_))) {
            // Translation-invariant and monotone per axis: the extents decide.
            let dim = self.dim();
            let mut lo = vec![f64::INFINITY; dim];
            let mut hi = vec![f64::NEG_INFINITY; dim];
            for &i in set {
                for (a, &v) in self.point(i).iter().enumerate() {
                    lo[a] = lo[a].min(v);
                    hi[a] = hi[a].max(v);
                }
            }
            return self.metric.eval(&lo, &hi).unwrap();
        }
        let mut d = 0.0f64;
        for (k, &i) in set.iter().enumerate() {
            for &j in &set[k + 1..] {
                d = d.max(self.dist(i, j));
            }
        }
        d
    }

    fn compute_spacing(&self) -> f64 {
        let dim = self.dim();
        let probes: Vec<usize> = match self.metric {
            Metric::Table(_) => (0..self.len()).collect(),
            Metric::Heisenberg => vec![0, self.len() / 2, self.len() - 1],
            _ => vec![self.len() / 2],
        };
        let mut s = 0.0f64;
        for &i in &probes {
            let m = self.cloud.multi(i);
            for a in 0..dim {
                let mut n = m.clone();
                if n[a] + 1 < self.cloud.counts()[a] {
                    n[a] += 1;
                } else if n[a] > 0 {
                    n[a] -= 1;
                } else {
                    continue;
                }
                s = s.max(self.dist(i, self.cloud.flat(&n)));
            }
        }
        s
    }

    fn compute_diameter(&self) -> f64 {
        let n = self.len();
        match self.metric {
            Metric::Euclidean | Metric::Anisotropic { .. } => self.dist(0, n - 1),
            _ if n <= 8192 => (0..n)
                .map(|i| ((i + 1)..n).map(|j| self.dist(i, j)).fold(0.0, f64::max))
                .fold(0.0, f64::max),
            _ => {
                // Corner-anchored estimate for large clouds.
                let dim = self.dim();
                let corners: Vec<usize> = (0..(1usize << dim))
                    .map(|mask| {
                        let m: Vec<usize> = (0..dim)
                            .map(|a| if mask >> a & 1 == 1 { self.cloud.counts()[a] - 1 } else { 0 })
                            .collect();
                        self.cloud.flat(&m)
                    })
                    .collect();
                corners.iter().map(|&c| (0..n).map(|j| self.dist(c, j)).fold(0.0, f64::max)).fold(0.0, f64::max)
            }
        }
    }
}

/// Geometric scale menu from the smallest resolved scale up to `top`.
fn scales(s: &DiscreteSHT, top: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut r = s.min_scale();
    while r <= top {
        out.push(r);
        r *= std::f64::consts::SQRT_2;
    }
    out
}

/// Whether the window for radius `r` around `i` stays inside the lattice.
fn interior(s: &DiscreteSHT, i: usize, r: f64) -> bool {
    match s.window(r) {
        None => true,
        Some(rad) => {
            let m = s.cloud.multi(i);
            (0..s.dim()).all(|a| m[a] >= rad[a] && m[a] + rad[a] < s.cloud.counts()[a])
        }
    }
}

/// `max μ(B(x, 2r)) / μ(B(x, r))` over sampled centres and resolved scales.
///
/// Centres are drawn so that the doubled ball does not meet the edge of the box;
/// table metrics have no window bound and use every centre.
pub fn doubling_estimate(s: &DiscreteSHT, samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return Err(Error::Contract("doubling estimate needs at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let menu = scales(s, s.diameter() / 4.0);
    if menu.is_empty() {
        return Err(Error::Resolution("no resolved scale below a quarter of the diameter".into()));
    }
    let mut worst = 0.0f64;
    let mut used = 0;
    let mut attempts = 0;
    while used < samples && attempts < 50 * samples {
        attempts += 1;
        let r = menu[rng.gen_range(0..menu.len())];
        let x = rng.gen_range(0..s.len());
        if !interior(s, x, 2.0 * r) {
            continue;
        }
        let inner = s.measure(&s.ball(x, r));
        if inner == 0.0 {
            return Err(Error::Resolution(format!("empty ball of radius {r} at a resolved scale")));
        }
        worst = worst.max(s.measure(&s.ball(x, 2.0 * r)) / inner);
        used += 1;
    }
    if used == 0 {
        return Err(Error::Resolution("no doubled ball fits inside the cloud".into()));
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerfectnessReport {
    pub holds: bool,
    /// Centre, radius and the best `ρ(x, y) / r` found in `[1/A, 1]` (or the closest miss).
    pub worst: Option<(usize, f64, f64)>,
}

/// Checks that every sampled ball `B(x, r)` with `r` between the resolved scale
/// and the diameter contains a point at distance in `[r/A, r]` from `x`.
pub fn uniform_perfectness_check(s: &DiscreteSHT, a: f64, samples: usize, seed: u64) -> Result<PerfectnessReport> {
    if a < 1.0 {
        return Err(Error::Contract(format!("uniform perfectness constant {a} below one")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let menu: Vec<f64> = scales(s, s.diameter()).into_iter().filter(|&r| r < s.diameter()).collect();
    let mut probes = Vec::with_capacity(samples);
    for _ in 0..samples {
        if menu.is_empty() {
            break;
        }
        probes.push((rng.gen_range(0..s.len()), menu[rng.gen_range(0..menu.len())]));
    }
    Ok(perfectness_at(s, a, &probes))
}

/// Perfectness at explicit `(centre, radius)` pairs.
pub fn perfectness_at(s: &DiscreteSHT, a: f64, probes: &[(usize, f64)]) -> PerfectnessReport {
    let mut holds = true;
    let mut worst: Option<(usize, f64, f64)> = None;
    for &(x, r) in probes {
        // Largest distance not exceeding r, and smallest one above it.
        let mut below = 0.0f64;
        s.for_each_near(x, r * (1.0 + 1e-12), |_, d| {
            if d <= r {
                below = below.max(d);
            }
        });
        let ratio = below / r;
        let ok = ratio >= 1.0 / a;
        holds &= ok;
        if worst.map_or(true, |(_, _, w)| ratio < w) {
            worst = Some((x, r, ratio));
        }
    }
    PerfectnessReport { holds, worst }
}

/// Largest sampled `ρ(x, z) / (ρ(x, y) + ρ(y, z))`.
pub fn quasi_triangle_constant(s: &DiscreteSHT, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = s.len();
    let mut k = 0.0f64;
    for _ in 0..samples {
        let (x, y, z) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
        let den = s.dist(x, y) + s.dist(y, z);
        if den > 0.0 {
            k = k.max(s.dist(x, z) / den);
        }
    }
    k
}

/// Checks `B(x_1, r_1) ∩ B(x_2, r_2) ≠ ∅, r_1 <= r_2 ⇒ B(x_1, r_1) ⊆ B(x_2, 3 r_2)`
/// on sampled intersecting pairs. Returns whether it held and the worst
/// `max_{y ∈ B(x_1, r_1)} ρ(x_2, y) / (3 r_2)`.
pub fn nested_balls_check(s: &DiscreteSHT, samples: usize, seed: u64) -> (bool, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let menu = scales(s, s.diameter() / 2.0);
    let mut worst = 0.0f64;
    if menu.is_empty() {
        return (true, 0.0);
    }
    let mut done = 0;
    let mut tries = 0;
    while done < samples && tries < 20 * samples {
        tries += 1;
        let r1 = menu[rng.gen_range(0..menu.len())];
        let r2 = menu[rng.gen_range(0..menu.len())].max(r1);
        let x1 = rng.gen_range(0..s.len());
        let b1 = s.ball(x1, r1);
        // Pick x2 close enough that the balls meet.
        let near = s.ball(x1, r1 + r2);
        let x2 = near[rng.gen_range(0..near.len())];
        if !b1.iter().any(|&y| s.dist(x2, y) < r2) {
            continue;
        }
        let far = b1.iter().map(|&y| s.dist(x2, y)).fold(0.0, f64::max);
        worst = worst.max(far / (3.0 * r2));
        done += 1;
    }
    (worst < 1.0, worst)
}

/// Constants of the two-sided comparison `C_1 |x - y| <= ρ(x, y) <= C_2 |x - y|^{1/d}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricComparison {
    pub lower: f64,
    pub upper: f64,
    pub top_degree: u32,
}

impl MetricComparison {
    /// Extreme ratios over the given pairs.
    pub fn fit(s: &DiscreteSHT, pairs: &[(usize, usize)], top_degree: u32) -> MetricComparison {
        let mut lower = f64::INFINITY;
        let mut upper = 0.0f64;
        for &(i, j) in pairs {
            let e = euclid(s.point(i), s.point(j));
            if e == 0.0 {
                continue;
            }
            let d = s.dist(i, j);
            lower = lower.min(d / e);
            upper = upper.max(d / e.powf(1.0 / top_degree as f64));
        }
        MetricComparison { lower, upper, top_degree }
    }

    /// Pairs violating the bounds.
    pub fn violations(&self, s: &DiscreteSHT, pairs: &[(usize, usize)]) -> usize {
        pairs
            .iter()
            .filter(|&&(i, j)| {
                let e = euclid(s.point(i), s.point(j));
                let d = s.dist(i, j);
                d < self.lower * e || d > self.upper * e.powf(1.0 / self.top_degree as f64)
            })
            .count()
    }
}

fn euclid(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

/// Distinct random index pairs.
pub fn random_pairs(n: usize, count: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count && n > 1 {
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if i != j {
            out.push((i, j));
        }
    }
    out
}

/// Ready-made clouds used by tests, benches and the CLI presets.
pub mod presets {
    use super::*;

    pub fn unit_interval(n: usize) -> DiscreteSHT {
        DiscreteSHT::new(Cloud::new(vec![0.0], vec![1.0], vec![n]).unwrap(), Metric::Euclidean).unwrap()
    }

    pub fn unit_square(n: usize) -> DiscreteSHT {
        DiscreteSHT::new(Cloud::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![n, n]).unwrap(), Metric::Euclidean)
            .unwrap()
    }

    /// Parabola metric on `[-1, 1]^2` with the vertical resolution matched to the
    /// quadratic scaling, so both axes have comparable metric spacing.
    pub fn parabola(n1: usize) -> DiscreteSHT {
        let n2 = n1 * n1 / 4;
        DiscreteSHT::new(Cloud::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![n1, n2.max(1)]).unwrap(), Metric::parabola())
            .unwrap()
    }

    /// Parabola metric on `[-1, 1]^2` with explicit per-axis resolution.
    pub fn parabola_grid(n1: usize, n2: usize) -> DiscreteSHT {
        DiscreteSHT::new(Cloud::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![n1, n2]).unwrap(), Metric::parabola())
            .unwrap()
    }

    /// Parabola metric on a square lattice, for operator work that wants isotropic cells.
    pub fn parabola_square(n: usize) -> DiscreteSHT {
        DiscreteSHT::new(Cloud::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![n, n]).unwrap(), Metric::parabola())
            .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::presets::*;
    use super::*;

    #[test]
    fn ball_examples() {
        let s = unit_interval(256);
        assert_eq!(s.ball(10, 10.0).len(), 256);
        assert_eq!(s.ball(10, 0.5 / 256.0), vec![10]);
        // Parabola ball: the bounding box has sides comparable to r and r^2.
        let p = parabola(64);
        let c = p.cloud().nearest(&[0.0, 0.0]);
        let b = p.ball(c, 0.25);
        let (mut w0, mut w1) = (0.0f64, 0.0f64);
        for &j in &b {
            w0 = w0.max((p.point(j)[0] - p.point(c)[0]).abs());
            w1 = w1.max((p.point(j)[1] - p.point(c)[1]).abs());
        }
        let ratio = (w1 / w0) / 0.25;
        assert!(ratio > 0.25 && ratio < 4.0, "box ratio {ratio}");
    }

    #[test]
    fn ball_is_monotone_in_radius() {
        let s = parabola(32);
        let i = s.len() / 3;
        let mut prev = 0;
        for k in 1..12 {
            let n = s.ball(i, 0.05 * k as f64).len();
            assert!(n >= prev);
            prev = n;
        }
    }

    #[test]
    fn doubling_matches_homogeneous_dimension() {
        let d1 = doubling_estimate(&unit_interval(4096), 200, 1).unwrap();
        assert!((d1 - 2.0).abs() <= 0.4, "{d1}");
        let d2 = doubling_estimate(&unit_square(128), 200, 2).unwrap();
        assert!((d2 - 4.0).abs() <= 0.8, "{d2}");
        let d3 = doubling_estimate(&parabola(64), 200, 3).unwrap();
        assert!((d3 - 8.0).abs() <= 2.4, "{d3}");
    }

    #[test]
    fn doubling_ignores_weight_scale() {
        let s = unit_square(64);
        let a = doubling_estimate(&s, 100, 9).unwrap();
        let w: Vec<f64> = s.weights().iter().map(|w| 7.5 * w).collect();
        let b = doubling_estimate(&s.clone().with_weights(w).unwrap(), 100, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn perfectness_examples() {
        assert!(uniform_perfectness_check(&unit_interval(1024), 3.0, 200, 4).unwrap().holds);
        assert!(uniform_perfectness_check(&parabola(64), 3.0, 200, 5).unwrap().holds);
        let two = unit_interval(2);
        assert!(!perfectness_at(&two, 1.5, &[(0, 0.3)]).holds);
        assert!(uniform_perfectness_check(&unit_interval(8), 0.5, 1, 0).is_err());
    }

    #[test]
    fn closed_forms_are_metrics() {
        for s in [unit_square(32), parabola(32)] {
            assert!(quasi_triangle_constant(&s, 5000, 11) <= 1.0 + 1e-12);
            let (ok, worst) = nested_balls_check(&s, 200, 12);
            assert!(ok, "{worst}");
        }
        let h = DiscreteSHT::new(
            Cloud::new(vec![-1.0; 3], vec![1.0; 3], vec![12, 12, 12]).unwrap(),
            Metric::Heisenberg,
        )
        .unwrap();
        assert!(quasi_triangle_constant(&h, 5000, 13) <= 1.0 + 1e-12);
        for (i, j) in random_pairs(h.len(), 50, 3) {
            assert!((h.dist(i, j) - h.dist(j, i)).abs() < 1e-12);
        }
    }

    #[test]
    fn dist_to_set_matches_brute_force() {
        let s = parabola(32);
        let mask: Vec<bool> = (0..s.len()).map(|i| s.point(i)[0] > 0.6 && s.point(i)[1] < -0.2).collect();
        for i in [0, 17, 100, s.len() - 1] {
            let brute = (0..s.len()).filter(|&j| mask[j]).map(|j| s.dist(i, j)).fold(f64::INFINITY, f64::min);
            assert_eq!(s.dist_to_set(i, &mask), brute);
        }
    }

    #[test]
    fn set_diameter_matches_pairs() {
        let s = parabola(16);
        let set: Vec<usize> = (0..s.len()).step_by(7).collect();
        let mut brute = 0.0f64;
        for &i in &set {
            for &j in &set {
                brute = brute.max(s.dist(i, j));
            }
        }
        assert!((s.set_diameter(&set) - brute).abs() < 1e-12);
        // Outermost cell centres sit half a cell inside the box.
        assert!((s.diameter() - (2.0 - 2.0 / 16.0)).abs() < 1e-12);
    }
}
