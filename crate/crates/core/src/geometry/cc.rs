//! Carnot–Carathéodory distances on lattices.
//!
//! A point `y` is δ-reachable from `x` when a chain of flows `e^{t X_j}` with
//! `t = ±δ^{d_j} 2^{-m}` (`m <= 6`, cost `2^{-m}`) joins them with total cost
//! at most one. Each endpoint snaps to the nearest lattice node. Sequential
//! single-field flows are a subset of the admissible controls, so the graph
//! distance dominates the true metric and stays within a factor `q` of it.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::field::{Domain, GradedFieldSystem};
use super::flow::flow;

#[derive(Clone, Debug)]
pub struct ReachOptions {
    /// Finest time fraction is `2^{-max_level}`.
    pub max_level: u32,
    pub rk4_steps: usize,
}

impl Default for ReachOptions {
    fn default() -> Self {
        ReachOptions { max_level: 6, rk4_steps: 4 }
    }
}

/// Nodes `origin + i * spacing`, `0 <= i < counts`, per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeLattice {
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub counts: Vec<usize>,
}

impl NodeLattice {
    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, multi: &[usize]) -> Vec<f64> {
        multi
            .iter()
            .enumerate()
            .map(|(a, &i)| self.origin[a] + i as f64 * self.spacing[a])
            .collect()
    }

    pub fn flat(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        for a in (0..multi.len()).rev() {
            idx = idx * self.counts[a] + multi[a];
        }
        idx
    }

    pub fn multi(&self, mut flat: usize) -> Vec<usize> {
        self.counts
            .iter()
            .map(|&c| {
                let i = flat % c;
                flat /= c;
                i
            })
            .collect()
    }

    /// Nearest node per axis, possibly out of range.
    pub fn snap(&self, x: &[f64]) -> Vec<i64> {
        x.iter()
            .enumerate()
            .map(|(a, &v)| ((v - self.origin[a]) / self.spacing[a]).round() as i64)
            .collect()
    }

    fn shifted(&self, multi: &[usize], off: &[i64]) -> Option<usize> {
        let mut idx = 0;
        for a in (0..multi.len()).rev() {
            let v = multi[a] as i64 + off[a];
            if v < 0 || v >= self.counts[a] as i64 {
                return None;
            }
            idx = idx * self.counts[a] + v as usize;
        }
        Some(idx)
    }
}

type Edges = Vec<(Vec<i64>, f64)>;

/// Integer offsets and costs of all menu flows from the node at `p`.
fn edge_offsets(sys: &GradedFieldSystem, lat: &NodeLattice, p: &[f64], delta: f64, opts: &ReachOptions, domain: &Domain) -> Edges {
    let mut best: HashMap<Vec<i64>, f64> = HashMap::new();
    for j in 0..sys.len() {
        let base = delta.powi(sys.degree(j) as i32);
        for m in 0..=opts.max_level {
            let frac = 0.5f64.powi(m as i32);
            for sign in [1.0, -1.0] {
                let t = sign * base * frac;
                let Ok(q) = flow(sys.field(j), t, p, t.abs() / opts.rk4_steps as f64, domain) else {
                    continue;
                };
                let off: Vec<i64> = q
                    .iter()
                    .zip(p)
                    .enumerate()
                    .map(|(a, (qv, pv))| ((qv - pv) / lat.spacing[a]).round() as i64)
                    .collect();
                if off.iter().all(|&o| o == 0) {
                    continue;
                }
                // Snapping may lengthen a step; charge proportionally so the graph
                // never outruns the flow it approximates.
                let actual: f64 = (0..q.len()).map(|a| ((q[a] - p[a]) / lat.spacing[a]).powi(2)).sum::<f64>().sqrt();
                let snapped: f64 = off.iter().map(|&o| (o * o) as f64).sum::<f64>().sqrt();
                let cost = frac * (snapped / actual).max(1.0);
                let e = best.entry(off).or_insert(cost);
                if cost < *e {
                    *e = cost;
                }
            }
        }
    }
    let mut edges: Edges = best.into_iter().collect();
    edges.sort_by(|a, b| a.0.cmp(&b.0));
    edges
}

/// Minimal costs (capped at one) from `src` over the reachability graph.
fn reach_costs<F>(lat: &NodeLattice, src: usize, target: Option<usize>, mut edges_at: F) -> Vec<f64>
where
    F: FnMut(&[usize]) -> std::sync::Arc<Edges>,
{
    let mut cost = vec![f64::INFINITY; lat.len()];
    let mut heap = BinaryHeap::new();
    cost[src] = 0.0;
    heap.push(Reverse((0f64.to_bits(), src)));
    while let Some(Reverse((bits, u))) = heap.pop() {
        let c = f64::from_bits(bits);
        if c > cost[u] {
            continue;
        }
        if Some(u) == target {
            break;
        }
        let mu = lat.multi(u);
        let edges = edges_at(&mu);
        for (off, w) in edges.iter() {
            let nc = c + w;
            if nc > 1.0 {
                continue;
            }
            if let Some(v) = lat.shifted(&mu, off) {
                if nc < cost[v] {
                    cost[v] = nc;
                    heap.push(Reverse((nc.to_bits(), v)));
                }
            }
        }
    }
    cost
}

/// Per-axis reach of one unit of control at scale `delta` near `x`.
fn local_half_widths(sys: &GradedFieldSystem, x: &[f64], delta: f64) -> Vec<f64> {
    let n = x.len();
    let reach = |box_half: &[f64]| -> Vec<f64> {
        let probe = Domain::new(
            x.iter().zip(box_half).map(|(c, w)| c - w).collect(),
            x.iter().zip(box_half).map(|(c, w)| c + w).collect(),
        );
        let mut pts = probe.sample_grid(3);
        pts.push(x.to_vec());
        let mut w = vec![0.0f64; n];
        for j in 0..sys.len() {
            let s = delta.powi(sys.degree(j) as i32);
            for p in &pts {
                for (a, v) in sys.field(j).eval(p).iter().enumerate() {
                    w[a] = w[a].max(s * v.abs());
                }
            }
        }
        w
    };
    let mut w = reach(&vec![0.0; n]);
    for _ in 0..3 {
        let grown: Vec<f64> = w.iter().map(|v| 2.0 * v).collect();
        w = reach(&grown);
    }
    w.iter().map(|v| 2.0 * v).collect()
}

const LOCAL_RADIUS: usize = 12;

fn reachable_local(sys: &GradedFieldSystem, x: &[f64], y: &[f64], delta: f64, opts: &ReachOptions) -> bool {
    let n = x.len();
    let w = local_half_widths(sys, x, delta);
    let mut lat = NodeLattice { origin: vec![0.0; n], spacing: vec![1.0; n], counts: vec![1; n] };
    for a in 0..n {
        if w[a] > 0.0 {
            lat.spacing[a] = w[a] / LOCAL_RADIUS as f64;
            lat.counts[a] = 2 * LOCAL_RADIUS + 1;
            lat.origin[a] = x[a] - w[a];
        } else {
            lat.origin[a] = x[a];
        }
    }
    let snapped = lat.snap(y);
    if snapped.iter().zip(&lat.counts).any(|(&i, &c)| i < 0 || i >= c as i64) {
        return false;
    }
    let target: Vec<usize> = snapped.iter().map(|&i| i as usize).collect();
    let src: Vec<usize> = lat.counts.iter().map(|&c| c / 2).collect();
    let (src, target) = (lat.flat(&src), lat.flat(&target));
    if src == target {
        return true;
    }
    let domain = sys.domain().clone();
    let mut cache: HashMap<usize, std::sync::Arc<Edges>> = HashMap::new();
    let costs = reach_costs(&lat, src, Some(target), |mu| {
        let key = lat.flat(mu);
        cache
            .entry(key)
            .or_insert_with(|| std::sync::Arc::new(edge_offsets(sys, &lat, &lat.point(mu), delta, opts, &domain)))
            .clone()
    });
    costs[target] <= 1.0
}

/// Directed graph distance from `x` to `y`, bisected to absolute tolerance `tol`.
fn directed(sys: &GradedFieldSystem, x: &[f64], y: &[f64], tol: f64, opts: &ReachOptions) -> Result<f64> {
    let euclid = x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if euclid == 0.0 {
        return Ok(0.0);
    }
    let d = sys.domain();
    let diam: f64 = d.lo.iter().zip(&d.hi).map(|(l, h)| h - l).fold(0.0, f64::max);
    let cap = 4.0 * diam.max(1.0);
    let mut hi = euclid.max(tol);
    while !reachable_local(sys, x, y, hi, opts) {
        hi *= 2.0;
        if hi > cap {
            return Err(Error::Disconnected(cap));
        }
    }
    let mut lo = hi / 2.0;
    while lo > tol && reachable_local(sys, x, y, lo, opts) {
        hi = lo;
        lo /= 2.0;
    }
    if lo <= tol {
        lo = 0.0;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if reachable_local(sys, x, y, mid, opts) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Symmetrized CC distance: both directions are searched and the max is returned.
pub fn cc_distance(sys: &GradedFieldSystem, x: &[f64], y: &[f64], tol: f64) -> Result<f64> {
    cc_distance_with(sys, x, y, tol, &ReachOptions::default())
}

pub fn cc_distance_with(sys: &GradedFieldSystem, x: &[f64], y: &[f64], tol: f64, opts: &ReachOptions) -> Result<f64> {
    let a = directed(sys, x, y, tol, opts)?;
    let b = directed(sys, y, x, tol, opts)?;
    Ok(a.max(b))
}

/// Precomputed graph distances between all nodes of a lattice.
///
/// Axes on which no field coefficient depends are translation invariant, so
/// only one source per class of the remaining axes is searched, on a lattice
/// extended to `2n - 1` nodes along each invariant axis.
#[derive(Clone, Debug)]
pub struct CcTable {
    lattice: NodeLattice,
    invariant: Vec<bool>,
    extended: NodeLattice,
    levels: Vec<f64>,
    /// `classes × extended.len()` level indices; 0 means the source itself.
    data: Vec<u16>,
}

const UNREACHED: u16 = u16::MAX;

impl CcTable {
    /// Distances on the nodes of `lattice`, quantized to the geometric scale menu
    /// with ratio `2^{1/8}`.
    pub fn build(sys: &GradedFieldSystem, lattice: &NodeLattice, opts: &ReachOptions) -> Result<CcTable> {
        let n = lattice.counts.len();
        let invariant = sys.invariant_axes();
        let extended = NodeLattice {
            origin: (0..n)
                .map(|a| {
                    if invariant[a] {
                        lattice.origin[a] - (lattice.counts[a] as f64 - 1.0) * lattice.spacing[a]
                    } else {
                        lattice.origin[a]
                    }
                })
                .collect(),
            spacing: lattice.spacing.clone(),
            counts: (0..n)
                .map(|a| if invariant[a] { 2 * lattice.counts[a] - 1 } else { lattice.counts[a] })
                .collect(),
        };
        let classes = Self::class_count(lattice, &invariant);
        if classes * extended.len() > (1usize << 28) {
            return Err(Error::Resolution(format!(
                "distance table of {} entries exceeds the desk-scale limit",
                classes * extended.len()
            )));
        }
        let min_h = lattice.spacing.iter().cloned().fold(f64::INFINITY, f64::min);
        let d = sys.domain();
        let diam = d.lo.iter().zip(&d.hi).map(|(l, h)| (h - l).powi(2)).sum::<f64>().sqrt();
        let ratio = 2f64.powf(0.125);
        let mut levels = Vec::new();
        let mut s = min_h / 2.0;
        while s < 4.0 * diam.max(1.0) {
            levels.push(s);
            s *= ratio;
        }
        // Flows may run freely along invariant axes.
        let flow_domain = Domain::new(
            (0..n).map(|a| if invariant[a] { f64::NEG_INFINITY } else { d.lo[a] }).collect(),
            (0..n).map(|a| if invariant[a] { f64::INFINITY } else { d.hi[a] }).collect(),
        );
        // Edge menus per level and class.
        let class_points: Vec<Vec<usize>> = (0..classes).map(|c| Self::class_multi(lattice, &invariant, c)).collect();
        let menus: Vec<Vec<std::sync::Arc<Edges>>> = levels
            .par_iter()
            .map(|&delta| {
                class_points
                    .iter()
                    .map(|m| {
                        let p = lattice.point(m);
                        std::sync::Arc::new(edge_offsets(sys, lattice, &p, delta, opts, &flow_domain))
                    })
                    .collect()
            })
            .collect();
        let ext_len = extended.len();
        let rows: Vec<Vec<u16>> = (0..classes)
            .into_par_iter()
            .map(|c| {
                let mut src = class_points[c].clone();
                for a in 0..n {
                    if invariant[a] {
                        src[a] = lattice.counts[a] - 1;
                    }
                }
                let src = extended.flat(&src);
                let mut row = vec![UNREACHED; ext_len];
                row[src] = 0;
                let mut left = ext_len - 1;
                for (li, menu) in menus.iter().enumerate() {
                    if left == 0 {
                        break;
                    }
                    let costs = reach_costs(&extended, src, None, |mu| {
                        menu[Self::class_of_multi(lattice, &invariant, mu)].clone()
                    });
                    for (v, &cv) in costs.iter().enumerate() {
                        if cv <= 1.0 && row[v] == UNREACHED {
                            row[v] = (li + 1) as u16;
                            left -= 1;
                        }
                    }
                }
                row
            })
            .collect();
        let data: Vec<u16> = rows.into_iter().flatten().collect();
        let table = CcTable { lattice: lattice.clone(), invariant, extended, levels, data };
        // Every lattice pair must be connected.
        for c in 0..classes {
            let src = Self::class_multi(lattice, &table.invariant, c);
            let s = lattice.flat(&src);
            for t in 0..lattice.len() {
                if table.directed(s, t).is_infinite() {
                    return Err(Error::Disconnected(*table.levels.last().unwrap()));
                }
            }
        }
        Ok(table)
    }

    fn class_count(lattice: &NodeLattice, invariant: &[bool]) -> usize {
        lattice
            .counts
            .iter()
            .zip(invariant)
            .map(|(&c, &inv)| if inv { 1 } else { c })
            .product()
    }

    fn class_multi(lattice: &NodeLattice, invariant: &[bool], mut c: usize) -> Vec<usize> {
        lattice
            .counts
            .iter()
            .zip(invariant)
            .map(|(&cnt, &inv)| {
                if inv {
                    0
                } else {
                    let i = c % cnt;
                    c /= cnt;
                    i
                }
            })
            .collect()
    }

    fn class_of_multi(lattice: &NodeLattice, invariant: &[bool], multi: &[usize]) -> usize {
        let mut idx = 0;
        for a in (0..multi.len()).rev() {
            if !invariant[a] {
                idx = idx * lattice.counts[a] + multi[a];
            }
        }
        idx
    }

    pub fn lattice(&self) -> &NodeLattice {
        &self.lattice
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Directed graph distance between lattice nodes (flat indices).
    pub fn directed(&self, from: usize, to: usize) -> f64 {
        let n = self.lattice.counts.len();
        let pm = self.lattice.multi(from);
        let qm = self.lattice.multi(to);
        let class = Self::class_of_multi(&self.lattice, &self.invariant, &pm);
        let key: Vec<usize> = (0..n)
            .map(|a| {
                if self.invariant[a] {
                    (qm[a] as i64 - pm[a] as i64 + self.lattice.counts[a] as i64 - 1) as usize
                } else {
                    qm[a]
                }
            })
            .collect();
        let v = self.data[class * self.extended.len() + self.extended.flat(&key)];
        match v {
            0 => 0.0,
            UNREACHED => f64::INFINITY,
            l => self.levels[l as usize - 1],
        }
    }

    pub fn distance(&self, p: usize, q: usize) -> f64 {
        if p == q {
            return 0.0;
        }
        self.directed(p, q).max(self.directed(q, p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::field::VectorField;
    use crate::geometry::models;

    fn euclid_system() -> GradedFieldSystem {
        GradedFieldSystem::new(
            vec![(VectorField::coordinate(2, 0), 1), (VectorField::coordinate(2, 1), 1)],
            Domain::cube(2, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn straight_flow_distance() {
        let d = cc_distance(&euclid_system(), &[0.0, 0.0], &[0.5, 0.0], 1e-3).unwrap();
        assert!((d - 0.5).abs() <= 0.5 / LOCAL_RADIUS as f64 + 1e-3, "{d}");
    }

    #[test]
    fn zero_distance_on_diagonal() {
        assert_eq!(cc_distance(&euclid_system(), &[0.2, 0.1], &[0.2, 0.1], 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn grushin_vertical_scaling() {
        let sys = models::grushin_system();
        let mut ratios = Vec::new();
        for h in [1e-2, 1e-3, 1e-4] {
            let d = cc_distance(&sys, &[0.0, 0.0], &[0.0, h], 1e-3 * h.sqrt()).unwrap();
            ratios.push(d / h.sqrt());
        }
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(0.0, f64::max);
        assert!(lo > 0.3 && hi < 1.5, "ratios {ratios:?}");
    }

    #[test]
    fn table_uses_translation_invariance() {
        let sys = models::grushin_system();
        let lat = NodeLattice { origin: vec![-0.875, -0.875], spacing: vec![0.25, 0.25], counts: vec![8, 8] };
        let table = CcTable::build(&sys, &lat, &ReachOptions::default()).unwrap();
        for p in 0..lat.len() {
            assert_eq!(table.distance(p, p), 0.0);
            for q in 0..lat.len() {
                assert_eq!(table.distance(p, q), table.distance(q, p));
                if p != q {
                    assert!(table.distance(p, q) > 0.0);
                }
            }
        }
        // Shifting both points vertically leaves the distance unchanged.
        let a = lat.flat(&[2, 1]);
        let b = lat.flat(&[5, 3]);
        let a2 = lat.flat(&[2, 4]);
        let b2 = lat.flat(&[5, 6]);
        assert_eq!(table.distance(a, b), table.distance(a2, b2));
    }
}
