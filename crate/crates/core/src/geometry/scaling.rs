use crate::error::{Error, Result};
use crate::numerics;

use super::field::{GradedFieldSystem, VectorField};
use super::flow::exp_combination;
use super::hormander::combinations;

/// `Λ(x, δ) = Σ_I |det(X_{i_1}, ..., X_{i_n})(x)| δ^{d(I)}` over increasing index tuples.
pub fn volume_proxy(sys: &GradedFieldSystem, x: &[f64], delta: f64) -> f64 {
    if delta == 0.0 {
        return 0.0;
    }
    let vals: Vec<Vec<f64>> = sys.fields().iter().map(|f| f.eval(x)).collect();
    combinations(sys.len(), sys.dim())
        .into_iter()
        .map(|idx| {
            let cols: Vec<&[f64]> = idx.iter().map(|&i| vals[i].as_slice()).collect();
            let d: u32 = idx.iter().map(|&i| sys.degree(i)).sum();
            numerics::det(&cols).abs() * delta.powi(d as i32)
        })
        .sum()
}

/// `Φ(u) = exp(u · Z_{J_0}) x_0` with `Z_j = scale^{d_j} X_j`.
#[derive(Clone, Debug)]
pub struct ScalingMap {
    pub base: Vec<f64>,
    pub scale: f64,
    pub j0: Vec<usize>,
    pub det_at_base: f64,
    /// Largest dyadic radius on which sampled `|det dΦ|` stays within a factor 2 of its base value.
    pub eta1: f64,
    /// Euclidean radius of the image of the `eta1`-ball.
    pub zeta1: f64,
    /// `sup / inf` of sampled `|det dΦ(u)|` on the `eta1`-ball.
    pub ratio: f64,
    fields: Vec<VectorField>,
    system: GradedFieldSystem,
}

const FLOW_STEP: f64 = 1.0 / 32.0;

impl ScalingMap {
    pub fn eval(&self, u: &[f64]) -> Result<Vec<f64>> {
        let refs: Vec<&VectorField> = self.fields.iter().collect();
        exp_combination(&refs, u, &self.base, FLOW_STEP, self.system.domain())
    }

    /// `|det dΦ(u)|` by Richardson differences.
    pub fn jacobian_det(&self, u: &[f64]) -> Result<f64> {
        let n = u.len();
        let mut cols = Vec::with_capacity(n);
        for i in 0..n {
            let failure = std::cell::RefCell::new(None);
            let col = numerics::derivative(
                |s| {
                    let mut v = u.to_vec();
                    v[i] += s;
                    self.eval(&v).unwrap_or_else(|e| {
                        *failure.borrow_mut() = Some(e);
                        vec![f64::NAN; n]
                    })
                },
                0.0,
                1e-3,
            );
            if let Some(e) = failure.into_inner() {
                return Err(e);
            }
            cols.push(col);
        }
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        Ok(numerics::det(&refs).abs())
    }
}

pub fn build_scaling_map(sys: &GradedFieldSystem, x0: &[f64], scale: f64) -> Result<ScalingMap> {
    let n = sys.dim();
    let scaled = sys.scaled(scale);
    let vals: Vec<Vec<f64>> = scaled.iter().map(|f| f.eval(x0)).collect();
    if numerics::rank(&vals, super::hormander::RANK_TOL) < n {
        return Err(Error::Span(x0.to_vec()));
    }
    // Lexicographically first maximizer.
    let mut best: Option<(Vec<usize>, f64)> = None;
    for idx in combinations(sys.len(), n) {
        let cols: Vec<&[f64]> = idx.iter().map(|&i| vals[i].as_slice()).collect();
        let d = numerics::det(&cols).abs();
        if best.as_ref().map_or(true, |(_, b)| d > *b * (1.0 + 1e-12)) {
            best = Some((idx, d));
        }
    }
    let (j0, det0) = best.expect("at least one index set");
    let fields: Vec<VectorField> = j0.iter().map(|&i| scaled[i].clone()).collect();
    let mut map = ScalingMap {
        base: x0.to_vec(),
        scale,
        j0,
        det_at_base: det0,
        eta1: 0.0,
        zeta1: 0.0,
        ratio: f64::INFINITY,
        fields,
        system: sys.clone(),
    };
    let probes = unit_probes(n);
    for i in 0..16 {
        let r = 0.5f64.powi(i);
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        let mut image = 0.0f64;
        let mut ok = true;
        for p in &probes {
            let u: Vec<f64> = p.iter().map(|v| v * r).collect();
            match (map.jacobian_det(&u), map.eval(&u)) {
                (Ok(d), Ok(y)) => {
                    lo = lo.min(d);
                    hi = hi.max(d);
                    let dist = y.iter().zip(x0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                    image = image.max(dist);
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok && lo >= 0.5 * det0 && hi <= 2.0 * det0 {
            map.eta1 = r;
            map.zeta1 = image;
            map.ratio = hi / lo;
            break;
        }
    }
    if map.eta1 == 0.0 {
        return Err(Error::Resolution("no dyadic radius keeps the scaling Jacobian comparable".into()));
    }
    Ok(map)
}

/// Sample directions in the closed unit cube: center, vertices and face centers.
fn unit_probes(n: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; n]];
    for mask in 0..(1usize << n) {
        out.push((0..n).map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 }).collect());
    }
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut v = vec![0.0; n];
            v[i] = s;
            out.push(v);
        }
    }
    for k in 1..=4 {
        let v: Vec<f64> = (0..n).map(|i| ((k * (i + 1)) as f64 * 0.7).sin()).collect();
        out.push(v);
    }
    out
}
