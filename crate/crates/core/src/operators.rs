//! Calderón–Zygmund kernels, their dyadic ladders, and singular Radon
//! transforms applied to grid functions.
//!
//! Parameter integrals use radial Gauss–Legendre rules whose nodes come in
//! exact `±s` pairs, so odd integrands cancel to the last bit. Off-lattice
//! values of the input come from multilinear interpolation with zero extension.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::CurveFamily;
use crate::numerics::{gauss_legendre, smoothstep};
use crate::sht::DiscreteSHT;

pub use crate::cloud::pairing;

type ParamFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type DensityFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Product cutoff: 1 on the inner box, 0 outside the outer box, quintic in between.
#[derive(Clone, Debug, PartialEq)]
pub struct Cutoff {
    pub center: Vec<f64>,
    pub inner: Vec<f64>,
    pub outer: Vec<f64>,
}

impl Cutoff {
    pub fn new(center: Vec<f64>, inner: Vec<f64>, outer: Vec<f64>) -> Result<Cutoff> {
        if center.len() != inner.len() || center.len() != outer.len() || inner.iter().zip(&outer).any(|(i, o)| !(o > i) || *i < 0.0) {
            return Err(Error::Contract("cutoff needs 0 <= inner < outer half-widths on every axis".into()));
        }
        Ok(Cutoff { center, inner, outer })
    }

    /// Cutoff scaled to a box: plateau on `inner` and support on `outer` fractions of each half-width.
    pub fn in_box(lo: &[f64], hi: &[f64], inner: f64, outer: f64) -> Cutoff {
        let center = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let half: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).collect();
        Cutoff { center, inner: half.iter().map(|h| inner * h).collect(), outer: half.iter().map(|h| outer * h).collect() }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v = 1.0;
        for a in 0..self.center.len() {
            let d = (x[a] - self.center[a]).abs();
            if d >= self.outer[a] {
                return 0.0;
            }
            if d > self.inner[a] {
                v *= 1.0 - smoothstep((d - self.inner[a]) / (self.outer[a] - self.inner[a]));
            }
        }
        v
    }

    /// Sup norms of the cutoff and of its first and second axis derivatives.
    pub fn norms(&self) -> [f64; 3] {
        // smoothstep' peaks at 15/8, smoothstep'' at 10/√3.
        let w = self.inner.iter().zip(&self.outer).map(|(i, o)| o - i).fold(f64::INFINITY, f64::min);
        [1.0, 1.875 / w, 10.0 / 3f64.sqrt() / (w * w)]
    }

    pub fn contains_support_of(&self, other: &Cutoff) -> bool {
        (0..self.center.len()).all(|a| (other.center[a] - self.center[a]).abs() + other.outer[a] <= self.outer[a] + 1e-12)
    }
}

/// Smoothly truncated Calderón–Zygmund kernel on `B^k(a) \ {0}`.
#[derive(Clone)]
pub struct CZKernel {
    name: String,
    params: usize,
    radius: f64,
    t_min: f64,
    eval: ParamFn,
}

impl fmt::Debug for CZKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CZKernel").field("name", &self.name).field("params", &self.params).field("radius", &self.radius).field("t_min", &self.t_min).finish()
    }
}

fn norm(s: &[f64]) -> f64 {
    s.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// 1 on `|s| <= plateau`, 0 on `|s| >= radius`.
fn radial_cut(r: f64, plateau: f64, radius: f64) -> f64 {
    if r <= plateau {
        1.0
    } else if r >= radius {
        0.0
    } else {
        1.0 - smoothstep((r - plateau) / (radius - plateau))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelConstants {
    /// `sup |∂^α K(t)| |t|^{|α| + k}` for `|α| = 0, 1, 2`.
    pub size: [f64; 3],
    /// `sup_{R, φ} |∫ K(t) φ(R t) dt|` over the bundled bumps.
    pub cancellation: f64,
}

impl CZKernel {
    pub fn from_fn(name: &str, params: usize, radius: f64, t_min: f64, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Result<CZKernel> {
        if !(radius > 0.0 && t_min > 0.0 && t_min < radius) {
            return Err(Error::Kernel(format!("need 0 < t_min < a, got t_min={t_min}, a={radius}")));
        }
        if params == 0 || params > 2 {
            return Err(Error::Kernel(format!("kernels with {params} parameters are not supported")));
        }
        Ok(CZKernel { name: name.into(), params, radius, t_min, eval: Arc::new(f) })
    }

    /// `φ(t) / t` with `φ = 1` on `|t| <= a/2`, vanishing at `|t| = a`.
    pub fn hilbert(radius: f64) -> CZKernel {
        CZKernel::from_fn("hilbert", 1, radius, radius * 1e-6, move |t| radial_cut(t[0].abs(), 0.5 * radius, radius) / t[0]).unwrap()
    }

    /// First Riesz kernel `t_1 / |t|^3` on the plane, smoothly truncated like [`CZKernel::hilbert`].
    pub fn riesz(radius: f64) -> CZKernel {
        CZKernel::from_fn("riesz", 2, radius, radius * 1e-4, move |t| {
            let r = norm(t);
            radial_cut(r, 0.5 * radius, radius) * t[0] / (r * r * r)
        })
        .unwrap()
    }

    /// One-parameter kernel from samples on `[-a, a]`, linear in between, zero outside.
    pub fn table(radius: f64, t_min: f64, ts: Vec<f64>, values: Vec<f64>) -> Result<CZKernel> {
        if ts.len() != values.len() || ts.len() < 2 || ts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Kernel("kernel table needs increasing abscissae matching the values".into()));
        }
        CZKernel::from_fn("table", 1, radius, t_min, move |t| {
            let x = t[0];
            if x <= ts[0] || x >= ts[ts.len() - 1] {
                return 0.0;
            }
            let i = ts.partition_point(|&v| v <= x) - 1;
            let u = (x - ts[i]) / (ts[i + 1] - ts[i]);
            values[i] * (1.0 - u) + values[i + 1] * u
        })
    }

    pub fn by_name(name: &str, radius: f64) -> Result<CZKernel> {
        match name {
            "hilbert" => Ok(CZKernel::hilbert(radius)),
            "riesz" => Ok(CZKernel::riesz(radius)),
            other => Err(Error::Parse(format!("unknown kernel `{other}`"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> usize {
        self.params
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn eval(&self, t: &[f64]) -> f64 {
        if norm(t) >= self.radius {
            return 0.0;
        }
        (self.eval)(t)
    }

    /// Measured size and cancellation constants at sampled points in `t_min <= |t| < a`.
    pub fn measure_constants(&self) -> Result<KernelConstants> {
        let k = self.params;
        let mut size = [0.0f64; 3];
        let samples = 200;
        let (lo, hi) = (self.t_min.max(self.radius * 1e-4), self.radius * 0.999);
        for i in 0..samples {
            let r = lo * (hi / lo).powf(i as f64 / (samples - 1) as f64);
            for dir in directions(k) {
                let t: Vec<f64> = dir.iter().map(|d| d * r).collect();
                let h = 1e-3 * r;
                let v = self.eval(&t);
                if !v.is_finite() {
                    return Err(Error::Kernel(format!("kernel not finite at {t:?}")));
                }
                size[0] = size[0].max(v.abs() * r.powi(k as i32));
                for a in 0..k {
                    let d1 = central(|s| self.eval(&shifted(&t, a, s)), h, 1);
                    let d2 = central(|s| self.eval(&shifted(&t, a, s)), h, 2);
                    size[1] = size[1].max(d1.abs() * r.powi(k as i32 + 1));
                    size[2] = size[2].max(d2.abs() * r.powi(k as i32 + 2));
                }
            }
        }
        let rule = radial_rule(k, &geometric_breaks(self.t_min, self.radius, 24), f64::INFINITY, 8)?;
        let mut cancellation = 0.0f64;
        for shift in [0.0, 0.3] {
            for width in [1.0, 0.5] {
                for e in 0..12 {
                    let scale = 2f64.powi(e) / self.radius;
                    let total: f64 = rule
                        .iter()
                        .map(|(t, w)| {
                            let u: Vec<f64> = t.iter().enumerate().map(|(a, v)| scale * v - if a == 0 { shift } else { 0.0 }).collect();
                            w * self.eval(t) * radial_cut(norm(&u), 0.5 * width, width)
                        })
                        .sum();
                    cancellation = cancellation.max(total.abs());
                }
            }
        }
        Ok(KernelConstants { size, cancellation })
    }
}

fn directions(k: usize) -> Vec<Vec<f64>> {
    match k {
        1 => vec![vec![1.0], vec![-1.0]],
        _ => (0..8).map(|i| {
            let th = (i as f64 + 0.25) * PI / 4.0;
            vec![th.cos(), th.sin()]
        })
        .collect(),
    }
}

fn shifted(t: &[f64], a: usize, s: f64) -> Vec<f64> {
    let mut u = t.to_vec();
    u[a] += s;
    u
}

fn central(f: impl Fn(f64) -> f64, h: f64, order: u32) -> f64 {
    match order {
        1 => (f(h) - f(-h)) / (2.0 * h),
        _ => (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h),
    }
}

/// Breakpoints `0, lo, ..., hi` with `panels` geometric steps between `lo` and `hi`.
fn geometric_breaks(lo: f64, hi: f64, panels: usize) -> Vec<f64> {
    let mut b = vec![0.0];
    b.extend((0..=panels).map(|i| lo * (hi / lo).powf(i as f64 / panels as f64)));
    b
}

/// Quadrature over the parameter ball, banded in `|s|`. Nodes come in
/// consecutive `(s, -s)` pairs with equal weights. `max_step` bounds the node
/// spacing (pass infinity for one panel per band).
fn radial_rule(params: usize, breaks: &[f64], max_step: f64, order: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    if params > 2 {
        return Err(Error::Kernel(format!("quadrature over {params}-dimensional parameters is not supported")));
    }
    let (gx, gw) = gauss_legendre(order);
    let mut out = Vec::new();
    for band in breaks.windows(2) {
        let (lo, hi) = (band[0], band[1]);
        if hi <= lo {
            continue;
        }
        let sub = ((hi - lo) * order as f64 / max_step / order as f64).ceil().clamp(1.0, 256.0) as usize;
        let h = (hi - lo) / sub as f64;
        for p in 0..sub {
            for q in 0..order {
                let r = lo + h * (p as f64 + 0.5 * (gx[q] + 1.0));
                let w = 0.5 * h * gw[q];
                if params == 1 {
                    out.push((vec![r], w));
                    out.push((vec![-r], w));
                } else {
                    let m = ((2.0 * PI * r / max_step).ceil() as usize).clamp(16, 1024).next_multiple_of(2);
                    let dw = w * r * 2.0 * PI / m as f64;
                    for a in 0..m / 2 {
                        let th = (a as f64 + 0.5) * 2.0 * PI / m as f64;
                        let (c, s) = (r * th.cos(), r * th.sin());
                        out.push((vec![c, s], dw));
                        out.push((vec![-c, -s], dw));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// A smooth compactly supported function on `B^k(a)` together with the radii
/// where its quadrature bands break.
#[derive(Clone)]
pub struct Piece {
    label: String,
    params: usize,
    radius: f64,
    breaks: Vec<f64>,
    eval: ParamFn,
}

impl fmt::Debug for Piece {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Piece").field("label", &self.label).field("params", &self.params).field("radius", &self.radius).finish()
    }
}

/// Quadrature order per panel.
pub const ORDER: usize = 6;

impl Piece {
    /// `breaks` are radii in `[0, radius]` where the function changes character.
    pub fn from_fn(label: &str, params: usize, radius: f64, breaks: Vec<f64>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Piece {
        let mut b = vec![0.0];
        b.extend(breaks.into_iter().filter(|&r| r > 0.0 && r < radius));
        b.push(radius);
        b.sort_by(f64::total_cmp);
        b.dedup();
        Piece { label: label.into(), params, radius, breaks: b, eval: Arc::new(f) }
    }

    /// One-parameter bump on `[a/2, a]` with unit integral.
    pub fn bump(radius: f64) -> Piece {
        let (c, h) = (0.75 * radius, 0.25 * radius);
        let raw = move |t: f64| if (t - c).abs() >= h { 0.0 } else { 1.0 - smoothstep((t - c).abs() / h) };
        let p = Piece::from_fn("bump", 1, radius, vec![0.5 * radius, 0.75 * radius], move |t| raw(t[0]));
        let mass = p.integral();
        Piece::from_fn("bump", 1, radius, vec![0.5 * radius, 0.75 * radius], move |t| raw(t[0]) / mass)
    }

    /// Even bump on `[-a, a]` with unit integral: a plain smooth average along
    /// the curve through both sides of the base point.
    pub fn centered_bump(radius: f64) -> Piece {
        let raw = move |t: f64| 1.0 - smoothstep((t.abs() / radius).min(1.0));
        let p = Piece::from_fn("centered-bump", 1, radius, vec![], move |t| raw(t[0]));
        let mass = p.integral();
        Piece::from_fn("centered-bump", 1, radius, vec![], move |t| raw(t[0]) / mass)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn params(&self) -> usize {
        self.params
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn eval(&self, s: &[f64]) -> f64 {
        (self.eval)(s)
    }

    /// Nodes with weight times value, dropping zeros.
    pub fn rule(&self, max_step: f64) -> Result<Vec<(Vec<f64>, f64)>> {
        Ok(radial_rule(self.params, &self.breaks, max_step, ORDER)?
            .into_iter()
            .filter_map(|(s, w)| {
                let v = w * self.eval(&s);
                (v != 0.0).then_some((s, v))
            })
            .collect())
    }

    /// `∫ χ`, summed in `±s` pairs.
    pub fn integral(&self) -> f64 {
        self.moment(|_| 1.0)
    }

    /// `∫ χ(s) g(s) ds`.
    pub fn moment(&self, g: impl Fn(&[f64]) -> f64) -> f64 {
        let rule = radial_rule(self.params, &self.breaks, self.radius / 256.0, 10).expect("piece parameters checked at construction");
        rule.chunks(2).map(|p| p[0].1 * self.eval(&p[0].0) * g(&p[0].0) + p[1].1 * self.eval(&p[1].0) * g(&p[1].0)).sum()
    }

    /// `(sup |χ|, sup |∇χ|)` on a fine sample of the ball.
    pub fn c1_norms(&self) -> (f64, f64) {
        let a = self.radius;
        let h = a * 1e-6;
        let (mut c0, mut c1) = (0.0f64, 0.0f64);
        let steps = 20000;
        let mut visit = |s: Vec<f64>| {
            c0 = c0.max(self.eval(&s).abs());
            let g: f64 = (0..s.len()).map(|i| central(|e| self.eval(&shifted(&s, i, e)), h, 1).powi(2)).sum::<f64>().sqrt();
            c1 = c1.max(g);
        };
        for i in 0..=steps {
            let r = a * i as f64 / steps as f64;
            if self.params == 1 {
                visit(vec![r]);
                visit(vec![-r]);
            } else {
                for d in directions(2) {
                    visit(vec![d[0] * r, d[1] * r]);
                }
            }
        }
        (c0, c1)
    }
}

/// The decomposition `K = Σ_j δ^{-kj} χ_j(δ^{-j} ·)` with mean-zero pieces for `j >= 1`.
///
/// Each piece is a smooth annular slice of `K` rescaled to unit size, minus its
/// mean times a fixed bump `ζ`, plus a telescoping correction `T_j(ζ_δ - ζ)`
/// that moves the removed mass inward so the rescaled sum is unchanged. The
/// finest carry vanishes, so partial sums equal `K` on `δ^{J+1} a <= |t|`.
#[derive(Clone, Debug)]
pub struct KernelLadder {
    kernel: Arc<CZKernel>,
    delta: f64,
    levels: usize,
    means: Vec<f64>,
    carries: Vec<f64>,
    total: f64,
    bump_mass: f64,
}

impl KernelLadder {
    pub fn new(kernel: CZKernel, delta: f64, levels: usize) -> Result<KernelLadder> {
        split_kernel(kernel, delta, levels)
    }

    fn cut(&self, r: f64) -> f64 {
        radial_cut(r, self.delta * self.kernel.radius, self.kernel.radius)
    }

    fn bump(&self, s: &[f64]) -> f64 {
        self.cut(norm(s)) / self.bump_mass
    }

    /// `δ^{-k} ζ(s/δ)`.
    fn bump_inner(&self, s: &[f64]) -> f64 {
        let k = self.kernel.params as i32;
        let u: Vec<f64> = s.iter().map(|v| v / self.delta).collect();
        self.bump(&u) / self.delta.powi(k)
    }

    /// The uncorrected annular slice at unit scale.
    fn slice(&self, j: usize, s: &[f64]) -> f64 {
        let r = norm(s);
        let k = self.kernel.params as i32;
        let ring = if j == 0 { 1.0 - self.cut(r / self.delta) } else { self.cut(r) - self.cut(r / self.delta) };
        if ring == 0.0 {
            return 0.0;
        }
        let scale = self.delta.powi(j as i32);
        let t: Vec<f64> = s.iter().map(|v| v * scale).collect();
        scale.powi(k) * self.kernel.eval(&t) * ring
    }

    pub fn chi(&self, j: usize, s: &[f64]) -> f64 {
        let mut v = self.slice(j, s);
        let (m, t) = (self.means[j], self.carries[j]);
        if m != 0.0 || t != 0.0 || (j == 0 && self.total != 0.0) {
            let z = self.bump(s);
            v += -m * z + t * (self.bump_inner(s) - z);
            if j == 0 {
                v += self.total * z;
            }
        }
        v
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Index `J` of the finest piece.
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn kernel(&self) -> &CZKernel {
        &self.kernel
    }

    pub fn radius(&self) -> f64 {
        self.kernel.radius
    }

    fn breaks(&self) -> Vec<f64> {
        let a = self.kernel.radius;
        let d = self.delta;
        vec![d * d * d * a, d * d * a, d * a]
    }

    pub fn piece(&self, j: usize) -> Piece {
        let me = self.clone();
        Piece::from_fn(&format!("chi_{j}"), self.kernel.params, self.kernel.radius, self.breaks(), move |s| me.chi(j, s))
    }

    /// `Σ_{j <= J} δ^{-kj} χ_j(δ^{-j} t)`.
    pub fn reconstruct(&self, t: &[f64]) -> f64 {
        let k = self.kernel.params as i32;
        (0..=self.levels)
            .map(|j| {
                let scale = self.delta.powi(j as i32);
                let s: Vec<f64> = t.iter().map(|v| v / scale).collect();
                self.chi(j, &s) / scale.powi(k)
            })
            .sum()
    }

    /// Sup of `|K - Σ pieces|` on `δ^J a <= |t| <= a` over a log-spaced sample.
    pub fn reconstruction_error(&self, samples: usize) -> f64 {
        let a = self.kernel.radius;
        let lo = self.delta.powi(self.levels as i32) * a;
        let mut worst = 0.0f64;
        for i in 0..samples {
            let r = lo * (a / lo).powf(i as f64 / (samples - 1) as f64);
            for d in directions(self.kernel.params) {
                let t: Vec<f64> = d.iter().map(|v| v * r).collect();
                worst = worst.max((self.kernel.eval(&t) - self.reconstruct(&t)).abs());
            }
        }
        worst
    }

    /// `∫ χ_j` for every piece.
    pub fn integrals(&self) -> Vec<f64> {
        (0..=self.levels).map(|j| self.piece(j).integral()).collect()
    }

    /// `sup|χ_j| + sup|∇χ_j|` for every piece.
    pub fn c1_norms(&self) -> Vec<f64> {
        (0..=self.levels)
            .map(|j| {
                let (a, b) = self.piece(j).c1_norms();
                a + b
            })
            .collect()
    }
}

/// Builds the ladder with ratio `δ` and pieces `0..=J`.
pub fn split_kernel(kernel: CZKernel, delta: f64, levels: usize) -> Result<KernelLadder> {
    if !(delta > 0.0 && delta < 1.0) || levels == 0 {
        return Err(Error::Contract(format!("ladder needs 0 < δ < 1 and J >= 1, got δ={delta}, J={levels}")));
    }
    let a = kernel.radius;
    let k = kernel.params;
    // Probe the kernel on every annulus the ladder touches.
    for j in 0..=levels {
        let r = delta.powi(j as i32) * a * 0.5 * (1.0 + delta);
        for d in directions(k) {
            let t: Vec<f64> = d.iter().map(|v| v * r).collect();
            if !kernel.eval(&t).is_finite() {
                return Err(Error::Kernel(format!("kernel not finite at radius {r}")));
            }
        }
    }
    let mut ladder = KernelLadder {
        kernel: Arc::new(kernel),
        delta,
        levels,
        means: vec![0.0; levels + 1],
        carries: vec![0.0; levels + 1],
        total: 0.0,
        bump_mass: 1.0,
    };
    let breaks = ladder.breaks();
    let unit_cut = Piece::from_fn("cut", k, a, breaks.clone(), {
        let l = ladder.clone();
        move |s| l.cut(norm(s))
    });
    ladder.bump_mass = unit_cut.integral();
    let means: Vec<f64> = (0..=levels)
        .map(|j| {
            let l = ladder.clone();
            Piece::from_fn("slice", k, a, breaks.clone(), move |s| l.slice(j, s)).integral()
        })
        .collect();
    let total: f64 = means.iter().sum();
    let mut carries = vec![0.0; levels + 1];
    let mut carry = total;
    for j in 0..=levels {
        carry -= means[j];
        carries[j] = carry;
    }
    carries[levels] = 0.0;
    ladder.means = means;
    ladder.carries = carries;
    ladder.total = total;
    Ok(ladder)
}

/// `T f(x) = ψ₁(x) ∫ f(γ_t x) ψ₂(γ_t x) ρ(t, x) K(t) dt` on a cloud, through its ladder.
#[derive(Clone)]
pub struct RadonOperator {
    sht: Arc<DiscreteSHT>,
    curve: CurveFamily,
    psi1: Cutoff,
    psi2: Cutoff,
    density: Option<DensityFn>,
    ladder: KernelLadder,
}

impl fmt::Debug for RadonOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadonOperator")
            .field("curve", &self.curve.name())
            .field("kernel", &self.ladder.kernel.name)
            .field("delta", &self.ladder.delta)
            .field("levels", &self.ladder.levels)
            .finish()
    }
}

/// Finest ladder index whose pieces still move points by at least two cells.
pub fn resolved_levels(sht: &DiscreteSHT, radius: f64, delta: f64) -> usize {
    let h = sht.cloud().spacing().iter().copied().fold(f64::INFINITY, f64::min);
    let mut j = 1;
    while delta.powi(j as i32 + 1) * radius >= 2.0 * h && j < 60 {
        j += 1;
    }
    j
}

impl RadonOperator {
    /// Operator with cutoffs fitted to the cloud box and `J` set by the grid resolution.
    pub fn new(sht: Arc<DiscreteSHT>, curve: CurveFamily, kernel: CZKernel, delta: f64) -> Result<RadonOperator> {
        let levels = resolved_levels(&sht, kernel.radius, delta);
        let ladder = split_kernel(kernel, delta, levels)?;
        RadonOperator::with_ladder(sht, curve, ladder)
    }

    pub fn with_ladder(sht: Arc<DiscreteSHT>, curve: CurveFamily, ladder: KernelLadder) -> Result<RadonOperator> {
        if curve.dim() != sht.dim() {
            return Err(Error::Contract(format!("curve acts on R^{} but the cloud lives in R^{}", curve.dim(), sht.dim())));
        }
        if curve.params() != ladder.kernel.params {
            return Err(Error::Contract(format!("curve has {} parameters, kernel has {}", curve.params(), ladder.kernel.params)));
        }
        let (lo, hi) = (sht.cloud().lo().to_vec(), sht.cloud().hi().to_vec());
        let psi1 = Cutoff::in_box(&lo, &hi, 0.4, 0.6);
        let psi2 = Cutoff::in_box(&lo, &hi, 0.7, 0.9);
        Ok(RadonOperator { sht, curve, psi1, psi2, density: None, ladder })
    }

    pub fn with_cutoffs(mut self, psi1: Cutoff, psi2: Cutoff) -> Result<RadonOperator> {
        let (lo, hi) = (self.sht.cloud().lo(), self.sht.cloud().hi());
        let fits = |c: &Cutoff| (0..lo.len()).all(|a| c.center[a] - c.outer[a] >= lo[a] - 1e-12 && c.center[a] + c.outer[a] <= hi[a] + 1e-12);
        if !fits(&psi1) || !fits(&psi2) {
            return Err(Error::Contract("cutoff supports must lie inside the cloud box".into()));
        }
        self.psi1 = psi1;
        self.psi2 = psi2;
        Ok(self)
    }

    pub fn with_density(mut self, rho: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> RadonOperator {
        self.density = Some(Arc::new(rho));
        self
    }

    pub fn with_levels(mut self, levels: usize) -> Result<RadonOperator> {
        self.ladder = split_kernel((*self.ladder.kernel).clone(), self.ladder.delta, levels)?;
        Ok(self)
    }

    pub fn sht(&self) -> &DiscreteSHT {
        &self.sht
    }

    pub fn curve(&self) -> &CurveFamily {
        &self.curve
    }

    pub fn ladder(&self) -> &KernelLadder {
        &self.ladder
    }

    pub fn psi1(&self) -> &Cutoff {
        &self.psi1
    }

    pub fn psi2(&self) -> &Cutoff {
        &self.psi2
    }

    fn min_spacing(&self) -> f64 {
        self.sht.cloud().spacing().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Nodes of `piece` at dilation `δ^i`, spaced finely enough that consecutive
    /// curve points are under half a cell apart.
    fn scaled_rule(&self, piece: &Piece, i: i32) -> Result<Vec<(Vec<f64>, f64)>> {
        let scale = self.ladder.delta.powi(i);
        let step = 0.5 * self.min_spacing() / scale;
        Ok(piece.rule(step)?.into_iter().map(|(t, c)| (t.iter().map(|v| v * scale).collect(), c)).collect())
    }

    fn in_box(&self, y: &[f64]) -> bool {
        let (lo, hi) = (self.sht.cloud().lo(), self.sht.cloud().hi());
        (0..y.len()).all(|a| y[a] >= lo[a] && y[a] <= hi[a])
    }

    /// `ψ₁(x) ∫ f(γ_{δ^i t} x) ψ₂(γ_{δ^i t} x) ρ(δ^i t, x) χ(t) dt`.
    pub fn apply_piece(&self, piece: &Piece, i: i32, f: &[f64]) -> Result<Vec<f64>> {
        let rule = self.scaled_rule(piece, i)?;
        let cloud = self.sht.cloud();
        (0..self.sht.len())
            .into_par_iter()
            .map(|x| {
                let p = cloud.point(x);
                let c1 = self.psi1.eval(p);
                if c1 == 0.0 {
                    return Ok(0.0);
                }
                let mut acc = 0.0;
                for (t, c) in &rule {
                    let y = self.curve.eval(t, p);
                    let c2 = self.psi2.eval(&y);
                    if c2 == 0.0 {
                        if !self.in_box(&y) {
                            return Err(Error::DomainExit(y));
                        }
                        continue;
                    }
                    let rho = self.density.as_ref().map_or(1.0, |d| d(t, p));
                    acc += c * c2 * rho * cloud.interpolate(f, &y);
                }
                Ok(c1 * acc)
            })
            .collect()
    }

    pub fn apply_single_scale(&self, piece: &Piece, f: &[f64]) -> Result<Vec<f64>> {
        self.apply_piece(piece, 0, f)
    }

    /// `𝒯_j^{(i)} f`: piece `j` at dilation `δ^i`.
    pub fn apply_dilated(&self, j: usize, i: i32, f: &[f64]) -> Result<Vec<f64>> {
        self.check_level(j)?;
        self.apply_piece(&self.ladder.piece(j), i, f)
    }

    fn check_level(&self, j: usize) -> Result<()> {
        if j > self.ladder.levels {
            return Err(Error::Contract(format!("piece {j} beyond the ladder's {} levels", self.ladder.levels)));
        }
        Ok(())
    }

    /// `Σ_{j <= J} 𝒯_j^{(j)} f`.
    pub fn apply_full(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.apply_range(0, f)
    }

    /// `Σ_{from <= j <= J} 𝒯_j^{(j)} f`.
    pub fn apply_range(&self, from: usize, f: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; f.len()];
        for j in from..=self.ladder.levels {
            let part = self.apply_dilated(j, j as i32, f)?;
            out.iter_mut().zip(part).for_each(|(o, p)| *o += p);
        }
        Ok(out)
    }

    /// Exact transpose of [`RadonOperator::apply_piece`] for the weighted pairing.
    pub fn adjoint_piece(&self, piece: &Piece, i: i32, g: &[f64]) -> Result<Vec<f64>> {
        if !self.curve.is_invertible() {
            return Err(Error::Invertibility(format!("curve `{}` has no inverse on its box", self.curve.name())));
        }
        let rule = self.scaled_rule(piece, i)?;
        let cloud = self.sht.cloud();
        let w = self.sht.weights();
        let mut out = vec![0.0; g.len()];
        for x in 0..self.sht.len() {
            if g[x] == 0.0 {
                continue;
            }
            let p = cloud.point(x);
            let c1 = self.psi1.eval(p);
            if c1 == 0.0 {
                continue;
            }
            for (t, c) in &rule {
                let y = self.curve.eval(t, p);
                let c2 = self.psi2.eval(&y);
                if c2 == 0.0 {
                    if !self.in_box(&y) {
                        return Err(Error::DomainExit(y));
                    }
                    continue;
                }
                let rho = self.density.as_ref().map_or(1.0, |d| d(t, p));
                let v = w[x] * g[x] * c1 * c * c2 * rho;
                cloud.stencil(&y, |idx, s| out[idx] += v * s);
            }
        }
        for (o, wi) in out.iter_mut().zip(w) {
            *o /= wi;
        }
        Ok(out)
    }

    pub fn adjoint_apply(&self, j: usize, i: i32, g: &[f64]) -> Result<Vec<f64>> {
        self.check_level(j)?;
        self.adjoint_piece(&self.ladder.piece(j), i, g)
    }

    pub fn adjoint_full(&self, g: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; g.len()];
        for j in 0..=self.ladder.levels {
            let part = self.adjoint_apply(j, j as i32, g)?;
            out.iter_mut().zip(part).for_each(|(o, p)| *o += p);
        }
        Ok(out)
    }

    /// `max ρ(x, γ_{δ^j t} x)` over `x ∈ supp ψ₁`, pieces `j >= from` and their quadrature nodes.
    pub fn max_displacement(&self, from: usize) -> Result<f64> {
        Ok(self.displacements()?.into_iter().skip(from).fold(0.0, f64::max))
    }

    /// `max ρ(x, γ_{δ^j t} x)` over `x ∈ supp ψ₁` and the nodes of piece `j`, for every `j`.
    pub fn displacements(&self) -> Result<Vec<f64>> {
        let active: Vec<usize> = (0..self.sht.len()).filter(|&x| self.psi1.eval(self.sht.point(x)) != 0.0).collect();
        (0..=self.ladder.levels)
            .map(|j| {
                let rule = self.scaled_rule(&self.ladder.piece(j), j as i32)?;
                Ok(active
                    .par_iter()
                    .map(|&x| {
                        let p = self.sht.point(x);
                        rule.iter().map(|(t, _)| self.sht.dist_points(p, &self.curve.eval(t, p))).fold(0.0, f64::max)
                    })
                    .reduce(|| 0.0, f64::max))
            })
            .collect()
    }
}

pub fn hilbert_monomial(sht: &DiscreteSHT, exps: &[u32], f: &[f64], radius: f64, t_min: f64) -> Result<Vec<f64>> {
    if exps.len() != sht.dim() || exps.is_empty() || exps[0] == 0 || exps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Contract("monomial exponents must be positive, increasing and match the dimension".into()));
    }
    if !(t_min > 0.0 && t_min < radius) {
        return Err(Error::Contract(format!("need 0 < t_min < a, got {t_min} and {radius}")));
    }
    let panels = ((radius / t_min).log2().ceil() as usize).max(1);
    let (gx, gw) = gauss_legendre(8);
    let mut rule = Vec::new();
    for p in 0..panels {
        let lo = t_min * (radius / t_min).powf(p as f64 / panels as f64);
        let hi = t_min * (radius / t_min).powf((p + 1) as f64 / panels as f64);
        for q in 0..8 {
            let t = lo + 0.5 * (hi - lo) * (gx[q] + 1.0);
            rule.push((t, 0.5 * (hi - lo) * gw[q] / t));
        }
    }
    let cloud = sht.cloud();
    Ok((0..sht.len())
        .into_par_iter()
        .map(|x| {
            let p = cloud.point(x);
            rule.iter()
                .map(|&(t, w)| {
                    let plus: Vec<f64> = p.iter().zip(exps).map(|(v, &e)| v - t.powi(e as i32)).collect();
                    let minus: Vec<f64> = p.iter().zip(exps).map(|(v, &e)| v - (-t).powi(e as i32)).collect();
                    w * (cloud.interpolate(f, &plus) - cloud.interpolate(f, &minus))
                })
                .sum()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::models;
    use crate::sht::presets;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn parabola_op(n: usize) -> RadonOperator {
        let s = Arc::new(presets::parabola_square(n));
        RadonOperator::new(s, models::parabola(), CZKernel::hilbert(0.25), 0.25).unwrap().with_levels(3).unwrap()
    }

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn hilbert_ladder_reconstructs_and_cancels() {
        let l = split_kernel(CZKernel::hilbert(0.25), 0.25, 10).unwrap();
        assert!(l.reconstruction_error(2000) <= 1e-8, "{}", l.reconstruction_error(2000));
        for (j, m) in l.integrals().iter().enumerate() {
            assert!(m.abs() <= 1e-12, "piece {j} has mean {m}");
        }
        let norms = l.c1_norms();
        let (lo, hi) = norms.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(hi <= 2.0 * lo, "{norms:?}");
        // Every piece lives in the parameter ball.
        assert_eq!(l.chi(3, &[0.25]), 0.0);
        assert_eq!(l.chi(0, &[-0.3]), 0.0);
    }

    #[test]
    fn even_kernel_pieces_are_mean_zero_beyond_the_first() {
        // An even kernel with nonzero means exercises the bump corrections.
        let k = CZKernel::from_fn("even", 1, 0.25, 1e-6, |t| radial_cut(t[0].abs(), 0.125, 0.25) / t[0].abs()).unwrap();
        let l = split_kernel(k.clone(), 0.25, 6).unwrap();
        let ints = l.integrals();
        assert!(ints[1..].iter().all(|m| m.abs() <= 1e-12), "{ints:?}");
        assert!(ints[0] > 0.0);
        let lo = 0.25f64.powi(6) * 0.25;
        for r in [lo, 2.0 * lo, 0.01, 0.1, 0.2] {
            assert!((l.reconstruct(&[r]) - k.eval(&[r])).abs() <= 1e-8 * (1.0 + k.eval(&[r]).abs()));
        }
        // The bump mass moved by the corrections sums to the kernel's truncated mean.
        let total: f64 = ints.iter().sum();
        let direct = Piece::from_fn("k", 1, 0.25, (0..10).map(|m| 0.25f64.powi(m) * 0.25).collect(), move |t| {
            let r = t[0].abs();
            k.eval(t) * (1.0 - radial_cut(r, 0.25f64.powi(8) * 0.25, 0.25f64.powi(7) * 0.25))
        });
        assert!((total - direct.integral()).abs() <= 1e-6 * total.abs(), "{total} vs {}", direct.integral());
    }

    #[test]
    fn riesz_ladder_in_two_parameters() {
        let l = split_kernel(CZKernel::riesz(0.25), 0.25, 4).unwrap();
        assert!(l.integrals().iter().all(|m| m.abs() <= 1e-12));
        let t = [0.01, 0.02];
        assert!((l.reconstruct(&t) - l.kernel().eval(&t)).abs() <= 1e-8 * l.kernel().eval(&t).abs());
    }

    #[test]
    fn ladder_rejects_bad_parameters() {
        assert!(split_kernel(CZKernel::hilbert(0.25), 1.5, 3).is_err());
        assert!(split_kernel(CZKernel::hilbert(0.25), 0.25, 0).is_err());
        let bad = CZKernel::from_fn("bad", 1, 0.25, 1e-6, |_| f64::NAN).unwrap();
        assert!(matches!(split_kernel(bad, 0.25, 3), Err(Error::Kernel(_))));
    }

    #[test]
    fn hilbert_constants_are_finite() {
        let c = CZKernel::hilbert(0.25).measure_constants().unwrap();
        assert!((c.size[0] - 1.0).abs() < 1e-9);
        assert!(c.size.iter().all(|v| v.is_finite()) && c.cancellation.is_finite());
    }

    #[test]
    fn single_scale_examples() {
        let op = parabola_op(64);
        let (lo, hi) = ([-1.0, -1.0], [1.0, 1.0]);
        let op = op.with_cutoffs(Cutoff::in_box(&lo, &hi, 0.3, 0.4), Cutoff::in_box(&lo, &hi, 0.8, 0.9)).unwrap();
        let one = vec![1.0; op.sht().len()];
        let avg = Piece::bump(0.25);
        assert!((avg.integral() - 1.0).abs() < 1e-12);
        let out = op.apply_single_scale(&avg, &one).unwrap();
        for x in 0..op.sht().len() {
            if op.psi1().eval(op.sht().point(x)) == 1.0 {
                assert!((out[x] - 1.0).abs() < 1e-12);
            }
        }
        let zero = op.apply_dilated(2, 0, &one).unwrap();
        assert!(zero.iter().all(|v| v.abs() < 1e-12));
        let zero = op.apply_dilated(1, 2, &one).unwrap();
        assert!(zero.iter().all(|v| v.abs() < 1e-12));
        // f = x_1 near the origin: T f(0) = -∫ t χ(t) dt.
        let f = op.sht().cloud().sample(|p| p[0]);
        let x0 = op.sht().cloud().nearest(&[0.0, 0.0]);
        let p0 = op.sht().point(x0).to_vec();
        let expected = p0[0] - avg.moment(|t| t[0]);
        let got = op.apply_single_scale(&avg, &f).unwrap()[x0];
        assert!((got - expected).abs() < 1e-10, "{got} vs {expected}");
    }

    #[test]
    fn full_operator_is_linear_and_bounded() {
        let op = parabola_op(64);
        let n = op.sht().len();
        assert!(op.apply_full(&vec![0.0; n]).unwrap().iter().all(|&v| v == 0.0));
        let (f, g) = (random(n, 1), random(n, 2));
        let comb: Vec<f64> = f.iter().zip(&g).map(|(a, b)| 2.0 * a - 3.0 * b).collect();
        let (tf, tg, tc) = (op.apply_full(&f).unwrap(), op.apply_full(&g).unwrap(), op.apply_full(&comb).unwrap());
        for i in 0..n {
            assert!((tc[i] - 2.0 * tf[i] + 3.0 * tg[i]).abs() < 1e-12);
        }
        let w = op.sht().weights();
        let ratio = crate::cloud::lp_norm(w, &tf, 2.0) / crate::cloud::lp_norm(w, &f, 2.0);
        assert!(ratio.is_finite() && ratio < 100.0);
    }

    #[test]
    fn adjoint_matches_pairing() {
        let op = parabola_op(48);
        let n = op.sht().len();
        let w = op.sht().weights();
        for seed in 0..3 {
            let (f, g) = (random(n, seed), random(n, seed + 10));
            for (j, i) in [(0, 0), (1, 1), (2, 3)] {
                let lhs = pairing(w, &op.apply_dilated(j, i, &f).unwrap(), &g);
                let rhs = pairing(w, &f, &op.adjoint_apply(j, i, &g).unwrap());
                assert!((lhs - rhs).abs() <= 1e-8, "{lhs} vs {rhs}");
            }
        }
        assert!(op.adjoint_full(&vec![0.0; n]).unwrap().iter().all(|&v| v == 0.0));
        let noninv = CurveFamily::from_fn("squash", 2, 1, 0.25, crate::geometry::Domain::cube(2, 1.0), |t: &[f64], x: &[f64]| vec![x[0] - t[0], x[1] * (1.0 - t[0])], None::<fn(&[f64], &[f64]) -> Vec<f64>>);
        let op2 = RadonOperator::new(op.sht.clone(), noninv, CZKernel::hilbert(0.25), 0.25).unwrap();
        assert!(matches!(op2.adjoint_apply(0, 0, &f_ones(n)), Err(Error::Invertibility(_))));
    }

    fn f_ones(n: usize) -> Vec<f64> {
        vec![1.0; n]
    }

    #[test]
    fn translation_adjoint_reflects_parameters() {
        // Translation in the plane, even piece: the adjoint is the operator with t -> -t, which is itself.
        let s = Arc::new(presets::unit_square(32));
        let op = RadonOperator::new(s.clone(), models::translation(), CZKernel::riesz(0.25), 0.25).unwrap();
        let lo = vec![0.0, 0.0];
        let hi = vec![1.0, 1.0];
        let op = op.with_cutoffs(Cutoff::in_box(&lo, &hi, 0.6, 0.7), Cutoff::in_box(&lo, &hi, 0.6, 0.7)).unwrap();
        let even = Piece::from_fn("even", 2, 0.25, vec![0.125], |t| radial_cut(norm(t), 0.06, 0.125));
        let g = random(s.len(), 5);
        let a = op.adjoint_piece(&even, 0, &g).unwrap();
        let b = op.apply_piece(&even, 0, &g).unwrap();
        // Interior points see the same stencil either way.
        let mid = s.cloud().nearest(&[0.5, 0.5]);
        assert!((a[mid] - b[mid]).abs() < 0.05 * (1.0 + b[mid].abs()));
    }

    #[test]
    fn domain_exit_is_reported() {
        let s = Arc::new(presets::parabola_square(32));
        let op = RadonOperator::new(s.clone(), models::parabola().with_radius(1.5), CZKernel::hilbert(1.5), 0.25).unwrap();
        let ones = vec![1.0; s.len()];
        assert!(matches!(op.apply_full(&ones), Err(Error::DomainExit(_))));
    }

    #[test]
    fn monomial_hilbert_examples() {
        let s = presets::parabola_square(128);
        let bump = Cutoff::in_box(&[-1.0, -1.0], &[1.0, 1.0], 0.6, 0.9);
        let f = s.cloud().sample(|p| p[0] * bump.eval(p));
        let x0 = s.cloud().nearest(&[0.0, 0.0]);
        let (a, tmin) = (0.25, 1e-3);
        let out = hilbert_monomial(&s, &[1, 2], &f, a, tmin).unwrap();
        assert!((out[x0] + 2.0 * (a - tmin)).abs() < 1e-2, "{}", out[x0]);
        // Odd kernel against a function even along the curve in one dimension.
        let line = presets::unit_interval(1024);
        let even = line.cloud().sample(|p| (-(p[0] - 0.5f64).powi(2) * 20.0).exp());
        let mid = 511;
        let h = hilbert_monomial(&line, &[1], &even, 0.2, 1e-3).unwrap();
        let shifted = line.point(mid)[0] - 0.5;
        assert!(h[mid].abs() < 1e-2 + shifted.abs() * 10.0);
        assert!(hilbert_monomial(&line, &[2, 1], &even, 0.2, 1e-3).is_err());
    }

    #[test]
    fn displacement_grows_with_coarser_pieces() {
        let op = parabola_op(32);
        let coarse = op.max_displacement(0).unwrap();
        let fine = op.max_displacement(1).unwrap();
        assert!(coarse >= fine && fine > 0.0);
        assert!(coarse <= 0.25 + 1e-9);
    }
}
