use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::poly::Poly;

use super::field::Domain;

type CurveFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// Polynomial forms of `γ(t, x)` and `γ_t^{-1}(x)` in the variables `(t_1..t_k, x_1..x_n)`.
#[derive(Clone, Debug)]
pub struct PolyCurve {
    pub forward: Vec<Poly>,
    pub inverse: Vec<Poly>,
}

/// A smooth family `γ_t: R^n → R^n`, `t ∈ B^k(a)`, with `γ_0 = id`.
#[derive(Clone)]
pub struct CurveFamily {
    name: String,
    dim: usize,
    params: usize,
    radius: f64,
    domain: Domain,
    map: CurveFn,
    inverse: Option<CurveFn>,
    poly: Option<PolyCurve>,
}

impl fmt::Debug for CurveFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CurveFamily")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("params", &self.params)
            .field("radius", &self.radius)
            .field("invertible", &self.inverse.is_some())
            .finish()
    }
}

impl CurveFamily {
    pub fn from_fn<F, G>(name: &str, dim: usize, params: usize, radius: f64, domain: Domain, map: F, inverse: Option<G>) -> Self
    where
        F: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
        G: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        CurveFamily {
            name: name.to_string(),
            dim,
            params,
            radius,
            domain,
            map: Arc::new(map),
            inverse: inverse.map(|g| Arc::new(g) as CurveFn),
            poly: None,
        }
    }

    /// Both maps given as polynomials in `(t, x)`; the inverse is optional.
    pub fn from_polys(name: &str, params: usize, forward: Vec<Poly>, inverse: Option<Vec<Poly>>, radius: f64, domain: Domain) -> Self {
        let dim = forward.len();
        let split = move |t: &[f64], x: &[f64]| -> Vec<f64> { t.iter().chain(x).copied().collect() };
        let fwd = forward.clone();
        let map: CurveFn = Arc::new(move |t, x| {
            let v = split(t, x);
            fwd.iter().map(|p| p.eval(&v)).collect()
        });
        let inv_fn = inverse.clone().map(|inv| {
            Arc::new(move |t: &[f64], x: &[f64]| {
                let v = split(t, x);
                inv.iter().map(|p| p.eval(&v)).collect()
            }) as CurveFn
        });
        CurveFamily {
            name: name.to_string(),
            dim,
            params,
            radius,
            domain,
            map,
            inverse: inv_fn,
            poly: inverse.map(|inverse| PolyCurve { forward, inverse }),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> usize {
        self.params
    }

    /// Radius `a` of the parameter ball.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn is_invertible(&self) -> bool {
        self.inverse.is_some()
    }

    pub fn poly(&self) -> Option<&PolyCurve> {
        self.poly.as_ref()
    }

    pub fn eval(&self, t: &[f64], x: &[f64]) -> Vec<f64> {
        (self.map)(t, x)
    }

    pub fn eval_inverse(&self, t: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.inverse
            .as_ref()
            .map(|g| g(t, x))
            .ok_or_else(|| Error::Invertibility(format!("curve `{}` has no inverse", self.name)))
    }

    /// Max of `|γ_0(x) - x|` and, when invertible, `|γ_t^{-1}(γ_t(x)) - x|` over sampled points.
    pub fn identity_defects(&self) -> (f64, Option<f64>) {
        let xs = self.domain.sample_grid(5);
        let ts = parameter_samples(self.params, self.radius, 3);
        let zero = vec![0.0; self.params];
        let id = xs
            .iter()
            .map(|x| max_diff(&self.eval(&zero, x), x))
            .fold(0.0, f64::max);
        let inv = self.inverse.as_ref().map(|g| {
            let mut worst = 0.0f64;
            for x in &xs {
                for t in &ts {
                    worst = worst.max(max_diff(&g(t, &self.eval(t, x)), x));
                }
            }
            worst
        });
        (id, inv)
    }
}

pub(crate) fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

/// Tensor samples of the parameter cube `[-a, a]^k`, `per_axis` per coordinate.
pub(crate) fn parameter_samples(k: usize, a: f64, per_axis: usize) -> Vec<Vec<f64>> {
    Domain::cube(k, a).sample_grid(per_axis)
}

/// Bundled model curves. All act on `[-1, 1]^n` with parameter radius 1/4.
pub mod models {
    use super::*;

    const RADIUS: f64 = 0.25;

    fn var(m: usize, i: usize) -> Poly {
        Poly::var(m, i)
    }

    /// `x - (s_1(t), ..., s_n(t))` with polynomial shifts in `t ∈ R^k`.
    fn shift(name: &str, k: usize, shifts: Vec<Poly>) -> CurveFamily {
        let n = shifts.len();
        let m = k + n;
        let forward = (0..n).map(|i| var(m, k + i).sub(&shifts[i])).collect();
        let inverse = (0..n).map(|i| var(m, k + i).add(&shifts[i])).collect();
        CurveFamily::from_polys(name, k, forward, Some(inverse), RADIUS, Domain::cube(n, 1.0))
    }

    pub fn identity(n: usize) -> CurveFamily {
        shift("identity", 1, vec![Poly::zero(n + 1); n])
    }

    /// `x - (t^{α_1}, ..., t^{α_n})`; the curve of the model Hilbert transform.
    pub fn monomial(exps: &[u32]) -> CurveFamily {
        let n = exps.len();
        let m = n + 1;
        let shifts = exps.iter().map(|&e| var(m, 0).pow(e)).collect();
        let name = format!(
            "monomial({})",
            exps.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(",")
        );
        shift(&name, 1, shifts)
    }

    pub fn parabola() -> CurveFamily {
        let mut c = monomial(&[1, 2]);
        c.name = "parabola".into();
        c
    }

    pub fn flat_line() -> CurveFamily {
        shift("flat-line", 1, vec![var(3, 0), Poly::zero(3)])
    }

    /// `x - (t_1, t_2)` with a two-dimensional parameter.
    pub fn translation() -> CurveFamily {
        shift("translation", 2, vec![var(4, 0), var(4, 1)])
    }

    /// `(x_1 + t, x_2 + t x_1)`.
    pub fn coupled() -> CurveFamily {
        let (t, x1, x2) = (var(3, 0), var(3, 1), var(3, 2));
        let forward = vec![x1.add(&t), x2.add(&t.mul(&x1))];
        let inverse = vec![x1.sub(&t), x2.sub(&t.mul(&x1)).add(&t.pow(2))];
        CurveFamily::from_polys("coupled", 1, forward, Some(inverse), RADIUS, Domain::cube(2, 1.0))
    }

    /// `(x_1 - t, x_2 - t x_1)`, whose Taylor fields are Grushin-type.
    pub fn grushin_coupled() -> CurveFamily {
        let (t, x1, x2) = (var(3, 0), var(3, 1), var(3, 2));
        let forward = vec![x1.sub(&t), x2.sub(&t.mul(&x1))];
        let inverse = vec![x1.add(&t), x2.add(&t.mul(&x1)).add(&t.pow(2))];
        CurveFamily::from_polys("grushin-coupled", 1, forward, Some(inverse), RADIUS, Domain::cube(2, 1.0))
    }

    /// `(x_1 + sin t, x_2 + t x_1)`: smooth but not polynomial in `t`.
    pub fn sine_coupled() -> CurveFamily {
        CurveFamily::from_fn(
            "sine-coupled",
            2,
            1,
            RADIUS,
            Domain::cube(2, 1.0),
            |t: &[f64], x: &[f64]| vec![x[0] + t[0].sin(), x[1] + t[0] * x[0]],
            Some(|t: &[f64], y: &[f64]| {
                let x0 = y[0] - t[0].sin();
                vec![x0, y[1] - t[0] * x0]
            }),
        )
    }

    /// The five curves used for the curvature/Hörmander agreement check.
    pub fn bundled() -> Vec<CurveFamily> {
        vec![parabola(), flat_line(), translation(), grushin_coupled(), monomial(&[1, 2, 3])]
    }

    pub fn by_name(name: &str) -> Result<CurveFamily> {
        Ok(match name {
            "identity" => identity(2),
            "parabola" => parabola(),
            "flat-line" => flat_line(),
            "translation" => translation(),
            "coupled" => coupled(),
            "grushin-coupled" => grushin_coupled(),
            "sine-coupled" => sine_coupled(),
            other => {
                if let Some(list) = other.strip_prefix("monomial(").and_then(|s| s.strip_suffix(')')) {
                    let exps = list
                        .split(',')
                        .map(|e| e.trim().parse::<u32>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| Error::Parse(format!("bad monomial exponents `{list}`")))?;
                    if exps.is_empty() || exps.windows(2).any(|w| w[0] >= w[1]) || exps[0] == 0 {
                        return Err(Error::Parse("monomial exponents must be positive and increasing".into()));
                    }
                    monomial(&exps)
                } else {
                    return Err(Error::Parse(format!("unknown curve `{other}`")));
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_curves_start_at_identity_and_invert() {
        let mut all = models::bundled();
        all.push(models::coupled());
        all.push(models::sine_coupled());
        for c in all {
            let (id, inv) = c.identity_defects();
            assert!(id <= 1e-12, "{}: γ_0 defect {id}", c.name());
            assert!(inv.unwrap() <= 1e-8, "{}: inverse defect {inv:?}", c.name());
        }
    }

    #[test]
    fn names_resolve() {
        assert_eq!(models::by_name("monomial(1,2,3)").unwrap().dim(), 3);
        assert!(models::by_name("monomial(2,1)").is_err());
        assert!(models::by_name("helix").is_err());
    }
}
