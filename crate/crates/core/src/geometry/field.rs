use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics;
use crate::poly::Poly;

type CoeffFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Axis-aligned box in which fields, curves and flows are evaluated.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Domain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        Domain { lo, hi }
    }

    pub fn cube(n: usize, half: f64) -> Self {
        Domain::new(vec![-half; n], vec![half; n])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| v.is_finite() && *v >= *l && *v <= *h)
    }

    /// Deterministic sample points on a tensor grid strictly inside the box.
    pub fn sample_grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut out = Vec::new();
        let total = per_axis.pow(n as u32);
        for mut idx in 0..total {
            let mut p = Vec::with_capacity(n);
            for i in 0..n {
                let k = idx % per_axis;
                idx /= per_axis;
                let u = (k as f64 + 0.5) / per_axis as f64;
                p.push(self.lo[i] + u * (self.hi[i] - self.lo[i]));
            }
            out.push(p);
        }
        out
    }
}

/// A first-order differential operator `Σ c_i(x) ∂_i`.
#[derive(Clone)]
pub struct VectorField {
    dim: usize,
    repr: Repr,
}

#[derive(Clone)]
enum Repr {
    Poly(Vec<Poly>),
    Func(CoeffFn),
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Poly(c) => {
                let parts: Vec<String> = c.iter().map(|p| p.to_string()).collect();
                write!(f, "VectorField[{}]", parts.join(" | "))
            }
            Repr::Func(_) => write!(f, "VectorField<fn; n={}>", self.dim),
        }
    }
}

impl VectorField {
    pub fn from_polys(coeffs: Vec<Poly>) -> Self {
        let dim = coeffs.len();
        assert!(coeffs.iter().all(|p| p.nvars() == dim), "coefficients must live in R^n");
        VectorField { dim, repr: Repr::Poly(coeffs) }
    }

    pub fn from_fn<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        VectorField { dim, repr: Repr::Func(Arc::new(f)) }
    }

    /// The coordinate field `∂_i`.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        let mut c = vec![Poly::zero(dim); dim];
        c[i] = Poly::constant(dim, 1.0);
        Self::from_polys(c)
    }

    pub fn zero(dim: usize) -> Self {
        Self::from_polys(vec![Poly::zero(dim); dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn polys(&self) -> Option<&[Poly]> {
        match &self.repr {
            Repr::Poly(c) => Some(c),
            Repr::Func(_) => None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        match &self.repr {
            Repr::Poly(c) => c.iter().map(|p| p.eval(x)).collect(),
            Repr::Func(f) => f(x),
        }
    }

    /// Evaluation that ignores the polynomial form, through a boxed closure.
    pub fn generic(&self) -> VectorField {
        let me = self.clone();
        VectorField::from_fn(self.dim, move |x| me.eval(x))
    }

    /// Exactly zero for polynomial fields; for generic fields, zero on the given samples.
    pub fn vanishes(&self, samples: &[Vec<f64>]) -> bool {
        match &self.repr {
            Repr::Poly(c) => c.iter().all(Poly::is_zero),
            Repr::Func(f) => samples.iter().all(|x| f(x).iter().all(|v| v.abs() < 1e-12)),
        }
    }

    pub fn scale(&self, s: f64) -> VectorField {
        match &self.repr {
            Repr::Poly(c) => VectorField::from_polys(c.iter().map(|p| p.scale(s)).collect()),
            Repr::Func(f) => {
                let f = f.clone();
                VectorField::from_fn(self.dim, move |x| f(x).into_iter().map(|v| v * s).collect())
            }
        }
    }

    /// `Σ w_i X_i`; polynomial when every summand is.
    pub fn combination(fields: &[&VectorField], w: &[f64]) -> VectorField {
        let dim = fields[0].dim;
        if fields.iter().all(|f| f.polys().is_some()) {
            let mut acc = vec![Poly::zero(dim); dim];
            for (f, &wi) in fields.iter().zip(w) {
                for (a, p) in acc.iter_mut().zip(f.polys().unwrap()) {
                    *a = a.add(&p.scale(wi));
                }
            }
            return VectorField::from_polys(acc);
        }
        let owned: Vec<VectorField> = fields.iter().map(|f| (*f).clone()).collect();
        let w = w.to_vec();
        VectorField::from_fn(dim, move |x| {
            let mut out = vec![0.0; dim];
            for (f, wi) in owned.iter().zip(&w) {
                for (o, v) in out.iter_mut().zip(f.eval(x)) {
                    *o += wi * v;
                }
            }
            out
        })
    }
}

/// Finite-difference step used by the generic bracket.
const BRACKET_STEP: f64 = 1e-3;

/// `[X, Y] = XY - YX`, exact for polynomial fields.
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> VectorField {
    assert_eq!(x.dim, y.dim, "fields must share a dimension");
    let n = x.dim;
    if let (Some(a), Some(b)) = (x.polys(), y.polys()) {
        let comps = (0..n)
            .map(|k| {
                let mut c = Poly::zero(n);
                for i in 0..n {
                    c = c.add(&a[i].mul(&b[k].derivative(i)));
                    c = c.sub(&b[i].mul(&a[k].derivative(i)));
                }
                c
            })
            .collect();
        return VectorField::from_polys(comps);
    }
    let (x, y) = (x.clone(), y.clone());
    VectorField::from_fn(n, move |p| {
        let xv = x.eval(p);
        let yv = y.eval(p);
        let along = |f: &VectorField, dir: &[f64]| {
            numerics::derivative(
                |s| {
                    let q: Vec<f64> = p.iter().zip(dir).map(|(a, d)| a + s * d).collect();
                    f.eval(&q)
                },
                0.0,
                BRACKET_STEP,
            )
        };
        let dy_x = along(&y, &xv);
        let dx_y = along(&x, &yv);
        dy_x.iter().zip(&dx_y).map(|(a, b)| a - b).collect()
    })
}

/// The graded list `(X_i, d_i)` together with the box it lives on.
#[derive(Clone, Debug)]
pub struct GradedFieldSystem {
    fields: Vec<VectorField>,
    degrees: Vec<u32>,
    domain: Domain,
}

impl GradedFieldSystem {
    pub fn new(fields: Vec<(VectorField, u32)>, domain: Domain) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::Contract("a graded system needs at least one field".into()));
        }
        let n = domain.dim();
        if fields.iter().any(|(f, _)| f.dim() != n) {
            return Err(Error::Contract("all fields must share the domain dimension".into()));
        }
        if fields.iter().any(|(_, d)| *d == 0) {
            return Err(Error::Contract("formal degrees must be at least 1".into()));
        }
        let (fields, degrees) = fields.into_iter().unzip();
        Ok(GradedFieldSystem { fields, degrees, domain })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn field(&self, i: usize) -> &VectorField {
        &self.fields[i]
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    pub fn degree(&self, i: usize) -> u32 {
        self.degrees[i]
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn max_degree(&self) -> u32 {
        *self.degrees.iter().max().unwrap()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn with_domain(&self, domain: Domain) -> Self {
        GradedFieldSystem { fields: self.fields.clone(), degrees: self.degrees.clone(), domain }
    }

    /// Identically vanishing fields are kept in the list; this reports which ones.
    pub fn vanishing(&self) -> Vec<bool> {
        let samples = self.domain.sample_grid(4);
        self.fields.iter().map(|f| f.vanishes(&samples)).collect()
    }

    /// Fields `scale^{d_i} X_i`.
    pub fn scaled(&self, scale: f64) -> Vec<VectorField> {
        self.fields
            .iter()
            .zip(&self.degrees)
            .map(|(f, &d)| f.scale(scale.powi(d as i32)))
            .collect()
    }

    /// Coordinates that no field coefficient depends on. Flows commute with
    /// translations along these axes.
    pub fn invariant_axes(&self) -> Vec<bool> {
        let n = self.dim();
        let mut inv = vec![true; n];
        for f in &self.fields {
            match f.polys() {
                Some(ps) => {
                    for p in ps {
                        for (e, _) in p.terms() {
                            for (i, &k) in e.iter().enumerate() {
                                if k > 0 {
                                    inv[i] = false;
                                }
                            }
                        }
                    }
                }
                None => return vec![false; n],
            }
        }
        inv
    }

    /// Structured text: a header, the box, then one line per field with
    /// its degree and polynomial components separated by `|`.
    pub fn to_text(&self) -> Result<String> {
        let mut s = format!("graded-system n={}\n", self.dim());
        let bounds: Vec<String> = self
            .domain
            .lo
            .iter()
            .zip(&self.domain.hi)
            .map(|(l, h)| format!("{l:?},{h:?}"))
            .collect();
        s.push_str(&format!("box {}\n", bounds.join(" ")));
        for (f, d) in self.fields.iter().zip(&self.degrees) {
            let polys = f
                .polys()
                .ok_or_else(|| Error::Parse("only polynomial fields serialize".into()))?;
            let comps: Vec<String> = polys.iter().map(|p| p.to_string()).collect();
            s.push_str(&format!("field {d} : {}\n", comps.join(" | ")));
        }
        Ok(s)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Parse("empty system text".into()))?;
        let n: usize = header
            .strip_prefix("graded-system n=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad header `{header}`")))?;
        let bline = lines.next().ok_or_else(|| Error::Parse("missing box line".into()))?;
        let bounds = bline
            .strip_prefix("box ")
            .ok_or_else(|| Error::Parse(format!("bad box line `{bline}`")))?;
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for pair in bounds.split_whitespace() {
            let (l, h) = pair.split_once(',').ok_or_else(|| Error::Parse(format!("bad bound `{pair}`")))?;
            lo.push(l.parse::<f64>().map_err(|_| Error::Parse(format!("bad bound `{l}`")))?);
            hi.push(h.parse::<f64>().map_err(|_| Error::Parse(format!("bad bound `{h}`")))?);
        }
        if lo.len() != n {
            return Err(Error::Parse("box arity differs from n".into()));
        }
        let mut fields = Vec::new();
        for line in lines {
            let rest = line
                .strip_prefix("field ")
                .ok_or_else(|| Error::Parse(format!("bad field line `{line}`")))?;
            let (d, comps) = rest.split_once(':').ok_or_else(|| Error::Parse("field line lacks `:`".into()))?;
            let d: u32 = d.trim().parse().map_err(|_| Error::Parse(format!("bad degree `{d}`")))?;
            let polys = comps
                .split('|')
                .map(|c| Poly::parse_with(c, Some(n)))
                .collect::<Result<Vec<_>>>()?;
            if polys.len() != n {
                return Err(Error::Parse("field arity differs from n".into()));
            }
            fields.push((VectorField::from_polys(polys), d));
        }
        GradedFieldSystem::new(fields, Domain::new(lo, hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn x_dy() -> VectorField {
        VectorField::from_polys(vec![Poly::zero(2), Poly::var(2, 0)])
    }

    #[test]
    fn constant_fields_commute() {
        let b = lie_bracket(&VectorField::coordinate(2, 0), &VectorField::coordinate(2, 1));
        assert!(b.vanishes(&[]));
    }

    #[test]
    fn grushin_bracket_is_dy() {
        let b = lie_bracket(&VectorField::coordinate(2, 0), &x_dy());
        let p = b.polys().unwrap();
        assert!(p[0].is_zero());
        assert_eq!(p[1], Poly::constant(2, 1.0));
    }

    #[test]
    fn generic_bracket_matches_exact() {
        let rot = VectorField::from_polys(vec![Poly::var(2, 1).scale(-1.0), Poly::var(2, 0)]);
        let sq = VectorField::from_polys(vec![Poly::var(2, 0).pow(2), Poly::var(2, 0).mul(&Poly::var(2, 1))]);
        let exact = lie_bracket(&rot, &sq);
        let approx = lie_bracket(&rot.generic(), &sq.generic());
        for p in Domain::cube(2, 1.0).sample_grid(5) {
            let (a, b) = (exact.eval(&p), approx.eval(&p));
            for k in 0..2 {
                assert_abs_diff_eq!(a[k], b[k], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn system_text_round_trip() {
        let sys = GradedFieldSystem::new(
            vec![(VectorField::coordinate(2, 0), 1), (x_dy(), 1), (VectorField::coordinate(2, 1), 2)],
            Domain::cube(2, 1.0),
        )
        .unwrap();
        let text = sys.to_text().unwrap();
        let back = GradedFieldSystem::from_text(&text).unwrap();
        assert_eq!(back.degrees(), sys.degrees());
        assert_eq!(back.to_text().unwrap(), text);
        assert_eq!(sys.invariant_axes(), vec![false, true]);
    }

    #[test]
    fn rejects_zero_degree() {
        let r = GradedFieldSystem::new(vec![(VectorField::coordinate(1, 0), 0)], Domain::cube(1, 1.0));
        assert!(matches!(r, Err(Error::Contract(_))));
    }
}
