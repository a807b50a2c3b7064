//! Sparse multivariate polynomials with `f64` coefficients.
//!
//! Integer-coefficient arithmetic stays exact as long as the coefficients fit
//! in the 53-bit mantissa, which covers every bracket computation we do.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        Self::monomial(nvars, vec![0; nvars], c)
    }

    /// The coordinate function `x_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Self::monomial(nvars, e, 1.0)
    }

    pub fn monomial(nvars: usize, exps: Vec<u32>, c: f64) -> Self {
        assert_eq!(exps.len(), nvars, "exponent length must match variable count");
        let mut p = Poly::zero(nvars);
        p.add_term(exps, c);
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], f64)> {
        self.terms.iter().map(|(e, &c)| (e.as_slice(), c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn add_term(&mut self, exps: Vec<u32>, c: f64) {
        if c == 0.0 {
            return;
        }
        match self.terms.entry(exps) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == 0.0 {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                v.insert(c);
            }
        }
    }

    pub fn coeff(&self, exps: &[u32]) -> f64 {
        self.terms.get(exps).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.nvars);
        self.terms
            .iter()
            .map(|(e, &c)| {
                e.iter()
                    .zip(x)
                    .fold(c, |acc, (&k, &xi)| acc * xi.powi(k as i32))
            })
            .sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Poly::zero(self.nvars);
        for (e, &c) in &self.terms {
            out.add_term(e.clone(), c * s);
        }
        out
    }

    pub fn add(&self, other: &Poly) -> Self {
        assert_eq!(self.nvars, other.nvars);
        let mut out = self.clone();
        for (e, &c) in &other.terms {
            out.add_term(e.clone(), c);
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Poly) -> Self {
        assert_eq!(self.nvars, other.nvars);
        let mut out = Poly::zero(self.nvars);
        for (ea, &ca) in &self.terms {
            for (eb, &cb) in &other.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Poly::constant(self.nvars, 1.0);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    pub fn derivative(&self, i: usize) -> Self {
        let mut out = Poly::zero(self.nvars);
        for (e, &c) in &self.terms {
            if e[i] > 0 {
                let mut d = e.clone();
                d[i] -= 1;
                out.add_term(d, c * e[i] as f64);
            }
        }
        out
    }

    /// Substitute `subs[i]` for variable `i`; all substitutes share one variable count.
    pub fn compose(&self, subs: &[Poly]) -> Self {
        assert_eq!(subs.len(), self.nvars);
        let m = subs.first().map(|p| p.nvars).unwrap_or(0);
        let mut out = Poly::zero(m);
        // Cache powers per variable since monomials repeat them heavily.
        let mut cache: Vec<Vec<Poly>> = subs.iter().map(|p| vec![Poly::constant(m, 1.0), p.clone()]).collect();
        for (e, &c) in &self.terms {
            let mut term = Poly::constant(m, c);
            for (i, &k) in e.iter().enumerate() {
                while cache[i].len() <= k as usize {
                    let next = cache[i].last().unwrap().mul(&subs[i]);
                    cache[i].push(next);
                }
                if k > 0 {
                    term = term.mul(&cache[i][k as usize]);
                }
            }
            out = out.add(&term);
        }
        out
    }

    /// Embed into a larger variable set: variable `i` becomes variable `map[i]`.
    pub fn reindex(&self, nvars: usize, map: &[usize]) -> Self {
        let mut out = Poly::zero(nvars);
        for (e, &c) in &self.terms {
            let mut f = vec![0; nvars];
            for (i, &k) in e.iter().enumerate() {
                f[map[i]] += k;
            }
            out.add_term(f, c);
        }
        out
    }
}

impl fmt::Display for Poly {
    /// Terms are written `c@e1,e2,...` and joined by ` + `; the zero polynomial is `0`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(e, c)| {
                let exps: Vec<String> = e.iter().map(|k| k.to_string()).collect();
                format!("{c:?}@{}", exps.join(","))
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Parses the `Display` format; the variable count is taken from the first term.
impl FromStr for Poly {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse_with(s, None)
    }
}

impl Poly {
    pub fn parse_with(s: &str, nvars: Option<usize>) -> Result<Self> {
        let s = s.trim();
        if s == "0" {
            return nvars
                .map(Poly::zero)
                .ok_or_else(|| Error::Parse("zero polynomial needs an explicit variable count".into()));
        }
        let mut out: Option<Poly> = nvars.map(Poly::zero);
        for term in s.split(" + ") {
            let (c, e) = term
                .trim()
                .split_once('@')
                .ok_or_else(|| Error::Parse(format!("term `{term}` lacks `@`")))?;
            let c: f64 = c.trim().parse().map_err(|_| Error::Parse(format!("bad coefficient `{c}`")))?;
            let e: Vec<u32> = e
                .split(',')
                .map(|k| k.trim().parse::<u32>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse(format!("bad exponents `{e}`")))?;
            let p = out.get_or_insert_with(|| Poly::zero(e.len()));
            if e.len() != p.nvars {
                return Err(Error::Parse(format!("term `{term}` has the wrong arity")));
            }
            p.add_term(e, c);
        }
        out.ok_or_else(|| Error::Parse("empty polynomial".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(n: usize, i: usize) -> Poly {
        Poly::var(n, i)
    }

    #[test]
    fn product_and_derivative() {
        // (x + y)^2 = x^2 + 2xy + y^2
        let p = x(2, 0).add(&x(2, 1)).pow(2);
        assert_eq!(p.coeff(&[1, 1]), 2.0);
        assert_eq!(p.derivative(0).coeff(&[0, 1]), 2.0);
        assert_eq!(p.eval(&[1.5, -0.5]), 1.0);
    }

    #[test]
    fn cancellation_prunes_terms() {
        let p = x(1, 0).sub(&x(1, 0));
        assert!(p.is_zero());
    }

    #[test]
    fn compose_substitutes() {
        // p(u, v) = u*v with u = a + 1, v = a - 1 gives a^2 - 1
        let p = x(2, 0).mul(&x(2, 1));
        let a = x(1, 0);
        let one = Poly::constant(1, 1.0);
        let q = p.compose(&[a.add(&one), a.sub(&one)]);
        assert_eq!(q, a.pow(2).sub(&one));
    }

    #[test]
    fn text_round_trip() {
        let p = x(3, 0).mul(&x(3, 2)).scale(-2.0).add(&Poly::constant(3, 0.5));
        let s = p.to_string();
        let q: Poly = s.parse().unwrap();
        assert_eq!(p, q);
        assert_eq!(Poly::parse_with("0", Some(2)).unwrap(), Poly::zero(2));
    }
}
