//! Taylor vector fields of a curve family.
//!
//! `W(t, x) = ∂_ε|_{ε=1} γ_{εt}(γ_t^{-1}(x))` is expanded as `Σ_α t^α X_α(x)`
//! with no factorial normalization.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics;
use crate::poly::Poly;

use super::curve::CurveFamily;
use super::field::VectorField;

#[derive(Clone, Debug)]
pub struct TaylorField {
    pub alpha: Vec<u32>,
    pub field: VectorField,
}

impl TaylorField {
    pub fn order(&self) -> u32 {
        self.alpha.iter().sum()
    }
}

/// Largest order the finite-difference path supports before the fit degrades.
pub const MAX_NUMERIC_ORDER: u32 = 6;

/// All `X_α` with `0 < |α| < order`, symbolic when the curve carries polynomial maps.
pub fn expand_taylor_fields(curve: &CurveFamily, order: u32) -> Result<Vec<TaylorField>> {
    if !curve.is_invertible() {
        return Err(Error::Invertibility(format!("curve `{}` has no inverse on its box", curve.name())));
    }
    if order < 1 {
        return Err(Error::Contract("Taylor order must be at least 1".into()));
    }
    match curve.poly() {
        Some(_) => Ok(symbolic_fields(curve, order)),
        None => numeric_fields(curve, order),
    }
}

/// The finite-difference path regardless of polynomial structure.
pub fn expand_taylor_fields_numeric(curve: &CurveFamily, order: u32) -> Result<Vec<TaylorField>> {
    if !curve.is_invertible() {
        return Err(Error::Invertibility(format!("curve `{}` has no inverse on its box", curve.name())));
    }
    numeric_fields(curve, order)
}

fn alphas(k: usize, order: u32) -> Vec<Vec<u32>> {
    if order < 2 {
        return Vec::new();
    }
    numerics::multi_indices(k, order - 1)
        .into_iter()
        .filter(|a| a.iter().sum::<u32>() > 0)
        .collect()
}

/// `W` as polynomials in `(t, x)`.
pub fn symbolic_w(curve: &CurveFamily) -> Option<Vec<Poly>> {
    let pc = curve.poly()?;
    let (k, n) = (curve.params(), curve.dim());
    let m = k + n;
    let mut subs: Vec<Poly> = (0..k).map(|i| Poly::var(m, i)).collect();
    subs.extend(pc.inverse.iter().cloned());
    Some(
        pc.forward
            .iter()
            .map(|f| {
                let mut w = Poly::zero(m);
                for i in 0..k {
                    let d = f.derivative(i).compose(&subs);
                    w = w.add(&Poly::var(m, i).mul(&d));
                }
                w
            })
            .collect(),
    )
}

fn symbolic_fields(curve: &CurveFamily, order: u32) -> Vec<TaylorField> {
    let (k, n) = (curve.params(), curve.dim());
    let w = symbolic_w(curve).expect("checked by caller");
    let xmap: Vec<usize> = (0..n).collect();
    alphas(k, order)
        .into_iter()
        .map(|alpha| {
            let comps = w
                .iter()
                .map(|wc| {
                    let mut c = Poly::zero(n);
                    for (e, coef) in wc.terms() {
                        if e[..k] == alpha[..] {
                            c = c.add(&Poly::monomial(n, e[k..].to_vec(), coef).reindex(n, &xmap));
                        }
                    }
                    c
                })
                .collect();
            TaylorField { alpha, field: VectorField::from_polys(comps) }
        })
        .collect()
}

/// `W(t, x)` by a Richardson-extrapolated difference in `ε`.
pub fn w_numeric(curve: &CurveFamily, t: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let base = curve.eval_inverse(t, x)?;
    Ok(numerics::derivative(
        |eps| {
            let et: Vec<f64> = t.iter().map(|v| v * eps).collect();
            curve.eval(&et, &base)
        },
        1.0,
        1e-3,
    ))
}

fn numeric_fields(curve: &CurveFamily, order: u32) -> Result<Vec<TaylorField>> {
    if order > MAX_NUMERIC_ORDER {
        return Err(Error::Resolution(format!(
            "Taylor order {order} exceeds the finite-difference limit {MAX_NUMERIC_ORDER}"
        )));
    }
    let (k, n) = (curve.params(), curve.dim());
    let list = alphas(k, order);
    // Oversampled fit of higher degree on a small ball, then truncation.
    let fit_deg = order - 1 + 4;
    let basis = numerics::multi_indices(k, fit_deg);
    let r = curve.radius().min(0.1);
    let per_axis = fit_deg as usize + 5;
    let nodes: Vec<f64> = (0..per_axis)
        .map(|i| r * (std::f64::consts::PI * (i as f64 + 0.5) / per_axis as f64).cos())
        .collect();
    let mut samples = vec![Vec::new()];
    for _ in 0..k {
        samples = samples
            .into_iter()
            .flat_map(|s| nodes.iter().map(move |&v| { let mut s = s.clone(); s.push(v); s }))
            .collect();
    }
    let samples = Arc::new(samples);
    let basis = Arc::new(basis);
    let curve = Arc::new(curve.clone());
    list.into_iter()
        .map(|alpha| {
            let pos = basis.iter().position(|b| *b == alpha).expect("alpha within fit degree");
            let (samples, basis, curve) = (samples.clone(), basis.clone(), curve.clone());
            let field = VectorField::from_fn(n, move |x| {
                let values: Vec<Vec<f64>> = samples
                    .iter()
                    .map(|t| w_numeric(&curve, t, x).unwrap_or_else(|_| vec![f64::NAN; n]))
                    .collect();
                let coeffs = numerics::fit_monomials(&samples, &values, &basis);
                coeffs.iter().map(|c| c[pos]).collect()
            });
            Ok(TaylorField { alpha, field })
        })
        .collect()
}

/// `|W(t, x) - Σ_{|α|<N} t^α X_α(x)|` at `t = s·dir` for each `s`.
pub fn remainder_defects(curve: &CurveFamily, fields: &[TaylorField], x: &[f64], dir: &[f64], s: &[f64]) -> Result<Vec<f64>> {
    let values: Vec<Vec<f64>> = fields.iter().map(|f| f.field.eval(x)).collect();
    s.iter()
        .map(|&sv| {
            let t: Vec<f64> = dir.iter().map(|d| d * sv).collect();
            let w = w_numeric(curve, &t, x)?;
            let mut approx = vec![0.0; w.len()];
            for (f, v) in fields.iter().zip(&values) {
                let m = numerics::monomial(&t, &f.alpha);
                for (a, vi) in approx.iter_mut().zip(v) {
                    *a += m * vi;
                }
            }
            Ok(w.iter().zip(&approx).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::curve::models;
    use approx::assert_abs_diff_eq;

    fn field_at(fs: &[TaylorField], alpha: &[u32], x: &[f64]) -> Vec<f64> {
        fs.iter().find(|f| f.alpha == alpha).unwrap().field.eval(x)
    }

    #[test]
    fn identity_curve_has_no_fields() {
        let fs = expand_taylor_fields(&models::identity(2), 3).unwrap();
        assert!(fs.iter().all(|f| f.field.vanishes(&[])));
    }

    #[test]
    fn parabola_fields() {
        let fs = expand_taylor_fields(&models::parabola(), 3).unwrap();
        assert_eq!(fs.len(), 2);
        let x = [0.3, -0.2];
        assert_eq!(field_at(&fs, &[1], &x), vec![-1.0, 0.0]);
        assert_eq!(field_at(&fs, &[2], &x), vec![0.0, -2.0]);
    }

    #[test]
    fn symbolic_matches_finite_difference_oracle() {
        for curve in [models::parabola(), models::coupled(), models::grushin_coupled()] {
            let exact = expand_taylor_fields(&curve, 3).unwrap();
            let numeric = expand_taylor_fields_numeric(&curve, 3).unwrap();
            for x in [[0.1, 0.2], [-0.5, 0.4]] {
                for (e, nf) in exact.iter().zip(&numeric) {
                    let (a, b) = (e.field.eval(&x), nf.field.eval(&x));
                    for i in 0..2 {
                        assert_abs_diff_eq!(a[i], b[i], epsilon = 1e-8);
                    }
                }
            }
        }
    }

    #[test]
    fn coupled_first_field_depends_on_x() {
        let fs = expand_taylor_fields(&models::coupled(), 3).unwrap();
        assert_eq!(field_at(&fs, &[1], &[0.5, 0.0]), vec![1.0, 0.5]);
        assert_eq!(field_at(&fs, &[1], &[-0.25, 0.0]), vec![1.0, -0.25]);
        assert_eq!(field_at(&fs, &[2], &[0.5, 0.0]), vec![0.0, -1.0]);
    }

    #[test]
    fn remainder_decays_with_order() {
        let curve = models::sine_coupled();
        let s = [1e-2, 7e-3, 5e-3, 3.5e-3, 2.5e-3];
        for order in 2..=4u32 {
            let fs = expand_taylor_fields(&curve, order).unwrap();
            let d = remainder_defects(&curve, &fs, &[0.2, 0.1], &[1.0], &s).unwrap();
            let lx: Vec<f64> = s.iter().map(|v| v.ln()).collect();
            let ly: Vec<f64> = d.iter().map(|v| v.ln()).collect();
            let fit = numerics::line_fit(&lx, &ly);
            assert!(fit.slope >= order as f64 - 0.2, "order {order}: slope {}", fit.slope);
        }
    }

    #[test]
    fn non_invertible_curve_is_rejected() {
        let c = CurveFamily::from_fn(
            "blind",
            1,
            1,
            0.1,
            crate::geometry::Domain::cube(1, 1.0),
            |t: &[f64], x: &[f64]| vec![x[0] + t[0]],
            None::<fn(&[f64], &[f64]) -> Vec<f64>>,
        );
        assert!(matches!(expand_taylor_fields(&c, 2), Err(Error::Invertibility(_))));
    }
}
