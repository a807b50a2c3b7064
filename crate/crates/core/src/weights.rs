//! Muckenhoupt and reverse Hölder constants over a dyadic grid, and the
//! weighted norm inequality that sparse bounds imply.

use rayon::prelude::*;

use crate::cloud::conjugate;
use crate::dyadic::DyadicGrid;
use crate::error::{contract, Result};
use crate::sht::DiscreteSHT;

/// Values below this are raised to it before negative powers are taken.
pub const FLOOR: f64 = 1e-30;

#[derive(Clone, Debug, PartialEq)]
pub struct Weight {
    values: Vec<f64>,
    /// Points raised to [`FLOOR`].
    clamped: usize,
}

impl Weight {
    pub fn new(values: Vec<f64>) -> Result<Weight> {
        contract(values.iter().all(|v| v.is_finite() && *v >= 0.0), || "weights must be finite and nonnegative".into())?;
        let clamped = values.iter().filter(|&&v| v < FLOOR).count();
        let values = values.into_iter().map(|v| v.max(FLOOR)).collect();
        Ok(Weight { values, clamped })
    }

    pub fn constant(s: &DiscreteSHT, c: f64) -> Result<Weight> {
        contract(c > 0.0, || format!("constant weight {c} is not positive"))?;
        Weight::new(vec![c; s.len()])
    }

    /// `|x_axis|^β`.
    pub fn power(s: &DiscreteSHT, axis: usize, beta: f64) -> Result<Weight> {
        contract(axis < s.dim(), || format!("axis {axis} beyond dimension {}", s.dim()))?;
        Weight::new(s.cloud().sample(|x| x[axis].abs().powf(beta)))
    }

    /// `Π_a |x_a|^{β_a}`.
    pub fn product(s: &DiscreteSHT, betas: &[f64]) -> Result<Weight> {
        contract(betas.len() == s.dim(), || "one exponent per axis".into())?;
        Weight::new(s.cloud().sample(|x| x.iter().zip(betas).map(|(v, b)| v.abs().powf(*b)).product()))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn clamped(&self) -> usize {
        self.clamped
    }

    pub fn scaled(&self, c: f64) -> Result<Weight> {
        Weight::new(self.values.iter().map(|v| c * v).collect())
    }

    /// `w^e`, pointwise.
    pub fn power_of(&self, e: f64) -> Result<Weight> {
        Weight::new(self.values.iter().map(|v| v.powf(e)).collect())
    }
}

/// `sup_Q` of a per-cube quantity built from averages of `w^{e_i}`.
fn cube_sup(g: &DyadicGrid, w: &Weight, exps: &[f64], combine: impl Fn(&[f64]) -> f64 + Sync) -> f64 {
    let mu = g.sht().weights();
    g.generations()
        .par_iter()
        .flat_map_iter(|gen| gen.iter())
        .map(|q| {
            // The mass is summed alongside, so a constant weight averages to itself exactly.
            let avgs: Vec<f64> = exps
                .iter()
                .map(|&e| {
                    let (num, mass) = q.members.iter().fold((0.0, 0.0), |(n, m), &i| (n + mu[i] * w.values[i].powf(e), m + mu[i]));
                    num / mass
                })
                .collect();
            combine(&avgs)
        })
        .reduce(|| 0.0, f64::max)
}

/// `[w]_{A_p} = sup_Q ⟨w⟩_Q ⟨w^{1-p′}⟩_Q^{p-1}`.
pub fn a_p_constant(w: &Weight, p: f64, g: &DyadicGrid) -> Result<f64> {
    contract(p > 1.0, || format!("A_p needs p > 1, got {p}"))?;
    let e = 1.0 - conjugate(p);
    Ok(cube_sup(g, w, &[1.0, e], |a| a[0] * a[1].powf(p - 1.0)))
}

/// `[w]_{RH_p} = sup_Q ⟨w^p⟩_Q^{1/p} / ⟨w⟩_Q`.
pub fn rh_constant(w: &Weight, p: f64, g: &DyadicGrid) -> Result<f64> {
    contract(p > 1.0, || format!("RH_p needs p > 1, got {p}"))?;
    Ok(cube_sup(g, w, &[p, 1.0], |a| a[0].powf(1.0 / p) / a[1]))
}

/// `max{1/(p-r), (s-1)/(s-p)}`.
pub fn weight_exponent(r: f64, p: f64, s: f64) -> Result<f64> {
    contract(r < p && p < s, || format!("weighted bound needs r < p < s, got ({r}, {p}, {s})"))?;
    Ok((1.0 / (p - r)).max((s - 1.0) / (s - p)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedCheck {
    /// `max_f ‖T f‖_{L^p(w)} / ‖f‖_{L^p(w)}` over the test set.
    pub c_emp: f64,
    pub a_const: f64,
    pub rh_const: f64,
    pub alpha: f64,
    /// `([w]_{A_{p/r}} [w]_{RH_{(s/p)′}})^α`.
    pub bound: f64,
}

impl WeightedCheck {
    pub fn ratio(&self) -> f64 {
        self.c_emp / self.bound
    }

    pub fn passes(&self, calibration: f64) -> bool {
        self.c_emp <= calibration * self.bound
    }
}

/// `(Σ μ_i w_i |f_i|^p)^{1/p}`.
pub fn weighted_norm(s: &DiscreteSHT, w: &Weight, f: &[f64], p: f64) -> f64 {
    let mu = s.weights();
    let sum: f64 = (0..f.len()).map(|i| mu[i] * w.values[i] * f[i].abs().powf(p)).sum();
    sum.powf(1.0 / p)
}

pub fn weighted_norm_check(
    g: &DyadicGrid,
    apply: &(dyn Fn(&[f64]) -> Result<Vec<f64>> + Sync),
    w: &Weight,
    (r, p, s): (f64, f64, f64),
    tests: &[Vec<f64>],
) -> Result<WeightedCheck> {
    let alpha = weight_exponent(r, p, s)?;
    let a_const = a_p_constant(w, p / r, g)?;
    let rh_const = rh_constant(w, conjugate(s / p), g)?;
    let sht = g.sht();
    let mut c_emp = 0.0f64;
    for f in tests {
        let den = weighted_norm(sht, w, f, p);
        if den > 0.0 {
            c_emp = c_emp.max(weighted_norm(sht, w, &apply(f)?, p) / den);
        }
    }
    Ok(WeightedCheck { c_emp, a_const, rh_const, alpha, bound: (a_const * rh_const).powf(alpha) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{build_grid_with, GridMode};
    use crate::sht::presets;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn line(n: usize) -> DyadicGrid {
        let s = Arc::new(DiscreteSHT::new(crate::Cloud::new(vec![-1.0], vec![1.0], vec![n]).unwrap(), crate::Metric::Euclidean).unwrap());
        build_grid_with(s, 0.5, 0, GridMode::Classical).unwrap()
    }

    #[test]
    fn constant_weights_have_unit_constants() {
        let g = line(256);
        let one = Weight::constant(g.sht(), 1.0).unwrap();
        let other = Weight::constant(g.sht(), 3.5).unwrap();
        for p in [1.5, 2.0, 4.0] {
            assert_eq!(a_p_constant(&one, p, &g).unwrap(), 1.0);
            assert_eq!(rh_constant(&one, p, &g).unwrap(), 1.0);
            let a = a_p_constant(&other, p, &g).unwrap();
            assert!((a - 1.0).abs() < 1e-12, "{a}");
            assert!((rh_constant(&other, p, &g).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exponent_formula() {
        assert_eq!(weight_exponent(1.0, 1.5, 2.0).unwrap(), 2.0);
        assert!(weight_exponent(2.0, 1.5, 3.0).is_err());
    }

    #[test]
    fn square_root_weight_is_finite_and_grows_with_refinement() {
        let coarse = line(256);
        let fine = line(1024);
        let wc = Weight::power(coarse.sht(), 0, 0.5).unwrap();
        let wf = Weight::power(fine.sht(), 0, 0.5).unwrap();
        let (ac, af) = (a_p_constant(&wc, 2.0, &coarse).unwrap(), a_p_constant(&wf, 2.0, &fine).unwrap());
        assert!(ac.is_finite() && ac > 1.0 && af >= ac * (1.0 - 1e-12));
        let rc = rh_constant(&wc, 2.0, &coarse).unwrap();
        assert!(rc.is_finite() && rc >= 1.0);
    }

    #[test]
    fn zero_weight_is_clamped() {
        let w = Weight::new(vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(w.clamped(), 1);
        assert_eq!(w.values()[0], FLOOR);
    }

    #[test]
    fn unit_weight_check_reduces_to_plain_norms() {
        let g = line(128);
        let w = Weight::constant(g.sht(), 1.0).unwrap();
        let double = |f: &[f64]| Ok(f.iter().map(|v| 2.0 * v).collect());
        let f = g.sht().cloud().sample(|x| x[0].sin());
        let chk = weighted_norm_check(&g, &double, &w, (1.0, 1.5, 2.0), &[f]).unwrap();
        assert_eq!(chk.bound, 1.0);
        assert!((chk.c_emp - 2.0).abs() < 1e-12);
        assert!(chk.passes(2.0) && !chk.passes(1.9));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn duality_and_scale_invariance(vals in proptest::collection::vec(0.05f64..20.0, 64), p in 1.1f64..5.0, c in 0.01f64..100.0) {
            let g = line(64);
            let w = Weight::new(vals).unwrap();
            let a = a_p_constant(&w, p, &g).unwrap();
            let dual = w.power_of(1.0 - conjugate(p)).unwrap();
            let b = a_p_constant(&dual, conjugate(p), &g).unwrap().powf(p - 1.0);
            prop_assert!((a - b).abs() <= 1e-10 * a);
            let wc = w.scaled(c).unwrap();
            prop_assert!((a_p_constant(&wc, p, &g).unwrap() - a).abs() <= 1e-12 * a);
            let rh = rh_constant(&w, p, &g).unwrap();
            prop_assert!((rh_constant(&wc, p, &g).unwrap() - rh).abs() <= 1e-12 * rh);
            prop_assert!(rh >= 1.0 - 1e-12);
            prop_assert!(a >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn parabola_cloud_constants_are_finite() {
        let s = Arc::new(presets::parabola_grid(16, 256));
        let g = crate::dyadic::build_grid(s.clone(), 0.5, 0).unwrap();
        let w = Weight::power(&s, 0, 0.5).unwrap();
        assert!(a_p_constant(&w, 1.6, &g).unwrap().is_finite());
        assert!(rh_constant(&w, 5.0, &g).unwrap().is_finite());
    }
}
