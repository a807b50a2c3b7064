use crate::error::{Error, Result};

use super::field::{Domain, VectorField};

/// Classical RK4 for `φ' = X(φ)` up to time `t`, with steps no longer than `step`.
pub fn flow(field: &VectorField, t: f64, x: &[f64], step: f64, domain: &Domain) -> Result<Vec<f64>> {
    if t == 0.0 {
        return Ok(x.to_vec());
    }
    let steps = ((t.abs() / step).ceil() as usize).max(1);
    let h = t / steps as f64;
    let n = x.len();
    let mut y = x.to_vec();
    let mut tmp = vec![0.0; n];
    let eval_at = |p: &[f64]| -> Result<Vec<f64>> {
        if !domain.contains(p) {
            return Err(Error::DomainExit(p.to_vec()));
        }
        Ok(field.eval(p))
    };
    for _ in 0..steps {
        let k1 = eval_at(&y)?;
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        let k2 = eval_at(&tmp)?;
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        let k3 = eval_at(&tmp)?;
        for i in 0..n {
            tmp[i] = y[i] + h * k3[i];
        }
        let k4 = eval_at(&tmp)?;
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    if !domain.contains(&y) {
        return Err(Error::DomainExit(y));
    }
    Ok(y)
}

/// `exp(Σ c_i X_i) x`: the time-one flow of the combined field.
pub fn exp_combination(fields: &[&VectorField], coeffs: &[f64], x: &[f64], step: f64, domain: &Domain) -> Result<Vec<f64>> {
    if coeffs.iter().all(|&c| c == 0.0) {
        return Ok(x.to_vec());
    }
    let combined = VectorField::combination(fields, coeffs);
    flow(&combined, 1.0, x, step, domain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Poly;
    use approx::assert_abs_diff_eq;

    fn big() -> Domain {
        Domain::cube(2, 10.0)
    }

    #[test]
    fn constant_field_translates() {
        let y = flow(&VectorField::coordinate(2, 0), 0.25, &[0.0, 0.0], 0.01, &big()).unwrap();
        assert_abs_diff_eq!(y[0], 0.25, epsilon = 1e-15);
        assert_eq!(y[1], 0.0);
    }

    #[test]
    fn shear_flow() {
        let x_dy = VectorField::from_polys(vec![Poly::zero(2), Poly::var(2, 0)]);
        let y = flow(&x_dy, 0.5, &[1.0, 0.0], 0.01, &big()).unwrap();
        assert_abs_diff_eq!(y[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(y[1], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn rotation_quarter_turn() {
        let rot = VectorField::from_polys(vec![Poly::var(2, 1).scale(-1.0), Poly::var(2, 0)]);
        let y = flow(&rot, std::f64::consts::FRAC_PI_2, &[1.0, 0.0], 1e-3, &big()).unwrap();
        assert_abs_diff_eq!(y[0], 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(y[1], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn leaving_the_box_is_an_error() {
        let r = flow(&VectorField::coordinate(2, 0), 3.0, &[0.0, 0.0], 0.1, &Domain::cube(2, 1.0));
        assert!(matches!(r, Err(Error::DomainExit(_))));
    }

    #[test]
    fn zero_time_is_exact() {
        let rot = VectorField::from_polys(vec![Poly::var(2, 1).scale(-1.0), Poly::var(2, 0)]);
        let x = [0.1234567, -0.7654321];
        assert_eq!(flow(&rot, 0.0, &x, 0.1, &big()).unwrap(), x.to_vec());
        assert_eq!(exp_combination(&[&rot], &[0.0], &x, 0.1, &big()).unwrap(), x.to_vec());
    }
}
