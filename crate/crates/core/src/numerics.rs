//! Small numerical helpers shared across modules.

use nalgebra::{DMatrix, DVector};

/// Central difference with one Richardson step, applied componentwise.
pub fn derivative<F>(f: F, x0: f64, h: f64) -> Vec<f64>
where
    F: Fn(f64) -> Vec<f64>,
{
    let d = |h: f64| -> Vec<f64> {
        let a = f(x0 + h);
        let b = f(x0 - h);
        a.iter().zip(&b).map(|(p, m)| (p - m) / (2.0 * h)).collect()
    };
    let coarse = d(h);
    let fine = d(h / 2.0);
    fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect()
}

/// Multi-indices in `m` variables with total degree `<= max_deg`, sorted by degree
/// and then with earlier variables carrying higher powers first.
pub fn multi_indices(m: usize, max_deg: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for deg in 0..=max_deg {
        let mut cur = vec![0u32; m];
        of_degree(m, deg, 0, &mut cur, &mut out);
    }
    out
}

fn of_degree(m: usize, left: u32, pos: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if m == 0 {
        if left == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if pos == m - 1 {
        cur[pos] = left;
        out.push(cur.clone());
        cur[pos] = 0;
        return;
    }
    for k in (0..=left).rev() {
        cur[pos] = k;
        of_degree(m, left - k, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

pub fn factorial_multi(alpha: &[u32]) -> f64 {
    alpha
        .iter()
        .map(|&k| (1..=k).map(|i| i as f64).product::<f64>())
        .product()
}

pub fn monomial(x: &[f64], alpha: &[u32]) -> f64 {
    x.iter().zip(alpha).map(|(xi, &k)| xi.powi(k as i32)).product()
}

/// Least-squares fit of several right-hand sides against the monomials `basis`.
/// Returns one coefficient vector per right-hand side.
pub fn fit_monomials(points: &[Vec<f64>], values: &[Vec<f64>], basis: &[Vec<u32>]) -> Vec<Vec<f64>> {
    let rows = points.len();
    let cols = basis.len();
    let a = DMatrix::from_fn(rows, cols, |i, j| monomial(&points[i], &basis[j]));
    let svd = a.svd(true, true);
    let outputs = values.first().map(|v| v.len()).unwrap_or(0);
    (0..outputs)
        .map(|c| {
            let b = DVector::from_fn(rows, |i, _| values[i][c]);
            let sol = svd.solve(&b, 1e-14).expect("SVD carries both factors");
            sol.iter().copied().collect()
        })
        .collect()
}

/// Numerical rank with the singular-value threshold `rel * sigma_max`.
pub fn rank(cols: &[Vec<f64>], rel: f64) -> usize {
    let sv = singular_values(cols);
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel * max).count()
}

pub fn singular_values(cols: &[Vec<f64>]) -> Vec<f64> {
    if cols.is_empty() {
        return Vec::new();
    }
    let n = cols[0].len();
    let m = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
    m.singular_values().iter().copied().collect()
}

/// Determinant of the matrix whose columns are `cols`.
pub fn det(cols: &[&[f64]]) -> f64 {
    let n = cols.len();
    DMatrix::from_fn(n, n, |i, j| cols[j][i]).determinant()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares of `y` on `x`.
pub fn line_fit(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LineFit { slope, intercept: my - slope * mx, r2 }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // After the loop `p` is P_m and `prev` is P_{m-1}.
            let (mut prev, mut p) = (1.0, x);
            for k in 2..=m {
                let next = ((2 * k - 1) as f64 * x * p - (k - 1) as f64 * prev) / k as f64;
                prev = p;
                p = next;
            }
            dp = m as f64 * (x * p - prev) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

/// Quintic smoothstep `6u^5 - 15u^4 + 10u^3` clamped to `[0, 1]`.
pub fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (u * (6.0 * u - 15.0) + 10.0)
}

pub fn smoothstep_deriv(u: f64) -> f64 {
    if !(0.0..=1.0).contains(&u) {
        return 0.0;
    }
    30.0 * u * u * (u - 1.0) * (u - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(5);
        let int: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert_relative_eq!(int, 2.0 / 9.0, epsilon = 1e-14);
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn derivative_of_sine() {
        let d = derivative(|t| vec![t.sin()], 0.3, 1e-3);
        assert_relative_eq!(d[0], 0.3f64.cos(), epsilon = 1e-12);
    }

    #[test]
    fn multi_index_order() {
        let idx = multi_indices(2, 2);
        assert_eq!(idx, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]);
    }

    #[test]
    fn fit_recovers_polynomial() {
        let basis = multi_indices(2, 2);
        let pts: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.91).cos()]).collect();
        let vals: Vec<Vec<f64>> = pts.iter().map(|p| vec![1.0 - 2.0 * p[0] * p[1] + 0.5 * p[1] * p[1]]).collect();
        let c = &fit_monomials(&pts, &vals, &basis)[0];
        assert_relative_eq!(c[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(c[4], -2.0, epsilon = 1e-10);
        assert_relative_eq!(c[5], 0.5, epsilon = 1e-10);
    }

    #[test]
    fn line_fit_exact() {
        let f = line_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert_relative_eq!(f.slope, 2.0);
        assert_relative_eq!(f.r2, 1.0);
    }
}
