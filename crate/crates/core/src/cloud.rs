//! Cell-centred lattice clouds, grid functions and off-lattice interpolation.

use crate::error::{Error, Result};

/// Points `lo + (i + 1/2) h` per axis, `h = (hi - lo) / counts`, stored in
/// column-major order (axis 0 varies fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct Cloud {
    lo: Vec<f64>,
    hi: Vec<f64>,
    counts: Vec<usize>,
    spacing: Vec<f64>,
    coords: Vec<f64>,
}

impl Cloud {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, counts: Vec<usize>) -> Result<Cloud> {
        if lo.is_empty() || lo.len() != hi.len() || lo.len() != counts.len() {
            return Err(Error::Parse("cloud bounds and resolution disagree in dimension".into()));
        }
        if counts.iter().any(|&c| c == 0) || lo.iter().zip(&hi).any(|(l, h)| !(h > l)) {
            return Err(Error::Parse("cloud needs positive extent and resolution on every axis".into()));
        }
        let spacing: Vec<f64> = (0..lo.len()).map(|a| (hi[a] - lo[a]) / counts[a] as f64).collect();
        let n: usize = counts.iter().product();
        let dim = lo.len();
        let mut coords = Vec::with_capacity(n * dim);
        for i in 0..n {
            let mut rest = i;
            for a in 0..dim {
                let k = rest % counts[a];
                rest /= counts[a];
                coords.push(lo[a] + (k as f64 + 0.5) * spacing[a]);
            }
        }
        Ok(Cloud { lo, hi, counts, spacing, coords })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn multi(&self, mut i: usize) -> Vec<usize> {
        self.counts
            .iter()
            .map(|&c| {
                let k = i % c;
                i /= c;
                k
            })
            .collect()
    }

    pub fn flat(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        for a in (0..multi.len()).rev() {
            idx = idx * self.counts[a] + multi[a];
        }
        idx
    }

    /// Index of the lattice point nearest to `x`, clamped to the box.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let m: Vec<usize> = (0..self.dim())
            .map(|a| {
                let u = ((x[a] - self.lo[a]) / self.spacing[a] - 0.5).round();
                u.clamp(0.0, (self.counts[a] - 1) as f64) as usize
            })
            .collect();
        self.flat(&m)
    }

    /// Visit every point whose multi-index lies within `radius[a]` cells of `center` on each axis.
    pub fn for_each_in_window(&self, center: &[usize], radius: &[usize], mut f: impl FnMut(usize)) {
        let dim = self.dim();
        let lo: Vec<usize> = (0..dim).map(|a| center[a].saturating_sub(radius[a])).collect();
        let hi: Vec<usize> = (0..dim).map(|a| (center[a] + radius[a]).min(self.counts[a] - 1)).collect();
        let mut cur = lo.clone();
        loop {
            f(self.flat(&cur));
            let mut a = 0;
            loop {
                if a == dim {
                    return;
                }
                if cur[a] < hi[a] {
                    cur[a] += 1;
                    break;
                }
                cur[a] = lo[a];
                a += 1;
            }
        }
    }

    /// Multilinear interpolation of `values` at `x`; the function is taken to
    /// vanish outside the box, so values ramp to zero over the outer half cell.
    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> f64 {
        let mut acc = 0.0;
        self.stencil(x, |i, w| acc += w * values[i]);
        acc
    }

    /// Calls `f(index, weight)` for every lattice node in the interpolation stencil of `x`.
    pub fn stencil(&self, x: &[f64], mut f: impl FnMut(usize, f64)) {
        let dim = self.dim();
        let mut base = [0i64; 8];
        let mut frac = [0f64; 8];
        assert!(dim <= 8, "interpolation supports at most eight axes");
        for a in 0..dim {
            let u = (x[a] - self.lo[a]) / self.spacing[a] - 0.5;
            if !(u > -1.0 && u < self.counts[a] as f64) {
                return;
            }
            let b = u.floor();
            base[a] = b as i64;
            frac[a] = u - b;
        }
        'corner: for mask in 0..(1usize << dim) {
            let mut w = 1.0;
            let mut idx = 0usize;
            for a in (0..dim).rev() {
                let up = mask >> a & 1 == 1;
                let k = base[a] + up as i64;
                if k < 0 || k >= self.counts[a] as i64 {
                    continue 'corner;
                }
                w *= if up { frac[a] } else { 1.0 - frac[a] };
                idx = idx * self.counts[a] + k as usize;
            }
            if w != 0.0 {
                f(idx, w);
            }
        }
    }

    /// Tabulate a function of position.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|i| f(self.point(i))).collect()
    }
}

/// `(Σ w_i |f_i|^p)^{1/p}`, or the maximum for infinite `p`.
pub fn lp_norm(weights: &[f64], f: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return f.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    let s: f64 = weights.iter().zip(f).map(|(w, v)| w * v.abs().powf(p)).sum();
    s.powf(1.0 / p)
}

/// `Σ w_i f_i g_i`.
pub fn pairing(weights: &[f64], f: &[f64], g: &[f64]) -> f64 {
    weights.iter().zip(f.iter().zip(g)).map(|(w, (a, b))| w * a * b).sum()
}

/// Average of `|f|^p` over `set`, to the power `1/p`.
pub fn set_average(weights: &[f64], f: &[f64], set: &[usize], p: f64) -> f64 {
    let mass: f64 = set.iter().map(|&i| weights[i]).sum();
    if mass == 0.0 {
        return 0.0;
    }
    let s: f64 = set.iter().map(|&i| weights[i] * f[i].abs().powf(p)).sum();
    (s / mass).powf(1.0 / p)
}

/// Conjugate exponent `p / (p - 1)`.
pub fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_square(n: usize) -> Cloud {
        Cloud::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![n, n]).unwrap()
    }

    #[test]
    fn points_are_cell_centred() {
        let c = unit_square(4);
        assert_eq!(c.len(), 16);
        assert_eq!(c.point(0), &[0.125, 0.125]);
        assert_eq!(c.point(5), &[0.375, 0.375]);
        assert_eq!(c.flat(&c.multi(11)), 11);
        assert_eq!(c.nearest(&[0.9, 0.1]), 3);
    }

    #[test]
    fn interpolation_reproduces_affine_functions() {
        let c = unit_square(16);
        let f = c.sample(|x| 2.0 * x[0] - x[1] + 0.5);
        for x in [[0.3, 0.41], [0.5, 0.5], [0.77, 0.12]] {
            assert_abs_diff_eq!(c.interpolate(&f, &x), 2.0 * x[0] - x[1] + 0.5, epsilon = 1e-12);
        }
        // At lattice nodes interpolation is exact for any data.
        let g: Vec<f64> = (0..c.len()).map(|i| (i as f64).sin()).collect();
        assert_abs_diff_eq!(c.interpolate(&g, c.point(37)), g[37], epsilon = 1e-14);
    }

    #[test]
    fn zero_extension_outside() {
        let c = unit_square(8);
        let one = vec![1.0; c.len()];
        assert_eq!(c.interpolate(&one, &[1.5, 0.5]), 0.0);
        assert_abs_diff_eq!(c.interpolate(&one, &[1.0, 0.5]), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn window_visits_clipped_box() {
        let c = unit_square(8);
        let mut seen = Vec::new();
        c.for_each_in_window(&[0, 3], &[1, 1], |i| seen.push(i));
        assert_eq!(seen.len(), 6);
    }

    #[test]
    fn norms_and_conjugates() {
        let w = vec![0.5, 0.5];
        assert_abs_diff_eq!(lp_norm(&w, &[1.0, -1.0], 3.0), 1.0, epsilon = 1e-15);
        assert_eq!(lp_norm(&w, &[2.0, -3.0], f64::INFINITY), 3.0);
        assert_eq!(conjugate(2.0), 2.0);
        assert_eq!(conjugate(1.0), f64::INFINITY);
        assert_abs_diff_eq!(pairing(&w, &[1.0, 2.0], &[3.0, 4.0]), 5.5, epsilon = 1e-15);
    }
}
