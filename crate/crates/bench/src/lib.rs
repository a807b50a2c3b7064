//! Fixtures shared by the criterion benches.

use std::sync::Arc;

use sparse_radon::dyadic::build_grid;
use sparse_radon::geometry::models;
use sparse_radon::operators::{CZKernel, Cutoff, RadonOperator};
use sparse_radon::sht::presets;
use sparse_radon::{DiscreteSHT, DyadicGrid};

pub fn parabola_cloud(n1: usize) -> Arc<DiscreteSHT> {
    Arc::new(presets::parabola_grid(n1, 16 * n1))
}

pub fn parabola_grid(n1: usize) -> DyadicGrid {
    build_grid(parabola_cloud(n1), 0.5, 0).expect("parabola grid")
}

/// Truncated Hilbert transform along the parabola with cutoffs well inside the box.
pub fn parabola_operator(sht: Arc<DiscreteSHT>) -> RadonOperator {
    let (lo, hi) = (sht.cloud().lo().to_vec(), sht.cloud().hi().to_vec());
    RadonOperator::new(sht, models::parabola().with_radius(0.25), CZKernel::hilbert(0.25), 0.5)
        .and_then(|op| op.with_cutoffs(Cutoff::in_box(&lo, &hi, 0.4, 0.5), Cutoff::in_box(&lo, &hi, 0.85, 0.95)))
        .expect("parabola operator")
}

/// Smooth test input `cos(3x) sin(2y)`.
pub fn smooth(sht: &DiscreteSHT) -> Vec<f64> {
    sht.cloud().sample(|x| (3.0 * x[0]).cos() * (2.0 * x[1]).sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        let g = parabola_grid(8);
        assert!(g.verify().all());
        let op = parabola_operator(g.sht_arc().clone());
        let out = op.apply_full(&smooth(g.sht())).unwrap();
        assert!(out.iter().all(|v| v.is_finite()));
    }
}
