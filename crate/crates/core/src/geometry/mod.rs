//! Graded vector fields, curve families and the sub-Riemannian geometry they induce.

pub mod cc;
pub mod curve;
pub mod field;
pub mod flow;
pub mod hormander;
pub mod scaling;
pub mod taylor;

pub use cc::{cc_distance, cc_distance_with, CcTable, NodeLattice, ReachOptions};
pub use curve::{CurveFamily, PolyCurve};
pub use field::{lie_bracket, Domain, GradedFieldSystem, VectorField};
pub use flow::{exp_combination, flow};
pub use hormander::{
    close_graded_fields, curvature_cj_check, curve_hormander_type, generate_graded_system, hormander_type, CjWitness,
};
pub use scaling::{build_scaling_map, volume_proxy, ScalingMap};
pub use taylor::{expand_taylor_fields, TaylorField};

/// Bundled curves and field systems, selectable by name.
pub mod models {
    pub use super::curve::models::*;

    use super::field::{Domain, GradedFieldSystem, VectorField};
    use crate::error::{Error, Result};
    use crate::poly::Poly;

    fn sys(fields: Vec<(VectorField, u32)>, domain: Domain) -> GradedFieldSystem {
        GradedFieldSystem::new(fields, domain).expect("bundled systems are well formed")
    }

    pub fn euclidean_system(n: usize) -> GradedFieldSystem {
        sys((0..n).map(|i| (VectorField::coordinate(n, i), 1)).collect(), Domain::cube(n, 1.0))
    }

    /// `(-∂_1, 1), (-2∂_2, 2)`: the Taylor fields of the parabola.
    pub fn parabola_system() -> GradedFieldSystem {
        sys(
            vec![
                (VectorField::coordinate(2, 0).scale(-1.0), 1),
                (VectorField::coordinate(2, 1).scale(-2.0), 2),
            ],
            Domain::cube(2, 1.0),
        )
    }

    /// `(∂_x, 1), (x∂_y, 1), (∂_y, 2)` on `[-2, 2]^2`.
    pub fn grushin_system() -> GradedFieldSystem {
        let x_dy = VectorField::from_polys(vec![Poly::zero(2), Poly::var(2, 0)]);
        sys(
            vec![(VectorField::coordinate(2, 0), 1), (x_dy, 1), (VectorField::coordinate(2, 1), 2)],
            Domain::cube(2, 2.0),
        )
    }

    /// Left-invariant fields of the first Heisenberg group with the central direction of degree 2.
    pub fn heisenberg_system() -> GradedFieldSystem {
        let x = Poly::var(3, 0);
        let y = Poly::var(3, 1);
        let one = Poly::constant(3, 1.0);
        let z = Poly::zero(3);
        let xf = VectorField::from_polys(vec![one.clone(), z.clone(), y.scale(-0.5)]);
        let yf = VectorField::from_polys(vec![z.clone(), one.clone(), x.scale(0.5)]);
        sys(vec![(xf, 1), (yf, 1), (VectorField::coordinate(3, 2), 2)], Domain::cube(3, 1.0))
    }

    pub fn system_by_name(name: &str) -> Result<GradedFieldSystem> {
        match name {
            "euclidean-1" => Ok(euclidean_system(1)),
            "euclidean-2" => Ok(euclidean_system(2)),
            "euclidean-3" => Ok(euclidean_system(3)),
            "parabola" => Ok(parabola_system()),
            "grushin" => Ok(grushin_system()),
            "heisenberg" => Ok(heisenberg_system()),
            other => Err(Error::Parse(format!("unknown field system `{other}`"))),
        }
    }
}
