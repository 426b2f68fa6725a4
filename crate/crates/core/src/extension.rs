//! Stationary extensions of the boundary data into the domain.
//!
//! The velocity trace is extended by the homogeneous Lame system
//! div S(D u) = 0 with the trace as Dirichlet data on every wall; the
//! temperature trace by the harmonic equation Laplace(theta) = 0 with the
//! Dirichlet trace on the tagged faces and the prescribed normal derivative
//! on the Neumann faces. When no face carries a Dirichlet temperature tag,
//! the extension degenerates to the constant given by the caller (the
//! infimum of the initial temperature). On a fully periodic grid there is no
//! boundary and both extensions are zero / constant.

use crate::elliptic::{solve_mixed_poisson, ScalarBc, ScalarBcSet, VectorProblem};
use crate::error::Result;
use crate::field::{ScalarField, VectorField};
use crate::grid::{Grid, TempBc};
use std::sync::Arc;

/// Time-independent wall data: velocity and temperature traces plus the
/// outward normal temperature derivative on Neumann faces. The fields are
/// stored on the full grid; only their wall values are read.
#[derive(Clone)]
pub struct BoundaryData {
    pub velocity: VectorField,
    pub temperature: ScalarField,
    pub heat_flux: ScalarField,
}

impl BoundaryData {
    pub fn resting_insulated(grid: &Arc<Grid>) -> BoundaryData {
        BoundaryData {
            velocity: VectorField::zeros(grid.clone()),
            temperature: ScalarField::constant(grid.clone(), 1.0),
            heat_flux: ScalarField::constant(grid.clone(), 0.0),
        }
    }

    /// Largest wall-normal velocity component; impermeable walls need zero.
    pub fn max_normal_velocity(&self) -> f64 {
        self.velocity.max_wall_normal()
    }

    /// Smallest prescribed temperature over the Dirichlet wall nodes, or
    /// `None` when no face carries a Dirichlet tag.
    pub fn min_dirichlet_temperature(&self, grid: &Grid) -> Option<f64> {
        let mut min: Option<f64> = None;
        for face in grid.dirichlet_faces() {
            for node in grid.face_nodes(face) {
                let v = self.temperature.values()[node];
                min = Some(min.map_or(v, |m: f64| m.min(v)));
            }
        }
        min
    }

    /// Smallest prescribed normal derivative over the Neumann wall nodes.
    pub fn min_heat_flux(&self, grid: &Grid) -> Option<f64> {
        let mut min: Option<f64> = None;
        for face in grid.neumann_faces() {
            for node in grid.face_nodes(face) {
                let v = self.heat_flux.values()[node];
                min = Some(min.map_or(v, |m: f64| m.min(v)));
            }
        }
        min
    }
}

/// Extend the wall velocity by the homogeneous Lame system.
pub fn extend_velocity(
    grid: &Arc<Grid>,
    data: &BoundaryData,
    mu: f64,
    lambda: f64,
) -> Result<VectorField> {
    if grid.walled_faces().is_empty() {
        return Ok(VectorField::zeros(grid.clone()));
    }
    let prob = VectorProblem {
        grid,
        mass: None,
        factor: 1.0,
        mu,
        lambda,
        boundary: &data.velocity,
    };
    let rhs = VectorField::zeros(grid.clone());
    let (u, _) = prob.solve(&rhs, None)?;
    Ok(u)
}

/// Extend the wall temperature harmonically; `fallback` (the infimum of the
/// initial temperature) is used verbatim when no Dirichlet face exists.
pub fn extend_temperature(
    grid: &Arc<Grid>,
    data: &BoundaryData,
    fallback: f64,
) -> Result<ScalarField> {
    if grid.gamma_d_is_empty() {
        return Ok(ScalarField::constant(grid.clone(), fallback));
    }
    let mut bc = ScalarBcSet::new();
    for face in grid.walled_faces() {
        let nodes = grid.face_nodes(face);
        match grid.temp_bc(face) {
            Some(TempBc::Dirichlet) => {
                let vals = nodes
                    .iter()
                    .map(|&i| data.temperature.values()[i])
                    .collect();
                bc = bc.with(face, ScalarBc::Dirichlet(vals));
            }
            Some(TempBc::Neumann) => {
                let vals = nodes.iter().map(|&i| data.heat_flux.values()[i]).collect();
                bc = bc.with(face, ScalarBc::Conormal(vals));
            }
            None => unreachable!("walled faces are always tagged"),
        }
    }
    let rhs = ScalarField::constant(grid.clone(), 0.0);
    let coeff = ScalarField::constant(grid.clone(), 1.0);
    let (theta, _) = solve_mixed_poisson(grid, &rhs, &coeff, &bc)?;
    Ok(theta)
}

/// Largest mismatch between a field and the boundary temperature trace over
/// the Dirichlet wall nodes.
pub fn dirichlet_trace_mismatch(grid: &Grid, field: &ScalarField, data: &BoundaryData) -> f64 {
    let mut worst = 0.0f64;
    for face in grid.dirichlet_faces() {
        for node in grid.face_nodes(face) {
            worst = worst.max((field.values()[node] - data.temperature.values()[node]).abs());
        }
    }
    worst
}

/// Largest mismatch between a vector field and the wall velocity trace.
pub fn velocity_trace_mismatch(grid: &Grid, field: &VectorField, data: &BoundaryData) -> f64 {
    let mut worst = 0.0f64;
    for face in grid.walled_faces() {
        for node in grid.face_nodes(face) {
            for a in 0..grid.dim() {
                worst = worst.max((field.comp(a)[node] - data.velocity.comp(a)[node]).abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Topology;
    use std::f64::consts::PI;

    fn square(n: usize, tags: [[Option<TempBc>; 2]; 2]) -> Arc<Grid> {
        Arc::new(
            Grid::build(
                2,
                &[1.0, 1.0],
                &[n, n],
                &tags.to_vec(),
                &[Topology::Walled, Topology::Walled],
                tags.iter()
                    .flatten()
                    .all(|t| *t != Some(TempBc::Dirichlet)),
            )
            .unwrap(),
        )
    }

    fn all_dirichlet() -> [[Option<TempBc>; 2]; 2] {
        [[Some(TempBc::Dirichlet); 2]; 2]
    }

    #[test]
    fn harmonic_extension_matches_series_solution() {
        let g = square(64, all_dirichlet());
        let data = BoundaryData {
            velocity: VectorField::zeros(g.clone()),
            temperature: ScalarField::from_fn(g.clone(), |x| {
                if x[1] == 0.0 {
                    (PI * x[0]).sin()
                } else {
                    0.0
                }
            }),
            heat_flux: ScalarField::constant(g.clone(), 0.0),
        };
        let theta = extend_temperature(&g, &data, 0.0).unwrap();
        let mut err = 0.0f64;
        for i in 0..g.node_count() {
            let p = g.position(i);
            let exact = (PI * p[0]).sin() * (PI * (1.0 - p[1])).sinh() / PI.sinh();
            err = err.max((theta.values()[i] - exact).abs());
        }
        assert!(err < 5e-4, "sup error {err}");
        assert_eq!(dirichlet_trace_mismatch(&g, &theta, &data), 0.0);
    }

    #[test]
    fn all_neumann_extension_is_initial_infimum() {
        let g = square(16, [[Some(TempBc::Neumann); 2]; 2]);
        let data = BoundaryData::resting_insulated(&g);
        let theta = extend_temperature(&g, &data, 0.75).unwrap();
        for &v in theta.values() {
            assert_eq!(v, 0.75);
        }
    }

    #[test]
    fn lame_extension_reproduces_tangential_shear() {
        // Channel walls moving at different tangential speeds: the extension
        // of u = (a + b y, 0) is exactly linear for the Lame system.
        let g = Arc::new(
            Grid::build(
                2,
                &[1.0, 1.0],
                &[24, 24],
                &[[None; 2], [Some(TempBc::Dirichlet); 2]],
                &[Topology::Periodic, Topology::Walled],
                false,
            )
            .unwrap(),
        );
        let data = BoundaryData {
            velocity: VectorField::from_fn(g.clone(), |x| [0.3 + 1.1 * x[1], 0.0]),
            temperature: ScalarField::constant(g.clone(), 1.0),
            heat_flux: ScalarField::constant(g.clone(), 0.0),
        };
        let u = extend_velocity(&g, &data, 0.8, 0.4).unwrap();
        for i in 0..g.node_count() {
            let p = g.position(i);
            assert!((u.comp(0)[i] - (0.3 + 1.1 * p[1])).abs() < 1e-8);
            assert!(u.comp(1)[i].abs() < 1e-8);
        }
        assert!(velocity_trace_mismatch(&g, &u, &data) < 1e-15);
        assert!(data.max_normal_velocity() < 1e-15);
    }

    #[test]
    fn fully_periodic_extensions_are_trivial() {
        let g = Arc::new(
            Grid::build(
                2,
                &[1.0, 1.0],
                &[8, 8],
                &[[None; 2]; 2],
                &[Topology::Periodic, Topology::Periodic],
                true,
            )
            .unwrap(),
        );
        let data = BoundaryData::resting_insulated(&g);
        let u = extend_velocity(&g, &data, 1.0, 0.0).unwrap();
        assert_eq!(u.abs_max(), 0.0);
        let theta = extend_temperature(&g, &data, 2.0).unwrap();
        assert_eq!(theta.min(), 2.0);
        assert_eq!(theta.max(), 2.0);
    }

    #[test]
    fn boundary_minima_are_reported() {
        let g = square(
            16,
            [
                [Some(TempBc::Dirichlet), Some(TempBc::Neumann)],
                [Some(TempBc::Dirichlet), Some(TempBc::Dirichlet)],
            ],
        );
        let data = BoundaryData {
            velocity: VectorField::zeros(g.clone()),
            temperature: ScalarField::from_fn(g.clone(), |x| 1.0 + x[1]),
            heat_flux: ScalarField::constant(g.clone(), 0.25),
        };
        let tmin = data.min_dirichlet_temperature(&g).unwrap();
        assert!((tmin - 1.0).abs() < 1e-12);
        assert_eq!(data.min_heat_flux(&g), Some(0.25));
    }
}
