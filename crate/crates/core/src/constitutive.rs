//! Pointwise constitutive laws: equation of state, Newtonian stress,
//! Fourier heat flux, and viscous dissipation.
//!
//! The stress formula is kept in its three-space form with the 2/3 bulk
//! factor; on 1D/2D grids the missing velocity components are identically
//! zero (a planar slice of the 3D fluid), so the stored d-by-d block is the
//! only part that enters any contraction.

use crate::error::{NsfError, Result};
use crate::field::{ScalarField, TensorField, VectorField};

/// Transport coefficients, specific heat, and the external potential.
#[derive(Clone, Debug)]
pub struct FluidParams {
    pub mu: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub cv: f64,
    pub potential: ScalarField,
    pub potential_regularity: PotentialRegularity,
}

/// Declared smoothness class of the potential G.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PotentialRegularity {
    W1q,
    W2q,
}

impl FluidParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(NsfError::FieldMismatch(format!(
                "shear viscosity must be positive, got {}",
                self.mu
            )));
        }
        if !(self.lambda >= 0.0) {
            return Err(NsfError::FieldMismatch(format!(
                "bulk viscosity must be nonnegative, got {}",
                self.lambda
            )));
        }
        if !(self.kappa > 0.0) {
            return Err(NsfError::FieldMismatch(format!(
                "heat conductivity must be positive, got {}",
                self.kappa
            )));
        }
        if !(self.cv > 0.0) {
            return Err(NsfError::FieldMismatch(format!(
                "specific heat must be positive, got {}",
                self.cv
            )));
        }
        self.potential.check_finite("G")
    }
}

/// Boyle-Mariotte pressure p = rho * theta.
pub fn pressure(rho: &ScalarField, theta: &ScalarField) -> Result<ScalarField> {
    rho.check_positive("rho")?;
    theta.check_positive("theta")?;
    Ok(rho.zip(theta, |r, t| r * t))
}

/// Internal energy e = cv * theta.
pub fn internal_energy(theta: &ScalarField, params: &FluidParams) -> Result<ScalarField> {
    theta.check_positive("theta")?;
    Ok(theta.map(|t| params.cv * t))
}

/// Newtonian stress from the full velocity gradient.
///
/// S = mu (grad u + grad u^T - (2/3) div u I) + lambda div u I, evaluated on
/// the stored d-by-d block.
pub fn stress(grad_u: &TensorField, params: &FluidParams) -> Result<TensorField> {
    grad_u.check_finite("grad_u")?;
    let d = grad_u.dim();
    let grid = grad_u.grid().clone();
    let n = grid.node_count();
    let mut out = TensorField::zeros(grid);
    for i in 0..n {
        let divergence = grad_u.trace(i);
        for r in 0..d {
            for c in 0..d {
                let sym = grad_u.at(i, r, c) + grad_u.at(i, c, r);
                let iso = if r == c { divergence } else { 0.0 };
                out.entry_mut(r, c)[i] =
                    params.mu * (sym - 2.0 / 3.0 * iso) + params.lambda * iso;
            }
        }
    }
    Ok(out)
}

/// Fourier flux q = -kappa grad theta.
pub fn heat_flux(grad_theta: &VectorField, params: &FluidParams) -> Result<VectorField> {
    grad_theta.check_finite("grad_theta")?;
    Ok(grad_theta.map(|_, v| {
        let mut out = v;
        for x in out.iter_mut() {
            *x *= -params.kappa;
        }
        out
    }))
}

/// Viscous dissipation S(D):D with D the symmetric part of `grad_u`.
///
/// The out-of-slice tensor entries contribute nothing because the symmetric
/// gradient vanishes there, so the stored block contraction is exact.
pub fn dissipation(grad_u: &TensorField, params: &FluidParams) -> Result<ScalarField> {
    grad_u.check_finite("grad_u")?;
    let s = stress(grad_u, params)?;
    let d = grad_u.dim();
    let grid = grad_u.grid().clone();
    let n = grid.node_count();
    let mut vals = vec![0.0; n];
    for i in 0..n {
        let mut acc = 0.0;
        for r in 0..d {
            for c in 0..d {
                let sym = 0.5 * (grad_u.at(i, r, c) + grad_u.at(i, c, r));
                acc += s.at(i, r, c) * sym;
            }
        }
        vals[i] = acc;
    }
    ScalarField::from_values(grid, vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, TempBc, Topology};
    use std::sync::Arc;

    fn grid_2d() -> Arc<Grid> {
        Arc::new(
            Grid::build(
                2,
                &[1.0, 1.0],
                &[8, 8],
                &vec![[Some(TempBc::Dirichlet); 2]; 2],
                &[Topology::Walled, Topology::Walled],
                false,
            )
            .unwrap(),
        )
    }

    fn grid_1d() -> Arc<Grid> {
        Arc::new(
            Grid::build(
                1,
                &[1.0],
                &[8],
                &[[Some(TempBc::Dirichlet); 2]],
                &[Topology::Walled],
                false,
            )
            .unwrap(),
        )
    }

    fn params(grid: &Arc<Grid>, mu: f64, lambda: f64) -> FluidParams {
        FluidParams {
            mu,
            lambda,
            kappa: 2.0,
            cv: 1.0,
            potential: ScalarField::constant(grid.clone(), 0.0),
            potential_regularity: PotentialRegularity::W2q,
        }
    }

    #[test]
    fn pressure_is_rho_times_theta() {
        let g = grid_2d();
        let rho = ScalarField::constant(g.clone(), 2.0);
        let theta = ScalarField::constant(g.clone(), 3.0);
        let p = pressure(&rho, &theta).unwrap();
        assert!(p.values().iter().all(|&v| (v - 6.0).abs() < 1e-15));

        let rho = ScalarField::constant(g.clone(), 0.5);
        let theta = ScalarField::constant(g.clone(), 300.0);
        let p = pressure(&rho, &theta).unwrap();
        assert!(p.values().iter().all(|&v| (v - 150.0).abs() < 1e-12));
    }

    #[test]
    fn pressure_rejects_nonpositive_input_naming_field_and_node() {
        let g = grid_2d();
        let mut rho = ScalarField::constant(g.clone(), 1.0);
        rho.values_mut()[3] = 0.0;
        let theta = ScalarField::constant(g, 1.0);
        let err = pressure(&rho, &theta).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("rho") && msg.contains("node 3"), "{msg}");
    }

    #[test]
    fn internal_energy_scales_with_cv() {
        let g = grid_1d();
        let mut p = params(&g, 1.0, 0.0);
        p.cv = 2.5;
        let theta = ScalarField::constant(g, 1.0);
        let e = internal_energy(&theta, &p).unwrap();
        assert!(e.values().iter().all(|&v| (v - 2.5).abs() < 1e-15));
    }

    #[test]
    fn internal_energy_is_additive_in_theta() {
        let g = grid_1d();
        let p = params(&g, 1.0, 0.0);
        let t1 = ScalarField::from_fn(g.clone(), |x| 1.0 + x[0]);
        let t2 = ScalarField::from_fn(g.clone(), |x| 2.0 - x[0] * x[0] * 0.5);
        let sum = t1.zip(&t2, |a, b| a + b);
        let lhs = internal_energy(&sum, &p).unwrap();
        let e1 = internal_energy(&t1, &p).unwrap();
        let e2 = internal_energy(&t2, &p).unwrap();
        for i in 0..g.node_count() {
            assert!((lhs.values()[i] - e1.values()[i] - e2.values()[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn stress_of_uniaxial_stretch_matches_closed_form() {
        // mu=1, lambda=0, grad u = diag(1,0,0): S = diag(4/3, -2/3, -2/3).
        let g = grid_2d();
        let p = params(&g, 1.0, 0.0);
        let mut gu = TensorField::zeros(g.clone());
        for v in gu.entry_mut(0, 0) {
            *v = 1.0;
        }
        let s = stress(&gu, &p).unwrap();
        for i in 0..g.node_count() {
            assert!((s.at(i, 0, 0) - 4.0 / 3.0).abs() < 1e-14);
            assert!((s.at(i, 1, 1) + 2.0 / 3.0).abs() < 1e-14);
            assert!(s.at(i, 0, 1).abs() < 1e-15);
        }
    }

    #[test]
    fn stress_of_pure_rotation_vanishes() {
        let g = grid_2d();
        let p = params(&g, 1.7, 0.3);
        let mut gu = TensorField::zeros(g.clone());
        for v in gu.entry_mut(0, 1) {
            *v = 2.0;
        }
        for v in gu.entry_mut(1, 0) {
            *v = -2.0;
        }
        let s = stress(&gu, &p).unwrap();
        for i in 0..g.node_count() {
            for r in 0..2 {
                for c in 0..2 {
                    assert!(s.at(i, r, c).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn stress_is_linear_in_velocity_gradient() {
        let g = grid_2d();
        let p = params(&g, 1.3, 0.4);
        let mut a = TensorField::zeros(g.clone());
        let mut b = TensorField::zeros(g.clone());
        for i in 0..g.node_count() {
            a.entry_mut(0, 0)[i] = (i as f64 * 0.1).sin();
            a.entry_mut(0, 1)[i] = 0.3;
            b.entry_mut(1, 1)[i] = (i as f64 * 0.2).cos();
            b.entry_mut(1, 0)[i] = -0.7;
        }
        let mut combo = TensorField::zeros(g.clone());
        for r in 0..2 {
            for c in 0..2 {
                for i in 0..g.node_count() {
                    combo.entry_mut(r, c)[i] = 2.0 * a.at(i, r, c) + 3.0 * b.at(i, r, c);
                }
            }
        }
        let sa = stress(&a, &p).unwrap();
        let sb = stress(&b, &p).unwrap();
        let sc = stress(&combo, &p).unwrap();
        for i in 0..g.node_count() {
            for r in 0..2 {
                for c in 0..2 {
                    let want = 2.0 * sa.at(i, r, c) + 3.0 * sb.at(i, r, c);
                    assert!((sc.at(i, r, c) - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn stored_block_trace_matches_slice_convention() {
        // trace_d(S) = div u * (2 mu (1 - d/3) + d lambda) for the planar
        // slice; at d=3 this reduces to 3 lambda div u.
        let g = grid_2d();
        let p = params(&g, 1.1, 0.6);
        let mut gu = TensorField::zeros(g.clone());
        for v in gu.entry_mut(0, 0) {
            *v = 0.4;
        }
        for v in gu.entry_mut(1, 1) {
            *v = 0.25;
        }
        let s = stress(&gu, &p).unwrap();
        let divu = 0.65;
        let want = divu * (2.0 * p.mu * (1.0 - 2.0 / 3.0) + 2.0 * p.lambda);
        for i in 0..g.node_count() {
            assert!((s.trace(i) - want).abs() < 1e-13);
        }
    }

    #[test]
    fn heat_flux_is_minus_kappa_grad_theta() {
        let g = grid_2d();
        let p = params(&g, 1.0, 0.0);
        let gt = VectorField::from_fn(g.clone(), |_| [1.0, 0.0]);
        let q = heat_flux(&gt, &p).unwrap();
        for i in 0..g.node_count() {
            assert!((q.comp(0)[i] + 2.0).abs() < 1e-15);
            assert!(q.comp(1)[i].abs() < 1e-15);
        }
    }

    #[test]
    fn heat_flux_is_homogeneous() {
        let g = grid_2d();
        let p = params(&g, 1.0, 0.0);
        let gt = VectorField::from_fn(g.clone(), |x| [x[0], -x[1]]);
        let doubled = gt.map(|_, v| [2.0 * v[0], 2.0 * v[1]]);
        let q1 = heat_flux(&gt, &p).unwrap();
        let q2 = heat_flux(&doubled, &p).unwrap();
        for a in 0..2 {
            for i in 0..g.node_count() {
                assert!((q2.comp(a)[i] - 2.0 * q1.comp(a)[i]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn dissipation_of_uniaxial_stretch_is_four_thirds() {
        let g = grid_1d();
        let p = params(&g, 1.0, 0.0);
        let mut gu = TensorField::zeros(g.clone());
        for v in gu.entry_mut(0, 0) {
            *v = 1.0;
        }
        let d = dissipation(&gu, &p).unwrap();
        for &v in d.values() {
            assert!((v - 4.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn dissipation_vanishes_for_rotation_and_zero_gradient() {
        let g = grid_2d();
        let p = params(&g, 2.0, 1.0);
        let zero = TensorField::zeros(g.clone());
        assert!(dissipation(&zero, &p).unwrap().abs_max() < 1e-15);
        let mut rot = TensorField::zeros(g.clone());
        for v in rot.entry_mut(0, 1) {
            *v = 1.0;
        }
        for v in rot.entry_mut(1, 0) {
            *v = -1.0;
        }
        assert!(dissipation(&rot, &p).unwrap().abs_max() < 1e-14);
    }

    #[test]
    fn dissipation_is_nonnegative_on_random_gradients() {
        use rand::{Rng, SeedableRng};
        let g = grid_2d();
        let p = params(&g, 0.8, 0.2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let mut gu = TensorField::zeros(g.clone());
            let e: [f64; 4] = [
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            ];
            for i in 0..g.node_count() {
                gu.entry_mut(0, 0)[i] = e[0];
                gu.entry_mut(0, 1)[i] = e[1];
                gu.entry_mut(1, 0)[i] = e[2];
                gu.entry_mut(1, 1)[i] = e[3];
            }
            let d = dissipation(&gu, &p).unwrap();
            assert!(d.min() >= -1e-12);
        }
    }
}
