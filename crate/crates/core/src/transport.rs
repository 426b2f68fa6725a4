//! Mass transport: conservative upwind density update, Lagrangian
//! characteristics, the reciprocal-density formula along paths, and the
//! residual of the renormalized continuity equation.

use crate::error::{NsfError, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::{Grid, MAX_DIM};
use crate::ops;
use std::sync::Arc;

pub const CFL_LIMIT: f64 = 0.5;

/// One conservative first-order upwind step of d/dt rho + div(rho u) = 0.
///
/// Fluxes use the arithmetic face velocity and the upwind density; walled
/// faces carry no flux, so the weighted total mass telescopes exactly and
/// the update is positivity preserving under the advective CFL condition.
pub fn advance_density(rho: &ScalarField, u: &VectorField, dt: f64) -> Result<ScalarField> {
    let grid = rho.grid();
    let n = grid.node_count();
    let mut ratio = 0.0f64;
    for axis in 0..grid.dim() {
        let umax = u.comp(axis).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        ratio = ratio.max(dt * umax / grid.spacing()[axis]);
    }
    if ratio > CFL_LIMIT {
        return Err(NsfError::CflViolation {
            ratio,
            limit: CFL_LIMIT,
        });
    }
    rho.check_positive("rho")?;

    // Net outflow per node, accumulated one face at a time (the "plus" face
    // of each node along each axis, so every interior face is visited once).
    let mut outflow = vec![0.0f64; n];
    for axis in 0..grid.dim() {
        for i in 0..n {
            let iv = grid.multi(i);
            let Some(nbv) = grid.shift(&iv, axis, 1) else {
                continue; // wall face: zero normal flux
            };
            let nb = grid.idx(&nbv);
            let mut area = 1.0;
            for b in 0..grid.dim() {
                if b != axis {
                    area *= grid.axis_weight(b, iv[b]);
                }
            }
            let uf = 0.5 * (u.comp(axis)[i] + u.comp(axis)[nb]);
            let upwind = if uf >= 0.0 {
                rho.values()[i]
            } else {
                rho.values()[nb]
            };
            let flux = uf * upwind * area;
            outflow[i] += flux;
            outflow[nb] -= flux;
        }
    }
    let mut next = rho.values().to_vec();
    for i in 0..n {
        next[i] -= dt * outflow[i] / grid.node_weight(i);
    }
    let out = ScalarField::from_values(grid.clone(), next)?;
    out.check_positive("rho")?;
    Ok(out)
}

/// Stored velocity snapshots with their divergences, interpolated linearly
/// in time and multilinearly in space.
pub struct VelocityHistory {
    times: Vec<f64>,
    fields: Vec<VectorField>,
    divs: Vec<ScalarField>,
}

impl VelocityHistory {
    pub fn new(times: Vec<f64>, fields: Vec<VectorField>) -> Result<VelocityHistory> {
        if times.is_empty() || times.len() != fields.len() {
            return Err(NsfError::FieldMismatch(format!(
                "velocity history: {} times for {} snapshots",
                times.len(),
                fields.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(NsfError::FieldMismatch(
                "velocity history times must increase strictly".into(),
            ));
        }
        let divs = fields.iter().map(ops::div).collect();
        Ok(VelocityHistory {
            times,
            fields,
            divs,
        })
    }

    pub fn span(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }

    fn bracket(&self, t: f64) -> (usize, usize, f64) {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return (0, 0, 0.0);
        }
        if k == self.times.len() {
            return (k - 1, k - 1, 0.0);
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        (k - 1, k, (t - t0) / (t1 - t0))
    }

    pub fn velocity(&self, t: f64, x: &[f64; MAX_DIM]) -> [f64; MAX_DIM] {
        let (a, b, w) = self.bracket(t);
        let va = self.fields[a].interp(x);
        let vb = self.fields[b].interp(x);
        let mut out = [0.0; MAX_DIM];
        for d in 0..MAX_DIM {
            out[d] = (1.0 - w) * va[d] + w * vb[d];
        }
        out
    }

    pub fn divergence(&self, t: f64, x: &[f64; MAX_DIM]) -> f64 {
        let (a, b, w) = self.bracket(t);
        (1.0 - w) * self.divs[a].interp(x) + w * self.divs[b].interp(x)
    }

    fn grid(&self) -> &Arc<Grid> {
        self.fields[0].grid()
    }
}

/// Lagrangian trajectory X'(t) = u(t, X), X(t_start) = x, together with
/// velocity-divergence samples along it.
pub struct CharacteristicPath {
    pub times: Vec<f64>,
    pub positions: Vec<[f64; MAX_DIM]>,
    pub div_samples: Vec<f64>,
}

impl CharacteristicPath {
    pub fn origin(&self) -> [f64; MAX_DIM] {
        self.positions[0]
    }

    pub fn endpoint(&self) -> [f64; MAX_DIM] {
        *self.positions.last().unwrap()
    }
}

/// Integrate the characteristic through the stored flow with the classical
/// 4-stage scheme at fixed step, from the start of the history to time `t`.
pub fn trace_characteristic(
    hist: &VelocityHistory,
    x: &[f64; MAX_DIM],
    t: f64,
    n_steps: usize,
) -> Result<CharacteristicPath> {
    let grid = hist.grid().clone();
    let (t0, t1) = hist.span();
    if t < t0 - 1e-12 || t > t1 + 1e-12 {
        return Err(NsfError::FieldMismatch(format!(
            "characteristic target time {t} outside history span [{t0}, {t1}]"
        )));
    }
    let steps = n_steps.max(1);
    let dt = (t - t0) / steps as f64;
    let mut pos = *x;
    let mut times = Vec::with_capacity(steps + 1);
    let mut positions = Vec::with_capacity(steps + 1);
    let mut div_samples = Vec::with_capacity(steps + 1);
    let check = |p: &[f64; MAX_DIM], s: f64| -> Result<()> {
        for axis in 0..grid.dim() {
            if grid.topology()[axis] == crate::grid::Topology::Walled {
                let h = grid.spacing()[axis];
                let l = grid.extents()[axis];
                if p[axis] < -h || p[axis] > l + h {
                    return Err(NsfError::PathLeftDomain { t: s });
                }
            }
        }
        Ok(())
    };
    times.push(t0);
    positions.push(pos);
    div_samples.push(hist.divergence(t0, &pos));
    for k in 0..steps {
        let s = t0 + k as f64 * dt;
        let k1 = hist.velocity(s, &pos);
        let mid1 = advanced(&pos, &k1, 0.5 * dt);
        let k2 = hist.velocity(s + 0.5 * dt, &mid1);
        let mid2 = advanced(&pos, &k2, 0.5 * dt);
        let k3 = hist.velocity(s + 0.5 * dt, &mid2);
        let end = advanced(&pos, &k3, dt);
        let k4 = hist.velocity(s + dt, &end);
        for d in 0..MAX_DIM {
            pos[d] += dt / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
        }
        let snow = s + dt;
        check(&pos, snow)?;
        times.push(snow);
        positions.push(pos);
        div_samples.push(hist.divergence(snow, &pos));
    }
    Ok(CharacteristicPath {
        times,
        positions,
        div_samples,
    })
}

fn advanced(p: &[f64; MAX_DIM], v: &[f64; MAX_DIM], dt: f64) -> [f64; MAX_DIM] {
    let mut out = *p;
    for d in 0..MAX_DIM {
        out[d] += dt * v[d];
    }
    out
}

/// 1/rho at the path endpoint: (1/rho0 at the origin) times the exponential
/// of the trapezoidal quadrature of div u along the path.
pub fn reciprocal_density_along_path(rho0: &ScalarField, path: &CharacteristicPath) -> f64 {
    let mut integral = 0.0;
    for k in 1..path.times.len() {
        let dt = path.times[k] - path.times[k - 1];
        integral += 0.5 * dt * (path.div_samples[k] + path.div_samples[k - 1]);
    }
    integral.exp() / rho0.interp(&path.origin())
}

/// A scalar renormalization b with derivative and an open validity interval.
pub struct Renormalization<'a> {
    pub b: &'a dyn Fn(f64) -> f64,
    pub db: &'a dyn Fn(f64) -> f64,
    pub domain: (f64, f64),
}

impl Renormalization<'_> {
    fn check(&self, rho: &ScalarField) -> Result<()> {
        for (i, &v) in rho.values().iter().enumerate() {
            if v <= self.domain.0 || v >= self.domain.1 {
                return Err(NsfError::FieldMismatch(format!(
                    "density {v} at node {i} outside the renormalization domain \
                     ({}, {})",
                    self.domain.0, self.domain.1
                )));
            }
        }
        Ok(())
    }
}

/// Weighted L2 norms of the per-step residual of the renormalized
/// continuity equation d/dt b(rho) + u.grad b(rho) + b'(rho) rho div u = 0,
/// with a backward difference in time. One value per step transition.
pub fn renormalized_residual(
    renorm: &Renormalization,
    times: &[f64],
    rho_history: &[ScalarField],
    u_history: &[VectorField],
) -> Result<Vec<f64>> {
    if times.len() != rho_history.len() || times.len() != u_history.len() {
        return Err(NsfError::FieldMismatch(
            "renormalized residual: history lengths differ".into(),
        ));
    }
    let mut out = Vec::new();
    for k in 1..times.len() {
        renorm.check(&rho_history[k - 1])?;
        renorm.check(&rho_history[k])?;
        let dt = times[k] - times[k - 1];
        let b_now = rho_history[k].map(renorm.b);
        let b_prev = rho_history[k - 1].map(renorm.b);
        let grad_b = ops::grad(&b_now);
        let div_u = ops::div(&u_history[k]);
        let grid = rho_history[k].grid();
        let mut sq = 0.0;
        for i in 0..grid.node_count() {
            let mut adv = 0.0;
            for a in 0..grid.dim() {
                adv += u_history[k].comp(a)[i] * grad_b.comp(a)[i];
            }
            let r = (b_now.values()[i] - b_prev.values()[i]) / dt
                + adv
                + (renorm.db)(rho_history[k].values()[i])
                    * rho_history[k].values()[i]
                    * div_u.values()[i];
            sq += r * r * grid.node_weight(i);
        }
        out.push(sq.sqrt());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{TempBc, Topology};
    use rand::Rng;
    use rand::SeedableRng;
    use std::f64::consts::PI;

    fn periodic_1d(n: usize) -> Arc<Grid> {
        Arc::new(
            Grid::build(1, &[1.0], &[n], &[[None; 2]], &[Topology::Periodic], true).unwrap(),
        )
    }

    fn periodic_2d(n: usize) -> Arc<Grid> {
        Arc::new(
            Grid::build(
                2,
                &[1.0, 1.0],
                &[n, n],
                &[[None; 2]; 2],
                &[Topology::Periodic, Topology::Periodic],
                true,
            )
            .unwrap(),
        )
    }

    #[test]
    fn zero_velocity_leaves_density_unchanged() {
        let g = periodic_2d(16);
        let rho = ScalarField::from_fn(g.clone(), |x| 1.0 + 0.3 * (2.0 * PI * x[0]).sin());
        let u = VectorField::zeros(g.clone());
        let next = advance_density(&rho, &u, 0.01).unwrap();
        for i in 0..g.node_count() {
            assert_eq!(next.values()[i], rho.values()[i]);
        }
    }

    #[test]
    fn constant_velocity_translates_profile() {
        // First-order upwind: compare against the shifted profile with an
        // O(h) tolerance after a short time.
        let n = 256;
        let g = periodic_1d(n);
        let profile = |x: f64| 1.0 + 0.4 * (2.0 * PI * x).sin();
        let mut rho = ScalarField::from_fn(g.clone(), |x| profile(x[0]));
        let u = VectorField::from_fn(g.clone(), |_| [0.7, 0.0]);
        let dt = 0.5 / (0.7 * n as f64);
        let steps = 60;
        for _ in 0..steps {
            rho = advance_density(&rho, &u, dt).unwrap();
        }
        let t = steps as f64 * dt;
        let mut err = 0.0f64;
        for i in 0..g.node_count() {
            let x = g.position(i)[0];
            err = err.max((rho.values()[i] - profile(x - 0.7 * t)).abs());
        }
        assert!(err < 10.0 / n as f64, "sup error {err}");
    }

    #[test]
    fn mass_is_exactly_conserved_over_many_steps() {
        let g = periodic_2d(24);
        let mut rho = ScalarField::from_fn(g.clone(), |x| {
            1.5 + 0.5 * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos()
        });
        let u = VectorField::from_fn(g.clone(), |x| {
            [(2.0 * PI * x[1]).sin(), (2.0 * PI * x[0]).cos()]
        });
        let mass0 = rho.integral();
        let dt = 0.4 * g.min_spacing();
        for _ in 0..1000 {
            rho = advance_density(&rho, &u, dt).unwrap();
        }
        assert!((rho.integral() - mass0).abs() <= 1e-12 * mass0.abs());
    }

    #[test]
    fn walled_faces_conserve_mass_too() {
        let g = Arc::new(
            Grid::build(
                2,
                &[1.0, 1.0],
                &[16, 16],
                &[[None; 2], [Some(TempBc::Dirichlet); 2]],
                &[Topology::Periodic, Topology::Walled],
                false,
            )
            .unwrap(),
        );
        let mut rho = ScalarField::from_fn(g.clone(), |x| 1.0 + 0.2 * x[1]);
        // Tangential wall motion only.
        let u = VectorField::from_fn(g.clone(), |x| {
            [(2.0 * PI * x[1]).cos(), x[1] * (1.0 - x[1])]
        });
        let mass0 = rho.integral();
        let dt = 0.3 * g.min_spacing();
        for _ in 0..200 {
            rho = advance_density(&rho, &u, dt).unwrap();
        }
        assert!((rho.integral() - mass0).abs() <= 1e-12 * mass0.abs());
    }

    #[test]
    fn cfl_violation_is_an_error() {
        let g = periodic_1d(16);
        let rho = ScalarField::constant(g.clone(), 1.0);
        let u = VectorField::from_fn(g.clone(), |_| [1.0, 0.0]);
        let err = advance_density(&rho, &u, 1.0);
        assert!(matches!(err, Err(NsfError::CflViolation { .. })));
    }

    #[test]
    fn upwind_preserves_positivity_for_random_smooth_fields() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let g = periodic_2d(16);
        for _ in 0..1000 {
            let (a, b, c): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
            let rho = ScalarField::from_fn(g.clone(), |x| {
                0.05 + a * (2.0 * PI * x[0] + b).sin().powi(2)
            });
            let u = VectorField::from_fn(g.clone(), |x| {
                [
                    (2.0 * c - 1.0) * (2.0 * PI * x[1] + a).sin(),
                    (2.0 * b - 1.0) * (2.0 * PI * x[0] + c).cos(),
                ]
            });
            let dt = 0.45 * g.min_spacing() / u.abs_max().max(1e-9);
            let next = advance_density(&rho, &u, dt.min(0.01)).unwrap();
            assert!(next.min() > 0.0);
        }
    }

    fn steady_history(_g: &Arc<Grid>, u: VectorField, t_end: f64) -> VelocityHistory {
        VelocityHistory::new(vec![0.0, t_end], vec![u.clone(), u]).unwrap()
    }

    #[test]
    fn zero_velocity_path_is_stationary() {
        let g = periodic_2d(16);
        let hist = steady_history(&g, VectorField::zeros(g.clone()), 1.0);
        let x = [0.3, 0.4];
        let path = trace_characteristic(&hist, &x, 1.0, 20).unwrap();
        assert_eq!(path.endpoint()[0], 0.3);
        assert_eq!(path.endpoint()[1], 0.4);
    }

    #[test]
    fn constant_velocity_path_translates() {
        let g = periodic_2d(16);
        let u = VectorField::from_fn(g.clone(), |_| [1.0, 0.0]);
        let hist = steady_history(&g, u, 0.5);
        let path = trace_characteristic(&hist, &[0.2, 0.7], 0.5, 50).unwrap();
        assert!((path.endpoint()[0] - 0.7).abs() < 1e-12);
        assert!((path.endpoint()[1] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn sinusoidal_flow_matches_fine_reference() {
        // dx/dt = sin(2 pi x): compare a coarse trace against a much finer
        // one (both 4th order; the fine one serves as the oracle).
        let g = periodic_1d(512);
        let u = VectorField::from_fn(g.clone(), |x| [(2.0 * PI * x[0]).sin(), 0.0]);
        let hist = steady_history(&g, u, 1.0);
        let x0 = [0.23, 0.0];
        let coarse = trace_characteristic(&hist, &x0, 1.0, 100).unwrap();
        let fine = trace_characteristic(&hist, &x0, 1.0, 4000).unwrap();
        assert!(
            (coarse.endpoint()[0] - fine.endpoint()[0]).abs() < 1e-6,
            "difference {}",
            (coarse.endpoint()[0] - fine.endpoint()[0]).abs()
        );
    }

    #[test]
    fn uniform_divergence_gives_exponential_density() {
        // u = c x on a walled axis has div u = c; 1/rho = e^{ct}/rho0.
        let g = Arc::new(
            Grid::build(
                1,
                &[1.0],
                &[64],
                &[[Some(TempBc::Dirichlet); 2]],
                &[Topology::Walled],
                false,
            )
            .unwrap(),
        );
        let c = 0.8;
        let u = VectorField::from_fn(g.clone(), |x| [c * x[0], 0.0]);
        let hist = steady_history(&g, u, 0.5);
        let rho0 = ScalarField::constant(g.clone(), 2.0);
        let path = trace_characteristic(&hist, &[0.25, 0.0], 0.5, 200).unwrap();
        let inv = reciprocal_density_along_path(&rho0, &path);
        let exact = (c * 0.5f64).exp() / 2.0;
        assert!((inv - exact).abs() < 1e-6, "got {inv}, expected {exact}");
    }

    #[test]
    fn divergence_free_flow_keeps_reciprocal_density() {
        let g = periodic_2d(32);
        let u = VectorField::from_fn(g.clone(), |x| {
            [(2.0 * PI * x[1]).sin(), (2.0 * PI * x[0]).sin()]
        });
        let hist = steady_history(&g, u, 1.0);
        let rho0 = ScalarField::constant(g.clone(), 1.7);
        let path = trace_characteristic(&hist, &[0.1, 0.6], 1.0, 100).unwrap();
        let inv = reciprocal_density_along_path(&rho0, &path);
        assert!((inv - 1.0 / 1.7).abs() < 1e-10);
    }

    #[test]
    fn path_leaving_walled_domain_is_an_error() {
        let g = Arc::new(
            Grid::build(
                1,
                &[1.0],
                &[32],
                &[[Some(TempBc::Dirichlet); 2]],
                &[Topology::Walled],
                false,
            )
            .unwrap(),
        );
        // Outward velocity at the wall (not tangential): the path exits.
        let u = VectorField::from_fn(g.clone(), |_| [2.0, 0.0]);
        let hist = steady_history(&g, u, 1.0);
        let err = trace_characteristic(&hist, &[0.9, 0.0], 1.0, 50);
        assert!(matches!(err, Err(NsfError::PathLeftDomain { .. })));
    }

    #[test]
    fn identity_renormalization_vanishes_on_constant_state() {
        let g = periodic_1d(32);
        let times = vec![0.0, 0.1, 0.2];
        let rho: Vec<_> = (0..3)
            .map(|_| ScalarField::constant(g.clone(), 1.0))
            .collect();
        let u: Vec<_> = (0..3).map(|_| VectorField::zeros(g.clone())).collect();
        let rn = Renormalization {
            b: &|z| z,
            db: &|_| 1.0,
            domain: (0.0, f64::INFINITY),
        };
        let res = renormalized_residual(&rn, &times, &rho, &u).unwrap();
        assert!(res.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn square_renormalization_with_zero_velocity_vanishes() {
        let g = periodic_1d(32);
        let times = vec![0.0, 0.05];
        let f = ScalarField::from_fn(g.clone(), |x| 1.0 + 0.2 * (2.0 * PI * x[0]).sin());
        let rho = vec![f.clone(), f];
        let u = vec![VectorField::zeros(g.clone()), VectorField::zeros(g.clone())];
        let rn = Renormalization {
            b: &|z| z * z,
            db: &|z| 2.0 * z,
            domain: (0.0, f64::INFINITY),
        };
        let res = renormalized_residual(&rn, &times, &rho, &u).unwrap();
        assert_eq!(res[0], 0.0);
    }

    #[test]
    fn log_renormalization_residual_refines_to_zero() {
        // Traveling wave rho(t, x) = rho0(x - ct) under the constant
        // divergence-free velocity u = c: the residual of the log form is
        // pure discretization error, O(dt + h^2), and shrinks under joint
        // refinement with dt proportional to h.
        let c = 0.5;
        let profile = |x: f64| 1.5 + 0.4 * (2.0 * PI * x).sin();
        let mut prev = f64::INFINITY;
        for (n, dt) in [(32, 0.02), (64, 0.01), (128, 0.005)] {
            let g = periodic_1d(n);
            let times = vec![0.0, dt];
            let rho = vec![
                ScalarField::from_fn(g.clone(), |x| profile(x[0])),
                ScalarField::from_fn(g.clone(), |x| profile(x[0] - c * dt)),
            ];
            let u = vec![
                VectorField::from_fn(g.clone(), |_| [c, 0.0]),
                VectorField::from_fn(g.clone(), |_| [c, 0.0]),
            ];
            let rn = Renormalization {
                b: &|z: f64| z.ln(),
                db: &|z| 1.0 / z,
                domain: (0.0, f64::INFINITY),
            };
            let res = renormalized_residual(&rn, &times, &rho, &u).unwrap()[0];
            assert!(res < 0.75 * prev, "residual {res} vs previous {prev}");
            prev = res;
        }
        assert!(prev < 2e-2, "residual {prev}");
    }

    #[test]
    fn renormalization_domain_is_enforced() {
        let g = periodic_1d(16);
        let times = vec![0.0, 0.1];
        let rho = vec![
            ScalarField::constant(g.clone(), 0.5),
            ScalarField::constant(g.clone(), 1.5),
        ];
        let u = vec![VectorField::zeros(g.clone()), VectorField::zeros(g.clone())];
        let rn = Renormalization {
            b: &|z: f64| z.ln(),
            db: &|z| 1.0 / z,
            domain: (1.0, f64::INFINITY),
        };
        assert!(renormalized_residual(&rn, &times, &rho, &u).is_err());
    }
}
