//! IMEX time integration of the coupled system.
//!
//! Each step advances density with the conservative upwind update, then the
//! velocity with explicit advection/pressure/potential terms and implicit
//! viscosity (density frozen at the step start), then the temperature with
//! explicit advection, dissipation and compression work and implicit
//! conduction under the mixed wall conditions. Optional manufactured
//! forcings turn the scheme into a verification harness.

use crate::constitutive::{self, FluidParams};
use crate::elliptic::{ScalarBc, ScalarBcSet, ScalarProblem, VectorProblem};
use crate::error::{NsfError, Result};
use crate::extension::BoundaryData;
use crate::field::{ScalarField, VectorField};
use crate::grid::{Grid, TempBc, MAX_DIM};
use crate::mms::Manufactured;
use crate::norms::Trajectory;
use crate::ops;
use crate::transport;
use std::sync::Arc;

#[derive(Clone)]
pub struct State {
    pub t: f64,
    pub rho: ScalarField,
    pub theta: ScalarField,
    pub u: VectorField,
}

impl State {
    pub fn grid(&self) -> &Arc<Grid> {
        self.rho.grid()
    }

    pub fn validate(&self) -> Result<()> {
        self.rho.check_positive("rho")?;
        self.theta.check_positive("theta")?;
        self.u.check_finite("u")?;
        Ok(())
    }
}

#[derive(Clone)]
pub struct StepperConfig {
    pub dt: f64,
    pub t_end: f64,
    pub cfl_safety: f64,
    /// Time exponent of the diagnostics scale.
    pub p: f64,
    /// Integrability exponent of the diagnostics scale.
    pub q: f64,
    /// Trajectory sampling stride (every step still reaches the hook).
    pub sample_every: usize,
    pub mms: Option<Manufactured>,
}

impl StepperConfig {
    pub fn basic(dt: f64, t_end: f64) -> StepperConfig {
        StepperConfig {
            dt,
            t_end,
            cfl_safety: 0.5,
            p: 6.0,
            q: 4.0,
            sample_every: 1,
            mms: None,
        }
    }

    /// The admissible exponent window: q in (3, inf) and p > 2q/(2q - 3).
    pub fn validate(&self) -> Result<()> {
        if !(self.q > 3.0 && self.q.is_finite()) {
            return Err(NsfError::InvalidNorm(format!(
                "exponent q = {} must lie in (3, inf)",
                self.q
            )));
        }
        let p_low = 2.0 * self.q / (2.0 * self.q - 3.0);
        if !(self.p > p_low && self.p.is_finite()) {
            return Err(NsfError::InvalidNorm(format!(
                "exponent p = {} must exceed 2q/(2q-3) = {p_low}",
                self.p
            )));
        }
        if !(self.dt > 0.0 && self.t_end >= 0.0) {
            return Err(NsfError::InvalidNorm(format!(
                "time step {} and horizon {} must be positive",
                self.dt, self.t_end
            )));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(NsfError::InvalidNorm(format!(
                "cfl safety factor {} must lie in (0, 1]",
                self.cfl_safety
            )));
        }
        if self.sample_every == 0 {
            return Err(NsfError::InvalidNorm(
                "sample stride must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Acoustic-aware step bound: fastest signal speed is |u| + sqrt(theta)
/// since the pressure coupling is explicit.
pub fn suggest_dt(state: &State, cfg: &StepperConfig) -> f64 {
    let grid = state.grid();
    let mut speed = 0.0f64;
    for i in 0..grid.node_count() {
        let v = state.u.at(i);
        let mag = (0..grid.dim()).map(|a| v[a] * v[a]).sum::<f64>().sqrt();
        speed = speed.max(mag + state.theta.values()[i].max(0.0).sqrt());
    }
    if speed == 0.0 {
        return cfg.dt;
    }
    cfg.dt.min(cfg.cfl_safety * grid.min_spacing() / speed)
}

/// One IMEX step of size `dt`.
pub fn step_by(
    state: &State,
    params: &FluidParams,
    bd: &BoundaryData,
    cfg: &StepperConfig,
    dt: f64,
) -> Result<State> {
    let grid = state.grid().clone();
    let n = grid.node_count();
    let sources = match &cfg.mms {
        Some(m) => Some(m.sources(&grid, state.t, params)?),
        None => None,
    };

    // Density: conservative upwind plus the optional forcing.
    let mut rho_next = transport::advance_density(&state.rho, &state.u, dt)?;
    if let Some((sr, _, _)) = &sources {
        rho_next = rho_next.zip(sr, |r, s| r + dt * s);
        rho_next.check_positive("rho")?;
    }

    // Momentum: explicit advection, pressure split, potential and forcing;
    // implicit viscosity with the step-start density.
    let grad_rho = ops::grad(&state.rho);
    let grad_theta = ops::grad(&state.theta);
    let grad_u = ops::grad_vector(&state.u);
    let grad_pot = ops::grad(&params.potential);
    let mut mom_rhs = vec![vec![0.0; n]; grid.dim()];
    for r in 0..grid.dim() {
        for i in 0..n {
            let mut adv = 0.0;
            for c in 0..grid.dim() {
                adv += state.u.comp(c)[i] * grad_u.at(i, r, c);
            }
            let mut e = -adv
                - state.theta.values()[i] * grad_rho.comp(r)[i] / state.rho.values()[i]
                - grad_theta.comp(r)[i]
                + grad_pot.comp(r)[i];
            if let Some((_, su, _)) = &sources {
                e += su.comp(r)[i];
            }
            mom_rhs[r][i] = state.rho.values()[i] * (state.u.comp(r)[i] + dt * e);
        }
    }
    let mom_rhs = VectorField::from_components(grid.clone(), mom_rhs)?;
    let mom = VectorProblem {
        grid: &grid,
        mass: Some(&state.rho),
        factor: dt,
        mu: params.mu,
        lambda: params.lambda,
        boundary: &bd.velocity,
    };
    let (u_next, _) = mom.solve(&mom_rhs, Some(&state.u))?;

    // Temperature: explicit advection, dissipation and compression work
    // with the new velocity; implicit conduction.
    let grad_u_next = ops::grad_vector(&u_next);
    let div_u_next = ops::div(&u_next);
    let dissipation = constitutive::dissipation(&grad_u_next, params)?;
    let mut heat_rhs = vec![0.0; n];
    for (i, h) in heat_rhs.iter_mut().enumerate() {
        let mut adv = 0.0;
        for c in 0..grid.dim() {
            adv += u_next.comp(c)[i] * grad_theta.comp(c)[i];
        }
        let mut e = -adv + dissipation.values()[i] / (params.cv * rho_next.values()[i])
            - state.theta.values()[i] * div_u_next.values()[i] / params.cv;
        if let Some((_, _, st)) = &sources {
            e += st.values()[i];
        }
        *h = params.cv * rho_next.values()[i] * (state.theta.values()[i] + dt * e);
    }
    let heat_rhs = ScalarField::from_values(grid.clone(), heat_rhs)?;
    let heat_mass = rho_next.map(|r| params.cv * r);
    let conduction = ScalarField::constant(grid.clone(), dt * params.kappa);
    let mut bc = ScalarBcSet::new();
    for face in grid.walled_faces() {
        let nodes = grid.face_nodes(face);
        match grid.temp_bc(face) {
            Some(TempBc::Dirichlet) => {
                let vals = nodes.iter().map(|&i| bd.temperature.values()[i]).collect();
                bc = bc.with(face, ScalarBc::Dirichlet(vals));
            }
            Some(TempBc::Neumann) => {
                let vals = nodes
                    .iter()
                    .map(|&i| dt * params.kappa * bd.heat_flux.values()[i])
                    .collect();
                bc = bc.with(face, ScalarBc::Conormal(vals));
            }
            None => unreachable!("walled faces are always tagged"),
        }
    }
    let heat = ScalarProblem {
        grid: &grid,
        mass: Some(&heat_mass),
        coeff: &conduction,
        bc: &bc,
    };
    let (theta_next, _) = heat.solve(&heat_rhs, Some(&state.theta))?;
    theta_next.check_positive("theta")?;

    let next = State {
        t: state.t + dt,
        rho: rho_next,
        theta: theta_next,
        u: u_next,
    };
    next.validate()?;
    Ok(next)
}

/// One step with the automatically suggested step size.
pub fn step(
    state: &State,
    params: &FluidParams,
    bd: &BoundaryData,
    cfg: &StepperConfig,
) -> Result<State> {
    step_by(state, params, bd, cfg, suggest_dt(state, cfg))
}

/// Hook verdict after each completed step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HookDecision {
    Continue,
    Stop,
}

/// March from the initial state to the horizon, invoking the hook after
/// every step (step index starts at 1; index 0 is the initial state).
/// Returns the sampled trajectory and the final state.
pub fn run(
    initial: State,
    params: &FluidParams,
    bd: &BoundaryData,
    cfg: &StepperConfig,
    mut hook: impl FnMut(usize, &State) -> Result<HookDecision>,
) -> Result<(Trajectory, State)> {
    cfg.validate()?;
    params.validate()?;
    initial.validate()?;
    let mut traj = Trajectory::new();
    traj.push(
        initial.t,
        initial.rho.clone(),
        initial.theta.clone(),
        initial.u.clone(),
    );
    if hook(0, &initial)? == HookDecision::Stop {
        return Ok((traj, initial));
    }
    let mut state = initial;
    let mut index = 0usize;
    while state.t < cfg.t_end - 1e-14 {
        index += 1;
        let dt = suggest_dt(&state, cfg).min(cfg.t_end - state.t);
        state = step_by(&state, params, bd, cfg, dt).map_err(|e| NsfError::StepFailed {
            step: index,
            source: Box::new(e),
        })?;
        if index % cfg.sample_every == 0 || state.t >= cfg.t_end - 1e-14 {
            traj.push(
                state.t,
                state.rho.clone(),
                state.theta.clone(),
                state.u.clone(),
            );
        }
        if hook(index, &state)? == HookDecision::Stop {
            break;
        }
    }
    Ok((traj, state))
}

/// Helper used by tests and the verification harness: sup distance between
/// a state and a manufactured reference at the same time.
pub fn state_sup_error(state: &State, reference: &(ScalarField, ScalarField, VectorField)) -> [f64; 3] {
    let grid = state.grid();
    let mut e = [0.0f64; 3];
    for i in 0..grid.node_count() {
        e[0] = e[0].max((state.rho.values()[i] - reference.0.values()[i]).abs());
        e[1] = e[1].max((state.theta.values()[i] - reference.1.values()[i]).abs());
        for a in 0..grid.dim() {
            e[2] = e[2].max((state.u.comp(a)[i] - reference.2.comp(a)[i]).abs());
        }
    }
    let _ = MAX_DIM;
    e
}
