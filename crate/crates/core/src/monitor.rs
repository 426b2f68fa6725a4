//! Runtime regularity diagnostics: pointwise lower bounds for density and
//! temperature, weighted energy balances with a coercivity ratio, the
//! control functional with its hitting time, the density-gradient bound
//! ratio, an interpolation-inequality ratio, compatibility residuals of the
//! initial data, and blow-up surrogate flags.
//!
//! Inequality-type quantities are reported as ratios of their two sides;
//! the regression bounds live in the tests, never in this module.

use crate::constitutive::{self, FluidParams};
use crate::error::{NsfError, Result};
use crate::extension::{extend_temperature, extend_velocity, BoundaryData};
use crate::field::{ScalarField, VectorField};
use crate::mms::Manufactured;
use crate::norms::{
    self, fractional_norm_vector, lq_norm_vector, sobolev_norm_vector, sup_norm, w1inf_norm,
    Trajectory,
};
use crate::ops;
use crate::stepper::State;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flag {
    HittingTime,
    PositivityLoss,
    BlowupSuspected,
}

#[derive(Clone, Debug)]
pub struct MonitorConfig {
    /// Hitting threshold; `None` selects 2 * initial amplitude + 1, which
    /// keeps the initial functional below half the threshold.
    pub threshold: Option<f64>,
    /// Time exponent of the control-functional integrand.
    pub p: f64,
    /// Integrability exponent for the gradient diagnostics.
    pub q: f64,
    /// Relative slack allowed on the pointwise lower bounds.
    pub min_principle_tol: f64,
    pub blowup_amplitude: f64,
    pub blowup_growth: f64,
    pub blowup_window: usize,
}

impl Default for MonitorConfig {
    fn default() -> MonitorConfig {
        MonitorConfig {
            threshold: None,
            p: 6.0,
            q: 4.0,
            min_principle_tol: 1e-6,
            blowup_amplitude: 1e6,
            blowup_growth: 100.0,
            blowup_window: 16,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub t: f64,
    pub amplitude: f64,
    pub w1inf: f64,
    pub control_f: f64,
    pub rho_min: f64,
    pub rho_bound: f64,
    pub rho_ok: bool,
    pub theta_min: f64,
    pub theta_bound: f64,
    pub theta_ok: bool,
    pub theta_check_enabled: bool,
    pub energy_residual_momentum: f64,
    pub energy_residual_heat: f64,
    pub korn_ratio: f64,
    pub grad_rho_ratio: f64,
    pub gn_ratio: f64,
    pub mass: f64,
    pub flags: Vec<Flag>,
}

/// Weighted integral of a nodewise closure.
fn integrate(grid: &crate::grid::Grid, f: impl Fn(usize) -> f64) -> f64 {
    (0..grid.node_count())
        .map(|i| f(i) * grid.node_weight(i))
        .sum()
}

fn sup_div(u: &VectorField) -> f64 {
    ops::div(u).abs_max()
}

fn diff_vector(a: &VectorField, b: &VectorField) -> VectorField {
    let grid = a.grid().clone();
    let comps = (0..grid.dim())
        .map(|c| {
            a.comp(c)
                .iter()
                .zip(b.comp(c))
                .map(|(x, y)| x - y)
                .collect()
        })
        .collect();
    VectorField::from_components(grid, comps).expect("matching grids")
}

/// Viscous dissipation of the difference field and its coercivity ratio
/// against the squared first-order norm; ratio is 0 for a vanishing field.
pub fn korn_ratio(u: &VectorField, u_ext: &VectorField, params: &FluidParams) -> Result<f64> {
    let v = diff_vector(u, u_ext);
    let norm = sobolev_norm_vector(&v, 1, 2.0)?;
    if norm == 0.0 {
        return Ok(0.0);
    }
    let grad_v = ops::grad_vector(&v);
    let diss = constitutive::dissipation(&grad_v, params)?;
    Ok(diss.integral() / (norm * norm))
}

/// Both weighted energy-balance residuals for one step transition, plus the
/// coercivity ratio of the velocity difference at the new time level.
#[allow(clippy::too_many_arguments)]
fn energy_residuals(
    prev: &State,
    cur: &State,
    u_ext: &VectorField,
    theta_ext: &ScalarField,
    params: &FluidParams,
    sources: Option<&(ScalarField, VectorField, ScalarField)>,
) -> Result<(f64, f64, f64)> {
    let grid = cur.grid().clone();
    let dt = cur.t - prev.t;
    let dim = grid.dim();

    let v_prev = diff_vector(&prev.u, u_ext);
    let v_cur = diff_vector(&cur.u, u_ext);
    let kinetic = |rho: &ScalarField, v: &VectorField| {
        integrate(&grid, |i| {
            let mag2: f64 = (0..dim).map(|a| v.comp(a)[i] * v.comp(a)[i]).sum();
            0.5 * rho.values()[i] * mag2
        })
    };
    let ddt_mom = (kinetic(&cur.rho, &v_cur) - kinetic(&prev.rho, &v_prev)) / dt;

    let grad_v = ops::grad_vector(&v_cur);
    let diss_v = constitutive::dissipation(&grad_v, params)?.integral();

    let grad_ext = ops::grad_vector(u_ext);
    let adv_mom = integrate(&grid, |i| {
        let mut s = 0.0;
        for r in 0..dim {
            let mut conv = 0.0;
            for c in 0..dim {
                conv += cur.u.comp(c)[i] * grad_ext.at(i, r, c);
            }
            s += conv * v_cur.comp(r)[i];
        }
        cur.rho.values()[i] * s
    });

    let div_v = ops::div(&v_cur);
    let pressure_work = integrate(&grid, |i| {
        cur.rho.values()[i] * cur.theta.values()[i] * div_v.values()[i]
    });

    let grad_pot = ops::grad(&params.potential);
    let potential_work = integrate(&grid, |i| {
        let mut s = 0.0;
        for r in 0..dim {
            s += grad_pot.comp(r)[i] * v_cur.comp(r)[i];
        }
        cur.rho.values()[i] * s
    });

    let forcing_mom = match sources {
        Some((_, su, _)) => integrate(&grid, |i| {
            let mut s = 0.0;
            for r in 0..dim {
                s += su.comp(r)[i] * v_cur.comp(r)[i];
            }
            cur.rho.values()[i] * s
        }),
        None => 0.0,
    };

    // A forced mass balance breaks the continuity cancellation used to fold
    // the advection of the kinetic/thermal densities into their time
    // derivatives; the leftover is half the mass source times the squared
    // difference field.
    let mass_src_mom = match sources {
        Some((sr, _, _)) => integrate(&grid, |i| {
            let mag2: f64 = (0..dim).map(|a| v_cur.comp(a)[i] * v_cur.comp(a)[i]).sum();
            0.5 * sr.values()[i] * mag2
        }),
        None => 0.0,
    };

    let res_mom =
        ddt_mom + adv_mom + diss_v - pressure_work - potential_work - forcing_mom - mass_src_mom;

    let w_prev = prev.theta.zip(theta_ext, |a, b| a - b);
    let w_cur = cur.theta.zip(theta_ext, |a, b| a - b);
    let thermal = |rho: &ScalarField, w: &ScalarField| {
        integrate(&grid, |i| {
            0.5 * params.cv * rho.values()[i] * w.values()[i] * w.values()[i]
        })
    };
    let ddt_heat = (thermal(&cur.rho, &w_cur) - thermal(&prev.rho, &w_prev)) / dt;

    let grad_w = ops::grad(&w_cur);
    let conduction = params.kappa
        * integrate(&grid, |i| {
            (0..dim).map(|a| grad_w.comp(a)[i] * grad_w.comp(a)[i]).sum()
        });

    let grad_theta_ext = ops::grad(theta_ext);
    let adv_heat = params.cv
        * integrate(&grid, |i| {
            let mut conv = 0.0;
            for c in 0..dim {
                conv += cur.u.comp(c)[i] * grad_theta_ext.comp(c)[i];
            }
            cur.rho.values()[i] * conv * w_cur.values()[i]
        });

    let grad_u = ops::grad_vector(&cur.u);
    let diss_full = constitutive::dissipation(&grad_u, params)?;
    let diss_work = integrate(&grid, |i| w_cur.values()[i] * diss_full.values()[i]);

    let div_u = ops::div(&cur.u);
    let compression_work = integrate(&grid, |i| {
        w_cur.values()[i] * cur.rho.values()[i] * cur.theta.values()[i] * div_u.values()[i]
    });

    let forcing_heat = match sources {
        Some((_, _, st)) => {
            params.cv
                * integrate(&grid, |i| {
                    cur.rho.values()[i] * st.values()[i] * w_cur.values()[i]
                })
        }
        None => 0.0,
    };

    let mass_src_heat = match sources {
        Some((sr, _, _)) => integrate(&grid, |i| {
            0.5 * params.cv * sr.values()[i] * w_cur.values()[i] * w_cur.values()[i]
        }),
        None => 0.0,
    };

    let res_heat = ddt_heat + adv_heat + conduction - diss_work + compression_work
        - forcing_heat
        - mass_src_heat;

    let korn = korn_ratio(&cur.u, u_ext, params)?;
    Ok((res_mom, res_heat, korn))
}

/// Control functional at every sample: amplitude of the unknown tuple plus
/// the running time integral of the p-th power of the W^{1,inf} norm of
/// temperature and velocity (trapezoidal).
pub fn control_functional(traj: &Trajectory, p: f64) -> Result<Vec<f64>> {
    if traj.is_empty() {
        return Err(NsfError::InvalidNorm("empty trajectory".into()));
    }
    let mut out = Vec::with_capacity(traj.len());
    let mut integral = 0.0;
    let mut prev: Option<f64> = None;
    for k in 0..traj.len() {
        let amp = sup_norm(&[&traj.rho[k], &traj.theta[k]], &[&traj.u[k]]);
        let wk = w1inf_norm(&[&traj.theta[k]], &[&traj.u[k]]).powf(p);
        if let Some(wp) = prev {
            integral += 0.5 * (traj.times[k] - traj.times[k - 1]) * (wk + wp);
        }
        prev = Some(wk);
        out.push(amp + integral);
    }
    Ok(out)
}

/// First threshold crossing of a sampled series, located by linear
/// interpolation; returns the final time with `false` when never crossed.
pub fn hitting_time(times: &[f64], series: &[f64], m: f64) -> (f64, bool) {
    if times.is_empty() {
        return (0.0, false);
    }
    if series[0] >= m {
        return (times[0], true);
    }
    for k in 1..series.len() {
        if series[k] >= m {
            let frac = (m - series[k - 1]) / (series[k] - series[k - 1]);
            return (times[k - 1] + frac * (times[k] - times[k - 1]), true);
        }
    }
    (*times.last().unwrap(), false)
}

fn sup_div_integrals(traj: &Trajectory) -> Vec<f64> {
    let mut out = Vec::with_capacity(traj.len());
    let mut acc = 0.0;
    let mut prev: Option<f64> = None;
    for k in 0..traj.len() {
        let d = sup_div(&traj.u[k]);
        if let Some(dp) = prev {
            acc += 0.5 * (traj.times[k] - traj.times[k - 1]) * (d + dp);
        }
        prev = Some(d);
        out.push(acc);
    }
    out
}

/// Pointwise density floor along the trajectory: the initial minimum decays
/// at most exponentially in the time integral of the divergence amplitude.
pub fn density_min_check(traj: &Trajectory, tol: f64) -> Result<Vec<(f64, f64, bool)>> {
    if traj.is_empty() {
        return Err(NsfError::InvalidNorm("empty trajectory".into()));
    }
    let rho0_min = traj.rho[0].min();
    let ints = sup_div_integrals(traj);
    Ok((0..traj.len())
        .map(|k| {
            let bound = rho0_min * (-ints[k]).exp();
            let min = traj.rho[k].min();
            (min, bound, min >= bound * (1.0 - tol))
        })
        .collect())
}

/// Pointwise temperature floor, valid only under non-negative prescribed
/// wall heat influx; returns `None` (diagnostic disabled) otherwise.
pub fn temperature_min_check(
    traj: &Trajectory,
    bd: &BoundaryData,
    params: &FluidParams,
    tol: f64,
) -> Result<Option<Vec<(f64, f64, bool)>>> {
    if traj.is_empty() {
        return Err(NsfError::InvalidNorm("empty trajectory".into()));
    }
    let grid = traj.theta[0].grid();
    if let Some(min_flux) = bd.min_heat_flux(grid) {
        if min_flux < 0.0 {
            return Ok(None);
        }
    }
    let mut floor = traj.theta[0].min();
    if let Some(tb) = bd.min_dirichlet_temperature(grid) {
        floor = floor.min(tb);
    }
    let ints = sup_div_integrals(traj);
    Ok(Some(
        (0..traj.len())
            .map(|k| {
                let bound = floor * (-ints[k] / params.cv).exp();
                let min = traj.theta[k].min();
                (min, bound, min >= bound * (1.0 - tol))
            })
            .collect(),
    ))
}

fn extensions(
    traj: &Trajectory,
    bd: &BoundaryData,
    params: &FluidParams,
) -> Result<(VectorField, ScalarField)> {
    let grid = traj.rho[0].grid();
    let u_ext = extend_velocity(grid, bd, params.mu, params.lambda)?;
    let theta_ext = extend_temperature(grid, bd, traj.theta[0].min())?;
    Ok((u_ext, theta_ext))
}

fn residual_series(
    traj: &Trajectory,
    bd: &BoundaryData,
    params: &FluidParams,
    mms: Option<&Manufactured>,
    pick: usize,
) -> Result<Vec<f64>> {
    let (u_ext, theta_ext) = extensions(traj, bd, params)?;
    let grid = traj.rho[0].grid().clone();
    let mut out = Vec::new();
    for k in 1..traj.len() {
        let prev = State {
            t: traj.times[k - 1],
            rho: traj.rho[k - 1].clone(),
            theta: traj.theta[k - 1].clone(),
            u: traj.u[k - 1].clone(),
        };
        let cur = State {
            t: traj.times[k],
            rho: traj.rho[k].clone(),
            theta: traj.theta[k].clone(),
            u: traj.u[k].clone(),
        };
        let sources = match mms {
            Some(m) => Some(m.sources(&grid, prev.t, params)?),
            None => None,
        };
        let (rm, rh, _) =
            energy_residuals(&prev, &cur, &u_ext, &theta_ext, params, sources.as_ref())?;
        out.push(if pick == 0 { rm } else { rh });
    }
    Ok(out)
}

/// Residual of the wall-referenced kinetic-energy balance, one value per
/// step transition.
pub fn momentum_energy_residual(
    traj: &Trajectory,
    bd: &BoundaryData,
    params: &FluidParams,
    mms: Option<&Manufactured>,
) -> Result<Vec<f64>> {
    residual_series(traj, bd, params, mms, 0)
}

/// Residual of the wall-referenced thermal-energy balance.
pub fn heat_energy_residual(
    traj: &Trajectory,
    bd: &BoundaryData,
    params: &FluidParams,
    mms: Option<&Manufactured>,
) -> Result<Vec<f64>> {
    residual_series(traj, bd, params, mms, 1)
}

/// Ratio of the running density-gradient supremum to its exponential bound
/// built from the divergence amplitude and the second-order velocity norm.
/// A vanishing left side reports 0.
pub fn grad_density_bound_ratio(traj: &Trajectory, q: f64) -> Result<Vec<f64>> {
    if traj.is_empty() {
        return Err(NsfError::InvalidNorm("empty trajectory".into()));
    }
    let ints = sup_div_integrals(traj);
    let grad_rho0 = lq_norm_vector(&ops::grad(&traj.rho[0]), q)?;
    let mut out = Vec::with_capacity(traj.len());
    let mut sup_grad = 0.0f64;
    let mut int_w2q = 0.0;
    let mut prev_w2q: Option<f64> = None;
    for k in 0..traj.len() {
        sup_grad = sup_grad.max(lq_norm_vector(&ops::grad(&traj.rho[k]), q)?);
        let w2q = sobolev_norm_vector(&traj.u[k], 2, q)?;
        if let Some(wp) = prev_w2q {
            int_w2q += 0.5 * (traj.times[k] - traj.times[k - 1]) * (w2q + wp);
        }
        prev_w2q = Some(w2q);
        let rhs = (2.0 * ints[k]).exp() * (grad_rho0 + int_w2q);
        out.push(if sup_grad == 0.0 { 0.0 } else { sup_grad / rhs });
    }
    Ok(out)
}

/// Interpolation-inequality ratio: the intermediate-order norm against the
/// geometric mean of a low fractional norm and the full second-order norm.
/// The low order is (1 - 1/p), the intermediate 1 + (1 - 1/p)/2.
pub fn gn_ratio(u: &VectorField, p: f64, q: f64) -> Result<f64> {
    let zero = (0..u.grid().dim()).all(|a| u.comp(a).iter().all(|&v| v == 0.0));
    if zero {
        return Err(NsfError::InvalidNorm(
            "interpolation ratio is undefined on the zero field".into(),
        ));
    }
    let alpha = 1.0 - 1.0 / p;
    let s = 1.0 + alpha / 2.0;
    let mid = fractional_norm_vector(u, s, q)?;
    let low = fractional_norm_vector(u, alpha, q)?;
    let high = sobolev_norm_vector(u, 2, q)?;
    Ok(mid / (low.sqrt() * high.sqrt()))
}

/// Boundary residuals of the initial data: trace mismatches (order zero)
/// and the initial time-rate brackets of the velocity and temperature
/// equations restricted to the walls (order one), all as sup norms.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct CompatibilityReport {
    pub velocity_trace: f64,
    pub temperature_trace: f64,
    pub heat_flux_trace: f64,
    pub momentum_rate: f64,
    pub heat_rate_dirichlet: f64,
    pub heat_rate_neumann: f64,
}

impl CompatibilityReport {
    pub fn max_zeroth_order(&self) -> f64 {
        self.velocity_trace
            .max(self.temperature_trace)
            .max(self.heat_flux_trace)
    }
}

pub fn compatibility_residuals(
    rho0: &ScalarField,
    theta0: &ScalarField,
    u0: &VectorField,
    bd: &BoundaryData,
    params: &FluidParams,
) -> Result<CompatibilityReport> {
    let grid = rho0.grid().clone();
    let dim = grid.dim();

    let mut velocity_trace = 0.0f64;
    for face in grid.walled_faces() {
        for node in grid.face_nodes(face) {
            for a in 0..dim {
                velocity_trace =
                    velocity_trace.max((u0.comp(a)[node] - bd.velocity.comp(a)[node]).abs());
            }
        }
    }
    let mut temperature_trace = 0.0f64;
    for face in grid.dirichlet_faces() {
        for node in grid.face_nodes(face) {
            temperature_trace =
                temperature_trace.max((theta0.values()[node] - bd.temperature.values()[node]).abs());
        }
    }
    let grad_theta0 = ops::grad(theta0);
    let mut heat_flux_trace = 0.0f64;
    for face in grid.neumann_faces() {
        let sign = face.side.normal_sign();
        for node in grid.face_nodes(face) {
            let dn = sign * grad_theta0.comp(face.axis)[node];
            heat_flux_trace = heat_flux_trace.max((dn - bd.heat_flux.values()[node]).abs());
        }
    }

    // Initial velocity time-rate: advection, pressure split, viscosity and
    // potential assembled discretely; its wall trace should vanish because
    // the wall velocity is time-independent.
    let grad_u0 = ops::grad_vector(u0);
    let stress = constitutive::stress(&grad_u0, params)?;
    let div_stress = ops::div_tensor(&stress);
    let grad_rho0 = ops::grad(rho0);
    let grad_pot = ops::grad(&params.potential);
    let mut momentum_rate = 0.0f64;
    for face in grid.walled_faces() {
        for node in grid.face_nodes(face) {
            for r in 0..dim {
                let mut adv = 0.0;
                for c in 0..dim {
                    adv += u0.comp(c)[node] * grad_u0.at(node, r, c);
                }
                let rate = -adv
                    - theta0.values()[node] * grad_rho0.comp(r)[node] / rho0.values()[node]
                    - grad_theta0.comp(r)[node]
                    + div_stress.comp(r)[node] / rho0.values()[node]
                    + grad_pot.comp(r)[node];
                momentum_rate = momentum_rate.max(rate.abs());
            }
        }
    }

    // Initial temperature time-rate; trace on the prescribed-temperature
    // walls and normal derivative on the prescribed-flux walls.
    let lap_theta0 = ops::div(&grad_theta0);
    let diss0 = constitutive::dissipation(&grad_u0, params)?;
    let div_u0 = ops::div(u0);
    let rate = ScalarField::from_values(
        grid.clone(),
        (0..grid.node_count())
            .map(|i| {
                let mut adv = 0.0;
                for c in 0..dim {
                    adv += u0.comp(c)[i] * grad_theta0.comp(c)[i];
                }
                -adv + params.kappa * lap_theta0.values()[i] / (params.cv * rho0.values()[i])
                    + diss0.values()[i] / (params.cv * rho0.values()[i])
                    - theta0.values()[i] * div_u0.values()[i] / params.cv
            })
            .collect(),
    )?;
    let mut heat_rate_dirichlet = 0.0f64;
    for face in grid.dirichlet_faces() {
        for node in grid.face_nodes(face) {
            heat_rate_dirichlet = heat_rate_dirichlet.max(rate.values()[node].abs());
        }
    }
    let grad_rate = ops::grad(&rate);
    let mut heat_rate_neumann = 0.0f64;
    for face in grid.neumann_faces() {
        let sign = face.side.normal_sign();
        for node in grid.face_nodes(face) {
            heat_rate_neumann =
                heat_rate_neumann.max((sign * grad_rate.comp(face.axis)[node]).abs());
        }
    }

    Ok(CompatibilityReport {
        velocity_trace,
        temperature_trace,
        heat_flux_trace,
        momentum_rate,
        heat_rate_dirichlet,
        heat_rate_neumann,
    })
}

/// Blow-up surrogate: amplitude above the hard cap, or growth by more than
/// the configured factor across the trailing window. A numerical run can
/// only flag suspicion, never certify an actual singularity.
pub fn detect_blowup(amplitudes: &[f64], cfg: &MonitorConfig) -> bool {
    let Some(&last) = amplitudes.last() else {
        return false;
    };
    if last > cfg.blowup_amplitude {
        return true;
    }
    if amplitudes.len() > cfg.blowup_window {
        let base = amplitudes[amplitudes.len() - 1 - cfg.blowup_window];
        if base > 0.0 && last > cfg.blowup_growth * base {
            return true;
        }
    }
    false
}

/// Streaming per-step evaluation of the full diagnostics record.
pub struct Monitor {
    cfg: MonitorConfig,
    params: FluidParams,
    u_ext: VectorField,
    theta_ext: ScalarField,
    threshold: f64,
    rho0_min: f64,
    theta_floor: f64,
    theta_enabled: bool,
    grad_rho0_q: f64,
    mms: Option<Manufactured>,
    int_w1inf_p: f64,
    int_div_sup: f64,
    int_w2q_u: f64,
    sup_grad_rho_q: f64,
    prev: Option<PrevSample>,
    amplitudes: Vec<f64>,
    records: Vec<DiagnosticsRecord>,
}

struct PrevSample {
    state: State,
    w1inf_p: f64,
    div_sup: f64,
    w2q_u: f64,
}

impl Monitor {
    pub fn new(
        initial: &State,
        params: &FluidParams,
        bd: &BoundaryData,
        cfg: MonitorConfig,
        mms: Option<Manufactured>,
    ) -> Result<Monitor> {
        let grid = initial.grid();
        let u_ext = extend_velocity(grid, bd, params.mu, params.lambda)?;
        let theta_ext = extend_temperature(grid, bd, initial.theta.min())?;
        theta_ext.check_positive("boundary temperature extension")?;
        let amp0 = sup_norm(&[&initial.rho, &initial.theta], &[&initial.u]);
        let threshold = cfg.threshold.unwrap_or(2.0 * amp0 + 1.0);
        let mut theta_floor = initial.theta.min();
        if let Some(tb) = bd.min_dirichlet_temperature(grid) {
            theta_floor = theta_floor.min(tb);
        }
        let theta_enabled = bd.min_heat_flux(grid).map_or(true, |m| m >= 0.0);
        let grad_rho0_q = lq_norm_vector(&ops::grad(&initial.rho), cfg.q)?;
        Ok(Monitor {
            cfg,
            params: params.clone(),
            u_ext,
            theta_ext,
            threshold,
            rho0_min: initial.rho.min(),
            theta_floor,
            theta_enabled,
            grad_rho0_q,
            mms,
            int_w1inf_p: 0.0,
            int_div_sup: 0.0,
            int_w2q_u: 0.0,
            sup_grad_rho_q: 0.0,
            prev: None,
            amplitudes: Vec::new(),
            records: Vec::new(),
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn records(&self) -> &[DiagnosticsRecord] {
        &self.records
    }

    /// Interpolated threshold-crossing time, if the functional has crossed.
    pub fn hitting_time(&self) -> Option<f64> {
        let times: Vec<f64> = self.records.iter().map(|r| r.t).collect();
        let series: Vec<f64> = self.records.iter().map(|r| r.control_f).collect();
        match hitting_time(&times, &series, self.threshold) {
            (t, true) => Some(t),
            _ => None,
        }
    }

    pub fn observe(&mut self, step: usize, state: &State) -> Result<DiagnosticsRecord> {
        let amplitude = sup_norm(&[&state.rho, &state.theta], &[&state.u]);
        let w1inf = w1inf_norm(&[&state.theta], &[&state.u]);
        let w1inf_p = w1inf.powf(self.cfg.p);
        let div_sup = sup_div(&state.u);
        let w2q_u = sobolev_norm_vector(&state.u, 2, self.cfg.q)?;

        let (mut res_mom, mut res_heat) = (0.0, 0.0);
        let korn;
        if let Some(prev) = &self.prev {
            let dt = state.t - prev.state.t;
            self.int_w1inf_p += 0.5 * dt * (w1inf_p + prev.w1inf_p);
            self.int_div_sup += 0.5 * dt * (div_sup + prev.div_sup);
            self.int_w2q_u += 0.5 * dt * (w2q_u + prev.w2q_u);
            let sources = match &self.mms {
                Some(m) => Some(m.sources(state.grid(), prev.state.t, &self.params)?),
                None => None,
            };
            (res_mom, res_heat, korn) = energy_residuals(
                &prev.state,
                state,
                &self.u_ext,
                &self.theta_ext,
                &self.params,
                sources.as_ref(),
            )?;
        } else {
            korn = korn_ratio(&state.u, &self.u_ext, &self.params)?;
        }

        let control_f = amplitude + self.int_w1inf_p;
        let rho_min = state.rho.min();
        let rho_bound = self.rho0_min * (-self.int_div_sup).exp();
        let rho_ok = rho_min >= rho_bound * (1.0 - self.cfg.min_principle_tol);
        let theta_min = state.theta.min();
        let theta_bound = self.theta_floor * (-self.int_div_sup / self.params.cv).exp();
        let theta_ok = !self.theta_enabled
            || theta_min >= theta_bound * (1.0 - self.cfg.min_principle_tol);

        self.sup_grad_rho_q = self
            .sup_grad_rho_q
            .max(lq_norm_vector(&ops::grad(&state.rho), self.cfg.q)?);
        let grad_rhs = (2.0 * self.int_div_sup).exp() * (self.grad_rho0_q + self.int_w2q_u);
        let grad_rho_ratio = if self.sup_grad_rho_q == 0.0 {
            0.0
        } else {
            self.sup_grad_rho_q / grad_rhs
        };

        let gn = match gn_ratio(&state.u, self.cfg.p, self.cfg.q) {
            Ok(r) => r,
            Err(_) => 0.0, // zero velocity: record the ratio as absent
        };

        self.amplitudes.push(amplitude);
        let mut flags = Vec::new();
        if control_f >= self.threshold {
            flags.push(Flag::HittingTime);
        }
        if rho_min <= 0.0 || theta_min <= 0.0 {
            flags.push(Flag::PositivityLoss);
        }
        if detect_blowup(&self.amplitudes, &self.cfg) {
            flags.push(Flag::BlowupSuspected);
        }

        let record = DiagnosticsRecord {
            step,
            t: state.t,
            amplitude,
            w1inf,
            control_f,
            rho_min,
            rho_bound,
            rho_ok,
            theta_min,
            theta_bound,
            theta_ok,
            theta_check_enabled: self.theta_enabled,
            energy_residual_momentum: res_mom,
            energy_residual_heat: res_heat,
            korn_ratio: korn,
            grad_rho_ratio,
            gn_ratio: gn,
            mass: state.rho.integral(),
            flags,
        };
        self.prev = Some(PrevSample {
            state: state.clone(),
            w1inf_p,
            div_sup,
            w2q_u,
        });
        self.records.push(record.clone());
        Ok(record)
    }
}

pub use norms::Trajectory as MonitorTrajectory;
