//! The scale of discrete norms used by the diagnostics: Lebesgue, Sobolev
//! (orders up to 2), sup and W^{1,inf} amplitudes, a Besov norm built from
//! the second-order modulus of smoothness, material derivatives, and the
//! composite trajectory/data norms assembled from them.
//!
//! Tuple conventions, fixed once and used consistently: the sup amplitude of
//! a tuple of fields is the maximum over all components; Sobolev-type
//! composites of tuples are sums of the member norms; Lebesgue norms of
//! tuples use the Euclidean magnitude over all components.

use crate::error::{NsfError, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::ops;
use std::sync::Arc;

fn check_q(q: f64) -> Result<()> {
    if !(q >= 1.0 && q.is_finite()) {
        return Err(NsfError::InvalidNorm(format!(
            "integrability exponent q = {q} must lie in [1, inf)"
        )));
    }
    Ok(())
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(NsfError::InvalidNorm(format!(
            "time exponent p = {p} must lie in (1, inf)"
        )));
    }
    Ok(())
}

/// Euclidean-magnitude L^q norm over an arbitrary list of component slices.
fn lq_components(grid: &Grid, comps: &[&[f64]], q: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..grid.node_count() {
        let mag2: f64 = comps.iter().map(|c| c[i] * c[i]).sum();
        acc += mag2.sqrt().powf(q) * grid.node_weight(i);
    }
    acc.powf(1.0 / q)
}

pub fn lq_norm(f: &ScalarField, q: f64) -> Result<f64> {
    check_q(q)?;
    Ok(lq_components(f.grid(), &[f.values()], q))
}

pub fn lq_norm_vector(u: &VectorField, q: f64) -> Result<f64> {
    check_q(q)?;
    let comps: Vec<&[f64]> = (0..u.grid().dim()).map(|a| u.comp(a)).collect();
    Ok(lq_components(u.grid(), &comps, q))
}

pub fn lq_norm_tuple(
    scalars: &[&ScalarField],
    vectors: &[&VectorField],
    q: f64,
) -> Result<f64> {
    check_q(q)?;
    let grid = tuple_grid(scalars, vectors)?;
    let comps = tuple_components(scalars, vectors);
    Ok(lq_components(&grid, &comps, q))
}

fn tuple_grid(scalars: &[&ScalarField], vectors: &[&VectorField]) -> Result<Arc<Grid>> {
    scalars
        .first()
        .map(|f| f.grid().clone())
        .or_else(|| vectors.first().map(|u| u.grid().clone()))
        .ok_or_else(|| NsfError::InvalidNorm("empty field tuple".into()))
}

fn tuple_components<'a>(
    scalars: &[&'a ScalarField],
    vectors: &[&'a VectorField],
) -> Vec<&'a [f64]> {
    let mut comps: Vec<&[f64]> = scalars.iter().map(|f| f.values()).collect();
    for u in vectors {
        for a in 0..u.grid().dim() {
            comps.push(u.comp(a));
        }
    }
    comps
}

/// All discrete derivatives of `values` with order between 1 and `k`.
fn derivatives_up_to(grid: &Arc<Grid>, values: &[f64], k: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut frontier: Vec<Vec<f64>> = vec![values.to_vec()];
    for _ in 0..k {
        let mut next = Vec::new();
        for f in &frontier {
            for axis in 0..grid.dim() {
                next.push(ops::deriv_values(grid, f, axis));
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Sum of L^q norms of all discrete derivatives of order 0..=k.
pub fn sobolev_norm(f: &ScalarField, k: usize, q: f64) -> Result<f64> {
    check_q(q)?;
    if k > 2 {
        return Err(NsfError::InvalidNorm(format!(
            "derivative order {k} exceeds the supported maximum 2"
        )));
    }
    let grid = f.grid();
    let mut total = lq_components(grid, &[f.values()], q);
    for d in derivatives_up_to(grid, f.values(), k) {
        total += lq_components(grid, &[&d], q);
    }
    Ok(total)
}

pub fn sobolev_norm_vector(u: &VectorField, k: usize, q: f64) -> Result<f64> {
    let mut total = 0.0;
    for a in 0..u.grid().dim() {
        total += sobolev_norm(&u.comp_field(a), k, q)?;
    }
    Ok(total)
}

/// Maximum absolute node value over every component of every field.
pub fn sup_norm(scalars: &[&ScalarField], vectors: &[&VectorField]) -> f64 {
    let mut worst = 0.0f64;
    for f in scalars {
        worst = worst.max(f.abs_max());
    }
    for u in vectors {
        for a in 0..u.grid().dim() {
            for &v in u.comp(a) {
                worst = worst.max(v.abs());
            }
        }
    }
    worst
}

/// Amplitude plus the amplitude of all first discrete derivatives.
pub fn w1inf_norm(scalars: &[&ScalarField], vectors: &[&VectorField]) -> f64 {
    let mut dsup = 0.0f64;
    let mut slabs: Vec<(Arc<Grid>, Vec<f64>)> = Vec::new();
    for f in scalars {
        slabs.push((f.grid().clone(), f.values().to_vec()));
    }
    for u in vectors {
        for a in 0..u.grid().dim() {
            slabs.push((u.grid().clone(), u.comp(a).to_vec()));
        }
    }
    for (grid, values) in &slabs {
        for axis in 0..grid.dim() {
            let d = ops::deriv_values(grid, values, axis);
            dsup = dsup.max(d.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
    }
    sup_norm(scalars, vectors) + dsup
}

/// Second-order modulus of smoothness at scale `t`: the largest L^q norm of
/// an axis-aligned second difference with offset at most `t`.
fn second_modulus(grid: &Grid, comps: &[&[f64]], q: f64, t: f64) -> f64 {
    let mut worst = 0.0f64;
    for axis in 0..grid.dim() {
        let h = grid.spacing()[axis];
        let mmax = (t / h).floor() as usize;
        for m in 1..=mmax {
            let mut acc = 0.0;
            let mut any = false;
            for i in 0..grid.node_count() {
                let iv = grid.multi(i);
                let (Some(j1), Some(j2)) = (
                    grid.shift(&iv, axis, m as isize),
                    grid.shift(&iv, axis, 2 * m as isize),
                ) else {
                    continue;
                };
                let (j1, j2) = (grid.idx(&j1), grid.idx(&j2));
                let mut mag2 = 0.0;
                for c in comps {
                    let d2 = c[j2] - 2.0 * c[j1] + c[i];
                    mag2 += d2 * d2;
                }
                acc += mag2.sqrt().powf(q) * grid.node_weight(i);
                any = true;
            }
            if any {
                worst = worst.max(acc.powf(1.0 / q));
            }
        }
    }
    worst
}

/// Modulus-of-smoothness norm with smoothness `s`, dyadic summation
/// exponent `sum_p`, and integrability `q`; truncated at the grid scale.
fn modulus_norm(grid: &Grid, comps: &[&[f64]], s: f64, sum_p: f64, q: f64) -> Result<f64> {
    check_q(q)?;
    if !(s > 0.0 && s < 2.0) {
        return Err(NsfError::InvalidNorm(format!(
            "modulus smoothness {s} must lie in (0, 2)"
        )));
    }
    if !(sum_p >= 1.0 && sum_p.is_finite()) {
        return Err(NsfError::InvalidNorm(format!(
            "dyadic summation exponent {sum_p} must lie in [1, inf)"
        )));
    }
    let base = lq_components(grid, comps, q);
    let levels = (0..grid.dim())
        .map(|a| (grid.extents()[a] / grid.spacing()[a]).log2().floor() as i32)
        .max()
        .unwrap_or(0)
        .max(0);
    let mut acc = 0.0;
    for j in 0..=levels {
        let scale = 2.0f64.powi(-j);
        let omega = second_modulus(grid, comps, q, scale);
        acc += (2.0f64.powf(j as f64 * s) * omega).powf(sum_p);
    }
    Ok(base + acc.powf(1.0 / sum_p))
}

fn besov_components(grid: &Grid, comps: &[&[f64]], p: f64, q: f64) -> Result<f64> {
    check_p(p)?;
    modulus_norm(grid, comps, 2.0 * (1.0 - 1.0 / p), p, q)
}

/// Fractional-order norm of smoothness `s` in (0, 2), realized by the
/// modulus norm with the dyadic sum taken with exponent `q`.
pub fn fractional_norm(f: &ScalarField, s: f64, q: f64) -> Result<f64> {
    modulus_norm(f.grid(), &[f.values()], s, q, q)
}

/// Componentwise sum, matching the vector Sobolev convention.
pub fn fractional_norm_vector(u: &VectorField, s: f64, q: f64) -> Result<f64> {
    let mut total = 0.0;
    for a in 0..u.grid().dim() {
        total += modulus_norm(u.grid(), &[u.comp(a)], s, q, q)?;
    }
    Ok(total)
}

/// Besov norm of smoothness 2(1 - 1/p): the L^q norm plus the dyadic sum of
/// weighted second-order moduli of smoothness down to the grid scale.
pub fn besov_norm(f: &ScalarField, p: f64, q: f64) -> Result<f64> {
    besov_components(f.grid(), &[f.values()], p, q)
}

pub fn besov_norm_tuple(
    scalars: &[&ScalarField],
    vectors: &[&VectorField],
    p: f64,
    q: f64,
) -> Result<f64> {
    let grid = tuple_grid(scalars, vectors)?;
    let comps = tuple_components(scalars, vectors);
    besov_components(&grid, &comps, p, q)
}

/// D_t g = (g_now - g_prev)/dt + u . grad(g_now).
pub fn material_derivative(
    g_prev: &ScalarField,
    g_now: &ScalarField,
    u: &VectorField,
    dt: f64,
) -> Result<ScalarField> {
    if dt <= 0.0 {
        return Err(NsfError::InvalidNorm(format!(
            "material derivative needs a positive time step, got {dt}"
        )));
    }
    let grid = g_now.grid();
    let grad = ops::grad(g_now);
    let mut out = vec![0.0; grid.node_count()];
    for (i, o) in out.iter_mut().enumerate() {
        let mut adv = 0.0;
        for a in 0..grid.dim() {
            adv += u.comp(a)[i] * grad.comp(a)[i];
        }
        *o = (g_now.values()[i] - g_prev.values()[i]) / dt + adv;
    }
    ScalarField::from_values(grid.clone(), out)
}

/// Uniformly sampled evolution of the three unknowns on one grid.
pub struct Trajectory {
    pub times: Vec<f64>,
    pub rho: Vec<ScalarField>,
    pub theta: Vec<ScalarField>,
    pub u: Vec<VectorField>,
}

impl Trajectory {
    pub fn new() -> Trajectory {
        Trajectory {
            times: Vec::new(),
            rho: Vec::new(),
            theta: Vec::new(),
            u: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, rho: ScalarField, theta: ScalarField, u: VectorField) {
        self.times.push(t);
        self.rho.push(rho);
        self.theta.push(theta);
        self.u.push(u);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn require_samples(&self, n: usize) -> Result<()> {
        if self.len() < n {
            return Err(NsfError::InvalidNorm(format!(
                "trajectory has {} samples, need at least {n}",
                self.len()
            )));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(NsfError::InvalidNorm(
                "trajectory times must increase strictly".into(),
            ));
        }
        Ok(())
    }

    /// Backward-difference time derivatives of the full unknown tuple,
    /// one entry per step transition.
    fn time_derivative_tuples(&self) -> Vec<(ScalarField, ScalarField, VectorField)> {
        let mut out = Vec::new();
        for k in 1..self.len() {
            let dt = self.times[k] - self.times[k - 1];
            let dr = self.rho[k].zip(&self.rho[k - 1], |a, b| (a - b) / dt);
            let dth = self.theta[k].zip(&self.theta[k - 1], |a, b| (a - b) / dt);
            let grid = self.u[k].grid().clone();
            let comps = (0..grid.dim())
                .map(|a| {
                    self.u[k]
                        .comp(a)
                        .iter()
                        .zip(self.u[k - 1].comp(a))
                        .map(|(x, y)| (x - y) / dt)
                        .collect()
                })
                .collect();
            let du = VectorField::from_components(grid, comps)
                .expect("trajectory grids are consistent");
            out.push((dr, dth, du));
        }
        out
    }
}

impl Default for Trajectory {
    fn default() -> Trajectory {
        Trajectory::new()
    }
}

/// Trapezoidal L^p norm in time of a sample-aligned series.
fn time_lp(times: &[f64], vals: &[f64], p: f64) -> f64 {
    let mut acc = 0.0;
    for k in 1..times.len() {
        let dt = times[k] - times[k - 1];
        acc += 0.5 * dt * (vals[k].powf(p) + vals[k - 1].powf(p));
    }
    acc.powf(1.0 / p)
}

/// Rectangle-rule L^p norm in time of a per-transition series (one value per
/// step, attributed to its interval).
fn transitions_lp(times: &[f64], vals: &[f64], p: f64) -> f64 {
    let mut acc = 0.0;
    for (k, v) in vals.iter().enumerate() {
        acc += v.powf(p) * (times[k + 1] - times[k]);
    }
    acc.powf(1.0 / p)
}

/// Composite trajectory norm: the largest first-order density norm, the
/// time-L^p of the second-order (theta, u) norm, the time-L^p of the
/// time-derivative amplitude, plus the Besov norm of the initial (theta, u).
pub fn solution_norm(traj: &Trajectory, p: f64, q: f64) -> Result<f64> {
    check_p(p)?;
    check_q(q)?;
    traj.require_samples(2)?;
    let mut sup_rho = 0.0f64;
    let mut wk: Vec<f64> = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        sup_rho = sup_rho.max(sobolev_norm(&traj.rho[k], 1, q)?);
        wk.push(sobolev_norm(&traj.theta[k], 2, q)? + sobolev_norm_vector(&traj.u[k], 2, q)?);
    }
    let second_order = time_lp(&traj.times, &wk, p);
    let mut dt_vals = Vec::new();
    for (dr, dth, du) in traj.time_derivative_tuples() {
        dt_vals.push(lq_norm_tuple(&[&dr, &dth], &[&du], q)?);
    }
    let dt_term = transitions_lp(&traj.times, &dt_vals, p);
    let besov0 = besov_norm_tuple(&[&traj.theta[0]], &[&traj.u[0]], p, q)?;
    Ok(sup_rho + second_order + dt_term + besov0)
}

/// Composite initial-data norm: first-order density norm plus the Besov norm
/// of the (theta, u) tuple.
pub fn data_norm(
    rho0: &ScalarField,
    theta0: &ScalarField,
    u0: &VectorField,
    p: f64,
    q: f64,
) -> Result<f64> {
    Ok(sobolev_norm(rho0, 1, q)? + besov_norm_tuple(&[theta0], &[u0], p, q)?)
}

/// Mixed-class trajectory norm (derivative orders truncated at 2), defined
/// for integrability exponents 3 < q <= 6.
pub fn chk_norm(traj: &Trajectory, q: f64) -> Result<f64> {
    if !(q > 3.0 && q <= 6.0) {
        return Err(NsfError::InvalidNorm(format!(
            "mixed-class norm needs 3 < q <= 6, got {q}"
        )));
    }
    traj.require_samples(2)?;
    let mut sup_rho = 0.0f64;
    let mut sup_w22 = 0.0f64;
    let mut w2q: Vec<f64> = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        sup_rho = sup_rho.max(sobolev_norm(&traj.rho[k], 1, q)?);
        sup_w22 =
            sup_w22.max(sobolev_norm(&traj.theta[k], 2, 2.0)? + sobolev_norm_vector(&traj.u[k], 2, 2.0)?);
        w2q.push(sobolev_norm(&traj.theta[k], 2, q)? + sobolev_norm_vector(&traj.u[k], 2, q)?);
    }
    let l2_w2q = time_lp(&traj.times, &w2q, 2.0);
    let mut sup_dt_rho = 0.0f64;
    let mut sup_dt_l2 = 0.0f64;
    let mut dt_w12: Vec<f64> = Vec::new();
    for (dr, dth, du) in traj.time_derivative_tuples() {
        sup_dt_rho = sup_dt_rho.max(lq_norm(&dr, q)?);
        sup_dt_l2 = sup_dt_l2.max(lq_norm_tuple(&[&dth], &[&du], 2.0)?);
        dt_w12.push(sobolev_norm(&dth, 1, 2.0)? + sobolev_norm_vector(&du, 1, 2.0)?);
    }
    let l2_dt_w12 = transitions_lp(&traj.times, &dt_w12, 2.0);
    Ok(sup_rho + sup_dt_rho + sup_w22 + l2_w2q + sup_dt_l2 + l2_dt_w12)
}

/// Requestable norm kinds, mirroring the functions above.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    Lq,
    Wkq,
    Sup,
    W1Inf,
    Besov,
    CompositeSolution,
    CompositeData,
    CompositeMixed,
}

#[derive(Clone, Copy, Debug)]
pub struct NormSpec {
    pub kind: NormKind,
    pub q: f64,
    pub k: usize,
    pub p: f64,
}

impl NormSpec {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            NormKind::Lq | NormKind::Wkq => check_q(self.q)?,
            NormKind::Sup | NormKind::W1Inf => {}
            NormKind::Besov => {
                check_q(self.q)?;
                check_p(self.p)?;
                let s = 2.0 * (1.0 - 1.0 / self.p);
                if !(s > 0.0 && s < 2.0) {
                    return Err(NsfError::InvalidNorm(format!(
                        "Besov smoothness {s} outside (0, 2)"
                    )));
                }
            }
            NormKind::CompositeSolution | NormKind::CompositeData => {
                check_p(self.p)?;
                if !(self.q > 3.0 && self.q.is_finite()) {
                    return Err(NsfError::InvalidNorm(format!(
                        "composite norms need q in (3, inf), got {}",
                        self.q
                    )));
                }
            }
            NormKind::CompositeMixed => {
                if !(self.q > 3.0 && self.q <= 6.0) {
                    return Err(NsfError::InvalidNorm(format!(
                        "mixed-class norm needs 3 < q <= 6, got {}",
                        self.q
                    )));
                }
            }
        }
        if self.k > 2 {
            return Err(NsfError::InvalidNorm(format!(
                "derivative order {} exceeds the supported maximum 2",
                self.k
            )));
        }
        Ok(())
    }
}
