//! Matrix-free elliptic solves with mixed Dirichlet-Neumann boundaries.
//!
//! Both the scalar diffusion operator a*phi - div(c grad phi) and the
//! vector operator a*u - factor*div S(D u) are assembled in finite-volume
//! form (each node equation scaled by its control volume, half cells at
//! walls), which makes them symmetric positive definite on the free nodes.
//! Dirichlet nodes are eliminated: the solve runs on a masked vector that is
//! zero there, with the boundary coupling moved to the right-hand side.
//! The iteration is preconditioned conjugate gradients with the diagonal.

use crate::error::{NsfError, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::{Face, Grid};
use std::sync::Arc;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;
const NEUMANN_COMPAT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug)]
pub struct CgStats {
    pub iters: usize,
    pub rel_residual: f64,
}

/// Boundary condition for a scalar solve on one walled face.
#[derive(Clone, Debug)]
pub enum ScalarBc {
    /// Prescribed trace, one value per `Grid::face_nodes` entry.
    Dirichlet(Vec<f64>),
    /// Prescribed outward conormal derivative (c grad phi).n, one value per
    /// face node.
    Conormal(Vec<f64>),
}

#[derive(Clone, Debug, Default)]
pub struct ScalarBcSet {
    faces: Vec<(Face, ScalarBc)>,
}

impl ScalarBcSet {
    pub fn new() -> ScalarBcSet {
        ScalarBcSet::default()
    }

    pub fn with(mut self, face: Face, bc: ScalarBc) -> ScalarBcSet {
        self.faces.push((face, bc));
        self
    }

    fn get(&self, face: Face) -> Option<&ScalarBc> {
        self.faces.iter().find(|(f, _)| *f == face).map(|(_, b)| b)
    }
}

/// Preconditioned CG on a masked full-length vector.
fn cg(
    apply: &dyn Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    project: Option<&dyn Fn(&mut [f64])>,
) -> Result<CgStats> {
    let n = b.len();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgStats {
            iters: 0,
            rel_residual: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    for i in 0..n {
        r[i] = b[i] - ax[i];
    }
    if let Some(p) = project {
        p(&mut r);
    }
    let mut history: Vec<f64> = Vec::new();
    let rel = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>().sqrt() / bnorm;
    let mut res = rel(&r);
    if res <= tol {
        return Ok(CgStats {
            iters: 0,
            rel_residual: res,
        });
    }
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    for iter in 1..=max_iter {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(NsfError::NoConvergence {
                iters: iter,
                tail: history,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if let Some(pr) = project {
            pr(&mut r);
        }
        res = rel(&r);
        history.push(res);
        if history.len() > 8 {
            history.remove(0);
        }
        if res <= tol {
            if let Some(pr) = project {
                pr(x);
            }
            return Ok(CgStats {
                iters: iter,
                rel_residual: res,
            });
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(NsfError::NoConvergence {
        iters: max_iter,
        tail: history,
    })
}

/// Scalar problem a*phi - div(c grad phi) = rhs with mixed boundaries.
pub struct ScalarProblem<'a> {
    pub grid: &'a Arc<Grid>,
    /// Zeroth-order coefficient a(x); `None` means a = 0 (pure diffusion).
    pub mass: Option<&'a ScalarField>,
    /// Diffusion coefficient c(x) > 0.
    pub coeff: &'a ScalarField,
    pub bc: &'a ScalarBcSet,
}

struct ScalarAssembly {
    free: Vec<bool>,
    fixed_values: Vec<f64>,
    diag: Vec<f64>,
}

impl<'a> ScalarProblem<'a> {
    fn assemble(&self) -> Result<ScalarAssembly> {
        let grid = self.grid;
        let n = grid.node_count();
        let mut free = vec![true; n];
        let mut fixed_values = vec![0.0; n];
        for face in grid.walled_faces() {
            let bc = self.bc.get(face).ok_or_else(|| {
                NsfError::MissingClosure(format!("scalar solve lacks a condition on face {face}"))
            })?;
            let nodes = grid.face_nodes(face);
            match bc {
                ScalarBc::Dirichlet(vals) => {
                    if vals.len() != nodes.len() {
                        return Err(NsfError::FieldMismatch(format!(
                            "Dirichlet data on {face}: {} values for {} nodes",
                            vals.len(),
                            nodes.len()
                        )));
                    }
                    for (k, &node) in nodes.iter().enumerate() {
                        // A Dirichlet tag wins at mixed corners.
                        if free[node] {
                            free[node] = false;
                            fixed_values[node] = vals[k];
                        }
                    }
                }
                ScalarBc::Conormal(vals) => {
                    if vals.len() != nodes.len() {
                        return Err(NsfError::FieldMismatch(format!(
                            "Neumann data on {face}: {} values for {} nodes",
                            vals.len(),
                            nodes.len()
                        )));
                    }
                }
            }
        }
        let diag = self.diagonal(&free);
        Ok(ScalarAssembly {
            free,
            fixed_values,
            diag,
        })
    }

    fn transverse_area(&self, iv: &[usize; 2], axis: usize) -> f64 {
        let grid = self.grid;
        let mut a = 1.0;
        for b in 0..grid.dim() {
            if b != axis {
                a *= grid.axis_weight(b, iv[b]);
            }
        }
        a
    }

    /// Operator stencil at free nodes; reads masked input (zeros at fixed
    /// nodes) and writes zeros there.
    fn apply(&self, free: &[bool], x: &[f64], out: &mut [f64]) {
        let grid = self.grid;
        let c = self.coeff.values();
        for i in 0..grid.node_count() {
            if !free[i] {
                out[i] = 0.0;
                continue;
            }
            let iv = grid.multi(i);
            let vol = grid.node_weight(i);
            let mut acc = match self.mass {
                Some(a) => vol * a.values()[i] * x[i],
                None => 0.0,
            };
            for axis in 0..grid.dim() {
                let h = grid.spacing()[axis];
                let area = self.transverse_area(&iv, axis);
                for off in [-1isize, 1] {
                    if let Some(nbv) = grid.shift(&iv, axis, off) {
                        let nb = grid.idx(&nbv);
                        let cf = 0.5 * (c[i] + c[nb]);
                        acc += cf * area / h * (x[i] - x[nb]);
                    }
                    // A missing neighbor is a wall face: its flux is either
                    // prescribed (Neumann, handled in the RHS) or the node is
                    // fixed and never reaches this branch.
                }
            }
            out[i] = acc;
        }
    }

    fn diagonal(&self, free: &[bool]) -> Vec<f64> {
        let grid = self.grid;
        let c = self.coeff.values();
        let mut diag = vec![1.0; grid.node_count()];
        for i in 0..grid.node_count() {
            if !free[i] {
                continue;
            }
            let iv = grid.multi(i);
            let vol = grid.node_weight(i);
            let mut d = match self.mass {
                Some(a) => vol * a.values()[i],
                None => 0.0,
            };
            for axis in 0..grid.dim() {
                let h = grid.spacing()[axis];
                let area = self.transverse_area(&iv, axis);
                for off in [-1isize, 1] {
                    if let Some(nbv) = grid.shift(&iv, axis, off) {
                        let nb = grid.idx(&nbv);
                        d += 0.5 * (c[i] + c[nb]) * area / h;
                    }
                }
            }
            diag[i] = if d > 0.0 { d } else { 1.0 };
        }
        diag
    }

    pub fn solve(&self, rhs: &ScalarField, x0: Option<&ScalarField>) -> Result<(ScalarField, CgStats)> {
        self.coeff.check_positive("coeff")?;
        let grid = self.grid;
        let n = grid.node_count();
        let asm = self.assemble()?;

        // Right-hand side in integrated form plus boundary couplings.
        let mut b = vec![0.0; n];
        for i in 0..n {
            if asm.free[i] {
                b[i] = rhs.values()[i] * grid.node_weight(i);
            }
        }
        for face in grid.walled_faces() {
            if let Some(ScalarBc::Conormal(vals)) = self.bc.get(face) {
                for (k, &node) in grid.face_nodes(face).iter().enumerate() {
                    if asm.free[node] {
                        b[node] += vals[k] * grid.face_node_weight(face, node);
                    }
                }
            }
        }
        // Subtract the stencil applied to the fixed boundary extension.
        let has_fixed = asm.free.iter().any(|f| !f);
        if has_fixed {
            let mut coupled = vec![0.0; n];
            self.apply_to_fixed(&asm, &mut coupled);
            for i in 0..n {
                b[i] -= coupled[i];
            }
        }

        let singular = !has_fixed && self.mass.map_or(true, |m| m.abs_max() == 0.0);
        if singular {
            let imbalance: f64 = b.iter().sum();
            let scale = b.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
            if imbalance.abs() > NEUMANN_COMPAT_TOL * scale {
                return Err(NsfError::NeumannIncompatible {
                    imbalance: imbalance.abs(),
                    tol: NEUMANN_COMPAT_TOL,
                });
            }
        }

        // The pure-Neumann operator annihilates constants, so CG runs in the
        // zero-mean complement.
        let project_fn = move |v: &mut [f64]| {
            let mean: f64 = v.iter().sum::<f64>() / v.len() as f64;
            for vi in v.iter_mut() {
                *vi -= mean;
            }
        };

        let mut x = vec![0.0; n];
        if let Some(guess) = x0 {
            for i in 0..n {
                if asm.free[i] {
                    x[i] = guess.values()[i];
                }
            }
        }
        let apply = |v: &[f64], out: &mut [f64]| self.apply(&asm.free, v, out);
        let stats = cg(
            &apply,
            &asm.diag,
            &b,
            &mut x,
            DEFAULT_TOL,
            DEFAULT_MAX_ITER,
            if singular { Some(&project_fn) } else { None },
        )?;
        for i in 0..n {
            if !asm.free[i] {
                x[i] = asm.fixed_values[i];
            }
        }
        Ok((ScalarField::from_values(grid.clone(), x)?, stats))
    }

    fn apply_to_fixed(&self, asm: &ScalarAssembly, out: &mut [f64]) {
        // Stencil action of the fixed (Dirichlet) values on free nodes.
        let grid = self.grid;
        let c = self.coeff.values();
        for i in 0..grid.node_count() {
            if !asm.free[i] {
                out[i] = 0.0;
                continue;
            }
            let iv = grid.multi(i);
            let mut acc = 0.0;
            for axis in 0..grid.dim() {
                let h = grid.spacing()[axis];
                let area = self.transverse_area(&iv, axis);
                for off in [-1isize, 1] {
                    if let Some(nbv) = grid.shift(&iv, axis, off) {
                        let nb = grid.idx(&nbv);
                        if !asm.free[nb] {
                            let cf = 0.5 * (c[i] + c[nb]);
                            acc += cf * area / h * (-asm.fixed_values[nb]);
                        }
                    }
                }
            }
            out[i] = acc;
        }
    }
}

/// Convenience wrapper: -div(coeff grad phi) = rhs with mixed boundaries.
pub fn solve_mixed_poisson(
    grid: &Arc<Grid>,
    rhs: &ScalarField,
    coeff: &ScalarField,
    bc: &ScalarBcSet,
) -> Result<(ScalarField, CgStats)> {
    ScalarProblem {
        grid,
        mass: None,
        coeff,
        bc,
    }
    .solve(rhs, None)
}

/// Vector problem a*u - factor*div S(D u) = rhs with u = boundary trace on
/// every walled face. `boundary` supplies those trace values (its interior
/// entries are ignored).
pub struct VectorProblem<'a> {
    pub grid: &'a Arc<Grid>,
    pub mass: Option<&'a ScalarField>,
    pub factor: f64,
    pub mu: f64,
    pub lambda: f64,
    pub boundary: &'a VectorField,
}

impl<'a> VectorProblem<'a> {
    fn dim(&self) -> usize {
        self.grid.dim()
    }

    fn vol(&self) -> f64 {
        self.grid.spacing()[..self.dim()].iter().product()
    }

    fn is_fixed(&self, node: usize) -> bool {
        self.grid.is_wall_node(node)
    }

    /// -factor * div S(D u) in compact stencils, scaled by the (uniform)
    /// free-node volume; reads a masked planar layout [comp][node].
    fn apply_visc(&self, x: &[Vec<f64>], out: &mut [Vec<f64>]) {
        let grid = self.grid;
        let d = self.dim();
        let n = grid.node_count();
        let vol = self.vol();
        let cross = self.mu / 3.0 + self.lambda;
        for comp in out.iter_mut() {
            for v in comp.iter_mut() {
                *v = 0.0;
            }
        }
        for i in 0..n {
            if self.is_fixed(i) {
                continue;
            }
            let iv = grid.multi(i);
            for r in 0..d {
                let mut acc = 0.0;
                // mu * Laplacian of component r.
                for axis in 0..d {
                    let h = grid.spacing()[axis];
                    let p = grid.idx(&grid.shift(&iv, axis, 1).expect("free node interior"));
                    let m = grid.idx(&grid.shift(&iv, axis, -1).expect("free node interior"));
                    acc += self.mu * (x[r][p] - 2.0 * x[r][i] + x[r][m]) / (h * h);
                }
                // (mu/3 + lambda) * d_r (div u).
                for c in 0..d {
                    if c == r {
                        let h = grid.spacing()[r];
                        let p = grid.idx(&grid.shift(&iv, r, 1).expect("interior"));
                        let m = grid.idx(&grid.shift(&iv, r, -1).expect("interior"));
                        acc += cross * (x[c][p] - 2.0 * x[c][i] + x[c][m]) / (h * h);
                    } else {
                        let hr = grid.spacing()[r];
                        let hc = grid.spacing()[c];
                        let pp = grid
                            .shift(&iv, r, 1)
                            .and_then(|v| grid.shift(&v, c, 1))
                            .expect("interior");
                        let pm = grid
                            .shift(&iv, r, 1)
                            .and_then(|v| grid.shift(&v, c, -1))
                            .expect("interior");
                        let mp = grid
                            .shift(&iv, r, -1)
                            .and_then(|v| grid.shift(&v, c, 1))
                            .expect("interior");
                        let mm = grid
                            .shift(&iv, r, -1)
                            .and_then(|v| grid.shift(&v, c, -1))
                            .expect("interior");
                        acc += cross
                            * (x[c][grid.idx(&pp)] - x[c][grid.idx(&pm)] - x[c][grid.idx(&mp)]
                                + x[c][grid.idx(&mm)])
                            / (4.0 * hr * hc);
                    }
                }
                out[r][i] = -self.factor * vol * acc;
            }
        }
    }

    fn apply(&self, x: &[Vec<f64>], out: &mut [Vec<f64>]) {
        self.apply_visc(x, out);
        if let Some(a) = self.mass {
            let vol = self.vol();
            for r in 0..self.dim() {
                for i in 0..self.grid.node_count() {
                    if !self.is_fixed(i) {
                        out[r][i] += vol * a.values()[i] * x[r][i];
                    }
                }
            }
        }
    }

    fn diagonal(&self) -> Vec<Vec<f64>> {
        let grid = self.grid;
        let d = self.dim();
        let vol = self.vol();
        let cross = self.mu / 3.0 + self.lambda;
        let mut diag = vec![vec![1.0; grid.node_count()]; d];
        for i in 0..grid.node_count() {
            if self.is_fixed(i) {
                continue;
            }
            for (r, dr) in diag.iter_mut().enumerate() {
                let mut v = match self.mass {
                    Some(a) => vol * a.values()[i],
                    None => 0.0,
                };
                for axis in 0..d {
                    let h = grid.spacing()[axis];
                    v += self.factor * vol * self.mu * 2.0 / (h * h);
                }
                let hr = grid.spacing()[r];
                v += self.factor * vol * cross * 2.0 / (hr * hr);
                dr[i] = if v > 0.0 { v } else { 1.0 };
            }
        }
        diag
    }

    pub fn solve(
        &self,
        rhs: &VectorField,
        x0: Option<&VectorField>,
    ) -> Result<(VectorField, CgStats)> {
        let grid = self.grid;
        let d = self.dim();
        let n = grid.node_count();
        let vol = self.vol();

        // Fixed-value extension: boundary trace on walls, zero inside.
        let mut fixed = vec![vec![0.0; n]; d];
        let mut any_fixed = false;
        for i in 0..n {
            if self.is_fixed(i) {
                any_fixed = true;
                for (r, fr) in fixed.iter_mut().enumerate() {
                    fr[i] = self.boundary.comp(r)[i];
                }
            }
        }

        let mut b = vec![vec![0.0; n]; d];
        for r in 0..d {
            for i in 0..n {
                if !self.is_fixed(i) {
                    b[r][i] = rhs.comp(r)[i] * vol;
                }
            }
        }
        if any_fixed {
            let mut coupled = vec![vec![0.0; n]; d];
            self.apply(&fixed, &mut coupled);
            for r in 0..d {
                for i in 0..n {
                    b[r][i] -= coupled[r][i];
                }
            }
        }

        // Flatten into one vector for CG.
        let flat = |v: &[Vec<f64>]| -> Vec<f64> {
            let mut out = Vec::with_capacity(d * n);
            for c in v {
                out.extend_from_slice(c);
            }
            out
        };
        let unflat = |v: &[f64]| -> Vec<Vec<f64>> {
            (0..d).map(|r| v[r * n..(r + 1) * n].to_vec()).collect()
        };
        let bf = flat(&b);
        let diagf = flat(&self.diagonal());
        let mut xf = match x0 {
            Some(g) => {
                let mut start = vec![vec![0.0; n]; d];
                for r in 0..d {
                    for i in 0..n {
                        if !self.is_fixed(i) {
                            start[r][i] = g.comp(r)[i];
                        }
                    }
                }
                flat(&start)
            }
            None => vec![0.0; d * n],
        };
        let apply = |v: &[f64], out: &mut [f64]| {
            let xs = unflat(v);
            let mut os = vec![vec![0.0; n]; d];
            self.apply(&xs, &mut os);
            for r in 0..d {
                out[r * n..(r + 1) * n].copy_from_slice(&os[r]);
            }
        };
        // A fully periodic grid with no mass term is translation invariant:
        // project out the per-component constant.
        let singular = !any_fixed && self.mass.map_or(true, |m| m.abs_max() == 0.0);
        let project_fn = move |v: &mut [f64]| {
            for r in 0..d {
                let s = v[r * n..(r + 1) * n].iter().sum::<f64>() / n as f64;
                for x in v[r * n..(r + 1) * n].iter_mut() {
                    *x -= s;
                }
            }
        };
        let stats = cg(
            &apply,
            &diagf,
            &bf,
            &mut xf,
            DEFAULT_TOL,
            DEFAULT_MAX_ITER,
            if singular { Some(&project_fn) } else { None },
        )?;
        let mut sol = unflat(&xf);
        for r in 0..d {
            for i in 0..n {
                if self.is_fixed(i) {
                    sol[r][i] = fixed[r][i];
                }
            }
        }
        Ok((VectorField::from_components(grid.clone(), sol)?, stats))
    }
}
