//! Scalar, vector, and tensor fields sampled at grid nodes.
//!
//! Fields are immutable values once constructed: every operator returns a
//! fresh field, so snapshots can be shared across threads freely.

use crate::error::{NsfError, Result};
use crate::grid::{Grid, Topology, MAX_DIM};
use std::sync::Arc;

#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn constant(grid: Arc<Grid>, value: f64) -> ScalarField {
        let n = grid.node_count();
        ScalarField {
            grid,
            values: vec![value; n],
        }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64; MAX_DIM]) -> f64) -> ScalarField {
        let values = (0..grid.node_count())
            .map(|i| f(&grid.position(i)))
            .collect();
        ScalarField { grid, values }
    }

    pub fn from_values(grid: Arc<Grid>, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != grid.node_count() {
            return Err(NsfError::FieldMismatch(format!(
                "expected {} values, got {}",
                grid.node_count(),
                values.len()
            )));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn abs_max(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Discrete integral over the domain with half-cell wall weights.
    pub fn integral(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| v * self.grid.node_weight(i))
            .sum()
    }

    pub fn check_finite(&self, name: &str) -> Result<()> {
        for (i, v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(NsfError::NonFinite {
                    field: name.into(),
                    node: i,
                });
            }
        }
        Ok(())
    }

    pub fn check_positive(&self, name: &str) -> Result<()> {
        self.check_finite(name)?;
        for (i, v) in self.values.iter().enumerate() {
            if *v <= 0.0 {
                return Err(NsfError::NonPositive {
                    field: name.into(),
                    node: i,
                    value: *v,
                });
            }
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        debug_assert_eq!(self.values.len(), other.values.len());
        ScalarField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Multilinear interpolation at a physical point (wrapped/clamped into
    /// the domain by the caller via `Grid::locate`).
    pub fn interp(&self, x: &[f64; MAX_DIM]) -> f64 {
        interp_values(&self.grid, &self.values, x)
    }
}

pub(crate) fn interp_values(grid: &Grid, values: &[f64], x: &[f64; MAX_DIM]) -> f64 {
    let dim = grid.dim();
    let mut base = [0usize; MAX_DIM];
    let mut frac = [0.0f64; MAX_DIM];
    for a in 0..dim {
        let h = grid.spacing()[a];
        let n = grid.nodes_along(a);
        let t = x[a] / h;
        let mut j = t.floor() as isize;
        match grid.topology()[a] {
            Topology::Periodic => {
                j = j.rem_euclid(grid.counts()[a] as isize);
            }
            Topology::Walled => {
                j = j.clamp(0, n as isize - 2);
            }
        }
        base[a] = j as usize;
        frac[a] = (t - j as f64).clamp(0.0, 1.0);
    }
    let node = |iv: &[usize; MAX_DIM]| values[grid.idx(iv)];
    let neighbor = |iv: &[usize; MAX_DIM], a: usize| grid.shift(iv, a, 1).unwrap_or(*iv);
    if dim == 1 {
        let i0 = base;
        let i1 = neighbor(&i0, 0);
        node(&i0) * (1.0 - frac[0]) + node(&i1) * frac[0]
    } else {
        let i00 = base;
        let i10 = neighbor(&i00, 0);
        let i01 = neighbor(&i00, 1);
        let i11 = neighbor(&i10, 1);
        let (fx, fy) = (frac[0], frac[1]);
        node(&i00) * (1.0 - fx) * (1.0 - fy)
            + node(&i10) * fx * (1.0 - fy)
            + node(&i01) * (1.0 - fx) * fy
            + node(&i11) * fx * fy
    }
}

#[derive(Clone, Debug)]
pub struct VectorField {
    grid: Arc<Grid>,
    comps: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn zeros(grid: Arc<Grid>) -> VectorField {
        let n = grid.node_count();
        let d = grid.dim();
        VectorField {
            grid,
            comps: vec![vec![0.0; n]; d],
        }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64; MAX_DIM]) -> [f64; MAX_DIM]) -> VectorField {
        let n = grid.node_count();
        let d = grid.dim();
        let mut comps = vec![vec![0.0; n]; d];
        for i in 0..n {
            let v = f(&grid.position(i));
            for (a, comp) in comps.iter_mut().enumerate() {
                comp[i] = v[a];
            }
        }
        VectorField { grid, comps }
    }

    pub fn from_components(grid: Arc<Grid>, comps: Vec<Vec<f64>>) -> Result<VectorField> {
        if comps.len() != grid.dim() || comps.iter().any(|c| c.len() != grid.node_count()) {
            return Err(NsfError::FieldMismatch(
                "vector component shape does not match grid".into(),
            ));
        }
        Ok(VectorField { grid, comps })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn comp(&self, a: usize) -> &[f64] {
        &self.comps[a]
    }

    pub fn comp_mut(&mut self, a: usize) -> &mut [f64] {
        &mut self.comps[a]
    }

    pub fn comp_field(&self, a: usize) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.comps[a].clone(),
        }
    }

    pub fn at(&self, node: usize) -> [f64; MAX_DIM] {
        let mut v = [0.0; MAX_DIM];
        for a in 0..self.dim() {
            v[a] = self.comps[a][node];
        }
        v
    }

    pub fn magnitude(&self, node: usize) -> f64 {
        self.comps
            .iter()
            .map(|c| c[node] * c[node])
            .sum::<f64>()
            .sqrt()
    }

    pub fn abs_max(&self) -> f64 {
        (0..self.grid.node_count()).fold(0.0f64, |m, i| m.max(self.magnitude(i)))
    }

    pub fn check_finite(&self, name: &str) -> Result<()> {
        for c in &self.comps {
            for (i, v) in c.iter().enumerate() {
                if !v.is_finite() {
                    return Err(NsfError::NonFinite {
                        field: name.into(),
                        node: i,
                    });
                }
            }
        }
        Ok(())
    }

    /// Largest normal component over all walled faces; zero for a tangential
    /// (impermeable-wall) velocity trace.
    pub fn max_wall_normal(&self) -> f64 {
        let mut worst = 0.0f64;
        for face in self.grid.walled_faces() {
            for node in self.grid.face_nodes(face) {
                worst = worst.max(self.comps[face.axis][node].abs());
            }
        }
        worst
    }

    pub fn interp(&self, x: &[f64; MAX_DIM]) -> [f64; MAX_DIM] {
        let mut out = [0.0; MAX_DIM];
        for a in 0..self.dim() {
            out[a] = interp_values(&self.grid, &self.comps[a], x);
        }
        out
    }

    pub fn map(&self, f: impl Fn(usize, [f64; MAX_DIM]) -> [f64; MAX_DIM]) -> VectorField {
        let n = self.grid.node_count();
        let d = self.dim();
        let mut comps = vec![vec![0.0; n]; d];
        for i in 0..n {
            let v = f(i, self.at(i));
            for (a, comp) in comps.iter_mut().enumerate() {
                comp[i] = v[a];
            }
        }
        VectorField {
            grid: self.grid.clone(),
            comps,
        }
    }
}

/// Dense d-by-d tensor per node, row-major entries `(row, col)`.
#[derive(Clone, Debug)]
pub struct TensorField {
    grid: Arc<Grid>,
    comps: Vec<Vec<f64>>,
}

impl TensorField {
    pub fn zeros(grid: Arc<Grid>) -> TensorField {
        let n = grid.node_count();
        let d = grid.dim();
        TensorField {
            grid,
            comps: vec![vec![0.0; n]; d * d],
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn entry(&self, row: usize, col: usize) -> &[f64] {
        &self.comps[row * self.dim() + col]
    }

    pub fn entry_mut(&mut self, row: usize, col: usize) -> &mut [f64] {
        let d = self.dim();
        &mut self.comps[row * d + col]
    }

    pub fn at(&self, node: usize, row: usize, col: usize) -> f64 {
        self.comps[row * self.dim() + col][node]
    }

    /// Trace of the stored d-by-d block.
    pub fn trace(&self, node: usize) -> f64 {
        (0..self.dim()).map(|a| self.at(node, a, a)).sum()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..self.grid.node_count() {
            for r in 0..d {
                for c in (r + 1)..d {
                    worst = worst.max((self.at(i, r, c) - self.at(i, c, r)).abs());
                }
            }
        }
        worst
    }

    pub fn check_finite(&self, name: &str) -> Result<()> {
        for c in &self.comps {
            for (i, v) in c.iter().enumerate() {
                if !v.is_finite() {
                    return Err(NsfError::NonFinite {
                        field: name.into(),
                        node: i,
                    });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TempBc;

    pub(crate) fn unit_square(n: usize) -> Arc<Grid> {
        Arc::new(
            Grid::build(
                2,
                &[1.0, 1.0],
                &[n, n],
                &vec![[Some(TempBc::Dirichlet); 2]; 2],
                &[Topology::Walled, Topology::Walled],
                false,
            )
            .unwrap(),
        )
    }

    #[test]
    fn constant_field_integral_is_volume() {
        let g = unit_square(16);
        let f = ScalarField::constant(g, 3.0);
        assert!((f.integral() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn interp_reproduces_linear_fields() {
        let g = unit_square(16);
        let f = ScalarField::from_fn(g, |x| 2.0 * x[0] - 0.5 * x[1] + 1.0);
        let p = [0.337, 0.641, 0.0];
        let p2 = [p[0], p[1]];
        assert!((f.interp(&p2) - (2.0 * p[0] - 0.5 * p[1] + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn tangency_check_sees_normal_component() {
        let g = unit_square(8);
        let v = VectorField::from_fn(g, |_| [0.25, 0.0]);
        // x-component is normal on the x walls.
        assert!(v.max_wall_normal() > 0.2);
        let g2 = unit_square(8);
        let tangential =
            VectorField::from_fn(g2, |x| [x[0] * (1.0 - x[0]), x[1] * (1.0 - x[1])]);
        assert!(tangential.max_wall_normal() < 1e-14);
    }

    #[test]
    fn positivity_check_reports_node() {
        let g = unit_square(8);
        let mut f = ScalarField::constant(g, 1.0);
        f.values_mut()[5] = -0.5;
        let err = f.check_positive("rho").unwrap_err();
        assert!(err.to_string().contains("node 5"));
    }
}
