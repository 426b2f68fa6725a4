//! Second-order discrete differential operators on collocated fields.
//!
//! First derivatives are centered in the interior and one-sided
//! (three-point, second-order) at walls; periodic axes wrap. The Laplacian
//! uses the compact stencil with ghost values supplied by a boundary
//! closure: Dirichlet ghosts extrapolate quadratically through the wall
//! value, Neumann ghosts match the prescribed outward normal derivative.

use crate::error::{NsfError, Result};
use crate::field::{ScalarField, TensorField, VectorField};
use crate::grid::{Face, Grid, Side, Topology};

/// Ghost-value rule for one walled face.
#[derive(Clone, Debug)]
pub enum FaceClosure {
    /// The field's own wall values are the boundary data.
    Dirichlet,
    /// Prescribed outward normal derivative, one value per face node in
    /// `Grid::face_nodes` order.
    NeumannFlux(Vec<f64>),
}

/// Per-face closure set for the compact Laplacian.
#[derive(Clone, Debug, Default)]
pub struct BoundaryClosure {
    faces: Vec<(Face, FaceClosure)>,
}

impl BoundaryClosure {
    pub fn new() -> BoundaryClosure {
        BoundaryClosure::default()
    }

    pub fn with(mut self, face: Face, closure: FaceClosure) -> BoundaryClosure {
        self.faces.push((face, closure));
        self
    }

    pub fn all_dirichlet(grid: &Grid) -> BoundaryClosure {
        let mut c = BoundaryClosure::new();
        for f in grid.walled_faces() {
            c = c.with(f, FaceClosure::Dirichlet);
        }
        c
    }

    fn get(&self, face: Face) -> Option<&FaceClosure> {
        self.faces
            .iter()
            .find(|(f, _)| *f == face)
            .map(|(_, c)| c)
    }
}

/// Single-axis first derivative of raw node values.
pub(crate) fn deriv_values(grid: &Grid, values: &[f64], axis: usize) -> Vec<f64> {
    let n = grid.node_count();
    let mut out = vec![0.0; n];
    let h = grid.spacing()[axis];
    let count = grid.nodes_along(axis);
    let last = count - 1;
    // Row-major with the first axis fastest: the stride along `axis` is the
    // product of the faster axes' node counts.
    let stride: usize = (0..axis).map(|a| grid.nodes_along(a)).product();
    let wrap = last * stride;
    let periodic = grid.topology()[axis] == Topology::Periodic;
    for i in 0..n {
        let j = (i / stride) % count;
        out[i] = if periodic {
            let p = if j == last { i - wrap } else { i + stride };
            let m = if j == 0 { i + wrap } else { i - stride };
            (values[p] - values[m]) / (2.0 * h)
        } else if j == 0 {
            (-3.0 * values[i] + 4.0 * values[i + stride] - values[i + 2 * stride]) / (2.0 * h)
        } else if j == last {
            (3.0 * values[i] - 4.0 * values[i - stride] + values[i - 2 * stride]) / (2.0 * h)
        } else {
            (values[i + stride] - values[i - stride]) / (2.0 * h)
        };
    }
    out
}

pub fn deriv(f: &ScalarField, axis: usize) -> ScalarField {
    let vals = deriv_values(f.grid(), f.values(), axis);
    ScalarField::from_values(f.grid().clone(), vals).expect("shape preserved")
}

/// Gradient realized componentwise from `deriv`.
pub fn grad(f: &ScalarField) -> VectorField {
    let grid = f.grid().clone();
    let comps = (0..grid.dim())
        .map(|a| deriv_values(&grid, f.values(), a))
        .collect();
    VectorField::from_components(grid, comps).expect("shape preserved")
}

/// Divergence as the componentwise sum of first derivatives.
pub fn div(v: &VectorField) -> ScalarField {
    let grid = v.grid().clone();
    let n = grid.node_count();
    let mut out = vec![0.0; n];
    for a in 0..grid.dim() {
        let d = deriv_values(&grid, v.comp(a), a);
        for i in 0..n {
            out[i] += d[i];
        }
    }
    ScalarField::from_values(grid, out).expect("shape preserved")
}

/// Full velocity gradient, entry `(row, col)` holding the col-derivative of
/// the row component.
pub fn grad_vector(v: &VectorField) -> TensorField {
    let grid = v.grid().clone();
    let d = grid.dim();
    let mut out = TensorField::zeros(grid.clone());
    for row in 0..d {
        for col in 0..d {
            let dv = deriv_values(&grid, v.comp(row), col);
            out.entry_mut(row, col).copy_from_slice(&dv);
        }
    }
    out
}

/// Row-wise divergence of a tensor field: out_r = sum_c d(T_rc)/dx_c.
pub fn div_tensor(t: &TensorField) -> VectorField {
    let grid = t.grid().clone();
    let d = grid.dim();
    let n = grid.node_count();
    let mut comps = vec![vec![0.0; n]; d];
    for (row, out) in comps.iter_mut().enumerate() {
        for col in 0..d {
            let dv = deriv_values(&grid, t.entry(row, col), col);
            for i in 0..n {
                out[i] += dv[i];
            }
        }
    }
    VectorField::from_components(grid, comps).expect("shape preserved")
}

/// Symmetric part of the velocity gradient.
pub fn sym_grad(v: &VectorField) -> TensorField {
    let g = grad_vector(v);
    let d = g.dim();
    let n = v.grid().node_count();
    let mut out = TensorField::zeros(v.grid().clone());
    for row in 0..d {
        for col in 0..d {
            let e = out.entry_mut(row, col);
            for i in 0..n {
                e[i] = 0.5 * (g.at(i, row, col) + g.at(i, col, row));
            }
        }
    }
    out
}

/// Compact second-derivative Laplacian with ghost closures at walls.
pub fn laplacian(f: &ScalarField, closure: &BoundaryClosure) -> Result<ScalarField> {
    let grid = f.grid().clone();
    let n = grid.node_count();
    let values = f.values();
    let mut out = vec![0.0; n];

    // Resolve closures up front so a missing face fails regardless of data.
    let mut face_closures = Vec::new();
    for face in grid.walled_faces() {
        let c = closure
            .get(face)
            .ok_or_else(|| NsfError::MissingClosure(face.to_string()))?;
        if let FaceClosure::NeumannFlux(flux) = c {
            if flux.len() != grid.face_nodes(face).len() {
                return Err(NsfError::FieldMismatch(format!(
                    "Neumann closure on {} has {} entries, expected {}",
                    face,
                    flux.len(),
                    grid.face_nodes(face).len()
                )));
            }
        }
        face_closures.push((face, c.clone()));
    }
    let ghost = |face: Face, i: usize, iv: &[usize; 2]| -> f64 {
        let inward: isize = match face.side {
            Side::Minus => 1,
            Side::Plus => -1,
        };
        let f1 = values[grid.idx(&grid.shift(iv, face.axis, inward).unwrap())];
        let c = face_closures
            .iter()
            .find(|(fc, _)| *fc == face)
            .map(|(_, c)| c)
            .unwrap();
        match c {
            FaceClosure::Dirichlet => {
                let f2 = values[grid.idx(&grid.shift(iv, face.axis, 2 * inward).unwrap())];
                3.0 * values[i] - 3.0 * f1 + f2
            }
            FaceClosure::NeumannFlux(flux) => {
                let pos = grid
                    .face_nodes(face)
                    .iter()
                    .position(|&k| k == i)
                    .expect("node lies on face");
                f1 + 2.0 * grid.spacing()[face.axis] * flux[pos]
            }
        }
    };

    for i in 0..n {
        let iv = grid.multi(i);
        let mut acc = 0.0;
        for axis in 0..grid.dim() {
            let h = grid.spacing()[axis];
            let last = grid.nodes_along(axis) - 1;
            let (fm, fp) = match grid.topology()[axis] {
                Topology::Periodic => (
                    values[grid.idx(&grid.shift(&iv, axis, -1).unwrap())],
                    values[grid.idx(&grid.shift(&iv, axis, 1).unwrap())],
                ),
                Topology::Walled => {
                    let j = iv[axis];
                    if j == 0 {
                        let face = Face {
                            axis,
                            side: Side::Minus,
                        };
                        (
                            ghost(face, i, &iv),
                            values[grid.idx(&grid.shift(&iv, axis, 1).unwrap())],
                        )
                    } else if j == last {
                        let face = Face {
                            axis,
                            side: Side::Plus,
                        };
                        (
                            values[grid.idx(&grid.shift(&iv, axis, -1).unwrap())],
                            ghost(face, i, &iv),
                        )
                    } else {
                        (
                            values[grid.idx(&grid.shift(&iv, axis, -1).unwrap())],
                            values[grid.idx(&grid.shift(&iv, axis, 1).unwrap())],
                        )
                    }
                }
            };
            acc += (fp - 2.0 * values[i] + fm) / (h * h);
        }
        out[i] = acc;
    }
    ScalarField::from_values(grid, out)
}
