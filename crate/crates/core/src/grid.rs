//! Uniform rectangular grids in one or two dimensions.
//!
//! Nodes are vertex-centered: a walled axis with `n` cells carries `n + 1`
//! nodes including both wall nodes, a periodic axis carries `n` nodes.
//! Boundary integrals and discrete volume integrals use half-cell weights at
//! wall nodes so that quadrature is exact for piecewise-linear fields.

use crate::error::{NsfError, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

pub const MAX_DIM: usize = 2;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Walled,
    Periodic,
}

/// Temperature condition carried by a walled face: either a prescribed trace
/// (Dirichlet) or a prescribed normal heat flux (Neumann).
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TempBc {
    Dirichlet,
    Neumann,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Side {
    Minus,
    Plus,
}

impl Side {
    pub fn index(self) -> usize {
        match self {
            Side::Minus => 0,
            Side::Plus => 1,
        }
    }

    /// Sign of the outward normal component along the face axis.
    pub fn normal_sign(self) -> f64 {
        match self {
            Side::Minus => -1.0,
            Side::Plus => 1.0,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Face {
    pub axis: usize,
    pub side: Side,
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let axis = ["x", "y"][self.axis];
        let side = match self.side {
            Side::Minus => "minus",
            Side::Plus => "plus",
        };
        write!(f, "{axis}_{side}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    extents: Vec<f64>,
    counts: Vec<usize>,
    spacing: Vec<f64>,
    topology: Vec<Topology>,
    /// Per axis, per side; `None` on periodic axes.
    temp_bc: Vec<[Option<TempBc>; 2]>,
    /// Nodes per axis.
    nodes: Vec<usize>,
    /// Set when the configuration declares a vanishing boundary heat flux,
    /// which is the admissible alternative to a nonempty Dirichlet part.
    zero_flux_declared: bool,
}

impl Grid {
    /// Validates and builds a grid.
    ///
    /// `boundary_map[axis][side]` must be `Some` exactly on walled faces.
    /// `zero_flux_declared` asserts q_B = 0 and is required whenever no
    /// Dirichlet temperature face exists.
    pub fn build(
        dim: usize,
        extents: &[f64],
        counts: &[usize],
        boundary_map: &[[Option<TempBc>; 2]],
        topology: &[Topology],
        zero_flux_declared: bool,
    ) -> Result<Grid> {
        if dim == 0 || dim > MAX_DIM {
            return Err(NsfError::InvalidGrid(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        for arr in [extents.len(), counts.len(), topology.len(), boundary_map.len()] {
            if arr != dim {
                return Err(NsfError::InvalidGrid(format!(
                    "expected {dim} entries per axis, got {arr}"
                )));
            }
        }
        for (axis, &l) in extents.iter().enumerate() {
            if !(l > 0.0) || !l.is_finite() {
                return Err(NsfError::InvalidGrid(format!(
                    "extent along axis {axis} must be positive, got {l}"
                )));
            }
        }
        for (axis, &n) in counts.iter().enumerate() {
            if n < 8 {
                return Err(NsfError::InvalidGrid(format!(
                    "cell count along axis {axis} must be at least 8, got {n}"
                )));
            }
        }
        let mut temp_bc = vec![[None; 2]; dim];
        let mut has_dirichlet = false;
        for axis in 0..dim {
            match topology[axis] {
                Topology::Walled => {
                    for side in 0..2 {
                        match boundary_map[axis][side] {
                            Some(tag) => {
                                temp_bc[axis][side] = Some(tag);
                                if tag == TempBc::Dirichlet {
                                    has_dirichlet = true;
                                }
                            }
                            None => {
                                return Err(NsfError::InvalidGrid(format!(
                                    "walled face {} lacks a temperature tag",
                                    Face {
                                        axis,
                                        side: if side == 0 { Side::Minus } else { Side::Plus }
                                    }
                                )));
                            }
                        }
                    }
                }
                Topology::Periodic => {
                    if boundary_map[axis][0].is_some() || boundary_map[axis][1].is_some() {
                        return Err(NsfError::InvalidGrid(format!(
                            "periodic axis {axis} must not carry temperature tags"
                        )));
                    }
                }
            }
        }
        if !has_dirichlet && !zero_flux_declared {
            return Err(NsfError::InvalidGrid(
                "no Dirichlet temperature face exists and the boundary heat flux \
                 was not declared to vanish"
                    .into(),
            ));
        }
        let spacing: Vec<f64> = (0..dim).map(|a| extents[a] / counts[a] as f64).collect();
        let nodes: Vec<usize> = (0..dim)
            .map(|a| match topology[a] {
                Topology::Walled => counts[a] + 1,
                Topology::Periodic => counts[a],
            })
            .collect();
        Ok(Grid {
            dim,
            extents: extents.to_vec(),
            counts: counts.to_vec(),
            spacing,
            topology: topology.to_vec(),
            temp_bc,
            nodes,
            zero_flux_declared,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn topology(&self) -> &[Topology] {
        &self.topology
    }

    pub fn zero_flux_declared(&self) -> bool {
        self.zero_flux_declared
    }

    pub fn nodes_along(&self, axis: usize) -> usize {
        self.nodes[axis]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.iter().product()
    }

    /// Row-major linear index, x fastest.
    pub fn idx(&self, iv: &[usize]) -> usize {
        match self.dim {
            1 => iv[0],
            _ => iv[0] + iv[1] * self.nodes[0],
        }
    }

    pub fn multi(&self, idx: usize) -> [usize; MAX_DIM] {
        match self.dim {
            1 => [idx, 0],
            _ => [idx % self.nodes[0], idx / self.nodes[0]],
        }
    }

    pub fn coord(&self, axis: usize, j: usize) -> f64 {
        j as f64 * self.spacing[axis]
    }

    pub fn position(&self, idx: usize) -> [f64; MAX_DIM] {
        let iv = self.multi(idx);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim {
            x[a] = self.coord(a, iv[a]);
        }
        x
    }

    /// Quadrature weight of a node: product of per-axis widths with half
    /// cells at wall nodes.
    pub fn node_weight(&self, idx: usize) -> f64 {
        let iv = self.multi(idx);
        let mut w = 1.0;
        for a in 0..self.dim {
            w *= self.axis_weight(a, iv[a]);
        }
        w
    }

    pub fn axis_weight(&self, axis: usize, j: usize) -> f64 {
        let h = self.spacing[axis];
        match self.topology[axis] {
            Topology::Periodic => h,
            Topology::Walled => {
                if j == 0 || j == self.nodes[axis] - 1 {
                    0.5 * h
                } else {
                    h
                }
            }
        }
    }

    pub fn domain_volume(&self) -> f64 {
        self.extents[..self.dim].iter().product()
    }

    /// All walled faces, in deterministic order.
    pub fn walled_faces(&self) -> Vec<Face> {
        let mut out = Vec::new();
        for axis in 0..self.dim {
            if self.topology[axis] == Topology::Walled {
                out.push(Face {
                    axis,
                    side: Side::Minus,
                });
                out.push(Face {
                    axis,
                    side: Side::Plus,
                });
            }
        }
        out
    }

    pub fn temp_bc(&self, face: Face) -> Option<TempBc> {
        self.temp_bc[face.axis][face.side.index()]
    }

    pub fn dirichlet_faces(&self) -> Vec<Face> {
        self.walled_faces()
            .into_iter()
            .filter(|f| self.temp_bc(*f) == Some(TempBc::Dirichlet))
            .collect()
    }

    pub fn neumann_faces(&self) -> Vec<Face> {
        self.walled_faces()
            .into_iter()
            .filter(|f| self.temp_bc(*f) == Some(TempBc::Neumann))
            .collect()
    }

    pub fn gamma_d_is_empty(&self) -> bool {
        self.dirichlet_faces().is_empty()
    }

    pub fn is_on_face(&self, idx: usize, face: Face) -> bool {
        if self.topology[face.axis] != Topology::Walled {
            return false;
        }
        let iv = self.multi(idx);
        match face.side {
            Side::Minus => iv[face.axis] == 0,
            Side::Plus => iv[face.axis] == self.nodes[face.axis] - 1,
        }
    }

    pub fn is_wall_node(&self, idx: usize) -> bool {
        self.walled_faces().iter().any(|f| self.is_on_face(idx, *f))
    }

    /// Linear indices of all nodes on a walled face.
    pub fn face_nodes(&self, face: Face) -> Vec<usize> {
        assert_eq!(self.topology[face.axis], Topology::Walled);
        let fixed = match face.side {
            Side::Minus => 0,
            Side::Plus => self.nodes[face.axis] - 1,
        };
        let mut out = Vec::new();
        if self.dim == 1 {
            out.push(fixed);
        } else {
            let other = 1 - face.axis;
            for j in 0..self.nodes[other] {
                let mut iv = [0usize; MAX_DIM];
                iv[face.axis] = fixed;
                iv[other] = j;
                out.push(self.idx(&iv));
            }
        }
        out
    }

    /// Boundary quadrature weight of a face node (length of its wall segment
    /// in 2D, 1 in 1D).
    pub fn face_node_weight(&self, face: Face, idx: usize) -> f64 {
        if self.dim == 1 {
            1.0
        } else {
            let other = 1 - face.axis;
            let iv = self.multi(idx);
            self.axis_weight(other, iv[other])
        }
    }

    /// Neighbor of `iv` shifted by `off` along `axis`; wraps on periodic
    /// axes, returns `None` past a wall.
    pub fn shift(&self, iv: &[usize; MAX_DIM], axis: usize, off: isize) -> Option<[usize; MAX_DIM]> {
        let n = self.nodes[axis] as isize;
        let j = iv[axis] as isize + off;
        let mut out = *iv;
        match self.topology[axis] {
            Topology::Periodic => {
                out[axis] = j.rem_euclid(n) as usize;
                Some(out)
            }
            Topology::Walled => {
                if j < 0 || j >= n {
                    None
                } else {
                    out[axis] = j as usize;
                    Some(out)
                }
            }
        }
    }

    /// Wraps a physical coordinate into the fundamental domain on periodic
    /// axes and clamps it to the closure on walled axes. Returns `None` when
    /// a walled coordinate lies farther than `slack` outside the domain.
    pub fn locate(&self, x: &[f64; MAX_DIM], slack: f64) -> Option<[f64; MAX_DIM]> {
        let mut out = *x;
        for a in 0..self.dim {
            let l = self.extents[a];
            match self.topology[a] {
                Topology::Periodic => {
                    out[a] = out[a].rem_euclid(l);
                }
                Topology::Walled => {
                    if out[a] < -slack || out[a] > l + slack {
                        return None;
                    }
                    out[a] = out[a].clamp(0.0, l);
                }
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_dirichlet(dim: usize) -> Vec<[Option<TempBc>; 2]> {
        vec![[Some(TempBc::Dirichlet); 2]; dim]
    }

    #[test]
    fn builds_1d_grid_with_expected_spacing() {
        let g = Grid::build(
            1,
            &[1.0],
            &[64],
            &all_dirichlet(1),
            &[Topology::Walled],
            false,
        )
        .unwrap();
        assert_eq!(g.spacing()[0], 1.0 / 64.0);
        assert_eq!(g.node_count(), 65);
    }

    #[test]
    fn accepts_all_neumann_with_declared_zero_flux() {
        let bm = vec![[Some(TempBc::Neumann); 2]; 2];
        let g = Grid::build(
            2,
            &[1.0, 1.0],
            &[8, 8],
            &bm,
            &[Topology::Walled, Topology::Walled],
            true,
        );
        assert!(g.is_ok());
    }

    #[test]
    fn rejects_all_neumann_with_nonzero_flux() {
        let bm = vec![[Some(TempBc::Neumann); 2]; 2];
        let g = Grid::build(
            2,
            &[1.0, 1.0],
            &[8, 8],
            &bm,
            &[Topology::Walled, Topology::Walled],
            false,
        );
        assert!(g.is_err());
    }

    #[test]
    fn rejects_untagged_walled_face() {
        let bm = vec![[Some(TempBc::Dirichlet), None]];
        let g = Grid::build(1, &[1.0], &[16], &bm, &[Topology::Walled], false);
        assert!(g.is_err());
    }

    #[test]
    fn rejects_small_counts_and_bad_extents() {
        assert!(Grid::build(1, &[1.0], &[4], &all_dirichlet(1), &[Topology::Walled], false).is_err());
        assert!(Grid::build(1, &[-1.0], &[16], &all_dirichlet(1), &[Topology::Walled], false).is_err());
    }

    #[test]
    fn node_weights_sum_to_domain_volume() {
        for topo in [Topology::Walled, Topology::Periodic] {
            let bm = match topo {
                Topology::Walled => vec![[Some(TempBc::Dirichlet); 2]; 2],
                Topology::Periodic => vec![[None; 2]; 2],
            };
            let g = Grid::build(2, &[2.0, 3.0], &[16, 8], &bm, &[topo, topo], true).unwrap();
            let total: f64 = (0..g.node_count()).map(|i| g.node_weight(i)).sum();
            assert!((total - 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn periodic_shift_wraps() {
        let g = Grid::build(1, &[1.0], &[8], &vec![[None; 2]], &[Topology::Periodic], true).unwrap();
        assert_eq!(g.shift(&[0, 0], 0, -1), Some([7, 0]));
        assert_eq!(g.shift(&[7, 0], 0, 1), Some([0, 0]));
    }

    #[test]
    fn face_nodes_cover_the_wall() {
        let g = Grid::build(
            2,
            &[1.0, 1.0],
            &[8, 8],
            &all_dirichlet(2),
            &[Topology::Walled, Topology::Walled],
            false,
        )
        .unwrap();
        let f = Face {
            axis: 1,
            side: Side::Minus,
        };
        let nodes = g.face_nodes(f);
        assert_eq!(nodes.len(), 9);
        for &n in &nodes {
            assert!(g.is_on_face(n, f));
        }
        let wall_len: f64 = nodes.iter().map(|&n| g.face_node_weight(f, n)).sum();
        assert!((wall_len - 1.0).abs() < 1e-12);
    }
}
