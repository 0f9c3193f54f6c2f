//! Uniform tensor-product grids on boxes, nodal fields and the central
//! difference stencils used by the solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SymMatrix;

pub const MIN_NODES_PER_AXIS: usize = 5;

/// Uniform grid on `[lo_0, hi_0] × … × [lo_{d-1}, hi_{d-1}]`, `d ∈ {2, 3}`.
///
/// Nodes are numbered row-major: the first axis varies slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridDef", into = "GridDef")]
pub struct Grid {
    lo: Vec<f64>,
    hi: Vec<f64>,
    nodes: Vec<usize>,
    h: Vec<f64>,
    strides: Vec<usize>,
}

/// Serialized form of a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDef {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub nodes: Vec<usize>,
}

impl TryFrom<GridDef> for Grid {
    type Error = Error;

    fn try_from(d: GridDef) -> Result<Self> {
        Grid::new(d.lo, d.hi, d.nodes)
    }
}

impl From<Grid> for GridDef {
    fn from(g: Grid) -> Self {
        GridDef {
            lo: g.lo,
            hi: g.hi,
            nodes: g.nodes,
        }
    }
}

impl Grid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, nodes: Vec<usize>) -> Result<Self> {
        let dim = nodes.len();
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidInput(format!("grid dimension {dim} not in {{2, 3}}")));
        }
        if lo.len() != dim || hi.len() != dim {
            return Err(Error::InvalidInput(format!(
                "grid extents have {} / {} entries for dimension {dim}",
                lo.len(),
                hi.len()
            )));
        }
        for a in 0..dim {
            if nodes[a] < MIN_NODES_PER_AXIS {
                return Err(Error::InvalidInput(format!(
                    "axis {a} has {} nodes, need at least {MIN_NODES_PER_AXIS}",
                    nodes[a]
                )));
            }
            if !(lo[a].is_finite() && hi[a].is_finite() && lo[a] < hi[a]) {
                return Err(Error::InvalidInput(format!(
                    "axis {a} extent [{}, {}] is not a finite increasing interval",
                    lo[a], hi[a]
                )));
            }
        }
        let total = nodes.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n));
        if total.is_none_or(|t| t > 1 << 26) {
            return Err(Error::InvalidInput("grid has too many nodes".into()));
        }
        let h = (0..dim)
            .map(|a| (hi[a] - lo[a]) / (nodes[a] - 1) as f64)
            .collect();
        let mut strides = vec![1; dim];
        for a in (0..dim - 1).rev() {
            strides[a] = strides[a + 1] * nodes[a + 1];
        }
        Ok(Grid {
            lo,
            hi,
            nodes,
            h,
            strides,
        })
    }

    /// Same number of nodes on every axis of the cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64, nodes: usize) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim], vec![nodes; dim])
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn spacing(&self) -> &[f64] {
        &self.h
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn multi_index(&self, node: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        let mut rest = node;
        for a in 0..self.dim() {
            idx[a] = rest / self.strides[a];
            rest %= self.strides[a];
        }
        idx
    }

    pub fn node_at(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        let idx = self.multi_index(node);
        (0..self.dim())
            .map(|a| self.lo[a] + idx[a] as f64 * self.h[a])
            .collect()
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        let idx = self.multi_index(node);
        (0..self.dim()).any(|a| idx[a] == 0 || idx[a] == self.nodes[a] - 1)
    }

    /// Interior node adjacent to the boundary (one layer in).
    pub fn is_boundary_adjacent(&self, node: usize) -> bool {
        let idx = self.multi_index(node);
        !self.is_boundary(node)
            && (0..self.dim()).any(|a| idx[a] == 1 || idx[a] == self.nodes[a] - 2)
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&n| !self.is_boundary(n)).collect()
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&n| self.is_boundary(n)).collect()
    }

    /// Distance from a node to the box boundary and the number of faces
    /// attaining it.
    pub fn boundary_distance(&self, node: usize) -> (f64, usize) {
        let x = self.coords(node);
        let mut best = f64::INFINITY;
        let mut ties = 0;
        for a in 0..self.dim() {
            for d in [x[a] - self.lo[a], self.hi[a] - x[a]] {
                if best.is_finite() && (d - best).abs() <= 1e-12 * (1.0 + best.abs()) {
                    ties += 1;
                } else if d < best {
                    best = d;
                    ties = 1;
                }
            }
        }
        (best.max(0.0), ties)
    }

    #[inline]
    fn offset(&self, node: usize, axis: usize, delta: isize) -> usize {
        (node as isize + delta * self.strides[axis] as isize) as usize
    }

    /// Central first difference `D_axis` at an interior node as
    /// `(node, weight)` pairs.
    pub fn first_difference_stencil(&self, node: usize, axis: usize) -> [(usize, f64); 2] {
        let w = 0.5 / self.h[axis];
        [(self.offset(node, axis, 1), w), (self.offset(node, axis, -1), -w)]
    }

    /// Second difference `D_ab` at an interior node: 3-point on the
    /// diagonal, 4-point cross stencil off it.
    pub fn second_difference_stencil(&self, node: usize, a: usize, b: usize) -> Vec<(usize, f64)> {
        if a == b {
            let w = 1.0 / (self.h[a] * self.h[a]);
            vec![
                (self.offset(node, a, 1), w),
                (node, -2.0 * w),
                (self.offset(node, a, -1), w),
            ]
        } else {
            let w = 0.25 / (self.h[a] * self.h[b]);
            let pp = self.offset(self.offset(node, a, 1), b, 1);
            let pm = self.offset(self.offset(node, a, 1), b, -1);
            let mp = self.offset(self.offset(node, a, -1), b, 1);
            let mm = self.offset(self.offset(node, a, -1), b, -1);
            vec![(pp, w), (pm, -w), (mp, -w), (mm, w)]
        }
    }
}

/// One value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("field value at node {i} is not finite")));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|n| f(&grid.coords(n))).collect();
        Self::new(grid.clone(), values)
    }

    pub fn constant(grid: &Grid, value: f64) -> Result<Self> {
        Self::new(grid.clone(), vec![value; grid.len()])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, node: usize) -> f64 {
        self.values[node]
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Gradient at any node: central differences, with one-sided
    /// second-order stencils along axes where the node sits on a face.
    pub fn gradient_at(&self, node: usize) -> Vec<f64> {
        let g = &self.grid;
        let idx = g.multi_index(node);
        let u = &self.values;
        (0..g.dim())
            .map(|a| {
                let h = g.h[a];
                let last = g.nodes[a] - 1;
                if idx[a] == 0 {
                    let n1 = g.offset(node, a, 1);
                    let n2 = g.offset(node, a, 2);
                    (-3.0 * u[node] + 4.0 * u[n1] - u[n2]) / (2.0 * h)
                } else if idx[a] == last {
                    let n1 = g.offset(node, a, -1);
                    let n2 = g.offset(node, a, -2);
                    (3.0 * u[node] - 4.0 * u[n1] + u[n2]) / (2.0 * h)
                } else {
                    g.first_difference_stencil(node, a)
                        .iter()
                        .map(|&(m, w)| w * u[m])
                        .sum()
                }
            })
            .collect()
    }

    /// Hessian at an interior node; `None` on the boundary.
    pub fn hessian_at(&self, node: usize) -> Option<SymMatrix> {
        let g = &self.grid;
        if g.is_boundary(node) {
            return None;
        }
        let u = &self.values;
        Some(SymMatrix::from_fn(g.dim(), |a, b| {
            g.second_difference_stencil(node, a, b)
                .iter()
                .map(|&(m, w)| w * u[m])
                .sum()
        }))
    }
}

/// Gradient field (one vector per node).
pub fn gradient_fd(u: &ScalarField) -> Vec<Vec<f64>> {
    (0..u.grid.len()).map(|n| u.gradient_at(n)).collect()
}

/// Hessian field; boundary nodes carry `None`.
pub fn hessian_fd(u: &ScalarField) -> Vec<Option<SymMatrix>> {
    (0..u.grid.len()).map(|n| u.hessian_at(n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square(n: usize) -> Grid {
        Grid::cube(2, 0.0, 1.0, n).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::cube(2, 0.0, 1.0, 4).is_err());
        assert!(Grid::cube(1, 0.0, 1.0, 9).is_err());
        assert!(Grid::cube(4, 0.0, 1.0, 9).is_err());
        assert!(Grid::new(vec![0.0, 1.0], vec![1.0, 1.0], vec![5, 5]).is_err());
        let g = Grid::new(vec![0.0, -1.0, 2.0], vec![1.0, 1.0, 3.0], vec![5, 6, 7]).unwrap();
        assert_eq!(g.len(), 210);
        let n = g.node_at(&[2, 3, 4]);
        assert_eq!(g.multi_index(n), [2, 3, 4]);
        let x = g.coords(n);
        assert!((x[0] - 0.5).abs() < 1e-15 && (x[1] - 0.2).abs() < 1e-15);
        assert_eq!(g.interior_nodes().len(), 3 * 4 * 5);
    }

    #[test]
    fn constant_has_zero_gradient() {
        let g = unit_square(7);
        let u = ScalarField::constant(&g, 3.5).unwrap();
        for v in gradient_fd(&u) {
            assert!(v.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn linear_gradient_is_exact_everywhere() {
        let g = unit_square(9);
        let u = ScalarField::from_fn(&g, |x| x[0]).unwrap();
        for v in gradient_fd(&u) {
            assert!((v[0] - 1.0).abs() < 1e-13 && v[1].abs() < 1e-13);
        }
    }

    #[test]
    fn quadratic_gradient_is_exact() {
        let g = unit_square(9);
        let u = ScalarField::from_fn(&g, |x| x[0] * x[0]).unwrap();
        let mid = g.node_at(&[4, 4]);
        let v = u.gradient_at(mid);
        assert!((v[0] - 1.0).abs() < 1e-13 && v[1].abs() < 1e-13);
        // one-sided stencils are exact on quadratics too
        for n in g.boundary_nodes() {
            let x = g.coords(n);
            let v = u.gradient_at(n);
            assert!((v[0] - 2.0 * x[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_hessians_are_exact() {
        let g = Grid::cube(3, -1.0, 1.0, 7).unwrap();
        let u = ScalarField::from_fn(&g, |x| 0.5 * x.iter().map(|v| v * v).sum::<f64>()).unwrap();
        for h in hessian_fd(&u).into_iter().flatten() {
            assert!(h.minus(&SymMatrix::identity(3)).max_abs() < 1e-12);
        }
        let g = unit_square(7);
        let u = ScalarField::from_fn(&g, |x| x[0] * x[1]).unwrap();
        for h in hessian_fd(&u).into_iter().flatten() {
            assert!(h.get(0, 0).abs() < 1e-12 && h.get(1, 1).abs() < 1e-12);
            assert!((h.get(0, 1) - 1.0).abs() < 1e-12);
        }
        assert!(u.hessian_at(0).is_none());
    }

    #[test]
    fn hessian_is_second_order() {
        // error of D_00 sin(x_0) at x_0 = 0.5 on grids of spacing h and h/2
        let err = |n: usize| {
            let g = Grid::cube(2, 0.0, 1.0, n).unwrap();
            let u = ScalarField::from_fn(&g, |x| x[0].sin()).unwrap();
            let node = g.node_at(&[(n - 1) / 2, (n - 1) / 2]);
            (u.hessian_at(node).unwrap().get(0, 0) + 0.5f64.sin()).abs()
        };
        let ratio = err(9) / err(17);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
        let ratio = err(17) / err(33);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn boundary_distance_counts_ties() {
        let g = unit_square(5);
        let (d, ties) = g.boundary_distance(g.node_at(&[1, 2]));
        assert!((d - 0.25).abs() < 1e-15);
        assert_eq!(ties, 1);
        let (_, ties) = g.boundary_distance(g.node_at(&[1, 1]));
        assert_eq!(ties, 2);
        assert!(g.is_boundary_adjacent(g.node_at(&[1, 2])));
        assert!(!g.is_boundary_adjacent(g.node_at(&[2, 2])));
    }

    #[test]
    fn field_rejects_bad_values() {
        let g = unit_square(5);
        assert!(ScalarField::new(g.clone(), vec![0.0; 24]).is_err());
        let mut v = vec![0.0; 25];
        v[7] = f64::NAN;
        assert!(ScalarField::new(g, v).is_err());
    }
}
