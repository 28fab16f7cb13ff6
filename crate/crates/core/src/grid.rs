//! Computational domain and the fields that live on it.
//!
//! Two kinds of grid are supported: a partition of an interval (P1 segments)
//! and a structured lattice on a rectangle where every quad is split into two
//! triangles. Trial functions are continuous piecewise-linear, so gradients are
//! constant on each cell.

use std::ops::{Deref, DerefMut};

use serde::Serialize;

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Dim {
    One,
    Two,
}

/// Geometry the grid was built from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Shape {
    Interval { a: f64, b: f64, cells: usize },
    Rectangle { lx: f64, ly: f64, nx: usize, ny: usize },
}

/// One simplex: a segment (2 nodes) or a triangle (3 nodes).
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    nodes: [usize; 3],
    len: usize,
    measure: f64,
    /// Gradient of each local hat function on this cell.
    grads: [[f64; 2]; 3],
    midpoint: [f64; 2],
}

impl Cell {
    pub fn nodes(&self) -> &[usize] {
        &self.nodes[..self.len]
    }

    pub fn measure(&self) -> f64 {
        self.measure
    }

    pub fn basis_gradients(&self) -> &[[f64; 2]] {
        &self.grads[..self.len]
    }

    pub fn midpoint(&self) -> [f64; 2] {
        self.midpoint
    }

    /// Gradient of the interpolant of nodal `values` on this cell.
    pub fn gradient(&self, values: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (k, &n) in self.nodes().iter().enumerate() {
            g[0] += values[n] * self.grads[k][0];
            g[1] += values[n] * self.grads[k][1];
        }
        g
    }

    /// Mean of the nodal `values` over the cell's vertices.
    pub fn average(&self, values: &[f64]) -> f64 {
        self.nodes().iter().map(|&n| values[n]).sum::<f64>() / self.len as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: Dim,
    shape: Shape,
    coords: Vec<[f64; 2]>,
    boundary: Vec<bool>,
    cells: Vec<Cell>,
    node_weights: Vec<f64>,
    dof_of_node: Vec<Option<usize>>,
    interior: Vec<usize>,
    bandwidth: usize,
}

impl Grid {
    /// Uniform partition of `[a, b]` into `cells` segments.
    pub fn interval(a: f64, b: f64, cells: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::Parameter(format!("interval endpoints must satisfy a < b, got [{a}, {b}]")));
        }
        if cells < 2 {
            return Err(Error::Parameter(format!("an interval needs at least 2 cells, got {cells}")));
        }
        let h = (b - a) / cells as f64;
        let mut xs: Vec<f64> = (0..=cells).map(|i| a + h * i as f64).collect();
        xs[cells] = b;
        Self::interval_from_nodes(xs)
    }

    /// Interval partition with arbitrary strictly increasing node positions.
    pub fn interval_from_nodes(xs: Vec<f64>) -> Result<Self> {
        if xs.len() < 3 {
            return Err(Error::Parameter("an interval grid needs at least 3 nodes".into()));
        }
        if xs.iter().any(|x| !x.is_finite()) || xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter("node coordinates must be finite and strictly increasing".into()));
        }
        let n = xs.len();
        let coords: Vec<[f64; 2]> = xs.iter().map(|&x| [x, 0.0]).collect();
        let cells = xs
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let len = w[1] - w[0];
                Cell {
                    nodes: [i, i + 1, usize::MAX],
                    len: 2,
                    measure: len,
                    grads: [[-1.0 / len, 0.0], [1.0 / len, 0.0], [0.0; 2]],
                    midpoint: [0.5 * (w[0] + w[1]), 0.0],
                }
            })
            .collect();
        let mut boundary = vec![false; n];
        boundary[0] = true;
        boundary[n - 1] = true;
        let shape = Shape::Interval { a: xs[0], b: xs[n - 1], cells: n - 1 };
        Ok(Self::finish(Dim::One, shape, coords, boundary, cells))
    }

    /// Rectangle `[0, lx] x [0, ly]` with `nx x ny` quads, each split into two
    /// triangles along the diagonal from its lower-left to upper-right corner.
    pub fn rectangle(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(lx.is_finite() && ly.is_finite() && lx > 0.0 && ly > 0.0) {
            return Err(Error::Parameter(format!("rectangle extents must be positive, got {lx} x {ly}")));
        }
        if nx < 2 || ny < 2 {
            return Err(Error::Parameter(format!("a rectangle needs at least 2 x 2 quads, got {nx} x {ny}")));
        }
        let hx = lx / nx as f64;
        let hy = ly / ny as f64;
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut coords = Vec::with_capacity((nx + 1) * (ny + 1));
        let mut boundary = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                let x = if i == nx { lx } else { hx * i as f64 };
                let y = if j == ny { ly } else { hy * j as f64 };
                coords.push([x, y]);
                boundary.push(i == 0 || j == 0 || i == nx || j == ny);
            }
        }
        let mut cells = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                cells.push(triangle([a, b, c], &coords));
                cells.push(triangle([a, c, d], &coords));
            }
        }
        let shape = Shape::Rectangle { lx, ly, nx, ny };
        Ok(Self::finish(Dim::Two, shape, coords, boundary, cells))
    }

    fn finish(dim: Dim, shape: Shape, coords: Vec<[f64; 2]>, boundary: Vec<bool>, cells: Vec<Cell>) -> Self {
        let n = coords.len();
        let mut node_weights = vec![0.0; n];
        for c in &cells {
            let share = c.measure / c.len as f64;
            for &v in c.nodes() {
                node_weights[v] += share;
            }
        }
        let mut dof_of_node = vec![None; n];
        let mut interior = Vec::new();
        for (v, &on_boundary) in boundary.iter().enumerate() {
            if !on_boundary {
                dof_of_node[v] = Some(interior.len());
                interior.push(v);
            }
        }
        let mut bandwidth = 0;
        for c in &cells {
            for &a in c.nodes() {
                for &b in c.nodes() {
                    if let (Some(da), Some(db)) = (dof_of_node[a], dof_of_node[b]) {
                        bandwidth = bandwidth.max(da.abs_diff(db));
                    }
                }
            }
        }
        Self { dim, shape, coords, boundary, cells, node_weights, dof_of_node, interior, bandwidth }
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    /// Lumped quadrature weight of each node: adjacent cell measures divided by
    /// the number of nodes per cell.
    pub fn node_weights(&self) -> &[f64] {
        &self.node_weights
    }

    /// Interior nodes in degree-of-freedom order.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    pub fn dof(&self, node: usize) -> Option<usize> {
        self.dof_of_node[node]
    }

    pub(crate) fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn measure(&self) -> f64 {
        self.cells.iter().map(|c| c.measure).sum()
    }

    /// Axis-aligned bounding box `[[xmin, ymin], [xmax, ymax]]`.
    pub fn bounds(&self) -> [[f64; 2]; 2] {
        match self.shape {
            Shape::Interval { a, b, .. } => [[a, 0.0], [b, 0.0]],
            Shape::Rectangle { lx, ly, .. } => [[0.0, 0.0], [lx, ly]],
        }
    }

    pub fn cell_midpoints(&self) -> Vec<[f64; 2]> {
        self.cells.iter().map(|c| c.midpoint).collect()
    }

    /// Lumped integral `sum_i w_i f(fields_1[i], fields_2[i], ...)`.
    pub fn integrate_nodal<F>(&self, fields: &[&NodalField], f: F) -> Result<f64>
    where
        F: Fn(&[f64]) -> f64,
    {
        for field in fields {
            check_len(self.node_count(), field.len())?;
        }
        let mut args = vec![0.0; fields.len()];
        let mut sum = 0.0;
        for (i, w) in self.node_weights.iter().enumerate() {
            for (slot, field) in args.iter_mut().zip(fields) {
                *slot = field[i];
            }
            sum += w * f(&args);
        }
        Ok(sum)
    }

    /// Exact cell gradients of the piecewise-linear interpolant of `u`.
    pub fn cell_gradient(&self, u: &NodalField) -> Result<CellGradients> {
        check_len(self.node_count(), u.len())?;
        let vectors: Vec<[f64; 2]> = self.cells.iter().map(|c| c.gradient(u)).collect();
        let magnitudes = CellField::new(vectors.iter().map(|g| g[0].hypot(g[1])).collect());
        Ok(CellGradients { vectors, magnitudes })
    }

    /// Discrete norm `(sum_c |f_c|^alpha |c|)^(1/alpha)`.
    pub fn cell_norm(&self, f: &CellField, alpha: f64) -> Result<f64> {
        check_len(self.cell_count(), f.len())?;
        let s: f64 = self.cells.iter().zip(f.iter()).map(|(c, v)| v.abs().powf(alpha) * c.measure).sum();
        Ok(s.powf(1.0 / alpha))
    }

    /// `sum_c f_c g_c |c|`.
    pub fn cell_inner(&self, f: &CellField, g: &CellField) -> Result<f64> {
        check_len(self.cell_count(), f.len())?;
        check_len(self.cell_count(), g.len())?;
        Ok(self.cells.iter().zip(f.iter().zip(g.iter())).map(|(c, (a, b))| a * b * c.measure).sum())
    }

    /// Lumped `(sum_i w_i |u_i|^q)^(1/q)`.
    pub fn nodal_norm(&self, u: &NodalField, q: f64) -> Result<f64> {
        Ok(self.integrate_nodal(&[u], |v| v[0].abs().powf(q))?.powf(1.0 / q))
    }
}

fn triangle(nodes: [usize; 3], coords: &[[f64; 2]]) -> Cell {
    let [p0, p1, p2] = nodes.map(|n| coords[n]);
    let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    // grad of barycentric coordinate k: rotated opposite edge / det
    let grads = [
        [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det],
        [(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det],
        [(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det],
    ];
    Cell {
        nodes,
        len: 3,
        measure: 0.5 * det.abs(),
        grads,
        midpoint: [(p0[0] + p1[0] + p2[0]) / 3.0, (p0[1] + p1[1] + p2[1]) / 3.0],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellGradients {
    pub vectors: Vec<[f64; 2]>,
    pub magnitudes: CellField,
}

/// Real values on grid nodes.
///
/// A Dirichlet-flagged field is guaranteed to vanish on boundary nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodalField {
    values: Vec<f64>,
    dirichlet: bool,
}

impl NodalField {
    /// Field without a boundary condition.
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, dirichlet: false }
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self::new(vec![value; grid.node_count()])
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self { values: vec![0.0; grid.node_count()], dirichlet: true }
    }

    /// Dirichlet field; fails unless every boundary value is exactly zero.
    pub fn dirichlet(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        check_len(grid.node_count(), values.len())?;
        if let Some(i) = (0..values.len()).find(|&i| grid.is_boundary(i) && values[i] != 0.0) {
            return Err(Error::Precondition(format!(
                "Dirichlet field has value {} at boundary node {i}",
                values[i]
            )));
        }
        Ok(Self { values, dirichlet: true })
    }

    /// Interpolates `f` at the nodes.
    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        Self::new(grid.coords().iter().map(|&p| f(p)).collect())
    }

    /// Interpolates `f` at interior nodes and sets boundary nodes to zero.
    pub fn dirichlet_from_fn(grid: &Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = grid
            .coords()
            .iter()
            .enumerate()
            .map(|(i, &p)| if grid.is_boundary(i) { 0.0 } else { f(p) })
            .collect();
        Self { values, dirichlet: true }
    }

    /// Builds a Dirichlet field from values on the interior degrees of freedom.
    pub fn from_dofs(grid: &Grid, dofs: &[f64]) -> Self {
        let mut values = vec![0.0; grid.node_count()];
        for (&node, &v) in grid.interior_nodes().iter().zip(dofs) {
            values[node] = v;
        }
        Self { values, dirichlet: true }
    }

    pub fn to_dofs(&self, grid: &Grid) -> Vec<f64> {
        grid.interior_nodes().iter().map(|&n| self.values[n]).collect()
    }

    pub fn is_dirichlet(&self) -> bool {
        self.dirichlet
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `t * self`, keeping the boundary flag.
    pub fn scaled(&self, t: f64) -> Self {
        Self { values: self.values.iter().map(|v| t * v).collect(), dirichlet: self.dirichlet }
    }

    /// `self - other`; Dirichlet if both are.
    pub fn sub(&self, other: &NodalField) -> Self {
        Self {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
            dirichlet: self.dirichlet && other.dirichlet,
        }
    }
}

impl Deref for NodalField {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.values
    }
}

/// Piecewise-constant values, one per cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellField(Vec<f64>);

impl CellField {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self(vec![value; grid.cell_count()])
    }

    /// Evaluates `f` at cell midpoints.
    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        Self(grid.cells().iter().map(|c| f(c.midpoint())).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self(self.0.iter().map(|v| t * v).collect())
    }

    pub fn add(&self, other: &CellField) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &CellField) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// Fails unless every value is finite and strictly positive.
    pub fn check_density(&self, grid: &Grid) -> Result<()> {
        check_len(grid.cell_count(), self.len())?;
        match self.0.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            Some(c) => Err(Error::Admissibility(format!("density must be positive, found {} at cell {c}", self.0[c]))),
            None => Ok(()),
        }
    }
}

impl Deref for CellField {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for CellField {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_integrates_to_measure() {
        for n in [2, 3, 17, 256] {
            let g = Grid::interval(0.0, 1.0, n).unwrap();
            let one = NodalField::constant(&g, 1.0);
            assert!((g.integrate_nodal(&[&one], |v| v[0]).unwrap() - 1.0).abs() < 1e-14);
            let zero = NodalField::constant(&g, 0.0);
            assert_eq!(g.integrate_nodal(&[&zero], |v| v[0]).unwrap(), 0.0);
        }
        let g = Grid::rectangle(2.0, 0.5, 5, 7).unwrap();
        let one = NodalField::constant(&g, 1.0);
        assert!((g.integrate_nodal(&[&one], |v| v[0]).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn lumped_integral_of_x() {
        // weights 1/8, 1/4, 1/4, 1/4, 1/8 against 0, 1/4, 1/2, 3/4, 1
        let g = Grid::interval(0.0, 1.0, 4).unwrap();
        let x = NodalField::from_fn(&g, |p| p[0]);
        assert!((g.integrate_nodal(&[&x], |v| v[0]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn integrate_rejects_foreign_field() {
        let g = Grid::interval(0.0, 1.0, 4).unwrap();
        let f = NodalField::new(vec![1.0; 3]);
        assert!(matches!(g.integrate_nodal(&[&f], |v| v[0]), Err(Error::Dimension { expected: 5, found: 3 })));
        assert!(g.cell_gradient(&f).is_err());
    }

    #[test]
    fn gradients_of_affine_fields_are_exact() {
        let g = Grid::interval(0.0, 1.0, 9).unwrap();
        let x = NodalField::from_fn(&g, |p| p[0]);
        let grads = g.cell_gradient(&x).unwrap();
        assert!(grads.magnitudes.iter().all(|m| (m - 1.0).abs() < 1e-13));
        let c = NodalField::constant(&g, 3.5);
        assert!(g.cell_gradient(&c).unwrap().magnitudes.iter().all(|&m| m.abs() < 1e-13));

        let g = Grid::rectangle(1.0, 1.0, 6, 4).unwrap();
        let u = NodalField::from_fn(&g, |p| p[0] + 2.0 * p[1]);
        let grads = g.cell_gradient(&u).unwrap();
        for (v, m) in grads.vectors.iter().zip(grads.magnitudes.iter()) {
            assert!((v[0] - 1.0).abs() < 1e-12 && (v[1] - 2.0).abs() < 1e-12);
            assert!((m - 5f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn topology_invariants() {
        let g = Grid::rectangle(1.0, 2.0, 4, 3).unwrap();
        assert_eq!(g.node_count(), 20);
        assert_eq!(g.cell_count(), 24);
        assert_eq!(g.interior_nodes().len(), 6);
        assert!(g.cells().iter().all(|c| c.nodes().len() == 3 && c.measure() > 0.0));
        assert!((g.measure() - 2.0).abs() < 1e-14);
        assert_eq!(g.bandwidth(), 4);

        let g = Grid::interval(-1.0, 2.0, 5).unwrap();
        assert!(g.is_boundary(0) && g.is_boundary(5));
        assert_eq!(g.interior_nodes(), &[1, 2, 3, 4]);
        assert!(g.cells().iter().all(|c| c.nodes().len() == 2));
        assert_eq!(g.bandwidth(), 1);
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(Grid::interval(1.0, 1.0, 4).is_err());
        assert!(Grid::interval(0.0, 1.0, 1).is_err());
        assert!(Grid::interval_from_nodes(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(Grid::rectangle(1.0, -1.0, 4, 4).is_err());
    }

    #[test]
    fn nonuniform_nodes_accepted() {
        let g = Grid::interval_from_nodes(vec![0.0, 0.1, 0.5, 0.6, 1.0]).unwrap();
        let x = NodalField::from_fn(&g, |p| p[0] * p[0]);
        let grads = g.cell_gradient(&x).unwrap();
        assert!((grads.vectors[1][0] - 0.6).abs() < 1e-14);
        let w = g.node_weights();
        assert!((w[0] - 0.05).abs() < 1e-15 && (w[2] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn dirichlet_fields() {
        let g = Grid::interval(0.0, 1.0, 4).unwrap();
        assert!(NodalField::dirichlet(&g, vec![0.0, 1.0, 2.0, 1.0, 0.0]).is_ok());
        assert!(NodalField::dirichlet(&g, vec![0.1, 1.0, 2.0, 1.0, 0.0]).is_err());
        let f = NodalField::dirichlet_from_fn(&g, |_| 1.0);
        assert_eq!(f.values(), &[0.0, 1.0, 1.0, 1.0, 0.0]);
        assert_eq!(NodalField::from_dofs(&g, &f.to_dofs(&g)), f);
    }
}
