//! Problem instances shared by the benchmarks.

use std::f64::consts::PI;

use qplap_core::{CellField, Grid, NodalField};

pub struct Instance {
    pub grid: Grid,
    pub rho_bar: CellField,
    pub b: NodalField,
    pub lambda: f64,
}

/// Unit interval with a mildly varying prior and target `3 pi^2`.
pub fn interval(cells: usize) -> Instance {
    let grid = Grid::interval(0.0, 1.0, cells).expect("valid interval");
    let rho_bar = CellField::from_fn(&grid, |x| 1.0 + 0.5 * (PI * x[0]).sin());
    let b = NodalField::constant(&grid, 1.0);
    Instance { grid, rho_bar, b, lambda: 3.0 * PI * PI }
}

/// Unit square with `n x n` cells and a smooth prior.
pub fn square(n: usize) -> Instance {
    let grid = Grid::rectangle(1.0, 1.0, n, n).expect("valid rectangle");
    let rho_bar = CellField::from_fn(&grid, |x| 1.0 + 0.5 * x[0] * x[1]);
    let b = NodalField::constant(&grid, 1.0);
    Instance { grid, rho_bar, b, lambda: 6.0 * PI * PI }
}
