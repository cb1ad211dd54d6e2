//! Lattice weights, atom statistics, horizontal graphs and the vertical forest.

mod atoms;
mod graph;
mod params;
mod weight;

pub use atoms::{
    build_atom_table, build_vertical_forest, check_atom_resolution, concentration_check,
    cube_index, l1_norm, parent_cell, saturated_concentration_constant, Atom, AtomTable, Flag,
    LevelTable, VerticalForest,
};
pub use graph::{
    build_horizontal_graph, decay_factor, lattice_distance, maximal_function, maximal_functions,
    Cell, GraphNode, HorizontalGraph,
};
pub use params::{default_lambda, ProofParameters};
pub use weight::{LatticeWeight, ParametricWeight, Probes, Smoothness, LATTICE_TAIL};

use crate::error::Result;
use crate::field_grid::GridSpec;

pub fn eval_weight(w: &ParametricWeight, x: &[f64]) -> f64 {
    w.eval(x)
}

/// `w_{k,j}(x) = w(A^k x − j)` for the lattice-normalized weight.
pub fn atom_weight(w: &LatticeWeight, a: u32, k: usize, j: &[i64], x: &[f64]) -> f64 {
    let scale = (a as f64).powi(k as i32);
    let y: Vec<f64> = x
        .iter()
        .zip(j)
        .map(|(v, jj)| scale * v - *jj as f64)
        .collect();
    w.eval(&y)
}

/// `max_x |Σ_j w_{k,j}(x) − 1|` over all grid nodes.
pub fn partition_deviation(grid: &GridSpec, theta: f64, a: u32, k: usize) -> Result<f64> {
    let w = LatticeWeight::shared(theta, grid.d())?;
    let scale = (a as f64).powi(k as i32);
    let d = grid.d();
    Ok((0..grid.node_count())
        .map(|node| {
            let x = grid.coord(node);
            let y: Vec<f64> = x[..d].iter().map(|v| scale * v).collect();
            (w.partition_sum(&y) - 1.0).abs()
        })
        .fold(0.0, f64::max))
}

/// The smoothness function `s[w](ζ)`.
pub fn smoothness_function(w: &ParametricWeight, zeta: f64) -> Smoothness {
    w.smoothness(zeta)
}
