//! Monte Carlo and spectral laboratory for one-dimensional collision models
//! with multiplicative, possibly dissipative interactions.
//!
//! The crate is organized around the pipeline:
//! kernel (law of the weight pair) -> weighted binary trees -> velocity
//! samples and characteristic functions -> comparison with stable laws and
//! long-time equilibria.

pub mod cf_grid;
pub mod cli;
pub mod convergence_lab;
pub mod initial_data;
pub mod kernels;
pub mod numeric;
pub mod prescribed_trees;
pub mod rng;
pub mod stable_laws;
pub mod stats;
pub mod tree_engine;
pub mod wild_solver;
