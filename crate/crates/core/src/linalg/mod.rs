//! Sparse matrices and a direct solver.
//!
//! Matrices are built from triplets, compressed to CSC with duplicates summed
//! in insertion order, and factorized by left-looking LU with partial
//! pivoting after an approximate minimum degree column ordering. Every step is
//! sequential, so factors are bit-identical across runs.

mod lu;
mod ordering;
mod sparse;

pub use lu::{LuFactors, SparseLu};
pub use ordering::fill_reducing_order;
pub use sparse::{CscMatrix, TripletMatrix};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}
