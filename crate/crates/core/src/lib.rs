//! Assouad and lower dimension spectra.
//!
//! Closed forms for self-affine carpets, self-similar sets, Mandelbrot
//! percolation and Moran constructions, together with brute-force covering
//! oracles used to cross-check them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod carpets;
pub mod error;
pub mod moran;
pub mod numfmt;
pub mod percolation;
pub mod selfsimilar;
pub mod spectrum;
pub mod stats;
pub mod tail_density;

mod par;

pub use error::{Error, Result};
