//! Exact permutation models for relative ergodic theory.
//!
//! Everything lives on finite grids of equal-mass cells:
//!
//! - [`space`]: cell spaces, automorphisms as permutations, cell sets, partitions, metrics.
//! - [`skew`]: skew products over a base permutation and the relatively independent joining.
//! - [`tower`]: Rohlin towers for the base and their refinement by a partition.
//! - [`approx`]: piecewise-constant skew products and greedy approximation by them.
//! - [`conjugator`]: the fiber-preserving conjugator steering a system onto a piecewise target.
//! - [`wm`]: the ergodic-average statistic testing relative weak mixing.
//! - [`experiments`]: scenarios, seeded genericity sampling and the command-line driver.

pub mod approx;
pub mod conjugator;
pub mod error;
pub mod experiments;
pub mod rng;
pub mod skew;
pub mod space;
pub mod tower;
pub mod wm;

pub use error::{Error, Result};
pub use space::{Automorphism, CellSet, CellSpace, Census, Partition, Rational};
pub use skew::{Cocycle, RelativeProduct, SkewSystem};
