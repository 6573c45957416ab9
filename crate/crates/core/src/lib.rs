//! Deterministic ε-approximations of point sets, terrains and Gaussians.
//!
//! The crate builds small weighted samples whose relative mass inside every
//! axis-parallel box (or every polygon with a fixed set of face normals)
//! matches the input within ε, and ships brute-force oracles that measure
//! that error independently.
//!
//! - [`geom`]: points, ranges, convex polygons, exact integration, terrains
//! - [`discrepancy`]: canonical subsets, Beck-Fiala coloring, halving
//! - [`merge_reduce`]: the merge/halve pipeline and its error ledger
//! - [`lowdisc`]: Van der Corput, stretched Van der Corput, irrational lattices
//! - [`terrain`]: piecewise-linear, smooth and Gaussian terrains
//! - [`scan`]: scan-statistic maximizers
//! - [`sentinel`]: ε-sentinels for cut detection
//! - [`oracle`]: ground-truth error evaluators
//! - [`io`]: CSV and JSON formats

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod discrepancy;
pub mod error;
pub mod family;
pub mod geom;
pub mod io;
pub mod lowdisc;
pub mod merge_reduce;
pub mod oracle;
pub mod scan;
pub mod sentinel;
pub mod terrain;

pub use error::{Error, Result};
pub use family::RangeFamily;
pub use geom::{AxisRect, ConvexPolygon, DirectionSet, Linear, LinearPatch, PLTerrain, Point, WeightedPointSet};

/// Library version, echoed in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
