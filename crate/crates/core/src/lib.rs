//! Metric geometry of continuous piecewise-linear circle maps.
//!
//! The library normalizes a sampled map on the circle into excursion form,
//! exposes the contour pseudometric and its quotient real tree, computes
//! p-variation functionals (classical, cardinality-restricted, and
//! discretised at a fixed step size), estimates box/packing/sausage
//! dimensions from scale sweeps, and constructs time changes (Hölder
//! regularizing and dimension-maximizing) as piecewise-linear circle
//! homeomorphisms.
//!
//! Everything operates on explicit knot lists; all derived quantities are
//! exact for piecewise-linear inputs up to f64 rounding.

pub mod dimension;
pub mod error;
pub mod generators;
pub mod io;
pub mod map;
pub mod parallel;
pub mod report;
pub mod rmq;
pub mod scales;
pub mod timechange;
pub mod tree;
pub mod variation;

pub use error::{ExdimError, Result};
pub use map::{ExcursionForm, Interval, Partition, SampledCircleMap};
