//! Thurston metric toolkit for the once-punctured torus.
//!
//! Hyperbolic structures are stored as Markov trace triples (x, y, z) with
//! x² + y² + z² = xyz, the traces of the three curves of the base Farey
//! triangle (slopes 1/0, 0/1, 1/1). Exact Farey-graph combinatorics plus the
//! flip recursion t′ = t_u·t_v − t_w give every curve length; on top of that
//! the crate computes the asymmetric Thurston distance, maximally stretched
//! curves, stretch paths and envelope quadrilaterals in Fenchel–Nielsen
//! coordinates, the infinitesimal Thurston norm with its flat segments, and
//! an experiment harness relating pivots, short curves, and h/v dynamics.

pub mod error;
pub mod farey;
pub mod scalar;
pub mod torus;

pub use error::{Error, Result};
pub use farey::{Marking, Pivot, Slope};
pub mod cli;
pub mod hyptrig;
pub mod metric;
pub mod experiments;
pub mod norm;
pub mod stretch;
