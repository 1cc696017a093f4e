//! Monte Carlo toolkit for percolation and k-hop connection times in
//! multi-scale mobile wireless networks.
//!
//! Two dynamic models are simulated: a two-scale waypoint model, where nodes
//! alternate short slow legs with long fast legs, and an
//! infrastructure-augmented model, where nodes perform continuous-time random
//! walks and reach Poisson sinks through at most `k` relay hops. For both,
//! the crate computes the empirical time measures, samples the long-horizon
//! limiting laws, and compares the two statistically.

// `!(x > 0.0)` is the NaN-rejecting form used in parameter checks; index
// loops over coordinate axes read better than zipped iterators.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod connectivity;
pub mod dynamics;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod limits;
pub mod measure;
pub mod mobility;
pub mod rng;
pub mod selfcheck;
pub mod stats;

pub use error::{Error, Result};
pub use rng::RngStream;
