//! Latency of static and dynamic rate adaptation over a Poisson field of
//! interferers.
//!
//! The pipeline runs from link and field parameters to the meta distribution
//! of the transmission success probability, its per-class discretization,
//! the queueing chains of both schemes and their quasi-birth-death solution.
//! A slot-level simulator cross-checks every analytic stage.

pub mod chains;
pub mod config;
pub mod meta;
pub mod model;
pub mod qbd;
pub mod sim;
pub mod special;
