//! Static anonymous bundle pricing for online allocation with single-minded
//! and routing buyers.
//!
//! The pipeline solves a capacity-scaled ex-ante LP ([`lp`]), turns its
//! optimum into a randomized posted-price menu ([`menu`]), and measures the
//! menu against adversarial arrival orders by Monte Carlo ([`sim`]). The
//! [`oracle`] module holds brute-force references for small instances, and
//! [`lowerbound`] builds the partition-based hard instances.

pub mod experiment;
pub mod generate;
pub mod lowerbound;
pub mod lp;
pub mod menu;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod sim;
pub mod verify;
