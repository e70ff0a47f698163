//! Monitored-circuit simulation with rotated Bell clusters.
//!
//! Circuits of random `σ^zσ^z` and rotated `σ̃^x(θ)` measurements keep every
//! state a tensor product of clusters `|b> + e^{ip}|b̄>`. [`rbc`] tracks those
//! clusters exactly, [`observables`] turns a cluster partition into magic,
//! entanglement and participation quantities, [`circuit`] and [`ensemble`]
//! run trajectories, [`oracle`] checks everything against a dense state
//! vector, and [`analysis`] fits scaling forms.

pub mod analysis;
pub mod circuit;
pub mod cli;
pub mod config;
pub mod ensemble;
pub mod lattice;
pub mod observables;
pub mod oracle;
pub mod phase;
pub mod rbc;
pub mod stats;
