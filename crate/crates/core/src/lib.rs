//! Deterministic simulator of optimistic and validity rollups anchored to a
//! simulated L1, with the proof systems and cost models they rely on.

pub mod algebra;
pub mod costbench;
pub mod l1sim;
pub mod merkle;
pub mod oprollup;
pub mod primitives;
pub mod proofs;
pub mod scenario;
pub mod snark;
pub mod validityrollup;
