//! Exact enveloping Lie algebras, superposition laws and automorphic systems
//! for non-autonomous rational ODE systems.

pub mod autosys;
pub mod cli;
pub mod envelope;
pub mod expr;
pub mod liftdiag;
pub mod linalg;
pub mod numint;
pub mod sampling;
pub mod superlaw;
pub mod sysfile;
pub mod vfield;
