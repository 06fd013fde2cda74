//! Certified key rate: Fock-space operators, the constrained entropy
//! minimization and the finite-size corrections.

pub mod fock;
pub mod objective;
pub mod sdp;
pub mod constraints;
pub mod frank_wolfe;
pub mod corrections;
