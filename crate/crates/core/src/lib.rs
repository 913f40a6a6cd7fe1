//! Adaptive and high-order control barrier functions for affine control
//! systems, a dense QP solver, and closed-loop simulation of the adaptive
//! cruise control benchmark.

pub mod acc;
pub mod barrier;
pub mod cli;
pub mod numerics;
pub mod qp;
pub mod sim;
pub mod system;
