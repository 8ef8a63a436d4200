//! Passivity-compensation certificates and closed-loop simulation for
//! heterogeneous networks of SISO LTI agents coupled through static,
//! sector-bounded edge nonlinearities.
//!
//! - [`linalg`]: dense symmetric eigenvalues and PSD tests.
//! - [`graph`]: oriented graphs, incidence matrices, spanning trees.
//! - [`lti`]: transfer functions, realizations, IFP index estimation.
//! - [`coupling`]: edge nonlinearities and the stacked operator `Psi`.
//! - [`certificates`]: edge Gram matrices and the compensation certificates.
//! - [`sim`]: RK4 closed-loop simulation with seeded noise and consensus metrics.

pub mod certificates;
pub mod coupling;
pub mod fixtures;
pub mod graph;
pub mod linalg;
pub mod lti;
pub mod sim;
