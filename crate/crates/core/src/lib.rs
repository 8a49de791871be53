//! Model-free price bounds and superhedging on finite path lattices.
//!
//! The crate is organised around a few layers:
//!
//! * [`paths`]: piecewise-linear price paths, the information space of
//!   continuously traded options, prediction sets and time changes.
//! * [`discretise`]: Lebesgue partitions and the exact staged discretisation
//!   of paths onto piecewise-constant paths with rational jump times.
//! * [`marginals`]: put-curve inversion, convex order, the bounded-Lipschitz
//!   metric and tail functionals.
//! * [`mot_lp`]: martingale optimal transport on lattices, primal and dual,
//!   backed by the dense simplex in [`lp`].
//! * [`hedging`]: pathwise integrals, admissibility, superhedge replay and
//!   strategy lifting.
//! * [`payoffs`]: payoff library with regularity metadata.

pub mod discretise;
pub mod drift;
pub mod error;
pub mod hedging;
pub mod lattice;
pub mod lp;
pub mod marginals;
pub mod mot_lp;
pub mod paths;
pub mod payoffs;
pub mod problem;
pub mod rational;

pub use error::{Error, Result};
