//! Heat flow with density on weighted graphs.
//!
//! This crate implements the discrete calculus of weighted graphs
//! `(G, omega, mu)` with a pseudo metric, simulates the density-weighted heat
//! equation `rho du/dt - Delta u = f` on finite truncations, and certifies
//! trajectories against growth-based uniqueness classes by verifying the
//! test-function inequalities and decay estimates that drive them.
//!
//! The pieces:
//!
//! - [`graph`]: weighted graphs, truncations with interior/boundary tags,
//!   built-in families and validation.
//! - [`metric`]: combinatorial, canonical intrinsic and explicit pseudo
//!   metrics, jump size, q-intrinsic bounds, balls.
//! - [`calculus`]: difference operator, gradient squared, Laplacian and the
//!   algebraic identities as residual verifiers.
//! - [`density`]: positive densities and their lower-bound profiles.
//! - [`weights`]: cut-off and test weights, their inequality margins, and the
//!   decay exponents of the uniqueness arguments.
//! - [`solver`]: explicit/implicit Euler and Crank-Nicolson stepping with a
//!   Dirichlet exterior.
//! - [`certify`]: ball energies, growth fits, theorem gates, the generalized
//!   a-priori inequalities and the radial decay chains.
//! - [`io`]: graph documents, trajectory/margin/energy CSV, certificates and
//!   SVG charts. [`cli`]: the command-line front end.
//!
//! Start with the `examples/` directory: each file is a runnable tour of one
//! capability (`cargo run --example heat_flow`).

pub mod calculus;
pub mod certify;
pub mod cli;
pub mod density;
mod error;
pub mod graph;
pub mod io;
pub mod metric;
pub mod solver;
pub mod weights;

pub use error::{AxiomViolation, Error, Result};
