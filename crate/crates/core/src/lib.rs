//! Delayed symbolic-geometric graph field dynamics.
//!
//! Two vector fields, a token field `H_L` on a sequence graph and a node field
//! `X_R` on a scene graph, diffuse through weighted Laplacians, relax through
//! Lipschitz reaction terms and exchange delayed signals through a bounded
//! Hilbert-Schmidt coupling kernel. A set of bounded auxiliary variables
//! (precision weights, awareness weights, routing, valuation, executive state,
//! memory, reliability, eligibility traces and policy parameters) modulates the
//! two fields. The crate provides
//!
//! * the compact state domain and its projections ([`state`], [`simplex`]),
//! * graph Laplacians and spectral gaps ([`graph`]),
//! * the coupling kernel families ([`coupling`]),
//! * closed-form surrogate vector fields and the staged discrete update
//!   ([`dynamics`]),
//! * an explicit delayed integrator ([`integrator`]),
//! * dissipativity, small-gain and Lyapunov-Krasovskii certificates
//!   ([`stability`]),
//! * the built-in K3/P3 scenarios ([`scenarios`]).
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
// `!(a <= b)` is the NaN-rejecting form of `a > b` throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod config;
pub mod coupling;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod integrator;
pub mod linalg;
pub mod math;
pub mod scenarios;
pub mod simplex;
pub mod stability;
pub mod state;

pub use config::SystemConfig;
pub use coupling::CouplingKernel;
pub use error::{Error, Result};
pub use graph::WeightedGraph;
pub use integrator::{Integrator, Trajectory};
pub use linalg::Mat;
pub use stability::StabilityReport;
pub use state::{ArchitectureConfig, HistoryBuffer, StateVector};
