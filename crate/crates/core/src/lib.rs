//! Simulation and analysis of a spatial host-parasite model with an altruistic
//! defence trait and of its Wright-Fisher diffusion limits.
//!
//! The crate is layered: [`params`] and [`graph`] define the ecology and the
//! deme structure, [`sde`] integrates any [`sde::SdeModel`] with seeded,
//! thread-count independent noise, [`micro`] and [`limit`] provide the
//! microscopic and limiting models, and [`analytics`] / [`diagnostics`]
//! compare the two.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod diagnostics;
pub mod error;
pub mod graph;
pub mod limit;
pub mod micro;
pub mod params;
pub mod quadrature;
pub mod sde;

pub use error::{Error, Result};
pub use graph::{build_deme_graph, DemeGraph, GraphKind};
pub use params::{check_assumptions, derive_limit_constants, EcologyParams, Equilibrium, LimitConstants, ScalingParams};
pub use sde::{integrate, BoundaryPolicy, IntegratorConfig, Path, RngStream, SdeModel};
