//! Meshfree finite elements with weighted extended B-splines (WEB-splines)
//! for a coupled system of general elliptic equations on implicitly
//! described domains.
//!
//! The pipeline: describe the domain by weight functions ([`domain`]),
//! build the boundary-conforming basis ([`basis`]), state the coupled
//! problem ([`problem`]), assemble the block Galerkin system over interior
//! and cut cells ([`assembly`]), solve and measure convergence, residuals
//! and conditioning ([`solve_post`]). The `webfem` binary drives all of it
//! from JSON configuration files ([`config`]).

pub mod assembly;
pub mod basis;
pub mod bspline;
pub mod config;
pub mod domain;
pub mod error;
pub mod export;
pub mod expr;
pub mod post;
pub mod problem;
pub mod quadrature;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
