//! Edge modes of domain-wall modulated honeycomb media.
//!
//! Bloch-reduced P1 finite elements on the truncated cylinder
//! `{τ1 v1 + τ2 v2 : 0 ≤ τ1 ≤ 1, |τ2| ≤ L}`, polynomial preserving gradient
//! recovery, and the recovered eigenvalue `Ê = E − ‖W^{1/2}(∇p − G p)‖²`.
//!
//! Numerical code is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix the precision.

// `!(x > 0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assembly;
pub mod commands;
pub mod config;
pub mod convergence;
pub mod eigensolver;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod material;
pub mod mesh;
pub mod recovery;
pub mod scalar;
pub mod spectrum;

pub use error::{Error, Result};

/// Precision used by the commands.
pub type F = f64;

pub type Spec = material::DomainWallSpec<f64>;
pub type Mesh = mesh::CylinderMesh<f64>;
pub type Matrices = assembly::MatrixSet<f64>;
pub type Recovery = recovery::RecoveryOperator<f64>;
pub type Disc = spectrum::Discretization<f64>;
pub type Mode = spectrum::ModeField<f64>;
pub type Report = convergence::ConvergenceReport<f64>;

pub type Spec32 = material::DomainWallSpec<f32>;
pub type Mesh32 = mesh::CylinderMesh<f32>;
pub type Matrices32 = assembly::MatrixSet<f32>;
pub type Recovery32 = recovery::RecoveryOperator<f32>;
pub type Disc32 = spectrum::Discretization<f32>;
