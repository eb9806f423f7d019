#![no_std]
#![forbid(unsafe_code)]

//! Numerical building blocks for the 3D wave kinetic equation with Laplacian
//! dispersion, written in its hard-sphere form.
//!
//! Resonant quartets `(k, k1, k*, k1*)` are parametrized by `(k1, sigma)` in
//! `R^3 x S^2`, which turns every collisional integral into a weighted
//! quadrature over that product space. On top of that parametrization the
//! crate provides:
//!
//! * [`geometry`]: the collisional law, Bobylev variables, the pre/post
//!   collisional involution and pointwise lower bounds,
//! * [`quadrature`]: tensor and seeded Monte Carlo rules on `S^2` and `R^3 x S^2`,
//! * [`fields`]: analytic and grid-backed spectra plus weighted `L^r` norms,
//! * [`collision`]: the gain, loss and collision-frequency operators,
//! * [`analysis`]: numerical certificates for the averaging and
//!   change-of-variables estimates and empirical trilinear constants,
//! * [`solver`]: Picard time evolution and the Kaniel-Shinbrot bracket.
//!
//! The crate is `no_std` and only needs `alloc`; file formats and the command
//! line driver live in the `wke` crate.

extern crate alloc;

pub mod analysis;
pub mod collision;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod math;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};
pub use math::Vec3;
