//! Numerical laboratory for multilinear Littlewood–Paley square functions.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`]: cubes, uniformly sampled fields, scale grids with their
//!   `dt/t` (or dyadic) quadrature, and the zero-extension convolution engine.
//! * [`kernels`]: smooth bumps and their derived mean-zero families, the
//!   polynomial majorants, the jump kernel `χ(0,1) − χ(−1,0)`, multilinear
//!   kernel descriptions and sampled validators for the size and Hölder
//!   conditions.
//! * [`operators`]: `P_t`, `Q_t`, `Θ_t`, the paraproduct pieces `Π_{j,s}`,
//!   square functions, maximal functions and the decay/orthogonality probes.
//! * [`weights`]: power weights, `A_p` characteristics over dyadic families,
//!   weighted norms and the Calderón–Zygmund decomposition.
//! * [`carleson`]: Carleson, strong Carleson and two-cube constants, tents
//!   and the explicit bound constants.
//! * [`lab`]: scenario registry, reports and the invariant suite driven by
//!   the `sqfn` binary.

pub mod carleson;
pub mod error;
pub mod grid;
pub mod kernels;
pub mod lab;
pub mod operators;
pub mod quad;
pub mod weights;

pub use error::{Error, Result};
