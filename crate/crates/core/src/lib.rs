//! Numerics for weighted L² space-time estimates of the radial fractional
//! Schrödinger equation `i∂_t u + (−Δ)^{a/2} u = F`.
//!
//! The crate is organised bottom-up:
//!
//! * [`specfun`]: Bessel functions, their two-term asymptotics and remainders.
//! * [`radial`]: radial grids, profiles and the radial Fourier (Hankel) transform.
//! * [`propagator`]: dyadic projections, the evolution group and Duhamel integrals.
//! * [`weights`]: space-time weights, Morrey–Campanato norms, maximal functions
//!   and Muckenhoupt constants.
//! * [`oscint`]: oscillatory integrals, localized kernels and the `T_k` operators.
//! * [`estimates`]: weighted norms and estimate ratios, sweeps and extremizers.
//! * [`wellposed`]: the potential-perturbed problem and its Picard iteration.

// Guards are written as !(x > 0.0) so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimates;
pub mod fit;
pub mod oscint;
mod par;
pub mod propagator;
pub mod quadrature;
pub mod radial;
pub mod specfun;
pub mod weights;
pub mod wellposed;

pub use error::{Error, Result};
pub use fit::FitReport;
pub use num_complex::Complex64;
