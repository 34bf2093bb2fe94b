//! Krotov optimal control of finite-level quantum systems with simultaneous
//! amplitude and spectral constraints on the field.
//!
//! * [`dynamics`]: level systems, propagation, adjoint boundary conditions.
//! * [`constraints`]: amplitude penalty, Gaussian spectral kernels, PSD
//!   certification, spectra.
//! * [`fredholm`]: degenerate-kernel and Nyström solvers for Fredholm
//!   equations of the second kind.
//! * [`krotov`]: the optimisation loop.
//! * [`scenario`], [`io`], [`cli`]: configuration files, CSV output and the
//!   command-line driver.

mod banded;
pub mod cli;
pub mod constraints;
pub mod dynamics;
pub mod error;
pub mod fredholm;
pub mod io;
pub mod krotov;
pub mod scenario;

pub use banded::{BandLu, BandMatrix};
pub use error::{ConfigIssue, Error, Result};
