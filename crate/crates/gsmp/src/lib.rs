//! Numerical machinery for finite-gap Jacobi matrices and their GSMP block
//! counterparts.
//!
//! * [`spectral_sets`]: interval systems `E` and the rational potential `V`
//!   with `E = V^{-1}([-2, 2])`.
//! * [`gsmp`]: GSMP block matrices, the `Lambda` functionals, transfer
//!   matrices, exact local resolvents, `V(A)` and Floquet fibers.
//! * [`isospectral`]: periodic points with prescribed spectrum.
//! * [`flow`]: the Jacobi flow and extraction of Jacobi coefficients.
//! * [`analysis`]: Lanczos, resolvent functions, distances and Killip-Simon
//!   functionals on both sides.
//! * [`workbench`]: configuration and the pipelines behind the `gsmp` binary.

pub mod analysis;
pub mod error;
pub mod flow;
pub mod gsmp;
pub mod io;
pub mod isospectral;
pub mod linalg;
pub mod spectral_sets;
pub mod workbench;

pub use error::{Error, Result};
