//! Scattering toolkit for the AKNS system: the classical inverse scattering
//! transform on the full line, the matrix unified transform on the
//! half-line, numerical Riemann-Hilbert solves on the cross contour, and
//! the Z2 reduction families that tie local and nonlocal NLS together.

pub mod akns;
pub mod algebra;
pub mod error;
pub mod experiments;
pub mod io;
pub mod oracle;
pub mod reductions;
pub mod rh;
pub mod scattering;
pub mod symmetries;

pub use error::{Error, Result};
