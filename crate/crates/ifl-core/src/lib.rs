//! Interfaces of the critical Ising model with free boundary arcs.
//!
//! The crate covers the square-lattice side (domains, low-temperature
//! expansion, the discrete fermionic observable and its identities), the
//! continuum side (the Riemann boundary value problem in the upper half-plane,
//! its residue and the SLE(3) drift) and the crossing probabilities built on
//! both.

pub mod conformal;
pub mod cont_obs;
pub mod crossing;
pub mod disc_obs;
pub mod lattice;
pub mod linalg;
pub mod lowtemp;
pub mod quadrature;
pub mod sle;

pub use num_complex::Complex64;

#[derive(Debug, thiserror::Error)]
pub enum IflError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid boundary conditions: {0}")]
    InvalidBc(String),
    #[error("{what} too large for exhaustive enumeration ({size} > {cap})")]
    TooLarge {
        what: &'static str,
        size: usize,
        cap: usize,
    },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, IflError>;
