//! Exact projective geometry and certificate-producing constructions for
//! Schottky systems of rank-1 unipotent matrices in `SL(n, Z)`.
//!
//! Everything in this crate is exact: points and hyperplanes of real
//! projective space carry primitive integer coordinates, distances are the
//! squared sine of the angle between lines (a rational number on rational
//! data), and every neighborhood test reduces to rational comparisons.
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod congruence;
pub mod constructions;
mod error;
pub mod exact;
pub mod lattice;
pub mod matrix;
pub mod schottky;
pub mod search;
pub mod unipotent;

pub use error::{Error, Result};

pub use num_bigint::BigInt;
pub use num_rational::BigRational;
