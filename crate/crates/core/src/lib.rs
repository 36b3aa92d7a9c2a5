//! Protocol core for S-MBank, a four-factor mobile banking login.
//!
//! A user proves knowledge of a pair-based text password against a
//! per-session grid, then proves possession of a PIN-gated smartcard by
//! unsigncrypting a challenge nonce from the bank and returning
//! `f(R_c // P)`. The bank is authenticated to the user through the same
//! signcryption.
//!
//! The crate is `no_std` and only needs `alloc`. IO, persistence, the
//! HTTP service and the CLI live in the `smbank` companion crate.

#![no_std]
#![forbid(unsafe_code)]
#![warn(rust_2018_idioms, unused_qualifications)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod adversary;
pub mod entropy;
pub mod pbta;
pub mod protocol;
pub mod seal;
pub mod signcrypt;
pub mod smartcard;
pub mod terms;

pub use entropy::{EntropyError, UniformSource};
