//! Genetic search for the best multiple linear regression over a
//! combinatorially encoded family of descriptors.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is
//! disabled. File formats, the command line and parallel grid execution live
//! in the companion `galgo` crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

mod error;
mod math;

pub mod descriptors;
pub mod engine;
pub mod experiment;
pub mod genome;
pub mod regress;
pub mod scores;
pub mod stats;
pub mod strategy;

pub use error::{Error, Result};
