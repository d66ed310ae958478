//! Two-party secure computation engine for privacy-preserving outlier
//! detection over sliding windows.
//!
//! The crate is `no_std` + `alloc`; the default `std` feature adds the
//! in-process transport simulation and `std::error::Error` impls. Transport
//! backends, the dealer service binary, file formats and the CLI live in the
//! companion `ppod` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod channel;
pub mod circuit;
pub mod circuits;
pub mod convert;
pub mod dealer;
pub mod error;
pub mod garble;
pub mod knn;
pub mod oracle;
pub mod ot;
pub mod protocol;
pub mod ring;
#[cfg(feature = "std")]
pub mod sim;
pub mod yao;

pub use error::{Error, Result};
