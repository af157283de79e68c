//! Deep multiple access over shared wireless channels.
//!
//! N encoder/decoder pairs are trained jointly so that the complex symbol
//! vectors they transmit become mutually orthogonal. Orthogonality lets the
//! pairs share one frequency band: each receiver equalizes the superposed
//! signal and its decoder recovers only the stream its paired encoder sent,
//! while a correlation detector decides whether a received vector belongs to
//! it at all. With a single pair the system degenerates to a plain deep
//! joint source-channel coder.
//!
//! The crate is `no_std` + `alloc`: it carries the math (reverse-mode
//! autodiff, the encoder/decoder networks, channel simulation, detection,
//! metrics, training) and byte-level codecs, but no file or terminal IO.
//! The companion `deepma-cli` crate adds file formats and the command line.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod adam;
pub mod autodiff;
pub mod channel;
pub mod checkpoint;
pub mod data;
pub mod detection;
pub mod error;
pub mod fmath;
pub mod gradcheck;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use tensor::Tensor;
