//! Streaming sketches built on locality-sensitive hashing.
//!
//! Two structures live here:
//!
//! - [`sann::SannSketch`]: a `(c, r)`-approximate near neighbor index that keeps
//!   only a uniform `n^-eta` sample of the stream, supports strict-turnstile
//!   deletions, and answers single or batched queries.
//! - [`swakde::RaceGrid`]: a sliding-window kernel density sketch. Every cell of
//!   an `L x W^p` LSH count grid is an [`eh::ExpHistogram`], so estimates only
//!   reflect the last `N` time steps.
//!
//! [`oracle`] carries the exact references (brute-force neighbors, exact-counter
//! twin grid, closed-form kernel sums), the synthetic stream generators and the
//! failure-probability formulas the sketches are checked against.
//!
//! The crate is `no_std` with `alloc`. The default `std` feature only adds
//! parallel batch queries.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod codec;
pub mod eh;
mod error;
pub mod lsh;
pub mod oracle;
mod point;
pub mod sann;
pub mod seed;
pub mod swakde;

pub use error::{Result, SketchError};
pub use point::{distance, dot, squared_distance, Point};
