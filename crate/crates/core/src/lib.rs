//! Lossless compression with target lengths.
//!
//! A compressor here maps an error budget, a target bit length `m`, and an
//! input string to a code of *exactly* `m` bits.  Decompression works
//! relative to an arbitrary finite table decompressor: the decoder streams
//! the strings the table can produce below a complexity budget and
//! identifies the compressed string among them using a short randomized
//! fingerprint.  The fingerprint combines a seeded condenser symbol with a
//! prime-modulus hash; the inverse prunes the suspect stream online and
//! commits monotonically, so answers never change as more suspects arrive.
//!
//! The crate also contains the multi-sender decoder (random tree
//! partitioning with percolation and bubble-up), brute-force verification
//! of condenser/conductor tables, and executable forms of the overhead,
//! randomness, and degree lower bounds.
//!
//! Everything is deterministic given explicit seeds; the pseudo-random
//! source is the SplitMix64 recurrence documented in [`rng`].

pub mod analysis;
pub mod bits;
pub mod compressor;
pub mod condensers;
pub mod distributed;
pub mod error;
pub mod field;
pub mod hashing;
pub mod invertible;
pub mod rng;

pub use bits::{gamma_decode, gamma_encode, gf2_matvec, pack_code, unpack_code, BitString, Code};
pub use error::{Error, Result};
pub use rng::{EpsilonExp, Seed, SplitMix64};
