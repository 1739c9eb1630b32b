//! Building blocks for Bayesian optimization.
//!
//! The crate is organised the way a BO run is assembled:
//!
//! * [`space`] describes what is searched and generates initial designs,
//! * [`engine`] holds the objective, archive, terminators and result assignment,
//! * [`surrogate`] fits Gaussian processes and random forests to the archive,
//! * [`acquisition`] turns surrogate predictions into utilities,
//! * [`acqopt`] maximizes an acquisition function over the space,
//! * [`loops`] combines the pieces into EGO, constant liar, ParEGO and SMS-EGO,
//! * [`parallel`] runs decentralized asynchronous BO on a shared archive.

pub mod acqopt;
pub mod acquisition;
pub mod engine;
pub mod loops;
pub mod parallel;
pub mod pareto;
pub mod space;
pub mod stats;
pub mod surrogate;

/// Random generator used throughout the crate. Every component receives its
/// generator from the caller; there is no global RNG state.
pub type MboRng = rand_chacha::ChaCha8Rng;

/// Derives the seed of an independent stream, e.g. a worker, from a master
/// seed.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over the combined input
    let mut z = master
        .wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
