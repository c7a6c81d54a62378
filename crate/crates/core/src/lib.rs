//! Time-lock public key encryption and tight short-lived signatures built on
//! repeated squaring in an RSA group of unknown order.
//!
//! The layering, bottom-up:
//!
//! * [`numtheory`]: safe-prime moduli, trapdoor secrets, elements of `Z*_N`.
//! * [`rsw`]: `x^(2^T) mod N`, either by `T` sequential squarings or by the
//!   `φ(N)` shortcut.
//! * [`dlog`]: a prime-order Schnorr group carrying the inner signature and
//!   encryption schemes, both keyed by a single integer scalar.
//! * [`tlpke`]: public key encryption whose secret key is masked by the
//!   puzzle output and therefore recoverable after `T` squarings.
//! * [`sls`]: short-lived signatures on top of the masked key.
//! * [`beacon`]: a local mock randomness beacon.
//! * [`bench`]: timing harness, calibration and CSV/SVG reports.
//!
//! Security parameter convention: `lambda` is the bit length of *each* safe
//! prime, so the modulus `N` has `2 * lambda` bits.

pub mod beacon;
pub mod bench;
pub mod dlog;
mod error;
pub mod hash;
pub mod numtheory;
pub mod rsw;
pub mod sls;
pub mod tlpke;

pub use error::{Error, Result};

pub use beacon::{BeaconValue, MockBeacon};
pub use bench::{BenchRecord, CalibrationResult, Operation};
pub use dlog::{Keypair, PublicKey, SchnorrGroup, SecretScalar};
pub use numtheory::{GroupElement, RsaModulus, SecurityConfig, TrapdoorSecret};
pub use rsw::{RswOutput, RswPublicParams};
pub use sls::{
    Freshness, FreshnessContext, ShortLivedSignature, SlsPublicParams, SlsSecretKey, Verdict,
};
pub use tlpke::{TlpkeCiphertext, TlpkeEvalOutput, TlpkePublicParams};

/// Arbitrary-precision unsigned integer used throughout the crate.
pub use num_bigint::BigUint;
