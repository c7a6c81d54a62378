use std::time::Duration;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("security parameter {lambda} is below the minimum of {min} bits")]
    SecurityParameterTooSmall { lambda: u64, min: u64 },

    #[error("safe primes need at least {min} bits, got {bits}")]
    PrimeBitsTooSmall { bits: u64, min: u64 },

    #[error("no {bits}-bit safe prime found after {attempts} candidates")]
    PrimeSearchExhausted { bits: u64, attempts: u64 },

    #[error("invalid modulus: {0}")]
    InvalidModulus(&'static str),

    #[error("invalid trapdoor: {0}")]
    InvalidTrapdoor(&'static str),

    #[error("value is not an element of Z*_N: {0}")]
    NotInGroup(&'static str),

    #[error("group element belongs to a different modulus")]
    ModulusMismatch,

    #[error("trapdoor does not factor the modulus")]
    TrapdoorMismatch,

    #[error("time bound {0} exceeds 2^63 - 1")]
    TimeBoundTooLarge(u64),

    #[error("candidate stream ended before a coprime element was found")]
    CandidatesExhausted,

    #[error("inner group order ({order_bits} bits) does not fit below N ({modulus_bits} bits)")]
    ParameterSize { order_bits: u64, modulus_bits: u64 },

    #[error("malformed public parameters: {0}")]
    MalformedParameters(&'static str),

    #[error("invalid discrete-log group: {0}")]
    InvalidGroup(&'static str),

    #[error("message of {len} bytes exceeds the {max}-byte cap")]
    MessageTooLong { len: usize, max: usize },

    #[error("ciphertext failed to decrypt")]
    Decryption,

    #[error("decrypted plaintext is not a valid M || x encoding")]
    MalformedPlaintext,

    #[error("ciphertext is bound to a different puzzle input")]
    PuzzleBinding,

    #[error("supplied puzzle output does not unmask to a valid secret key")]
    InconsistentEvaluation,

    #[error("secret key does not match the public key in the parameters")]
    KeyMismatch,

    #[error("no calibrated squaring rate available")]
    MissingCalibration,

    #[error("observed time {observed} precedes beacon time {beacon}")]
    ClockSkew { beacon: u64, observed: u64 },

    #[error("beacon period must be positive")]
    InvalidPeriod,

    #[error("beacon round {round} is not available until t={available_at}")]
    BeaconRoundUnavailable { round: u64, available_at: u64 },

    #[error("sample of {sample_t} squarings is below the {min} floor")]
    SampleTooSmall { sample_t: u64, min: u64 },

    #[error("measured {0:?} is below timer resolution; increase sample_T")]
    TimerResolution(Duration),

    #[error("report error: {0}")]
    Report(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
