//! Tight short-lived signatures.
//!
//! The signing key is the inner Schnorr scalar masked inside TLPKE public
//! parameters. The holder signs directly; anyone else can recover the key
//! with exactly `T` sequential squarings and then produce the very same
//! signature bytes, since nonces are deterministic. A signature therefore
//! convinces only while fewer than `T` squarings could have elapsed since
//! the beacon value it embeds was published.

use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::Float;
use rand::RngCore;

use crate::beacon::BeaconValue;
use crate::dlog::{self, Keypair, PublicKey, SchnorrGroup, SecretScalar};
use crate::hash::message_digest;
use crate::numtheory::{GroupElement, RsaModulus, SecurityConfig, TrapdoorSecret};
use crate::rsw::RswPublicParams;
use crate::tlpke::{self, TlpkePublicParams};
use crate::{Error, Result};

/// `(N, T, x, sig_pk, ek)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlsPublicParams {
    inner: TlpkePublicParams,
}

impl SlsPublicParams {
    pub fn from_tlpke(inner: TlpkePublicParams) -> Self {
        Self { inner }
    }

    pub fn as_tlpke(&self) -> &TlpkePublicParams {
        &self.inner
    }

    pub fn modulus(&self) -> &RsaModulus {
        self.inner.modulus()
    }

    pub fn time_bound(&self) -> u64 {
        self.inner.time_bound()
    }

    pub fn puzzle_input(&self) -> &GroupElement {
        self.inner.puzzle_input()
    }

    pub fn sig_pk(&self) -> &PublicKey {
        self.inner.enc_pk()
    }

    pub fn masked_sk(&self) -> &BigUint {
        self.inner.masked_sk()
    }

    pub fn group(&self) -> &Arc<SchnorrGroup> {
        self.inner.group()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlsSecretKey(SecretScalar);

impl SlsSecretKey {
    pub fn new(scalar: SecretScalar) -> Self {
        Self(scalar)
    }

    pub fn scalar(&self) -> &SecretScalar {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShortLivedSignature {
    pub sigma: Vec<u8>,
    pub beacon: BeaconValue,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject,
}

impl Verdict {
    pub fn is_accept(self) -> bool {
        self == Verdict::Accept
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Accept => "accept",
            Verdict::Reject => "reject",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Freshness {
    Convincing,
    Expired,
}

impl Freshness {
    pub fn as_str(self) -> &'static str {
        match self {
            Freshness::Convincing => "convincing",
            Freshness::Expired => "expired",
        }
    }
}

/// When the beacon round was published, when the signature was seen, and
/// how many squarings per second an adversary is assumed to manage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreshnessContext {
    beacon_time: u64,
    observed_time: u64,
    calibrated_rate: Option<f64>,
}

impl FreshnessContext {
    pub fn new(beacon_time: u64, observed_time: u64, calibrated_rate: Option<f64>) -> Result<Self> {
        if observed_time < beacon_time {
            return Err(Error::ClockSkew {
                beacon: beacon_time,
                observed: observed_time,
            });
        }
        Ok(Self {
            beacon_time,
            observed_time,
            calibrated_rate,
        })
    }

    pub fn elapsed(&self) -> u64 {
        self.observed_time - self.beacon_time
    }

    pub fn calibrated_rate(&self) -> Option<f64> {
        self.calibrated_rate
    }
}

/// Production setup: the factorization of `N` is dropped before returning.
pub fn sls_setup<R: RngCore + ?Sized>(
    cfg: SecurityConfig,
    time_bound: u64,
    rng: &mut R,
) -> Result<(SlsPublicParams, SlsSecretKey)> {
    let (pp, sk, _trapdoor) = sls_setup_test_mode(cfg, time_bound, rng)?;
    Ok((pp, sk))
}

/// Like [`sls_setup`] but keeps the trapdoor, for oracle checks.
pub fn sls_setup_test_mode<R: RngCore + ?Sized>(
    cfg: SecurityConfig,
    time_bound: u64,
    rng: &mut R,
) -> Result<(SlsPublicParams, SlsSecretKey, TrapdoorSecret)> {
    let (inner, sp, keypair) = tlpke::tlpke_setup(cfg, time_bound, rng)?;
    Ok((
        SlsPublicParams { inner },
        SlsSecretKey(keypair.secret().clone()),
        sp,
    ))
}

/// Builds parameters for an existing puzzle and signing keypair.
pub fn sls_setup_with(
    rsw: RswPublicParams,
    sp: &TrapdoorSecret,
    puzzle_input: GroupElement,
    keypair: &Keypair,
) -> Result<(SlsPublicParams, SlsSecretKey)> {
    let inner = tlpke::tlpke_setup_with(rsw, sp, puzzle_input, keypair)?;
    Ok((SlsPublicParams { inner }, SlsSecretKey(keypair.secret().clone())))
}

fn sign_with(pp: &SlsPublicParams, message: &[u8], beacon: &BeaconValue, sk: &SecretScalar) -> ShortLivedSignature {
    let digest = message_digest(message, &beacon.value);
    ShortLivedSignature {
        sigma: dlog::schnorr_sign(pp.group(), sk, &digest),
        beacon: *beacon,
    }
}

pub fn sls_sign(
    pp: &SlsPublicParams,
    message: &[u8],
    beacon: &BeaconValue,
    key: &SlsSecretKey,
) -> Result<ShortLivedSignature> {
    if &pp.group().derive_public(&key.0) != pp.sig_pk() {
        return Err(Error::KeyMismatch);
    }
    Ok(sign_with(pp, message, beacon, &key.0))
}

/// Recovers the signing key with `T` sequential squarings, then signs
/// exactly as [`sls_sign`] would.
pub fn sls_forge_sign(
    pp: &SlsPublicParams,
    message: &[u8],
    beacon: &BeaconValue,
) -> Result<ShortLivedSignature> {
    let out = tlpke::tlpke_eval(&pp.inner)?;
    Ok(sign_with(pp, message, beacon, &out.recovered_sk))
}

pub fn sls_verify(
    pp: &SlsPublicParams,
    message: &[u8],
    beacon: &BeaconValue,
    sig: &ShortLivedSignature,
) -> Verdict {
    if sig.beacon.value != beacon.value {
        return Verdict::Reject;
    }
    let digest = message_digest(message, &beacon.value);
    if dlog::schnorr_verify(pp.group(), pp.sig_pk(), &digest, &sig.sigma) {
        Verdict::Accept
    } else {
        Verdict::Reject
    }
}

/// Exact test of `elapsed * rate >= squarings`, with `rate` taken at its
/// exact binary value.
pub fn squarings_reached(elapsed: u64, rate: f64, squarings: u64) -> bool {
    let (mantissa, exponent, sign) = rate.integer_decode();
    if sign < 0 || mantissa == 0 {
        return squarings == 0;
    }
    let mut lhs = BigUint::from(elapsed) * mantissa;
    let mut rhs = BigUint::from(squarings);
    if exponent >= 0 {
        lhs <<= exponent as u32;
    } else {
        rhs <<= exponent.unsigned_abs() as u32;
    }
    lhs >= rhs
}

/// Advisory check, separate from [`sls_verify`]: still convincing iff fewer
/// than `T` squarings fit in the time since the beacon round.
pub fn sls_check_freshness(ctx: &FreshnessContext, pp: &SlsPublicParams) -> Result<Freshness> {
    let rate = ctx.calibrated_rate.ok_or(Error::MissingCalibration)?;
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::MissingCalibration);
    }
    Ok(if squarings_reached(ctx.elapsed(), rate, pp.time_bound()) {
        Freshness::Expired
    } else {
        Freshness::Convincing
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beacon::MockBeacon;
    use crate::rsw;
    use num_traits::ToPrimitive;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    fn beacon_value(round: u64) -> BeaconValue {
        let b = MockBeacon::with_genesis([3u8; 32], 10, 1000).unwrap();
        b.get_at(round, u64::MAX).unwrap()
    }

    fn toy() -> (SlsPublicParams, SlsSecretKey, TrapdoorSecret) {
        let sp = TrapdoorSecret::new(7u32.into(), 11u32.into()).unwrap();
        let m = sp.modulus();
        let group = Arc::new(SchnorrGroup::new(107u32.into(), 53u32.into(), 4u32.into()).unwrap());
        let kp = Keypair::from_secret(group, SecretScalar::new(42u32.into())).unwrap();
        let x = GroupElement::new(2u32.into(), &m).unwrap();
        let (pp, sk) = sls_setup_with(RswPublicParams::new(m, 3).unwrap(), &sp, x, &kp).unwrap();
        (pp, sk, sp)
    }

    #[test]
    fn toy_setup_masks_key() {
        let (pp, sk, sp) = toy();
        assert_eq!(pp.masked_sk().to_u64(), Some(67));
        assert_eq!(pp.group().derive_public(sk.scalar()), *pp.sig_pk());
        let y = rsw::rsw_td_eval(pp.as_tlpke().rsw(), &sp, pp.puzzle_input()).unwrap().y;
        let n = pp.modulus().n();
        assert_eq!(&((pp.masked_sk() + n - y.value()) % n), sk.scalar().value());
    }

    #[test]
    fn toy_forge_equals_sign() {
        let (pp, sk, _) = toy();
        for round in 0..20 {
            let r = beacon_value(round);
            let msg = format!("message {round}");
            let signed = sls_sign(&pp, msg.as_bytes(), &r, &sk).unwrap();
            let forged = sls_forge_sign(&pp, msg.as_bytes(), &r).unwrap();
            assert_eq!(signed, forged);
            assert_eq!(sls_verify(&pp, msg.as_bytes(), &r, &forged), Verdict::Accept);
        }
    }

    #[test]
    fn generated_params_sign_verify_forge() {
        let cfg = SecurityConfig::new(32).unwrap();
        let (pp, sk, sp) = sls_setup_test_mode(cfg, 1 << 8, &mut rng(1)).unwrap();
        assert!(sp.matches(pp.modulus()));
        let r = beacon_value(4);
        let sig = sls_sign(&pp, b"hi", &r, &sk).unwrap();
        assert_eq!(sig, sls_sign(&pp, b"hi", &r, &sk).unwrap());
        assert_eq!(sls_verify(&pp, b"hi", &r, &sig), Verdict::Accept);
        assert_eq!(sls_forge_sign(&pp, b"hi", &r).unwrap(), sig);
    }

    #[test]
    fn production_setup_matches_test_mode_under_seed() {
        let cfg = SecurityConfig::new(24).unwrap();
        let (a, ka) = sls_setup(cfg, 64, &mut rng(2)).unwrap();
        let (b, kb, _) = sls_setup_test_mode(cfg, 64, &mut rng(2)).unwrap();
        assert_eq!(a, b);
        assert_eq!(ka, kb);
    }

    #[test]
    fn beacon_changes_digest_and_signature() {
        let r1 = beacon_value(1);
        let r2 = beacon_value(2);
        assert_ne!(message_digest(b"m", &r1.value), message_digest(b"m", &r2.value));
        let (pp, sk, _) = toy();
        let cfg = SecurityConfig::new(24).unwrap();
        let (big, big_sk) = sls_setup(cfg, 4, &mut rng(3)).unwrap();
        for (pp, sk) in [(&pp, &sk), (&big, &big_sk)] {
            let sig = sls_sign(pp, b"m", &r1, sk).unwrap();
            let mut moved = sig.clone();
            moved.beacon = r2;
            assert_eq!(sls_verify(pp, b"m", &r2, &moved), Verdict::Reject);
            assert_eq!(sls_verify(pp, b"m", &r2, &sig), Verdict::Reject);
        }
    }

    #[test]
    fn tampering_rejects() {
        let cfg = SecurityConfig::new(32).unwrap();
        let (pp, sk) = sls_setup(cfg, 16, &mut rng(4)).unwrap();
        let r = beacon_value(7);
        let msg = b"pay alice 5".to_vec();
        let sig = sls_sign(&pp, &msg, &r, &sk).unwrap();

        let mut m2 = msg.clone();
        m2[0] ^= 1;
        assert_eq!(sls_verify(&pp, &m2, &r, &sig), Verdict::Reject);

        let mut s2 = sig.clone();
        s2.sigma[0] ^= 0x80;
        assert_eq!(sls_verify(&pp, &msg, &r, &s2), Verdict::Reject);

        let mut truncated = sig.clone();
        truncated.sigma.pop();
        assert_eq!(sls_verify(&pp, &msg, &r, &truncated), Verdict::Reject);
    }

    #[test]
    fn sign_with_wrong_key() {
        let (pp, _, _) = toy();
        let wrong = SlsSecretKey::new(SecretScalar::new(41u32.into()));
        assert!(matches!(
            sls_sign(&pp, b"m", &beacon_value(0), &wrong),
            Err(Error::KeyMismatch)
        ));
    }

    fn pp_with_t(t: u64) -> SlsPublicParams {
        let (pp, _, sp) = toy();
        let group = pp.group().clone();
        let kp = Keypair::from_secret(group, SecretScalar::new(42u32.into())).unwrap();
        let rsw_pp = pp.as_tlpke().rsw().with_time_bound(t).unwrap();
        sls_setup_with(rsw_pp, &sp, pp.puzzle_input().clone(), &kp).unwrap().0
    }

    #[test]
    fn freshness_examples() {
        let pp = pp_with_t(1 << 21);
        let ctx = FreshnessContext::new(100, 100, Some(5.0)).unwrap();
        assert_eq!(sls_check_freshness(&ctx, &pp).unwrap(), Freshness::Convincing);

        let ctx = FreshnessContext::new(100, 102, Some(1e6)).unwrap();
        assert_eq!(sls_check_freshness(&ctx, &pp).unwrap(), Freshness::Convincing);

        let pp = pp_with_t(2_000_000);
        assert_eq!(sls_check_freshness(&ctx, &pp).unwrap(), Freshness::Expired);
        let pp = pp_with_t(2_000_001);
        assert_eq!(sls_check_freshness(&ctx, &pp).unwrap(), Freshness::Convincing);
    }

    #[test]
    fn freshness_errors() {
        let pp = pp_with_t(10);
        let ctx = FreshnessContext::new(0, 5, None).unwrap();
        assert!(matches!(sls_check_freshness(&ctx, &pp), Err(Error::MissingCalibration)));
        for bad in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            let ctx = FreshnessContext::new(0, 5, Some(bad)).unwrap();
            assert!(sls_check_freshness(&ctx, &pp).is_err());
        }
        assert!(matches!(FreshnessContext::new(6, 5, Some(1.0)), Err(Error::ClockSkew { .. })));
    }

    #[test]
    fn squarings_reached_is_exact() {
        // 0.1 is slightly above 1/10 in binary, so 10 * 0.1 > 1 exactly.
        assert!(squarings_reached(10, 0.1, 1));
        // 0.3 is slightly below 3/10, so 10 * 0.3 < 3.
        assert!(!squarings_reached(10, 0.3, 3));
        assert!(squarings_reached(3, 0.5, 1));
        assert!(!squarings_reached(1, 0.5, 1));
        assert!(squarings_reached(u64::MAX, 2.0, u64::MAX));
        assert!(squarings_reached(0, 1.0, 0));
    }
}
