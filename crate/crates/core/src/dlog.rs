//! Prime-order Schnorr group `<g> ⊂ Z*_P` of order `q`, with the two inner
//! schemes the time-lock constructions wrap:
//!
//! * Schnorr signatures with deterministic nonces,
//! * hybrid encryption: ElGamal key encapsulation + ChaCha20-Poly1305.
//!
//! Both are keyed by a single integer scalar `sk ∈ [0, q)`, which is what
//! lets the secret key be masked additively modulo the RSA modulus.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::hash::tagged_hash;
use crate::numtheory::{is_prime, is_probable_prime, MILLER_RABIN_ROUNDS};
use crate::{Error, Result};

/// Subgroup order never exceeds this many bits.
pub const MAX_ORDER_BITS: u64 = 256;

/// Field size paired with a full 256-bit subgroup.
pub const FULL_FIELD_BITS: u64 = 2048;

const AEAD_TAG_LEN: usize = 16;

#[derive(Clone, PartialEq, Eq)]
pub struct SchnorrGroup {
    p: BigUint,
    q: BigUint,
    g: BigUint,
    element_len: usize,
    scalar_len: usize,
}

impl fmt::Debug for SchnorrGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SchnorrGroup")
            .field("p_bits", &self.p.bits())
            .field("q_bits", &self.q.bits())
            .finish()
    }
}

impl SchnorrGroup {
    pub fn new(p: BigUint, q: BigUint, g: BigUint) -> Result<Self> {
        if !is_prime(&q) || !is_prime(&p) {
            return Err(Error::InvalidGroup("p and q must be prime"));
        }
        if !(&p - 1u32).is_multiple_of(&q) {
            return Err(Error::InvalidGroup("q must divide p - 1"));
        }
        if g <= BigUint::one() || g >= p || !g.modpow(&q, &p).is_one() {
            return Err(Error::InvalidGroup("g must generate the order-q subgroup"));
        }
        Ok(Self::from_parts(p, q, g))
    }

    fn from_parts(p: BigUint, q: BigUint, g: BigUint) -> Self {
        let element_len = p.bits().div_ceil(8) as usize;
        let scalar_len = q.bits().div_ceil(8) as usize;
        Self {
            p,
            q,
            g,
            element_len,
            scalar_len,
        }
    }

    /// Random group with a `order_bits`-bit prime order and a
    /// `field_bits`-bit prime field `P = 2kq + 1`.
    pub fn generate<R: RngCore + ?Sized>(order_bits: u64, field_bits: u64, rng: &mut R) -> Result<Self> {
        if order_bits < 2 || field_bits < order_bits + 2 {
            return Err(Error::InvalidGroup("field must be at least two bits wider than the order"));
        }
        let q = loop {
            let mut c = rng.gen_biguint(order_bits) | (BigUint::one() << (order_bits - 1));
            if order_bits > 2 {
                c.set_bit(0, true);
            }
            if is_probable_prime(&c, MILLER_RABIN_ROUNDS, rng) {
                break c;
            }
        };
        let two_q = &q << 1u32;
        let low = BigUint::one() << (field_bits - 1);
        let high = BigUint::one() << field_bits;
        let k_min = (&low - 1u32).div_ceil(&two_q);
        let k_max = (&high - 2u32) / &two_q + 1u32;
        if k_min >= k_max {
            return Err(Error::InvalidGroup("no cofactor fits the requested field size"));
        }
        let attempts = 10_000 * field_bits;
        for _ in 0..attempts {
            let k = rng.gen_biguint_range(&k_min, &k_max);
            let p = &k * &two_q + 1u32;
            if !is_probable_prime(&p, 1, rng) || !is_probable_prime(&p, MILLER_RABIN_ROUNDS, rng) {
                continue;
            }
            let cofactor = (&p - 1u32) / &q;
            let mut h = BigUint::from(2u32);
            loop {
                let g = h.modpow(&cofactor, &p);
                if !g.is_one() {
                    return Ok(Self::from_parts(p, q, g));
                }
                h += 1u32;
            }
        }
        Err(Error::InvalidGroup("field prime search exhausted"))
    }

    /// Order size used for an RSA modulus of `modulus_bits` bits: one bit
    /// short of the modulus (so `q < N`), capped at 256.
    pub fn order_bits_for(modulus_bits: u64) -> u64 {
        modulus_bits.saturating_sub(1).min(MAX_ORDER_BITS)
    }

    /// Field size used for a given order size.
    pub fn field_bits_for(order_bits: u64) -> u64 {
        if order_bits >= MAX_ORDER_BITS {
            FULL_FIELD_BITS
        } else {
            (2 * order_bits).max(order_bits + 16)
        }
    }

    /// The canonical group for an RSA modulus of the given bit length,
    /// derived deterministically and cached per process.
    pub fn for_modulus_bits(modulus_bits: u64) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<u64, Arc<SchnorrGroup>>>> = OnceLock::new();
        let order_bits = Self::order_bits_for(modulus_bits);
        let field_bits = Self::field_bits_for(order_bits);
        let cache = CACHE.get_or_init(Default::default);
        if let Some(g) = cache.lock().unwrap().get(&order_bits) {
            return Ok(Arc::clone(g));
        }
        let seed = tagged_hash(
            "group-derivation",
            &[&order_bits.to_be_bytes(), &field_bits.to_be_bytes()],
        );
        let group = Arc::new(Self::generate(order_bits, field_bits, &mut ChaCha20Rng::from_seed(seed))?);
        let mut guard = cache.lock().unwrap();
        Ok(Arc::clone(guard.entry(order_bits).or_insert(group)))
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn order(&self) -> &BigUint {
        &self.q
    }

    pub fn generator(&self) -> &BigUint {
        &self.g
    }

    pub fn element_len(&self) -> usize {
        self.element_len
    }

    pub fn scalar_len(&self) -> usize {
        self.scalar_len
    }

    /// `y ∈ [1, P)` and `y^q = 1`.
    pub fn contains(&self, y: &BigUint) -> bool {
        !y.is_zero() && y < &self.p && y.modpow(&self.q, &self.p).is_one()
    }

    pub fn derive_public(&self, sk: &SecretScalar) -> PublicKey {
        PublicKey(self.g.modpow(&sk.0, &self.p))
    }

    /// Uniform scalar in `[1, q)`.
    pub fn random_scalar<R: RngCore + ?Sized>(&self, rng: &mut R) -> BigUint {
        rng.gen_biguint_range(&BigUint::one(), &self.q)
    }

    /// 512 hash bits reduced mod `q`.
    fn hash_to_scalar(&self, tag: &str, parts: &[&[u8]]) -> BigUint {
        let mut wide = Vec::with_capacity(64);
        for block in [0u8, 1] {
            let mut all: Vec<&[u8]> = parts.to_vec();
            let b = [block];
            all.push(&b);
            wide.extend_from_slice(&tagged_hash(tag, &all));
        }
        BigUint::from_bytes_be(&wide) % &self.q
    }

    fn encode_element(&self, v: &BigUint) -> Vec<u8> {
        to_fixed_be(v, self.element_len)
    }

    fn encode_scalar(&self, v: &BigUint) -> Vec<u8> {
        to_fixed_be(v, self.scalar_len)
    }
}

pub(crate) fn to_fixed_be(v: &BigUint, len: usize) -> Vec<u8> {
    let bytes = v.to_bytes_be();
    let bytes = if v.is_zero() { Vec::new() } else { bytes };
    debug_assert!(bytes.len() <= len);
    let mut out = vec![0u8; len - bytes.len()];
    out.extend_from_slice(&bytes);
    out
}

/// Integer secret key of the inner schemes.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretScalar(BigUint);

impl SecretScalar {
    /// Accepts any value; range against a group is checked by [`Keypair`].
    pub fn new(value: BigUint) -> Self {
        Self(value)
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }
}

impl fmt::Debug for SecretScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretScalar(..)")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PublicKey(BigUint);

impl PublicKey {
    pub fn new(value: BigUint) -> Self {
        Self(value)
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }
}

#[derive(Clone, Debug)]
pub struct Keypair {
    group: Arc<SchnorrGroup>,
    secret: SecretScalar,
    public: PublicKey,
}

impl Keypair {
    pub fn generate<R: RngCore + ?Sized>(group: Arc<SchnorrGroup>, rng: &mut R) -> Self {
        let secret = SecretScalar(group.random_scalar(rng));
        let public = group.derive_public(&secret);
        Self {
            group,
            secret,
            public,
        }
    }

    pub fn from_secret(group: Arc<SchnorrGroup>, secret: SecretScalar) -> Result<Self> {
        if secret.0 >= group.q {
            return Err(Error::MalformedParameters("secret scalar outside [0, q)"));
        }
        let public = group.derive_public(&secret);
        Ok(Self {
            group,
            secret,
            public,
        })
    }

    pub fn group(&self) -> &Arc<SchnorrGroup> {
        &self.group
    }

    pub fn secret(&self) -> &SecretScalar {
        &self.secret
    }

    pub fn public(&self) -> &PublicKey {
        &self.public
    }
}

/// Schnorr signature `(e, s)` over `message`, serialized as two fixed-width
/// scalars. The nonce is `H(sk || message)`, so signing is deterministic.
pub fn schnorr_sign(group: &SchnorrGroup, sk: &SecretScalar, message: &[u8]) -> Vec<u8> {
    let sk_bytes = group.encode_scalar(&sk.0);
    let pk = group.encode_element(&group.derive_public(sk).0);
    let mut counter = 0u32;
    let k = loop {
        let k = group.hash_to_scalar("nonce", &[&sk_bytes, message, &counter.to_be_bytes()]);
        if !k.is_zero() {
            break k;
        }
        counter += 1;
    };
    let r = group.encode_element(&group.g.modpow(&k, &group.p));
    let e = group.hash_to_scalar("challenge", &[&r, &pk, message]);
    let s = (k + &e * &sk.0) % &group.q;
    let mut sig = group.encode_scalar(&e);
    sig.extend_from_slice(&group.encode_scalar(&s));
    sig
}

/// Checks `e == H(g^s * pk^(-e) || pk || message)`. Malformed input is just
/// `false`.
pub fn schnorr_verify(group: &SchnorrGroup, pk: &PublicKey, message: &[u8], sig: &[u8]) -> bool {
    if sig.len() != 2 * group.scalar_len || !group.contains(&pk.0) {
        return false;
    }
    let (e_bytes, s_bytes) = sig.split_at(group.scalar_len);
    let e = BigUint::from_bytes_be(e_bytes);
    let s = BigUint::from_bytes_be(s_bytes);
    if e >= group.q || s >= group.q {
        return false;
    }
    let neg_e = (&group.q - &e) % &group.q;
    let r = group.g.modpow(&s, &group.p) * pk.0.modpow(&neg_e, &group.p) % &group.p;
    let pk_bytes = group.encode_element(&pk.0);
    group.hash_to_scalar("challenge", &[&group.encode_element(&r), &pk_bytes, message]) == e
}

fn kem_key(group: &SchnorrGroup, ephemeral: &[u8], shared: &BigUint, pk: &BigUint) -> [u8; 32] {
    tagged_hash(
        "kem",
        &[ephemeral, &group.encode_element(shared), &group.encode_element(pk)],
    )
}

/// `R || AEAD_k(plaintext)` with `R = g^r`, `k = H(R, pk^r, pk)`.
pub fn hybrid_seal<R: RngCore + ?Sized>(
    group: &SchnorrGroup,
    pk: &PublicKey,
    plaintext: &[u8],
    rng: &mut R,
) -> Result<Vec<u8>> {
    if !group.contains(&pk.0) {
        return Err(Error::MalformedParameters("public key outside the group"));
    }
    let r = group.random_scalar(rng);
    let ephemeral = group.encode_element(&group.g.modpow(&r, &group.p));
    let shared = pk.0.modpow(&r, &group.p);
    let key = kem_key(group, &ephemeral, &shared, &pk.0);
    // Each key encrypts exactly one message, so a fixed nonce is sound.
    let body = ChaCha20Poly1305::new(Key::from_slice(&key))
        .encrypt(
            Nonce::from_slice(&[0u8; 12]),
            Payload {
                msg: plaintext,
                aad: &ephemeral,
            },
        )
        .map_err(|_| Error::Decryption)?;
    let mut out = ephemeral;
    out.extend_from_slice(&body);
    Ok(out)
}

pub fn hybrid_open(group: &SchnorrGroup, sk: &SecretScalar, ciphertext: &[u8]) -> Result<Vec<u8>> {
    if ciphertext.len() < group.element_len + AEAD_TAG_LEN {
        return Err(Error::Decryption);
    }
    let (ephemeral, body) = ciphertext.split_at(group.element_len);
    let r = BigUint::from_bytes_be(ephemeral);
    if !group.contains(&r) {
        return Err(Error::Decryption);
    }
    let shared = r.modpow(&sk.0, &group.p);
    let pk = group.derive_public(sk);
    let key = kem_key(group, ephemeral, &shared, &pk.0);
    ChaCha20Poly1305::new(Key::from_slice(&key))
        .decrypt(
            Nonce::from_slice(&[0u8; 12]),
            Payload {
                msg: body,
                aad: ephemeral,
            },
        )
        .map_err(|_| Error::Decryption)
}
