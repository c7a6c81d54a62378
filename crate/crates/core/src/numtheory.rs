//! Safe-prime RSA moduli, the factorization trapdoor, and elements of `Z*_N`.

use std::fmt;
use std::sync::OnceLock;

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::hash::tagged_hash;
use crate::{Error, Result};

/// Miller-Rabin rounds for every probabilistic primality decision.
pub const MILLER_RABIN_ROUNDS: usize = 40;

/// Smallest accepted per-prime bit length. Real deployments want >= 1024.
pub const MIN_LAMBDA: u64 = 16;

/// 5 and 7 are the smallest safe primes with a well-defined bit length >= 3.
pub const MIN_SAFE_PRIME_BITS: u64 = 3;

const MAX_PAIR_DRAWS: u64 = 64;

/// The safe-prime search gives up after `ATTEMPTS_PER_BIT * bits` candidates.
pub const ATTEMPTS_PER_BIT: u64 = 10_000;

const SMALL_PRIME_BOUND: u32 = 2048;

/// Fixed witnesses that make Miller-Rabin exact below 3.3 * 10^24.
const FIXED_BASES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn small_primes() -> &'static [u32] {
    static PRIMES: OnceLock<Vec<u32>> = OnceLock::new();
    PRIMES.get_or_init(|| {
        let n = SMALL_PRIME_BOUND as usize;
        let mut composite = vec![false; n + 1];
        let mut out = Vec::new();
        for i in 2..=n {
            if !composite[i] {
                out.push(i as u32);
                let mut k = i * i;
                while k <= n {
                    composite[k] = true;
                    k += i;
                }
            }
        }
        out
    })
}

/// Security parameter, read as the bit length of each prime factor of `N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SecurityConfig {
    lambda: u64,
}

impl SecurityConfig {
    pub fn new(lambda: u64) -> Result<Self> {
        if lambda < MIN_LAMBDA {
            return Err(Error::SecurityParameterTooSmall {
                lambda,
                min: MIN_LAMBDA,
            });
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> u64 {
        self.lambda
    }

    /// Bit length of `N`.
    pub fn modulus_bits(&self) -> u64 {
        2 * self.lambda
    }
}

/// Short fingerprint of a modulus, used to bind group elements to it.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModulusId([u8; 8]);

impl ModulusId {
    fn of(n: &BigUint) -> Self {
        let h = tagged_hash("modulus-id", &[&n.to_bytes_be()]);
        let mut id = [0u8; 8];
        id.copy_from_slice(&h[..8]);
        Self(id)
    }
}

impl fmt::Debug for ModulusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ModulusId(")?;
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        write!(f, ")")
    }
}

/// The public RSA modulus `N`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RsaModulus {
    n: BigUint,
    bit_length: u64,
    id: ModulusId,
}

impl RsaModulus {
    /// Wraps `n` after checking it is odd and composite. The factors are not
    /// (and cannot be) checked to be safe primes here.
    pub fn new(n: BigUint) -> Result<Self> {
        if n.is_even() {
            return Err(Error::InvalidModulus("modulus must be odd"));
        }
        if n < BigUint::from(9u32) || is_prime(&n) {
            return Err(Error::InvalidModulus("modulus must be composite"));
        }
        Ok(Self::new_unchecked(n))
    }

    fn new_unchecked(n: BigUint) -> Self {
        let bit_length = n.bits();
        let id = ModulusId::of(&n);
        Self { n, bit_length, id }
    }

    pub fn n(&self) -> &BigUint {
        &self.n
    }

    pub fn bit_length(&self) -> u64 {
        self.bit_length
    }

    pub fn id(&self) -> ModulusId {
        self.id
    }

    /// Number of bytes needed to hold any residue mod `N`.
    pub fn byte_len(&self) -> usize {
        self.bit_length.div_ceil(8) as usize
    }
}

/// The factorization of `N`: `p`, `q` and `φ(N) = (p-1)(q-1)`.
#[derive(Clone, PartialEq, Eq)]
pub struct TrapdoorSecret {
    p: BigUint,
    q: BigUint,
    phi: BigUint,
}

impl TrapdoorSecret {
    /// Validates that `p != q` are both safe primes.
    pub fn new(p: BigUint, q: BigUint) -> Result<Self> {
        if p == q {
            return Err(Error::InvalidTrapdoor("p and q must differ"));
        }
        if !is_safe_prime(&p) || !is_safe_prime(&q) {
            return Err(Error::InvalidTrapdoor("p and q must be safe primes"));
        }
        Ok(Self::from_factors(p, q))
    }

    fn from_factors(p: BigUint, q: BigUint) -> Self {
        let one = BigUint::one();
        let phi = (&p - &one) * (&q - &one);
        Self { p, q, phi }
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    pub fn phi(&self) -> &BigUint {
        &self.phi
    }

    /// The modulus `p * q` this trapdoor opens.
    pub fn modulus(&self) -> RsaModulus {
        RsaModulus::new_unchecked(&self.p * &self.q)
    }

    pub fn matches(&self, modulus: &RsaModulus) -> bool {
        &self.p * &self.q == modulus.n
    }
}

impl fmt::Debug for TrapdoorSecret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("TrapdoorSecret { .. }")
    }
}

/// An element of `Z*_N`, tagged with the modulus it lives under.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroupElement {
    value: BigUint,
    modulus: ModulusId,
}

impl GroupElement {
    pub fn new(value: BigUint, modulus: &RsaModulus) -> Result<Self> {
        if value.is_zero() || value >= modulus.n {
            return Err(Error::NotInGroup("value outside [1, N-1]"));
        }
        if !value.gcd(&modulus.n).is_one() {
            return Err(Error::NotInGroup("value shares a factor with N"));
        }
        Ok(Self {
            value,
            modulus: modulus.id,
        })
    }

    /// Caller guarantees `value` is a unit mod the modulus behind `id`.
    pub(crate) fn from_unit(value: BigUint, id: ModulusId) -> Self {
        Self { value, modulus: id }
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn into_value(self) -> BigUint {
        self.value
    }

    pub fn modulus_id(&self) -> ModulusId {
        self.modulus
    }

    pub fn is_bound_to(&self, modulus: &RsaModulus) -> bool {
        self.modulus == modulus.id
    }
}

fn miller_rabin_witness(n: &BigUint, n_minus_one: &BigUint, d: &BigUint, s: u64, a: &BigUint) -> bool {
    let mut x = a.modpow(d, n);
    if x.is_one() || &x == n_minus_one {
        return true;
    }
    for _ in 1..s {
        x = &x * &x % n;
        if &x == n_minus_one {
            return true;
        }
        if x.is_one() {
            return false;
        }
    }
    false
}

enum TrialDivision {
    Prime,
    Composite,
    Undecided,
}

fn trial_division(n: &BigUint) -> TrialDivision {
    if let Some(small) = n.to_u32() {
        if small < 2 {
            return TrialDivision::Composite;
        }
        if small <= SMALL_PRIME_BOUND {
            return if small_primes().binary_search(&small).is_ok() {
                TrialDivision::Prime
            } else {
                TrialDivision::Composite
            };
        }
    }
    for &sp in small_primes() {
        if (n % sp).is_zero() {
            return TrialDivision::Composite;
        }
    }
    let bound = u64::from(SMALL_PRIME_BOUND);
    if n.to_u64().is_some_and(|v| v < bound * bound) {
        return TrialDivision::Prime;
    }
    TrialDivision::Undecided
}

fn decompose(n: &BigUint) -> (BigUint, BigUint, u64) {
    let n_minus_one = n - 1u32;
    let s = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> s;
    (n_minus_one, d, s)
}

/// Miller-Rabin with `rounds` random witnesses drawn from `rng`, after
/// trial division by the primes below 2048.
pub fn is_probable_prime<R: RngCore + ?Sized>(n: &BigUint, rounds: usize, rng: &mut R) -> bool {
    match trial_division(n) {
        TrialDivision::Prime => return true,
        TrialDivision::Composite => return false,
        TrialDivision::Undecided => {}
    }
    let (n_minus_one, d, s) = decompose(n);
    let low = BigUint::from(2u32);
    (0..rounds).all(|_| {
        let a = rng.gen_biguint_range(&low, &n_minus_one);
        miller_rabin_witness(n, &n_minus_one, &d, s, &a)
    })
}

/// Deterministic primality check: twelve fixed witnesses (exact below
/// 3.3 * 10^24) topped up to [`MILLER_RABIN_ROUNDS`] with witnesses derived
/// from `n` itself.
pub fn is_prime(n: &BigUint) -> bool {
    match trial_division(n) {
        TrialDivision::Prime => return true,
        TrialDivision::Composite => return false,
        TrialDivision::Undecided => {}
    }
    let (n_minus_one, d, s) = decompose(n);
    for base in FIXED_BASES {
        if !miller_rabin_witness(n, &n_minus_one, &d, s, &BigUint::from(base)) {
            return false;
        }
    }
    if n.bits() <= 81 {
        return true;
    }
    let mut rng = ChaCha20Rng::from_seed(tagged_hash("mr-witness", &[&n.to_bytes_be()]));
    let low = BigUint::from(2u32);
    (FIXED_BASES.len()..MILLER_RABIN_ROUNDS).all(|_| {
        let a = rng.gen_biguint_range(&low, &n_minus_one);
        miller_rabin_witness(n, &n_minus_one, &d, s, &a)
    })
}

/// `n` prime and `(n - 1) / 2` prime.
pub fn is_safe_prime(n: &BigUint) -> bool {
    n.is_odd() && n > &BigUint::from(3u32) && is_prime(&(n >> 1u32)) && is_prime(n)
}

/// Cheap filter: rejects `c` if it, or `(c - 1) / 2`, has a small factor.
fn passes_safe_sieve(c: &BigUint) -> bool {
    let half = c >> 1u32;
    // c = 1 mod 4 makes (c-1)/2 even; only c = 5 survives that.
    if half.is_even() {
        return half == BigUint::from(2u32);
    }
    for &sp in &small_primes()[1..] {
        if c <= &BigUint::from(sp) {
            break;
        }
        let r = (c % sp).to_u32().unwrap_or(0);
        if r == 0 {
            return false;
        }
        // c = 1 (mod sp) <=> sp divides c - 1 = 2 * half.
        if r == 1 && half != BigUint::from(sp) {
            return false;
        }
    }
    true
}

/// Samples a safe prime of exactly `bits` bits: random odd candidates, each
/// tested first for itself and then for `(candidate - 1) / 2`.
pub fn gen_safe_prime<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> Result<BigUint> {
    if bits < MIN_SAFE_PRIME_BITS {
        return Err(Error::PrimeBitsTooSmall {
            bits,
            min: MIN_SAFE_PRIME_BITS,
        });
    }
    let attempts = ATTEMPTS_PER_BIT * bits;
    let top = BigUint::one() << (bits - 1);
    for _ in 0..attempts {
        let mut c = rng.gen_biguint(bits) | &top;
        c.set_bit(0, true);
        if !passes_safe_sieve(&c) {
            continue;
        }
        let half = &c >> 1u32;
        if !is_probable_prime(&c, 1, rng) || !is_probable_prime(&half, 1, rng) {
            continue;
        }
        if is_probable_prime(&c, MILLER_RABIN_ROUNDS, rng)
            && is_probable_prime(&half, MILLER_RABIN_ROUNDS, rng)
        {
            return Ok(c);
        }
    }
    Err(Error::PrimeSearchExhausted { bits, attempts })
}

/// Builds `N = p * q` from two distinct `lambda`-bit safe primes, redrawing
/// the pair until `N` has exactly `2 * lambda` bits.
pub fn setup_modulus<R: RngCore + ?Sized>(
    cfg: SecurityConfig,
    rng: &mut R,
) -> Result<(RsaModulus, TrapdoorSecret)> {
    for _ in 0..MAX_PAIR_DRAWS {
        let p = gen_safe_prime(cfg.lambda, rng)?;
        let q = gen_safe_prime(cfg.lambda, rng)?;
        if p != q && (&p * &q).bits() == cfg.modulus_bits() {
            let sp = TrapdoorSecret::from_factors(p, q);
            return Ok((sp.modulus(), sp));
        }
    }
    Err(Error::PrimeSearchExhausted {
        bits: cfg.lambda,
        attempts: MAX_PAIR_DRAWS,
    })
}

/// Uniform `x` with `1 < x < N` and `gcd(x, N) = 1`, by rejection.
pub fn sample_element<R: RngCore + ?Sized>(modulus: &RsaModulus, rng: &mut R) -> GroupElement {
    let low = BigUint::from(2u32);
    loop {
        let c = rng.gen_biguint_range(&low, &modulus.n);
        if c.gcd(&modulus.n).is_one() {
            return GroupElement::from_unit(c, modulus.id);
        }
    }
}

/// Rejection sampling over an explicit candidate stream: the first
/// candidate in `(1, N)` coprime to `N` wins.
pub fn sample_element_from<I>(modulus: &RsaModulus, candidates: I) -> Result<GroupElement>
where
    I: IntoIterator<Item = BigUint>,
{
    let one = BigUint::one();
    candidates
        .into_iter()
        .find(|c| c > &one && c < &modulus.n && c.gcd(&modulus.n).is_one())
        .map(|c| GroupElement::from_unit(c, modulus.id))
        .ok_or(Error::CandidatesExhausted)
}

/// `base^exponent mod N`.
pub fn mod_exp(base: &GroupElement, exponent: &BigUint, modulus: &RsaModulus) -> Result<GroupElement> {
    if !base.is_bound_to(modulus) {
        return Err(Error::ModulusMismatch);
    }
    let value = base.value.modpow(exponent, &modulus.n);
    Ok(GroupElement::from_unit(value, modulus.id))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    fn naive_is_prime(n: u64) -> bool {
        n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
    }

    fn safe_primes_with_bits(bits: u32) -> Vec<u64> {
        (1u64 << (bits - 1)..1u64 << bits)
            .filter(|&p| naive_is_prime(p) && naive_is_prime((p - 1) / 2))
            .collect()
    }

    fn toy() -> (RsaModulus, TrapdoorSecret) {
        let sp = TrapdoorSecret::new(big(7), big(11)).unwrap();
        (sp.modulus(), sp)
    }

    #[test]
    fn primality_matches_trial_division() {
        let mut r = rng(1);
        for n in 0u64..5000 {
            let expect = naive_is_prime(n);
            assert_eq!(is_prime(&big(n)), expect, "is_prime({n})");
            assert_eq!(is_probable_prime(&big(n), 8, &mut r), expect, "probable({n})");
        }
        for n in (1u64 << 40)..(1u64 << 40) + 400 {
            assert_eq!(is_prime(&big(n)), naive_is_prime(n), "{n}");
        }
    }

    #[test]
    fn large_known_values() {
        // 2^127 - 1 is a Mersenne prime; 2^128 + 1 is not prime.
        let m127 = (BigUint::one() << 127u32) - 1u32;
        assert!(is_prime(&m127));
        assert!(!is_prime(&((BigUint::one() << 128u32) + 1u32)));
        // Carmichael number.
        assert!(!is_prime(&big(561)));
        assert!(!is_prime(&big(3_215_031_751)));
    }

    #[test]
    fn safe_prime_three_bits() {
        let oracle = safe_primes_with_bits(3);
        assert_eq!(oracle, vec![5, 7]);
        for seed in 0..20 {
            let p = gen_safe_prime(3, &mut rng(seed)).unwrap();
            assert!(oracle.contains(&p.to_u64().unwrap()));
        }
    }

    #[test]
    fn safe_prime_four_bits_is_eleven() {
        assert_eq!(safe_primes_with_bits(4), vec![11]);
        for seed in 0..20 {
            assert_eq!(gen_safe_prime(4, &mut rng(seed)).unwrap(), big(11));
        }
    }

    #[test]
    fn safe_prime_eight_bits_in_enumeration() {
        let oracle = safe_primes_with_bits(8);
        // 191 and 239 are prime but (p - 1) / 2 is not.
        assert_eq!(oracle, vec![167, 179, 227]);
        for seed in 0..50 {
            let p = gen_safe_prime(8, &mut rng(seed)).unwrap();
            assert!(oracle.contains(&p.to_u64().unwrap()), "{p}");
        }
    }

    #[test]
    fn safe_prime_bit_floor() {
        assert!(matches!(
            gen_safe_prime(2, &mut rng(0)),
            Err(Error::PrimeBitsTooSmall { bits: 2, .. })
        ));
    }

    #[test]
    fn safe_primes_at_desk_scale_cross_check() {
        for seed in 0..10 {
            for bits in [16u64, 24, 32, 40, 48] {
                let p = gen_safe_prime(bits, &mut rng(seed)).unwrap();
                let v = p.to_u64().unwrap();
                assert_eq!(p.bits(), bits);
                assert!(naive_is_prime(v) && naive_is_prime((v - 1) / 2), "{v}");
            }
        }
    }

    #[test]
    fn security_config_floor() {
        assert!(SecurityConfig::new(15).is_err());
        assert_eq!(SecurityConfig::new(16).unwrap().modulus_bits(), 32);
    }

    #[test]
    fn toy_modulus() {
        let (m, sp) = toy();
        assert_eq!(m.n(), &big(77));
        assert_eq!(sp.phi(), &big(60));
        assert_eq!(m.bit_length(), 7);
        assert!(sp.matches(&m));
    }

    #[test]
    fn trapdoor_rejects_bad_factors() {
        assert!(TrapdoorSecret::new(big(7), big(7)).is_err());
        // 13 is prime but 6 is not.
        assert!(TrapdoorSecret::new(big(7), big(13)).is_err());
    }

    #[test]
    fn modulus_rejects_even_and_prime() {
        assert!(RsaModulus::new(big(78)).is_err());
        assert!(RsaModulus::new(big(79)).is_err());
        assert!(RsaModulus::new(big(77)).is_ok());
    }

    #[test]
    fn setup_modulus_properties() {
        let cfg = SecurityConfig::new(24).unwrap();
        for seed in 0..5 {
            let (m, sp) = setup_modulus(cfg, &mut rng(seed)).unwrap();
            assert_eq!(m.n(), &(sp.p() * sp.q()));
            assert_ne!(sp.p(), sp.q());
            assert_eq!(sp.p().bits(), 24);
            assert_eq!(sp.q().bits(), 24);
            assert_eq!(m.bit_length(), 48);
            for f in [sp.p(), sp.q()] {
                let v = f.to_u64().unwrap();
                assert!(naive_is_prime(v) && naive_is_prime((v - 1) / 2));
            }
            assert_eq!(sp.phi(), &((sp.p() - 1u32) * (sp.q() - 1u32)));
        }
    }

    #[test]
    fn setup_modulus_is_seed_deterministic() {
        let cfg = SecurityConfig::new(32).unwrap();
        let a = setup_modulus(cfg, &mut rng(9)).unwrap();
        let b = setup_modulus(cfg, &mut rng(9)).unwrap();
        assert_eq!(a.0, b.0);
    }

    #[test]
    fn sample_from_candidate_stream() {
        let (m, _) = toy();
        let x = sample_element_from(&m, [7u32, 14, 12].map(BigUint::from)).unwrap();
        assert_eq!(x.value(), &big(12));
        let x = sample_element_from(&m, [big(2)]).unwrap();
        assert_eq!(x.value(), &big(2));
        assert!(matches!(
            sample_element_from(&m, [big(0), big(1), big(77), big(11)]),
            Err(Error::CandidatesExhausted)
        ));
    }

    #[test]
    fn sampled_elements_are_units() {
        let (m, _) = toy();
        let mut r = rng(3);
        for _ in 0..500 {
            let x = sample_element(&m, &mut r);
            assert!(x.value() > &BigUint::one() && x.value() < m.n());
            assert!(x.value().gcd(m.n()).is_one());
        }
    }

    #[test]
    fn mod_exp_examples() {
        let (m, _) = toy();
        let two = GroupElement::new(big(2), &m).unwrap();
        assert_eq!(mod_exp(&two, &big(8), &m).unwrap().value(), &big(25));
        assert_eq!(mod_exp(&two, &big(0), &m).unwrap().value(), &big(1));
        assert_eq!(mod_exp(&two, &big(1), &m).unwrap().value(), &big(2));
    }

    #[test]
    fn mod_exp_matches_naive_oracle() {
        let (m, _) = toy();
        for base in 1u64..100 {
            let reduced = base % 77;
            if reduced == 0 || num_integer::gcd(reduced, 77) != 1 {
                continue;
            }
            let b = GroupElement::new(big(reduced), &m).unwrap();
            for exp in 0u64..100 {
                let mut acc = 1u64;
                for _ in 0..exp {
                    acc = acc * base % 77;
                }
                assert_eq!(mod_exp(&b, &big(exp), &m).unwrap().value(), &big(acc));
            }
        }
    }

    #[test]
    fn mod_exp_rejects_foreign_element() {
        let (m, _) = toy();
        let other = TrapdoorSecret::new(big(7), big(23)).unwrap().modulus();
        let x = GroupElement::new(big(2), &other).unwrap();
        assert!(matches!(mod_exp(&x, &big(3), &m), Err(Error::ModulusMismatch)));
    }

    #[test]
    fn group_element_validation() {
        let (m, _) = toy();
        assert!(GroupElement::new(big(0), &m).is_err());
        assert!(GroupElement::new(big(77), &m).is_err());
        assert!(GroupElement::new(big(14), &m).is_err());
        assert!(GroupElement::new(big(1), &m).is_ok());
    }
}
