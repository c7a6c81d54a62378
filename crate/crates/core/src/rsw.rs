//! Repeated squaring: `y = x^(2^T) mod N`.
//!
//! [`rsw_eval`] is the slow, public path: exactly `T` modular squarings in a
//! plain loop. [`rsw_td_eval`] is the trapdoor path: reduce the exponent to
//! `v = 2^T mod φ(N)` and compute `x^v mod N`, at a cost independent of `T`.

use num_bigint::BigUint;
use rand::RngCore;

use crate::numtheory::{self, GroupElement, RsaModulus, SecurityConfig, TrapdoorSecret};
use crate::{Error, Result};

/// Largest accepted time bound.
pub const MAX_TIME_BOUND: u64 = (1 << 63) - 1;

/// Public parameters of the puzzle: the modulus and the number of squarings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RswPublicParams {
    modulus: RsaModulus,
    time_bound: u64,
}

impl RswPublicParams {
    pub fn new(modulus: RsaModulus, time_bound: u64) -> Result<Self> {
        if time_bound > MAX_TIME_BOUND {
            return Err(Error::TimeBoundTooLarge(time_bound));
        }
        Ok(Self {
            modulus,
            time_bound,
        })
    }

    pub fn modulus(&self) -> &RsaModulus {
        &self.modulus
    }

    pub fn time_bound(&self) -> u64 {
        self.time_bound
    }

    /// Same modulus, different `T`.
    pub fn with_time_bound(&self, time_bound: u64) -> Result<Self> {
        Self::new(self.modulus.clone(), time_bound)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RswOutput {
    pub y: GroupElement,
}

pub fn rsw_setup<R: RngCore + ?Sized>(
    cfg: SecurityConfig,
    time_bound: u64,
    rng: &mut R,
) -> Result<(RswPublicParams, TrapdoorSecret)> {
    if time_bound > MAX_TIME_BOUND {
        return Err(Error::TimeBoundTooLarge(time_bound));
    }
    let (modulus, sp) = numtheory::setup_modulus(cfg, rng)?;
    Ok((RswPublicParams::new(modulus, time_bound)?, sp))
}

pub fn rsw_sample<R: RngCore + ?Sized>(pp: &RswPublicParams, rng: &mut R) -> GroupElement {
    numtheory::sample_element(&pp.modulus, rng)
}

/// `T` sequential squarings of `x` modulo `n`. No exponent tricks.
pub fn repeated_squaring(x: &BigUint, squarings: u64, n: &BigUint) -> BigUint {
    let mut acc = x.clone();
    for _ in 0..squarings {
        acc = &acc * &acc % n;
    }
    acc
}

/// `2^T mod φ(N)`, computed by modular exponentiation so that `2^T` itself
/// never materializes.
pub fn trapdoor_exponent(time_bound: u64, phi: &BigUint) -> BigUint {
    BigUint::from(2u32).modpow(&BigUint::from(time_bound), phi)
}

pub fn rsw_eval(pp: &RswPublicParams, x: &GroupElement) -> Result<RswOutput> {
    if !x.is_bound_to(&pp.modulus) {
        return Err(Error::ModulusMismatch);
    }
    let y = repeated_squaring(x.value(), pp.time_bound, pp.modulus.n());
    Ok(RswOutput {
        y: GroupElement::from_unit(y, pp.modulus.id()),
    })
}

pub fn rsw_td_eval(
    pp: &RswPublicParams,
    sp: &TrapdoorSecret,
    x: &GroupElement,
) -> Result<RswOutput> {
    if !sp.matches(&pp.modulus) {
        return Err(Error::TrapdoorMismatch);
    }
    let v = trapdoor_exponent(pp.time_bound, sp.phi());
    let y = numtheory::mod_exp(x, &v, &pp.modulus)?;
    Ok(RswOutput { y })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_integer::Integer;
    use num_traits::{One, ToPrimitive};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn toy(t: u64) -> (RswPublicParams, TrapdoorSecret) {
        let sp = TrapdoorSecret::new(7u32.into(), 11u32.into()).unwrap();
        (RswPublicParams::new(sp.modulus(), t).unwrap(), sp)
    }

    fn elem(pp: &RswPublicParams, v: u32) -> GroupElement {
        GroupElement::new(v.into(), pp.modulus()).unwrap()
    }

    /// Squaring in u64 arithmetic, independent of the BigUint path.
    fn squarings_u64(x: u64, t: u64, n: u64) -> u64 {
        (0..t).fold(x, |acc, _| acc * acc % n)
    }

    #[test]
    fn eval_examples() {
        let (pp, _) = toy(3);
        assert_eq!(rsw_eval(&pp, &elem(&pp, 2)).unwrap().y.value(), &BigUint::from(25u32));
        let (pp, _) = toy(0);
        assert_eq!(rsw_eval(&pp, &elem(&pp, 5)).unwrap().y.value(), &BigUint::from(5u32));
        let (pp, _) = toy(4);
        assert_eq!(rsw_eval(&pp, &elem(&pp, 3)).unwrap().y.value(), &BigUint::from(25u32));
    }

    #[test]
    fn td_eval_examples() {
        let (pp, sp) = toy(3);
        assert_eq!(trapdoor_exponent(3, sp.phi()), BigUint::from(8u32));
        assert_eq!(rsw_td_eval(&pp, &sp, &elem(&pp, 2)).unwrap().y.value(), &BigUint::from(25u32));
        let (pp, sp) = toy(0);
        assert_eq!(trapdoor_exponent(0, sp.phi()), BigUint::one());
        assert_eq!(rsw_td_eval(&pp, &sp, &elem(&pp, 9)).unwrap().y.value(), &BigUint::from(9u32));
    }

    #[test]
    fn td_eval_matches_long_sequential_run() {
        let (pp, sp) = toy(1000);
        let golden = squarings_u64(2, 1000, 77);
        let x = elem(&pp, 2);
        assert_eq!(rsw_eval(&pp, &x).unwrap().y.value().to_u64(), Some(golden));
        assert_eq!(rsw_td_eval(&pp, &sp, &x).unwrap().y.value().to_u64(), Some(golden));
    }

    #[test]
    fn exhaustive_oracle_equivalence_on_77() {
        let (base, sp) = toy(0);
        for t in 0..=64 {
            let pp = base.with_time_bound(t).unwrap();
            for v in 1u32..77 {
                if v.gcd(&77) != 1 {
                    continue;
                }
                let x = elem(&pp, v);
                let slow = rsw_eval(&pp, &x).unwrap();
                let fast = rsw_td_eval(&pp, &sp, &x).unwrap();
                assert_eq!(slow, fast, "x={v} T={t}");
                assert_eq!(slow.y.value().to_u64(), Some(squarings_u64(v.into(), t, 77)));
            }
        }
    }

    #[test]
    fn composition() {
        let (base, _) = toy(0);
        for a in 0..=16 {
            for b in 0..=16 {
                for v in [2u32, 3, 5] {
                    let x = elem(&base, v);
                    let whole = rsw_eval(&base.with_time_bound(a + b).unwrap(), &x).unwrap();
                    let first = rsw_eval(&base.with_time_bound(a).unwrap(), &x).unwrap();
                    let second = rsw_eval(&base.with_time_bound(b).unwrap(), &first.y).unwrap();
                    assert_eq!(whole, second);
                }
            }
        }
    }

    #[test]
    fn setup_binds_time_bound() {
        let cfg = SecurityConfig::new(16).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let (pp, sp) = rsw_setup(cfg, 0, &mut rng).unwrap();
        assert_eq!(pp.time_bound(), 0);
        assert_eq!(pp.modulus().n(), &(sp.p() * sp.q()));
        assert!(matches!(
            rsw_setup(cfg, MAX_TIME_BOUND + 1, &mut rng),
            Err(Error::TimeBoundTooLarge(_))
        ));
    }

    #[test]
    fn sample_is_seed_reproducible() {
        let (pp, _) = toy(3);
        let a = rsw_sample(&pp, &mut ChaCha20Rng::seed_from_u64(0));
        let b = rsw_sample(&pp, &mut ChaCha20Rng::seed_from_u64(0));
        assert_eq!(a, b);
        assert!(a.value().gcd(&BigUint::from(77u32)).is_one());
    }

    #[test]
    fn sample_golden_value() {
        // Recorded once from ChaCha20 seed 0 on N = 77.
        let (pp, _) = toy(3);
        let x = rsw_sample(&pp, &mut ChaCha20Rng::seed_from_u64(0));
        assert_eq!(x.value().to_u64(), Some(GOLDEN_SAMPLE_SEED0));
    }

    const GOLDEN_SAMPLE_SEED0: u64 = 5;

    #[test]
    fn huge_time_bound_on_trapdoor_path() {
        let (pp, sp) = toy(1 << 40);
        let x = elem(&pp, 2);
        // Independent route: the Carmichael exponent of 77 is lcm(6, 10) = 30,
        // so 2^(2^40) mod 77 = 2^e mod 77 with e = 2^(2^40) mod 30.
        let e = squarings_u64(2, 40, 30);
        let e = if e == 0 { 30 } else { e };
        let expect = (0..e).fold(1u64, |acc, _| acc * 2 % 77);
        assert_eq!(rsw_td_eval(&pp, &sp, &x).unwrap().y.value().to_u64(), Some(expect));
    }

    #[test]
    fn mismatches_are_errors() {
        let (pp, _) = toy(3);
        let other = TrapdoorSecret::new(7u32.into(), 23u32.into()).unwrap();
        let foreign = GroupElement::new(2u32.into(), &other.modulus()).unwrap();
        assert!(matches!(rsw_eval(&pp, &foreign), Err(Error::ModulusMismatch)));
        assert!(matches!(
            rsw_td_eval(&pp, &other, &elem(&pp, 2)),
            Err(Error::TrapdoorMismatch)
        ));
    }
}
