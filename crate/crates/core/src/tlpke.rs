//! Time-lock public key encryption.
//!
//! Setup publishes `pp = (N, T, x, pk, ek)` where `ek = sk + x^(2^T) mod N`.
//! Anyone may encrypt to `pk` at once; the matching `sk` comes back out of
//! `ek` only after computing `y = x^(2^T)`, which takes `T` sequential
//! squarings without the factorization of `N`.

use std::sync::Arc;

use num_bigint::BigUint;
use rand::RngCore;

use crate::dlog::{self, Keypair, PublicKey, SchnorrGroup, SecretScalar};
use crate::numtheory::{GroupElement, SecurityConfig, TrapdoorSecret};
use crate::rsw::{self, RswPublicParams};
use crate::{Error, Result};

/// Default plaintext cap for [`tlpke_encrypt`].
pub const DEFAULT_MAX_MESSAGE_LEN: usize = 1 << 20;

const SETUP_ATTEMPTS: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TlpkePublicParams {
    rsw: RswPublicParams,
    puzzle_input: GroupElement,
    group: Arc<SchnorrGroup>,
    enc_pk: PublicKey,
    masked_sk: BigUint,
}

impl TlpkePublicParams {
    /// Reassembles parameters, checking every structural invariant that can
    /// be checked without the trapdoor.
    pub fn from_parts(
        rsw: RswPublicParams,
        puzzle_input: GroupElement,
        group: Arc<SchnorrGroup>,
        enc_pk: PublicKey,
        masked_sk: BigUint,
    ) -> Result<Self> {
        let n = rsw.modulus().n();
        if !puzzle_input.is_bound_to(rsw.modulus()) {
            return Err(Error::ModulusMismatch);
        }
        if &masked_sk >= n {
            return Err(Error::MalformedParameters("masked key outside [0, N)"));
        }
        if group.order() >= n {
            return Err(Error::ParameterSize {
                order_bits: group.order().bits(),
                modulus_bits: n.bits(),
            });
        }
        if !group.contains(enc_pk.value()) {
            return Err(Error::MalformedParameters("public key outside the inner group"));
        }
        Ok(Self {
            rsw,
            puzzle_input,
            group,
            enc_pk,
            masked_sk,
        })
    }

    pub fn rsw(&self) -> &RswPublicParams {
        &self.rsw
    }

    pub fn modulus(&self) -> &crate::RsaModulus {
        self.rsw.modulus()
    }

    pub fn time_bound(&self) -> u64 {
        self.rsw.time_bound()
    }

    pub fn puzzle_input(&self) -> &GroupElement {
        &self.puzzle_input
    }

    pub fn group(&self) -> &Arc<SchnorrGroup> {
        &self.group
    }

    pub fn enc_pk(&self) -> &PublicKey {
        &self.enc_pk
    }

    pub fn masked_sk(&self) -> &BigUint {
        &self.masked_sk
    }

    /// `(ek - y) mod N`, rejected unless it lands in the scalar field.
    pub fn unmask(&self, y: &GroupElement) -> Result<SecretScalar> {
        if !y.is_bound_to(self.modulus()) {
            return Err(Error::ModulusMismatch);
        }
        let n = self.modulus().n();
        let sk = (&self.masked_sk + n - y.value()) % n;
        if &sk >= self.group.order() {
            return Err(Error::MalformedParameters("recovered key outside the scalar field"));
        }
        Ok(SecretScalar::new(sk))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TlpkeCiphertext {
    payload: Vec<u8>,
}

impl TlpkeCiphertext {
    pub fn from_bytes(payload: Vec<u8>) -> Self {
        Self { payload }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.payload
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TlpkeEvalOutput {
    pub y: GroupElement,
    pub recovered_sk: SecretScalar,
}

/// Masks an existing inner keypair under the puzzle `(rsw, x)`, using the
/// trapdoor to get `y` quickly.
pub fn tlpke_setup_with(
    rsw: RswPublicParams,
    sp: &TrapdoorSecret,
    puzzle_input: GroupElement,
    keypair: &Keypair,
) -> Result<TlpkePublicParams> {
    let y = rsw::rsw_td_eval(&rsw, sp, &puzzle_input)?.y;
    let n = rsw.modulus().n();
    let masked_sk = (keypair.secret().value() + y.value()) % n;
    TlpkePublicParams::from_parts(
        rsw,
        puzzle_input,
        Arc::clone(keypair.group()),
        keypair.public().clone(),
        masked_sk,
    )
}

/// Fresh modulus, puzzle input and inner keypair. The trapdoor and keypair
/// are handed back for tests; callers that publish `pp` should drop them.
pub fn tlpke_setup<R: RngCore + ?Sized>(
    cfg: SecurityConfig,
    time_bound: u64,
    rng: &mut R,
) -> Result<(TlpkePublicParams, TrapdoorSecret, Keypair)> {
    let mut last = None;
    for _ in 0..SETUP_ATTEMPTS {
        let (rsw_pp, sp) = rsw::rsw_setup(cfg, time_bound, rng)?;
        let n = rsw_pp.modulus().n();
        let group = SchnorrGroup::for_modulus_bits(n.bits())?;
        if group.order() >= n {
            last = Some(Error::ParameterSize {
                order_bits: group.order().bits(),
                modulus_bits: n.bits(),
            });
            continue;
        }
        let x = rsw::rsw_sample(&rsw_pp, rng);
        let keypair = Keypair::generate(group, rng);
        let pp = tlpke_setup_with(rsw_pp, &sp, x, &keypair)?;
        return Ok((pp, sp, keypair));
    }
    Err(last.unwrap_or(Error::MalformedParameters("setup failed")))
}

/// Recovers `sk` the slow way: `T` squarings, then `sk = ek - y`.
pub fn tlpke_eval(pp: &TlpkePublicParams) -> Result<TlpkeEvalOutput> {
    let y = rsw::rsw_eval(&pp.rsw, &pp.puzzle_input)?.y;
    let recovered_sk = pp.unmask(&y)?;
    Ok(TlpkeEvalOutput { y, recovered_sk })
}

/// `len(M) as u32 BE || M || x` with `x` in minimal big-endian form.
pub fn encode_plaintext(message: &[u8], x: &GroupElement) -> Vec<u8> {
    let x_bytes = x.value().to_bytes_be();
    let mut out = Vec::with_capacity(4 + message.len() + x_bytes.len());
    out.extend_from_slice(&(message.len() as u32).to_be_bytes());
    out.extend_from_slice(message);
    out.extend_from_slice(&x_bytes);
    out
}

/// Inverse of [`encode_plaintext`]; returns `(M, x)`.
pub fn decode_plaintext(bytes: &[u8]) -> Result<(Vec<u8>, BigUint)> {
    let (len, rest) = bytes.split_at_checked(4).ok_or(Error::MalformedPlaintext)?;
    let len = u32::from_be_bytes(len.try_into().unwrap()) as usize;
    let (message, x_bytes) = rest.split_at_checked(len).ok_or(Error::MalformedPlaintext)?;
    if x_bytes.is_empty() || x_bytes[0] == 0 {
        return Err(Error::MalformedPlaintext);
    }
    Ok((message.to_vec(), BigUint::from_bytes_be(x_bytes)))
}

pub fn tlpke_encrypt<R: RngCore + ?Sized>(
    pp: &TlpkePublicParams,
    message: &[u8],
    rng: &mut R,
) -> Result<TlpkeCiphertext> {
    tlpke_encrypt_capped(pp, message, DEFAULT_MAX_MESSAGE_LEN, rng)
}

pub fn tlpke_encrypt_capped<R: RngCore + ?Sized>(
    pp: &TlpkePublicParams,
    message: &[u8],
    max_len: usize,
    rng: &mut R,
) -> Result<TlpkeCiphertext> {
    let max = max_len.min(u32::MAX as usize);
    if message.len() > max {
        return Err(Error::MessageTooLong {
            len: message.len(),
            max,
        });
    }
    let plaintext = encode_plaintext(message, &pp.puzzle_input);
    let payload = dlog::hybrid_seal(&pp.group, &pp.enc_pk, &plaintext, rng)?;
    Ok(TlpkeCiphertext { payload })
}

/// Decrypts and checks the embedded `x` against `pp`. When `y` is given it
/// must unmask `ek` into the scalar field; it plays no other role.
pub fn tlpke_decrypt(
    pp: &TlpkePublicParams,
    sk: &SecretScalar,
    y: Option<&GroupElement>,
    ct: &TlpkeCiphertext,
) -> Result<Vec<u8>> {
    if let Some(y) = y {
        match pp.unmask(y) {
            Ok(_) => {}
            Err(Error::ModulusMismatch) => return Err(Error::ModulusMismatch),
            Err(_) => return Err(Error::InconsistentEvaluation),
        }
    }
    let plaintext = dlog::hybrid_open(&pp.group, sk, &ct.payload)?;
    let (message, x) = decode_plaintext(&plaintext)?;
    if &x != pp.puzzle_input.value() {
        return Err(Error::PuzzleBinding);
    }
    Ok(message)
}
