//! Versioned text formats: one header line, then `key: value` lines in a
//! fixed order. Big integers are lowercase hex without leading zeros.

use std::fmt::Write as _;

use num_bigint::BigUint;
use sls_core::beacon::BEACON_VALUE_LEN;
use sls_core::rsw::RswPublicParams;
use sls_core::{
    BeaconValue, CalibrationResult, GroupElement, PublicKey, RsaModulus, SchnorrGroup,
    SecretScalar, ShortLivedSignature, SlsPublicParams, SlsSecretKey, TlpkePublicParams,
    TrapdoorSecret,
};

pub const PARAMS_HEADER: &str = "slsparams-v1";
pub const SIGNATURE_HEADER: &str = "slssig-v1";
pub const SECRET_KEY_HEADER: &str = "slssk-v1";
pub const TRAPDOOR_HEADER: &str = "slstrapdoor-v1";
pub const CALIBRATION_HEADER: &str = "slscal-v1";

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("expected header {expected:?}, found {found:?}")]
    Header { expected: &'static str, found: String },
    #[error("line {line}: expected `{key}: <value>`")]
    Field { line: usize, key: &'static str },
    #[error("unexpected trailing content after `{0}`")]
    Trailing(&'static str),
    #[error("{key}: {reason}")]
    Value { key: &'static str, reason: String },
    #[error(transparent)]
    Invalid(#[from] sls_core::Error),
}

type Result<T> = std::result::Result<T, FormatError>;

fn fields<'a, const K: usize>(
    text: &'a str,
    header: &'static str,
    keys: [&'static str; K],
) -> Result<[&'a str; K]> {
    let mut lines = text.lines();
    let first = lines.next().unwrap_or_default();
    if first != header {
        return Err(FormatError::Header {
            expected: header,
            found: first.to_string(),
        });
    }
    let mut out = [""; K];
    for (i, key) in keys.iter().enumerate() {
        let line = lines.next().unwrap_or_default();
        out[i] = line
            .strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(": "))
            .ok_or(FormatError::Field { line: i + 2, key })?;
    }
    if lines.any(|l| !l.is_empty()) {
        return Err(FormatError::Trailing(keys[K - 1]));
    }
    Ok(out)
}

pub fn hex_int(v: &BigUint) -> String {
    v.to_str_radix(16)
}

pub fn parse_hex_int(key: &'static str, s: &str) -> Result<BigUint> {
    let canonical = !s.is_empty()
        && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
        && (s == "0" || !s.starts_with('0'));
    if !canonical {
        return Err(FormatError::Value {
            key,
            reason: "expected lowercase hex without leading zeros".into(),
        });
    }
    Ok(BigUint::parse_bytes(s.as_bytes(), 16).expect("validated hex"))
}

fn parse_dec<T: std::str::FromStr>(key: &'static str, s: &str) -> Result<T> {
    let canonical = !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) && (s == "0" || !s.starts_with('0'));
    if !canonical {
        return Err(FormatError::Value {
            key,
            reason: "expected a decimal integer".into(),
        });
    }
    s.parse().map_err(|_| FormatError::Value {
        key,
        reason: "integer out of range".into(),
    })
}

fn parse_hex_bytes(key: &'static str, s: &str) -> Result<Vec<u8>> {
    if s.bytes().any(|b| b.is_ascii_uppercase()) {
        return Err(FormatError::Value {
            key,
            reason: "hex must be lowercase".into(),
        });
    }
    hex::decode(s).map_err(|e| FormatError::Value {
        key,
        reason: e.to_string(),
    })
}

pub fn params_to_string(pp: &SlsPublicParams) -> String {
    let mut s = String::new();
    writeln!(s, "{PARAMS_HEADER}").unwrap();
    writeln!(s, "n: {}", hex_int(pp.modulus().n())).unwrap();
    writeln!(s, "t: {:x}", pp.time_bound()).unwrap();
    writeln!(s, "x: {}", hex_int(pp.puzzle_input().value())).unwrap();
    writeln!(s, "sig_pk: {}", hex_int(pp.sig_pk().value())).unwrap();
    writeln!(s, "ek: {}", hex_int(pp.masked_sk())).unwrap();
    s
}

/// Parses and re-validates public parameters. The inner group is rederived
/// from the bit length of `n`.
pub fn parse_params(text: &str) -> Result<SlsPublicParams> {
    let [n, t, x, pk, ek] = fields(text, PARAMS_HEADER, ["n", "t", "x", "sig_pk", "ek"])?;
    let modulus = RsaModulus::new(parse_hex_int("n", n)?)?;
    let t = u64::from_str_radix(t, 16)
        .ok()
        .filter(|_| hex_int(&parse_hex_int("t", t).unwrap_or_default()) == t)
        .ok_or(FormatError::Value {
            key: "t",
            reason: "expected canonical hex u64".into(),
        })?;
    let x = GroupElement::new(parse_hex_int("x", x)?, &modulus)?;
    let group = SchnorrGroup::for_modulus_bits(modulus.bit_length())?;
    let pk = PublicKey::new(parse_hex_int("sig_pk", pk)?);
    let ek = parse_hex_int("ek", ek)?;
    let rsw = RswPublicParams::new(modulus, t)?;
    let inner = TlpkePublicParams::from_parts(rsw, x, group, pk, ek)?;
    Ok(SlsPublicParams::from_tlpke(inner))
}

pub fn signature_to_string(sig: &ShortLivedSignature) -> String {
    let mut s = String::new();
    writeln!(s, "{SIGNATURE_HEADER}").unwrap();
    writeln!(s, "sigma: {}", hex::encode(&sig.sigma)).unwrap();
    writeln!(s, "beacon_round: {}", sig.beacon.round).unwrap();
    writeln!(s, "beacon_value: {}", hex::encode(sig.beacon.value)).unwrap();
    writeln!(s, "beacon_time: {}", sig.beacon.timestamp).unwrap();
    s
}

pub fn parse_signature(text: &str) -> Result<ShortLivedSignature> {
    let [sigma, round, value, time] = fields(
        text,
        SIGNATURE_HEADER,
        ["sigma", "beacon_round", "beacon_value", "beacon_time"],
    )?;
    let value: [u8; BEACON_VALUE_LEN] = parse_hex_bytes("beacon_value", value)?
        .try_into()
        .map_err(|_| FormatError::Value {
            key: "beacon_value",
            reason: format!("expected {BEACON_VALUE_LEN} bytes"),
        })?;
    Ok(ShortLivedSignature {
        sigma: parse_hex_bytes("sigma", sigma)?,
        beacon: BeaconValue {
            round: parse_dec("beacon_round", round)?,
            value,
            timestamp: parse_dec("beacon_time", time)?,
        },
    })
}

pub fn secret_key_to_string(sk: &SlsSecretKey) -> String {
    format!("{SECRET_KEY_HEADER}\nsk: {}\n", hex_int(sk.scalar().value()))
}

pub fn parse_secret_key(text: &str) -> Result<SlsSecretKey> {
    let [sk] = fields(text, SECRET_KEY_HEADER, ["sk"])?;
    Ok(SlsSecretKey::new(SecretScalar::new(parse_hex_int("sk", sk)?)))
}

pub fn trapdoor_to_string(sp: &TrapdoorSecret) -> String {
    format!(
        "{TRAPDOOR_HEADER}\np: {}\nq: {}\nphi: {}\n",
        hex_int(sp.p()),
        hex_int(sp.q()),
        hex_int(sp.phi())
    )
}

pub fn parse_trapdoor(text: &str) -> Result<TrapdoorSecret> {
    let [p, q, phi] = fields(text, TRAPDOOR_HEADER, ["p", "q", "phi"])?;
    let sp = TrapdoorSecret::new(parse_hex_int("p", p)?, parse_hex_int("q", q)?)?;
    if sp.phi() != &parse_hex_int("phi", phi)? {
        return Err(FormatError::Value {
            key: "phi",
            reason: "does not equal (p-1)(q-1)".into(),
        });
    }
    Ok(sp)
}

pub fn calibration_to_string(c: &CalibrationResult) -> String {
    format!(
        "{CALIBRATION_HEADER}\nlambda: {}\nsample_t: {}\nrate: {}\n",
        c.lambda, c.sample_t, c.rate
    )
}

pub fn parse_calibration(text: &str) -> Result<CalibrationResult> {
    let [lambda, sample_t, rate] = fields(text, CALIBRATION_HEADER, ["lambda", "sample_t", "rate"])?;
    let rate: f64 = rate.parse().map_err(|_| FormatError::Value {
        key: "rate",
        reason: "expected a number".into(),
    })?;
    if !(rate.is_finite() && rate > 0.0) {
        return Err(FormatError::Value {
            key: "rate",
            reason: "must be positive".into(),
        });
    }
    Ok(CalibrationResult {
        rate,
        lambda: parse_dec("lambda", lambda)?,
        sample_t: parse_dec("sample_t", sample_t)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use sls_core::{sls, SecurityConfig};

    fn params(seed: u64, t: u64) -> (SlsPublicParams, SlsSecretKey, TrapdoorSecret) {
        let cfg = SecurityConfig::new(24).unwrap();
        sls::sls_setup_test_mode(cfg, t, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn params_layout() {
        let (pp, _, _) = params(1, 1024);
        let text = params_to_string(&pp);
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "slsparams-v1");
        assert_eq!(lines[2], "t: 400");
        for (line, key) in lines[1..].iter().zip(["n: ", "t: ", "x: ", "sig_pk: ", "ek: "]) {
            assert!(line.starts_with(key));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn params_roundtrip(seed in any::<u64>(), t in 0u64..(1 << 40)) {
            let (pp, sk, sp) = params(seed, t);
            let text = params_to_string(&pp);
            let back = parse_params(&text).unwrap();
            prop_assert_eq!(&back, &pp);
            prop_assert_eq!(params_to_string(&back), text);
            prop_assert_eq!(parse_secret_key(&secret_key_to_string(&sk)).unwrap(), sk);
            prop_assert_eq!(parse_trapdoor(&trapdoor_to_string(&sp)).unwrap(), sp);
        }

        #[test]
        fn signature_roundtrip(sigma in proptest::collection::vec(any::<u8>(), 0..80),
                               round in any::<u64>(), value in any::<[u8; 32]>(), time in any::<u64>()) {
            let sig = ShortLivedSignature { sigma, beacon: BeaconValue { round, value, timestamp: time } };
            let text = signature_to_string(&sig);
            let back = parse_signature(&text).unwrap();
            prop_assert_eq!(signature_to_string(&back), text);
            prop_assert_eq!(back, sig);
        }
    }

    #[test]
    fn params_rejects_noncanonical() {
        let (pp, _, _) = params(2, 5);
        let good = params_to_string(&pp);
        let cases = [
            good.replace("slsparams-v1", "slsparams-v2"),
            good.replace("t: 5", "t: 05"),
            good.replace("t: 5", "t: 0x5"),
            good.replace("n: ", "n:  "),
            good.to_uppercase().replace("SLSPARAMS-V1", "slsparams-v1"),
            format!("{good}extra: 1\n"),
            good.lines().take(4).collect::<Vec<_>>().join("\n"),
        ];
        for bad in cases {
            assert!(parse_params(&bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn params_rejects_invalid_values() {
        let (pp, _, _) = params(3, 5);
        let good = params_to_string(&pp);
        let n = hex_int(pp.modulus().n());
        // ek >= N
        let bad_ek = good.replace(&format!("ek: {}", hex_int(pp.masked_sk())), &format!("ek: {n}"));
        assert!(parse_params(&bad_ek).is_err());
        // x = 0
        let bad_x = good.replace(&format!("x: {}", hex_int(pp.puzzle_input().value())), "x: 0");
        assert!(parse_params(&bad_x).is_err());
    }

    #[test]
    fn signature_rejects_bad_beacon_value() {
        let sig = ShortLivedSignature {
            sigma: vec![1, 2],
            beacon: BeaconValue { round: 1, value: [0xab; 32], timestamp: 9 },
        };
        let text = signature_to_string(&sig);
        assert!(parse_signature(&text.replace(&"ab".repeat(32), &"ab".repeat(31))).is_err());
        assert!(parse_signature(&text.replace(&"ab".repeat(32), &"AB".repeat(32))).is_err());
        assert!(parse_signature(&text.replace("beacon_round: 1", "beacon_round: -1")).is_err());
    }

    #[test]
    fn trapdoor_phi_must_match() {
        let (_, _, sp) = params(4, 5);
        let text = trapdoor_to_string(&sp).replace(&format!("phi: {}", hex_int(sp.phi())), "phi: 1");
        assert!(parse_trapdoor(&text).is_err());
    }

    #[test]
    fn calibration_roundtrip() {
        let c = CalibrationResult { rate: 123456.789, lambda: 32, sample_t: 65536 };
        assert_eq!(parse_calibration(&calibration_to_string(&c)).unwrap(), c);
        let zero = calibration_to_string(&CalibrationResult { rate: 0.0, ..c });
        assert!(parse_calibration(&zero).is_err());
    }
}
