//! Local mock randomness beacon.
//!
//! Round `k` publishes `value_k = H(seed || k)` at `genesis + k * period`.
//! Values for rounds whose timestamp is still in the future are withheld.

use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::hash::tagged_hash;
use crate::{Error, Result};

pub const BEACON_VALUE_LEN: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BeaconValue {
    pub round: u64,
    pub value: [u8; BEACON_VALUE_LEN],
    pub timestamp: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MockBeacon {
    seed: [u8; 32],
    period: u64,
    genesis: u64,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl MockBeacon {
    /// Round 0 happens now.
    pub fn init(seed: [u8; 32], period: u64) -> Result<Self> {
        Self::with_genesis(seed, period, unix_now())
    }

    pub fn with_genesis(seed: [u8; 32], period: u64, genesis: u64) -> Result<Self> {
        if period == 0 {
            return Err(Error::InvalidPeriod);
        }
        Ok(Self {
            seed,
            period,
            genesis,
        })
    }

    pub fn seed(&self) -> &[u8; 32] {
        &self.seed
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn genesis(&self) -> u64 {
        self.genesis
    }

    pub fn value_at(&self, round: u64) -> [u8; BEACON_VALUE_LEN] {
        tagged_hash("beacon", &[&self.seed, &round.to_be_bytes()])
    }

    pub fn timestamp_of(&self, round: u64) -> u64 {
        self.genesis.saturating_add(self.period.saturating_mul(round))
    }

    /// Newest round published at time `now`, if any.
    pub fn latest_round_at(&self, now: u64) -> Option<u64> {
        now.checked_sub(self.genesis).map(|dt| dt / self.period)
    }

    pub fn get(&self, round: u64) -> Result<BeaconValue> {
        self.get_at(round, unix_now())
    }

    pub fn get_at(&self, round: u64, now: u64) -> Result<BeaconValue> {
        let timestamp = self.timestamp_of(round);
        if timestamp > now {
            return Err(Error::BeaconRoundUnavailable {
                round,
                available_at: timestamp,
            });
        }
        Ok(BeaconValue {
            round,
            value: self.value_at(round),
            timestamp,
        })
    }

    /// True iff `bv.value` is this chain's value for `bv.round`.
    pub fn verify(&self, bv: &BeaconValue) -> bool {
        self.value_at(bv.round) == bv.value
    }

    /// `seed:`, `period:` and `genesis:` lines.
    pub fn to_file_string(&self) -> String {
        let mut s = String::new();
        writeln!(s, "seed: {}", hex::encode(self.seed)).unwrap();
        writeln!(s, "period: {}", self.period).unwrap();
        writeln!(s, "genesis: {}", self.genesis).unwrap();
        s
    }

    /// Parses [`to_file_string`](Self::to_file_string) output. A missing
    /// `genesis:` line means genesis at the Unix epoch.
    pub fn parse(text: &str) -> Result<Self> {
        let mut seed = None;
        let mut period = None;
        let mut genesis = None;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (key, value) = line
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("beacon line without ':': {line:?}")))?;
            let value = value.trim();
            let slot = match key.trim() {
                "seed" => {
                    let bytes = hex::decode(value)
                        .map_err(|e| Error::Parse(format!("beacon seed: {e}")))?;
                    let arr: [u8; 32] = bytes
                        .try_into()
                        .map_err(|_| Error::Parse("beacon seed must be 64 hex chars".into()))?;
                    if seed.replace(arr).is_some() {
                        return Err(Error::Parse("duplicate seed".into()));
                    }
                    continue;
                }
                "period" => &mut period,
                "genesis" => &mut genesis,
                other => return Err(Error::Parse(format!("unknown beacon field {other:?}"))),
            };
            let v: u64 = value
                .parse()
                .map_err(|_| Error::Parse(format!("beacon {}: not an integer", key.trim())))?;
            if slot.replace(v).is_some() {
                return Err(Error::Parse(format!("duplicate {}", key.trim())));
            }
        }
        let seed = seed.ok_or_else(|| Error::Parse("missing seed".into()))?;
        let period = period.ok_or_else(|| Error::Parse("missing period".into()))?;
        Self::with_genesis(seed, period, genesis.unwrap_or(0))
    }
}
