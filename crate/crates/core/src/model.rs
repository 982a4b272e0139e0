//! Players, inputs, outcomes and the neighbor relations between inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A player's private data bit and privacy valuation.
///
/// Valuations must be finite but may be negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlayerType {
    pub bit: bool,
    pub valuation: f64,
}

impl PlayerType {
    pub fn new(bit: bool, valuation: f64) -> Result<Self> {
        if !valuation.is_finite() {
            return Err(Error::InvalidPlayer(format!(
                "valuation must be finite, got {valuation}"
            )));
        }
        Ok(Self { bit, valuation })
    }

    /// Shorthand for tests and demos; panics on a non-finite valuation.
    pub fn of(bit: u8, valuation: f64) -> Self {
        assert!(bit <= 1, "bit must be 0 or 1");
        Self::new(bit == 1, valuation).expect("finite valuation")
    }

    pub fn bit_u8(&self) -> u8 {
        self.bit as u8
    }
}

/// Whether two player types are monotonically related: opposite bits, with
/// the bit-1 side holding the weakly larger valuation.
pub fn monotonically_related(a: PlayerType, c: PlayerType) -> bool {
    match (a.bit, c.bit) {
        (false, true) => a.valuation <= c.valuation,
        (true, false) => a.valuation >= c.valuation,
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborRelation {
    General,
    Monotonic,
}

impl NeighborRelation {
    /// Whether replacing `from` by `to` is an admissible neighbor step.
    pub fn admits(self, from: PlayerType, to: PlayerType) -> bool {
        if from == to {
            return false;
        }
        match self {
            NeighborRelation::General => true,
            NeighborRelation::Monotonic => monotonically_related(from, to),
        }
    }
}

/// The full input `(b, v)` of a game with `n >= 1` players.
#[derive(Debug, Clone, PartialEq)]
pub struct InputProfile {
    players: Vec<PlayerType>,
}

impl InputProfile {
    pub fn new(players: Vec<PlayerType>) -> Result<Self> {
        if players.is_empty() {
            return Err(Error::EmptyProfile);
        }
        if let Some(p) = players.iter().find(|p| !p.valuation.is_finite()) {
            return Err(Error::InvalidPlayer(format!(
                "valuation must be finite, got {}",
                p.valuation
            )));
        }
        Ok(Self { players })
    }

    pub fn from_parts(bits: &[u8], valuations: &[f64]) -> Result<Self> {
        if bits.len() != valuations.len() {
            return Err(Error::InvalidPlayer(format!(
                "{} bits but {} valuations",
                bits.len(),
                valuations.len()
            )));
        }
        let players = bits
            .iter()
            .zip(valuations)
            .map(|(&b, &v)| {
                if b > 1 {
                    return Err(Error::InvalidPlayer(format!("bit must be 0 or 1, got {b}")));
                }
                PlayerType::new(b == 1, v)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(players)
    }

    pub fn len(&self) -> usize {
        self.players.len()
    }

    pub fn is_empty(&self) -> bool {
        self.players.is_empty()
    }

    pub fn players(&self) -> &[PlayerType] {
        &self.players
    }

    pub fn player(&self, i: usize) -> Result<PlayerType> {
        self.players.get(i).copied().ok_or(Error::IndexOutOfRange {
            index: i,
            n: self.len(),
        })
    }

    pub fn bits(&self) -> Vec<u8> {
        self.players.iter().map(PlayerType::bit_u8).collect()
    }

    pub fn valuations(&self) -> Vec<f64> {
        self.players.iter().map(|p| p.valuation).collect()
    }

    /// Number of players holding bit 1.
    pub fn bit_sum(&self) -> i64 {
        self.players.iter().filter(|p| p.bit).count() as i64
    }

    /// Copy of this profile with player `i` replaced by `t`.
    pub fn with_player(&self, i: usize, t: PlayerType) -> Result<Self> {
        self.player(i)?;
        let mut players = self.players.clone();
        players[i] = t;
        Ok(Self { players })
    }

    /// Copy of this profile with player `i` declaring valuation `v`.
    pub fn with_valuation(&self, i: usize, v: f64) -> Result<Self> {
        let p = self.player(i)?;
        self.with_player(i, PlayerType::new(p.bit, v)?)
    }

    /// Indices where `self` and `other` differ. Profiles of different length
    /// differ everywhere.
    pub fn differing_players(&self, other: &Self) -> Vec<usize> {
        if self.len() != other.len() {
            return (0..self.len().max(other.len())).collect();
        }
        (0..self.len())
            .filter(|&i| self.players[i] != other.players[i])
            .collect()
    }
}

/// Every i-neighbor of `x` reachable by swapping in one of `candidates`
/// under `relation`. Duplicates and the unchanged profile are dropped.
pub fn i_neighbor_profiles(
    x: &InputProfile,
    i: usize,
    relation: NeighborRelation,
    candidates: &[PlayerType],
) -> Result<Vec<InputProfile>> {
    let own = x.player(i)?;
    let mut seen: Vec<PlayerType> = Vec::new();
    let mut out = Vec::new();
    for &c in candidates {
        if relation.admits(own, c) && !seen.contains(&c) {
            seen.push(c);
            out.push(x.with_player(i, c)?);
        }
    }
    Ok(out)
}

/// All `2^n` bit vectors of length `n`, in binary counting order with
/// player 0 as the most significant position.
pub fn all_bit_vectors(n: usize) -> Vec<Vec<u8>> {
    assert!(n < 32, "bit-vector enumeration is for small n");
    (0u32..(1 << n))
        .map(|mask| (0..n).map(|j| ((mask >> (n - 1 - j)) & 1) as u8).collect())
        .collect()
}

/// A realized mechanism outcome: published count and payment vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub count: i64,
    pub payments: Vec<f64>,
}

impl Outcome {
    /// Payments with player `i` removed, i.e. what an outside observer sees.
    pub fn payments_without(&self, i: usize) -> Vec<f64> {
        self.payments
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &p)| p)
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct ProfileWire {
    bits: Vec<u8>,
    valuations: Vec<f64>,
}

impl Serialize for InputProfile {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ProfileWire {
            bits: self.bits(),
            valuations: self.valuations(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for InputProfile {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = ProfileWire::deserialize(d)?;
        InputProfile::from_parts(&wire.bits, &wire.valuations).map_err(serde::de::Error::custom)
    }
}
