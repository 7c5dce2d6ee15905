//! Fixed-width identifiers shared by every chain in a simulation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha3::{Digest, Keccak256};
use thiserror::Error;

/// Fee units. All balances, locks and gas costs are counted in these.
pub type Fee = u64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("chain id must be nonzero")]
    ZeroChainId,
    #[error("chain label `{0}` longer than 32 bytes")]
    LabelTooLong(String),
    #[error("invalid hex `{0}`")]
    BadHex(String),
    #[error("expected {expected} bytes, got {got}")]
    BadLength { expected: usize, got: usize },
}

/// Keccak-256 over `data`.
pub fn keccak256(data: &[u8]) -> Hash32 {
    let mut out = [0u8; 32];
    out.copy_from_slice(&Keccak256::digest(data));
    Hash32(out)
}

fn parse_hex_exact<const N: usize>(s: &str) -> Result<[u8; N], ParseError> {
    let raw = s.strip_prefix("0x").unwrap_or(s);
    let padded;
    let raw = if raw.len() % 2 == 1 {
        padded = format!("0{raw}");
        padded.as_str()
    } else {
        raw
    };
    let bytes = hex::decode(raw).map_err(|_| ParseError::BadHex(s.to_string()))?;
    if bytes.len() > N {
        return Err(ParseError::BadLength {
            expected: N,
            got: bytes.len(),
        });
    }
    // Short inputs are left-padded, like a numeric literal.
    let mut out = [0u8; N];
    out[N - bytes.len()..].copy_from_slice(&bytes);
    Ok(out)
}

macro_rules! hex_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_string())
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

/// 32-byte digest.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Hash32(pub [u8; 32]);

impl Hash32 {
    pub const ZERO: Hash32 = Hash32([0; 32]);

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Display for Hash32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl fmt::Debug for Hash32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hash32({self})")
    }
}

impl FromStr for Hash32 {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_hex_exact::<32>(s).map(Hash32)
    }
}

hex_serde!(Hash32);

/// Identifier of one cross-chain request, unique within a simulation.
pub type RequestId = Hash32;

/// 32-byte chain identifier. Never zero.
///
/// Human-readable labels (`"A"`, `"chainB"`) are stored left-aligned and
/// zero-padded, the way a short string literal lands in a `bytes32`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChainId([u8; 32]);

impl ChainId {
    pub fn new(bytes: [u8; 32]) -> Result<Self, ParseError> {
        if bytes == [0; 32] {
            return Err(ParseError::ZeroChainId);
        }
        Ok(ChainId(bytes))
    }

    pub fn from_label(label: &str) -> Result<Self, ParseError> {
        if label.len() > 32 {
            return Err(ParseError::LabelTooLong(label.to_string()));
        }
        let mut bytes = [0u8; 32];
        bytes[..label.len()].copy_from_slice(label.as_bytes());
        ChainId::new(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    fn label(&self) -> Option<&str> {
        let end = self.0.iter().position(|b| *b == 0).unwrap_or(32);
        if end == 0 || self.0[end..].iter().any(|b| *b != 0) {
            return None;
        }
        let s = std::str::from_utf8(&self.0[..end]).ok()?;
        s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
            .then_some(s)
    }
}

impl fmt::Display for ChainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.label() {
            Some(label) => f.write_str(label),
            None => write!(f, "0x{}", hex::encode(self.0)),
        }
    }
}

impl fmt::Debug for ChainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ChainId({self})")
    }
}

impl FromStr for ChainId {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.starts_with("0x") && s.len() == 66 {
            ChainId::new(parse_hex_exact::<32>(s)?)
        } else {
            ChainId::from_label(s)
        }
    }
}

hex_serde!(ChainId);

/// 20-byte account or contract address. The zero address means "no callback".
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Address(pub [u8; 20]);

impl Address {
    pub const ZERO: Address = Address([0; 20]);

    pub const fn from_low_u64(v: u64) -> Self {
        let b = v.to_be_bytes();
        let mut bytes = [0u8; 20];
        let mut i = 0;
        while i < 8 {
            bytes[12 + i] = b[i];
            i += 1;
        }
        Address(bytes)
    }

    pub fn is_zero(&self) -> bool {
        *self == Address::ZERO
    }

    /// Left-padded into a storage/parameter word.
    pub fn to_word(self) -> Word {
        let mut w = [0u8; 32];
        w[12..].copy_from_slice(&self.0);
        Word(w)
    }

    /// Low 20 bytes of a word. Fails if the high bytes are nonzero.
    pub fn from_word(w: Word) -> Option<Self> {
        if w.0[..12].iter().any(|b| *b != 0) {
            return None;
        }
        let mut a = [0u8; 20];
        a.copy_from_slice(&w.0[12..]);
        Some(Address(a))
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Address({self})")
    }
}

impl FromStr for Address {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_hex_exact::<20>(s).map(Address)
    }
}

hex_serde!(Address);

/// 4-byte function selector: the first four bytes of keccak-256 of the
/// function signature string.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Selector(pub [u8; 4]);

impl Selector {
    pub const ZERO: Selector = Selector([0; 4]);

    pub fn from_signature(signature: &str) -> Self {
        let h = keccak256(signature.as_bytes());
        let mut s = [0u8; 4];
        s.copy_from_slice(&h.0[..4]);
        Selector(s)
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl fmt::Debug for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Selector({self})")
    }
}

impl FromStr for Selector {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(raw) = s.strip_prefix("0x") {
            if raw.len() != 8 {
                return Err(ParseError::BadLength {
                    expected: 4,
                    got: raw.len() / 2,
                });
            }
            parse_hex_exact::<4>(s).map(Selector)
        } else {
            Ok(Selector::from_signature(s))
        }
    }
}

hex_serde!(Selector);

/// 32-byte storage word, big-endian when read as an integer.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Word(pub [u8; 32]);

impl Word {
    pub const ZERO: Word = Word([0; 32]);
    pub const ONE: Word = Word::from_u64(1);

    pub const fn from_u64(v: u64) -> Self {
        let b = v.to_be_bytes();
        let mut w = [0u8; 32];
        let mut i = 0;
        while i < 8 {
            w[24 + i] = b[i];
            i += 1;
        }
        Word(w)
    }

    pub fn from_bool(b: bool) -> Self {
        if b {
            Word::ONE
        } else {
            Word::ZERO
        }
    }

    /// Integer value if it fits in 64 bits.
    pub fn to_u64(&self) -> Option<u64> {
        if self.0[..24].iter().any(|b| *b != 0) {
            return None;
        }
        let mut b = [0u8; 8];
        b.copy_from_slice(&self.0[24..]);
        Some(u64::from_be_bytes(b))
    }

    pub fn is_zero(&self) -> bool {
        *self == Word::ZERO
    }
}

impl From<u64> for Word {
    fn from(v: u64) -> Self {
        Word::from_u64(v)
    }
}

impl From<ChainId> for Word {
    fn from(c: ChainId) -> Self {
        Word(c.0)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_u64() {
            Some(v) => write!(f, "{v}"),
            None => write!(f, "0x{}", hex::encode(self.0)),
        }
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({self})")
    }
}

impl FromStr for Word {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.starts_with("0x") {
            parse_hex_exact::<32>(s).map(Word)
        } else {
            s.parse::<u64>()
                .map(Word::from_u64)
                .map_err(|_| ParseError::BadHex(s.to_string()))
        }
    }
}

hex_serde!(Word);
