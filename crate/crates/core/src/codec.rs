//! Canonical byte encodings.
//!
//! Call parameters and return data are a 32-byte big-endian word count
//! followed by that many 32-byte words. Booleans are the words 1 and 0.
//! An empty byte string decodes as an empty word list.
//!
//! Structured records (calls, transactions, state snapshots) use a simple
//! field concatenation: fixed-width fields as-is, integers big-endian, and
//! variable-length byte strings prefixed with their length as a `u64`.

use thiserror::Error;

use crate::primitives::{keccak256, Address, ChainId, Hash32, Selector, Word};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("unexpected end of input at byte {0}")]
    Truncated(usize),
    #[error("word count {count} does not match {len} payload bytes")]
    CountMismatch { count: u64, len: usize },
    #[error("{0} trailing bytes")]
    Trailing(usize),
    #[error("invalid field: {0}")]
    Invalid(&'static str),
}

pub fn encode_words(words: &[Word]) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 * (words.len() + 1));
    out.extend_from_slice(&Word::from_u64(words.len() as u64).0);
    for w in words {
        out.extend_from_slice(&w.0);
    }
    out
}

pub fn decode_words(bytes: &[u8]) -> Result<Vec<Word>, DecodeError> {
    if bytes.is_empty() {
        return Ok(Vec::new());
    }
    if !bytes.len().is_multiple_of(32) {
        return Err(DecodeError::Truncated(bytes.len()));
    }
    let mut head = [0u8; 32];
    head.copy_from_slice(&bytes[..32]);
    let body = &bytes[32..];
    let count = Word(head).to_u64().ok_or(DecodeError::CountMismatch {
        count: u64::MAX,
        len: body.len(),
    })?;
    if count.checked_mul(32) != Some(body.len() as u64) {
        return Err(DecodeError::CountMismatch {
            count,
            len: body.len(),
        });
    }
    Ok(body
        .chunks_exact(32)
        .map(|c| {
            let mut w = [0u8; 32];
            w.copy_from_slice(c);
            Word(w)
        })
        .collect())
}

pub fn encode_bool(b: bool) -> Vec<u8> {
    encode_words(&[Word::from_bool(b)])
}

/// Append-only builder for canonical records.
#[derive(Default, Debug, Clone)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn fixed(&mut self, bytes: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(bytes);
        self
    }

    pub fn bytes(&mut self, bytes: &[u8]) -> &mut Self {
        self.u64(bytes.len() as u64);
        self.buf.extend_from_slice(bytes);
        self
    }

    pub fn chain(&mut self, c: &ChainId) -> &mut Self {
        self.fixed(c.as_bytes())
    }

    pub fn address(&mut self, a: &Address) -> &mut Self {
        self.fixed(&a.0)
    }

    pub fn selector(&mut self, s: &Selector) -> &mut Self {
        self.fixed(&s.0)
    }

    pub fn word(&mut self, w: &Word) -> &mut Self {
        self.fixed(&w.0)
    }

    pub fn hash(&mut self, h: &Hash32) -> &mut Self {
        self.fixed(&h.0)
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }

    pub fn digest(&self) -> Hash32 {
        keccak256(&self.buf)
    }
}

/// Cursor over a canonical record.
pub struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Decoder { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.buf.len())
            .ok_or(DecodeError::Truncated(self.pos))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        let mut out = [0u8; N];
        out.copy_from_slice(self.take(N)?);
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    pub fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_be_bytes(self.array()?))
    }

    pub fn bytes(&mut self) -> Result<Vec<u8>, DecodeError> {
        let len = usize::try_from(self.u64()?).map_err(|_| DecodeError::Truncated(self.pos))?;
        Ok(self.take(len)?.to_vec())
    }

    pub fn chain(&mut self) -> Result<ChainId, DecodeError> {
        ChainId::new(self.array()?).map_err(|_| DecodeError::Invalid("zero chain id"))
    }

    /// A chain id slot that may be zero (the empty callback).
    pub fn chain_or_zero(&mut self) -> Result<Option<ChainId>, DecodeError> {
        Ok(ChainId::new(self.array()?).ok())
    }

    pub fn address(&mut self) -> Result<Address, DecodeError> {
        Ok(Address(self.array()?))
    }

    pub fn selector(&mut self) -> Result<Selector, DecodeError> {
        Ok(Selector(self.array()?))
    }

    pub fn hash(&mut self) -> Result<Hash32, DecodeError> {
        Ok(Hash32(self.array()?))
    }

    pub fn finish(self) -> Result<(), DecodeError> {
        match self.buf.len() - self.pos {
            0 => Ok(()),
            n => Err(DecodeError::Trailing(n)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn word_list_layout() {
        let bytes = encode_words(&[Word::from_u64(42)]);
        assert_eq!(bytes.len(), 64);
        assert_eq!(bytes[31], 1);
        assert_eq!(bytes[63], 42);
        assert_eq!(encode_words(&[]), vec![0u8; 32]);
        assert_eq!(encode_bool(true)[63], 1);
        assert_eq!(encode_bool(false)[32..], [0u8; 32]);
    }

    #[test]
    fn rejects_malformed_word_lists() {
        assert_eq!(decode_words(&[]), Ok(vec![]));
        assert!(decode_words(&[0u8; 31]).is_err());
        let mut bad = encode_words(&[Word::ONE, Word::ONE]);
        bad.truncate(64);
        assert!(matches!(
            decode_words(&bad),
            Err(DecodeError::CountMismatch { count: 2, .. })
        ));
    }

    #[test]
    fn decoder_reports_truncation_and_trailing() {
        let mut e = Encoder::new();
        e.u64(7).bytes(b"abc");
        let buf = e.finish();
        let mut d = Decoder::new(&buf);
        assert_eq!(d.u64(), Ok(7));
        assert_eq!(d.bytes(), Ok(b"abc".to_vec()));
        assert!(d.finish().is_ok());

        let mut d = Decoder::new(&buf[..10]);
        d.u64().unwrap();
        assert!(d.bytes().is_err());

        let d = Decoder::new(&buf);
        assert_eq!(d.finish(), Err(DecodeError::Trailing(buf.len())));
    }

    proptest! {
        #[test]
        fn word_lists_roundtrip(raw in proptest::collection::vec(any::<[u8; 32]>(), 0..8)) {
            let words: Vec<Word> = raw.into_iter().map(Word).collect();
            prop_assert_eq!(decode_words(&encode_words(&words)).unwrap(), words);
        }
    }
}
