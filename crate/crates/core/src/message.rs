//! Inter-chain request envelope and its canonical byte form.

use serde::{Deserialize, Serialize};

use crate::codec::{DecodeError, Decoder, Encoder};
use crate::primitives::{keccak256, Address, ChainId, Hash32, RequestId, Selector};

/// Contract function to invoke on the destination chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalContract {
    pub contract_address: Address,
    pub function_selector: Selector,
    #[serde(with = "hex_bytes")]
    pub params: Vec<u8>,
}

/// Where the destination's return data should be sent. A zero
/// `callback_address` means fire-and-forget; `chain` is then `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Callback {
    pub chain: Option<ChainId>,
    pub callback_address: Address,
    pub callback_selector: Selector,
}

impl Callback {
    pub const NONE: Callback = Callback {
        chain: None,
        callback_address: Address::ZERO,
        callback_selector: Selector::ZERO,
    };

    pub fn to(chain: ChainId, address: Address, selector: Selector) -> Self {
        Callback {
            chain: Some(chain),
            callback_address: address,
            callback_selector: selector,
        }
    }

    pub fn is_none(&self) -> bool {
        self.callback_address.is_zero()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossChainCall {
    pub request_id: RequestId,
    pub sender: Address,
    pub target: ExternalContract,
    pub callback: Callback,
}

/// A router invocation requested by a contract during local execution,
/// before the router has assigned a request id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutboundCall {
    pub target_chain: ChainId,
    pub target: ExternalContract,
    pub callback: Callback,
}

impl CrossChainCall {
    pub fn encode(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        e.hash(&self.request_id)
            .address(&self.sender)
            .address(&self.target.contract_address)
            .selector(&self.target.function_selector)
            .bytes(&self.target.params);
        match self.callback.chain {
            Some(c) => e.chain(&c),
            None => e.fixed(&[0u8; 32]),
        };
        e.address(&self.callback.callback_address)
            .selector(&self.callback.callback_selector);
        e.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut d = Decoder::new(bytes);
        let request_id = d.hash()?;
        let sender = d.address()?;
        let target = ExternalContract {
            contract_address: d.address()?,
            function_selector: d.selector()?,
            params: d.bytes()?,
        };
        let callback = Callback {
            chain: d.chain_or_zero()?,
            callback_address: d.address()?,
            callback_selector: d.selector()?,
        };
        d.finish()?;
        Ok(CrossChainCall {
            request_id,
            sender,
            target,
            callback,
        })
    }

    pub fn digest(&self) -> Hash32 {
        keccak256(&self.encode())
    }
}

pub mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("0x{}", hex::encode(v)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s.strip_prefix("0x").unwrap_or(&s)).map_err(serde::de::Error::custom)
    }
}
