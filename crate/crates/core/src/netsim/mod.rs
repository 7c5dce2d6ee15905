//! Simulated inter-chain network: peer registry, lossy transport, the
//! event queue that drives a simulation, and the trace it leaves behind.

mod enode;
mod queue;
mod trace;
mod transport;

pub use enode::{EnodeRecord, EnodeRegistry, UnknownChain};
pub use queue::EventQueue;
pub use trace::{Trace, TraceLine};
pub use transport::{
    watch_and_forward, Envelope, Forwarded, Transport, TransportConfig, TransportError,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::codec::Encoder;

/// Derives an independent seed for one consumer of randomness, so that
/// adding draws in one place never shifts the stream seen by another.
pub fn sub_seed(seed: u64, domain: &str) -> u64 {
    let mut e = Encoder::new();
    e.u64(seed).bytes(domain.as_bytes());
    let h = e.digest();
    u64::from_be_bytes(h.0[..8].try_into().expect("8 bytes"))
}

pub fn rng_for(seed: u64, domain: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sub_seed(seed, domain))
}
