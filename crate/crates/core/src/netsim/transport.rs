use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{rng_for, EnodeRegistry};
use crate::primitives::{ChainId, RequestId};
use crate::router::RouterEvent;

#[derive(Debug, Clone, Copy, Error, PartialEq)]
pub enum TransportError {
    #[error("latency_min {min} exceeds latency_max {max}")]
    LatencyRange { min: u64, max: u64 },
    #[error("drop_probability {0} outside [0, 1]")]
    DropProbability(f64),
}

/// Latency is drawn uniformly from `[latency_min, latency_max]` ticks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportConfig {
    pub latency_min: u64,
    pub latency_max: u64,
    #[serde(default)]
    pub drop_probability: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for TransportConfig {
    fn default() -> Self {
        TransportConfig {
            latency_min: 1,
            latency_max: 1,
            drop_probability: 0.0,
            seed: 0,
        }
    }
}

impl TransportConfig {
    pub fn validate(&self) -> Result<(), TransportError> {
        if self.latency_min > self.latency_max {
            return Err(TransportError::LatencyRange {
                min: self.latency_min,
                max: self.latency_max,
            });
        }
        if !(0.0..=1.0).contains(&self.drop_probability) {
            return Err(TransportError::DropProbability(self.drop_probability));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope {
    pub from_chain: ChainId,
    pub to_chain: ChainId,
    pub endpoint: String,
    #[serde(with = "crate::message::hex_bytes")]
    pub payload: Vec<u8>,
    pub enqueue_tick: u64,
    pub deliver_tick: u64,
}

/// Seeded lossy channel shared by every chain pair in a simulation.
#[derive(Debug, Clone)]
pub struct Transport {
    cfg: TransportConfig,
    rng: ChaCha8Rng,
}

impl Transport {
    pub fn new(cfg: TransportConfig) -> Result<Self, TransportError> {
        cfg.validate()?;
        Ok(Transport {
            cfg,
            rng: rng_for(cfg.seed, "transport"),
        })
    }

    pub fn config(&self) -> &TransportConfig {
        &self.cfg
    }

    /// Samples one message's fate: `None` if dropped, else its latency.
    /// Both draws happen on every call so the stream never depends on the
    /// drop probability.
    pub fn sample(&mut self) -> Option<u64> {
        let dropped = self.rng.random::<f64>() < self.cfg.drop_probability;
        let latency = self
            .rng
            .random_range(self.cfg.latency_min..=self.cfg.latency_max);
        (!dropped).then_some(latency)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Forwarded {
    Scheduled(Envelope),
    Dropped {
        request_id: RequestId,
        envelope: Envelope,
    },
    Unroutable {
        request_id: RequestId,
        to_chain: ChainId,
    },
}

/// Turns the cross-chain requests among `events` into envelopes. Delivery
/// is never earlier than the tick after `tick`.
pub fn watch_and_forward(
    from_chain: ChainId,
    events: &[RouterEvent],
    registry: &EnodeRegistry,
    transport: &mut Transport,
    tick: u64,
) -> Vec<Forwarded> {
    let mut out = Vec::new();
    for ev in events {
        let RouterEvent::CrossChainRequest { target_chain, call } = ev else {
            continue;
        };
        let endpoint = match registry.resolve(target_chain) {
            Ok(e) => e.to_string(),
            Err(_) => {
                out.push(Forwarded::Unroutable {
                    request_id: call.request_id,
                    to_chain: *target_chain,
                });
                continue;
            }
        };
        let fate = transport.sample();
        let envelope = Envelope {
            from_chain,
            to_chain: *target_chain,
            endpoint,
            payload: call.encode(),
            enqueue_tick: tick,
            deliver_tick: tick + fate.unwrap_or(0).max(1),
        };
        out.push(match fate {
            Some(_) => Forwarded::Scheduled(envelope),
            None => Forwarded::Dropped {
                request_id: call.request_id,
                envelope,
            },
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::message::{Callback, CrossChainCall, ExternalContract};
    use crate::netsim::EnodeRecord;
    use crate::primitives::{Address, Hash32, Selector};

    fn chain(l: &str) -> ChainId {
        ChainId::from_label(l).unwrap()
    }

    fn request(n: u8, to: &str) -> RouterEvent {
        RouterEvent::CrossChainRequest {
            target_chain: chain(to),
            call: CrossChainCall {
                request_id: Hash32([n; 32]),
                sender: Address::from_low_u64(1),
                target: ExternalContract {
                    contract_address: Address::from_low_u64(2),
                    function_selector: Selector::ZERO,
                    params: vec![],
                },
                callback: Callback::NONE,
            },
        }
    }

    fn registry() -> EnodeRegistry {
        let mut r = EnodeRegistry::new();
        for l in ["A", "B"] {
            r.register_enode(EnodeRecord {
                chain: chain(l),
                endpoint: format!("enode://{l}"),
                public: true,
            });
        }
        r
    }

    fn transport(min: u64, max: u64, drop: f64, seed: u64) -> Transport {
        Transport::new(TransportConfig {
            latency_min: min,
            latency_max: max,
            drop_probability: drop,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn zero_latency_delivers_next_tick() {
        let out = watch_and_forward(
            chain("A"),
            &[request(1, "B")],
            &registry(),
            &mut transport(0, 0, 0.0, 1),
            10,
        );
        match &out[..] {
            [Forwarded::Scheduled(e)] => {
                assert_eq!((e.enqueue_tick, e.deliver_tick), (10, 11));
                assert_eq!(e.endpoint, "enode://B");
                let call = CrossChainCall::decode(&e.payload).unwrap();
                assert_eq!(call.request_id, Hash32([1; 32]));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn certain_drop() {
        let out = watch_and_forward(
            chain("A"),
            &[request(1, "B")],
            &registry(),
            &mut transport(1, 3, 1.0, 1),
            0,
        );
        assert!(matches!(out[..], [Forwarded::Dropped { .. }]));
    }

    #[test]
    fn unregistered_destination() {
        let out = watch_and_forward(
            chain("A"),
            &[request(1, "Z")],
            &registry(),
            &mut transport(1, 1, 0.0, 1),
            0,
        );
        assert_eq!(
            out,
            vec![Forwarded::Unroutable {
                request_id: Hash32([1; 32]),
                to_chain: chain("Z")
            }]
        );
    }

    #[test]
    fn same_block_requests_keep_order() {
        let events = [request(1, "B"), request(2, "B")];
        let out = watch_and_forward(
            chain("A"),
            &events,
            &registry(),
            &mut transport(3, 3, 0.0, 9),
            4,
        );
        let ids: Vec<_> = out
            .iter()
            .map(|f| match f {
                Forwarded::Scheduled(e) => (
                    CrossChainCall::decode(&e.payload).unwrap().request_id.0[0],
                    e.deliver_tick,
                ),
                _ => panic!(),
            })
            .collect();
        assert_eq!(ids, vec![(1, 7), (2, 7)]);
    }

    #[test]
    fn seeded_and_bounded() {
        let draw = |seed| {
            let mut t = transport(2, 9, 0.3, seed);
            (0..200).map(|_| t.sample()).collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
        assert_ne!(draw(5), draw(6));
        for s in draw(5).into_iter().flatten() {
            assert!((2..=9).contains(&s));
        }
    }

    #[test]
    fn config_validation() {
        let mut c = TransportConfig {
            latency_min: 5,
            ..TransportConfig::default()
        };
        assert!(c.validate().is_err());
        c.latency_min = 0;
        c.drop_probability = 1.5;
        assert!(c.validate().is_err());
    }
}
