//! Deterministic simulator for cross-chain contract calls between
//! blockchains that each expose a policy-restricted compact chain.
//!
//! A request flows from a contract on one chain through its router, is
//! admitted against prepaid fees and collateral, travels over a seeded
//! lossy transport, executes on the destination's compact chain and is
//! mirrored back into the destination's main-chain state. See
//! [`sim::Simulation`] for the event loop and [`scenarios`] for runnable
//! end-to-end scenarios.

pub mod auth;
pub mod chain;
pub mod codec;
pub mod compact;
pub mod config;
pub mod message;
pub mod netsim;
pub mod primitives;
pub mod router;
pub mod scenarios;
pub mod sim;
pub mod sync;
