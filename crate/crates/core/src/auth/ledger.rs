//! Collateral accounts and prepaid-fee locks.
//!
//! Fee units live in exactly one of six places: user balances, channel
//! collateral accounts, per-chain treasuries, source-side locks,
//! destination-side holds, and the consumed-cost sink. Every operation
//! moves units between these buckets, so [`CollateralLedger::total`] is
//! invariant once genesis funding is done.

use std::collections::{BTreeMap, BTreeSet};
use std::io;

use serde::Serialize;
use thiserror::Error;

use super::fees::FeeSchedule;
use crate::primitives::{Address, ChainId, Fee, RequestId};

#[derive(Debug, Clone, Copy, Error, PartialEq, Eq, Serialize)]
pub enum LedgerError {
    #[error("insufficient funds: need {need}, have {have}")]
    InsufficientFunds { need: Fee, have: Fee },
    #[error("collateral of {owner} on {host} exhausted: need {need}, have {have}")]
    CollateralExhausted {
        owner: ChainId,
        host: ChainId,
        need: Fee,
        have: Fee,
    },
    #[error("no live lock for request")]
    UnknownRequest,
    #[error("request already settled")]
    DoubleSettle,
    #[error("request already has a lock")]
    DuplicateLock,
}

/// Who pays: a user account on a given chain.
pub type Payer = (ChainId, Address);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Lock {
    pub payer: Payer,
    pub source: ChainId,
    pub dest: ChainId,
    pub amount: Fee,
    pub f_base: Fee,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SettleOutcome {
    /// Destination executed; `cost` is the total charge requested.
    Executed {
        cost: Fee,
    },
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Settlement {
    pub request: RequestId,
    pub locked: Fee,
    pub charged: Fee,
    pub refunded: Fee,
    pub burned: Fee,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CollateralLedger {
    users: BTreeMap<Payer, Fee>,
    collateral: BTreeMap<(ChainId, ChainId), Fee>,
    treasury: BTreeMap<ChainId, Fee>,
    locks: BTreeMap<RequestId, Lock>,
    holds: BTreeMap<RequestId, Fee>,
    settled: BTreeSet<RequestId>,
    sink: Fee,
    genesis_total: Fee,
    settlements: Vec<Settlement>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LedgerTotals {
    pub users: Fee,
    pub collateral: Fee,
    pub treasury: Fee,
    pub locked: Fee,
    pub held: Fee,
    pub sink: Fee,
}

impl LedgerTotals {
    pub fn sum(&self) -> Fee {
        self.users + self.collateral + self.treasury + self.locked + self.held + self.sink
    }
}

impl CollateralLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Genesis funding of a user account.
    pub fn fund_user(&mut self, payer: Payer, amount: Fee) {
        *self.users.entry(payer).or_default() += amount;
        self.genesis_total += amount;
    }

    /// Genesis funding of `owner`'s collateral account hosted on `host`.
    pub fn open_channel(&mut self, owner: ChainId, host: ChainId, amount: Fee) {
        *self.collateral.entry((owner, host)).or_default() += amount;
        self.genesis_total += amount;
    }

    pub fn balance(&self, payer: &Payer) -> Fee {
        self.users.get(payer).copied().unwrap_or(0)
    }

    pub fn collateral(&self, owner: ChainId, host: ChainId) -> Fee {
        self.collateral.get(&(owner, host)).copied().unwrap_or(0)
    }

    pub fn treasury(&self, chain: ChainId) -> Fee {
        self.treasury.get(&chain).copied().unwrap_or(0)
    }

    pub fn lock(&self, request: &RequestId) -> Option<&Lock> {
        self.locks.get(request)
    }

    pub fn hold(&self, request: &RequestId) -> Option<Fee> {
        self.holds.get(request).copied()
    }

    pub fn sink(&self) -> Fee {
        self.sink
    }

    pub fn genesis_total(&self) -> Fee {
        self.genesis_total
    }

    pub fn settlements(&self) -> &[Settlement] {
        &self.settlements
    }

    pub fn is_settled(&self, request: &RequestId) -> bool {
        self.settled.contains(request)
    }

    pub fn live_locks(&self) -> usize {
        self.locks.len()
    }

    pub fn totals(&self) -> LedgerTotals {
        LedgerTotals {
            users: self.users.values().sum(),
            collateral: self.collateral.values().sum(),
            treasury: self.treasury.values().sum(),
            locked: self.locks.values().map(|l| l.amount).sum(),
            held: self.holds.values().sum(),
            sink: self.sink,
        }
    }

    pub fn total(&self) -> Fee {
        self.totals().sum()
    }

    /// Moves `fee_fn(estimated_cd)` from the payer's balance into a lock
    /// for `request`.
    pub fn lock_fee(
        &mut self,
        payer: Payer,
        request: RequestId,
        dest: ChainId,
        estimated_cd: Fee,
        schedule: &FeeSchedule,
    ) -> Result<Fee, LedgerError> {
        if self.locks.contains_key(&request) || self.settled.contains(&request) {
            return Err(LedgerError::DuplicateLock);
        }
        let need = schedule.fee_fn(estimated_cd);
        let have = self.balance(&payer);
        if have < need {
            return Err(LedgerError::InsufficientFunds { need, have });
        }
        self.users.insert(payer, have - need);
        self.locks.insert(
            request,
            Lock {
                payer,
                source: payer.0,
                dest,
                amount: need,
                f_base: schedule.f_base,
            },
        );
        Ok(need)
    }

    /// Destination-side reservation: sets aside the locked amount from the
    /// source chain's collateral account on the destination.
    pub fn hold_collateral(&mut self, request: &RequestId) -> Result<Fee, LedgerError> {
        let lock = *self.locks.get(request).ok_or(LedgerError::UnknownRequest)?;
        if self.holds.contains_key(request) {
            return Ok(self.holds[request]);
        }
        let have = self.collateral(lock.source, lock.dest);
        if have < lock.amount {
            return Err(LedgerError::CollateralExhausted {
                owner: lock.source,
                host: lock.dest,
                need: lock.amount,
                have,
            });
        }
        self.collateral
            .insert((lock.source, lock.dest), have - lock.amount);
        self.holds.insert(*request, lock.amount);
        Ok(lock.amount)
    }

    /// Closes the lock for `request`.
    ///
    /// `Executed { cost }` charges `min(cost, locked)`: the destination
    /// collateral pays it into the sink, the source treasury receives it
    /// from the lock, and the remainder of the lock goes back to the payer.
    /// `Failed` burns the base fee and refunds the rest of the lock; any
    /// destination hold returns to collateral untouched.
    pub fn settle_or_refund(
        &mut self,
        request: &RequestId,
        outcome: SettleOutcome,
    ) -> Result<Settlement, LedgerError> {
        if self.settled.contains(request) {
            return Err(LedgerError::DoubleSettle);
        }
        let lock = *self.locks.get(request).ok_or(LedgerError::UnknownRequest)?;
        let pair = (lock.source, lock.dest);
        let held = self.holds.get(request).copied();

        let settlement = match outcome {
            SettleOutcome::Executed { cost } => {
                let charged = cost.min(lock.amount);
                match held {
                    Some(h) => {
                        *self.collateral.entry(pair).or_default() += h - charged;
                    }
                    None => {
                        let have = self.collateral(pair.0, pair.1);
                        if have < charged {
                            return Err(LedgerError::CollateralExhausted {
                                owner: pair.0,
                                host: pair.1,
                                need: charged,
                                have,
                            });
                        }
                        self.collateral.insert(pair, have - charged);
                    }
                }
                self.sink += charged;
                *self.treasury.entry(lock.source).or_default() += charged;
                let refunded = lock.amount - charged;
                *self.users.entry(lock.payer).or_default() += refunded;
                Settlement {
                    request: *request,
                    locked: lock.amount,
                    charged,
                    refunded,
                    burned: 0,
                }
            }
            SettleOutcome::Failed => {
                if let Some(h) = held {
                    *self.collateral.entry(pair).or_default() += h;
                }
                let burned = lock.f_base.min(lock.amount);
                self.sink += burned;
                let refunded = lock.amount - burned;
                *self.users.entry(lock.payer).or_default() += refunded;
                Settlement {
                    request: *request,
                    locked: lock.amount,
                    charged: 0,
                    refunded,
                    burned,
                }
            }
        };
        self.locks.remove(request);
        self.holds.remove(request);
        self.settled.insert(*request);
        self.settlements.push(settlement);
        Ok(settlement)
    }

    /// Tops up `owner`'s collateral on `host` from `owner`'s treasury.
    pub fn replenish(
        &mut self,
        owner: ChainId,
        host: ChainId,
        amount: Fee,
    ) -> Result<(), LedgerError> {
        let have = self.treasury(owner);
        if have < amount {
            return Err(LedgerError::InsufficientFunds { need: amount, have });
        }
        self.treasury.insert(owner, have - amount);
        *self.collateral.entry((owner, host)).or_default() += amount;
        Ok(())
    }

    /// Snapshot of every account as CSV: `bucket,owner,host,amount`.
    pub fn write_snapshot_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bucket", "owner", "host", "amount"])?;
        for ((chain, addr), v) in &self.users {
            w.serialize(("user", chain.to_string(), addr.to_string(), v))?;
        }
        for ((owner, host), v) in &self.collateral {
            w.serialize(("collateral", owner.to_string(), host.to_string(), v))?;
        }
        for (chain, v) in &self.treasury {
            w.serialize(("treasury", chain.to_string(), "", v))?;
        }
        let t = self.totals();
        w.serialize(("locked", "", "", t.locked))?;
        w.serialize(("held", "", "", t.held))?;
        w.serialize(("sink", "", "", t.sink))?;
        w.flush()?;
        Ok(())
    }

    /// Per-request fee lifecycles as CSV.
    pub fn write_settlements_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["request_id", "locked", "charged", "refunded", "burned"])?;
        for s in &self.settlements {
            w.serialize((
                s.request.to_string(),
                s.locked,
                s.charged,
                s.refunded,
                s.burned,
            ))?;
        }
        w.flush()?;
        Ok(())
    }
}
