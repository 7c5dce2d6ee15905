use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{Function, GasSchedule};
use crate::primitives::Fee;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeeError {
    #[error("base fee must be positive")]
    ZeroBaseFee,
    #[error("fee multiplier must be at least 1")]
    ZeroMultiplier,
}

/// Prepaid-fee pricing for cross-chain invocations.
///
/// The fee locked for an invocation with estimated destination cost `C_d`
/// is `f_base + multiplier * C_d`, which is never below `f_base + C_d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeeSchedule {
    pub f_base: Fee,
    #[serde(flatten)]
    pub gas: GasSchedule,
    #[serde(default = "one")]
    pub multiplier: Fee,
}

fn one() -> Fee {
    1
}

impl Default for FeeSchedule {
    fn default() -> Self {
        FeeSchedule {
            f_base: 10,
            gas: GasSchedule::default(),
            multiplier: 1,
        }
    }
}

impl FeeSchedule {
    pub fn validate(&self) -> Result<(), FeeError> {
        if self.f_base == 0 {
            return Err(FeeError::ZeroBaseFee);
        }
        if self.multiplier == 0 {
            return Err(FeeError::ZeroMultiplier);
        }
        Ok(())
    }

    /// Total prepaid fee `F` for an estimated destination cost.
    pub fn fee_fn(&self, estimated_cd: Fee) -> Fee {
        self.f_base
            .saturating_add(estimated_cd.saturating_mul(self.multiplier))
    }

    /// Estimated destination cost of invoking a function of the given
    /// shape. Unknown shapes are priced as a bare call.
    pub fn estimate_leg(&self, shape: Option<&Function>) -> Fee {
        self.gas
            .cost(shape.map(Function::declared_writes).unwrap_or(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn additive_default() {
        let s = FeeSchedule {
            f_base: 10,
            gas: GasSchedule {
                per_call: 5,
                per_write: 3,
            },
            multiplier: 1,
        };
        assert_eq!(s.fee_fn(0), 10);
        assert_eq!(s.fee_fn(5), 15);
        assert_eq!(s.estimate_leg(Some(&Function::Getter { slot: 0 })), 5);
        assert_eq!(s.estimate_leg(Some(&Function::Setter { slot: 0 })), 8);
        assert_eq!(s.estimate_leg(None), 5);
    }

    #[test]
    fn validation() {
        let mut s = FeeSchedule::default();
        assert!(s.validate().is_ok());
        s.multiplier = 0;
        assert_eq!(s.validate(), Err(FeeError::ZeroMultiplier));
        s.f_base = 0;
        assert_eq!(s.validate(), Err(FeeError::ZeroBaseFee));
    }

    #[test]
    fn fee_fn_lower_bound_holds_for_multipliers() {
        for m in 1..5 {
            let s = FeeSchedule {
                multiplier: m,
                ..FeeSchedule::default()
            };
            for cd in 0..50 {
                assert!(s.fee_fn(cd) >= s.f_base + cd);
                assert!(s.fee_fn(cd + 1) >= s.fee_fn(cd));
            }
        }
    }
}
