//! Genesis configuration: one JSON document per simulation.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auth::{CostSchedule, DoSExperimentConfig, FeeError, FeeSchedule};
use crate::chain::contract::library;
use crate::chain::{ContractAccount, FunctionDef};
use crate::compact::{AccessMode, ExposureEntry, ExposurePolicy};
use crate::netsim::{TransportConfig, TransportError};
use crate::primitives::{Address, ChainId, Fee, Selector, Word};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("chain {0} declared twice")]
    DuplicateChain(ChainId),
    #[error("unknown chain {0}")]
    UnknownChain(ChainId),
    #[error("contract {1} on chain {0} declared twice")]
    DuplicateContract(ChainId, Address),
    #[error("no contract {1} on chain {0}")]
    UnknownContract(ChainId, Address),
    #[error("contract {1} on chain {0} has no function {2}")]
    UnknownFunction(ChainId, Address, String),
    #[error("zero address for a contract")]
    ZeroAddress,
    #[error("block_interval must be positive on chain {0}")]
    ZeroBlockInterval(ChainId),
    #[error(transparent)]
    Fees(#[from] FeeError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("scenario: {0}")]
    Scenario(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub id: ChainId,
    /// Peer endpoint. Defaults to `enode://<id>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Only public chains are registered with the locator and can receive
    /// cross-chain requests.
    #[serde(default = "yes")]
    pub public: bool,
    #[serde(default = "one")]
    pub block_interval: u64,
    /// Entries already executed on the compact chain skip the main-chain
    /// finality depth.
    #[serde(default = "yes")]
    pub compact_bypass: bool,
}

impl ChainSpec {
    pub fn new(label: &str) -> Self {
        ChainSpec {
            id: ChainId::from_label(label).expect("valid label"),
            endpoint: None,
            public: true,
            block_interval: 1,
            compact_bypass: true,
        }
    }

    pub fn endpoint(&self) -> String {
        self.endpoint
            .clone()
            .unwrap_or_else(|| format!("enode://{}", self.id))
    }
}

fn yes() -> bool {
    true
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "template", rename_all = "snake_case")]
pub enum ContractTemplate {
    ProviderRead {
        #[serde(default)]
        stored: u64,
    },
    ProviderWrite {
        #[serde(default)]
        stored: u64,
    },
    ConsumerRead,
    ConsumerWrite,
    Custom {
        functions: Vec<FunctionDef>,
        /// Initial storage by slot number.
        #[serde(default, with = "slot_map")]
        storage: BTreeMap<u64, Word>,
    },
}

// Integer map keys do not survive deserialization through a flattened enum.
mod slot_map {
    use std::collections::BTreeMap;

    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::primitives::Word;

    pub fn serialize<S: Serializer>(m: &BTreeMap<u64, Word>, s: S) -> Result<S::Ok, S::Error> {
        let named: BTreeMap<String, &Word> = m.iter().map(|(k, v)| (k.to_string(), v)).collect();
        named.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<u64, Word>, D::Error> {
        BTreeMap::<String, Word>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| {
                k.parse()
                    .map(|k| (k, v))
                    .map_err(|_| D::Error::custom(format!("bad slot `{k}`")))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractSpec {
    pub chain: ChainId,
    pub address: Address,
    #[serde(flatten)]
    pub template: ContractTemplate,
}

impl ContractSpec {
    pub fn build(&self) -> ContractAccount {
        match &self.template {
            ContractTemplate::ProviderRead { stored } => {
                library::provider_read(self.address, *stored)
            }
            ContractTemplate::ProviderWrite { stored } => {
                library::provider_write(self.address, *stored)
            }
            ContractTemplate::ConsumerRead => library::consumer_read(self.address),
            ContractTemplate::ConsumerWrite => library::consumer_write(self.address),
            ContractTemplate::Custom { functions, storage } => {
                let mut c = ContractAccount::new(self.address, functions.iter().cloned());
                for (slot, v) in storage {
                    c = c.with_slot(*slot, *v);
                }
                c
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExposureSpec {
    pub chain: ChainId,
    pub contract: Address,
    /// Signature such as `getValue()`, or a raw `0x` selector.
    pub function: String,
    /// Storage slots the function may touch.
    pub keys: Vec<u64>,
    pub mode: AccessMode,
}

impl ExposureSpec {
    pub fn selector(&self) -> Selector {
        self.function
            .parse()
            .expect("selector parsing is infallible for signatures")
    }

    pub fn entry(&self) -> ExposureEntry {
        ExposureEntry {
            contract: self.contract,
            selector: self.selector(),
            storage_keys: self.keys.iter().map(|k| Word::from_u64(*k)).collect(),
            mode: self.mode,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccountSpec {
    pub chain: ChainId,
    pub address: Address,
    pub balance: Fee,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub owner: ChainId,
    pub host: ChainId,
    pub amount: Fee,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeesSpec {
    #[serde(flatten)]
    pub schedule: FeeSchedule,
    #[serde(default)]
    pub accounts: Vec<AccountSpec>,
    /// Collateral each chain deposits on each peer.
    #[serde(default)]
    pub collateral: Vec<ChannelSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioName {
    ReadPattern,
    WritePattern,
    DosFlood,
    IsolationFuzz,
    Soak,
}

impl ScenarioName {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioName::ReadPattern => "read-pattern",
            ScenarioName::WritePattern => "write-pattern",
            ScenarioName::DosFlood => "dos-flood",
            ScenarioName::IsolationFuzz => "isolation-fuzz",
            ScenarioName::Soak => "soak",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractRef {
    pub chain: ChainId,
    pub address: Address,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: ScenarioName,
    #[serde(default)]
    pub seed: u64,
    /// Contract serving the value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider: Option<ContractRef>,
    /// Contract initiating the request.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consumer: Option<ContractRef>,
    /// Externally owned account that signs transactions on the consumer chain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user: Option<Address>,
    /// Value written by the write pattern.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dos: Option<DoSExperimentConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<u64>,
}

impl ScenarioSpec {
    pub fn new(name: ScenarioName) -> Self {
        ScenarioSpec {
            name,
            seed: 1,
            provider: None,
            consumer: None,
            user: None,
            value: None,
            dos: None,
            iterations: None,
            batch_size: None,
            rounds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub chains: Vec<ChainSpec>,
    #[serde(default)]
    pub contracts: Vec<ContractSpec>,
    #[serde(default)]
    pub exposure: Vec<ExposureSpec>,
    pub fees: FeesSpec,
    #[serde(default)]
    pub transport: TransportConfig,
    pub scenario: ScenarioSpec,
}

pub const CHAIN_A: &str = "A";
pub const CHAIN_B: &str = "B";
pub const PROVIDER: Address = Address::from_low_u64(0x0a);
pub const CONSUMER: Address = Address::from_low_u64(0x0b);
pub const USER: Address = Address::from_low_u64(0x01);
const FUNDING: Fee = 1_000_000;

pub fn chain(label: &str) -> ChainId {
    ChainId::from_label(label).expect("valid label")
}

impl SimConfig {
    pub fn from_json(s: &str) -> Result<Self, ConfigError> {
        let cfg: SimConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn chain_ids(&self) -> Vec<ChainId> {
        self.chains.iter().map(|c| c.id).collect()
    }

    pub fn chain_spec(&self, id: &ChainId) -> Option<&ChainSpec> {
        self.chains.iter().find(|c| c.id == *id)
    }

    pub fn contract_spec(&self, chain: &ChainId, address: &Address) -> Option<&ContractSpec> {
        self.contracts
            .iter()
            .find(|c| c.chain == *chain && c.address == *address)
    }

    pub fn policy(&self, chain: &ChainId) -> ExposurePolicy {
        ExposurePolicy::new(
            self.exposure
                .iter()
                .filter(|e| e.chain == *chain)
                .map(ExposureSpec::entry)
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut ids = BTreeSet::new();
        for c in &self.chains {
            if !ids.insert(c.id) {
                return Err(ConfigError::DuplicateChain(c.id));
            }
            if c.block_interval == 0 {
                return Err(ConfigError::ZeroBlockInterval(c.id));
            }
        }
        let known = |c: &ChainId| {
            if ids.contains(c) {
                Ok(())
            } else {
                Err(ConfigError::UnknownChain(*c))
            }
        };
        let mut seen = BTreeSet::new();
        for c in &self.contracts {
            known(&c.chain)?;
            if c.address.is_zero() {
                return Err(ConfigError::ZeroAddress);
            }
            if !seen.insert((c.chain, c.address)) {
                return Err(ConfigError::DuplicateContract(c.chain, c.address));
            }
        }
        for e in &self.exposure {
            known(&e.chain)?;
            let spec = self
                .contract_spec(&e.chain, &e.contract)
                .ok_or(ConfigError::UnknownContract(e.chain, e.contract))?;
            if spec.build().function(&e.selector()).is_none() {
                return Err(ConfigError::UnknownFunction(
                    e.chain,
                    e.contract,
                    e.function.clone(),
                ));
            }
        }
        for a in &self.fees.accounts {
            known(&a.chain)?;
        }
        for ch in &self.fees.collateral {
            known(&ch.owner)?;
            known(&ch.host)?;
        }
        self.fees.schedule.validate()?;
        self.transport.validate()?;

        let s = &self.scenario;
        for r in [s.provider, s.consumer].into_iter().flatten() {
            known(&r.chain)?;
            if self.contract_spec(&r.chain, &r.address).is_none() {
                return Err(ConfigError::UnknownContract(r.chain, r.address));
            }
        }
        if let Some(d) = &s.dos {
            if d.window == 0 {
                return Err(ConfigError::Scenario("dos window must be positive".into()));
            }
        }
        if s.batch_size == Some(0) {
            return Err(ConfigError::Scenario("batch_size must be positive".into()));
        }
        Ok(())
    }

    /// Two chains, a provider on A and a consumer on B, funded user on B
    /// and collateral in both directions.
    fn two_chain(
        provider: ContractTemplate,
        consumer: ContractTemplate,
        exposure: Vec<ExposureSpec>,
        name: ScenarioName,
    ) -> Self {
        let (a, b) = (chain(CHAIN_A), chain(CHAIN_B));
        SimConfig {
            chains: vec![ChainSpec::new(CHAIN_A), ChainSpec::new(CHAIN_B)],
            contracts: vec![
                ContractSpec {
                    chain: a,
                    address: PROVIDER,
                    template: provider,
                },
                ContractSpec {
                    chain: b,
                    address: CONSUMER,
                    template: consumer,
                },
            ],
            exposure,
            fees: FeesSpec {
                schedule: FeeSchedule::default(),
                accounts: vec![AccountSpec {
                    chain: b,
                    address: USER,
                    balance: FUNDING,
                }],
                collateral: vec![
                    ChannelSpec {
                        owner: a,
                        host: b,
                        amount: FUNDING,
                    },
                    ChannelSpec {
                        owner: b,
                        host: a,
                        amount: FUNDING,
                    },
                ],
            },
            transport: TransportConfig::default(),
            scenario: ScenarioSpec {
                provider: Some(ContractRef {
                    chain: a,
                    address: PROVIDER,
                }),
                consumer: Some(ContractRef {
                    chain: b,
                    address: CONSUMER,
                }),
                user: Some(USER),
                ..ScenarioSpec::new(name)
            },
        }
    }

    pub fn read_pattern() -> Self {
        Self::two_chain(
            ContractTemplate::ProviderRead { stored: 42 },
            ContractTemplate::ConsumerRead,
            vec![
                exposure(CHAIN_A, PROVIDER, library::GET_VALUE, AccessMode::ReadOnly),
                exposure(
                    CHAIN_B,
                    CONSUMER,
                    library::HANDLE_RESULT,
                    AccessMode::ReadWrite,
                ),
            ],
            ScenarioName::ReadPattern,
        )
    }

    pub fn write_pattern() -> Self {
        let mut cfg = Self::two_chain(
            ContractTemplate::ProviderWrite { stored: 0 },
            ContractTemplate::ConsumerWrite,
            vec![
                exposure(CHAIN_A, PROVIDER, library::SET_VALUE, AccessMode::ReadWrite),
                exposure(
                    CHAIN_B,
                    CONSUMER,
                    library::HANDLE_WRITE_RESULT,
                    AccessMode::ReadWrite,
                ),
            ],
            ScenarioName::WritePattern,
        );
        cfg.scenario.value = Some(99);
        cfg
    }

    /// An attacker on B floods A's read-only provider with bare calls.
    pub fn dos_flood() -> Self {
        let mut cfg = Self::two_chain(
            ContractTemplate::ProviderRead { stored: 42 },
            ContractTemplate::ConsumerRead,
            vec![exposure(
                CHAIN_A,
                PROVIDER,
                library::GET_VALUE,
                AccessMode::ReadOnly,
            )],
            ScenarioName::DosFlood,
        );
        cfg.fees.schedule.f_base = 10;
        cfg.fees.schedule.gas.per_call = 5;
        cfg.fees.accounts[0].balance = 1000;
        cfg.scenario.dos = Some(DoSExperimentConfig {
            attacker_capital: 1000,
            f_base: 10,
            costs: CostSchedule::Constant { cost: 5 },
            comp_max: None,
            window: 10,
        });
        cfg
    }

    /// Both chains host a mix of exposed, read-only and hidden contracts.
    pub fn isolation_fuzz() -> Self {
        let (a, b) = (chain(CHAIN_A), chain(CHAIN_B));
        let mut contracts = Vec::new();
        let mut exp = Vec::new();
        for (c, label) in [(a, CHAIN_A), (b, CHAIN_B)] {
            let spec = |n: u64, template| ContractSpec {
                chain: c,
                address: Address::from_low_u64(n),
                template,
            };
            contracts.push(spec(0x10, ContractTemplate::ProviderWrite { stored: 7 }));
            contracts.push(spec(0x11, ContractTemplate::ProviderRead { stored: 8 }));
            contracts.push(spec(0x12, ContractTemplate::ProviderWrite { stored: 9 }));
            contracts.push(spec(0x13, ContractTemplate::ProviderWrite { stored: 10 }));
            contracts.push(spec(0x20, ContractTemplate::ConsumerRead));
            let x = |n: u64, f: &str, mode| exposure(label, Address::from_low_u64(n), f, mode);
            exp.push(x(0x10, library::SET_VALUE, AccessMode::ReadWrite));
            exp.push(x(0x10, library::GET_VALUE, AccessMode::ReadOnly));
            exp.push(x(0x11, library::GET_VALUE, AccessMode::ReadOnly));
            // Writer exposed read-only: its setter must be refused.
            exp.push(x(0x13, library::SET_VALUE, AccessMode::ReadOnly));
            exp.push(x(0x13, library::GET_VALUE, AccessMode::ReadOnly));
            exp.push(x(0x20, library::HANDLE_RESULT, AccessMode::ReadWrite));
        }
        let mut accounts = Vec::new();
        for c in [a, b] {
            accounts.push(AccountSpec {
                chain: c,
                address: USER,
                balance: 1_000_000_000_000,
            });
        }
        SimConfig {
            chains: vec![ChainSpec::new(CHAIN_A), ChainSpec::new(CHAIN_B)],
            contracts,
            exposure: exp,
            fees: FeesSpec {
                schedule: FeeSchedule::default(),
                accounts,
                collateral: vec![
                    ChannelSpec {
                        owner: a,
                        host: b,
                        amount: 1_000_000_000_000,
                    },
                    ChannelSpec {
                        owner: b,
                        host: a,
                        amount: 1_000_000_000_000,
                    },
                ],
            },
            transport: TransportConfig {
                latency_min: 1,
                latency_max: 4,
                drop_probability: 0.0,
                seed: 0,
            },
            scenario: ScenarioSpec {
                iterations: Some(10_000),
                batch_size: Some(250),
                ..ScenarioSpec::new(ScenarioName::IsolationFuzz)
            },
        }
    }

    /// Read and write patterns running side by side under lossy,
    /// jittery transport.
    pub fn soak() -> Self {
        let mut cfg = Self::read_pattern();
        let (a, b) = (chain(CHAIN_A), chain(CHAIN_B));
        cfg.contracts.push(ContractSpec {
            chain: a,
            address: Address::from_low_u64(0x0c),
            template: ContractTemplate::ProviderWrite { stored: 0 },
        });
        cfg.contracts.push(ContractSpec {
            chain: b,
            address: Address::from_low_u64(0x0d),
            template: ContractTemplate::ConsumerWrite,
        });
        cfg.exposure.push(exposure(
            CHAIN_A,
            Address::from_low_u64(0x0c),
            library::SET_VALUE,
            AccessMode::ReadWrite,
        ));
        cfg.exposure.push(exposure(
            CHAIN_B,
            Address::from_low_u64(0x0d),
            library::HANDLE_WRITE_RESULT,
            AccessMode::ReadWrite,
        ));
        cfg.transport = TransportConfig {
            latency_min: 1,
            latency_max: 10,
            drop_probability: 0.1,
            seed: 0,
        };
        cfg.scenario.name = ScenarioName::Soak;
        cfg.scenario.rounds = Some(200);
        cfg
    }

    pub fn default_for(name: ScenarioName) -> Self {
        match name {
            ScenarioName::ReadPattern => Self::read_pattern(),
            ScenarioName::WritePattern => Self::write_pattern(),
            ScenarioName::DosFlood => Self::dos_flood(),
            ScenarioName::IsolationFuzz => Self::isolation_fuzz(),
            ScenarioName::Soak => Self::soak(),
        }
    }
}

pub fn exposure(
    chain_label: &str,
    contract: Address,
    function: &str,
    mode: AccessMode,
) -> ExposureSpec {
    ExposureSpec {
        chain: chain(chain_label),
        contract,
        function: function.to_string(),
        keys: vec![0],
        mode,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [ScenarioName; 5] = [
        ScenarioName::ReadPattern,
        ScenarioName::WritePattern,
        ScenarioName::DosFlood,
        ScenarioName::IsolationFuzz,
        ScenarioName::Soak,
    ];

    #[test]
    fn defaults_validate_and_roundtrip() {
        for n in ALL {
            let cfg = SimConfig::default_for(n);
            cfg.validate().unwrap();
            assert_eq!(SimConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        }
    }

    #[test]
    fn shipped_configs_match_defaults() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
        for n in ALL {
            let path = dir.join(format!("{}.json", n.as_str()));
            let text =
                fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert_eq!(
                SimConfig::from_json(&text).unwrap(),
                SimConfig::default_for(n),
                "{}",
                path.display()
            );
        }
    }

    #[test]
    fn hand_written_json() {
        let text = r#"{
            "chains": [{"id": "A"}, {"id": "B", "endpoint": "enode://peer-b", "block_interval": 2}],
            "contracts": [
                {"chain": "A", "address": "0x0a", "template": "provider_read", "stored": 5},
                {"chain": "B", "address": "0x0b", "template": "custom",
                 "functions": [{"signature": "poke(uint256)", "kind": "sink", "slot": 3}],
                 "storage": {"3": "11"}}
            ],
            "exposure": [{"chain": "A", "contract": "0x0a", "function": "getValue()", "keys": [0], "mode": "read_only"}],
            "fees": {"f_base": 10, "per_call": 5, "per_write": 3,
                     "accounts": [{"chain": "B", "address": "0x01", "balance": 100}]},
            "scenario": {"name": "read-pattern"}
        }"#;
        let cfg = SimConfig::from_json(text).unwrap();
        assert_eq!(cfg.chains[1].endpoint(), "enode://peer-b");
        assert_eq!(cfg.chains[0].endpoint(), "enode://A");
        assert!(cfg.chains[0].compact_bypass);
        let custom = cfg.contracts[1].build();
        assert_eq!(custom.slot(3), Word::from_u64(11));
        assert!(custom
            .function(&Selector::from_signature("poke(uint256)"))
            .is_some());
        assert_eq!(cfg.policy(&chain("A")).entries.len(), 1);
        assert_eq!(cfg.transport, TransportConfig::default());
    }

    #[test]
    fn rejects_dangling_references() {
        let mut cfg = SimConfig::read_pattern();
        cfg.exposure[0].function = "missing()".into();
        assert!(matches!(
            cfg.validate(),
            Err(ConfigError::UnknownFunction(..))
        ));

        let mut cfg = SimConfig::read_pattern();
        cfg.exposure[0].contract = Address::from_low_u64(0x99);
        assert!(matches!(
            cfg.validate(),
            Err(ConfigError::UnknownContract(..))
        ));

        let mut cfg = SimConfig::read_pattern();
        cfg.chains.push(ChainSpec::new(CHAIN_A));
        assert!(matches!(
            cfg.validate(),
            Err(ConfigError::DuplicateChain(_))
        ));

        let mut cfg = SimConfig::read_pattern();
        cfg.fees.collateral[0].host = chain("Z");
        assert!(matches!(cfg.validate(), Err(ConfigError::UnknownChain(_))));

        let mut cfg = SimConfig::read_pattern();
        cfg.transport.latency_min = 9;
        assert!(matches!(cfg.validate(), Err(ConfigError::Transport(_))));
    }
}
