//! BB84-AES: quantum key distribution where every basis announcement is a
//! confidential authentication tag sent ahead of its qubits.
//!
//! The crate models the whole stack at desk scale: the tag construction
//! (universal hash masked by an AES-CTR keystream block), a photon-number-
//! resolved pulse channel, Alice/Bob state machines for the basic, reduced-
//! processing, reduced-bandwidth and dense-grouping protocol variants plus
//! plain and biased-basis BB84 baselines, an adversary harness covering
//! denial-of-service probes, photon-number splitting, intercept-resend and
//! blind tag modification, and the post-processing ledger that closes the
//! loop through reconciliation, privacy amplification and rekeying.
//!
//! Everything is driven by labeled, seed-derived randomness streams so runs
//! are reproducible bit for bit.

pub mod adversary;
pub mod channel;
pub mod crypto;
pub mod postproc;
pub mod protocol;
pub mod rng;

pub use adversary::{dos_scenario, dos_scenario_canonical, DoSReport, Eve, EveReport, EveStrategy};
pub use channel::{Basis, ChannelConfig, DetectionOutcome, Pulse};
pub use crypto::{Direction, InitialSecret, NonceGenerator, Tag, TagBudget, TagLength};
pub use postproc::{
    binary_entropy, estimate_qber, privacy_amplify, reconcile, rekey, run_ledger_round, KeyLedger,
    QberEstimate,
};
pub use protocol::{
    biased_bb84_round, build_lookup_table, constant_time_gate, plain_bb84_round, run_round,
    DenseTables, LinkKeys, ProtocolVariant, Resolution, RoundConfig, RoundOutcome, RoundResult,
};
pub use rng::RoundStreams;
