//! Alice and Bob state machines for the authenticated protocol variants,
//! plus the plain and biased-basis baselines they are measured against.
//!
//! In the authenticated variants every basis announcement is a confidential
//! tag sent ahead of its qubits, so Bob always measures in Alice's basis and
//! nothing is sifted away: raw key length equals click count. The baselines
//! announce bases in plaintext after measurement and pay the usual sifting
//! cost, which is exactly the gap the adversary module probes.

pub mod lookup;
pub mod transcript;

pub use lookup::{binary_search, build_lookup_table, LookupTable, TableEntry};
pub use transcript::{Actor, Event, EventKind, Transcript};

use crate::adversary::{self, Eve, EveReport, PublicRound};
use crate::channel::{emit_pulse, measure, transmit, Basis, DetectionOutcome, Pulse};
use crate::crypto::{
    make_tag, CryptoError, Direction, InitialSecret, NonceGenerator, Tag, TagBudget, TagLength,
};
use crate::rng::RoundStreams;
use rand::Rng;
use thiserror::Error;

/// One simulated tick per lookup comparison; the dense-mode send gate is
/// expressed in these units.
pub const PER_COMPARISON_TICK: u64 = 1;

/// Ticks consumed by the baselines' end-of-round announcement and MAC
/// exchange (one tick each).
pub const BASELINE_POST_TICKS: u64 = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("rekey required: {0}")]
    MustRekey(#[from] CryptoError),
    #[error("invalid variant: {0}")]
    InvalidVariant(String),
    #[error("authenticated variants need key material for both directions")]
    MissingKeys,
    #[error("dense mode needs prebuilt lookup tables")]
    MissingTables,
}

/// Protocol selector.
///
/// Tag width is a free parameter on the authenticated variants, so the
/// reduced-bandwidth variant is `Basic`/`ReducedProcessing`/`Dense` with
/// 64-bit tags. Dense grouping does not combine with reduced processing;
/// its lookup already replaces the per-candidate comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProtocolVariant {
    Basic { tag: TagLength },
    ReducedProcessing { tag: TagLength },
    Dense { xi: u8, tag: TagLength },
    PlainBb84,
    BiasedBb84 { key_basis: Basis, bias: f64 },
}

impl ProtocolVariant {
    pub fn basic() -> Self {
        ProtocolVariant::Basic {
            tag: TagLength::Bits128,
        }
    }

    pub fn reduced_processing() -> Self {
        ProtocolVariant::ReducedProcessing {
            tag: TagLength::Bits128,
        }
    }

    /// 64-bit tags in the basic flow.
    pub fn reduced_bandwidth() -> Self {
        ProtocolVariant::Basic {
            tag: TagLength::Bits64,
        }
    }

    pub fn dense(xi: u8) -> Self {
        ProtocolVariant::Dense {
            xi,
            tag: TagLength::Bits64,
        }
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        match self {
            ProtocolVariant::Dense { xi, .. } if !(2..=20).contains(xi) => Err(
                ProtocolError::InvalidVariant(format!("dense group size {xi} outside 2..=20")),
            ),
            ProtocolVariant::BiasedBb84 { bias, .. } if !(*bias > 0.5 && *bias < 1.0) => Err(
                ProtocolError::InvalidVariant(format!("bias {bias} outside (0.5, 1)")),
            ),
            _ => Ok(()),
        }
    }

    pub fn tag_length(&self) -> Option<TagLength> {
        match self {
            ProtocolVariant::Basic { tag }
            | ProtocolVariant::ReducedProcessing { tag }
            | ProtocolVariant::Dense { tag, .. } => Some(*tag),
            _ => None,
        }
    }

    /// Qubits covered by one announcement tag.
    pub fn group_size(&self) -> usize {
        match self {
            ProtocolVariant::Dense { xi, .. } => *xi as usize,
            _ => 1,
        }
    }

    pub fn is_authenticated(&self) -> bool {
        !matches!(
            self,
            ProtocolVariant::PlainBb84 | ProtocolVariant::BiasedBb84 { .. }
        )
    }

    /// Announcement-direction classical load per qubit.
    pub fn classical_bits_per_qubit(&self) -> Option<f64> {
        self.tag_length()
            .map(|t| t.bits() as f64 / self.group_size() as f64)
    }

    /// Delay between tag send and qubit release. Dense mode waits out the
    /// worst-case lookup; the others just preserve tag-before-pulse ordering.
    pub fn gate_ticks(&self) -> u64 {
        match self {
            ProtocolVariant::Dense { xi, .. } => (*xi as u64 + 1) * PER_COMPARISON_TICK,
            _ => 1,
        }
    }

    pub fn label(&self) -> String {
        match self {
            ProtocolVariant::Basic { tag } => format!("basic(tag={})", tag.bits()),
            ProtocolVariant::ReducedProcessing { tag } => {
                format!("reduced-processing(tag={})", tag.bits())
            }
            ProtocolVariant::Dense { xi, tag } => format!("dense(xi={xi},tag={})", tag.bits()),
            ProtocolVariant::PlainBb84 => "plain-bb84".to_string(),
            ProtocolVariant::BiasedBb84 { key_basis, bias } => {
                format!("biased-bb84(key={},bias={bias})", key_basis.label())
            }
        }
    }
}

/// Qubit release tick for an announcement sent at `tag_tick`.
///
/// The release depends only on the variant's worst-case lookup time, never
/// on where the digest lands in the table, so timing reveals nothing about
/// the basis string.
pub fn constant_time_gate(variant: &ProtocolVariant, tag_tick: u64) -> u64 {
    tag_tick + variant.gate_ticks()
}

/// One direction's working key material: secret, nonce stream, tag budget.
#[derive(Clone)]
pub struct LinkKeys {
    pub secret: InitialSecret,
    pub nonces: NonceGenerator,
    pub budget: TagBudget,
}

impl LinkKeys {
    pub fn new(secret: InitialSecret, iv: u64, l_v: u8) -> Self {
        let budget = TagBudget::new(secret.tag_length());
        LinkKeys {
            secret,
            nonces: NonceGenerator::new(iv, l_v),
            budget,
        }
    }

    pub fn direction(&self) -> Direction {
        self.secret.direction()
    }
}

/// Both dense-mode tables: basis resolution for the announcement direction
/// and arrival-bitmap resolution for the response direction. Rebuilt only
/// when the secrets change.
#[derive(Clone)]
pub struct DenseTables {
    pub bases: LookupTable,
    pub responses: LookupTable,
}

pub fn build_dense_tables(
    announce_secret: &InitialSecret,
    response_secret: &InitialSecret,
    xi: u8,
) -> DenseTables {
    DenseTables {
        bases: build_lookup_table(announce_secret, xi),
        responses: build_lookup_table(response_secret, xi),
    }
}

/// Frozen message encodings hashed into tags.
pub fn encode_bases(bases: &[Basis]) -> Vec<u8> {
    bases.iter().map(|b| b.encoded_byte()).collect()
}

/// Yes (arrived) encodes as 0x00, No as 0x01, one byte per covered qubit.
pub fn encode_response(arrived: &[bool]) -> Vec<u8> {
    arrived
        .iter()
        .map(|&a| if a { 0x00 } else { 0x01 })
        .collect()
}

#[derive(Debug, Clone)]
pub struct PreparedQubit {
    pub basis: Basis,
    pub bit: bool,
    pub nonce_index: u128,
}

/// One announcement group: the tag and the qubits it covers, plus Alice's
/// ground truth for the simulator's books.
#[derive(Debug, Clone)]
pub struct Announcement {
    pub tag: Tag,
    pub pulses: Vec<Pulse>,
    pub bases: Vec<Basis>,
    pub bits: Vec<bool>,
}

/// Bob's reading of an announcement tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolution {
    Known(Vec<Basis>),
    Unrecognized,
}

/// Alice's reading of a response tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResponseVerdict {
    Acknowledged(Vec<bool>),
    Unrecognized,
}

pub struct AliceSession<'k> {
    variant: ProtocolVariant,
    out: &'k mut LinkKeys,
    verify_secret: InitialSecret,
    verify_nonces: NonceGenerator,
    verify_table: Option<&'k LookupTable>,
    digest_yes: u128,
    digest_no: u128,
    pub prepared: Vec<PreparedQubit>,
    pub must_rekey: bool,
}

impl<'k> AliceSession<'k> {
    pub fn new(
        variant: ProtocolVariant,
        out: &'k mut LinkKeys,
        response_secret: InitialSecret,
        response_nonces: NonceGenerator,
        verify_table: Option<&'k LookupTable>,
    ) -> Self {
        // Candidate digests are computed once per secret and then read from
        // memory for every response.
        let digest_yes = response_secret.digest(&encode_response(&[true]));
        let digest_no = response_secret.digest(&encode_response(&[false]));
        AliceSession {
            variant,
            out,
            verify_secret: response_secret,
            verify_nonces: response_nonces,
            verify_table,
            digest_yes,
            digest_no,
            prepared: Vec::new(),
            must_rekey: false,
        }
    }

    pub fn tags_consumed(&self) -> u128 {
        self.out.budget.consumed()
    }

    /// Draw a group of (basis, bit) choices and announce them.
    pub fn announce<R: Rng, S: Rng>(
        &mut self,
        mu: f64,
        choices_rng: &mut R,
        source_rng: &mut S,
    ) -> Result<Announcement, ProtocolError> {
        let choices: Vec<(Basis, bool)> = (0..self.variant.group_size())
            .map(|_| (Basis::random(choices_rng), choices_rng.random::<bool>()))
            .collect();
        self.announce_with(&choices, mu, source_rng)
    }

    /// Announce a fixed set of choices (tests drive specific basis strings
    /// through the same code path).
    pub fn announce_with<S: Rng>(
        &mut self,
        choices: &[(Basis, bool)],
        mu: f64,
        source_rng: &mut S,
    ) -> Result<Announcement, ProtocolError> {
        debug_assert_eq!(choices.len(), self.variant.group_size());
        let bases: Vec<Basis> = choices.iter().map(|&(b, _)| b).collect();
        let bits: Vec<bool> = choices.iter().map(|&(_, bit)| bit).collect();
        let message = encode_bases(&bases);
        let tag = make_tag(
            &self.out.secret,
            &mut self.out.nonces,
            &mut self.out.budget,
            &message,
        )
        .map_err(|e| {
            self.must_rekey = true;
            ProtocolError::MustRekey(e)
        })?;
        let pulses: Vec<Pulse> = choices
            .iter()
            .map(|&(basis, bit)| emit_pulse(mu, basis, bit, source_rng))
            .collect();
        for &(basis, bit) in choices {
            self.prepared.push(PreparedQubit {
                basis,
                bit,
                nonce_index: tag.nonce_index,
            });
        }
        Ok(Announcement {
            tag,
            pulses,
            bases,
            bits,
        })
    }

    /// Check Bob's response tag against the candidate set for the mirrored
    /// nonce. The mirror advances whether or not the tag is recognized.
    pub fn verify_response(&mut self, tag_value: u128) -> Result<ResponseVerdict, ProtocolError> {
        let nonce = self.verify_nonces.next_nonce().map_err(|e| {
            self.must_rekey = true;
            ProtocolError::MustRekey(e)
        })?;
        let ks = self.verify_secret.keystream(nonce);
        if let Some(table) = self.verify_table {
            let digest = tag_value ^ ks;
            let (hit, _) = table.search(digest);
            return Ok(match hit {
                Some(i) => ResponseVerdict::Acknowledged(table.flags_at(i)),
                None => ResponseVerdict::Unrecognized,
            });
        }
        if tag_value == self.digest_yes ^ ks {
            Ok(ResponseVerdict::Acknowledged(vec![true]))
        } else if tag_value == self.digest_no ^ ks {
            Ok(ResponseVerdict::Acknowledged(vec![false]))
        } else {
            Ok(ResponseVerdict::Unrecognized)
        }
    }
}

pub struct BobSession<'k> {
    variant: ProtocolVariant,
    out: &'k mut LinkKeys,
    announce_secret: InitialSecret,
    announce_nonces: NonceGenerator,
    bases_table: Option<&'k LookupTable>,
    digest_x: u128,
    digest_z: u128,
    pub comparisons_last: u32,
    pub max_comparisons: u32,
    pub must_rekey: bool,
}

impl<'k> BobSession<'k> {
    pub fn new(
        variant: ProtocolVariant,
        out: &'k mut LinkKeys,
        announce_secret: InitialSecret,
        announce_nonces: NonceGenerator,
        bases_table: Option<&'k LookupTable>,
    ) -> Self {
        let digest_x = announce_secret.digest(&encode_bases(&[Basis::X]));
        let digest_z = announce_secret.digest(&encode_bases(&[Basis::Z]));
        BobSession {
            variant,
            out,
            announce_secret,
            announce_nonces,
            bases_table,
            digest_x,
            digest_z,
            comparisons_last: 0,
            max_comparisons: 0,
            must_rekey: false,
        }
    }

    pub fn tags_consumed(&self) -> u128 {
        self.out.budget.consumed()
    }

    fn note_comparisons(&mut self, comps: u32) {
        self.comparisons_last = comps;
        self.max_comparisons = self.max_comparisons.max(comps);
    }

    /// Recover the measurement bases an announcement tag encodes.
    ///
    /// Basic: compare against both precomputed candidates; no match is
    /// evidence of tampering. Reduced processing: compare against the X
    /// candidate only and fall back to Z, so nothing is ever unrecognized.
    /// Dense: strip the keystream and binary-search the digest table.
    pub fn resolve_bases(&mut self, tag_value: u128) -> Result<Resolution, ProtocolError> {
        let nonce = self.announce_nonces.next_nonce().map_err(|e| {
            self.must_rekey = true;
            ProtocolError::MustRekey(e)
        })?;
        let ks = self.announce_secret.keystream(nonce);
        Ok(match self.variant {
            ProtocolVariant::Basic { .. } => {
                self.note_comparisons(2);
                if tag_value == self.digest_x ^ ks {
                    Resolution::Known(vec![Basis::X])
                } else if tag_value == self.digest_z ^ ks {
                    Resolution::Known(vec![Basis::Z])
                } else {
                    Resolution::Unrecognized
                }
            }
            ProtocolVariant::ReducedProcessing { .. } => {
                self.note_comparisons(1);
                if tag_value == self.digest_x ^ ks {
                    Resolution::Known(vec![Basis::X])
                } else {
                    Resolution::Known(vec![Basis::Z])
                }
            }
            ProtocolVariant::Dense { .. } => {
                let table = self.bases_table.expect("dense session built with table");
                let digest = tag_value ^ ks;
                let (hit, comps) = table.search(digest);
                self.note_comparisons(comps);
                match hit {
                    Some(i) => Resolution::Known(table.bases_at(i)),
                    None => Resolution::Unrecognized,
                }
            }
            _ => unreachable!("baselines announce in plaintext"),
        })
    }

    /// Authenticated arrival report for one group.
    pub fn respond(&mut self, arrived: &[bool]) -> Result<Tag, ProtocolError> {
        let message = encode_response(arrived);
        make_tag(
            &self.out.secret,
            &mut self.out.nonces,
            &mut self.out.budget,
            &message,
        )
        .map_err(|e| {
            self.must_rekey = true;
            ProtocolError::MustRekey(e)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionKind {
    UnrecognizedAnnouncement,
    ResponseRejected,
    MacFailure,
}

impl DetectionKind {
    pub fn label(self) -> &'static str {
        match self {
            DetectionKind::UnrecognizedAnnouncement => "unrecognized_announcement",
            DetectionKind::ResponseRejected => "response_rejected",
            DetectionKind::MacFailure => "mac_failure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectionEvent {
    pub kind: DetectionKind,
    pub group: usize,
    pub tick: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct PulseRecord {
    pub index: usize,
    pub group: usize,
    pub alice_basis: Basis,
    pub alice_bit: bool,
    pub bob_basis: Option<Basis>,
    pub outcome: DetectionOutcome,
    pub tag_ok: bool,
}

/// Everything one round produced. Raw keys stay aligned by pulse index,
/// `None` marking positions that contributed nothing.
#[derive(Debug, Clone)]
pub struct RoundResult {
    pub variant_label: String,
    pub n_pulses: usize,
    pub clicks: usize,
    pub matched_clicks: usize,
    /// Matched-basis fraction among clicks.
    pub efficiency: f64,
    /// Simulator-omniscient mismatch fraction over the aligned raw keys.
    pub qber_omniscient: f64,
    pub alice_raw: Vec<Option<bool>>,
    pub bob_raw: Vec<Option<bool>>,
    pub raw_key_len: usize,
    pub pulses: Vec<PulseRecord>,
    pub detection_events: Vec<DetectionEvent>,
    /// Minority-basis comparison stats in the biased baseline.
    pub detection_check_errors: usize,
    pub detection_check_total: usize,
    pub tags_consumed_alice: u128,
    pub tags_consumed_bob: u128,
    /// Every (direction, nonce) emitted during the round, for uniqueness audits.
    pub nonces_used: Vec<(Direction, u128)>,
    pub max_comparisons: u32,
    pub table_payload_bytes: Option<u64>,
    pub ticks_elapsed: u64,
    pub aborted: bool,
    pub transcript: Transcript,
}

impl RoundResult {
    fn finish(&mut self) {
        self.efficiency = if self.clicks > 0 {
            self.matched_clicks as f64 / self.clicks as f64
        } else {
            0.0
        };
        let mut mismatches = 0usize;
        let mut compared = 0usize;
        for (a, b) in self.alice_raw.iter().zip(&self.bob_raw) {
            if let (Some(a), Some(b)) = (a, b) {
                compared += 1;
                if a != b {
                    mismatches += 1;
                }
            }
        }
        self.raw_key_len = compared;
        self.qber_omniscient = if compared > 0 {
            mismatches as f64 / compared as f64
        } else {
            0.0
        };
    }

    /// Compacted raw keys (positions where both sides hold a bit).
    pub fn raw_keys(&self) -> (Vec<bool>, Vec<bool>) {
        let mut a = Vec::with_capacity(self.raw_key_len);
        let mut b = Vec::with_capacity(self.raw_key_len);
        for (x, y) in self.alice_raw.iter().zip(&self.bob_raw) {
            if let (Some(x), Some(y)) = (x, y) {
                a.push(*x);
                b.push(*y);
            }
        }
        (a, b)
    }
}

#[derive(Debug)]
pub struct RoundOutcome {
    pub result: RoundResult,
    pub eve: Option<EveReport>,
}

/// Channel and run parameters for a single round.
#[derive(Debug, Clone, Copy)]
pub struct RoundConfig {
    pub n_pulses: usize,
    pub mu: f64,
    pub transmittance: f64,
    pub qber: f64,
    pub abort_on_detect: bool,
}

fn empty_result(variant: &ProtocolVariant, n: usize) -> RoundResult {
    RoundResult {
        variant_label: variant.label(),
        n_pulses: n,
        clicks: 0,
        matched_clicks: 0,
        efficiency: 0.0,
        qber_omniscient: 0.0,
        alice_raw: vec![None; n],
        bob_raw: vec![None; n],
        raw_key_len: 0,
        pulses: Vec::with_capacity(n),
        detection_events: Vec::new(),
        detection_check_errors: 0,
        detection_check_total: 0,
        tags_consumed_alice: 0,
        tags_consumed_bob: 0,
        nonces_used: Vec::new(),
        max_comparisons: 0,
        table_payload_bytes: None,
        ticks_elapsed: 0,
        aborted: false,
        transcript: Transcript::new(),
    }
}

/// Run one full round of the selected variant.
///
/// Authenticated variants need both directions' key material; dense mode
/// additionally needs prebuilt lookup tables. Budget or counter exhaustion
/// surfaces as `MustRekey` and leaves the key state marked exhausted.
pub fn run_round(
    cfg: &RoundConfig,
    variant: &ProtocolVariant,
    keys: Option<(&mut LinkKeys, &mut LinkKeys)>,
    tables: Option<&DenseTables>,
    eve: Option<&mut Eve>,
    streams: &mut RoundStreams,
) -> Result<RoundOutcome, ProtocolError> {
    variant.validate()?;
    match variant {
        ProtocolVariant::PlainBb84 => Ok(plain_bb84_round(cfg, eve, streams)),
        ProtocolVariant::BiasedBb84 { key_basis, bias } => {
            Ok(biased_bb84_round(cfg, *key_basis, *bias, eve, streams))
        }
        _ => {
            let (alice_keys, bob_keys) = keys.ok_or(ProtocolError::MissingKeys)?;
            if matches!(variant, ProtocolVariant::Dense { .. }) && tables.is_none() {
                return Err(ProtocolError::MissingTables);
            }
            authenticated_round(cfg, variant, alice_keys, bob_keys, tables, eve, streams)
        }
    }
}

fn authenticated_round(
    cfg: &RoundConfig,
    variant: &ProtocolVariant,
    alice_keys: &mut LinkKeys,
    bob_keys: &mut LinkKeys,
    tables: Option<&DenseTables>,
    mut eve: Option<&mut Eve>,
    streams: &mut RoundStreams,
) -> Result<RoundOutcome, ProtocolError> {
    let group_size = variant.group_size();
    let n_groups = cfg.n_pulses / group_size;
    let total = n_groups * group_size;
    let mut result = empty_result(variant, total);
    result.table_payload_bytes = tables.map(|t| t.bases.payload_bytes());

    let alice_tags_before = alice_keys.budget.consumed();
    let bob_tags_before = bob_keys.budget.consumed();

    // Mirror states are cloned before either side consumes from its stream.
    let bob_announce_secret = alice_keys.secret.clone();
    let bob_announce_nonces = alice_keys.nonces.clone();
    let alice_response_secret = bob_keys.secret.clone();
    let alice_response_nonces = bob_keys.nonces.clone();

    let mut alice = AliceSession::new(
        *variant,
        alice_keys,
        alice_response_secret,
        alice_response_nonces,
        tables.map(|t| &t.responses),
    );
    let mut bob = BobSession::new(
        *variant,
        bob_keys,
        bob_announce_secret,
        bob_announce_nonces,
        tables.map(|t| &t.bases),
    );

    let mut clock: u64 = 0;
    let mut alice_truth: Vec<(Basis, bool)> = Vec::with_capacity(total);

    for g in 0..n_groups {
        let ann = alice.announce(cfg.mu, &mut streams.alice, &mut streams.source)?;
        let tag_tick = clock;
        result.transcript.push(
            tag_tick,
            Actor::Alice,
            EventKind::TagSent,
            &ann.tag.to_be_bytes(),
        );
        result
            .nonces_used
            .push((Direction::AliceToBob, ann.tag.nonce));
        let release = constant_time_gate(variant, tag_tick);

        for (j, (&basis, &bit)) in ann.bases.iter().zip(&ann.bits).enumerate() {
            alice_truth.push((basis, bit));
            let payload = [basis.encoded_byte(), bit as u8, j as u8];
            result.transcript.push(
                release + j as u64,
                Actor::Alice,
                EventKind::PulseSent,
                &payload,
            );
        }

        // Everything on the wire passes through Eve.
        let indexed: Vec<(usize, Pulse)> = ann
            .pulses
            .iter()
            .enumerate()
            .map(|(j, &p)| (g * group_size + j, p))
            .collect();
        let (wire_tag, wire_pulses) = match eve.as_deref_mut() {
            Some(e) => {
                let intercepted = e.intercept(Some(&ann.tag), &indexed, &mut streams.eve);
                (
                    intercepted.tag_replacement.unwrap_or(ann.tag.value),
                    intercepted.pulses,
                )
            }
            None => (
                ann.tag.value,
                indexed.iter().map(|&(_, p)| Some(p)).collect(),
            ),
        };

        let resolution = bob.resolve_bases(wire_tag)?;
        let mut arrived = vec![false; group_size];
        match &resolution {
            Resolution::Known(bases) => {
                for j in 0..group_size {
                    let idx = g * group_size + j;
                    let outcome = match wire_pulses[j] {
                        Some(p) => {
                            let received = transmit(p, cfg.transmittance, &mut streams.channel);
                            measure(&received, bases[j], cfg.qber, &mut streams.detector)
                        }
                        None => DetectionOutcome::NoClick,
                    };
                    if let DetectionOutcome::Click(bit) = outcome {
                        arrived[j] = true;
                        result.clicks += 1;
                        if bases[j] == ann.bases[j] {
                            result.matched_clicks += 1;
                        }
                        result.alice_raw[idx] = Some(ann.bits[j]);
                        result.bob_raw[idx] = Some(bit);
                    }
                    result.pulses.push(PulseRecord {
                        index: idx,
                        group: g,
                        alice_basis: ann.bases[j],
                        alice_bit: ann.bits[j],
                        bob_basis: Some(bases[j]),
                        outcome,
                        tag_ok: true,
                    });
                }
            }
            Resolution::Unrecognized => {
                // Tampering evidence: the whole covered group is discarded
                // but logged, so unaffected groups stay usable.
                result.detection_events.push(DetectionEvent {
                    kind: DetectionKind::UnrecognizedAnnouncement,
                    group: g,
                    tick: release,
                });
                result
                    .transcript
                    .push(release, Actor::Bob, EventKind::Detection, &[g as u8, 0x00]);
                for j in 0..group_size {
                    let idx = g * group_size + j;
                    result.pulses.push(PulseRecord {
                        index: idx,
                        group: g,
                        alice_basis: ann.bases[j],
                        alice_bit: ann.bits[j],
                        bob_basis: None,
                        outcome: DetectionOutcome::NoClick,
                        tag_ok: false,
                    });
                }
            }
        }

        let response_tick = release + group_size as u64;
        let response = bob.respond(&arrived)?;
        result.transcript.push(
            response_tick,
            Actor::Bob,
            EventKind::ResponseSent,
            &response.to_be_bytes(),
        );
        result
            .nonces_used
            .push((Direction::BobToAlice, response.nonce));
        if alice.verify_response(response.value)? == ResponseVerdict::Unrecognized {
            result.detection_events.push(DetectionEvent {
                kind: DetectionKind::ResponseRejected,
                group: g,
                tick: response_tick,
            });
            result.transcript.push(
                response_tick,
                Actor::Alice,
                EventKind::Detection,
                &[g as u8, 0x01],
            );
        }

        clock = response_tick + 1;

        if cfg.abort_on_detect && !result.detection_events.is_empty() {
            result.aborted = true;
            break;
        }
    }

    result.ticks_elapsed = clock;
    result.max_comparisons = bob.max_comparisons;
    let eve_report = eve.map(|e| {
        let public = PublicRound {
            announced_bases: None,
            key_basis: None,
            final_key_indices: None,
        };
        adversary::finalize(e, &public, &alice_truth, &mut streams.eve)
    });
    result.tags_consumed_alice = alice_keys.budget.consumed() - alice_tags_before;
    result.tags_consumed_bob = bob_keys.budget.consumed() - bob_tags_before;
    result.finish();
    Ok(RoundOutcome {
        result,
        eve: eve_report,
    })
}

/// Canonical BB84 baseline: plaintext basis announcement after measurement,
/// sifting, end-of-round MAC.
pub fn plain_bb84_round(
    cfg: &RoundConfig,
    mut eve: Option<&mut Eve>,
    streams: &mut RoundStreams,
) -> RoundOutcome {
    let n = cfg.n_pulses;
    let variant = ProtocolVariant::PlainBb84;
    let mut result = empty_result(&variant, n);
    let mut alice_truth = Vec::with_capacity(n);
    let mut bob_outcomes: Vec<(Option<Basis>, DetectionOutcome)> = Vec::with_capacity(n);

    for i in 0..n {
        let basis = Basis::random(&mut streams.alice);
        let bit = streams.alice.random::<bool>();
        alice_truth.push((basis, bit));
        let pulse = emit_pulse(cfg.mu, basis, bit, &mut streams.source);
        result.transcript.push(
            i as u64,
            Actor::Alice,
            EventKind::PulseSent,
            &[basis.encoded_byte(), bit as u8],
        );
        let wire = match eve.as_deref_mut() {
            Some(e) => {
                let intercepted = e.intercept(None, &[(i, pulse)], &mut streams.eve);
                intercepted.pulses[0]
            }
            None => Some(pulse),
        };
        let bob_basis = Basis::random(&mut streams.bob);
        let outcome = match wire {
            Some(p) => {
                let received = transmit(p, cfg.transmittance, &mut streams.channel);
                measure(&received, bob_basis, cfg.qber, &mut streams.detector)
            }
            None => DetectionOutcome::NoClick,
        };
        if let DetectionOutcome::Click(_) = outcome {
            result.clicks += 1;
            if bob_basis == basis {
                result.matched_clicks += 1;
            }
        }
        bob_outcomes.push((Some(bob_basis), outcome));
        result.pulses.push(PulseRecord {
            index: i,
            group: i,
            alice_basis: basis,
            alice_bit: bit,
            bob_basis: Some(bob_basis),
            outcome,
            tag_ok: true,
        });
    }

    // Public sifting: bases both ways, then the round MAC.
    let announce_tick = n as u64;
    let bases_bytes: Vec<u8> = alice_truth.iter().map(|(b, _)| b.encoded_byte()).collect();
    result.transcript.push(
        announce_tick,
        Actor::Alice,
        EventKind::BasesAnnounced,
        &bases_bytes,
    );
    result.transcript.push(
        announce_tick + 1,
        Actor::Bob,
        EventKind::BasesAnnounced,
        &[],
    );
    result.transcript.push(
        announce_tick + BASELINE_POST_TICKS,
        Actor::Alice,
        EventKind::MacExchanged,
        &[],
    );

    let mut sifted_indices = Vec::new();
    for (i, ((alice_basis, alice_bit), (bob_basis, outcome))) in
        alice_truth.iter().zip(&bob_outcomes).enumerate()
    {
        if let (Some(bb), DetectionOutcome::Click(bit)) = (bob_basis, outcome) {
            if bb == alice_basis {
                result.alice_raw[i] = Some(*alice_bit);
                result.bob_raw[i] = Some(*bit);
                sifted_indices.push(i);
            }
        }
    }

    result.ticks_elapsed = announce_tick + BASELINE_POST_TICKS + 1;
    let eve_report = eve.map(|e| {
        let public = PublicRound {
            announced_bases: Some(alice_truth.iter().map(|&(b, _)| b).collect()),
            key_basis: None,
            final_key_indices: Some(sifted_indices.clone()),
        };
        adversary::finalize(e, &public, &alice_truth, &mut streams.eve)
    });
    result.finish();
    RoundOutcome {
        result,
        eve: eve_report,
    }
}

/// Biased-basis baseline: both sides favour `key_basis` with probability
/// `bias`; key comes from key-basis matches only, the minority basis serves
/// purely for eavesdropper detection.
pub fn biased_bb84_round(
    cfg: &RoundConfig,
    key_basis: Basis,
    bias: f64,
    mut eve: Option<&mut Eve>,
    streams: &mut RoundStreams,
) -> RoundOutcome {
    let n = cfg.n_pulses;
    let variant = ProtocolVariant::BiasedBb84 { key_basis, bias };
    let mut result = empty_result(&variant, n);
    let mut alice_truth = Vec::with_capacity(n);

    let draw_biased = |rng: &mut rand_chacha::ChaCha20Rng| {
        if rng.random::<f64>() < bias {
            key_basis
        } else {
            key_basis.other()
        }
    };

    let mut final_key_indices = Vec::new();
    for i in 0..n {
        let basis = draw_biased(&mut streams.alice);
        let bit = streams.alice.random::<bool>();
        alice_truth.push((basis, bit));
        let pulse = emit_pulse(cfg.mu, basis, bit, &mut streams.source);
        result.transcript.push(
            i as u64,
            Actor::Alice,
            EventKind::PulseSent,
            &[basis.encoded_byte(), bit as u8],
        );
        let wire = match eve.as_deref_mut() {
            Some(e) => {
                let intercepted = e.intercept(None, &[(i, pulse)], &mut streams.eve);
                intercepted.pulses[0]
            }
            None => Some(pulse),
        };
        let bob_basis = draw_biased(&mut streams.bob);
        let outcome = match wire {
            Some(p) => {
                let received = transmit(p, cfg.transmittance, &mut streams.channel);
                measure(&received, bob_basis, cfg.qber, &mut streams.detector)
            }
            None => DetectionOutcome::NoClick,
        };
        if let DetectionOutcome::Click(bob_bit) = outcome {
            result.clicks += 1;
            if bob_basis == basis {
                result.matched_clicks += 1;
                if basis == key_basis {
                    result.alice_raw[i] = Some(bit);
                    result.bob_raw[i] = Some(bob_bit);
                    final_key_indices.push(i);
                } else {
                    // Minority-basis matches are disclosed for detection.
                    result.detection_check_total += 1;
                    if bob_bit != bit {
                        result.detection_check_errors += 1;
                    }
                }
            }
        }
        result.pulses.push(PulseRecord {
            index: i,
            group: i,
            alice_basis: basis,
            alice_bit: bit,
            bob_basis: Some(bob_basis),
            outcome,
            tag_ok: true,
        });
    }

    let announce_tick = n as u64;
    result
        .transcript
        .push(announce_tick, Actor::Alice, EventKind::BasesAnnounced, &[]);
    result.transcript.push(
        announce_tick + 1,
        Actor::Bob,
        EventKind::BasesAnnounced,
        &[],
    );
    result.transcript.push(
        announce_tick + BASELINE_POST_TICKS,
        Actor::Alice,
        EventKind::MacExchanged,
        &[],
    );
    result.ticks_elapsed = announce_tick + BASELINE_POST_TICKS + 1;

    let eve_report = eve.map(|e| {
        let public = PublicRound {
            announced_bases: Some(alice_truth.iter().map(|&(b, _)| b).collect()),
            key_basis: Some(key_basis),
            final_key_indices: Some(final_key_indices.clone()),
        };
        adversary::finalize(e, &public, &alice_truth, &mut streams.eve)
    });
    result.finish();
    RoundOutcome {
        result,
        eve: eve_report,
    }
}
