//! Eve: interception policies over (tag, pulse) traffic, plus the
//! fake-user denial-of-service probes.
//!
//! Each strategy is a policy applied to every announcement group on the
//! wire, with a finalization step after the round that turns whatever Eve
//! collected into a key guess once the public transcript (if any) is
//! available. Against the authenticated variants the public transcript
//! carries no plaintext bases, which is exactly what the photon-splitting
//! strategies starve on.

use crate::channel::{measure, photon_number_split, transmit, Basis, DetectionOutcome, Pulse};
use crate::crypto::{make_tag, InitialSecret, Tag, TagLength};
use crate::protocol::{
    constant_time_gate, encode_response, LinkKeys, ProtocolVariant, BASELINE_POST_TICKS,
};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AdversaryError {
    #[error("invalid strategy parameter: {0}")]
    InvalidParameter(String),
}

/// The interception policies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EveStrategy {
    /// Forward everything untouched.
    Passive,
    /// Fake user on a deliberately lossy link, stalling the peer.
    DoSProbe { attenuation_db: f64 },
    /// Repeated fake-user probes aimed at draining the tag budget.
    KeyExhaustion { repeat: u64 },
    /// Photon-number splitting with quantum memory: block singles, skim one
    /// photon off multiphoton pulses, measure after bases become public.
    PnsWithMemory,
    /// Measure each pulse in a random basis and resend the observation.
    InterceptResend,
    /// Memoryless splitting of three-plus-photon pulses resolved by
    /// unambiguous state discrimination, succeeding with probability `p_usd`.
    PnsThreePlus { p_usd: f64 },
    /// Memoryless splitting that measures immediately in the key basis;
    /// built for biased-basis targets.
    PnsNoMemory { key_basis: Basis },
    /// Measure in a fixed basis; forward the genuine tag or a random one.
    BlindTagFlip { measure_basis: Basis, flip: bool },
    /// Replace dense-mode tags with uniform random guesses.
    DenseTagGuess,
}

impl EveStrategy {
    pub fn validate(&self) -> Result<(), AdversaryError> {
        match self {
            EveStrategy::DoSProbe { attenuation_db } if *attenuation_db < 0.0 => Err(
                AdversaryError::InvalidParameter(format!("attenuation {attenuation_db} dB < 0")),
            ),
            EveStrategy::KeyExhaustion { repeat } if *repeat == 0 => Err(
                AdversaryError::InvalidParameter("repeat count must be positive".into()),
            ),
            EveStrategy::PnsThreePlus { p_usd } if !(0.0..=1.0).contains(p_usd) => Err(
                AdversaryError::InvalidParameter(format!("p_usd {p_usd} outside [0, 1]")),
            ),
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            EveStrategy::Passive => "passive".into(),
            EveStrategy::DoSProbe { attenuation_db } => format!("dos-probe({attenuation_db}dB)"),
            EveStrategy::KeyExhaustion { repeat } => format!("key-exhaustion(x{repeat})"),
            EveStrategy::PnsWithMemory => "pns-memory".into(),
            EveStrategy::InterceptResend => "intercept-resend".into(),
            EveStrategy::PnsThreePlus { p_usd } => format!("pns-three-plus(p={p_usd})"),
            EveStrategy::PnsNoMemory { key_basis } => {
                format!("pns-no-memory(key={})", key_basis.label())
            }
            EveStrategy::BlindTagFlip {
                measure_basis,
                flip,
            } => {
                format!(
                    "blind-tag-flip(basis={},flip={flip})",
                    measure_basis.label()
                )
            }
            EveStrategy::DenseTagGuess => "dense-tag-guess".into(),
        }
    }
}

/// Everything Eve accumulates during a round. Stored pulses hold photons she
/// actually split out, so photon number stays conserved globally.
#[derive(Debug, Default, Clone)]
pub struct EveState {
    pub stored: Vec<(usize, Pulse)>,
    /// Bits measured during interception (index, observed bit).
    pub immediate: Vec<(usize, bool)>,
    pub blocked_pulses: usize,
    pub forged_tags: u64,
}

pub struct Eve {
    pub strategy: EveStrategy,
    pub state: EveState,
}

/// Result of intercepting one announcement group: an optional replacement
/// for the tag value and, per covered pulse, what (if anything) travels on.
pub struct InterceptedGroup {
    pub tag_replacement: Option<u128>,
    pub pulses: Vec<Option<Pulse>>,
}

impl Eve {
    pub fn new(strategy: EveStrategy) -> Result<Self, AdversaryError> {
        strategy.validate()?;
        Ok(Eve {
            strategy,
            state: EveState::default(),
        })
    }

    /// Apply the policy to one group of wire traffic.
    pub fn intercept<R: Rng>(
        &mut self,
        tag: Option<&Tag>,
        pulses: &[(usize, Pulse)],
        rng: &mut R,
    ) -> InterceptedGroup {
        let tag_replacement = match (&self.strategy, tag) {
            (EveStrategy::BlindTagFlip { flip: true, .. }, Some(t))
            | (EveStrategy::DenseTagGuess, Some(t)) => {
                self.state.forged_tags += 1;
                Some(random_tag_excluding(t.value, t.tag, rng))
            }
            _ => None,
        };
        let forwarded = pulses
            .iter()
            .map(|&(index, pulse)| self.intercept_pulse(index, pulse, rng))
            .collect();
        InterceptedGroup {
            tag_replacement,
            pulses: forwarded,
        }
    }

    fn intercept_pulse<R: Rng>(
        &mut self,
        index: usize,
        pulse: Pulse,
        rng: &mut R,
    ) -> Option<Pulse> {
        match self.strategy {
            EveStrategy::Passive | EveStrategy::KeyExhaustion { .. } => Some(pulse),
            EveStrategy::DoSProbe { attenuation_db } => {
                Some(transmit(pulse, 10f64.powf(-attenuation_db / 10.0), rng))
            }
            EveStrategy::PnsWithMemory => match pulse.photon_count {
                0 => Some(pulse),
                1 => {
                    self.state.blocked_pulses += 1;
                    None
                }
                _ => {
                    let (kept, forwarded) = photon_number_split(pulse, 1).expect("n >= 2");
                    self.state.stored.push((index, kept));
                    Some(forwarded)
                }
            },
            EveStrategy::PnsThreePlus { .. } => match pulse.photon_count {
                0 => Some(pulse),
                1 | 2 => {
                    self.state.blocked_pulses += 1;
                    None
                }
                _ => {
                    let (kept, forwarded) = photon_number_split(pulse, 2).expect("n >= 3");
                    self.state.stored.push((index, kept));
                    Some(forwarded)
                }
            },
            EveStrategy::PnsNoMemory { key_basis } => match pulse.photon_count {
                0 => Some(pulse),
                1 => {
                    self.state.blocked_pulses += 1;
                    None
                }
                _ => {
                    let (kept, forwarded) = photon_number_split(pulse, 1).expect("n >= 2");
                    // No memory: the skimmed photon is measured on the spot.
                    if let DetectionOutcome::Click(bit) = measure(&kept, key_basis, 0.0, rng) {
                        self.state.immediate.push((index, bit));
                    }
                    Some(forwarded)
                }
            },
            EveStrategy::InterceptResend => {
                if pulse.photon_count == 0 {
                    return Some(pulse);
                }
                let eve_basis = Basis::random(rng);
                match measure(&pulse, eve_basis, 0.0, rng) {
                    DetectionOutcome::Click(bit) => {
                        self.state.immediate.push((index, bit));
                        Some(Pulse {
                            photon_count: 1,
                            basis: eve_basis,
                            bit,
                        })
                    }
                    DetectionOutcome::NoClick => Some(pulse),
                }
            }
            EveStrategy::BlindTagFlip { measure_basis, .. } => {
                if pulse.photon_count == 0 {
                    return Some(pulse);
                }
                match measure(&pulse, measure_basis, 0.0, rng) {
                    DetectionOutcome::Click(bit) => {
                        self.state.immediate.push((index, bit));
                        // The state collapses to what she observed.
                        Some(Pulse {
                            photon_count: pulse.photon_count,
                            basis: measure_basis,
                            bit,
                        })
                    }
                    DetectionOutcome::NoClick => Some(pulse),
                }
            }
            EveStrategy::DenseTagGuess => Some(pulse),
        }
    }
}

/// Uniform random tag value distinct from the genuine one.
fn random_tag_excluding<R: Rng>(genuine: u128, tag: TagLength, rng: &mut R) -> u128 {
    let mask = tag.mask();
    loop {
        let candidate = rng.random::<u128>() & mask;
        if candidate != genuine {
            return candidate;
        }
    }
}

/// What the round made public. Authenticated variants leave every field
/// empty: bases travel only inside confidential tags.
#[derive(Debug, Clone, Default)]
pub struct PublicRound {
    pub announced_bases: Option<Vec<Basis>>,
    pub key_basis: Option<Basis>,
    /// Indices that survived public sifting (baselines only).
    pub final_key_indices: Option<Vec<usize>>,
}

/// Eve's post-round accounting.
#[derive(Debug, Clone)]
pub struct EveReport {
    pub strategy: String,
    pub key_guess: Vec<(usize, bool)>,
    pub guessed: usize,
    pub correct: usize,
    /// Fraction of guesses matching Alice's prepared bits; None without guesses.
    pub agreement: Option<f64>,
    pub stored_photons: usize,
    pub blocked_pulses: usize,
    pub forged_tags: u64,
}

/// Turn Eve's collected state into a key guess and score it against Alice's
/// prepared bits (simulator-omniscient scoring; Eve never sees the truth).
///
/// Stored photons are measured in the publicly announced basis when one
/// exists and in a random basis otherwise. Sifted baselines restrict her
/// guess to the indices that survived sifting.
pub fn finalize<R: Rng>(
    eve: &mut Eve,
    public: &PublicRound,
    alice_truth: &[(Basis, bool)],
    rng: &mut R,
) -> EveReport {
    let state = std::mem::take(&mut eve.state);
    let mut guesses: Vec<(usize, bool)> = Vec::new();
    match eve.strategy {
        EveStrategy::PnsWithMemory => {
            for (index, pulse) in &state.stored {
                let basis_choice = match &public.announced_bases {
                    Some(bases) => bases[*index],
                    None => Basis::random(rng),
                };
                if let DetectionOutcome::Click(bit) = measure(pulse, basis_choice, 0.0, rng) {
                    guesses.push((*index, bit));
                }
            }
        }
        EveStrategy::PnsThreePlus { p_usd } => {
            // Discrimination on the stored pair either identifies the state
            // exactly or yields nothing.
            for (index, pulse) in &state.stored {
                if p_usd > 0.0 && rng.random::<f64>() < p_usd {
                    guesses.push((*index, pulse.bit));
                }
            }
        }
        EveStrategy::PnsNoMemory { .. }
        | EveStrategy::InterceptResend
        | EveStrategy::BlindTagFlip { .. } => {
            guesses = state.immediate.clone();
        }
        _ => {}
    }

    // Public sifting lets her discard indices that never became key.
    if let Some(kept) = &public.final_key_indices {
        let keep: std::collections::HashSet<usize> = kept.iter().copied().collect();
        guesses.retain(|(i, _)| keep.contains(i));
    }

    let correct = guesses
        .iter()
        .filter(|(i, bit)| alice_truth[*i].1 == *bit)
        .count();
    let guessed = guesses.len();
    EveReport {
        strategy: eve.strategy.label(),
        guessed,
        correct,
        agreement: if guessed > 0 {
            Some(correct as f64 / guessed as f64)
        } else {
            None
        },
        stored_photons: state.stored.len(),
        blocked_pulses: state.blocked_pulses,
        forged_tags: state.forged_tags,
        key_guess: guesses,
    }
}

/// Outcome of a denial-of-service probe campaign.
#[derive(Debug, Clone)]
pub struct DoSReport {
    pub defender: String,
    pub trials: u64,
    pub detected: u64,
    /// Largest number of announcement groups any probe survived through.
    pub max_latency_groups: u64,
    /// Tick at which the defender flagged the final trial's probe.
    pub detection_tick: u64,
    /// Announcement tags Alice spent per probe (detected group plus the one
    /// prepared ahead while the pipeline ran).
    pub tags_consumed_per_probe: u64,
    pub tags_consumed_total: u128,
    pub budget_limit: u128,
    /// Probes it would take to empty the budget at the observed burn rate.
    pub probes_to_exhaustion: Option<u128>,
}

/// Fake-user probes against an authenticated defender.
///
/// Eve connects claiming to be Bob but holds no secret material, so her
/// arrival response is a uniform forgery; with two acceptable candidate tags
/// per nonce it survives a group with probability 2^(1-tag_bits). Alice
/// charges each probe the detected group's announcement tag plus the one
/// prepared in parallel for the group that never happens.
pub fn dos_scenario<R: Rng>(
    variant: &ProtocolVariant,
    alice_keys: &mut LinkKeys,
    response_secret: &InitialSecret,
    trials: u64,
    rng: &mut R,
) -> DoSReport {
    let tag_len = alice_keys.secret.tag_length();
    let budget_limit = alice_keys.budget.limit();
    let tags_before = alice_keys.budget.consumed();
    let group_size = variant.group_size();
    let group_message = vec![0u8; group_size]; // bases content is irrelevant here

    // Candidate digests Alice holds in memory for Yes/No verification.
    let digest_yes = response_secret.digest(&encode_response(&[true]));
    let digest_no = response_secret.digest(&encode_response(&[false]));

    let mut detected = 0u64;
    let mut max_latency = 0u64;
    let mut last_detection_tick = 0u64;
    let mut exhausted_after: Option<u128> = None;

    'probes: for probe in 0..trials {
        let mut clock = 0u64;
        let mut groups = 0u64;
        // Each connection claims a fresh response stream; Alice mirrors it.
        let mut response_mirror = crate::crypto::NonceGenerator::new(probe + 1, 64);
        loop {
            // One announcement group toward the "user".
            if make_tag(
                &alice_keys.secret,
                &mut alice_keys.nonces,
                &mut alice_keys.budget,
                &group_message,
            )
            .is_err()
            {
                exhausted_after = Some(probe as u128);
                break 'probes;
            }
            let tag_tick = clock;
            let release = constant_time_gate(variant, tag_tick);
            let response_tick = release + group_size as u64;
            groups += 1;

            // Eve forges the arrival response; Alice compares against both
            // candidates at the mirrored nonce.
            let forged = rng.random::<u128>() & tag_len.mask();
            let nonce = response_mirror
                .next_nonce()
                .expect("fresh mirror cannot exhaust in a probe");
            let ks = response_secret.keystream(nonce);
            let accepted = forged == digest_yes ^ ks || forged == digest_no ^ ks;
            if !accepted {
                detected += 1;
                max_latency = max_latency.max(groups);
                last_detection_tick = response_tick;
                // The pipelined next-group announcement was already prepared
                // and dies with the connection.
                if make_tag(
                    &alice_keys.secret,
                    &mut alice_keys.nonces,
                    &mut alice_keys.budget,
                    &group_message,
                )
                .is_err()
                {
                    exhausted_after = Some(probe as u128 + 1);
                    break 'probes;
                }
                break;
            }
            clock = response_tick + 1;
        }
    }

    let tags_total = alice_keys.budget.consumed() - tags_before;
    let per_probe = (tags_total as u64).checked_div(detected).unwrap_or(0);
    let probes_to_exhaustion = exhausted_after.or_else(|| {
        if per_probe > 0 {
            Some(budget_limit / per_probe as u128)
        } else {
            None
        }
    });
    DoSReport {
        defender: variant.label(),
        trials,
        detected,
        max_latency_groups: max_latency,
        detection_tick: last_detection_tick,
        tags_consumed_per_probe: per_probe,
        tags_consumed_total: tags_total,
        budget_limit,
        probes_to_exhaustion,
    }
}

/// Fake-user probe against the canonical baseline: nothing authenticates
/// until the end-of-round MAC, so detection waits out all `n_pulses` pulses
/// plus the announcement and MAC ticks.
pub fn dos_scenario_canonical(n_pulses: usize) -> DoSReport {
    DoSReport {
        defender: ProtocolVariant::PlainBb84.label(),
        trials: 1,
        detected: 1,
        max_latency_groups: n_pulses as u64,
        detection_tick: n_pulses as u64 + BASELINE_POST_TICKS,
        tags_consumed_per_probe: 1, // the one round MAC the probe wastes
        tags_consumed_total: 1,
        budget_limit: 0,
        probes_to_exhaustion: None,
    }
}
