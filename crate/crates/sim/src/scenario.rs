//! Single-scenario execution: secrets, one protocol round, post-processing,
//! rekey, and metric assembly. Deterministic given the root seed.

use crate::config::ScenarioConfig;
use crate::metrics::MetricsReport;
use bb84aes::adversary::Eve;
use bb84aes::crypto::{make_tag, verify_tag, NonceGenerator, TagLength};
use bb84aes::postproc::{
    estimate_qber, privacy_amplify, reconcile, rekey, remove_disclosed, run_ledger_round, KeyLedger,
};
use bb84aes::protocol::{ProtocolError, RoundConfig, RoundOutcome};
use bb84aes::rng::{stream, RoundStreams};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] crate::config::Error),
    #[error("scenario internals: {0}")]
    Internal(String),
}

/// Draw one direction secret from the seeded secret stream, resampling until
/// the hash key is nonzero.
fn draw_secret_bytes<R: Rng>(rng: &mut R, tag: TagLength) -> Vec<u8> {
    loop {
        let mut raw = vec![0u8; 32 + tag.bytes()];
        rng.fill(&mut raw[..]);
        // The zero hash key occurs with probability 2^-tag_bits; resample.
        if raw[32..].iter().any(|&b| b != 0) {
            return raw;
        }
    }
}

/// Build the key ledger a scenario starts from (authenticated variants).
pub fn build_ledger(cfg: &ScenarioConfig) -> Result<KeyLedger, ScenarioError> {
    let tag = cfg.tag_length()?;
    let mut secret_stream = stream(cfg.seed(), "secret");
    let a2b = draw_secret_bytes(&mut secret_stream, tag);
    let b2a = draw_secret_bytes(&mut secret_stream, tag);
    let l_v = cfg.crypto.l_v;
    let iv_mask = if l_v == 64 {
        u64::MAX
    } else {
        (1u64 << l_v) - 1
    };
    let iv = stream(cfg.seed(), "iv").random::<u64>() & iv_mask;
    let mut ledger = KeyLedger::new(&a2b, &b2a, tag, iv, l_v)
        .map_err(|e| ScenarioError::Internal(e.to_string()))?;
    if let Some(width) = cfg.crypto.counter_width {
        ledger.alice_to_bob.nonces = NonceGenerator::with_counter_width(iv, l_v, width);
        ledger.bob_to_alice.nonces =
            NonceGenerator::with_counter_width(iv.wrapping_add(1) & iv_mask, l_v, width);
    }
    if let Some(limit) = cfg.crypto.budget_limit {
        ledger.set_budget_limit(limit as u128);
    }
    Ok(ledger)
}

fn round_config(cfg: &ScenarioConfig) -> RoundConfig {
    let channel = bb84aes::channel::ChannelConfig {
        mean_photon_number: cfg.channel.mu,
        attenuation_db: cfg.channel.attenuation_db,
        qber: cfg.channel.qber,
        clock_hz: cfg.channel.clock_hz,
    };
    RoundConfig {
        n_pulses: cfg.scenario.n_pulses,
        mu: channel.mean_photon_number,
        transmittance: channel.transmittance(),
        qber: channel.qber,
        abort_on_detect: cfg.scenario.abort_on_detect,
    }
}

/// Authenticate the post-processing summaries the same way as everything
/// else: one tag per message per direction, verified by the peer's mirror.
fn authenticate_postproc(ledger: &mut KeyLedger) -> Result<(), ProtocolError> {
    for payload in [&b"qber-sample"[..], &b"reconciliation"[..]] {
        let mut alice_mirror = ledger.alice_to_bob.nonces.clone();
        let tag = make_tag(
            &ledger.alice_to_bob.secret,
            &mut ledger.alice_to_bob.nonces,
            &mut ledger.alice_to_bob.budget,
            payload,
        )?;
        let nonce = alice_mirror.next_nonce()?;
        debug_assert!(verify_tag(
            &ledger.alice_to_bob.secret,
            nonce,
            payload,
            tag.value
        ));

        let mut bob_mirror = ledger.bob_to_alice.nonces.clone();
        let tag = make_tag(
            &ledger.bob_to_alice.secret,
            &mut ledger.bob_to_alice.nonces,
            &mut ledger.bob_to_alice.budget,
            payload,
        )?;
        let nonce = bob_mirror.next_nonce()?;
        debug_assert!(verify_tag(
            &ledger.bob_to_alice.secret,
            nonce,
            payload,
            tag.value
        ));
    }
    Ok(())
}

/// Run the configured scenario end to end. Budget and key shortfalls come
/// back as report statuses, never as errors.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<MetricsReport, ScenarioError> {
    let variant = cfg.variant()?;
    let seed = cfg.seed();
    let mut streams = RoundStreams::derive(seed);
    let mut eve = cfg
        .eve_strategy()?
        .map(|s| Eve::new(s).expect("strategy validated at parse time"));

    let mut report = MetricsReport {
        status: "ok".into(),
        variant: variant.label(),
        seed,
        n_pulses: cfg.scenario.n_pulses as u64,
        threshold_compliant: cfg.scenario.n_pulses >= cfg.scenario.raw_bit_threshold,
        ..Default::default()
    };
    report.eve_strategy = eve.as_ref().map(|e| e.strategy.label());
    report.classical_bits_per_qubit = variant.classical_bits_per_qubit();
    report.classical_rate_bits_per_s = variant
        .classical_bits_per_qubit()
        .map(|bits| bits * cfg.channel.clock_hz);

    let mut ledger = if variant.is_authenticated() {
        Some(build_ledger(cfg)?)
    } else {
        None
    };

    let outcome: RoundOutcome = if let Some(ledger) = ledger.as_mut() {
        match run_ledger_round(
            ledger,
            &round_config(cfg),
            &variant,
            eve.as_mut(),
            &mut streams,
        ) {
            Ok(outcome) => outcome,
            Err(ProtocolError::MustRekey(_)) => {
                report.status = "must_rekey".into();
                report.tags_consumed_alice = Some(ledger.alice_to_bob.budget.consumed());
                report.tags_consumed_bob = Some(ledger.bob_to_alice.budget.consumed());
                report.budget_limit = Some(ledger.alice_to_bob.budget.limit());
                return Ok(report);
            }
            Err(e) => return Err(ScenarioError::Internal(e.to_string())),
        }
    } else {
        bb84aes::protocol::run_round(
            &round_config(cfg),
            &variant,
            None,
            None,
            eve.as_mut(),
            &mut streams,
        )
        .map_err(|e| ScenarioError::Internal(e.to_string()))?
    };

    let result = &outcome.result;
    report.n_pulses = result.n_pulses as u64;
    report.clicks = result.clicks as u64;
    report.efficiency = result.efficiency;
    report.qber_omniscient = result.qber_omniscient;
    report.detection_event_count = result.detection_events.len() as u64;
    report.detection_latency_groups = result.detection_events.first().map(|e| e.group as u64 + 1);
    report.detection_latency_ticks = result.detection_events.first().map(|e| e.tick);
    report.detection_events = result.detection_events.clone();
    report.raw_key_bits = result.raw_key_len as u64;
    report.ticks_elapsed = result.ticks_elapsed;
    report.table_bytes = result.table_payload_bytes;
    if variant.is_authenticated() {
        report.max_comparisons = Some(result.max_comparisons as u64);
    }
    if result.aborted {
        report.status = "aborted".into();
    }
    if let Some(eve_report) = &outcome.eve {
        report.eve_agreement = eve_report.agreement;
        report.eve_guessed_bits = Some(eve_report.guessed as u64);
        report.eve_stored_photons = Some(eve_report.stored_photons as u64);
        report.eve_blocked_pulses = Some(eve_report.blocked_pulses as u64);
    }

    // Post-processing: disclose a sample, reconcile, amplify.
    let (alice_raw, bob_raw) = result.raw_keys();
    report.security_margin_bits = 2 * cfg.postproc.epsilon_exponent as u64;
    let final_key = if alice_raw.is_empty() {
        Vec::new()
    } else {
        let mut sample_rng = stream(seed, "sampling");
        let est = estimate_qber(
            &alice_raw,
            &bob_raw,
            cfg.postproc.sample_fraction,
            &mut sample_rng,
        )
        .map_err(|e| ScenarioError::Internal(e.to_string()))?;
        report.qber_estimate = Some(est.q_hat);
        report.disclosed_bits = est.disclosed_indices.len() as u64;
        let alice_rest = remove_disclosed(&alice_raw, &est.disclosed_indices);
        let bob_rest = remove_disclosed(&bob_raw, &est.disclosed_indices);
        if alice_rest.is_empty() {
            Vec::new()
        } else {
            let (shared, leakage) = reconcile(&alice_rest, &bob_rest, est.q_hat, cfg.postproc.f)
                .map_err(|e| ScenarioError::Internal(e.to_string()))?;
            report.leakage_bits = leakage;
            let amplify_seed = stream(seed, "amplify").random::<u64>();
            privacy_amplify(
                &shared,
                leakage,
                cfg.postproc.epsilon_exponent,
                amplify_seed,
            )
        }
    };
    report.final_key_bits = final_key.len() as u64;

    // Authenticated classical summaries, budget accounting, and the rekey
    // that closes the loop.
    if let Some(ledger) = ledger.as_mut() {
        if authenticate_postproc(ledger).is_err() {
            report.status = "must_rekey".into();
        }
        report.tags_consumed_alice = Some(ledger.alice_to_bob.budget.consumed());
        report.tags_consumed_bob = Some(ledger.bob_to_alice.budget.consumed());
        report.budget_limit = Some(ledger.alice_to_bob.budget.limit());
        report.rounds_per_secret = match ledger.alice_to_bob.budget.consumed() {
            0 => None,
            consumed => Some(ledger.alice_to_bob.budget.limit() as f64 / consumed as f64),
        };
        if report.status == "ok" {
            let iv_mask = if cfg.crypto.l_v == 64 {
                u64::MAX
            } else {
                (1u64 << cfg.crypto.l_v) - 1
            };
            let iv_next = stream(seed, "iv-next").random::<u64>() & iv_mask;
            match rekey(ledger, &final_key, iv_next) {
                Ok(consumer) => report.consumer_key_bits = Some(consumer.len() as u64),
                Err(_) => {
                    report.status = "insufficient_key".into();
                    report.consumer_key_bits = Some(0);
                }
            }
        }
    } else {
        report.consumer_key_bits = Some(final_key.len() as u64);
    }

    Ok(report)
}
