//! Canned experiment batches: the blind-tag-flip outcome table and the
//! attack comparison suite.

use crate::config::ScenarioConfig;
use crate::metrics::fmt_sig;
use crate::scenario::{build_ledger, ScenarioError};
use bb84aes::adversary::{dos_scenario, dos_scenario_canonical, DoSReport, Eve, EveStrategy};
use bb84aes::channel::Basis;
use bb84aes::postproc::run_ledger_round;
use bb84aes::protocol::{ProtocolVariant, RoundConfig, RoundOutcome};
use bb84aes::rng::{stream, RoundStreams};

#[derive(Debug, Clone)]
pub struct Table1Row {
    pub alice_basis: Basis,
    pub eve_basis: Basis,
    pub flip: bool,
    pub pulses: usize,
    pub clicks: usize,
    pub errors: usize,
    pub error_rate: f64,
    pub expected_rate: f64,
}

pub const TABLE1_CSV_HEADER: &str =
    "alice_basis,eve_basis,forwarding_choice,bob_basis,pulses,clicks,errors,error_rate_fraction,expected_rate_fraction";

/// Bit-flip error rates for every (Alice basis, Eve basis, tag choice) cell
/// with a reduced-processing receiver: four seeded runs, each split into its
/// two Alice-basis rows.
pub fn run_table1(pulses_per_cell: usize, seed: u64) -> Result<Vec<Table1Row>, ScenarioError> {
    let mut rows = Vec::with_capacity(8);
    for (run_index, (eve_basis, flip)) in [
        (Basis::X, false),
        (Basis::X, true),
        (Basis::Z, false),
        (Basis::Z, true),
    ]
    .into_iter()
    .enumerate()
    {
        let mut cfg = ScenarioConfig::default();
        cfg.scenario.variant = "reduced-processing".into();
        cfg.scenario.n_pulses = 2 * pulses_per_cell;
        cfg.channel.qber = 0.0;
        cfg.rng.seed = seed.wrapping_add(run_index as u64);
        let mut ledger = build_ledger(&cfg)?;
        let mut eve = Eve::new(EveStrategy::BlindTagFlip {
            measure_basis: eve_basis,
            flip,
        })
        .expect("valid strategy");
        let mut streams = RoundStreams::derive(cfg.rng.seed);
        let round_cfg = RoundConfig {
            n_pulses: cfg.scenario.n_pulses,
            mu: cfg.channel.mu,
            transmittance: 1.0,
            qber: 0.0,
            abort_on_detect: false,
        };
        let out = run_ledger_round(
            &mut ledger,
            &round_cfg,
            &ProtocolVariant::reduced_processing(),
            Some(&mut eve),
            &mut streams,
        )
        .map_err(|e| ScenarioError::Internal(e.to_string()))?;
        for alice_basis in [Basis::X, Basis::Z] {
            let mut pulses = 0usize;
            let mut clicks = 0usize;
            let mut errors = 0usize;
            for rec in &out.result.pulses {
                if rec.alice_basis != alice_basis {
                    continue;
                }
                pulses += 1;
                if let Some(bob_bit) = rec.outcome.bit() {
                    clicks += 1;
                    if bob_bit != rec.alice_bit {
                        errors += 1;
                    }
                }
            }
            let expected_rate = match (alice_basis, eve_basis, flip) {
                (Basis::X, Basis::X, false) | (Basis::Z, Basis::Z, _) => 0.0,
                _ => 0.5,
            };
            rows.push(Table1Row {
                alice_basis,
                eve_basis,
                flip,
                pulses,
                clicks,
                errors,
                error_rate: errors as f64 / clicks as f64,
                expected_rate,
            });
        }
    }
    Ok(rows)
}

/// Bob's deterministic basis under reduced processing for a given cell.
fn bob_basis_for(alice: Basis, flip: bool) -> Basis {
    if flip {
        // A substituted tag never matches the X candidate.
        Basis::Z
    } else {
        alice
    }
}

pub fn table1_to_csv(rows: &[Table1Row]) -> String {
    let mut out = String::from(TABLE1_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let choice = if r.flip { "tagE!=tagA" } else { "tagE=tagA" };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.alice_basis.label(),
            r.eve_basis.label(),
            choice,
            bob_basis_for(r.alice_basis, r.flip).label(),
            r.pulses,
            r.clicks,
            r.errors,
            fmt_sig(r.error_rate),
            fmt_sig(r.expected_rate)
        ));
    }
    out
}

pub fn table1_to_json(rows: &[Table1Row]) -> String {
    let body: Vec<String> = rows
        .iter()
        .map(|r| {
            let choice = if r.flip { "tagE!=tagA" } else { "tagE=tagA" };
            format!(
                "  {{\"alice_basis\": \"{}\", \"eve_basis\": \"{}\", \"forwarding_choice\": \"{}\", \"pulses\": {}, \"clicks\": {}, \"errors\": {}, \"error_rate\": {}, \"expected_rate\": {}}}",
                r.alice_basis.label(),
                r.eve_basis.label(),
                choice,
                r.pulses,
                r.clicks,
                r.errors,
                fmt_sig(r.error_rate),
                fmt_sig(r.expected_rate)
            )
        })
        .collect();
    format!("[\n{}\n]\n", body.join(",\n"))
}

/// One attack/defender comparison row.
#[derive(Debug, Clone, Default)]
pub struct AttackRow {
    pub attack: String,
    pub defender: String,
    pub pulses: u64,
    pub clicks: u64,
    pub eve_agreement: Option<f64>,
    pub eve_guessed: Option<u64>,
    pub eve_stored: Option<u64>,
    pub eve_blocked: Option<u64>,
    pub induced_qber: Option<f64>,
    pub detection_events: u64,
    pub detection_latency_groups: Option<u64>,
    pub detection_tick: Option<u64>,
    pub tags_per_probe: Option<u64>,
    pub probes_to_exhaustion: Option<u128>,
}

pub const ATTACKS_CSV_HEADER: &str = "attack,defender,pulses,clicks,eve_agreement_fraction,eve_guessed_bits,eve_stored_photons,eve_blocked_pulses,induced_qber_fraction,detection_events,detection_latency_groups,detection_tick_ticks,tags_per_probe_tags,probes_to_exhaustion_probes";

fn row_from_round(attack: &str, defender: &str, out: &RoundOutcome) -> AttackRow {
    let eve = out.eve.as_ref();
    AttackRow {
        attack: attack.into(),
        defender: defender.into(),
        pulses: out.result.n_pulses as u64,
        clicks: out.result.clicks as u64,
        eve_agreement: eve.and_then(|e| e.agreement),
        eve_guessed: eve.map(|e| e.guessed as u64),
        eve_stored: eve.map(|e| e.stored_photons as u64),
        eve_blocked: eve.map(|e| e.blocked_pulses as u64),
        induced_qber: Some(out.result.qber_omniscient),
        detection_events: out.result.detection_events.len() as u64,
        detection_latency_groups: out
            .result
            .detection_events
            .first()
            .map(|e| e.group as u64 + 1),
        detection_tick: out.result.detection_events.first().map(|e| e.tick),
        ..Default::default()
    }
}

fn row_from_dos(attack: &str, report: &DoSReport) -> AttackRow {
    AttackRow {
        attack: attack.into(),
        defender: report.defender.clone(),
        detection_events: report.detected,
        detection_latency_groups: Some(report.max_latency_groups),
        detection_tick: Some(report.detection_tick),
        tags_per_probe: Some(report.tags_consumed_per_probe),
        probes_to_exhaustion: report.probes_to_exhaustion,
        ..Default::default()
    }
}

/// Run the full attack comparison batch.
pub fn run_attacks(seed: u64) -> Result<Vec<AttackRow>, ScenarioError> {
    let mut rows = Vec::new();
    let aes_round = |variant: &ProtocolVariant,
                     strategy: EveStrategy,
                     n: usize,
                     mu: f64,
                     label: u64|
     -> Result<RoundOutcome, ScenarioError> {
        let mut cfg = ScenarioConfig::default();
        cfg.rng.seed = seed.wrapping_add(label);
        cfg.scenario.tag_bits = variant.tag_length().map(|t| t.bits());
        let mut ledger = build_ledger(&cfg)?;
        let mut eve = Eve::new(strategy).expect("valid strategy");
        let mut streams = RoundStreams::derive(cfg.rng.seed);
        let round_cfg = RoundConfig {
            n_pulses: n,
            mu,
            transmittance: 1.0,
            qber: 0.0,
            abort_on_detect: false,
        };
        run_ledger_round(
            &mut ledger,
            &round_cfg,
            variant,
            Some(&mut eve),
            &mut streams,
        )
        .map_err(|e| ScenarioError::Internal(e.to_string()))
    };
    let baseline_cfg = |n: usize| RoundConfig {
        n_pulses: n,
        mu: 0.5,
        transmittance: 1.0,
        qber: 0.0,
        abort_on_detect: false,
    };

    // Attack 1: fake user stalls the link. The authenticated defender flags
    // the first response group; the canonical baseline waits out the round.
    {
        let cfg = ScenarioConfig::default();
        let mut ledger = build_ledger(&cfg)?;
        let response_secret = ledger.bob_to_alice.secret.clone();
        let mut rng = stream(seed, "attacks:dos");
        let report = dos_scenario(
            &ProtocolVariant::basic(),
            &mut ledger.alice_to_bob,
            &response_secret,
            10_000,
            &mut rng,
        );
        rows.push(row_from_dos("1-dos-probe", &report));
        rows.push(row_from_dos(
            "1-dos-probe",
            &dos_scenario_canonical(100_000),
        ));
    }

    // Attack 2: budget exhaustion at a desk-scale test budget of 2^8 tags.
    {
        let mut cfg = ScenarioConfig::default();
        cfg.crypto.budget_limit = Some(1 << 8);
        cfg.scenario.tag_bits = Some(64);
        let mut ledger = build_ledger(&cfg)?;
        let response_secret = ledger.bob_to_alice.secret.clone();
        let mut rng = stream(seed, "attacks:exhaustion");
        let report = dos_scenario(
            &ProtocolVariant::reduced_bandwidth(),
            &mut ledger.alice_to_bob,
            &response_secret,
            10_000,
            &mut rng,
        );
        rows.push(row_from_dos("2-key-exhaustion", &report));
    }

    // Attack 3: photon-number splitting with quantum memory.
    {
        let mut eve = Eve::new(EveStrategy::PnsWithMemory).expect("valid");
        let mut streams = RoundStreams::derive(seed.wrapping_add(3));
        let out = bb84aes::protocol::plain_bb84_round(
            &baseline_cfg(200_000),
            Some(&mut eve),
            &mut streams,
        );
        rows.push(row_from_round("3-pns-memory", "plain-bb84", &out));
        let out = aes_round(
            &ProtocolVariant::basic(),
            EveStrategy::PnsWithMemory,
            300_000,
            0.5,
            30,
        )?;
        rows.push(row_from_round("3-pns-memory", "bb84-aes-basic", &out));
    }

    // Attack 4: intercept-resend against the plaintext baseline.
    {
        let mut eve = Eve::new(EveStrategy::InterceptResend).expect("valid");
        let mut streams = RoundStreams::derive(seed.wrapping_add(4));
        let out = bb84aes::protocol::plain_bb84_round(
            &baseline_cfg(200_000),
            Some(&mut eve),
            &mut streams,
        );
        rows.push(row_from_round("4-intercept-resend", "plain-bb84", &out));
    }

    // Attack 5: three-plus-photon splitting resolved by state discrimination.
    {
        let out = aes_round(
            &ProtocolVariant::basic(),
            EveStrategy::PnsThreePlus { p_usd: 0.25 },
            300_000,
            1.5,
            50,
        )?;
        rows.push(row_from_round("5-pns-three-plus", "bb84-aes-basic", &out));
    }

    // Attack 6: memoryless splitting, built for biased-basis targets.
    {
        let mut eve = Eve::new(EveStrategy::PnsNoMemory {
            key_basis: Basis::X,
        })
        .expect("valid");
        let mut streams = RoundStreams::derive(seed.wrapping_add(6));
        let out = bb84aes::protocol::biased_bb84_round(
            &baseline_cfg(300_000),
            Basis::X,
            0.9,
            Some(&mut eve),
            &mut streams,
        );
        rows.push(row_from_round("6-pns-no-memory", "biased-bb84(0.9)", &out));
        let out = aes_round(
            &ProtocolVariant::basic(),
            EveStrategy::PnsNoMemory {
                key_basis: Basis::X,
            },
            300_000,
            0.5,
            60,
        )?;
        rows.push(row_from_round("6-pns-no-memory", "bb84-aes-basic", &out));
    }

    Ok(rows)
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

fn opt_sig(v: &Option<f64>) -> String {
    v.map(fmt_sig).unwrap_or_default()
}

pub fn attacks_to_csv(rows: &[AttackRow]) -> String {
    let mut out = String::from(ATTACKS_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.attack,
            r.defender,
            r.pulses,
            r.clicks,
            opt_sig(&r.eve_agreement),
            opt(&r.eve_guessed),
            opt(&r.eve_stored),
            opt(&r.eve_blocked),
            opt_sig(&r.induced_qber),
            r.detection_events,
            opt(&r.detection_latency_groups),
            opt(&r.detection_tick),
            opt(&r.tags_per_probe),
            opt(&r.probes_to_exhaustion),
        ));
    }
    out
}

pub fn attacks_to_json(rows: &[AttackRow]) -> String {
    fn json_opt<T: ToString>(v: &Option<T>) -> String {
        v.as_ref()
            .map(|x| x.to_string())
            .unwrap_or_else(|| "null".into())
    }
    fn json_opt_sig(v: &Option<f64>) -> String {
        v.map(fmt_sig).unwrap_or_else(|| "null".into())
    }
    let body: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "  {{\"attack\": \"{}\", \"defender\": \"{}\", \"pulses\": {}, \"clicks\": {}, \"eve_agreement\": {}, \"eve_guessed\": {}, \"eve_stored\": {}, \"eve_blocked\": {}, \"induced_qber\": {}, \"detection_events\": {}, \"detection_latency_groups\": {}, \"detection_tick\": {}, \"tags_per_probe\": {}, \"probes_to_exhaustion\": {}}}",
                r.attack,
                r.defender,
                r.pulses,
                r.clicks,
                json_opt_sig(&r.eve_agreement),
                json_opt(&r.eve_guessed),
                json_opt(&r.eve_stored),
                json_opt(&r.eve_blocked),
                json_opt_sig(&r.induced_qber),
                r.detection_events,
                json_opt(&r.detection_latency_groups),
                json_opt(&r.detection_tick),
                json_opt(&r.tags_per_probe),
                json_opt(&r.probes_to_exhaustion),
            )
        })
        .collect();
    format!("[\n{}\n]\n", body.join(",\n"))
}
