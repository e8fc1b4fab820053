//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (visible with `cargo test -p bb84aes-sim --test acceptance -- --nocapture`).
//!
//! Every tolerance is pinned in code next to the quantity it gates.

use bb84aes::adversary::{dos_scenario, dos_scenario_canonical};
use bb84aes::channel::Basis;
use bb84aes::crypto::{
    block_encrypt, ctr_encrypt, make_tag, split_secret, universal_hash, verify_tag, Direction,
    NonceGenerator, TagBudget, TagLength,
};
use bb84aes::postproc::KeyLedger;
use bb84aes::protocol::{
    constant_time_gate, lookup, AliceSession, BobSession, ProtocolVariant, Resolution,
};
use bb84aes_sim::batches::run_table1;
use bb84aes_sim::sweep::sweep_xi;
use bb84aes_sim::{build_ledger, run_scenario, ScenarioConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn criterion(number: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {number:02} {name}: {verdict} [{detail}]");
    assert!(pass, "criterion {number} ({name}) failed: {detail}");
}

fn cfg_with(overrides: &[&str]) -> ScenarioConfig {
    let owned: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    ScenarioConfig::from_text("", &owned).unwrap()
}

#[test]
fn criterion_01_outcome_table_reproduction() {
    let started = std::time::Instant::now();
    let rows = run_table1(100_000, 42).unwrap();
    let elapsed = started.elapsed();
    let mut worst: f64 = 0.0;
    for row in &rows {
        worst = worst.max((row.error_rate - row.expected_rate).abs());
    }
    let pass = rows.len() == 8 && worst < 0.01 && elapsed.as_secs() < 60;
    criterion(
        1,
        "blind-tag-flip outcome table",
        pass,
        &format!(
            "8 cells at 1e5 pulses each, max |measured - expected| = {worst:.4}, runtime {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_02_efficiency() {
    // Authenticated variants sift nothing: efficiency exactly 1.0 over at
    // least 1e5 clicks. The plain baseline pays the 50% sifting cost.
    let basic = run_scenario(&cfg_with(&[
        "scenario.n_pulses=300000",
        "channel.qber=0.0",
        "rng.seed=101",
    ]))
    .unwrap();
    let dense = run_scenario(&cfg_with(&[
        "scenario.variant=dense",
        "scenario.xi=8",
        "scenario.n_pulses=300000",
        "channel.qber=0.0",
        "rng.seed=102",
    ]))
    .unwrap();
    let plain = run_scenario(&cfg_with(&[
        "scenario.variant=plain-bb84",
        "scenario.n_pulses=300000",
        "channel.qber=0.0",
        "rng.seed=103",
    ]))
    .unwrap();
    let pass = basic.efficiency == 1.0
        && basic.clicks >= 100_000
        && dense.efficiency == 1.0
        && dense.clicks >= 100_000
        && (plain.efficiency - 0.50).abs() < 0.01;
    criterion(
        2,
        "sifting-free efficiency",
        pass,
        &format!(
            "basic {} over {} clicks, dense(xi=8) {} over {} clicks, plain {:.4}",
            basic.efficiency, basic.clicks, dense.efficiency, dense.clicks, plain.efficiency
        ),
    );
}

#[test]
fn criterion_03_pns_differential() {
    // Photon-number splitting with memory: total success against plaintext
    // sifting, a 0.75 coin-flip bound against confidential tags.
    let plain = run_scenario(&cfg_with(&[
        "scenario.variant=plain-bb84",
        "scenario.n_pulses=200000",
        "channel.qber=0.0",
        "eve.strategy=pns-memory",
        "rng.seed=104",
    ]))
    .unwrap();
    let aes = run_scenario(&cfg_with(&[
        "scenario.n_pulses=300000",
        "channel.qber=0.0",
        "eve.strategy=pns-memory",
        "rng.seed=105",
    ]))
    .unwrap();
    let aes_agreement = aes.eve_agreement.unwrap();
    let pass = plain.eve_agreement == Some(1.0)
        && aes.eve_stored_photons.unwrap() >= 10_000
        && (aes_agreement - 0.75).abs() < 0.01;
    criterion(
        3,
        "photon-splitting differential",
        pass,
        &format!(
            "plain agreement {:?}, authenticated agreement {aes_agreement:.4} over {} stored photons",
            plain.eve_agreement,
            aes.eve_stored_photons.unwrap()
        ),
    );
}

#[test]
fn criterion_04_memoryless_pns_differential() {
    // Memoryless splitting against biased bases: perfect final-key agreement
    // with zero induced key-basis errors and no flags. The same strategy
    // against the authenticated variant caps near the 0.75 coin flip; it
    // stays flag-free there only because no plaintext sifting ever happens.
    let biased = run_scenario(&cfg_with(&[
        "scenario.variant=biased-bb84",
        "scenario.key_basis=x",
        "scenario.bias=0.9",
        "scenario.n_pulses=300000",
        "channel.qber=0.0",
        "eve.strategy=pns-no-memory",
        "eve.key_basis=x",
        "rng.seed=106",
    ]))
    .unwrap();
    let aes = run_scenario(&cfg_with(&[
        "scenario.n_pulses=300000",
        "channel.qber=0.0",
        "eve.strategy=pns-no-memory",
        "eve.key_basis=x",
        "rng.seed=107",
    ]))
    .unwrap();
    let aes_agreement = aes.eve_agreement.unwrap();
    let pass = biased.eve_agreement == Some(1.0)
        && biased.qber_omniscient == 0.0
        && biased.detection_event_count == 0
        && (0.74..=0.76).contains(&aes_agreement)
        && aes.detection_event_count == 0;
    criterion(
        4,
        "memoryless splitting differential",
        pass,
        &format!(
            "biased: agreement {:?}, key-basis QBER {}, flags {}; authenticated: agreement {aes_agreement:.4}, flags {}",
            biased.eve_agreement,
            biased.qber_omniscient,
            biased.detection_event_count,
            aes.detection_event_count
        ),
    );
}

#[test]
fn criterion_05_dos_detection_latency() {
    // Fake-user probe: flagged at the first response group in every one of
    // 1e4 trials, against a canonical baseline that detects nothing until
    // the round's end-of-transcript MAC.
    let cfg = cfg_with(&["rng.seed=108"]);
    let mut ledger = build_ledger(&cfg).unwrap();
    let response_secret = ledger.bob_to_alice.secret.clone();
    let mut rng = ChaCha20Rng::seed_from_u64(108);
    let trials = 10_000u64;
    let probe = dos_scenario(
        &ProtocolVariant::basic(),
        &mut ledger.alice_to_bob,
        &response_secret,
        trials,
        &mut rng,
    );
    let canonical = dos_scenario_canonical(100_000);
    let pass = probe.detected == trials
        && probe.max_latency_groups == 1
        && canonical.detection_tick >= 100_000;
    criterion(
        5,
        "denial-of-service detection latency",
        pass,
        &format!(
            "authenticated: {}/{} probes flagged at group {}, canonical detection tick {}",
            probe.detected, trials, probe.max_latency_groups, canonical.detection_tick
        ),
    );
}

#[test]
fn criterion_06_resource_figures() {
    // Closed-form sweep produces the documented footprints, the wide table
    // doubles the narrow one, and live rounds never exceed the xi + 1
    // comparison ceiling that the sweep quotes.
    let narrow = sweep_xi(2, 12, &[64], 1.153e9).unwrap();
    let bytes = |xi: u8| narrow.iter().find(|r| r.xi == xi).unwrap().table_bytes;
    let footprints_ok = bytes(2) == 32 && bytes(3) == 64 && bytes(8) == 2048 && bytes(12) == 32768;
    let wide = sweep_xi(2, 12, &[128], 1.153e9).unwrap();
    let doubling_ok = narrow
        .iter()
        .zip(&wide)
        .all(|(n, w)| w.table_bytes == 2 * n.table_bytes);

    let mut rounds_ok = true;
    let mut detail_rounds = String::new();
    for xi in [4u8, 8] {
        let report = run_scenario(&cfg_with(&[
            "scenario.variant=dense",
            &format!("scenario.xi={xi}"),
            &format!("scenario.n_pulses={}", (1usize << xi) * xi as usize * 8),
            "rng.seed=109",
        ]))
        .unwrap();
        let bound = xi as u64 + 1;
        let measured = report.max_comparisons.unwrap();
        rounds_ok &= measured <= bound && report.table_bytes == Some((1u64 << xi) * 8);
        detail_rounds.push_str(&format!(" xi={xi}: {measured}<={bound};"));
    }
    let pass = footprints_ok && doubling_ok && rounds_ok;
    criterion(
        6,
        "lookup resource figures",
        pass,
        &format!(
            "bytes(2,3,8,12)=({},{},{},{}), 128-bit doubling {doubling_ok}, round ceilings:{detail_rounds}",
            bytes(2),
            bytes(3),
            bytes(8),
            bytes(12)
        ),
    );
}

#[test]
fn criterion_07_classical_rate_identity() {
    // 128 classical bits per qubit at a 5 MHz pulse clock: 640 Mbit/s.
    let report = run_scenario(&cfg_with(&[
        "scenario.n_pulses=20000",
        "channel.clock_hz=5e6",
        "rng.seed=110",
    ]))
    .unwrap();
    let rate = report.classical_rate_bits_per_s.unwrap();
    let pass = rate == 640e6 && report.to_json().contains("6.40000e8");
    criterion(
        7,
        "classical rate identity",
        pass,
        &format!("reported {rate} bit/s for basic(tag=128) at 5 MHz"),
    );
}

#[test]
fn criterion_08_budget_arithmetic() {
    // Rounds per initial secret at 1e5 raw bits per round, to two
    // significant figures: 1.8e14 for 128-bit tags, 4.3e4 for 64-bit.
    let wide = run_scenario(&cfg_with(&[
        "scenario.n_pulses=100000",
        "channel.qber=0.0",
        "rng.seed=111",
    ]))
    .unwrap();
    let narrow = run_scenario(&cfg_with(&[
        "scenario.variant=reduced-bandwidth",
        "scenario.n_pulses=100000",
        "channel.qber=0.0",
        "rng.seed=112",
    ]))
    .unwrap();
    let wide_2sig = wide.rounds_per_secret_2sig().unwrap();
    let narrow_2sig = narrow.rounds_per_secret_2sig().unwrap();
    let pass = wide_2sig == "1.8e14" && narrow_2sig == "4.3e4";
    criterion(
        8,
        "tag-budget arithmetic",
        pass,
        &format!("128-bit mode {wide_2sig} rounds/secret, 64-bit mode {narrow_2sig}"),
    );
}

#[test]
fn criterion_09_crypto_identities() {
    let mut rng = ChaCha20Rng::seed_from_u64(113);

    // AES-256 known answer, FIPS-197 Appendix C.3.
    let mut key = [0u8; 32];
    for (i, b) in key.iter_mut().enumerate() {
        *b = i as u8;
    }
    let mut block = [0u8; 16];
    for (i, b) in block.iter_mut().enumerate() {
        *b = (i as u8) * 0x11;
    }
    let expected_ct: [u8; 16] = [
        0x8e, 0xa2, 0xb7, 0xca, 0x51, 0x67, 0x45, 0xbf, 0xea, 0xfc, 0x49, 0x90, 0x4b, 0x49, 0x60,
        0x89,
    ];
    let kat_ok = block_encrypt(&key, block) == expected_ct;

    // Tag/CTR duality over 1e4 random cases.
    let secret = loop {
        let mut raw = vec![0u8; 40];
        rng.fill(&mut raw[..]);
        if let Ok(s) = split_secret(&raw, TagLength::Bits64, Direction::AliceToBob) {
            break s;
        }
    };
    let mut gen_tag = NonceGenerator::new(4, 32);
    let mut gen_ctr = gen_tag.clone();
    let mut budget = TagBudget::new(TagLength::Bits64);
    let mut duality_ok = true;
    for _ in 0..10_000 {
        let len = rng.random_range(1..=24);
        let msg: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        let tag = make_tag(&secret, &mut gen_tag, &mut budget, &msg).unwrap();
        let digest = secret.digest(&msg).to_be_bytes();
        let ct = ctr_encrypt(&secret, &mut gen_ctr, &digest[8..]).unwrap();
        duality_ok &= ct == tag.to_be_bytes();
    }

    // Polynomial hash against an independent schoolbook oracle, 1e3 random
    // messages.
    let mut hash_ok = true;
    for _ in 0..1_000 {
        let len = rng.random_range(1..=40);
        let msg: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        let got = universal_hash(secret.k_h(), &msg, TagLength::Bits64).unwrap();
        hash_ok &= got == oracle::digest(secret.k_h(), &msg);
    }

    // Forged-tag acceptance: zero in a million.
    let nonce = (9u128 << 96) | 1;
    let msg = [0x01u8];
    let genuine = secret.digest(&msg) ^ secret.keystream(nonce);
    let mut accepts = 0u32;
    for _ in 0..1_000_000 {
        let forged = rng.random::<u128>() & TagLength::Bits64.mask();
        if forged != genuine && verify_tag(&secret, nonce, &msg, forged) {
            accepts += 1;
        }
    }
    let pass = kat_ok && duality_ok && hash_ok && accepts == 0;
    criterion(
        9,
        "crypto identities",
        pass,
        &format!(
            "FIPS-197 KAT {kat_ok}, duality(1e4) {duality_ok}, hash-vs-oracle(1e3) {hash_ok}, forged accepts {accepts}/1e6"
        ),
    );
}

/// Independent digest oracle: same padding rule, but the field multiply is a
/// widening schoolbook carry-less product reduced by long division.
mod oracle {
    const WIDTH: u32 = 64;
    const POLY: u128 = 0x1b;

    fn clmul(a: u128, b: u128) -> (u128, u128) {
        let mut hi = 0u128;
        let mut lo = 0u128;
        for i in 0..128 {
            if (b >> i) & 1 == 1 {
                lo ^= a << i;
                if i > 0 {
                    hi ^= a >> (128 - i);
                }
            }
        }
        (hi, lo)
    }

    fn gf_mul(a: u128, b: u128) -> u128 {
        let (mut hi, mut lo) = clmul(a, b);
        for bit in (WIDTH..=254).rev() {
            let set = if bit >= 128 {
                (hi >> (bit - 128)) & 1 == 1
            } else {
                (lo >> bit) & 1 == 1
            };
            if set {
                let shift = bit - WIDTH;
                if bit >= 128 {
                    hi ^= 1 << (bit - 128);
                } else {
                    lo ^= 1 << bit;
                }
                if shift < 128 {
                    lo ^= POLY << shift;
                    if shift > 0 {
                        hi ^= POLY >> (128 - shift);
                    }
                } else {
                    hi ^= POLY << (shift - 128);
                }
            }
        }
        lo & ((1u128 << WIDTH) - 1)
    }

    pub fn digest(key: u128, message: &[u8]) -> u128 {
        let block = (WIDTH / 8) as usize;
        let mut padded = message.to_vec();
        padded.push(0x80);
        while !padded.len().is_multiple_of(block) {
            padded.push(0x00);
        }
        let mut acc = 0u128;
        for chunk in padded.chunks_exact(block) {
            let mut m = 0u128;
            for &b in chunk {
                m = (m << 8) | b as u128;
            }
            acc = gf_mul(acc ^ m, key);
        }
        acc
    }
}

#[test]
fn criterion_10_timing_gate_invariance() {
    // Dense mode releases qubits at tag tick + (xi + 1) regardless of which
    // of the 2^xi basis strings was announced: exact equality, no tolerance.
    let xi = 10u8;
    let mut rng = ChaCha20Rng::seed_from_u64(114);
    let mut ledger = loop {
        let a: Vec<u8> = (0..40).map(|_| rng.random()).collect();
        let b: Vec<u8> = (0..40).map(|_| rng.random()).collect();
        if let Ok(l) = KeyLedger::new(&a, &b, TagLength::Bits64, 3, 64) {
            break l;
        }
    };
    let tables = ledger.dense_tables(xi).clone();
    let variant = ProtocolVariant::dense(xi);
    let announce_mirror = ledger.alice_to_bob.nonces.clone();
    let announce_secret = ledger.alice_to_bob.secret.clone();
    let mut alice = AliceSession::new(
        variant,
        &mut ledger.alice_to_bob,
        announce_secret.clone(),
        NonceGenerator::new(1, 64),
        None,
    );
    let mut bob = BobSession::new(
        variant,
        &mut ledger.bob_to_alice,
        announce_secret,
        announce_mirror,
        Some(&tables.bases),
    );
    let tag_tick = 12345u64;
    let mut release_ticks = std::collections::HashSet::new();
    let mut resolved_all = true;
    for pattern in 0..(1u32 << xi) {
        let bases = lookup::pattern_bases(pattern, xi);
        let choices: Vec<(Basis, bool)> = bases.iter().map(|&b| (b, false)).collect();
        let ann = alice.announce_with(&choices, 0.5, &mut rng).unwrap();
        resolved_all &= matches!(
            bob.resolve_bases(ann.tag.value).unwrap(),
            Resolution::Known(_)
        );
        release_ticks.insert(constant_time_gate(&variant, tag_tick));
    }
    let pass = release_ticks.len() == 1
        && release_ticks.contains(&(tag_tick + xi as u64 + 1))
        && resolved_all;
    criterion(
        10,
        "timing-gate invariance",
        pass,
        &format!(
            "2^{xi} basis strings, {} distinct release ticks (gate = xi + 1 ticks)",
            release_ticks.len()
        ),
    );
}

#[test]
fn full_round_single_seed_smoke() {
    // End-to-end: one authenticated round at the finite-key threshold closes
    // the loop through rekey with key left over for the consumer.
    let report = run_scenario(&cfg_with(&["scenario.n_pulses=100000", "rng.seed=115"])).unwrap();
    assert_eq!(report.status, "ok");
    assert!(report.threshold_compliant);
    assert!(report.consumer_key_bits.unwrap() > 0);
    // Ledger identity: raw = final + disclosed + leakage + margin.
    assert_eq!(
        report.raw_key_bits,
        report.final_key_bits
            + report.disclosed_bits
            + report.leakage_bits
            + report.security_margin_bits
    );
}
