//! Ordered event log of a protocol round.
//!
//! Every externally visible action gets a simulated tick, an actor, an event
//! kind, and a short digest of its payload. The line format is frozen so
//! transcripts can serve as golden files.

use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Actor {
    Alice,
    Bob,
}

impl Actor {
    pub fn label(self) -> &'static str {
        match self {
            Actor::Alice => "alice",
            Actor::Bob => "bob",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    TagSent,
    PulseSent,
    ResponseSent,
    BasesAnnounced,
    MacExchanged,
    Detection,
}

impl EventKind {
    pub fn label(self) -> &'static str {
        match self {
            EventKind::TagSent => "tag_sent",
            EventKind::PulseSent => "pulse_sent",
            EventKind::ResponseSent => "response_sent",
            EventKind::BasesAnnounced => "bases_announced",
            EventKind::MacExchanged => "mac_exchanged",
            EventKind::Detection => "detection",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Event {
    pub tick: u64,
    pub actor: Actor,
    pub kind: EventKind,
    pub payload_digest: String,
}

#[derive(Debug, Clone, Default)]
pub struct Transcript {
    pub events: Vec<Event>,
}

impl Transcript {
    pub fn new() -> Self {
        Transcript { events: Vec::new() }
    }

    pub fn push(&mut self, tick: u64, actor: Actor, kind: EventKind, payload: &[u8]) {
        self.events.push(Event {
            tick,
            actor,
            kind,
            payload_digest: digest_hex(payload),
        });
    }

    /// Line-delimited export with stable field order:
    /// `tick=<n> actor=<a> kind=<k> payload=<hex16>`.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&format!(
                "tick={} actor={} kind={} payload={}\n",
                e.tick,
                e.actor.label(),
                e.kind.label(),
                e.payload_digest
            ));
        }
        out
    }
}

fn digest_hex(payload: &[u8]) -> String {
    let digest = Sha256::digest(payload);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}
