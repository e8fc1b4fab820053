//! Photon-number-resolved pulse model: weak-coherent emission, lossy
//! transmission, and basis-dependent threshold detection.
//!
//! Physics is deliberately lumped: the source is Poissonian in photon
//! number, loss is per-photon binomial thinning, and all detector
//! imperfections collapse into a single bit-flip probability `q` applied on
//! matched-basis clicks. That is exactly the level at which photon-number
//! splitting is meaningful and nothing finer.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChannelError {
    #[error("cannot split {requested} photons out of a {available}-photon pulse")]
    InsufficientPhotons { available: u32, requested: u32 },
}

/// Preparation/measurement basis. Exactly two values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    X,
    Z,
}

impl Basis {
    pub fn other(self) -> Basis {
        match self {
            Basis::X => Basis::Z,
            Basis::Z => Basis::X,
        }
    }

    /// Frozen one-byte wire encoding used inside hashed messages.
    pub fn encoded_byte(self) -> u8 {
        match self {
            Basis::X => 0x00,
            Basis::Z => 0x01,
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Basis {
        if rng.random::<bool>() {
            Basis::X
        } else {
            Basis::Z
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Basis::X => "X",
            Basis::Z => "Z",
        }
    }
}

/// One light pulse: every photon in it carries the same (basis, bit).
/// `photon_count == 0` is vacuum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pulse {
    pub photon_count: u32,
    pub basis: Basis,
    pub bit: bool,
}

impl Pulse {
    pub fn vacuum(basis: Basis, bit: bool) -> Pulse {
        Pulse {
            photon_count: 0,
            basis,
            bit,
        }
    }
}

/// Channel parameters for a run.
#[derive(Debug, Clone, Copy)]
pub struct ChannelConfig {
    /// Mean photon number per pulse at the source.
    pub mean_photon_number: f64,
    /// End-to-end attenuation in dB.
    pub attenuation_db: f64,
    /// Quantum bit error rate on matched-basis detections, in [0, 0.5].
    pub qber: f64,
    /// Pulse clock, used only for rate reporting.
    pub clock_hz: f64,
}

impl ChannelConfig {
    pub fn transmittance(&self) -> f64 {
        10f64.powf(-self.attenuation_db / 10.0)
    }
}

/// Threshold-detector outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionOutcome {
    NoClick,
    Click(bool),
}

impl DetectionOutcome {
    pub fn bit(self) -> Option<bool> {
        match self {
            DetectionOutcome::NoClick => None,
            DetectionOutcome::Click(b) => Some(b),
        }
    }

    pub fn clicked(self) -> bool {
        matches!(self, DetectionOutcome::Click(_))
    }
}

/// Emit one weak-coherent pulse: photon count ~ Poisson(mu).
pub fn emit_pulse<R: Rng + ?Sized>(mu: f64, basis: Basis, bit: bool, rng: &mut R) -> Pulse {
    debug_assert!(mu > 0.0, "source intensity must be positive");
    let photons = Poisson::new(mu)
        .expect("valid mean photon number")
        .sample(rng);
    Pulse {
        photon_count: photons as u32,
        basis,
        bit,
    }
}

/// Pass a pulse through loss: each photon survives independently with
/// probability `transmittance`.
pub fn transmit<R: Rng + ?Sized>(pulse: Pulse, transmittance: f64, rng: &mut R) -> Pulse {
    debug_assert!(transmittance > 0.0 && transmittance <= 1.0);
    if pulse.photon_count == 0 || transmittance >= 1.0 {
        return pulse;
    }
    let survivors = Binomial::new(pulse.photon_count as u64, transmittance)
        .expect("valid thinning probability")
        .sample(rng);
    Pulse {
        photon_count: survivors as u32,
        ..pulse
    }
}

/// Measure a pulse in `basis_choice`.
///
/// Vacuum never clicks. A matched-basis click reads the encoded bit, flipped
/// with probability `q`; a mismatched-basis click is uniform. Multi-photon
/// pulses behave like single photons here (threshold detector).
pub fn measure<R: Rng + ?Sized>(
    pulse: &Pulse,
    basis_choice: Basis,
    q: f64,
    rng: &mut R,
) -> DetectionOutcome {
    debug_assert!((0.0..=0.5).contains(&q));
    if pulse.photon_count == 0 {
        return DetectionOutcome::NoClick;
    }
    if basis_choice == pulse.basis {
        let flip = q > 0.0 && rng.random::<f64>() < q;
        DetectionOutcome::Click(pulse.bit ^ flip)
    } else {
        DetectionOutcome::Click(rng.random::<bool>())
    }
}

/// Split `keep` photons out of a pulse, preserving (basis, bit) on both
/// halves. Photon number is conserved: keep + forwarded = original.
pub fn photon_number_split(pulse: Pulse, keep: u32) -> Result<(Pulse, Pulse), ChannelError> {
    if keep > pulse.photon_count {
        return Err(ChannelError::InsufficientPhotons {
            available: pulse.photon_count,
            requested: keep,
        });
    }
    let kept = Pulse {
        photon_count: keep,
        ..pulse
    };
    let forwarded = Pulse {
        photon_count: pulse.photon_count - keep,
        ..pulse
    };
    Ok((kept, forwarded))
}
