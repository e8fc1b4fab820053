//! Scenario configuration: sectioned key = value text (TOML) with every
//! field overridable from the command line.

use bb84aes::adversary::EveStrategy;
use bb84aes::channel::Basis;
use bb84aes::crypto::TagLength;
use bb84aes::protocol::ProtocolVariant;
use serde::Deserialize;
use thiserror::Error as ThisError;

#[derive(Debug, ThisError)]
pub enum Error {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config range error in `{field}`: {message}")]
    Range {
        field: &'static str,
        message: String,
    },
    #[error("config io error: {0}")]
    Io(#[from] std::io::Error),
}

fn default_variant() -> String {
    "basic".into()
}
fn default_n_pulses() -> usize {
    100_000
}
fn default_bias() -> f64 {
    0.9
}
fn default_key_basis() -> String {
    "x".into()
}
fn default_threshold() -> usize {
    100_000
}
fn default_mu() -> f64 {
    0.5
}
fn default_qber() -> f64 {
    0.02
}
fn default_clock() -> f64 {
    5e6
}
fn default_strategy() -> String {
    "passive".into()
}
fn default_eve_attenuation() -> f64 {
    10.0
}
fn default_repeat() -> u64 {
    100
}
fn default_p_usd() -> f64 {
    0.25
}
fn default_sample_fraction() -> f64 {
    0.1
}
fn default_f() -> f64 {
    1.2
}
fn default_epsilon() -> u32 {
    40
}
fn default_l_v() -> u8 {
    64
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub variant: String,
    pub n_pulses: usize,
    pub xi: Option<u8>,
    pub tag_bits: Option<u32>,
    pub abort_on_detect: bool,
    pub raw_bit_threshold: usize,
    pub key_basis: String,
    pub bias: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            variant: default_variant(),
            n_pulses: default_n_pulses(),
            xi: None,
            tag_bits: None,
            abort_on_detect: false,
            raw_bit_threshold: default_threshold(),
            key_basis: default_key_basis(),
            bias: default_bias(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    pub mu: f64,
    pub attenuation_db: f64,
    pub qber: f64,
    pub clock_hz: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection {
            mu: default_mu(),
            attenuation_db: 0.0,
            qber: default_qber(),
            clock_hz: default_clock(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EveSection {
    pub strategy: String,
    pub attenuation_db: f64,
    pub repeat: u64,
    pub p_usd: f64,
    pub key_basis: String,
    pub measure_basis: String,
    pub flip: bool,
}

impl Default for EveSection {
    fn default() -> Self {
        EveSection {
            strategy: default_strategy(),
            attenuation_db: default_eve_attenuation(),
            repeat: default_repeat(),
            p_usd: default_p_usd(),
            key_basis: default_key_basis(),
            measure_basis: default_key_basis(),
            flip: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PostProcSection {
    pub sample_fraction: f64,
    pub f: f64,
    pub epsilon_exponent: u32,
}

impl Default for PostProcSection {
    fn default() -> Self {
        PostProcSection {
            sample_fraction: default_sample_fraction(),
            f: default_f(),
            epsilon_exponent: default_epsilon(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CryptoSection {
    pub l_v: u8,
    pub counter_width: Option<u8>,
    pub budget_limit: Option<u64>,
}

impl Default for CryptoSection {
    fn default() -> Self {
        CryptoSection {
            l_v: default_l_v(),
            counter_width: None,
            budget_limit: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RngSection {
    pub seed: u64,
}

/// Fully parsed and range-checked scenario. The root seed determines every
/// random draw of the run.
#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    pub channel: ChannelSection,
    pub eve: EveSection,
    pub postproc: PostProcSection,
    pub crypto: CryptoSection,
    pub rng: RngSection,
}

fn parse_basis(s: &str, field: &'static str) -> Result<Basis, Error> {
    match s.to_ascii_lowercase().as_str() {
        "x" => Ok(Basis::X),
        "z" => Ok(Basis::Z),
        other => Err(Error::Range {
            field,
            message: format!("unknown basis `{other}` (expected x or z)"),
        }),
    }
}

impl ScenarioConfig {
    /// Parse sectioned key = value text, apply `key.path=value` overrides,
    /// and range-check everything.
    pub fn from_text(text: &str, overrides: &[String]) -> Result<Self, Error> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        for entry in overrides {
            apply_override(&mut table, entry)?;
        }
        let cfg: ScenarioConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path, overrides: &[String]) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text, overrides)
    }

    pub fn seed(&self) -> u64 {
        self.rng.seed
    }

    /// Effective tag length: explicit `tag_bits` wins, otherwise 64 for the
    /// bandwidth-reducing variants and 128 elsewhere.
    pub fn tag_length(&self) -> Result<TagLength, Error> {
        let default_bits = match self.scenario.variant.as_str() {
            "dense" | "reduced-bandwidth" => 64,
            _ => 128,
        };
        let bits = self.scenario.tag_bits.unwrap_or(default_bits);
        TagLength::from_bits(bits).ok_or(Error::Range {
            field: "scenario.tag_bits",
            message: format!("unsupported tag width {bits} (expected 16, 64 or 128)"),
        })
    }

    pub fn variant(&self) -> Result<ProtocolVariant, Error> {
        let tag = self.tag_length()?;
        let variant = match self.scenario.variant.as_str() {
            "basic" => ProtocolVariant::Basic { tag },
            "reduced-processing" => ProtocolVariant::ReducedProcessing { tag },
            "reduced-bandwidth" => ProtocolVariant::Basic { tag },
            "dense" => {
                let xi = self.scenario.xi.ok_or(Error::Range {
                    field: "scenario.xi",
                    message: "dense mode needs a group size".into(),
                })?;
                ProtocolVariant::Dense { xi, tag }
            }
            "plain-bb84" => ProtocolVariant::PlainBb84,
            "biased-bb84" => ProtocolVariant::BiasedBb84 {
                key_basis: parse_basis(&self.scenario.key_basis, "scenario.key_basis")?,
                bias: self.scenario.bias,
            },
            other => {
                return Err(Error::Range {
                    field: "scenario.variant",
                    message: format!("unknown variant `{other}`"),
                })
            }
        };
        variant.validate().map_err(|e| Error::Range {
            field: "scenario.variant",
            message: e.to_string(),
        })?;
        Ok(variant)
    }

    pub fn eve_strategy(&self) -> Result<Option<EveStrategy>, Error> {
        let strategy = match self.eve.strategy.as_str() {
            "passive" => return Ok(None),
            "dos-probe" => EveStrategy::DoSProbe {
                attenuation_db: self.eve.attenuation_db,
            },
            "key-exhaustion" => EveStrategy::KeyExhaustion {
                repeat: self.eve.repeat,
            },
            "pns-memory" => EveStrategy::PnsWithMemory,
            "intercept-resend" => EveStrategy::InterceptResend,
            "pns-three-plus" => EveStrategy::PnsThreePlus {
                p_usd: self.eve.p_usd,
            },
            "pns-no-memory" => EveStrategy::PnsNoMemory {
                key_basis: parse_basis(&self.eve.key_basis, "eve.key_basis")?,
            },
            "blind-tag-flip" => EveStrategy::BlindTagFlip {
                measure_basis: parse_basis(&self.eve.measure_basis, "eve.measure_basis")?,
                flip: self.eve.flip,
            },
            "dense-tag-guess" => EveStrategy::DenseTagGuess,
            other => {
                return Err(Error::Range {
                    field: "eve.strategy",
                    message: format!("unknown strategy `{other}`"),
                })
            }
        };
        strategy.validate().map_err(|e| Error::Range {
            field: "eve.strategy",
            message: e.to_string(),
        })?;
        Ok(Some(strategy))
    }

    fn validate(&self) -> Result<(), Error> {
        fn range(ok: bool, field: &'static str, message: impl Into<String>) -> Result<(), Error> {
            if ok {
                Ok(())
            } else {
                Err(Error::Range {
                    field,
                    message: message.into(),
                })
            }
        }
        range(
            self.scenario.n_pulses >= 1,
            "scenario.n_pulses",
            "need at least one pulse",
        )?;
        range(
            self.channel.mu > 0.0,
            "channel.mu",
            "mean photon number must be positive",
        )?;
        range(
            self.channel.attenuation_db >= 0.0,
            "channel.attenuation_db",
            "attenuation cannot be negative",
        )?;
        range(
            (0.0..=0.5).contains(&self.channel.qber),
            "channel.qber",
            "QBER must lie in [0, 0.5]",
        )?;
        range(
            self.channel.clock_hz > 0.0,
            "channel.clock_hz",
            "clock must be positive",
        )?;
        range(
            self.postproc.sample_fraction > 0.0 && self.postproc.sample_fraction <= 1.0,
            "postproc.sample_fraction",
            "sample fraction must lie in (0, 1]",
        )?;
        range(
            self.postproc.f >= 1.0,
            "postproc.f",
            "reconciliation inefficiency is at least 1",
        )?;
        range(
            (1..=64).contains(&self.crypto.l_v),
            "crypto.l_v",
            "IV width must lie in 1..=64",
        )?;
        if let Some(w) = self.crypto.counter_width {
            range(
                w >= 1 && w <= 128 - self.crypto.l_v,
                "crypto.counter_width",
                format!("counter width must lie in 1..={}", 128 - self.crypto.l_v),
            )?;
        }
        if self.scenario.variant == "dense" {
            range(
                self.scenario.xi.is_some_and(|xi| (2..=20).contains(&xi)),
                "scenario.xi",
                "dense group size must lie in 2..=20",
            )?;
        }
        // Variant and adversary constructors run their own checks.
        self.variant()?;
        self.eve_strategy()?;
        Ok(())
    }
}

/// Apply one `section.key=value` override onto the raw table.
fn apply_override(table: &mut toml::Table, entry: &str) -> Result<(), Error> {
    let (path, raw_value) = entry.split_once('=').ok_or_else(|| {
        Error::Parse(format!(
            "override `{entry}` is not of the form section.key=value"
        ))
    })?;
    let value = parse_scalar(raw_value.trim())?;
    let mut parts = path.trim().split('.').peekable();
    let mut current = table;
    loop {
        let part = parts
            .next()
            .ok_or_else(|| Error::Parse(format!("override `{entry}` has an empty key path")))?;
        if parts.peek().is_none() {
            current.insert(part.to_string(), value);
            return Ok(());
        }
        current = current
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Parse(format!("override `{entry}` crosses a non-table key")))?;
    }
}

/// Parse a bare override value with TOML scalar semantics.
fn parse_scalar(raw: &str) -> Result<toml::Value, Error> {
    let wrapped = format!("v = {raw}");
    if let Ok(t) = wrapped.parse::<toml::Table>() {
        return Ok(t["v"].clone());
    }
    // Fall back to treating it as a string.
    let quoted = format!("v = {raw:?}");
    let t = quoted
        .parse::<toml::Table>()
        .map_err(|e| Error::Parse(format!("cannot parse override value `{raw}`: {e}")))?;
    Ok(t["v"].clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_yields_documented_defaults() {
        let cfg = ScenarioConfig::from_text("", &[]).unwrap();
        assert_eq!(cfg.scenario.variant, "basic");
        assert_eq!(cfg.scenario.n_pulses, 100_000);
        assert_eq!(cfg.channel.mu, 0.5);
        assert_eq!(cfg.channel.qber, 0.02);
        assert_eq!(cfg.crypto.l_v, 64);
        assert_eq!(cfg.postproc.f, 1.2);
        assert_eq!(cfg.scenario.raw_bit_threshold, 100_000);
        assert_eq!(cfg.rng.seed, 0);
        assert_eq!(cfg.tag_length().unwrap(), TagLength::Bits128);
    }

    #[test]
    fn dense_with_xi_one_is_a_range_error() {
        let text = "[scenario]\nvariant = \"dense\"\nxi = 1\n";
        match ScenarioConfig::from_text(text, &[]) {
            Err(Error::Range { field, .. }) => assert_eq!(field, "scenario.xi"),
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "[scenario]\nvariannt = \"basic\"\n";
        assert!(matches!(
            ScenarioConfig::from_text(text, &[]),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn overrides_take_effect() {
        let cfg = ScenarioConfig::from_text("", &["channel.qber=0.1".into(), "rng.seed=7".into()])
            .unwrap();
        assert_eq!(cfg.channel.qber, 0.1);
        assert_eq!(cfg.rng.seed, 7);
    }

    #[test]
    fn override_out_of_range_still_fails_validation() {
        assert!(matches!(
            ScenarioConfig::from_text("", &["channel.qber=0.9".into()]),
            Err(Error::Range { .. })
        ));
    }

    #[test]
    fn string_overrides_parse_without_quotes() {
        let cfg = ScenarioConfig::from_text(
            "",
            &["scenario.variant=dense".into(), "scenario.xi=8".into()],
        )
        .unwrap();
        assert_eq!(cfg.scenario.variant, "dense");
        assert_eq!(cfg.tag_length().unwrap(), TagLength::Bits64);
        assert!(matches!(
            cfg.variant().unwrap(),
            ProtocolVariant::Dense { xi: 8, .. }
        ));
    }
}
