//! `key = value` board configuration.
//!
//! Every key is optional; missing keys keep their compiled-in default. Numbers
//! are parsed exactly (`25M`, `2.2G`, `1.25`). Rail keys take the form
//! `rail.<id>.<field>` for ids 0..=4.

use crate::freq::{Constraints, DENOMINATOR_CAP};
use crate::power::{plan_voltage, RailModel, RAIL_COUNT};
use crate::rational::{int, parse_exact, Rational};
use num_traits::{Signed, ToPrimitive};
use thiserror::Error;

pub const DEFAULT_CONFIG: &str = include_str!("../data/default.conf");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key {key}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for {key}: {message}")]
    BadValue { line: usize, key: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoardConfig {
    pub f_in: Rational,
    pub synth_address: u8,
    /// Main-loop steps between latching an SMBus transfer and its completion.
    pub smb_latency_steps: u32,
    pub constraints: Constraints,
    pub rails: Vec<RailModel>,
}

impl Default for BoardConfig {
    fn default() -> Self {
        BoardConfig {
            f_in: int(25_000_000),
            synth_address: 0x70,
            smb_latency_steps: 3,
            constraints: Constraints::default(),
            rails: RailModel::defaults(),
        }
    }
}

impl BoardConfig {
    pub fn rail(&self, rail_id: u8) -> Option<&RailModel> {
        self.rails.iter().find(|r| r.rail_id == rail_id)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let c = &self.constraints;
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !(1..=5).contains(&self.smb_latency_steps) {
            return bad("smb_latency_steps must be within 1..=5");
        }
        if self.synth_address > 0x7F {
            return bad("synth_address must be a 7-bit address");
        }
        if c.vco_min > c.vco_max || c.f_out_min > c.f_out_max || c.f_in_min > c.f_in_max {
            return bad("range minimum above maximum");
        }
        if c.feedback.min > c.feedback.max || c.output.min > c.output.max {
            return bad("divider minimum above maximum");
        }
        if c.feedback.min < 4 || c.output.min < 4 || c.feedback.max > 2048 || c.output.max > 2048 {
            return bad("divider integer range must lie within [4, 2048]");
        }
        if c.denominator_max == 0 || c.denominator_max > DENOMINATOR_CAP {
            return bad("denominator_max must be within 1..=2^30-1");
        }
        if !c.f_in_min.is_positive() || !c.f_out_min.is_positive() || !c.vco_min.is_positive() {
            return bad("frequencies must be positive");
        }
        for r in &self.rails {
            if !(r.v_ref.is_positive()
                && r.r_fixed.is_positive()
                && r.r_ab.is_positive()
                && r.r_wiper.is_positive())
            {
                return Err(ConfigError::Invalid(format!("rail {}: values must be positive", r.rail_id)));
            }
            if r.pot_channel > 3 || r.pot_i2c_address > 0x7F {
                return Err(ConfigError::Invalid(format!("rail {}: bad pot binding", r.rail_id)));
            }
            plan_voltage(r, &r.boot_volts)
                .map_err(|e| ConfigError::Invalid(format!("rail {} boot voltage: {e}", r.rail_id)))?;
        }
        for (i, a) in self.rails.iter().enumerate() {
            for b in &self.rails[i + 1..] {
                if (a.pot_i2c_address, a.pot_channel) == (b.pot_i2c_address, b.pot_channel) {
                    return Err(ConfigError::Invalid(format!(
                        "rails {} and {} share pot channel",
                        a.rail_id, b.rail_id
                    )));
                }
            }
        }
        Ok(())
    }
}

impl std::str::FromStr for BoardConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        parse_config(text)
    }
}

pub fn parse_config(text: &str) -> Result<BoardConfig, ConfigError> {
    let mut cfg = BoardConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t = raw.split('#').next().unwrap_or("").trim();
        if t.is_empty() {
            continue;
        }
        let (key, value) = t
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line, message: "expected `key = value`".into() })?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |message: String| ConfigError::BadValue { line, key: key.to_string(), message };
        let exact = || parse_exact(value).map_err(|e| bad(e.to_string()));
        let uint = || -> Result<u32, ConfigError> {
            parse_number(value).and_then(|v| u32::try_from(v).ok()).ok_or_else(|| bad("expected an unsigned integer".into()))
        };
        let byte = || -> Result<u8, ConfigError> {
            parse_number(value).and_then(|v| u8::try_from(v).ok()).ok_or_else(|| bad("expected a byte".into()))
        };
        let c = &mut cfg.constraints;
        match key {
            "f_in_hz" => cfg.f_in = exact()?,
            "synth_address" => cfg.synth_address = byte()?,
            "smb_latency_steps" => cfg.smb_latency_steps = uint()?,
            "f_in_min_hz" => c.f_in_min = exact()?,
            "f_in_max_hz" => c.f_in_max = exact()?,
            "f_out_min_hz" => c.f_out_min = exact()?,
            "f_out_max_hz" => c.f_out_max = exact()?,
            "vco_min_hz" => c.vco_min = exact()?,
            "vco_max_hz" => c.vco_max = exact()?,
            "feedback_min" => c.feedback.min = uint()?,
            "feedback_max" => c.feedback.max = uint()?,
            "output_min" => c.output.min = uint()?,
            "output_max" => c.output.max = uint()?,
            "denominator_max" => c.denominator_max = uint()?,
            "phase_steps_max" => {
                c.phase_steps_max = byte()?;
                if c.phase_steps_max > 127 {
                    return Err(bad("phase steps are signed 8-bit".into()));
                }
            }
            _ => {
                let rail_key = key.strip_prefix("rail.").and_then(|r| r.split_once('.'));
                let Some((id, field)) = rail_key else {
                    return Err(ConfigError::UnknownKey { line, key: key.to_string() });
                };
                let id: usize = id
                    .parse()
                    .ok()
                    .filter(|&i| i < RAIL_COUNT)
                    .ok_or_else(|| ConfigError::UnknownKey { line, key: key.to_string() })?;
                let rail = &mut cfg.rails[id];
                match field {
                    "v_ref" => rail.v_ref = exact()?,
                    "r_fixed" => rail.r_fixed = exact()?,
                    "r_ab" => rail.r_ab = exact()?,
                    "r_wiper" => rail.r_wiper = exact()?,
                    "pot_address" => rail.pot_i2c_address = byte()?,
                    "pot_channel" => rail.pot_channel = byte()?,
                    "boot_volts" => rail.boot_volts = exact()?,
                    _ => return Err(ConfigError::UnknownKey { line, key: key.to_string() }),
                }
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Accepts decimal or `0x`-prefixed hex.
fn parse_number(s: &str) -> Option<u64> {
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(h) => u64::from_str_radix(h, 16).ok(),
        None => parse_exact(s).ok().filter(|r| r.is_integer()).and_then(|r| r.to_integer().to_u64()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    #[test]
    fn shipped_config_equals_compiled_defaults() {
        assert_eq!(parse_config(DEFAULT_CONFIG).unwrap(), BoardConfig::default());
    }

    #[test]
    fn empty_config_is_default() {
        assert_eq!(parse_config("# nothing\n\n").unwrap(), BoardConfig::default());
    }

    #[test]
    fn overrides() {
        let cfg = parse_config("f_in_hz = 27M\nsynth_address = 0x71\nrail.2.boot_volts = 3.0\nvco_max_hz=2.9G\n")
            .unwrap();
        assert_eq!(cfg.f_in, int(27_000_000));
        assert_eq!(cfg.synth_address, 0x71);
        assert_eq!(cfg.rails[2].boot_volts, int(3));
        assert_eq!(cfg.constraints.vco_max, int(2_900_000_000));
        assert_eq!(cfg.rails[0].v_ref, ratio(5, 4));
    }

    #[test]
    fn errors() {
        assert!(matches!(parse_config("nonsense"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(parse_config("\nfoo = 1"), Err(ConfigError::UnknownKey { line: 2, .. })));
        assert!(matches!(parse_config("rail.5.v_ref = 1"), Err(ConfigError::UnknownKey { .. })));
        assert!(matches!(parse_config("feedback_min = x"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(parse_config("smb_latency_steps = 6"), Err(ConfigError::Invalid(_))));
        assert!(matches!(parse_config("rail.0.boot_volts = 0.5"), Err(ConfigError::Invalid(_))));
        assert!(matches!(parse_config("rail.1.pot_channel = 0"), Err(ConfigError::Invalid(_))));
    }
}
