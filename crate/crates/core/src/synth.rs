//! Behavioral model of the synthesizer and the rail potentiometers.
//!
//! Both the simulator and the host's read-back status go through
//! [`evaluate_outputs`] and [`evaluate_rails`], so what a host sees over the
//! wire and what the simulator reports come from one decoding path.

use crate::freq::{decode_divider, Constraints, DividerRange, DividerRegisters, CHANNELS, P1_BITS, P2_BITS, P3_BITS};
use crate::power::RailModel;
use crate::rational::{int, Rational};
use crate::regmap::{BoardMap, Composite, MapError, RegisterMap, RegisterPatch};
use std::collections::BTreeSet;

/// P1/P2/P3 field group of one divider.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DividerFields {
    pub p1: Composite,
    pub p2: Composite,
    pub p3: Composite,
}

impl DividerFields {
    fn from_map(map: &RegisterMap, group: &str) -> Result<Self, MapError> {
        Ok(DividerFields {
            p1: map.require(&format!("{group}.p1"), P1_BITS)?,
            p2: map.require(&format!("{group}.p2"), P2_BITS)?,
            p3: map.require(&format!("{group}.p3"), P3_BITS)?,
        })
    }

    pub fn scatter(&self, regs: &DividerRegisters) -> Vec<RegisterPatch> {
        let mut out = self.p1.scatter(regs.p1 as u64);
        out.extend(self.p2.scatter(regs.p2 as u64));
        out.extend(self.p3.scatter(regs.p3 as u64));
        out
    }

    pub fn gather(&self, mut read: impl FnMut(u8) -> u8) -> DividerRegisters {
        DividerRegisters {
            p1: self.p1.gather(&mut read) as u32,
            p2: self.p2.gather(&mut read) as u32,
            p3: self.p3.gather(&mut read) as u32,
        }
    }

    fn addresses(&self) -> BTreeSet<u8> {
        self.p1.addresses().chain(self.p2.addresses()).chain(self.p3.addresses()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelFields {
    pub divider: DividerFields,
    /// Signed phase steps, two's complement.
    pub phase: Composite,
    pub enable: Composite,
    pub power_down: Composite,
}

/// Named-field placement of the synthesizer, resolved from its register map.
///
/// Field names: `fb.p1/p2/p3` for the feedback divider and, for each channel
/// k, `msK.p1/p2/p3`, `msK.phase` (8 bits), `msK.enable` and `msK.pdn` (1 bit).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthLayout {
    pub i2c_address: u8,
    pub feedback: DividerFields,
    pub channels: Vec<ChannelFields>,
}

impl SynthLayout {
    pub fn from_map(i2c_address: u8, map: &RegisterMap) -> Result<Self, MapError> {
        let feedback = DividerFields::from_map(map, "fb")?;
        let channels = (0..CHANNELS)
            .map(|k| {
                let g = format!("ms{k}");
                Ok(ChannelFields {
                    divider: DividerFields::from_map(map, &g)?,
                    phase: map.require(&format!("{g}.phase"), 8)?,
                    enable: map.require(&format!("{g}.enable"), 1)?,
                    power_down: map.require(&format!("{g}.pdn"), 1)?,
                })
            })
            .collect::<Result<Vec<_>, MapError>>()?;
        Ok(SynthLayout { i2c_address, feedback, channels })
    }

    pub fn channel(&self, k: u8) -> Option<&ChannelFields> {
        self.channels.get(k as usize)
    }

    pub fn feedback_addresses(&self) -> BTreeSet<u8> {
        self.feedback.addresses()
    }

    /// Every register holding one of channel `k`'s named fields.
    pub fn channel_addresses(&self, k: u8) -> BTreeSet<u8> {
        let Some(ch) = self.channel(k) else { return BTreeSet::new() };
        let mut s = ch.divider.addresses();
        s.extend(ch.phase.addresses());
        s.extend(ch.enable.addresses());
        s.extend(ch.power_down.addresses());
        s
    }

    /// Every register the model reads.
    pub fn all_addresses(&self) -> BTreeSet<u8> {
        let mut s = self.feedback_addresses();
        for k in 0..self.channels.len() as u8 {
            s.extend(self.channel_addresses(k));
        }
        s
    }
}

/// Wiper register of each rail's pot channel, resolved from the board map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RailBinding {
    pub model: RailModel,
    pub wiper: Composite,
}

pub fn bind_rails(board: &BoardMap, rails: &[RailModel]) -> Result<Vec<RailBinding>, MapError> {
    rails
        .iter()
        .map(|r| {
            let map = board.require_device(r.pot_i2c_address)?;
            let wiper = map.require(&format!("ch{}.wiper", r.pot_channel), 8)?;
            Ok(RailBinding { model: r.clone(), wiper })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigIssue {
    Feedback(String),
    VcoOutOfWindow(Rational),
    Output(String),
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigIssue::Feedback(m) => write!(f, "feedback divider: {m}"),
            ConfigIssue::VcoOutOfWindow(v) => write!(f, "VCO {v} Hz outside window"),
            ConfigIssue::Output(m) => write!(f, "output divider: {m}"),
        }
    }
}

/// Observable state of one output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelStatus {
    pub channel: u8,
    pub enabled: bool,
    /// Present only when the channel is enabled and its configuration valid.
    pub f_out: Option<Rational>,
    pub phase_steps: i8,
    /// `phase_steps / f_vco`; absent when the VCO cannot be determined.
    pub phase_offset: Option<Rational>,
    pub f_vco: Option<Rational>,
    pub issue: Option<ConfigIssue>,
}

impl ChannelStatus {
    pub fn is_invalid(&self) -> bool {
        self.issue.is_some()
    }
}

pub fn evaluate_outputs(
    layout: &SynthLayout,
    constraints: &Constraints,
    f_in: &Rational,
    mut read: impl FnMut(u8) -> u8,
) -> Vec<ChannelStatus> {
    let fb = decode_divider(&layout.feedback.gather(&mut read), &constraints.feedback);
    let vco: Result<Rational, ConfigIssue> = match fb {
        Err(e) => Err(ConfigIssue::Feedback(e.to_string())),
        Ok(d) => {
            let f_vco = f_in * d.value();
            if constraints.vco_in_window(&f_vco) {
                Ok(f_vco)
            } else {
                Err(ConfigIssue::VcoOutOfWindow(f_vco))
            }
        }
    };
    let output_range: DividerRange = constraints.output;
    layout
        .channels
        .iter()
        .enumerate()
        .map(|(k, ch)| {
            let enabled = ch.enable.gather(&mut read) == 1 && ch.power_down.gather(&mut read) == 0;
            let phase_steps = ch.phase.gather(&mut read) as u8 as i8;
            let out = decode_divider(&ch.divider.gather(&mut read), &output_range);
            let f_vco = vco.as_ref().ok().cloned();
            let phase_offset = f_vco.as_ref().map(|v| int(phase_steps as i64) / v);
            let result = match (&vco, out) {
                (Err(issue), _) => Err(issue.clone()),
                (Ok(_), Err(e)) => Err(ConfigIssue::Output(e.to_string())),
                (Ok(v), Ok(d)) => Ok(v / d.value()),
            };
            let (f_out, issue) = match result {
                Ok(f) => (enabled.then_some(f), None),
                Err(i) => (None, Some(i)),
            };
            ChannelStatus { channel: k as u8, enabled, f_out, phase_steps, phase_offset, f_vco, issue }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RailStatus {
    pub rail_id: u8,
    pub code: u8,
    pub volts: Rational,
}

pub fn evaluate_rails(
    rails: &[RailBinding],
    mut read: impl FnMut(u8, u8) -> u8,
) -> Vec<RailStatus> {
    rails
        .iter()
        .map(|r| {
            let code = r.wiper.gather(|a| read(r.model.pot_i2c_address, a)) as u8;
            RailStatus { rail_id: r.model.rail_id, code, volts: r.model.voltage(code) }
        })
        .collect()
}
