//! Device layer: frequency, phase, enable and rail operations on top of the
//! register bridge.
//!
//! Every operation reaches the board only through [`Bridge`] reads and
//! writes. Handles remember the plan last applied to each channel; at init the
//! plans already in the synthesizer's registers are read back, so separate
//! processes driving the same board see consistent state.

use crate::bridge::{Bridge, BridgeError};
use crate::config::{parse_config, BoardConfig, ConfigError};
use crate::freq::{
    apply_plan, decode_divider, plan_frequency, plan_phase, plan_with_feedback, ApplyError, FrequencyPlan,
    PhasePlan, PhaseRequest, PlanError, CHANNELS,
};
use crate::power::{apply_supply, plan_voltage, PowerError, SupplySetting};
use crate::rational::Rational;
use crate::regmap::{parse_board_map, BoardMap, MapError};
use crate::synth::{bind_rails, evaluate_outputs, evaluate_rails, ChannelStatus, RailBinding, RailStatus, SynthLayout};
use crate::transport::{Session, SessionConfig, TransportError};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HostError {
    #[error(transparent)]
    Bridge(#[from] BridgeError),
    #[error("register map: {0}")]
    Map(#[from] MapError),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Power(#[from] PowerError),
    #[error("channel {0} has no frequency plan")]
    NoPlan(u8),
    #[error("no such channel {0}")]
    InvalidChannel(u8),
    #[error("no such rail {0}")]
    UnknownRail(u8),
}

impl From<TransportError> for HostError {
    fn from(e: TransportError) -> Self {
        HostError::Bridge(BridgeError::Transport(e))
    }
}

impl From<ApplyError> for HostError {
    fn from(e: ApplyError) -> Self {
        match e {
            ApplyError::Plan(p) => HostError::Plan(p),
            ApplyError::Bridge(b) => HostError::Bridge(b),
        }
    }
}

/// Everything needed to open a handle.
#[derive(Debug, Clone)]
pub struct HostConfig {
    pub session: SessionConfig,
    pub board_map: BoardMap,
    pub board: BoardConfig,
}

impl HostConfig {
    /// Shipped register map and configuration.
    pub fn new(session: SessionConfig) -> Self {
        HostConfig { session, board_map: crate::default_board_map(), board: BoardConfig::default() }
    }

    /// Loads the map and config from files, falling back to the shipped ones.
    pub fn load(session: SessionConfig, map: Option<&Path>, config: Option<&Path>) -> Result<Self, HostError> {
        let (board_map, board) = load_board(map, config)?;
        Ok(HostConfig { session, board_map, board })
    }
}

/// Reads a register map and board config, each defaulting to the shipped one.
pub fn load_board(map: Option<&Path>, config: Option<&Path>) -> Result<(BoardMap, BoardConfig), HostError> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|source| HostError::Io { path: p.into(), source });
    let board_map = match map {
        Some(p) => parse_board_map(&read(p)?)?,
        None => crate::default_board_map(),
    };
    let board = match config {
        Some(p) => parse_config(&read(p)?)?,
        None => BoardConfig::default(),
    };
    Ok((board_map, board))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceStatus {
    pub outputs: Vec<ChannelStatus>,
    pub rails: Vec<RailStatus>,
}

#[derive(Debug)]
pub struct DeviceHandle {
    bridge: Bridge,
    board_map: BoardMap,
    config: BoardConfig,
    layout: SynthLayout,
    rails: Vec<RailBinding>,
    plans: Vec<Option<FrequencyPlan>>,
}

/// Validates the map against the config, opens the session and reads back
/// the current channel plans.
pub fn bridge_init(config: HostConfig) -> Result<DeviceHandle, HostError> {
    let HostConfig { session, board_map, board } = config;
    // Map problems surface before any connection is made.
    let layout = SynthLayout::from_map(board.synth_address, board_map.require_device(board.synth_address)?)?;
    let rails = bind_rails(&board_map, &board.rails)?;
    let session = Session::open(&session)?;
    DeviceHandle::with_parts(session, board_map, board, layout, rails)
}

impl DeviceHandle {
    /// Builds a handle on an already-open session.
    pub fn attach(session: Session, board_map: BoardMap, config: BoardConfig) -> Result<Self, HostError> {
        let layout = SynthLayout::from_map(config.synth_address, board_map.require_device(config.synth_address)?)?;
        let rails = bind_rails(&board_map, &config.rails)?;
        DeviceHandle::with_parts(session, board_map, config, layout, rails)
    }

    fn with_parts(
        session: Session,
        board_map: BoardMap,
        config: BoardConfig,
        layout: SynthLayout,
        rails: Vec<RailBinding>,
    ) -> Result<Self, HostError> {
        let mut handle = DeviceHandle {
            bridge: Bridge::new(session),
            board_map,
            config,
            layout,
            rails,
            plans: vec![None; CHANNELS as usize],
        };
        handle.plans = handle.read_back_plans()?;
        Ok(handle)
    }

    fn read_synth(&mut self) -> Result<BTreeMap<u8, u8>, HostError> {
        let addr = self.layout.i2c_address;
        let mut regs = BTreeMap::new();
        for reg in self.layout.all_addresses() {
            regs.insert(reg, self.bridge.read(addr, reg)?);
        }
        Ok(regs)
    }

    fn read_back_plans(&mut self) -> Result<Vec<Option<FrequencyPlan>>, HostError> {
        let regs = self.read_synth()?;
        let read = |a: u8| regs.get(&a).copied().unwrap_or(0);
        let c = &self.config.constraints;
        let f_in = &self.config.f_in;
        let Ok(fb) = decode_divider(&self.layout.feedback.gather(read), &c.feedback) else {
            return Ok(vec![None; CHANNELS as usize]);
        };
        if !c.vco_in_window(&(f_in * fb.value())) {
            return Ok(vec![None; CHANNELS as usize]);
        }
        Ok(self
            .layout
            .channels
            .iter()
            .enumerate()
            .map(|(k, ch)| {
                decode_divider(&ch.divider.gather(read), &c.output)
                    .ok()
                    .map(|out| FrequencyPlan::from_dividers(k as u8, f_in, fb, out))
            })
            .collect())
    }

    pub fn config(&self) -> &BoardConfig {
        &self.config
    }

    pub fn board_map(&self) -> &BoardMap {
        &self.board_map
    }

    pub fn layout(&self) -> &SynthLayout {
        &self.layout
    }

    pub fn plan(&self, channel: u8) -> Option<&FrequencyPlan> {
        self.plans.get(channel as usize).and_then(Option::as_ref)
    }

    pub fn session(&self) -> &Session {
        self.bridge.session()
    }

    pub fn close(mut self) {
        self.bridge.close();
    }

    pub fn bridge_read(&mut self, i2c_address: u8, register: u8) -> Result<u8, HostError> {
        Ok(self.bridge.read(i2c_address, register)?)
    }

    pub fn bridge_write(&mut self, i2c_address: u8, register: u8, value: u8) -> Result<(), HostError> {
        Ok(self.bridge.write(i2c_address, register, value)?)
    }

    fn check_channel(&self, channel: u8) -> Result<(), HostError> {
        if channel >= CHANNELS {
            return Err(HostError::InvalidChannel(channel));
        }
        Ok(())
    }

    /// Plans and programs a channel, resets its phase to zero and enables it.
    ///
    /// While another channel holds a plan the VCO stays where it is, so only
    /// this channel's output changes.
    pub fn set_frequency(&mut self, channel: u8, f_target: &Rational) -> Result<FrequencyPlan, HostError> {
        self.check_channel(channel)?;
        let c = &self.config.constraints;
        let f_in = &self.config.f_in;
        let locked = self
            .plans
            .iter()
            .flatten()
            .find(|p| p.channel != channel)
            .map(|p| p.feedback);
        let plan = match locked {
            Some(fb) => plan_with_feedback(c, f_in, fb, f_target, channel)?,
            None => plan_frequency(c, f_in, f_target, channel)?,
        };
        apply_plan(&mut self.bridge, &self.layout, &plan, &PhasePlan::zero(&plan))?;
        self.write_enable(channel, true)?;
        self.plans[channel as usize] = Some(plan.clone());
        Ok(plan)
    }

    pub fn set_phase(&mut self, channel: u8, request: &PhaseRequest) -> Result<PhasePlan, HostError> {
        self.check_channel(channel)?;
        let plan = self.plan(channel).ok_or(HostError::NoPlan(channel))?;
        let phase = plan_phase(&self.config.constraints, plan, request)?;
        let patches = self.layout.channels[channel as usize].phase.scatter(phase.steps as i8 as u8 as u64);
        self.bridge.apply_patches(self.layout.i2c_address, &patches)?;
        Ok(phase)
    }

    /// Writes the channel's enable field and nothing else.
    pub fn enable_output(&mut self, channel: u8, on: bool) -> Result<(), HostError> {
        self.check_channel(channel)?;
        self.write_enable(channel, on)
    }

    fn write_enable(&mut self, channel: u8, on: bool) -> Result<(), HostError> {
        let patches = self.layout.channels[channel as usize].enable.scatter(u64::from(on));
        Ok(self.bridge.apply_patches(self.layout.i2c_address, &patches)?)
    }

    /// Plans before touching the bus; an infeasible target writes nothing.
    pub fn set_rail_voltage(&mut self, rail_id: u8, v_target: &Rational) -> Result<SupplySetting, HostError> {
        let binding = self
            .rails
            .iter()
            .find(|r| r.model.rail_id == rail_id)
            .ok_or(HostError::UnknownRail(rail_id))?;
        let setting = plan_voltage(&binding.model, v_target)?;
        apply_supply(&mut self.bridge, binding, &setting)?;
        Ok(setting)
    }

    /// Reads the synthesizer and wiper registers back and decodes them.
    pub fn status(&mut self) -> Result<DeviceStatus, HostError> {
        let regs = self.read_synth()?;
        let outputs = evaluate_outputs(&self.layout, &self.config.constraints, &self.config.f_in, |a| {
            regs.get(&a).copied().unwrap_or(0)
        });
        let mut wipers = BTreeMap::new();
        for r in &self.rails {
            for reg in r.wiper.addresses() {
                let dev = r.model.pot_i2c_address;
                wipers.insert((dev, reg), self.bridge.read(dev, reg)?);
            }
        }
        let rails = evaluate_rails(&self.rails, |dev, reg| wipers.get(&(dev, reg)).copied().unwrap_or(0));
        Ok(DeviceStatus { outputs, rails })
    }
}
