//! Behavioral simulator of the evaluation board.
//!
//! The MCU firmware is modeled as two contexts sharing flag variables:
//!
//! * the USB interrupt ([`Board::ingest_byte`]) frames incoming bytes into
//!   4-byte commands and, for each valid one, records it and raises
//!   `flag_write` or `flag_read`;
//! * the main loop ([`Board::step`]) notices a raised flag, loads the SMBus
//!   data register and latches a start condition. The SMBus interrupt then
//!   completes the transfer a configured number of steps later (at most five),
//!   a read result is queued for the host, and the flag is cleared.
//!
//! While a flag is raised the interrupt leaves further bytes in the USB FIFO;
//! they are framed as soon as the flag clears, so nothing is dropped.
//! Frames with an invalid opcode or address are discarded silently. Transfers
//! to an address with no device are ignored; reads from one answer 0xFF.

use crate::config::BoardConfig;
use crate::power::plan_voltage;
use crate::rational::Rational;
use crate::regmap::{BoardMap, MapError, RegisterFile};
use crate::synth::{bind_rails, evaluate_outputs, evaluate_rails, ChannelStatus, RailBinding, RailStatus, SynthLayout};
use crate::wire::{decode_command, Action, BridgeCommand, COMMAND_LEN};
use std::collections::{BTreeMap, VecDeque};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use thiserror::Error;

/// Read value for an address nobody acknowledges.
pub const ABSENT_DEVICE_VALUE: u8 = 0xFF;
/// Upper bound on steps taken by [`Board::run_until_idle`].
const IDLE_STEP_LIMIT: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("rail {rail} boot voltage: {message}")]
    BootVoltage { rail: u8, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FirmwarePhase {
    Startup,
    PowerInit,
    MainLoop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Smb {
    Idle,
    /// A transfer is latched; `remaining` main-loop steps until completion.
    Busy { sla: u8, remaining: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FirmwareState {
    pub phase: FirmwarePhase,
    pub flag_write: bool,
    pub flag_read: bool,
    pub pending: Option<BridgeCommand>,
    pub step_counter: u64,
    rx_buffer: Vec<u8>,
    usb_fifo: VecDeque<u8>,
    tx_queue: VecDeque<u8>,
    smb: Smb,
    flag_set_at: u64,
    power_init_next: usize,
}

impl FirmwareState {
    fn new() -> Self {
        FirmwareState {
            phase: FirmwarePhase::Startup,
            flag_write: false,
            flag_read: false,
            pending: None,
            step_counter: 0,
            rx_buffer: Vec::with_capacity(COMMAND_LEN),
            usb_fifo: VecDeque::new(),
            tx_queue: VecDeque::new(),
            smb: Smb::Idle,
            flag_set_at: 0,
            power_init_next: 0,
        }
    }

    pub fn rx_buffered(&self) -> usize {
        self.rx_buffer.len()
    }

    pub fn fifo_len(&self) -> usize {
        self.usb_fifo.len()
    }

    pub fn tx_len(&self) -> usize {
        self.tx_queue.len()
    }

    fn flag_raised(&self) -> bool {
        self.flag_write || self.flag_read
    }
}

/// One completed bridge transfer, for conformance checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DispatchRecord {
    pub command: BridgeCommand,
    pub flag_set_at: u64,
    pub dispatched_at: u64,
}

impl DispatchRecord {
    pub fn latency(&self) -> u64 {
        self.dispatched_at - self.flag_set_at
    }
}

#[derive(Debug, Clone)]
pub struct Board {
    devices: BTreeMap<u8, RegisterFile>,
    config: BoardConfig,
    layout: SynthLayout,
    rails: Vec<RailBinding>,
    boot_codes: Vec<(u8, u8)>,
    firmware: FirmwareState,
    dispatch_log: Vec<DispatchRecord>,
}

impl Board {
    pub fn new(map: &BoardMap, config: BoardConfig) -> Result<Self, SimError> {
        let synth_map = map.require_device(config.synth_address)?;
        let layout = SynthLayout::from_map(config.synth_address, synth_map)?;
        let rails = bind_rails(map, &config.rails)?;
        let boot_codes = config
            .rails
            .iter()
            .map(|r| {
                plan_voltage(r, &r.boot_volts)
                    .map(|s| (r.rail_id, s.code))
                    .map_err(|e| SimError::BootVoltage { rail: r.rail_id, message: e.to_string() })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let devices =
            map.devices.iter().map(|d| (d.i2c_address, RegisterFile::from_map(&d.map))).collect();
        Ok(Board {
            devices,
            config,
            layout,
            rails,
            boot_codes,
            firmware: FirmwareState::new(),
            dispatch_log: Vec::new(),
        })
    }

    /// Board built from the shipped register map and configuration, booted.
    pub fn with_defaults() -> Self {
        let map = crate::default_board_map();
        let mut board = Board::new(&map, BoardConfig::default()).expect("shipped defaults are valid");
        board.boot();
        board
    }

    /// Reset and run the startup routine: register files return to reset
    /// values and the firmware enters power initialization.
    pub fn power_on(&mut self) {
        for file in self.devices.values_mut() {
            file.reset();
        }
        self.firmware = FirmwareState::new();
        self.dispatch_log.clear();
        // Clocks, interrupt vectors, USB and SMBus setup have no observable
        // effect in this model.
        self.firmware.phase = FirmwarePhase::PowerInit;
    }

    /// Full boot: startup, one rail write per step, then the main loop.
    pub fn boot(&mut self) {
        self.power_on();
        while self.firmware.phase != FirmwarePhase::MainLoop {
            self.step();
        }
    }

    pub fn config(&self) -> &BoardConfig {
        &self.config
    }

    pub fn layout(&self) -> &SynthLayout {
        &self.layout
    }

    pub fn f_in(&self) -> &Rational {
        &self.config.f_in
    }

    pub fn firmware(&self) -> &FirmwareState {
        &self.firmware
    }

    pub fn dispatch_log(&self) -> &[DispatchRecord] {
        &self.dispatch_log
    }

    pub fn boot_codes(&self) -> &[(u8, u8)] {
        &self.boot_codes
    }

    pub fn device(&self, i2c_address: u8) -> Option<&RegisterFile> {
        self.devices.get(&i2c_address)
    }

    /// Direct register access, bypassing the bridge. For test fixtures.
    pub fn device_mut(&mut self, i2c_address: u8) -> Option<&mut RegisterFile> {
        self.devices.get_mut(&i2c_address)
    }

    /// USB receive interrupt for one byte.
    pub fn ingest_byte(&mut self, byte: u8) {
        self.firmware.usb_fifo.push_back(byte);
        self.service_usb();
    }

    pub fn ingest(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.ingest_byte(b);
        }
    }

    fn service_usb(&mut self) {
        let fw = &mut self.firmware;
        if fw.phase == FirmwarePhase::Startup {
            return;
        }
        while !fw.flag_raised() {
            let Some(byte) = fw.usb_fifo.pop_front() else { break };
            fw.rx_buffer.push(byte);
            if fw.rx_buffer.len() < COMMAND_LEN {
                continue;
            }
            let frame = std::mem::take(&mut fw.rx_buffer);
            if let Ok(cmd) = decode_command(&frame) {
                fw.pending = Some(cmd);
                match cmd.action {
                    Action::Write => fw.flag_write = true,
                    Action::Read => fw.flag_read = true,
                }
                fw.flag_set_at = fw.step_counter;
            }
        }
    }

    /// One main-loop iteration.
    pub fn step(&mut self) {
        self.firmware.step_counter += 1;
        match self.firmware.phase {
            FirmwarePhase::Startup => self.firmware.phase = FirmwarePhase::PowerInit,
            FirmwarePhase::PowerInit => self.power_init_step(),
            FirmwarePhase::MainLoop => self.main_loop_step(),
        }
    }

    fn power_init_step(&mut self) {
        let i = self.firmware.power_init_next;
        if let Some(&(rail_id, code)) = self.boot_codes.get(i) {
            let binding = self.rails.iter().find(|r| r.model.rail_id == rail_id).expect("bound rail");
            let addr = binding.model.pot_i2c_address;
            let patches = binding.wiper.scatter(code as u64);
            if let Some(file) = self.devices.get_mut(&addr) {
                for p in patches {
                    let old = file.read(p.address);
                    file.write(p.address, (old & !p.mask) | p.bits);
                }
            }
            self.firmware.power_init_next += 1;
        }
        if self.firmware.power_init_next >= self.boot_codes.len() {
            self.firmware.phase = FirmwarePhase::MainLoop;
        }
    }

    fn main_loop_step(&mut self) {
        match self.firmware.smb {
            Smb::Idle => {
                let Some(cmd) = self.firmware.pending.filter(|_| self.firmware.flag_raised()) else {
                    return;
                };
                // SMB0DAT <- slave address with R/W bit, then set STA.
                let rw = u8::from(cmd.is_read());
                let sla = (cmd.i2c_address << 1) | rw;
                let remaining = self.config.smb_latency_steps - 1;
                self.firmware.smb = Smb::Busy { sla, remaining };
                if remaining == 0 {
                    self.complete_transfer();
                }
            }
            Smb::Busy { sla, remaining } => {
                self.firmware.smb = Smb::Busy { sla, remaining: remaining - 1 };
                if remaining == 1 {
                    self.complete_transfer();
                }
            }
        }
    }

    /// SMBus interrupt: perform the I2C transfer and clear the flag.
    fn complete_transfer(&mut self) {
        let Smb::Busy { sla, .. } = self.firmware.smb else { return };
        let cmd = self.firmware.pending.take().expect("latched transfer has a command");
        let device = self.devices.get_mut(&(sla >> 1));
        if sla & 1 == 1 {
            let value = device.map_or(ABSENT_DEVICE_VALUE, |f| f.read(cmd.register_address));
            self.firmware.tx_queue.push_back(value);
        } else if let Some(f) = device {
            f.write(cmd.register_address, cmd.payload);
        }
        self.dispatch_log.push(DispatchRecord {
            command: cmd,
            flag_set_at: self.firmware.flag_set_at,
            dispatched_at: self.firmware.step_counter,
        });
        self.firmware.smb = Smb::Idle;
        self.firmware.flag_write = false;
        self.firmware.flag_read = false;
        self.service_usb();
    }

    /// True when no transfer is pending and no complete command is buffered.
    pub fn is_idle(&self) -> bool {
        let fw = &self.firmware;
        fw.phase == FirmwarePhase::MainLoop
            && !fw.flag_raised()
            && fw.smb == Smb::Idle
            && fw.usb_fifo.len() + fw.rx_buffer.len() < COMMAND_LEN
    }

    pub fn run_until_idle(&mut self) {
        for _ in 0..IDLE_STEP_LIMIT {
            if self.is_idle() {
                return;
            }
            self.step();
        }
    }

    /// Removes up to `n` queued response bytes, oldest first.
    pub fn take_tx(&mut self, n: usize) -> Vec<u8> {
        let n = n.min(self.firmware.tx_queue.len());
        self.firmware.tx_queue.drain(..n).collect()
    }

    /// Drops buffered bytes, queued responses and any unfinished command.
    /// Register state is kept.
    pub fn clear_queues(&mut self) {
        let fw = &mut self.firmware;
        fw.rx_buffer.clear();
        fw.usb_fifo.clear();
        fw.tx_queue.clear();
        fw.pending = None;
        fw.flag_read = false;
        fw.flag_write = false;
        fw.smb = Smb::Idle;
    }

    pub fn query_outputs(&self) -> Vec<ChannelStatus> {
        let synth = &self.devices[&self.layout.i2c_address];
        evaluate_outputs(&self.layout, &self.config.constraints, &self.config.f_in, |a| synth.read(a))
    }

    pub fn query_rails(&self) -> Vec<RailStatus> {
        evaluate_rails(&self.rails, |dev, reg| {
            self.devices.get(&dev).map_or(ABSENT_DEVICE_VALUE, |f| f.read(reg))
        })
    }
}

/// Shared handle to a board that admits one session at a time.
#[derive(Debug, Clone)]
pub struct Simulator {
    board: Arc<Mutex<Board>>,
    session_open: Arc<AtomicBool>,
}

impl Simulator {
    pub fn new(board: Board) -> Self {
        Simulator { board: Arc::new(Mutex::new(board)), session_open: Arc::new(AtomicBool::new(false)) }
    }

    pub fn with_defaults() -> Self {
        Simulator::new(Board::with_defaults())
    }

    pub fn board(&self) -> MutexGuard<'_, Board> {
        self.board.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Claims the single session slot; false if already taken.
    pub fn try_acquire(&self) -> bool {
        self.session_open.compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire).is_ok()
    }

    /// Frees the session slot and empties the command and response queues.
    pub fn release(&self) {
        self.board().clear_queues();
        self.session_open.store(false, Ordering::Release);
    }

    pub fn is_session_open(&self) -> bool {
        self.session_open.load(Ordering::Acquire)
    }
}
