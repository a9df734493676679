//! Host stack, planners and behavioral simulator for a four-output
//! programmable clock board with five adjustable supply rails.
//!
//! Layers, bottom up: [`wire`] frames, [`transport`] sessions, [`bridge`]
//! register access, [`host`] device operations. [`freq`] and [`power`] are
//! pure planners over exact rationals; [`sim`] is the board.

pub mod bridge;
pub mod config;
pub mod factor;
pub mod freq;
pub mod host;
pub mod power;
pub mod rational;
pub mod regmap;
pub mod sim;
pub mod synth;
pub mod transport;
pub mod wire;

pub use bridge::{Bridge, BridgeError};
pub use config::BoardConfig;
pub use freq::{FrequencyPlan, PhasePlan, PhaseRequest, PlanError};
pub use host::{bridge_init, DeviceHandle, DeviceStatus, HostConfig, HostError};
pub use power::{RailModel, SupplySetting};
pub use rational::Rational;
pub use regmap::{BoardMap, RegisterMap};
pub use sim::{Board, Simulator};
pub use transport::{Session, SessionConfig, TransportError};

/// Register map of the board as shipped.
pub const DEFAULT_MAP: &str = include_str!("../data/default.map");

pub fn default_board_map() -> BoardMap {
    regmap::parse_board_map(DEFAULT_MAP).expect("shipped register map parses")
}
