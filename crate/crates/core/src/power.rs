//! Supply rails: a digital potentiometer sets the upper feedback resistor of an
//! adjustable regulator.
//!
//! ```text
//! R_wb(code) = code / 256 * r_ab + r_wiper
//! v_out      = v_ref * (1 + R_wb(code) / r_fixed)
//! ```

use crate::bridge::{Bridge, BridgeError};
use crate::rational::{int, ratio, Rational};
use crate::synth::RailBinding;
use num_traits::{Signed, ToPrimitive};
use thiserror::Error;

pub const WIPER_STEPS: u32 = 256;
pub const RAIL_COUNT: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PowerError {
    #[error("target {target} V outside the rail's reachable band [{min}, {max}] V")]
    Infeasible { target: String, min: String, max: String },
    #[error("target voltage must be positive, got {0}")]
    NonPositive(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RailModel {
    pub rail_id: u8,
    pub v_ref: Rational,
    pub r_fixed: Rational,
    pub r_ab: Rational,
    pub r_wiper: Rational,
    pub pot_i2c_address: u8,
    pub pot_channel: u8,
    /// Voltage the firmware programs during power-up.
    pub boot_volts: Rational,
}

impl RailModel {
    /// Board default: rails 0..=3 on the four channels of the pot at 0x2C,
    /// rail 4 on channel 0 of the pot at 0x2D.
    pub fn default_rail(rail_id: u8) -> Self {
        let (pot_i2c_address, pot_channel) = if rail_id < 4 { (0x2C, rail_id) } else { (0x2D, 0) };
        let boot_volts = match rail_id {
            0 | 1 => ratio(33, 10),
            2 => ratio(25, 10),
            _ => ratio(18, 10),
        };
        RailModel {
            rail_id,
            v_ref: ratio(125, 100),
            r_fixed: int(10_000),
            r_ab: int(20_000),
            r_wiper: int(60),
            pot_i2c_address,
            pot_channel,
            boot_volts,
        }
    }

    pub fn defaults() -> Vec<RailModel> {
        (0..RAIL_COUNT as u8).map(RailModel::default_rail).collect()
    }

    pub fn wiper_resistance(&self, code: u8) -> Rational {
        int(code as i64) / int(WIPER_STEPS as i64) * &self.r_ab + &self.r_wiper
    }

    pub fn voltage(&self, code: u8) -> Rational {
        &self.v_ref * (int(1) + self.wiper_resistance(code) / &self.r_fixed)
    }

    pub fn half_lsb(&self) -> Rational {
        (self.voltage(1) - self.voltage(0)) / int(2)
    }

    /// Inclusive band of targets the planner accepts.
    pub fn feasible_band(&self) -> (Rational, Rational) {
        let h = self.half_lsb();
        (self.voltage(0) - &h, self.voltage(255) + h)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupplySetting {
    pub code: u8,
    pub v_predicted: Rational,
    /// `v_predicted - v_target`
    pub v_error: Rational,
}

/// Picks the wiper code closest to `v_target`; ties go to the lower code.
///
/// The voltage is affine in the code, so the continuous solution is computed
/// directly and only its two integer neighbours are compared.
pub fn plan_voltage(rail: &RailModel, v_target: &Rational) -> Result<SupplySetting, PowerError> {
    if !v_target.is_positive() {
        return Err(PowerError::NonPositive(v_target.to_string()));
    }
    let (min, max) = rail.feasible_band();
    if v_target < &min || v_target > &max {
        return Err(PowerError::Infeasible {
            target: v_target.to_string(),
            min: min.to_string(),
            max: max.to_string(),
        });
    }
    let ideal = ((v_target / &rail.v_ref - int(1)) * &rail.r_fixed - &rail.r_wiper) * int(WIPER_STEPS as i64)
        / &rail.r_ab;
    let clamp = |r: Rational| r.to_integer().to_i64().unwrap_or(0).clamp(0, 255) as u8;
    let lower = clamp(ideal.floor());
    let upper = clamp(ideal.ceil());
    let err = |c: u8| (rail.voltage(c) - v_target).abs();
    let code = if err(upper) < err(lower) { upper } else { lower };
    let v_predicted = rail.voltage(code);
    Ok(SupplySetting { code, v_error: &v_predicted - v_target, v_predicted })
}

/// One wire write storing the wiper code in the rail's pot channel register.
pub fn apply_supply(
    bridge: &mut Bridge,
    rail: &RailBinding,
    setting: &SupplySetting,
) -> Result<(), BridgeError> {
    let patches = rail.wiper.scatter(setting.code as u64);
    bridge.apply_patches(rail.model.pot_i2c_address, &patches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn oracle(rail: &RailModel, target: &Rational) -> u8 {
        (0..=255u8).min_by_key(|&c| ((rail.voltage(c) - target).abs(), c)).unwrap()
    }

    #[test]
    fn endpoint_identity() {
        let rail = RailModel::default_rail(0);
        let s = plan_voltage(&rail, &rail.voltage(0)).unwrap();
        assert_eq!(s.code, 0);
        assert_eq!(s.v_error, int(0));
        assert_eq!(rail.voltage(0), ratio(503, 400));
    }

    #[test]
    fn two_and_a_half_volts() {
        // Frozen from an exhaustive 256-code scan done outside this crate.
        let rail = RailModel::default_rail(0);
        let s = plan_voltage(&rail, &ratio(5, 2)).unwrap();
        assert_eq!(s.code, 127);
        assert_eq!(s.v_predicted, ratio(31971, 12800));
        assert_eq!(s.v_error, ratio(-29, 12800));
    }

    #[test]
    fn infeasible_targets() {
        let rail = RailModel::default_rail(0);
        assert!(matches!(plan_voltage(&rail, &ratio(1, 2)), Err(PowerError::Infeasible { .. })));
        assert!(matches!(plan_voltage(&rail, &int(4)), Err(PowerError::Infeasible { .. })));
        assert!(matches!(plan_voltage(&rail, &int(0)), Err(PowerError::NonPositive(_))));
        let (lo, hi) = rail.feasible_band();
        assert_eq!(plan_voltage(&rail, &lo).unwrap().code, 0);
        assert_eq!(plan_voltage(&rail, &hi).unwrap().code, 255);
        assert!(plan_voltage(&rail, &(lo - ratio(1, 1_000_000_000))).is_err());
    }

    #[test]
    fn ties_go_to_lower_code() {
        let rail = RailModel::default_rail(3);
        for c in 0..255u8 {
            let mid = (rail.voltage(c) + rail.voltage(c + 1)) / int(2);
            assert_eq!(plan_voltage(&rail, &mid).unwrap().code, c);
        }
    }

    #[test]
    fn voltage_is_monotone() {
        let rail = RailModel::default_rail(1);
        for c in 0..255u8 {
            assert!(rail.voltage(c) <= rail.voltage(c + 1));
        }
    }

    proptest! {
        #[test]
        fn planner_matches_exhaustive_scan(num in 1_200_000i64..3_800_000) {
            let rail = RailModel::default_rail(2);
            let target = ratio(num, 1_000_000);
            let (lo, hi) = rail.feasible_band();
            match plan_voltage(&rail, &target) {
                Ok(s) => {
                    prop_assert_eq!(s.code, oracle(&rail, &target));
                    prop_assert_eq!(s.v_predicted, rail.voltage(s.code));
                }
                Err(_) => prop_assert!(target < lo || target > hi),
            }
        }
    }
}
