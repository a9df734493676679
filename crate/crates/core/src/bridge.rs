//! Register read/write over a session. Each call is exactly one wire command.

use crate::regmap::RegisterPatch;
use crate::transport::{Session, TransportError};
use crate::wire::{encode_command, BridgeCommand, ReadResponse, WireError, RESPONSE_LEN};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Wire(#[from] WireError),
}

#[derive(Debug)]
pub struct Bridge {
    session: Session,
}

impl Bridge {
    pub fn new(session: Session) -> Self {
        Bridge { session }
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn into_session(self) -> Session {
        self.session
    }

    pub fn close(&mut self) {
        self.session.close();
    }

    pub fn write(&mut self, i2c_address: u8, register: u8, value: u8) -> Result<(), BridgeError> {
        let frame = encode_command(&BridgeCommand::write(i2c_address, register, value))?;
        self.session.write_bytes(&frame)?;
        Ok(())
    }

    /// Blocks for the one-byte response.
    pub fn read(&mut self, i2c_address: u8, register: u8) -> Result<u8, BridgeError> {
        let frame = encode_command(&BridgeCommand::read(i2c_address, register))?;
        self.session.write_bytes(&frame)?;
        let bytes = self.session.read(RESPONSE_LEN)?;
        Ok(ReadResponse::decode(&bytes)?.value)
    }

    /// Applies field patches: whole-byte patches are plain writes, partial
    /// ones read-modify-write so bits outside the mask keep their value.
    pub fn apply_patches(&mut self, i2c_address: u8, patches: &[RegisterPatch]) -> Result<(), BridgeError> {
        for p in patches {
            let value = if p.mask == 0xFF {
                p.bits
            } else {
                let old = self.read(i2c_address, p.address)?;
                (old & !p.mask) | (p.bits & p.mask)
            };
            self.write(i2c_address, p.address, value)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Simulator;
    use crate::transport::SessionConfig;

    fn bridge(sim: &Simulator) -> Bridge {
        Bridge::new(Session::open(&SessionConfig::in_process(sim.clone())).unwrap())
    }

    #[test]
    fn echo_and_absent_device() {
        let sim = Simulator::with_defaults();
        let mut b = bridge(&sim);
        b.write(0x70, 0x06, 0x5A).unwrap();
        assert_eq!(b.read(0x70, 0x06).unwrap(), 0x5A);
        assert_eq!(b.read(0x5A, 0x06).unwrap(), 0xFF);
    }

    #[test]
    fn read_only_register_keeps_reset_value() {
        let sim = Simulator::with_defaults();
        let mut b = bridge(&sim);
        b.write(0x70, 0x02, 0x00).unwrap();
        assert_eq!(b.read(0x70, 0x02).unwrap(), 0x53);
    }

    #[test]
    fn out_of_range_address_is_rejected_before_sending() {
        let sim = Simulator::with_defaults();
        let mut b = bridge(&sim);
        assert!(matches!(b.write(0x80, 0, 0), Err(BridgeError::Wire(WireError::AddressOutOfRange(0x80)))));
        assert!(sim.board().dispatch_log().is_empty());
    }

    #[test]
    fn partial_patch_preserves_other_bits() {
        let sim = Simulator::with_defaults();
        let mut b = bridge(&sim);
        b.write(0x70, 0x06, 0b1010_0101).unwrap();
        b.apply_patches(0x70, &[RegisterPatch { address: 0x06, mask: 0x0F, bits: 0x03 }]).unwrap();
        assert_eq!(b.read(0x70, 0x06).unwrap(), 0b1010_0011);
    }
}
