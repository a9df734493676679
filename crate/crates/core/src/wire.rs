//! Bridge command codec.
//!
//! Every host request is a fixed 4-byte frame:
//!
//! ```text
//! byte 0   opcode        0xFF = write, 0x00 = read
//! byte 1   i2c address   unshifted 7-bit address
//! byte 2   register      8-bit register address
//! byte 3   payload       value to write; 0x00 for reads (ignored on decode)
//! ```
//!
//! A read is answered with exactly one byte, the register value. There is no
//! status byte; device-side failures surface as transport timeouts.

use thiserror::Error;

pub const OPCODE_WRITE: u8 = 0xFF;
pub const OPCODE_READ: u8 = 0x00;
pub const COMMAND_LEN: usize = 4;
pub const RESPONSE_LEN: usize = 1;
pub const MAX_I2C_ADDRESS: u8 = 0x7F;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("command frame must be {COMMAND_LEN} bytes, got {0}")]
    Framing(usize),
    #[error("invalid opcode {0:#04x}")]
    InvalidOpcode(u8),
    #[error("i2c address {0:#04x} exceeds 7 bits")]
    AddressOutOfRange(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Write,
    Read,
}

/// One register access crossing the bridge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BridgeCommand {
    pub action: Action,
    pub i2c_address: u8,
    pub register_address: u8,
    pub payload: u8,
}

impl BridgeCommand {
    pub fn write(i2c_address: u8, register_address: u8, value: u8) -> Self {
        BridgeCommand { action: Action::Write, i2c_address, register_address, payload: value }
    }

    pub fn read(i2c_address: u8, register_address: u8) -> Self {
        BridgeCommand { action: Action::Read, i2c_address, register_address, payload: 0 }
    }

    pub fn is_read(&self) -> bool {
        self.action == Action::Read
    }
}

pub fn encode_command(cmd: &BridgeCommand) -> Result<[u8; COMMAND_LEN], WireError> {
    if cmd.i2c_address > MAX_I2C_ADDRESS {
        return Err(WireError::AddressOutOfRange(cmd.i2c_address));
    }
    let (opcode, payload) = match cmd.action {
        Action::Write => (OPCODE_WRITE, cmd.payload),
        Action::Read => (OPCODE_READ, 0x00),
    };
    Ok([opcode, cmd.i2c_address, cmd.register_address, payload])
}

pub fn decode_command(bytes: &[u8]) -> Result<BridgeCommand, WireError> {
    let frame: &[u8; COMMAND_LEN] =
        bytes.try_into().map_err(|_| WireError::Framing(bytes.len()))?;
    let [opcode, i2c_address, register_address, payload] = *frame;
    if i2c_address > MAX_I2C_ADDRESS {
        return Err(WireError::AddressOutOfRange(i2c_address));
    }
    match opcode {
        OPCODE_WRITE => Ok(BridgeCommand::write(i2c_address, register_address, payload)),
        OPCODE_READ => Ok(BridgeCommand::read(i2c_address, register_address)),
        other => Err(WireError::InvalidOpcode(other)),
    }
}

/// The one-byte answer to a read command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReadResponse {
    pub value: u8,
}

impl ReadResponse {
    pub fn encode(&self) -> [u8; RESPONSE_LEN] {
        [self.value]
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        match bytes {
            [value] => Ok(ReadResponse { value: *value }),
            _ => Err(WireError::Framing(bytes.len())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn encode_examples() {
        assert_eq!(
            encode_command(&BridgeCommand::write(0x70, 0x1D, 0x90)).unwrap(),
            [0xFF, 0x70, 0x1D, 0x90]
        );
        assert_eq!(
            encode_command(&BridgeCommand::read(0x70, 0x06)).unwrap(),
            [0x00, 0x70, 0x06, 0x00]
        );
        assert_eq!(
            encode_command(&BridgeCommand::write(0, 0, 0)).unwrap(),
            [0xFF, 0x00, 0x00, 0x00]
        );
    }

    #[test]
    fn read_payload_is_never_transmitted() {
        let mut cmd = BridgeCommand::read(0x70, 0x06);
        cmd.payload = 0xAB;
        assert_eq!(encode_command(&cmd).unwrap()[3], 0x00);
    }

    #[test]
    fn encode_rejects_eight_bit_address() {
        assert_eq!(
            encode_command(&BridgeCommand::write(0x80, 0, 0)),
            Err(WireError::AddressOutOfRange(0x80))
        );
    }

    #[test]
    fn decode_examples() {
        assert_eq!(
            decode_command(&[0xFF, 0x70, 0x1D, 0x90]).unwrap(),
            BridgeCommand::write(0x70, 0x1D, 0x90)
        );
        let read = decode_command(&[0x00, 0x70, 0x06, 0xAB]).unwrap();
        assert_eq!(read, BridgeCommand::read(0x70, 0x06));
        assert_eq!(read.payload, 0);
        assert_eq!(encode_command(&read).unwrap(), [0x00, 0x70, 0x06, 0x00]);
        assert_eq!(decode_command(&[0x01, 0x70, 0x06, 0x00]), Err(WireError::InvalidOpcode(0x01)));
    }

    #[test]
    fn decode_framing_errors() {
        assert_eq!(decode_command(&[0xFF, 0x70, 0x06]), Err(WireError::Framing(3)));
        assert_eq!(decode_command(&[0; 5]), Err(WireError::Framing(5)));
        assert_eq!(decode_command(&[]), Err(WireError::Framing(0)));
    }

    #[test]
    fn response_is_one_byte() {
        assert_eq!(ReadResponse { value: 0x5A }.encode(), [0x5A]);
        assert_eq!(ReadResponse::decode(&[0x5A]).unwrap().value, 0x5A);
        assert_eq!(ReadResponse::decode(&[1, 2]), Err(WireError::Framing(2)));
    }

    fn any_command() -> impl Strategy<Value = BridgeCommand> {
        (any::<bool>(), 0u8..=0x7F, any::<u8>(), any::<u8>()).prop_map(|(w, a, r, v)| {
            if w {
                BridgeCommand::write(a, r, v)
            } else {
                BridgeCommand::read(a, r)
            }
        })
    }

    proptest! {
        #[test]
        fn decode_inverts_encode(cmd in any_command()) {
            let bytes = encode_command(&cmd).unwrap();
            prop_assert_eq!(decode_command(&bytes).unwrap(), cmd);
        }

        #[test]
        fn decode_is_total(bytes in proptest::collection::vec(any::<u8>(), 0..8)) {
            match decode_command(&bytes) {
                Ok(cmd) => {
                    let again = encode_command(&cmd).unwrap();
                    prop_assert_eq!(&again[..3], &bytes[..3]);
                    let expected = if cmd.is_read() { 0 } else { bytes[3] };
                    prop_assert_eq!(again[3], expected);
                }
                Err(WireError::Framing(n)) => prop_assert!(n != COMMAND_LEN && n == bytes.len()),
                Err(WireError::InvalidOpcode(op)) => prop_assert!(op != 0 && op != 0xFF),
                Err(WireError::AddressOutOfRange(a)) => prop_assert!(a > 0x7F),
            }
        }
    }
}
