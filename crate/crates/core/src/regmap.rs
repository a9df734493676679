//! Register files and register-map configuration.
//!
//! A device map is plain text. Register entries come first, one per line as
//! `<addr>, <reset>, <mask>` (hex, `0x` prefix optional; mask bit 1 means
//! writable). An optional `[fields]` line starts the named-field section with
//! one binding per line, `<name> = <addr>[<msb>:<lsb>]`. `#` starts a comment.
//!
//! Values wider than one register are split into numbered pieces, least
//! significant first: `fb.p1.0`, `fb.p1.1`, `fb.p1.2` together form `fb.p1`.
//!
//! A board map concatenates device maps, each introduced by
//! `[device <i2c-addr> <optional-name>]`.
//!
//! Addresses without an entry reset to 0x00 and are fully writable.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

pub const REGISTER_COUNT: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MapError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: address {value:#x} out of range")]
    AddressOutOfRange { line: usize, value: u64 },
    #[error("line {line}: value {value:#x} does not fit in 8 bits")]
    ValueOutOfRange { line: usize, value: u64 },
    #[error("line {line}: duplicate register address {address:#04x}")]
    DuplicateAddress { line: usize, address: u8 },
    #[error("line {line}: duplicate device address {address:#04x}")]
    DuplicateDevice { line: usize, address: u8 },
    #[error("line {line}: duplicate field name {name}")]
    DuplicateField { line: usize, name: String },
    #[error("fields {first} and {second} overlap at register {address:#04x} bit {bit}")]
    Overlap { first: String, second: String, address: u8, bit: u8 },
    #[error("field {name} refers to register {address:#04x}, which has no entry")]
    UnlistedAddress { name: String, address: u8 },
    #[error("missing field {0}")]
    MissingField(String),
    #[error("field {name} is {actual} bits wide, expected {expected}")]
    FieldWidth { name: String, expected: u32, actual: u32 },
    #[error("missing device {0:#04x} in board map")]
    MissingDevice(u8),
}

/// 256 eight-bit registers with per-register write masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterFile {
    registers: [u8; REGISTER_COUNT],
    write_masks: [u8; REGISTER_COUNT],
    reset_values: [u8; REGISTER_COUNT],
}

impl Default for RegisterFile {
    fn default() -> Self {
        RegisterFile::full_mask()
    }
}

impl RegisterFile {
    /// All registers zero and fully writable.
    pub fn full_mask() -> Self {
        RegisterFile {
            registers: [0; REGISTER_COUNT],
            write_masks: [0xFF; REGISTER_COUNT],
            reset_values: [0; REGISTER_COUNT],
        }
    }

    pub fn from_map(map: &RegisterMap) -> Self {
        let mut file = RegisterFile::full_mask();
        for e in &map.entries {
            file.reset_values[e.address as usize] = e.reset_value;
            file.write_masks[e.address as usize] = e.write_mask;
        }
        file.reset();
        file
    }

    pub fn reset(&mut self) {
        self.registers = self.reset_values;
    }

    pub fn read(&self, address: u8) -> u8 {
        self.registers[address as usize]
    }

    /// Masked update: bits outside the write mask keep their old value.
    pub fn write(&mut self, address: u8, value: u8) {
        let i = address as usize;
        let mask = self.write_masks[i];
        self.registers[i] = (self.registers[i] & !mask) | (value & mask);
    }

    pub fn write_mask(&self, address: u8) -> u8 {
        self.write_masks[address as usize]
    }

    pub fn snapshot(&self) -> [u8; REGISTER_COUNT] {
        self.registers
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Entry {
    pub address: u8,
    pub reset_value: u8,
    pub write_mask: u8,
}

/// A named bit range inside one register.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldBinding {
    pub name: String,
    pub address: u8,
    pub msb: u8,
    pub lsb: u8,
}

impl FieldBinding {
    pub fn width(&self) -> u32 {
        (self.msb - self.lsb + 1) as u32
    }

    pub fn mask(&self) -> u8 {
        let ones = ((1u16 << self.width()) - 1) as u8;
        ones << self.lsb
    }
}

/// The register layout of one I2C device.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RegisterMap {
    pub entries: Vec<Entry>,
    pub fields: Vec<FieldBinding>,
    index: BTreeMap<String, usize>,
}

impl RegisterMap {
    pub fn entry(&self, address: u8) -> Option<&Entry> {
        self.entries.iter().find(|e| e.address == address)
    }

    pub fn field(&self, name: &str) -> Option<&FieldBinding> {
        self.index.get(name).map(|&i| &self.fields[i])
    }

    /// Resolves a logical value made of one field or of numbered pieces.
    pub fn composite(&self, name: &str) -> Option<Composite> {
        if let Some(f) = self.field(name) {
            return Some(Composite { name: name.to_string(), pieces: vec![f.clone()] });
        }
        let pieces: Vec<FieldBinding> = (0..)
            .map_while(|i| self.field(&format!("{name}.{i}")).cloned())
            .collect();
        if pieces.is_empty() {
            None
        } else {
            Some(Composite { name: name.to_string(), pieces })
        }
    }

    /// Like [`composite`](Self::composite) but requires an exact width.
    pub fn require(&self, name: &str, width: u32) -> Result<Composite, MapError> {
        let c = self.composite(name).ok_or_else(|| MapError::MissingField(name.to_string()))?;
        if c.width() != width {
            return Err(MapError::FieldWidth { name: name.to_string(), expected: width, actual: c.width() });
        }
        Ok(c)
    }

    /// Registers touched by fields whose name starts with `prefix`.
    pub fn addresses_with_prefix(&self, prefix: &str) -> BTreeSet<u8> {
        self.fields.iter().filter(|f| f.name.starts_with(prefix)).map(|f| f.address).collect()
    }

    fn validate(&self) -> Result<(), MapError> {
        let listed: BTreeSet<u8> = self.entries.iter().map(|e| e.address).collect();
        for f in &self.fields {
            if !listed.contains(&f.address) {
                return Err(MapError::UnlistedAddress { name: f.name.clone(), address: f.address });
            }
        }
        let mut owner: BTreeMap<(u8, u8), &str> = BTreeMap::new();
        for f in &self.fields {
            for bit in f.lsb..=f.msb {
                if let Some(first) = owner.insert((f.address, bit), &f.name) {
                    return Err(MapError::Overlap {
                        first: first.to_string(),
                        second: f.name.clone(),
                        address: f.address,
                        bit,
                    });
                }
            }
        }
        Ok(())
    }

    fn push_field(&mut self, field: FieldBinding, line: usize) -> Result<(), MapError> {
        if self.index.contains_key(&field.name) {
            return Err(MapError::DuplicateField { line, name: field.name });
        }
        self.index.insert(field.name.clone(), self.fields.len());
        self.fields.push(field);
        Ok(())
    }
}

impl fmt::Display for RegisterMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(f, "{:#04X}, {:#04X}, {:#04X}", e.address, e.reset_value, e.write_mask)?;
        }
        if !self.fields.is_empty() {
            writeln!(f, "[fields]")?;
            for b in &self.fields {
                writeln!(f, "{} = {:#04X}[{}:{}]", b.name, b.address, b.msb, b.lsb)?;
            }
        }
        Ok(())
    }
}

/// A multi-piece field; piece 0 holds the least significant bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Composite {
    pub name: String,
    pub pieces: Vec<FieldBinding>,
}

/// Bits to store into one register: only bits set in `mask` are owned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegisterPatch {
    pub address: u8,
    pub mask: u8,
    pub bits: u8,
}

impl Composite {
    pub fn width(&self) -> u32 {
        self.pieces.iter().map(FieldBinding::width).sum()
    }

    pub fn addresses(&self) -> impl Iterator<Item = u8> + '_ {
        self.pieces.iter().map(|p| p.address)
    }

    pub fn gather(&self, mut read: impl FnMut(u8) -> u8) -> u64 {
        let mut value = 0u64;
        let mut shift = 0;
        for p in &self.pieces {
            let raw = (read(p.address) & p.mask()) >> p.lsb;
            value |= (raw as u64) << shift;
            shift += p.width();
        }
        value
    }

    /// Splits `value` into per-register patches. Bits above the width are
    /// dropped; callers check ranges before scattering.
    pub fn scatter(&self, value: u64) -> Vec<RegisterPatch> {
        let mut out: Vec<RegisterPatch> = Vec::new();
        let mut shift = 0;
        for p in &self.pieces {
            let part = ((value >> shift) & ((1u64 << p.width()) - 1)) as u8;
            shift += p.width();
            let patch = RegisterPatch { address: p.address, mask: p.mask(), bits: part << p.lsb };
            match out.iter_mut().find(|o| o.address == p.address) {
                Some(o) => {
                    o.mask |= patch.mask;
                    o.bits |= patch.bits;
                }
                None => out.push(patch),
            }
        }
        out
    }
}

/// Merges patches that land on the same register.
pub fn merge_patches(patches: impl IntoIterator<Item = RegisterPatch>) -> Vec<RegisterPatch> {
    let mut merged: BTreeMap<u8, RegisterPatch> = BTreeMap::new();
    for p in patches {
        merged
            .entry(p.address)
            .and_modify(|m| {
                m.bits = (m.bits & !p.mask) | (p.bits & p.mask);
                m.mask |= p.mask;
            })
            .or_insert(p);
    }
    merged.into_values().collect()
}

pub fn parse_register_map(text: &str) -> Result<RegisterMap, MapError> {
    let lines: Vec<(usize, &str)> = text.lines().enumerate().map(|(i, l)| (i + 1, l)).collect();
    parse_device_lines(&lines)
}

fn parse_device_lines(lines: &[(usize, &str)]) -> Result<RegisterMap, MapError> {
    let mut map = RegisterMap::default();
    let mut in_fields = false;
    let mut seen = BTreeSet::new();
    for &(line, raw) in lines {
        let text = strip_comment(raw);
        if text.is_empty() {
            continue;
        }
        if text == "[fields]" {
            if in_fields {
                return Err(syntax(line, "second [fields] section"));
            }
            in_fields = true;
            continue;
        }
        if text.starts_with('[') {
            return Err(syntax(line, "unexpected section header"));
        }
        if in_fields {
            let field = parse_binding(text, line)?;
            map.push_field(field, line)?;
        } else {
            let entry = parse_entry(text, line)?;
            if !seen.insert(entry.address) {
                return Err(MapError::DuplicateAddress { line, address: entry.address });
            }
            map.entries.push(entry);
        }
    }
    map.validate()?;
    Ok(map)
}

fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("").trim()
}

fn syntax(line: usize, message: impl Into<String>) -> MapError {
    MapError::Syntax { line, message: message.into() }
}

fn parse_hex(text: &str, line: usize) -> Result<u64, MapError> {
    let t = text.trim();
    let digits = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")).unwrap_or(t);
    if digits.is_empty() {
        return Err(syntax(line, format!("expected hex number, found {t:?}")));
    }
    u64::from_str_radix(digits, 16).map_err(|_| syntax(line, format!("bad hex number {t:?}")))
}

fn parse_address(text: &str, line: usize) -> Result<u8, MapError> {
    let v = parse_hex(text, line)?;
    u8::try_from(v).map_err(|_| MapError::AddressOutOfRange { line, value: v })
}

fn parse_byte(text: &str, line: usize) -> Result<u8, MapError> {
    let v = parse_hex(text, line)?;
    u8::try_from(v).map_err(|_| MapError::ValueOutOfRange { line, value: v })
}

fn parse_entry(text: &str, line: usize) -> Result<Entry, MapError> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(syntax(line, "expected `<addr>, <value>, <mask>`"));
    }
    Ok(Entry {
        address: parse_address(parts[0], line)?,
        reset_value: parse_byte(parts[1], line)?,
        write_mask: parse_byte(parts[2], line)?,
    })
}

fn parse_binding(text: &str, line: usize) -> Result<FieldBinding, MapError> {
    let (name, rest) =
        text.split_once('=').ok_or_else(|| syntax(line, "expected `<name> = <addr>[<msb>:<lsb>]`"))?;
    let name = name.trim();
    if name.is_empty()
        || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
    {
        return Err(syntax(line, format!("bad field name {name:?}")));
    }
    let rest = rest.trim();
    let (addr, bits) = rest
        .strip_suffix(']')
        .and_then(|r| r.split_once('['))
        .ok_or_else(|| syntax(line, "expected `<addr>[<msb>:<lsb>]`"))?;
    let (msb, lsb) = bits.split_once(':').ok_or_else(|| syntax(line, "expected `msb:lsb`"))?;
    let bit = |s: &str| -> Result<u8, MapError> {
        let v: u8 = s.trim().parse().map_err(|_| syntax(line, format!("bad bit index {s:?}")))?;
        if v > 7 {
            return Err(syntax(line, format!("bit index {v} exceeds 7")));
        }
        Ok(v)
    };
    let (msb, lsb) = (bit(msb)?, bit(lsb)?);
    if msb < lsb {
        return Err(syntax(line, "msb below lsb"));
    }
    Ok(FieldBinding { name: name.to_string(), address: parse_address(addr, line)?, msb, lsb })
}

/// One device section of a board map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceMap {
    pub i2c_address: u8,
    pub name: Option<String>,
    pub map: RegisterMap,
}

/// Register maps for every device on the bus.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BoardMap {
    pub devices: Vec<DeviceMap>,
}

impl BoardMap {
    pub fn device(&self, i2c_address: u8) -> Option<&RegisterMap> {
        self.devices.iter().find(|d| d.i2c_address == i2c_address).map(|d| &d.map)
    }

    pub fn require_device(&self, i2c_address: u8) -> Result<&RegisterMap, MapError> {
        self.device(i2c_address).ok_or(MapError::MissingDevice(i2c_address))
    }
}

impl fmt::Display for BoardMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.devices {
            match &d.name {
                Some(n) => writeln!(f, "[device {:#04X} {n}]", d.i2c_address)?,
                None => writeln!(f, "[device {:#04X}]", d.i2c_address)?,
            }
            write!(f, "{}", d.map)?;
        }
        Ok(())
    }
}

pub fn parse_board_map(text: &str) -> Result<BoardMap, MapError> {
    let mut board = BoardMap::default();
    let mut current: Option<(usize, u8, Option<String>)> = None;
    let mut body: Vec<(usize, &str)> = Vec::new();

    let flush = |current: Option<(usize, u8, Option<String>)>,
                     body: &mut Vec<(usize, &str)>,
                     board: &mut BoardMap|
     -> Result<(), MapError> {
        if let Some((line, addr, name)) = current {
            if board.device(addr).is_some() {
                return Err(MapError::DuplicateDevice { line, address: addr });
            }
            let map = parse_device_lines(body)?;
            board.devices.push(DeviceMap { i2c_address: addr, name, map });
        }
        body.clear();
        Ok(())
    };

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t = strip_comment(raw);
        if let Some(header) = t.strip_prefix("[device").and_then(|h| h.strip_suffix(']')) {
            flush(current.take(), &mut body, &mut board)?;
            let mut words = header.split_whitespace();
            let addr = words.next().ok_or_else(|| syntax(line, "device header needs an address"))?;
            let addr = parse_address(addr, line)?;
            if addr > crate::wire::MAX_I2C_ADDRESS {
                return Err(MapError::AddressOutOfRange { line, value: addr as u64 });
            }
            let name = words.next().map(str::to_string);
            if words.next().is_some() {
                return Err(syntax(line, "trailing words in device header"));
            }
            current = Some((line, addr, name));
            continue;
        }
        if current.is_none() {
            if !t.is_empty() {
                return Err(syntax(line, "entry outside a [device] section"));
            }
            continue;
        }
        body.push((line, raw));
    }
    flush(current.take(), &mut body, &mut board)?;
    Ok(board)
}
