//! `clockgen` command line: one device operation per invocation.
//!
//! Exit codes: 0 success, 1 device or planning error, 2 usage error.

use clap::{ArgGroup, Args, Parser, Subcommand};
use clockgen::freq::PhaseRequest;
use clockgen::config::ConfigError;
use clockgen::host::{bridge_init, load_board, DeviceHandle, DeviceStatus, HostConfig, HostError};
use clockgen::rational::{parse_exact, to_f64, Exact, Rational};
use clockgen::sim::{Board, SimError, Simulator};
use clockgen::transport::{SessionConfig, SimServer, DEFAULT_PORT};
use clockgen::{BoardConfig, BoardMap, FrequencyPlan, PhasePlan, SupplySetting};
use serde_json::{json, Value};
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportArg {
    /// A fresh simulator inside this process.
    Sim,
    Tcp { host: String, port: u16 },
}

fn parse_transport(s: &str) -> Result<TransportArg, String> {
    if s == "sim" {
        return Ok(TransportArg::Sim);
    }
    let rest = s.strip_prefix("tcp:").ok_or("expected `sim` or `tcp:HOST:PORT`")?;
    let (host, port) = rest.rsplit_once(':').ok_or("expected `tcp:HOST:PORT`")?;
    let port = port.parse().map_err(|_| format!("bad port `{port}`"))?;
    if host.is_empty() {
        return Err("empty host".into());
    }
    Ok(TransportArg::Tcp { host: host.trim_matches(['[', ']']).to_string(), port })
}

fn parse_rational(s: &str) -> Result<Rational, String> {
    parse_exact(s).map_err(|e| e.to_string())
}

/// Decimal, or hex with a `0x` prefix.
fn parse_byte(s: &str) -> Result<u8, String> {
    let r = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(h) => u8::from_str_radix(h, 16),
        None => s.parse(),
    };
    r.map_err(|_| format!("`{s}` is not a byte"))
}

/// Hex, with or without a `0x` prefix.
fn parse_hex_byte(s: &str) -> Result<u8, String> {
    let h = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")).unwrap_or(s);
    u8::from_str_radix(h, 16).map_err(|_| format!("`{s}` is not a hex byte"))
}

#[derive(Debug, Parser)]
#[command(name = "clockgen", version, about = "Drive a programmable clock board or its simulator")]
pub struct Cli {
    /// `sim` for an in-process simulator, or `tcp:HOST:PORT`.
    #[arg(long, global = true, default_value = "tcp:127.0.0.1:53380", value_parser = parse_transport)]
    pub transport: TransportArg,
    /// Register map file (defaults to the built-in board map).
    #[arg(long, global = true)]
    pub map: Option<PathBuf>,
    /// Board config file (defaults to the built-in config).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Machine-readable output.
    #[arg(long, global = true)]
    pub json: bool,
    /// Read timeout in milliseconds.
    #[arg(long, global = true, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub timeout_ms: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Serve a booted simulator over TCP until killed.
    Simulate {
        #[arg(long, default_value_t = format!("127.0.0.1:{DEFAULT_PORT}"))]
        listen: String,
    },
    /// Program a channel's output frequency.
    SetFreq {
        #[arg(long)]
        channel: u8,
        /// Hz; integer, decimal, fraction or with a k/M/G suffix.
        #[arg(long, value_parser = parse_rational)]
        hz: Rational,
    },
    /// Set a programmed channel's phase offset.
    SetPhase(SetPhaseArgs),
    /// Enable a channel's output.
    Enable {
        #[arg(long)]
        channel: u8,
    },
    /// Disable a channel's output.
    Disable {
        #[arg(long)]
        channel: u8,
    },
    /// Set a supply rail voltage.
    SetRail {
        #[arg(long)]
        rail: u8,
        #[arg(long, value_parser = parse_rational, allow_hyphen_values = true)]
        volts: Rational,
    },
    /// Raw register access.
    #[command(subcommand)]
    Reg(RegCommand),
    /// Report every channel and rail.
    Status,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("offset").required(true).args(["seconds", "degrees"])))]
pub struct SetPhaseArgs {
    #[arg(long)]
    pub channel: u8,
    #[arg(long, value_parser = parse_rational, allow_hyphen_values = true)]
    pub seconds: Option<Rational>,
    #[arg(long, value_parser = parse_rational, allow_hyphen_values = true)]
    pub degrees: Option<Rational>,
}

#[derive(Debug, Subcommand)]
pub enum RegCommand {
    Read {
        #[arg(value_parser = parse_byte)]
        addr: u8,
        /// I2C address of the device (defaults to the synthesizer).
        #[arg(long, value_parser = parse_hex_byte)]
        dev: Option<u8>,
    },
    Write {
        #[arg(value_parser = parse_byte)]
        addr: u8,
        #[arg(value_parser = parse_byte)]
        value: u8,
        #[arg(long, value_parser = parse_hex_byte)]
        dev: Option<u8>,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            if cli.json {
                let _ = writeln!(out, "{}", json!({ "error": e.to_string() }));
            }
            let _ = writeln!(err, "error: {e}");
            EXIT_DOMAIN
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<(), HostError> {
    let timeout = Duration::from_millis(cli.timeout_ms);
    if let Command::Simulate { listen } = &cli.command {
        return simulate(cli, listen, out);
    }
    let (board_map, board) = load_board(cli.map.as_deref(), cli.config.as_deref())?;
    let session = match &cli.transport {
        TransportArg::Sim => SessionConfig::in_process(booted_simulator(&board_map, &board)?),
        TransportArg::Tcp { host, port } => SessionConfig::tcp(host.clone(), *port),
    };
    let mut handle = bridge_init(HostConfig { session: session.with_timeout(timeout), board_map, board })?;
    let result = execute(&cli.command, &mut handle)?;
    let text = if cli.json { result.to_json().to_string() } else { result.to_text() };
    let _ = writeln!(out, "{text}");
    Ok(())
}

fn booted_simulator(map: &BoardMap, config: &BoardConfig) -> Result<Simulator, HostError> {
    let mut board = Board::new(map, config.clone()).map_err(|e| match e {
        SimError::Map(m) => HostError::Map(m),
        other => HostError::Config(ConfigError::Invalid(other.to_string())),
    })?;
    board.boot();
    Ok(Simulator::new(board))
}

fn simulate(cli: &Cli, listen: &str, out: &mut dyn Write) -> Result<(), HostError> {
    let (board_map, board) = load_board(cli.map.as_deref(), cli.config.as_deref())?;
    let sim = booted_simulator(&board_map, &board)?;
    let io = |source| HostError::Io { path: PathBuf::from(listen), source };
    let server = SimServer::bind(listen, sim).map_err(io)?;
    let addr = server.local_addr().map_err(io)?;
    let line = if cli.json { json!({ "listening": addr.to_string() }).to_string() } else { format!("listening on {addr}") };
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
    server.run().map_err(io)
}

/// What one device command produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Frequency(FrequencyPlan),
    Phase { channel: u8, plan: PhasePlan },
    Enabled { channel: u8, on: bool },
    Rail { rail: u8, setting: SupplySetting },
    RegRead { dev: u8, addr: u8, value: u8 },
    RegWrite { dev: u8, addr: u8, value: u8 },
    Status(DeviceStatus),
}

/// Runs one device command: exactly one host operation.
pub fn execute(command: &Command, handle: &mut DeviceHandle) -> Result<Outcome, HostError> {
    let synth = handle.config().synth_address;
    Ok(match command {
        Command::Simulate { .. } => unreachable!("handled before a handle exists"),
        Command::SetFreq { channel, hz } => Outcome::Frequency(handle.set_frequency(*channel, hz)?),
        Command::SetPhase(a) => {
            let req = match (&a.seconds, &a.degrees) {
                (Some(s), _) => PhaseRequest::Seconds(s.clone()),
                (None, Some(d)) => PhaseRequest::Degrees(d.clone()),
                (None, None) => unreachable!("clap requires one"),
            };
            Outcome::Phase { channel: a.channel, plan: handle.set_phase(a.channel, &req)? }
        }
        Command::Enable { channel } => {
            handle.enable_output(*channel, true)?;
            Outcome::Enabled { channel: *channel, on: true }
        }
        Command::Disable { channel } => {
            handle.enable_output(*channel, false)?;
            Outcome::Enabled { channel: *channel, on: false }
        }
        Command::SetRail { rail, volts } => Outcome::Rail { rail: *rail, setting: handle.set_rail_voltage(*rail, volts)? },
        Command::Reg(RegCommand::Read { addr, dev }) => {
            let dev = dev.unwrap_or(synth);
            Outcome::RegRead { dev, addr: *addr, value: handle.bridge_read(dev, *addr)? }
        }
        Command::Reg(RegCommand::Write { addr, value, dev }) => {
            let dev = dev.unwrap_or(synth);
            handle.bridge_write(dev, *addr, *value)?;
            Outcome::RegWrite { dev, addr: *addr, value: *value }
        }
        Command::Status => Outcome::Status(handle.status()?),
    })
}

/// `{"exact": "n/d", "value": float}`
fn num(r: &Rational) -> Value {
    json!({ "exact": Exact(r).to_string(), "value": to_f64(r) })
}

fn opt_num(r: Option<&Rational>) -> Value {
    r.map_or(Value::Null, num)
}

/// Exact when integral, otherwise the fraction followed by a decimal rendering.
fn show(r: &Rational) -> String {
    if r.is_integer() {
        Exact(r).to_string()
    } else {
        format!("{} (~{:.9e})", Exact(r), to_f64(r))
    }
}

impl Outcome {
    pub fn to_json(&self) -> Value {
        match self {
            Outcome::Frequency(p) => json!({
                "channel": p.channel,
                "f_target": num(&p.f_target),
                "f_achieved": num(&p.f_achieved),
                "f_vco": num(&p.f_vco),
                "rel_error": num(&p.rel_error),
                "feedback": num(&p.feedback.value()),
                "output": num(&p.output.value()),
                "kind": format!("{:?}", p.kind),
            }),
            Outcome::Phase { channel, plan } => json!({
                "channel": channel,
                "steps": plan.steps,
                "quantum": num(&plan.quantum),
                "offset_requested": num(&plan.offset_requested),
                "offset_achieved": num(&plan.offset_achieved),
                "residual": num(&plan.residual),
            }),
            Outcome::Enabled { channel, on } => json!({ "channel": channel, "enabled": on }),
            Outcome::Rail { rail, setting } => json!({
                "rail_id": rail,
                "code": setting.code,
                "v_predicted": num(&setting.v_predicted),
                "v_error": num(&setting.v_error),
            }),
            Outcome::RegRead { dev, addr, value } | Outcome::RegWrite { dev, addr, value } => json!({
                "dev": format!("{dev:#04x}"),
                "addr": format!("{addr:#04x}"),
                "value": format!("{value:#04x}"),
            }),
            Outcome::Status(s) => json!({
                "outputs": s.outputs.iter().map(|c| json!({
                    "channel": c.channel,
                    "enabled": c.enabled,
                    "f_out": opt_num(c.f_out.as_ref()),
                    "phase_steps": c.phase_steps,
                    "phase_offset": opt_num(c.phase_offset.as_ref()),
                    "f_vco": opt_num(c.f_vco.as_ref()),
                    "issue": c.issue.as_ref().map(|i| i.to_string()),
                })).collect::<Vec<_>>(),
                "rails": s.rails.iter().map(|r| json!({
                    "rail_id": r.rail_id,
                    "code": r.code,
                    "volts": num(&r.volts),
                })).collect::<Vec<_>>(),
            }),
        }
    }

    pub fn to_text(&self) -> String {
        match self {
            Outcome::Frequency(p) => format!(
                "channel {}: {} Hz (target {} Hz, rel error {}), feedback {}, output {}, vco {} Hz",
                p.channel,
                show(&p.f_achieved),
                show(&p.f_target),
                show(&p.rel_error),
                p.feedback,
                p.output,
                show(&p.f_vco)
            ),
            Outcome::Phase { channel, plan } => format!(
                "channel {channel}: {} steps, offset {} s (requested {} s)",
                plan.steps,
                show(&plan.offset_achieved),
                show(&plan.offset_requested)
            ),
            Outcome::Enabled { channel, on } => {
                format!("channel {channel}: {}", if *on { "enabled" } else { "disabled" })
            }
            Outcome::Rail { rail, setting } => format!(
                "rail {rail}: code {}, {} V (error {} V)",
                setting.code,
                show(&setting.v_predicted),
                show(&setting.v_error)
            ),
            Outcome::RegRead { value, .. } => format!("{value:#04X}").replace("0X", "0x"),
            Outcome::RegWrite { dev, addr, value } => format!("wrote {value:#04x} to {dev:#04x}:{addr:#04x}"),
            Outcome::Status(s) => {
                let mut lines = Vec::new();
                for c in &s.outputs {
                    let f = c.f_out.as_ref().map_or("-".to_string(), |f| format!("{} Hz", show(f)));
                    let ph = c.phase_offset.as_ref().map_or("-".to_string(), |p| format!("{} s", show(p)));
                    let mut line = format!(
                        "ch{} {} f_out {f} phase {} steps ({ph})",
                        c.channel,
                        if c.enabled { "on " } else { "off" },
                        c.phase_steps
                    );
                    if let Some(i) = &c.issue {
                        line.push_str(&format!(" [invalid: {i}]"));
                    }
                    lines.push(line);
                }
                for r in &s.rails {
                    lines.push(format!("rail{} code {:3} {} V", r.rail_id, r.code, show(&r.volts)));
                }
                lines.join("\n")
            }
        }
    }
}
