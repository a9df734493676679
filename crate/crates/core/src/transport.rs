//! Byte-stream sessions to a board: in-process to a [`Simulator`] or over TCP.
//!
//! The stream carries raw protocol bytes with no extra framing. A simulator
//! admits one session at a time.

use crate::sim::Simulator;
use std::io::{self, ErrorKind, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};
use thiserror::Error;

pub const DEFAULT_PORT: u16 = 53380;
pub const DEFAULT_READ_TIMEOUT: Duration = Duration::from_secs(1);
/// How long a fresh TCP connection waits for the server to refuse it.
const REFUSAL_GRACE: Duration = Duration::from_millis(50);

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("connection refused by {0}")]
    ConnectionRefused(String),
    #[error("a session is already open on this device")]
    AlreadyOpen,
    #[error("session closed")]
    SessionClosed,
    #[error("timed out waiting for {wanted} byte(s)")]
    Timeout { wanted: usize },
    #[error("peer disconnected")]
    Disconnected,
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone)]
pub enum Endpoint {
    InProcess(Simulator),
    Tcp { host: String, port: u16 },
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub endpoint: Endpoint,
    pub read_timeout: Duration,
}

impl SessionConfig {
    pub fn in_process(sim: Simulator) -> Self {
        SessionConfig { endpoint: Endpoint::InProcess(sim), read_timeout: DEFAULT_READ_TIMEOUT }
    }

    pub fn tcp(host: impl Into<String>, port: u16) -> Self {
        SessionConfig { endpoint: Endpoint::Tcp { host: host.into(), port }, read_timeout: DEFAULT_READ_TIMEOUT }
    }

    pub fn with_timeout(mut self, read_timeout: Duration) -> Self {
        self.read_timeout = read_timeout;
        self
    }
}

/// A bidirectional byte channel under a [`Session`].
pub trait Link: Send {
    fn send(&mut self, bytes: &[u8]) -> Result<(), TransportError>;
    /// Exactly `n` bytes or an error; bytes that arrived short of `n` stay
    /// buffered for the next call.
    fn recv(&mut self, n: usize, timeout: Duration) -> Result<Vec<u8>, TransportError>;
    fn shutdown(&mut self);
}

/// An exclusive, open byte stream. Closing is idempotent and happens on drop.
pub struct Session {
    link: Option<Box<dyn Link>>,
    read_timeout: Duration,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("open", &self.is_open())
            .field("read_timeout", &self.read_timeout)
            .finish()
    }
}

impl Session {
    pub fn open(config: &SessionConfig) -> Result<Session, TransportError> {
        if config.read_timeout.is_zero() {
            return Err(TransportError::InvalidConfig("read timeout must be positive".into()));
        }
        let link: Box<dyn Link> = match &config.endpoint {
            Endpoint::InProcess(sim) => Box::new(InProcessLink::open(sim.clone())?),
            Endpoint::Tcp { host, port } => Box::new(TcpLink::connect(host, *port)?),
        };
        Ok(Session::from_link(link, config.read_timeout))
    }

    /// Wraps an already-connected link.
    pub fn from_link(link: Box<dyn Link>, read_timeout: Duration) -> Session {
        Session { link: Some(link), read_timeout }
    }

    pub fn is_open(&self) -> bool {
        self.link.is_some()
    }

    pub fn read_timeout(&self) -> Duration {
        self.read_timeout
    }

    pub fn write_bytes(&mut self, bytes: &[u8]) -> Result<(), TransportError> {
        self.link.as_mut().ok_or(TransportError::SessionClosed)?.send(bytes)
    }

    pub fn read_bytes(&mut self, n: usize, timeout: Duration) -> Result<Vec<u8>, TransportError> {
        self.link.as_mut().ok_or(TransportError::SessionClosed)?.recv(n, timeout)
    }

    /// [`read_bytes`](Self::read_bytes) with the session's default timeout.
    pub fn read(&mut self, n: usize) -> Result<Vec<u8>, TransportError> {
        self.read_bytes(n, self.read_timeout)
    }

    pub fn close(&mut self) {
        if let Some(mut link) = self.link.take() {
            link.shutdown();
        }
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.close();
    }
}

/// Direct channel into a simulator in the same process.
///
/// Each write is ingested and the board is stepped until idle, so a read
/// either finds its bytes already queued or can never receive them; it then
/// fails with [`TransportError::Timeout`] without waiting.
pub struct InProcessLink {
    sim: Simulator,
}

impl InProcessLink {
    pub fn open(sim: Simulator) -> Result<Self, TransportError> {
        if !sim.try_acquire() {
            return Err(TransportError::AlreadyOpen);
        }
        Ok(InProcessLink { sim })
    }
}

impl Link for InProcessLink {
    fn send(&mut self, bytes: &[u8]) -> Result<(), TransportError> {
        let mut board = self.sim.board();
        board.ingest(bytes);
        board.run_until_idle();
        Ok(())
    }

    fn recv(&mut self, n: usize, _timeout: Duration) -> Result<Vec<u8>, TransportError> {
        let mut board = self.sim.board();
        if board.firmware().tx_len() < n {
            return Err(TransportError::Timeout { wanted: n });
        }
        Ok(board.take_tx(n))
    }

    fn shutdown(&mut self) {
        self.sim.release();
    }
}

pub struct TcpLink {
    stream: TcpStream,
    pending: Vec<u8>,
    closed: bool,
}

impl TcpLink {
    pub fn connect(host: &str, port: u16) -> Result<Self, TransportError> {
        let addrs: Vec<SocketAddr> = (host, port)
            .to_socket_addrs()
            .map_err(|e| TransportError::InvalidConfig(format!("{host}:{port}: {e}")))?
            .collect();
        let stream = TcpStream::connect(&addrs[..]).map_err(|e| match e.kind() {
            ErrorKind::ConnectionRefused => TransportError::ConnectionRefused(format!("{host}:{port}")),
            _ => TransportError::Io(e),
        })?;
        stream.set_nodelay(true)?;
        // A busy server closes extra connections straight away.
        stream.set_read_timeout(Some(REFUSAL_GRACE))?;
        let mut probe = [0u8; 1];
        match stream.peek(&mut probe) {
            Ok(0) => return Err(TransportError::AlreadyOpen),
            Ok(_) => {}
            Err(e) if is_timeout(&e) => {}
            Err(e) if e.kind() == ErrorKind::ConnectionReset => return Err(TransportError::AlreadyOpen),
            Err(e) => return Err(e.into()),
        }
        Ok(TcpLink { stream, pending: Vec::new(), closed: false })
    }
}

fn is_timeout(e: &io::Error) -> bool {
    matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut)
}

impl Link for TcpLink {
    fn send(&mut self, bytes: &[u8]) -> Result<(), TransportError> {
        if self.closed {
            return Err(TransportError::Disconnected);
        }
        self.stream.write_all(bytes).map_err(|e| match e.kind() {
            ErrorKind::BrokenPipe | ErrorKind::ConnectionReset => TransportError::Disconnected,
            _ => TransportError::Io(e),
        })
    }

    fn recv(&mut self, n: usize, timeout: Duration) -> Result<Vec<u8>, TransportError> {
        let deadline = Instant::now() + timeout;
        let mut chunk = [0u8; 256];
        while self.pending.len() < n {
            if self.closed {
                return Err(TransportError::Disconnected);
            }
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Err(TransportError::Timeout { wanted: n });
            }
            self.stream.set_read_timeout(Some(left))?;
            match self.stream.read(&mut chunk) {
                Ok(0) => self.closed = true,
                Ok(k) => self.pending.extend_from_slice(&chunk[..k]),
                Err(e) if is_timeout(&e) => return Err(TransportError::Timeout { wanted: n }),
                Err(e) if e.kind() == ErrorKind::Interrupted => {}
                Err(e) if e.kind() == ErrorKind::ConnectionReset => self.closed = true,
                Err(e) => return Err(e.into()),
            }
        }
        Ok(self.pending.drain(..n).collect())
    }

    fn shutdown(&mut self) {
        let _ = self.stream.shutdown(Shutdown::Both);
        self.closed = true;
    }
}

/// Serves a simulator on a TCP listener, one session at a time. Connections
/// arriving while a session is open are closed immediately.
pub struct SimServer {
    listener: TcpListener,
    sim: Simulator,
}

impl SimServer {
    pub fn bind(addr: impl ToSocketAddrs, sim: Simulator) -> io::Result<Self> {
        Ok(SimServer { listener: TcpListener::bind(addr)?, sim })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn simulator(&self) -> &Simulator {
        &self.sim
    }

    /// Accept loop; returns only on a listener error.
    pub fn run(self) -> io::Result<()> {
        for conn in self.listener.incoming() {
            let stream = match conn {
                Ok(s) => s,
                Err(e) if e.kind() == ErrorKind::ConnectionAborted => continue,
                Err(e) => return Err(e),
            };
            if !self.sim.try_acquire() {
                let _ = stream.shutdown(Shutdown::Both);
                continue;
            }
            let sim = self.sim.clone();
            thread::spawn(move || {
                let _ = serve_connection(&sim, stream);
                sim.release();
            });
        }
        Ok(())
    }

    pub fn spawn(self) -> JoinHandle<io::Result<()>> {
        thread::spawn(move || self.run())
    }
}

fn serve_connection(sim: &Simulator, mut stream: TcpStream) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let mut buf = [0u8; 4096];
    loop {
        let k = match stream.read(&mut buf) {
            Ok(0) => return Ok(()),
            Ok(k) => k,
            Err(e) if e.kind() == ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        };
        let out = {
            let mut board = sim.board();
            board.ingest(&buf[..k]);
            board.run_until_idle();
            let queued = board.firmware().tx_len();
            board.take_tx(queued)
        };
        if !out.is_empty() {
            stream.write_all(&out)?;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::{encode_command, BridgeCommand};

    fn cmd(c: BridgeCommand) -> [u8; 4] {
        encode_command(&c).unwrap()
    }

    #[test]
    fn in_process_exclusive_and_reopen() {
        let sim = Simulator::with_defaults();
        let cfg = SessionConfig::in_process(sim.clone());
        let mut s = Session::open(&cfg).unwrap();
        assert!(matches!(Session::open(&cfg), Err(TransportError::AlreadyOpen)));
        s.close();
        s.close();
        assert!(matches!(s.write_bytes(&[0]), Err(TransportError::SessionClosed)));
        assert!(matches!(s.read(1), Err(TransportError::SessionClosed)));
        let _again = Session::open(&cfg).unwrap();
    }

    #[test]
    fn zero_timeout_rejected() {
        let cfg = SessionConfig::in_process(Simulator::with_defaults()).with_timeout(Duration::ZERO);
        assert!(matches!(Session::open(&cfg), Err(TransportError::InvalidConfig(_))));
    }

    #[test]
    fn stream_semantics_and_fifo_order() {
        let sim = Simulator::with_defaults();
        let mut s = Session::open(&SessionConfig::in_process(sim.clone())).unwrap();
        let mut bytes = cmd(BridgeCommand::write(0x70, 0x06, 0x11)).to_vec();
        bytes.extend(cmd(BridgeCommand::write(0x70, 0x1D, 0x22)));
        s.write_bytes(&bytes[..3]).unwrap();
        s.write_bytes(&bytes[3..]).unwrap();
        s.write_bytes(&cmd(BridgeCommand::read(0x70, 0x06))).unwrap();
        s.write_bytes(&cmd(BridgeCommand::read(0x70, 0x1D))).unwrap();
        assert_eq!(s.read(1).unwrap(), vec![0x11]);
        assert_eq!(s.read(1).unwrap(), vec![0x22]);
        assert!(matches!(s.read(1), Err(TransportError::Timeout { wanted: 1 })));
    }

    #[test]
    fn close_discards_unread_response() {
        let sim = Simulator::with_defaults();
        let cfg = SessionConfig::in_process(sim.clone());
        let mut s = Session::open(&cfg).unwrap();
        s.write_bytes(&cmd(BridgeCommand::write(0x70, 0x06, 0x77))).unwrap();
        s.write_bytes(&cmd(BridgeCommand::read(0x70, 0x06))).unwrap();
        s.write_bytes(&[0xFF, 0x70]).unwrap();
        drop(s);
        assert_eq!(sim.board().firmware().tx_len(), 0);
        assert_eq!(sim.board().firmware().rx_buffered(), 0);
        let mut s = Session::open(&cfg).unwrap();
        assert!(matches!(s.read(1), Err(TransportError::Timeout { .. })));
        s.write_bytes(&cmd(BridgeCommand::read(0x70, 0x06))).unwrap();
        assert_eq!(s.read(1).unwrap(), vec![0x77]);
    }

    #[test]
    fn tcp_refused_without_listener() {
        let port = {
            let l = TcpListener::bind("127.0.0.1:0").unwrap();
            l.local_addr().unwrap().port()
        };
        let err = Session::open(&SessionConfig::tcp("127.0.0.1", port)).unwrap_err();
        assert!(matches!(err, TransportError::ConnectionRefused(_)), "{err:?}");
    }

    #[test]
    fn tcp_round_trip_exclusivity_and_timeout() {
        let server = SimServer::bind("127.0.0.1:0", Simulator::with_defaults()).unwrap();
        let addr = server.local_addr().unwrap();
        server.spawn();
        let cfg = SessionConfig::tcp("127.0.0.1", addr.port()).with_timeout(Duration::from_millis(200));
        let mut s = Session::open(&cfg).unwrap();
        assert!(matches!(Session::open(&cfg), Err(TransportError::AlreadyOpen)));
        s.write_bytes(&cmd(BridgeCommand::write(0x70, 0x06, 0x5A))).unwrap();
        s.write_bytes(&cmd(BridgeCommand::read(0x70, 0x06))).unwrap();
        assert_eq!(s.read(1).unwrap(), vec![0x5A]);
        assert!(matches!(s.read(1), Err(TransportError::Timeout { .. })));
        s.close();
        // The server frees the slot once it sees the disconnect.
        let deadline = Instant::now() + Duration::from_secs(5);
        let mut s = loop {
            match Session::open(&cfg) {
                Ok(s) => break s,
                Err(TransportError::AlreadyOpen) if Instant::now() < deadline => {
                    thread::sleep(Duration::from_millis(10))
                }
                Err(e) => panic!("{e}"),
            }
        };
        s.write_bytes(&cmd(BridgeCommand::read(0x70, 0x06))).unwrap();
        assert_eq!(s.read(1).unwrap(), vec![0x5A]);
    }
}
