//! Each subcommand issues the same bus traffic as the one host operation it
//! wraps.

use clap::Parser;
use clockgen::freq::PhaseRequest;
use clockgen::rational::{int, ratio};
use clockgen::sim::Simulator;
use clockgen::transport::{InProcessLink, Link, Session, TransportError};
use clockgen::{BoardConfig, DeviceHandle};
use clockgen_cli::{execute, Cli};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

struct Counting {
    inner: InProcessLink,
    frames: Arc<AtomicUsize>,
}

impl Link for Counting {
    fn send(&mut self, bytes: &[u8]) -> Result<(), TransportError> {
        self.frames.fetch_add(bytes.len() / 4, Ordering::SeqCst);
        self.inner.send(bytes)
    }
    fn recv(&mut self, n: usize, t: Duration) -> Result<Vec<u8>, TransportError> {
        self.inner.recv(n, t)
    }
    fn shutdown(&mut self) {
        self.inner.shutdown()
    }
}

fn handle() -> (DeviceHandle, Arc<AtomicUsize>) {
    let sim = Simulator::with_defaults();
    let frames = Arc::new(AtomicUsize::new(0));
    let link = Counting { inner: InProcessLink::open(sim).unwrap(), frames: frames.clone() };
    let session = Session::from_link(Box::new(link), Duration::from_secs(1));
    let h = DeviceHandle::attach(session, clockgen::default_board_map(), BoardConfig::default()).unwrap();
    frames.store(0, Ordering::SeqCst);
    (h, frames)
}

fn via_cli(setup: &[&[&str]], args: &[&str]) -> usize {
    let (mut h, frames) = handle();
    for s in setup {
        execute(&Cli::parse_from(s.iter()).command, &mut h).unwrap();
    }
    frames.store(0, Ordering::SeqCst);
    execute(&Cli::parse_from(args.iter()).command, &mut h).unwrap();
    frames.load(Ordering::SeqCst)
}

fn direct(setup: impl FnOnce(&mut DeviceHandle), op: impl FnOnce(&mut DeviceHandle)) -> usize {
    let (mut h, frames) = handle();
    setup(&mut h);
    frames.store(0, Ordering::SeqCst);
    op(&mut h);
    frames.load(Ordering::SeqCst)
}

#[test]
fn subcommand_traffic_matches_host_operation() {
    let freq: &[&str] = &["clockgen", "set-freq", "--channel", "1", "--hz", "123.456789M"];
    let n = via_cli(&[], freq);
    assert!(n > 0);
    assert_eq!(n, direct(|_| {}, |h| {
        h.set_frequency(1, &ratio(123_456_789, 1)).unwrap();
    }));

    let n = via_cli(&[freq], &["clockgen", "set-phase", "--channel", "1", "--seconds", "1n"]);
    assert_eq!(n, direct(
        |h| {
            h.set_frequency(1, &ratio(123_456_789, 1)).unwrap();
        },
        |h| {
            h.set_phase(1, &PhaseRequest::Seconds(ratio(1, 1_000_000_000))).unwrap();
        }
    ));

    let n = via_cli(&[], &["clockgen", "enable", "--channel", "3"]);
    assert_eq!(n, direct(|_| {}, |h| h.enable_output(3, true).unwrap()));

    let n = via_cli(&[], &["clockgen", "set-rail", "--rail", "4", "--volts", "2"]);
    assert_eq!(n, direct(|_| {}, |h| {
        h.set_rail_voltage(4, &int(2)).unwrap();
    }));

    assert_eq!(via_cli(&[], &["clockgen", "reg", "read", "6"]), 1);
    assert_eq!(via_cli(&[], &["clockgen", "reg", "write", "6", "7"]), 1);

    let n = via_cli(&[], &["clockgen", "status"]);
    assert_eq!(n, direct(|_| {}, |h| {
        h.status().unwrap();
    }));
}
