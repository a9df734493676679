//! The device layer over a real TCP socket to the simulator server.

use clockgen::freq::PhaseRequest;
use clockgen::host::{bridge_init, HostConfig};
use clockgen::rational::{int, ratio};
use clockgen::sim::Simulator;
use clockgen::transport::{SessionConfig, SimServer, TransportError};
use clockgen::{BridgeError, HostError};
use std::time::Duration;

fn serve() -> (Simulator, u16) {
    let sim = Simulator::with_defaults();
    let server = SimServer::bind("127.0.0.1:0", sim.clone()).unwrap();
    let port = server.local_addr().unwrap().port();
    server.spawn();
    (sim, port)
}

fn tcp(port: u16) -> HostConfig {
    HostConfig::new(SessionConfig::tcp("127.0.0.1", port).with_timeout(Duration::from_millis(500)))
}

#[test]
fn host_over_tcp_matches_simulator() {
    let (sim, port) = serve();
    let mut h = bridge_init(tcp(port)).unwrap();
    let plan = h.set_frequency(0, &int(100_000_000)).unwrap();
    assert!(plan.is_exact());
    h.set_frequency(1, &ratio(3_141_592_653, 100)).unwrap();
    h.set_phase(1, &PhaseRequest::Degrees(int(90))).unwrap();
    h.set_rail_voltage(2, &ratio(33, 10)).unwrap();
    let status = h.status().unwrap();
    assert_eq!(status.outputs, sim.board().query_outputs());
    assert_eq!(status.rails, sim.board().query_rails());
    assert_eq!(status.outputs[0].f_out, Some(int(100_000_000)));
}

#[test]
fn second_handle_is_refused_until_close() {
    let (_sim, port) = serve();
    let h = bridge_init(tcp(port)).unwrap();
    let err = bridge_init(tcp(port)).unwrap_err();
    assert!(matches!(err, HostError::Bridge(BridgeError::Transport(TransportError::AlreadyOpen))), "{err:?}");
    h.close();
    let mut reopened = None;
    for _ in 0..200 {
        match bridge_init(tcp(port)) {
            Ok(h) => {
                reopened = Some(h);
                break;
            }
            Err(_) => std::thread::sleep(Duration::from_millis(10)),
        }
    }
    let mut h = reopened.expect("server frees the session after close");
    assert_eq!(h.bridge_read(0x70, 0x02).unwrap(), 0x53);
}
