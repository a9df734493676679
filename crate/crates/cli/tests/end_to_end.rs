//! Drives the `clockgen` binary against a `clockgen simulate` server.

use serde_json::Value;
use std::io::{BufRead, BufReader};
use std::process::{Child, Command, Output, Stdio};

const BIN: &str = env!("CARGO_BIN_EXE_clockgen");

struct Server {
    child: Child,
    transport: String,
}

impl Server {
    fn start() -> Server {
        let mut child = Command::new(BIN)
            .args(["simulate", "--listen", "127.0.0.1:0"])
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .expect("spawn simulator");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let addr = line.trim().strip_prefix("listening on ").expect("listening line").to_string();
        Server { child, transport: format!("tcp:{addr}") }
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(BIN).arg("--transport").arg(&self.transport).args(args).output().unwrap()
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn set_freq_then_status() {
    let srv = Server::start();
    let o = srv.run(&["set-freq", "--channel", "0", "--hz", "200000000"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let o = srv.run(&["status"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.lines().next().unwrap().starts_with("ch0 on  f_out 200000000 Hz"), "{text}");

    let o = srv.run(&["--json", "status"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["outputs"][0]["f_out"]["exact"], "200000000");
    assert_eq!(v["outputs"][0]["enabled"], true);
    assert_eq!(v["outputs"][1]["enabled"], false);
    assert_eq!(v["rails"].as_array().unwrap().len(), 5);
}

#[test]
fn out_of_band_is_exit_one() {
    let srv = Server::start();
    let o = srv.run(&["set-freq", "--channel", "0", "--hz", "1000000"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("outside the supported output band"));
}

#[test]
fn register_echo() {
    let srv = Server::start();
    assert_eq!(srv.run(&["reg", "write", "0x06", "0x5A"]).status.code(), Some(0));
    let o = srv.run(&["reg", "read", "0x06"]);
    assert_eq!(stdout(&o).trim(), "0x5A");
    let o = srv.run(&["reg", "read", "0x00", "--dev", "2c"]);
    assert_eq!(stdout(&o).trim(), "0xD1");
    let o = srv.run(&["reg", "read", "0x00", "--dev", "5a"]);
    assert_eq!(stdout(&o).trim(), "0xFF");
}

#[test]
fn phase_and_enable_across_invocations() {
    let srv = Server::start();
    srv.run(&["set-freq", "--channel", "2", "--hz", "125M"]);
    let o = srv.run(&["--json", "set-phase", "--channel", "2", "--degrees", "-45"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    // 125 MHz sits on a 2.25 GHz VCO: -45 degrees is -2.25 periods.
    assert_eq!(v["steps"], -2);
    assert_eq!(srv.run(&["disable", "--channel", "2"]).status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&srv.run(&["--json", "status"]))).unwrap();
    assert_eq!(v["outputs"][2]["enabled"], false);
    assert_eq!(v["outputs"][2]["f_out"], Value::Null);
    assert_eq!(v["outputs"][2]["phase_steps"], -2);
}

#[test]
fn unreachable_server_is_exit_one() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let o = Command::new(BIN).args(["--transport", &format!("tcp:127.0.0.1:{port}"), "status"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("connection refused"));
}

#[test]
fn usage_error_is_exit_two() {
    let o = Command::new(BIN).args(["set-rail", "--rail", "0"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}
