#![allow(dead_code)]

use std::fs;
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde_json::Value;
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

use ps2f_cli::commands::{LogFormat, RunOptions};
use ps2f_cli::configs;
use ps2f_cli::wire::TelemetryFrame;

pub fn options(out: &Path) -> RunOptions {
    RunOptions {
        config: None,
        out: out.to_path_buf(),
        steps: None,
        grid: Some(0),
        assertions: true,
        format: LogFormat::Csv,
        timings: false,
    }
}

/// Double-integrator config with the terminal ingredients removed.
pub fn no_terminal_config(dir: &Path, n: usize, m: usize) -> PathBuf {
    let mut spec: Value = serde_json::from_str(configs::CASE1_JSON).unwrap();
    spec["Xf"] = serde_json::json!({ "kind": "none" });
    spec["N"] = n.into();
    spec["M"] = m.into();
    spec["cost"]["P_f"] = serde_json::json!([[0.0, 0.0], [0.0, 0.0]]);
    let path = dir.join(format!("no_terminal_{n}_{m}.json"));
    fs::write(&path, spec.to_string()).unwrap();
    path
}

pub fn linear_config(dir: &Path, name: &str, a: &[&[f64]], b: &[&[f64]], q: &[&[f64]], r: &[&[f64]]) -> PathBuf {
    let n = a.len();
    let m = r.len();
    let spec = serde_json::json!({
        "model": { "kind": "linear", "state_dim": n, "input_dim": m, "A": a, "B": b },
        "N": 3, "M": 1, "a": 0.5,
        "cost": { "Q": q, "R": r },
        "X": { "lower": vec![-1.0; n], "upper": vec![1.0; n] },
        "U": { "lower": vec![-1.0; m], "upper": vec![1.0; m] },
        "Xf": { "kind": "ellipsoid" }
    });
    let path = dir.join(name);
    fs::write(&path, spec.to_string()).unwrap();
    path
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Scripted WebSocket client.
pub struct Client {
    ws: WebSocket<MaybeTlsStream<TcpStream>>,
    pending: Vec<Value>,
}

impl Client {
    pub fn connect(addr: std::net::SocketAddr) -> Self {
        let (ws, _) = tungstenite::connect(format!("ws://{addr}")).expect("connect");
        if let MaybeTlsStream::Plain(s) = ws.get_ref() {
            s.set_read_timeout(Some(Duration::from_millis(20))).unwrap();
        }
        Self { ws, pending: Vec::new() }
    }

    pub fn send(&mut self, text: &str) {
        self.ws.send(Message::Text(text.to_string())).expect("send");
    }

    /// Next message within `timeout`.
    pub fn next(&mut self, timeout: Duration) -> Option<Value> {
        let start = Instant::now();
        loop {
            if !self.pending.is_empty() {
                return Some(self.pending.remove(0));
            }
            if start.elapsed() > timeout {
                return None;
            }
            match self.ws.read() {
                Ok(Message::Text(text)) => {
                    for line in text.lines().filter(|l| !l.trim().is_empty()) {
                        self.pending.push(serde_json::from_str(line).expect("outbound lines are JSON"));
                    }
                }
                Ok(_) => {}
                Err(tungstenite::Error::Io(e))
                    if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => {}
                Err(e) => panic!("client read failed: {e}"),
            }
        }
    }

    pub fn next_frame(&mut self, timeout: Duration) -> Option<TelemetryFrame> {
        let start = Instant::now();
        while let Some(v) = self.next(timeout.saturating_sub(start.elapsed())) {
            if v["type"] == "frame" {
                return Some(serde_json::from_value(v).expect("frame schema"));
            }
        }
        None
    }

    pub fn frames(&mut self, count: usize) -> Vec<TelemetryFrame> {
        (0..count).map(|_| self.next_frame(Duration::from_secs(30)).expect("frame arrives")).collect()
    }

    pub fn close(mut self) {
        let _ = self.ws.close(None);
        let _ = self.ws.flush();
    }
}
