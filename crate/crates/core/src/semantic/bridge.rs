//! Line-delimited JSON protocol for out-of-process providers: a client that
//! drives a child process, and a server loop exposing any native provider.
//!
//! The child first prints `{"ready": true, "provider": NAME}`. Each request
//! is one line `{"id", "mode", "text", "masked_indices", "segment_len",
//! "num_candidates"}`; each response is `{"id", "outputs", "error"}`.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{CandidateProvider, CorrectionRequest, Mode, MASK};
use crate::error::{Error, Result};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Serialize)]
struct WireRequest<'a> {
    id: u64,
    mode: Mode,
    text: &'a str,
    masked_indices: &'a [usize],
    segment_len: usize,
    num_candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub id: Option<u64>,
    #[serde(default)]
    pub outputs: Vec<String>,
    #[serde(default)]
    pub error: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Handshake {
    ready: bool,
    provider: String,
}

#[derive(Debug, Deserialize)]
struct IncomingRequest {
    id: u64,
    mode: Mode,
    text: String,
    #[serde(default)]
    masked_indices: Vec<usize>,
    segment_len: usize,
    #[serde(default = "one")]
    num_candidates: usize,
}

fn one() -> usize {
    1
}

struct Channel {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
    dead: Option<String>,
}

/// A provider living in a child process. Requests are serialized through an
/// internal lock; open several instances for parallelism.
pub struct ExternalProvider {
    name: String,
    timeout: Duration,
    channel: Mutex<Channel>,
}

impl std::fmt::Debug for ExternalProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalProvider").field("name", &self.name).finish()
    }
}

fn perr(msg: impl Into<String>) -> Error {
    Error::Provider(msg.into())
}

impl ExternalProvider {
    /// Starts `command` (program followed by arguments) and waits for its
    /// handshake.
    pub fn spawn(command: &[String], timeout: Duration) -> Result<Self> {
        let (program, args) = command.split_first().ok_or_else(|| perr("empty provider command"))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| perr(format!("cannot start {program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let eof = line.is_err();
                if tx.send(line).is_err() || eof {
                    break;
                }
            }
        });
        let mut channel = Channel { child, stdin, lines: rx, next_id: 0, dead: None };
        let first = channel.recv(timeout)?;
        let hs: Handshake = serde_json::from_str(&first).map_err(|e| {
            channel.kill("bad handshake");
            perr(format!("bad handshake {first:?}: {e}"))
        })?;
        if !hs.ready {
            channel.kill("not ready");
            return Err(perr("provider reported ready = false"));
        }
        Ok(ExternalProvider { name: hs.provider, timeout, channel: Mutex::new(channel) })
    }

    /// Sends one request and returns the outputs of the matching response.
    pub fn request(&self, req: &CorrectionRequest) -> Result<Vec<String>> {
        let mut ch = self.channel.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(reason) = &ch.dead {
            return Err(perr(format!("provider unavailable: {reason}")));
        }
        let id = ch.next_id;
        ch.next_id += 1;
        let wire = WireRequest {
            id,
            mode: req.mode,
            text: &req.text,
            masked_indices: &req.masked_indices,
            segment_len: req.segment_len,
            num_candidates: req.num_candidates,
        };
        let line = serde_json::to_string(&wire).map_err(|e| perr(e.to_string()))?;
        if let Err(e) = writeln!(ch.stdin, "{line}").and_then(|_| ch.stdin.flush()) {
            ch.kill("write failed");
            return Err(perr(format!("write to provider failed: {e}")));
        }
        loop {
            let line = ch.recv(self.timeout)?;
            let resp: WireResponse = match serde_json::from_str(&line) {
                Ok(r) => r,
                Err(e) => return Err(perr(format!("malformed response {line:?}: {e}"))),
            };
            // stale answers to abandoned requests are skipped
            if resp.id != Some(id) {
                continue;
            }
            if let Some(err) = resp.error {
                return Err(perr(err));
            }
            return Ok(resp.outputs);
        }
    }
}

impl Channel {
    fn recv(&mut self, timeout: Duration) -> Result<String> {
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => {
                self.kill("read failed");
                Err(perr(format!("read from provider failed: {e}")))
            }
            Err(RecvTimeoutError::Timeout) => {
                self.kill("timed out");
                Err(perr("provider timed out"))
            }
            Err(RecvTimeoutError::Disconnected) => {
                self.kill("exited");
                Err(perr("provider exited"))
            }
        }
    }

    fn kill(&mut self, reason: &str) {
        self.dead = Some(reason.to_string());
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for ExternalProvider {
    fn drop(&mut self) {
        let ch = self.channel.get_mut().unwrap_or_else(|p| p.into_inner());
        if ch.dead.is_none() {
            ch.kill("dropped");
        }
    }
}

impl CandidateProvider for ExternalProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn correct(&self, request: &CorrectionRequest) -> Result<String> {
        let mut out = self.request(request)?;
        if out.len() != 1 {
            return Err(perr(format!("correct returned {} outputs", out.len())));
        }
        Ok(out.remove(0))
    }

    fn fill(&self, request: &CorrectionRequest) -> Result<Vec<String>> {
        let mut out = self.request(request)?;
        if out.is_empty() {
            return Err(perr("fill returned no outputs"));
        }
        if out.iter().any(|s| s.contains(MASK)) {
            return Err(perr("fill output still contains a placeholder"));
        }
        out.truncate(request.num_candidates);
        while out.len() < request.num_candidates {
            out.push(out[0].clone());
        }
        Ok(out)
    }
}

/// Answers protocol requests from `input` with `provider` until EOF.
pub fn serve<P: CandidateProvider + ?Sized>(provider: &P, input: impl BufRead, mut output: impl Write) -> Result<()> {
    let hs = Handshake { ready: true, provider: provider.name().to_string() };
    writeln!(output, "{}", serde_json::to_string(&hs).expect("serializable"))?;
    output.flush()?;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = match serde_json::from_str::<IncomingRequest>(&line) {
            Ok(r) => {
                let req = CorrectionRequest {
                    mode: r.mode,
                    text: r.text,
                    masked_indices: r.masked_indices,
                    segment_len: r.segment_len,
                    num_candidates: r.num_candidates,
                };
                let result = match req.mode {
                    Mode::Correct => provider.correct(&req).map(|s| vec![s]),
                    Mode::Fill => provider.fill(&req),
                };
                match result {
                    Ok(outputs) => WireResponse { id: Some(r.id), outputs, error: None },
                    Err(e) => WireResponse { id: Some(r.id), outputs: Vec::new(), error: Some(e.to_string()) },
                }
            }
            Err(e) => {
                // echo the id when the line is JSON with a usable id
                let id = serde_json::from_str::<serde_json::Value>(&line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(|i| i.as_u64()));
                WireResponse { id, outputs: Vec::new(), error: Some(format!("malformed request: {e}")) }
            }
        };
        writeln!(output, "{}", serde_json::to_string(&resp).expect("serializable"))?;
        output.flush()?;
    }
    Ok(())
}
