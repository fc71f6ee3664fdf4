//! Scriptable HTTP advisor for tests and offline runs.

use std::path::Path;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{WireRequest, WireResponse};
use crate::error::{Error, Result};

/// One scripted reply to a block query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockReply {
    #[serde(default = "ok_status")]
    pub status: u16,
    #[serde(default)]
    pub text: String,
    /// Raw body sent instead of `{"text": ...}` when present.
    #[serde(default)]
    pub body: Option<String>,
    #[serde(default)]
    pub delay_ms: u64,
}

fn ok_status() -> u16 {
    200
}

fn default_verify() -> String {
    "Yes".into()
}

impl MockReply {
    pub fn text(text: impl Into<String>) -> Self {
        Self { status: 200, text: text.into(), body: None, delay_ms: 0 }
    }

    pub fn status(status: u16) -> Self {
        Self { status, text: String::new(), body: None, delay_ms: 0 }
    }
}

/// Replies are consumed in order by block queries; the last one repeats.
/// Presence checks always get `verify_answer`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockScript {
    pub answers: Vec<MockReply>,
    #[serde(default = "default_verify")]
    pub verify_answer: String,
}

impl MockScript {
    pub fn from_texts<S: Into<String>>(texts: impl IntoIterator<Item = S>) -> Self {
        Self { answers: texts.into_iter().map(MockReply::text).collect(), verify_answer: default_verify() }
    }

    /// Parse a script file: either JSON, or plain text with one answer per line.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            return Ok(serde_json::from_str(text)?);
        }
        let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        if lines.is_empty() {
            return Err(Error::Config("advisor script has no answers".into()));
        }
        Ok(Self::from_texts(lines))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// A request as seen by the mock server.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecordedRequest {
    pub prompt: String,
    pub excluded_ids: Vec<u32>,
    pub image_len: usize,
}

impl RecordedRequest {
    pub fn is_verify(&self) -> bool {
        self.prompt.starts_with("Is there")
    }
}

pub struct MockServer {
    server: Arc<tiny_http::Server>,
    addr: std::net::SocketAddr,
    requests: Arc<Mutex<Vec<RecordedRequest>>>,
    handle: Option<JoinHandle<()>>,
}

impl MockServer {
    /// Serve on an ephemeral localhost port.
    pub fn start(script: MockScript) -> Result<Self> {
        Self::bind("127.0.0.1:0", script)
    }

    pub fn bind(addr: &str, script: MockScript) -> Result<Self> {
        let server = tiny_http::Server::http(addr)
            .map_err(|e| Error::Io(std::io::Error::new(std::io::ErrorKind::Other, e.to_string())))?;
        let server = Arc::new(server);
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| Error::Config("mock advisor must listen on an IP address".into()))?;
        let requests = Arc::new(Mutex::new(Vec::new()));
        let handle = {
            let server = Arc::clone(&server);
            let requests = Arc::clone(&requests);
            std::thread::spawn(move || serve(&server, &script, &requests))
        };
        Ok(Self { server, addr, requests, handle: Some(handle) })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.requests.lock().unwrap().clone()
    }

    /// Block until the server stops (it only stops when dropped elsewhere).
    pub fn wait(mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn serve(server: &tiny_http::Server, script: &MockScript, requests: &Mutex<Vec<RecordedRequest>>) {
    let mut next = 0usize;
    for mut req in server.incoming_requests() {
        let mut body = String::new();
        let parsed = req
            .as_reader()
            .read_to_string(&mut body)
            .ok()
            .and_then(|_| serde_json::from_str::<WireRequest>(&body).ok());
        let Some(wire) = parsed.filter(|_| req.url() == "/query") else {
            let _ = req.respond(tiny_http::Response::from_string("bad request").with_status_code(400));
            continue;
        };
        let record = RecordedRequest {
            prompt: wire.prompt.clone(),
            excluded_ids: wire.excluded_ids.clone(),
            image_len: wire.image().map(|i| i.len()).unwrap_or(0),
        };
        let verify = record.is_verify();
        requests.lock().unwrap().push(record);
        let reply = if verify {
            MockReply::text(script.verify_answer.clone())
        } else {
            let r = script.answers.get(next.min(script.answers.len().saturating_sub(1))).cloned();
            next += 1;
            r.unwrap_or_else(|| MockReply::text(""))
        };
        if reply.delay_ms > 0 {
            std::thread::sleep(Duration::from_millis(reply.delay_ms));
        }
        let body = reply
            .body
            .clone()
            .unwrap_or_else(|| serde_json::to_string(&WireResponse { text: reply.text.clone() }).unwrap());
        let header = tiny_http::Header::from_bytes("Content-Type", "application/json").unwrap();
        let _ = req.respond(tiny_http::Response::from_string(body).with_status_code(reply.status).with_header(header));
    }
}
