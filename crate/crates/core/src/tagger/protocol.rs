//! Line-delimited JSON protocol for external taggers and classifiers.
//!
//! ```text
//! -> {"id": "r-0", "task": "tag", "tokens": ["the", "radar", "failed"]}
//! <- {"id": "r-0", "tags": ["O", "C", "C"]}
//! -> {"id": "r-1", "task": "classify", "tokens": ["aeb", "fired"]}
//! <- {"id": "r-1", "label": "adas", "probability": 0.93}
//! <- {"id": "r-2", "error": "model not loaded"}
//! ```
//!
//! Responses may come back in any order; empty lines are ignored.

use std::collections::HashMap;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::CrfModel;
use crate::classifier::LinearClassifier;
use crate::corpus::Tag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Tag,
    Classify,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub id: String,
    pub task: Task,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Response {
    Tags { id: String, tags: Vec<Tag> },
    Label { id: String, label: String, probability: f64 },
    Error { id: String, error: String },
}

impl Response {
    pub fn id(&self) -> &str {
        match self {
            Response::Tags { id, .. } | Response::Label { id, .. } | Response::Error { id, .. } => id,
        }
    }

    pub fn error(id: impl Into<String>, message: impl Into<String>) -> Self {
        Response::Error {
            id: id.into(),
            error: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("request {id}: adapter returned {found} tags for {expected} tokens")]
    LengthMismatch { id: String, expected: usize, found: usize },
    #[error("request {id}: unknown tag {tag:?}")]
    UnknownTag { id: String, tag: String },
    #[error("request {id}: unknown label {label:?}")]
    UnknownLabel { id: String, label: String },
    #[error("request {id}: adapter error: {message}")]
    Adapter { id: String, message: String },
    #[error("request {id}: response of the wrong kind")]
    WrongKind { id: String },
    #[error("response for unknown or already answered id {0:?}")]
    UnexpectedId(String),
    #[error("malformed response line {line:?}: {reason}")]
    Malformed { line: String, reason: String },
    #[error("no response within {0:?}")]
    Timeout(Duration),
    #[error("adapter closed the stream")]
    Closed,
    #[error("adapter failed {failed} of {total} conformance checks")]
    Nonconformant { failed: usize, total: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl ProtocolError {
    /// Timeouts may succeed on retry; every other error is a contract violation.
    pub fn is_retryable(&self) -> bool {
        matches!(self, ProtocolError::Timeout(_))
    }
}

/// Where an adapter lives: a shell command spoken to over stdio, or a TCP address.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Command(String),
    Tcp(String),
}

impl Endpoint {
    /// `tcp://host:port` selects TCP; anything else is run as a command.
    pub fn parse(endpoint: &str) -> Self {
        match endpoint.strip_prefix("tcp://") {
            Some(addr) => Endpoint::Tcp(addr.to_string()),
            None => Endpoint::Command(endpoint.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClientOptions {
    pub timeout_ms: u64,
    pub max_in_flight: usize,
}

impl Default for ClientOptions {
    fn default() -> Self {
        Self {
            timeout_ms: 30_000,
            max_in_flight: 16,
        }
    }
}

pub struct AdapterClient {
    writer: Box<dyn Write + Send>,
    lines: Receiver<io::Result<String>>,
    options: ClientOptions,
    next_id: u64,
    child: Option<Child>,
}

impl AdapterClient {
    pub fn from_streams<R, W>(reader: R, writer: W, options: ClientOptions) -> Self
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(reader).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        Self {
            writer: Box::new(writer),
            lines: rx,
            options,
            next_id: 0,
            child: None,
        }
    }

    pub fn connect(endpoint: &Endpoint, options: ClientOptions) -> Result<Self, ProtocolError> {
        match endpoint {
            Endpoint::Tcp(addr) => {
                let stream = TcpStream::connect(addr)?;
                let reader = stream.try_clone()?;
                Ok(Self::from_streams(reader, stream, options))
            }
            Endpoint::Command(cmd) => {
                let mut child = Command::new("sh")
                    .arg("-c")
                    .arg(cmd)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()?;
                let stdin: ChildStdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                let mut client = Self::from_streams(stdout, stdin, options);
                client.child = Some(child);
                Ok(client)
            }
        }
    }

    /// Writes one raw line (a newline is appended).
    pub fn send_line(&mut self, line: &str) -> Result<(), ProtocolError> {
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        Ok(())
    }

    /// Next non-empty line from the adapter.
    pub fn recv_line(&mut self) -> Result<String, ProtocolError> {
        let timeout = Duration::from_millis(self.options.timeout_ms);
        loop {
            match self.lines.recv_timeout(timeout) {
                Ok(Ok(line)) if line.trim().is_empty() => continue,
                Ok(Ok(line)) => return Ok(line),
                Ok(Err(e)) => return Err(e.into()),
                Err(RecvTimeoutError::Timeout) => return Err(ProtocolError::Timeout(timeout)),
                Err(RecvTimeoutError::Disconnected) => return Err(ProtocolError::Closed),
            }
        }
    }

    pub fn recv_response(&mut self) -> Result<Response, ProtocolError> {
        parse_response(&self.recv_line()?)
    }

    fn fresh_id(&mut self) -> String {
        let id = format!("r-{}", self.next_id);
        self.next_id += 1;
        id
    }

    /// Sends every request with at most `max_in_flight` outstanding and
    /// returns the responses in request order.
    fn round_trip(&mut self, task: Task, batch: &[Vec<String>]) -> Result<Vec<Response>, ProtocolError> {
        let window = self.options.max_in_flight.max(1);
        let mut pending: HashMap<String, usize> = HashMap::new();
        let mut results: Vec<Option<Response>> = vec![None; batch.len()];
        let mut sent = 0;
        let mut done = 0;
        while done < batch.len() {
            while sent < batch.len() && pending.len() < window {
                let request = Request {
                    id: self.fresh_id(),
                    task,
                    tokens: batch[sent].clone(),
                };
                self.send_line(&serde_json::to_string(&request).expect("request serializes"))?;
                pending.insert(request.id, sent);
                sent += 1;
            }
            let response = self.recv_response()?;
            let index = pending
                .remove(response.id())
                .ok_or_else(|| ProtocolError::UnexpectedId(response.id().to_string()))?;
            if let Response::Error { id, error } = response {
                return Err(ProtocolError::Adapter { id, message: error });
            }
            results[index] = Some(response);
            done += 1;
        }
        Ok(results.into_iter().map(|r| r.expect("every slot answered")).collect())
    }

    /// Tags each token list; output order follows input order.
    pub fn tag_batch(&mut self, batch: &[Vec<String>]) -> Result<Vec<Vec<Tag>>, ProtocolError> {
        let responses = self.round_trip(Task::Tag, batch)?;
        responses
            .into_iter()
            .zip(batch)
            .map(|(response, tokens)| match response {
                Response::Tags { id, tags } if tags.len() != tokens.len() => Err(ProtocolError::LengthMismatch {
                    id,
                    expected: tokens.len(),
                    found: tags.len(),
                }),
                Response::Tags { tags, .. } => Ok(tags),
                other => Err(ProtocolError::WrongKind { id: other.id().to_string() }),
            })
            .collect()
    }

    /// Returns `(is_adas, probability)` per token list.
    pub fn classify_batch(&mut self, batch: &[Vec<String>]) -> Result<Vec<(bool, f64)>, ProtocolError> {
        let responses = self.round_trip(Task::Classify, batch)?;
        responses
            .into_iter()
            .map(|response| match response {
                Response::Label { label, probability, .. } if label == "adas" => Ok((true, probability)),
                Response::Label { label, probability, .. } if label == "non-adas" => Ok((false, probability)),
                Response::Label { id, label, .. } => Err(ProtocolError::UnknownLabel { id, label }),
                other => Err(ProtocolError::WrongKind { id: other.id().to_string() }),
            })
            .collect()
    }
}

impl Drop for AdapterClient {
    fn drop(&mut self) {
        if let Some(mut child) = self.child.take() {
            // closing stdin lets a well-behaved adapter exit on its own
            self.writer = Box::new(io::sink());
            for _ in 0..20 {
                if let Ok(Some(_)) = child.try_wait() {
                    return;
                }
                thread::sleep(Duration::from_millis(10));
            }
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Validates one response line. Tags outside `C`, `E`, `O` are reported
/// against the response id.
pub fn parse_response(line: &str) -> Result<Response, ProtocolError> {
    let malformed = |reason: &str| ProtocolError::Malformed {
        line: line.to_string(),
        reason: reason.to_string(),
    };
    let value: Value = serde_json::from_str(line).map_err(|e| malformed(&e.to_string()))?;
    let id = value
        .get("id")
        .and_then(Value::as_str)
        .ok_or_else(|| malformed("missing string \"id\""))?
        .to_string();
    if let Some(error) = value.get("error") {
        let message = error.as_str().map(String::from).unwrap_or_else(|| error.to_string());
        return Ok(Response::Error { id, error: message });
    }
    if let Some(tags) = value.get("tags") {
        let tags = tags.as_array().ok_or_else(|| malformed("\"tags\" is not an array"))?;
        let mut out = Vec::with_capacity(tags.len());
        for t in tags {
            match t.as_str().map(str::parse::<Tag>) {
                Some(Ok(tag)) => out.push(tag),
                _ => {
                    return Err(ProtocolError::UnknownTag {
                        id,
                        tag: t.as_str().map(String::from).unwrap_or_else(|| t.to_string()),
                    })
                }
            }
        }
        return Ok(Response::Tags { id, tags: out });
    }
    if let (Some(label), Some(probability)) = (value.get("label"), value.get("probability")) {
        let label = label.as_str().ok_or_else(|| malformed("\"label\" is not a string"))?;
        let probability = probability
            .as_f64()
            .ok_or_else(|| malformed("\"probability\" is not a number"))?;
        return Ok(Response::Label {
            id,
            label: label.to_string(),
            probability,
        });
    }
    Err(malformed("expected \"tags\", \"label\" or \"error\""))
}

/// Parses one request line into a request or the error response to send back.
/// The id is recovered from malformed lines when possible.
pub fn parse_request(line: &str) -> Result<Request, Response> {
    let value: Value = serde_json::from_str(line).map_err(|e| Response::error("", format!("invalid JSON: {e}")))?;
    let id = value.get("id").and_then(Value::as_str).unwrap_or("").to_string();
    serde_json::from_value(value).map_err(|e| Response::error(id, format!("invalid request: {e}")))
}

/// Answers requests from `input` on `output` until end of input.
pub fn serve<R: BufRead, W: Write>(
    input: R,
    mut output: W,
    mut handler: impl FnMut(&Request) -> Response,
) -> io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match parse_request(&line) {
            Ok(request) => handler(&request),
            Err(response) => response,
        };
        serde_json::to_writer(&mut output, &response)?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}

/// Reference adapter backed by a CRF and, optionally, a linear classifier.
pub struct ReferenceAdapter {
    pub tagger: Option<CrfModel>,
    pub classifier: Option<LinearClassifier>,
}

impl ReferenceAdapter {
    pub fn handle(&self, request: &Request) -> Response {
        let id = request.id.clone();
        match request.task {
            Task::Tag => match &self.tagger {
                None => Response::error(id, "no tagger model loaded"),
                Some(_) if request.tokens.is_empty() => Response::Tags { id, tags: Vec::new() },
                Some(model) => Response::Tags {
                    id,
                    tags: model.lattice(&request.tokens).viterbi().0,
                },
            },
            Task::Classify => match &self.classifier {
                None => Response::error(id, "no classifier model loaded"),
                Some(model) => {
                    match model.predict(&request.tokens.join(" ")) {
                        Ok((p, adas)) => Response::Label {
                            id,
                            label: if adas { "adas" } else { "non-adas" }.into(),
                            probability: p,
                        },
                        Err(e) => Response::error(id, e.to_string()),
                    }
                }
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformanceCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformanceReport {
    pub checks: Vec<ConformanceCheck>,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn conformance_sentences() -> Vec<Vec<String>> {
    [
        "the auto pilot engaged on its own",
        "radar failed",
        "due to ice , the car skidded into a pole",
        "x",
        "lane keep assist pulled the wheel and i nearly crashed",
    ]
    .iter()
    .map(|s| s.split(' ').map(String::from).collect())
    .collect()
}

/// Exercises id matching, length matching, tag validation and error paths.
pub fn check_adapter(client: &mut AdapterClient) -> ConformanceReport {
    let mut checks = Vec::new();
    let mut record = |name: &str, outcome: Result<String, String>| {
        let (passed, detail) = match outcome {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        checks.push(ConformanceCheck {
            name: name.into(),
            passed,
            detail,
        });
    };

    let sentences = conformance_sentences();
    record(
        "single_request",
        client
            .tag_batch(&sentences[..1])
            .map(|t| format!("{} tags", t[0].len()))
            .map_err(|e| e.to_string()),
    );
    record(
        "batch_order_and_lengths",
        client
            .tag_batch(&sentences)
            .map(|t| format!("{} sequences", t.len()))
            .map_err(|e| e.to_string()),
    );

    let empty_line = (|| -> Result<String, ProtocolError> {
        client.send_line("")?;
        let id = "conformance-empty-line";
        client.send_line(&json!({"id": id, "task": "tag", "tokens": ["ok"]}).to_string())?;
        let response = client.recv_response()?;
        if response.id() != id {
            return Err(ProtocolError::UnexpectedId(response.id().into()));
        }
        match response {
            Response::Tags { tags, .. } if tags.len() == 1 => Ok("empty line ignored".into()),
            Response::Tags { tags, .. } => Err(ProtocolError::LengthMismatch {
                id: id.into(),
                expected: 1,
                found: tags.len(),
            }),
            _ => Err(ProtocolError::WrongKind { id: id.into() }),
        }
    })();
    record("empty_line_ignored", empty_line.map_err(|e| e.to_string()));

    let mut expect_error = |name: &str, id: &str, line: String| {
        let outcome = (|| -> Result<String, ProtocolError> {
            client.send_line(&line)?;
            match client.recv_response()? {
                Response::Error { id: got, error } if got == id => Ok(error),
                other => Err(ProtocolError::Malformed {
                    line: serde_json::to_string(&other).unwrap_or_default(),
                    reason: format!("expected an error response for {id:?}"),
                }),
            }
        })();
        (name.to_string(), outcome.map_err(|e| e.to_string()))
    };
    let missing = expect_error(
        "missing_tokens_rejected",
        "conformance-missing",
        json!({"id": "conformance-missing", "task": "tag"}).to_string(),
    );
    let unknown = expect_error(
        "unknown_task_rejected",
        "conformance-task",
        json!({"id": "conformance-task", "task": "translate", "tokens": ["a"]}).to_string(),
    );
    for (name, outcome) in [missing, unknown] {
        record(&name, outcome);
    }
    ConformanceReport { checks }
}
