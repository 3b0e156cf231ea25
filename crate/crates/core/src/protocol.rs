//! Newline-delimited JSON protocol for external logit providers.
//!
//! A provider is any process or socket peer that can score next tokens. The
//! exchange runs over one duplex byte stream (a spawned child's stdio or a
//! TCP connection), strictly one request line then one response line:
//!
//! 1. On connect, the provider sends a handshake line
//!    `{"vocab_size": N, "model_name": "..."}`. The client checks the size
//!    against its local vocabulary and aborts on mismatch.
//! 2. Each request is `{"request_id": k, "context_text": "...",
//!    "prefix_ids": [...]}` where `context_text` is
//!    `<source-escaped>|<domain-escaped>` (see
//!    [`ConditioningContext::context_text`]); the provider handles text
//!    conditioning itself and must answer with logprobs over its own
//!    vocabulary.
//! 3. Each response is `{"request_id": k, "logprobs": [...]}` or
//!    `{"request_id": k, "error": "..."}` and must echo the request id.
//!
//! Responses are validated against the distribution invariants: a
//! normalization drift within 1e-6 is accepted unchanged (bit-exact
//! passthrough), a drift within 1e-4 is repaired through the
//! floor-and-renormalize rule, anything beyond is rejected.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::model::{
    split_context_text, ConditionalModel, ConditioningContext, TokenDistribution, TokenId,
    Vocabulary, NORMALIZATION_TOLERANCE,
};
use crate::prompt::DomainPrompt;

/// Environment variable overriding the TCP endpoint of remote model specs.
pub const PROVIDER_ENDPOINT_ENV: &str = "PMIDC_PROVIDER_ENDPOINT";

/// Default time to wait for a provider response.
pub const DEFAULT_PROVIDER_TIMEOUT: Duration = Duration::from_secs(30);

/// Maximum normalization drift repaired by renormalization; larger drifts
/// are rejected.
pub const MAX_ACCEPTED_DRIFT: f64 = 1e-4;

/// Handshake sent by the provider when a connection opens.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hello {
    pub vocab_size: usize,
    pub model_name: String,
}

/// One scoring request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogitRequest {
    pub request_id: u64,
    pub context_text: String,
    pub prefix_ids: Vec<TokenId>,
}

/// One scoring response: logprobs on success, an error message otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogitResponse {
    pub request_id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logprobs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl LogitResponse {
    pub fn ok(request_id: u64, logprobs: Vec<f64>) -> Self {
        LogitResponse { request_id, logprobs: Some(logprobs), error: None }
    }

    pub fn err(request_id: u64, message: impl Into<String>) -> Self {
        LogitResponse { request_id, logprobs: None, error: Some(message.into()) }
    }
}

/// A duplex line transport to a provider.
pub trait ProviderTransport: Send {
    fn send_line(&mut self, line: &str) -> Result<()>;
    fn recv_line(&mut self, timeout: Duration) -> Result<String>;
}

/// Transport over a spawned child process's stdio. A reader thread feeds a
/// channel so receives can time out.
pub struct ChildTransport {
    child: Child,
    stdin: std::process::ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl ChildTransport {
    pub fn spawn(program: &str, args: &[String]) -> Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| CoreError::provider(format!("failed to spawn provider: {e}"), true))?;
        let stdin = child.stdin.take().expect("stdin piped");
        let stdout = child.stdout.take().expect("stdout piped");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(ChildTransport { child, stdin, lines: rx })
    }
}

impl ProviderTransport for ChildTransport {
    fn send_line(&mut self, line: &str) -> Result<()> {
        writeln!(self.stdin, "{line}")
            .and_then(|_| self.stdin.flush())
            .map_err(|e| CoreError::provider(format!("provider stdin closed: {e}"), true))
    }

    fn recv_line(&mut self, timeout: Duration) -> Result<String> {
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(CoreError::provider(format!("provider read failed: {e}"), true)),
            Err(RecvTimeoutError::Timeout) => {
                Err(CoreError::provider(format!("provider timed out after {timeout:?}"), true))
            }
            Err(RecvTimeoutError::Disconnected) => {
                Err(CoreError::provider("provider closed its output stream", true))
            }
        }
    }
}

impl Drop for ChildTransport {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Transport over a TCP connection.
pub struct TcpTransport {
    writer: TcpStream,
    reader: BufReader<TcpStream>,
}

impl TcpTransport {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self> {
        let stream = TcpStream::connect(addr)
            .map_err(|e| CoreError::provider(format!("provider unreachable: {e}"), true))?;
        let reader = BufReader::new(
            stream
                .try_clone()
                .map_err(|e| CoreError::provider(format!("socket clone failed: {e}"), true))?,
        );
        Ok(TcpTransport { writer: stream, reader })
    }
}

impl ProviderTransport for TcpTransport {
    fn send_line(&mut self, line: &str) -> Result<()> {
        writeln!(self.writer, "{line}")
            .and_then(|_| self.writer.flush())
            .map_err(|e| CoreError::provider(format!("provider connection lost: {e}"), true))
    }

    fn recv_line(&mut self, timeout: Duration) -> Result<String> {
        self.reader
            .get_ref()
            .set_read_timeout(Some(timeout))
            .map_err(|e| CoreError::provider(format!("cannot set read timeout: {e}"), true))?;
        let mut line = String::new();
        match self.reader.read_line(&mut line) {
            Ok(0) => Err(CoreError::provider("provider closed the connection", true)),
            Ok(_) => Ok(line.trim_end_matches(['\r', '\n']).to_string()),
            Err(e)
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut =>
            {
                Err(CoreError::provider(format!("provider timed out after {timeout:?}"), true))
            }
            Err(e) => Err(CoreError::provider(format!("provider read failed: {e}"), true)),
        }
    }
}

struct RemoteInner {
    transport: Box<dyn ProviderTransport>,
    next_request_id: u64,
}

/// A conditional model served by a remote provider. The connection is
/// strictly request/response ordered, so one connection serves one decode
/// job at a time; concurrent callers serialize on an internal lock.
pub struct RemoteModel {
    vocabulary: Vocabulary,
    timeout: Duration,
    inner: Mutex<RemoteInner>,
}

impl RemoteModel {
    /// Wraps an open transport: reads the handshake and pins the vocabulary
    /// size. A size mismatch is a fatal configuration error.
    pub fn new(
        mut transport: Box<dyn ProviderTransport>,
        vocabulary: Vocabulary,
        timeout: Duration,
    ) -> Result<Self> {
        let hello_line = transport.recv_line(timeout)?;
        let hello: Hello = serde_json::from_str(&hello_line)
            .map_err(|e| CoreError::config(format!("bad provider handshake: {e}")))?;
        if hello.vocab_size != vocabulary.len() {
            return Err(CoreError::config(format!(
                "provider {:?} serves vocab_size {}, local vocabulary has {}",
                hello.model_name,
                hello.vocab_size,
                vocabulary.len()
            )));
        }
        Ok(RemoteModel {
            vocabulary,
            timeout,
            inner: Mutex::new(RemoteInner { transport, next_request_id: 1 }),
        })
    }

    pub fn connect_tcp(addr: &str, vocabulary: Vocabulary, timeout: Duration) -> Result<Self> {
        RemoteModel::new(Box::new(TcpTransport::connect(addr)?), vocabulary, timeout)
    }

    pub fn spawn(program: &str, args: &[String], vocabulary: Vocabulary, timeout: Duration) -> Result<Self> {
        RemoteModel::new(Box::new(ChildTransport::spawn(program, args)?), vocabulary, timeout)
    }

    /// One request/response round trip, with response validation.
    fn roundtrip(&self, ctx: &ConditioningContext) -> Result<TokenDistribution> {
        let mut inner = self.inner.lock().expect("remote model lock poisoned");
        let request_id = inner.next_request_id;
        inner.next_request_id += 1;
        let request = LogitRequest {
            request_id,
            context_text: ctx.context_text(),
            prefix_ids: ctx.prefix.clone(),
        };
        let line = serde_json::to_string(&request)?;
        inner.transport.send_line(&line)?;
        let response_line = inner.transport.recv_line(self.timeout)?;
        let response: LogitResponse = serde_json::from_str(&response_line)
            .map_err(|e| CoreError::provider(format!("unparseable provider response: {e}"), false))?;
        if response.request_id != request_id {
            return Err(CoreError::provider(
                format!("response id {} does not echo request id {request_id}", response.request_id),
                false,
            ));
        }
        if let Some(message) = response.error {
            return Err(CoreError::provider(format!("provider reported: {message}"), false));
        }
        let logprobs = response
            .logprobs
            .ok_or_else(|| CoreError::provider("response carries neither logprobs nor error", false))?;
        validate_wire_logprobs(logprobs, self.vocabulary.len())
    }
}

/// Applies the acceptance bands to raw wire logprobs.
pub fn validate_wire_logprobs(logprobs: Vec<f64>, vocab_size: usize) -> Result<TokenDistribution> {
    if logprobs.len() != vocab_size {
        return Err(CoreError::config(format!(
            "provider returned {} logprobs, vocabulary has {vocab_size}",
            logprobs.len()
        )));
    }
    let drift = TokenDistribution::drift(&logprobs);
    if drift <= NORMALIZATION_TOLERANCE {
        return TokenDistribution::from_logprobs(logprobs);
    }
    if drift <= MAX_ACCEPTED_DRIFT {
        let probs: Vec<f64> = logprobs.iter().map(|lp| lp.exp()).collect();
        return TokenDistribution::from_probs(&probs);
    }
    Err(CoreError::contract(format!(
        "provider distribution drift {drift:.3e} exceeds {MAX_ACCEPTED_DRIFT:.0e}"
    )))
}

impl ConditionalModel for RemoteModel {
    fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    fn next_distribution(&self, ctx: &ConditioningContext) -> Result<TokenDistribution> {
        ctx.validate(&self.vocabulary)?;
        self.roundtrip(ctx)
    }
}

/// Serves a local model over the wire protocol until the input stream ends.
/// Malformed requests get error responses; the loop keeps serving.
pub fn serve_model(
    model: &dyn ConditionalModel,
    input: impl BufRead,
    mut output: impl Write,
    model_name: &str,
) -> Result<()> {
    let hello = Hello { vocab_size: model.vocabulary().len(), model_name: model_name.to_string() };
    writeln!(output, "{}", serde_json::to_string(&hello)?)?;
    output.flush()?;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<LogitRequest>(&line) {
            Ok(request) => serve_request(model, &request),
            Err(e) => LogitResponse::err(0, format!("unparseable request: {e}")),
        };
        writeln!(output, "{}", serde_json::to_string(&response)?)?;
        output.flush()?;
    }
    Ok(())
}

fn serve_request(model: &dyn ConditionalModel, request: &LogitRequest) -> LogitResponse {
    let (source, domain) = match split_context_text(&request.context_text) {
        Ok(parts) => parts,
        Err(e) => return LogitResponse::err(request.request_id, e.to_string()),
    };
    let source = (!source.is_empty()).then_some(source);
    let domain = (!domain.is_empty()).then(|| DomainPrompt::from_rendered(&domain));
    let ctx = ConditioningContext::new(source.as_deref(), domain.as_ref(), request.prefix_ids.clone());
    match model.next_distribution(&ctx) {
        Ok(dist) => LogitResponse::ok(request.request_id, dist.logprobs().to_vec()),
        Err(e) => LogitResponse::err(request.request_id, e.to_string()),
    }
}
