//! Uniform inference over text-generation backends.
//!
//! Backends speak one wire format: a JSON request `{"id", "task", "input"}`
//! answered by a JSON response `{"id", "output"}`. Subprocess backends read
//! one request per line on stdin and write one response per line on stdout,
//! in any order; HTTP backends receive one POSTed request and answer with one
//! response. Built-in oracles stand in for a model in tests.

mod http;
mod oracle;
mod subprocess;

use std::collections::{HashMap, HashSet};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::{RenderedExample, TemplateTable};
use crate::schema::{TaskKind, Taxonomy};

pub use oracle::{corrupt_oracle, gold_oracle, mangle_summary, OracleConfig, OracleMode};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceRequest {
    pub id: String,
    pub task: TaskKind,
    pub input: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceResponse {
    pub id: String,
    #[serde(default)]
    pub output: String,
}

impl From<&RenderedExample> for InferenceRequest {
    fn from(e: &RenderedExample) -> Self {
        InferenceRequest {
            id: e.instance.id.clone(),
            task: e.instance.task,
            input: e.input.clone(),
        }
    }
}

/// One generated output, aligned with its request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub task: TaskKind,
    pub output: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub timed_out: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    Oracle(OracleConfig),
    /// Program and arguments of a line-protocol subprocess.
    Command(Vec<String>),
    /// URL requests are POSTed to.
    Http(String),
}

impl FromStr for Backend {
    type Err = Error;

    /// `gold`, `corrupt[:drop=P,mangle=Q,seed=N]`, `cmd:<argv>` or
    /// `http:<url>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("gold") {
            return Ok(Backend::Oracle(OracleConfig::gold()));
        }
        if let Some(rest) = s.strip_prefix("corrupt") {
            let mut cfg = OracleConfig::corrupt(0.0, 0.0, 0);
            let params = rest.strip_prefix(':').unwrap_or(rest);
            for kv in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                let (key, value) = kv
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("bad corrupt parameter {kv:?}")))?;
                let bad = || Error::Config(format!("bad value in {kv:?}"));
                match key.trim() {
                    "drop" | "drop_prob" => cfg.drop_prob = value.parse().map_err(|_| bad())?,
                    "mangle" | "mangle_prob" => {
                        cfg.mangle_prob = value.parse().map_err(|_| bad())?
                    }
                    "seed" => cfg.seed = value.parse().map_err(|_| bad())?,
                    _ => return Err(Error::Config(format!("unknown corrupt parameter {key:?}"))),
                }
            }
            cfg.validate()?;
            return Ok(Backend::Oracle(cfg));
        }
        if let Some(cmd) = s.strip_prefix("cmd:") {
            let argv: Vec<String> = cmd.split_whitespace().map(String::from).collect();
            if argv.is_empty() {
                return Err(Error::Config("cmd backend needs a program".into()));
            }
            return Ok(Backend::Command(argv));
        }
        if s.starts_with("https://") {
            return Ok(Backend::Http(s.to_string()));
        }
        if let Some(url) = s.strip_prefix("http:") {
            let url = if url.starts_with("//") {
                format!("http:{url}")
            } else {
                url.to_string()
            };
            return Ok(Backend::Http(url));
        }
        Err(Error::Config(format!("unknown backend {s:?}")))
    }
}

#[derive(Debug, Clone)]
pub struct GatewayOptions {
    /// Longest wait for any single response before the outstanding requests
    /// are recorded as timed out with empty outputs.
    pub timeout: Duration,
    /// Requests sent ahead of their responses.
    pub max_in_flight: usize,
}

impl Default for GatewayOptions {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(60),
            max_in_flight: 8,
        }
    }
}

/// Templates and taxonomy the corrupting oracle needs to rewrite summaries.
#[derive(Debug, Clone, Copy)]
pub struct OracleContext<'a> {
    pub templates: &'a TemplateTable,
    pub taxonomy: &'a Taxonomy,
}

/// Runs every example through `backend`; the result is aligned with
/// `examples` whatever order the backend answers in.
pub fn infer(
    examples: &[RenderedExample],
    backend: &Backend,
    ctx: OracleContext<'_>,
    opts: &GatewayOptions,
) -> Result<Vec<Prediction>> {
    let ids: HashSet<&str> = examples.iter().map(|e| e.instance.id.as_str()).collect();
    if ids.len() != examples.len() {
        return Err(Error::Config("request ids must be unique".into()));
    }
    let outputs: Vec<(String, bool)> = match backend {
        Backend::Oracle(cfg) => examples
            .iter()
            .map(|e| match cfg.mode {
                OracleMode::Gold => (gold_oracle(e), false),
                OracleMode::Corrupt => (corrupt_oracle(e, cfg, ctx), false),
            })
            .collect(),
        Backend::Command(argv) => {
            let requests: Vec<InferenceRequest> = examples.iter().map(Into::into).collect();
            subprocess::run(argv, &requests, opts)?
        }
        Backend::Http(url) => {
            let requests: Vec<InferenceRequest> = examples.iter().map(Into::into).collect();
            http::run(url, &requests, opts)?
        }
    };
    Ok(examples
        .iter()
        .zip(outputs)
        .map(|(e, (output, timed_out))| Prediction {
            id: e.instance.id.clone(),
            task: e.instance.task,
            output,
            timed_out,
        })
        .collect())
}

/// Collects responses by id into request order. Missing ids are `None`.
struct Collector {
    index: HashMap<String, usize>,
    outputs: Vec<Option<String>>,
    received: usize,
}

impl Collector {
    fn new(requests: &[InferenceRequest]) -> Self {
        Self {
            index: requests
                .iter()
                .enumerate()
                .map(|(i, r)| (r.id.clone(), i))
                .collect(),
            outputs: vec![None; requests.len()],
            received: 0,
        }
    }

    fn accept(&mut self, response: InferenceResponse) -> Result<()> {
        let &i = self.index.get(&response.id).ok_or_else(|| {
            Error::ProtocolViolation(format!("response for unknown id {:?}", response.id))
        })?;
        if self.outputs[i].is_some() {
            return Err(Error::ProtocolViolation(format!(
                "duplicate response for id {:?}",
                response.id
            )));
        }
        self.outputs[i] = Some(response.output);
        self.received += 1;
        Ok(())
    }

    fn received(&self) -> usize {
        self.received
    }

    /// Unanswered requests become empty outputs flagged as timed out.
    fn finish(self) -> Vec<(String, bool)> {
        self.outputs
            .into_iter()
            .map(|o| match o {
                Some(out) => (out, false),
                None => (String::new(), true),
            })
            .collect()
    }
}

/// Wire-format checks shared by the gateway and external adapters.
pub mod wire {
    use super::*;

    pub fn check_request_line(line: &str) -> Result<InferenceRequest> {
        serde_json::from_str(line.trim())
            .map_err(|e| Error::ProtocolViolation(format!("bad request record: {e}")))
    }

    pub fn check_response_line(line: &str) -> Result<InferenceResponse> {
        serde_json::from_str(line.trim())
            .map_err(|e| Error::ProtocolViolation(format!("bad response record: {e}")))
    }

    /// Validates a recorded exchange: every line well formed and exactly one
    /// response per request id.
    pub fn check_transcript<S: AsRef<str>>(requests: &[S], responses: &[S]) -> Result<()> {
        let requests = requests
            .iter()
            .map(|l| check_request_line(l.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let mut collector = Collector::new(&requests);
        if collector.index.len() != requests.len() {
            return Err(Error::ProtocolViolation("duplicate request ids".into()));
        }
        for line in responses {
            collector.accept(check_response_line(line.as_ref())?)?;
        }
        if collector.received() != requests.len() {
            return Err(Error::ProtocolViolation(format!(
                "{} of {} requests unanswered",
                requests.len() - collector.received(),
                requests.len()
            )));
        }
        Ok(())
    }
}
