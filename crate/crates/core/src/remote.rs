//! JSON-over-HTTP client shared by the remote policy and remote reasoner backends.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orchestrator::{BackendError, ObservationFrame, PolicyBackend, PolicyDecision, PolicyQuery};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8080".into(),
            timeout_ms: 30_000,
            max_retries: 3,
            backoff_base_ms: 1_000,
        }
    }
}

impl RemoteConfig {
    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            base: Duration::from_millis(self.backoff_base_ms),
        }
    }
}

#[derive(Debug, Error)]
pub enum RemoteError {
    /// Connection failure, timeout, 5xx or 429; worth retrying.
    #[error("transport: {0}")]
    Transport(String),
    /// The server answered but the exchange is unusable.
    #[error("protocol: {0}")]
    Protocol(String),
}

impl RemoteError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, RemoteError::Transport(_))
    }
}

/// Bounded retries with exponential backoff: waits `base`, `2·base`, `4·base`, ...
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base: Duration,
}

impl RetryPolicy {
    pub fn delay(&self, retry: u32) -> Duration {
        self.base
            .saturating_mul(1u32.checked_shl(retry).unwrap_or(u32::MAX))
    }

    /// Run `op` until it succeeds, fails permanently or the retries run out.
    /// Returns the value together with the number of retries used.
    pub fn run<T, E>(
        &self,
        mut op: impl FnMut() -> Result<T, E>,
        retryable: impl Fn(&E) -> bool,
    ) -> Result<(T, u32), E> {
        let mut retry = 0;
        loop {
            match op() {
                Ok(v) => return Ok((v, retry)),
                Err(e) if retry < self.max_retries && retryable(&e) => {
                    std::thread::sleep(self.delay(retry));
                    retry += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RemoteClient {
    agent: ureq::Agent,
    endpoint: String,
}

impl RemoteClient {
    pub fn new(config: &RemoteConfig) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build();
        Self {
            agent,
            endpoint: config.endpoint.trim_end_matches('/').to_string(),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// One POST of `body` to `endpoint/route`, decoding the JSON reply.
    pub fn post<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        route: &str,
        body: &Req,
    ) -> Result<Resp, RemoteError> {
        let url = format!("{}/{}", self.endpoint, route.trim_start_matches('/'));
        let resp = match self.agent.post(&url).send_json(body) {
            Ok(r) => r,
            Err(ureq::Error::Status(code, _)) if code >= 500 || code == 429 => {
                return Err(RemoteError::Transport(format!("{url} returned HTTP {code}")))
            }
            Err(ureq::Error::Status(code, _)) => {
                return Err(RemoteError::Protocol(format!("{url} returned HTTP {code}")))
            }
            Err(ureq::Error::Transport(t)) => return Err(RemoteError::Transport(t.to_string())),
        };
        let text = resp
            .into_string()
            .map_err(|e| RemoteError::Transport(format!("reading reply from {url}: {e}")))?;
        serde_json::from_str(&text).map_err(|e| RemoteError::Protocol(format!("bad reply from {url}: {e}")))
    }
}

#[derive(Debug, Serialize)]
struct PolicyRequest<'a> {
    instruction: &'a str,
    fused_context: &'a str,
    frames: &'a [ObservationFrame],
    session_id: &'a str,
}

/// Policy served over HTTP at `endpoint/policy`.
#[derive(Debug, Clone)]
pub struct RemotePolicyBackend {
    client: RemoteClient,
    retry: RetryPolicy,
}

impl RemotePolicyBackend {
    pub fn new(config: &RemoteConfig) -> Self {
        Self {
            client: RemoteClient::new(config),
            retry: config.retry_policy(),
        }
    }
}

impl PolicyBackend for RemotePolicyBackend {
    fn decide(&mut self, query: &PolicyQuery<'_>) -> Result<PolicyDecision, BackendError> {
        let req = PolicyRequest {
            instruction: query.instruction,
            fused_context: query.fused_context,
            frames: query.frames,
            session_id: query.session_id,
        };
        let (decision, retries): (PolicyDecision, u32) = self
            .retry
            .run(|| self.client.post("policy", &req), RemoteError::is_retryable)
            .map_err(|e| match e {
                RemoteError::Transport(m) => BackendError::Transport(m),
                RemoteError::Protocol(m) => BackendError::Protocol(m),
            })?;
        if retries > 0 {
            log::info!(
                "policy call for {} succeeded after {retries} retries",
                query.session_id
            );
        }
        Ok(decision)
    }

    fn shareable(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy {
            max_retries: 3,
            base: Duration::from_millis(10),
        };
        assert_eq!(p.delay(0), Duration::from_millis(10));
        assert_eq!(p.delay(2), Duration::from_millis(40));
    }

    #[test]
    fn retries_only_retryable_errors() {
        let p = RetryPolicy {
            max_retries: 2,
            base: Duration::ZERO,
        };
        let mut calls = 0;
        let r: Result<(u8, u32), RemoteError> = p.run(
            || {
                calls += 1;
                if calls < 3 {
                    Err(RemoteError::Transport("timeout".into()))
                } else {
                    Ok(7)
                }
            },
            RemoteError::is_retryable,
        );
        assert_eq!(r.unwrap(), (7, 2));

        let mut calls = 0;
        let r: Result<(u8, u32), RemoteError> = p.run(
            || {
                calls += 1;
                Err(RemoteError::Protocol("bad".into()))
            },
            RemoteError::is_retryable,
        );
        assert!(r.is_err());
        assert_eq!(calls, 1);
    }

    #[test]
    fn gives_up_after_max_retries() {
        let p = RetryPolicy {
            max_retries: 1,
            base: Duration::ZERO,
        };
        let mut calls = 0;
        let r: Result<((), u32), RemoteError> = p.run(
            || {
                calls += 1;
                Err(RemoteError::Transport("down".into()))
            },
            RemoteError::is_retryable,
        );
        assert!(r.is_err());
        assert_eq!(calls, 2);
    }
}
