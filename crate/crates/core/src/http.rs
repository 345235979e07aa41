//! Blocking JSON-over-HTTP client with retries and a concurrency cap.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointConfig {
    /// e.g. `http://localhost:8000/v1`
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub backoff_ms: u64,
    pub max_in_flight: usize,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "http://localhost:8000/v1".into(),
            model: "default".into(),
            api_key_env: Some("OPENAI_API_KEY".into()),
            timeout_secs: 60,
            max_retries: 3,
            backoff_ms: 500,
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HttpError {
    #[error("request to {url} failed after {attempts} attempt(s): {last}")]
    Exhausted { url: String, attempts: u32, last: String },
    #[error("request to {url} rejected with status {status}: {body}")]
    Rejected { url: String, status: u16, body: String },
    #[error("cannot build HTTP client: {0}")]
    Client(String),
}

pub struct Semaphore {
    permits: Mutex<usize>,
    cv: Condvar,
}

pub struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    pub fn new(n: usize) -> Self {
        Semaphore {
            permits: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut p = self.permits.lock().unwrap_or_else(|e| e.into_inner());
        while *p == 0 {
            p = self.cv.wait(p).unwrap_or_else(|e| e.into_inner());
        }
        *p -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut p = self.0.permits.lock().unwrap_or_else(|e| e.into_inner());
        *p += 1;
        self.0.cv.notify_one();
    }
}

pub struct JsonClient {
    pub config: EndpointConfig,
    client: reqwest::blocking::Client,
    token: Option<String>,
    gate: Semaphore,
}

impl JsonClient {
    pub fn new(config: EndpointConfig) -> Result<Self, HttpError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs.max(1)))
            .build()
            .map_err(|e| HttpError::Client(e.to_string()))?;
        let token = config
            .api_key_env
            .as_deref()
            .and_then(|v| std::env::var(v).ok())
            .filter(|t| !t.is_empty());
        let gate = Semaphore::new(config.max_in_flight);
        Ok(JsonClient {
            config,
            client,
            token,
            gate,
        })
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.config.base_url.trim_end_matches('/'), path.trim_start_matches('/'))
    }

    /// POSTs `body`, retrying transport errors, 429 and 5xx with exponential backoff.
    /// Returns the parsed response and the number of attempts made.
    pub fn post(&self, path: &str, body: &Value) -> Result<(Value, u32), HttpError> {
        let url = self.url(path);
        let _permit = self.gate.acquire();
        let mut last = String::new();
        let attempts = self.config.max_retries + 1;
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.config.backoff_ms.saturating_mul(1u64 << (attempt - 1).min(16));
                std::thread::sleep(Duration::from_millis(delay));
            }
            let mut req = self.client.post(&url).json(body);
            if let Some(t) = &self.token {
                req = req.bearer_auth(t);
            }
            match req.send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        match resp.json::<Value>() {
                            Ok(v) => return Ok((v, attempt + 1)),
                            Err(e) => last = format!("invalid JSON body: {e}"),
                        }
                    } else if status.as_u16() == 429 || status.is_server_error() {
                        last = format!("status {status}");
                    } else {
                        let body = resp.text().unwrap_or_default();
                        return Err(HttpError::Rejected {
                            url,
                            status: status.as_u16(),
                            body,
                        });
                    }
                }
                Err(e) => last = e.to_string(),
            }
        }
        Err(HttpError::Exhausted { url, attempts, last })
    }
}
