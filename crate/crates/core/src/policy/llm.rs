use super::{Policy, PolicyContext, PolicyError, PolicyQuery, PolicyResponse};
use crate::http::{EndpointConfig, JsonClient};
use serde_json::json;
use std::time::Instant;

/// OpenAI-compatible chat-completions client. The prompt goes out as a single
/// user message at temperature 0.
pub struct LlmPolicy {
    client: JsonClient,
    pub temperature: f64,
}

impl LlmPolicy {
    pub fn new(config: EndpointConfig) -> Result<Self, PolicyError> {
        let client = JsonClient::new(config).map_err(|e| PolicyError::Unavailable(e.to_string()))?;
        Ok(LlmPolicy { client, temperature: 0.0 })
    }
}

impl Policy for LlmPolicy {
    fn respond(&self, query: &PolicyQuery, _ctx: &PolicyContext) -> Result<PolicyResponse, PolicyError> {
        let body = json!({
            "model": self.client.config.model,
            "messages": [{"role": "user", "content": query.prompt.text}],
            "temperature": self.temperature,
        });
        let started = Instant::now();
        let (resp, _) = self
            .client
            .post("chat/completions", &body)
            .map_err(|e| PolicyError::Unavailable(e.to_string()))?;
        let text = resp["choices"][0]["message"]["content"]
            .as_str()
            .unwrap_or("")
            .to_string();
        if text.trim().is_empty() {
            return Err(PolicyError::Unavailable("endpoint returned an empty completion".into()));
        }
        Ok(PolicyResponse {
            raw_text: text,
            latency: started.elapsed(),
            provider_tag: self.tag().to_string(),
        })
    }

    fn tag(&self) -> &str {
        "llm"
    }
}
