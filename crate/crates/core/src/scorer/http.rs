//! Chat-completions style HTTP adapter.
//!
//! Request: `POST <endpoint_url>` with bearer auth and
//! `{"model": ..., "messages": [{"role": "user", "content": <prompt>}], "temperature": ...}`.
//! Response: the text at `choices[0].message.content`.

use serde::{Deserialize, Serialize};

use super::provider::{CompletionRequest, Provider, ProviderError};
use super::ProviderConfig;

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Debug)]
pub struct HttpProvider {
    client: reqwest::blocking::Client,
    endpoint_url: String,
    model_name: String,
    api_key: String,
}

impl HttpProvider {
    /// Reads the credential from the environment variable named in
    /// `config.api_key_env`; fails before any network traffic when unset.
    pub fn new(config: &ProviderConfig) -> Result<Self, ProviderError> {
        let api_key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| ProviderError::CredentialMissing(config.api_key_env.clone()))?;
        Self::with_key(config, api_key)
    }

    pub fn with_key(config: &ProviderConfig, api_key: String) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ProviderError::Unreachable(e.to_string()))?;
        Ok(Self {
            client,
            endpoint_url: config.endpoint_url.clone(),
            model_name: config.model_name.clone(),
            api_key,
        })
    }
}

impl Provider for HttpProvider {
    fn name(&self) -> String {
        format!("http:{}", self.model_name)
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        let body = ChatRequest {
            model: request.model,
            messages: [ChatMessage {
                role: "user",
                content: request.prompt,
            }],
            temperature: request.temperature,
        };
        let resp = self
            .client
            .post(&self.endpoint_url)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| ProviderError::Unreachable(e.to_string()))?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| ProviderError::Unreachable(e.to_string()))?;
        if !status.is_success() {
            return Err(ProviderError::Status {
                status: status.as_u16(),
                body: text,
            });
        }
        let parsed: ChatResponse = serde_json::from_str(&text)
            .map_err(|e| ProviderError::InvalidResponse(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ProviderError::InvalidResponse("no message content".into()))
    }
}
