//! Chat-completions client for live mining runs.

use std::time::Duration;

use log::debug;
use reqprio::requiresminer::ChatClient;
use reqprio::{Error, Result};
use serde_json::{json, Value};

use crate::config::MineConfig;

pub struct HttpChatClient {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    temperature: f64,
    api_key: String,
}

impl HttpChatClient {
    /// Reads the API key from the environment variable named in the config.
    pub fn from_config(cfg: &MineConfig) -> Result<Self> {
        let api_key = std::env::var(&cfg.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| Error::Config(format!("live mining needs an API key in ${}", cfg.api_key_env)))?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs)))
            .build()
            .into();
        Ok(HttpChatClient {
            agent,
            endpoint: cfg.endpoint.clone(),
            model: cfg.model.clone(),
            temperature: cfg.temperature,
            api_key,
        })
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&self, prompt: &str) -> Result<String> {
        let body = json!({
            "model": self.model,
            "temperature": self.temperature,
            "messages": [{"role": "user", "content": prompt}],
        });
        debug!("POST {} ({} prompt bytes)", self.endpoint, prompt.len());
        let reply: Value = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| Error::Service(format!("chat request failed: {e}")))?
            .body_mut()
            .read_json()
            .map_err(|e| Error::Service(format!("unreadable chat response: {e}")))?;
        reply["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| Error::Service("chat response has no message content".into()))
    }
}
