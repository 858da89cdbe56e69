use std::time::Duration;

use serde_json::{json, Value};

use super::{echo_params, Backend, ModelError, ModelMetadata, ModelResponse, Params};
use crate::protocol::PromptBundle;

#[derive(Debug, Clone)]
pub struct HttpConfig {
    pub endpoint: String,
    pub model: String,
    pub token: Option<String>,
    pub timeout: Duration,
    /// Extra attempts after the first failure to connect.
    pub retries: u32,
}

/// Generic JSON chat-completion client.
pub struct HttpBackend {
    config: HttpConfig,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpBackend { config, agent }
    }

    fn request_body(&self, bundle: &PromptBundle, n: u32, params: &Params) -> Value {
        let mut body = json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": bundle.system},
                {"role": "user", "content": bundle.user_message()},
            ],
            "n": n,
        });
        for (k, v) in params {
            if k != "n" && k != "model" && k != "messages" {
                body[k] = v.clone();
            }
        }
        body
    }

    fn send(&self, body: &Value) -> Result<Value, ModelError> {
        let mut request = self.agent.post(&self.config.endpoint);
        if let Some(token) = &self.config.token {
            request = request.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = request
            .send_json(body)
            .map_err(|e| ModelError::BackendUnreachable(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(ModelError::BackendUnreachable(format!("HTTP {status}")));
        }
        response
            .body_mut()
            .read_json::<Value>()
            .map_err(|e| ModelError::BackendMalformedReply(e.to_string()))
    }
}

/// `exp(mean token log-probability)`, when the reply carries log-probabilities.
fn confidence_from(choices: &[Value]) -> Option<f64> {
    let logprobs: Vec<f64> = choices
        .first()?
        .pointer("/logprobs/content")?
        .as_array()?
        .iter()
        .filter_map(|t| t.get("logprob")?.as_f64())
        .collect();
    if logprobs.is_empty() {
        return None;
    }
    let mean = logprobs.iter().sum::<f64>() / logprobs.len() as f64;
    Some(mean.exp().clamp(0.0, 1.0))
}

/// Candidates, reported model name and confidence.
type ParsedReply = (Vec<String>, Option<String>, Option<f64>);

pub(crate) fn parse_reply(reply: &Value, n: u32) -> Result<ParsedReply, ModelError> {
    let choices = reply
        .get("choices")
        .and_then(Value::as_array)
        .ok_or_else(|| ModelError::BackendMalformedReply("missing `choices` array".into()))?;
    let mut candidates = Vec::new();
    for choice in choices.iter().take(n as usize) {
        let text = choice
            .get("text")
            .and_then(Value::as_str)
            .or_else(|| choice.pointer("/message/content").and_then(Value::as_str))
            .ok_or_else(|| ModelError::BackendMalformedReply("choice without text".into()))?;
        candidates.push(text.to_string());
    }
    if candidates.is_empty() {
        return Err(ModelError::BackendMalformedReply("no choices returned".into()));
    }
    let model = reply
        .get("model")
        .and_then(Value::as_str)
        .filter(|m| !m.trim().is_empty())
        .map(str::to_string);
    Ok((candidates, model, confidence_from(choices)))
}

impl Backend for HttpBackend {
    fn complete(&self, bundle: &PromptBundle, n: u32, params: &Params) -> Result<ModelResponse, ModelError> {
        if n == 0 {
            return Err(ModelError::ZeroCandidates);
        }
        let body = self.request_body(bundle, n, params);
        let mut attempt = 0;
        let reply = loop {
            match self.send(&body) {
                Err(ModelError::BackendUnreachable(e)) if attempt < self.config.retries => {
                    tracing::warn!("completion request failed, retrying: {e}");
                    attempt += 1;
                }
                other => break other?,
            }
        };
        let (candidates, model, confidence) = parse_reply(&reply, n)?;
        let mut parameters = echo_params(n, params);
        let shortfall = n as usize - candidates.len();
        if shortfall > 0 {
            parameters.insert("shortfall".to_string(), json!(shortfall));
        }
        Ok(ModelResponse {
            candidates,
            metadata: ModelMetadata {
                model_version: model.unwrap_or_else(|| self.config.model.clone()),
                parameters,
                confidence,
            },
        })
    }
}
