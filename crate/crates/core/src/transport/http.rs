//! HTTP chat-completion backends.
//!
//! Each provider dialect is a [`WireAdapter`]: it turns a [`ChatRequest`] into
//! a JSON body plus headers and parses the provider's reply. Extra request
//! parameters are copied verbatim into the top level of the body.

use std::time::Instant;

use serde_json::{json, Map, Value};

use super::{AttemptError, BackendConfig, ChatBackend, ChatRequest, ChatResponse, ChatRole, Usage};

pub trait WireAdapter: Send + Sync {
    fn default_path(&self) -> &'static str;
    fn headers(&self, api_key: &str) -> Vec<(String, String)>;
    fn body(&self, request: &ChatRequest) -> Value;
    fn parse(&self, body: &str) -> Result<ChatResponse, AttemptError>;
    fn name(&self) -> &'static str;
}

fn role_name(role: ChatRole) -> &'static str {
    match role {
        ChatRole::User => "user",
        ChatRole::Assistant => "assistant",
    }
}

fn merge_extra(body: &mut Map<String, Value>, request: &ChatRequest) {
    for (key, value) in &request.extra_params {
        body.insert(key.clone(), serde_json::to_value(value).expect("scalar serializes"));
    }
}

fn protocol(msg: impl Into<String>) -> AttemptError {
    AttemptError::Protocol(msg.into())
}

/// `POST /v1/chat/completions` with a leading system message. Also spoken by
/// most self-hosted inference servers.
pub struct OpenAiChat;

impl WireAdapter for OpenAiChat {
    fn default_path(&self) -> &'static str {
        "/v1/chat/completions"
    }

    fn headers(&self, api_key: &str) -> Vec<(String, String)> {
        vec![("Authorization".into(), format!("Bearer {api_key}"))]
    }

    fn body(&self, request: &ChatRequest) -> Value {
        let mut messages = vec![json!({"role": "system", "content": request.system_text})];
        messages.extend(
            request
                .messages
                .iter()
                .map(|m| json!({"role": role_name(m.role), "content": m.content})),
        );
        let mut body = Map::new();
        body.insert("model".into(), json!(request.model_id));
        body.insert("messages".into(), Value::Array(messages));
        body.insert("temperature".into(), json!(request.temperature));
        merge_extra(&mut body, request);
        Value::Object(body)
    }

    fn parse(&self, body: &str) -> Result<ChatResponse, AttemptError> {
        let v: Value = serde_json::from_str(body).map_err(|e| protocol(e.to_string()))?;
        let text = v["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| protocol("missing choices[0].message.content"))?;
        Ok(ChatResponse {
            text: text.to_string(),
            usage: Usage {
                prompt_tokens: v["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
                completion_tokens: v["usage"]["completion_tokens"].as_u64().unwrap_or(0),
            },
            latency: Default::default(),
        })
    }

    fn name(&self) -> &'static str {
        "openai-chat"
    }
}

/// `POST /v1/messages` with a top-level system field.
pub struct MessagesApi {
    pub max_tokens: u32,
    pub version: String,
}

impl Default for MessagesApi {
    fn default() -> Self {
        MessagesApi {
            max_tokens: 1024,
            version: "2023-06-01".into(),
        }
    }
}

impl WireAdapter for MessagesApi {
    fn default_path(&self) -> &'static str {
        "/v1/messages"
    }

    fn headers(&self, api_key: &str) -> Vec<(String, String)> {
        vec![
            ("x-api-key".into(), api_key.to_string()),
            ("anthropic-version".into(), self.version.clone()),
        ]
    }

    fn body(&self, request: &ChatRequest) -> Value {
        let messages: Vec<Value> = request
            .messages
            .iter()
            .map(|m| json!({"role": role_name(m.role), "content": m.content}))
            .collect();
        let mut body = Map::new();
        body.insert("model".into(), json!(request.model_id));
        body.insert("system".into(), json!(request.system_text));
        body.insert("messages".into(), Value::Array(messages));
        body.insert("temperature".into(), json!(request.temperature));
        body.insert("max_tokens".into(), json!(self.max_tokens));
        merge_extra(&mut body, request);
        Value::Object(body)
    }

    fn parse(&self, body: &str) -> Result<ChatResponse, AttemptError> {
        let v: Value = serde_json::from_str(body).map_err(|e| protocol(e.to_string()))?;
        let blocks = v["content"]
            .as_array()
            .ok_or_else(|| protocol("missing content array"))?;
        let text: String = blocks
            .iter()
            .filter(|b| b["type"] == "text")
            .filter_map(|b| b["text"].as_str())
            .collect();
        if text.is_empty() {
            return Err(protocol("no text content block"));
        }
        Ok(ChatResponse {
            text,
            usage: Usage {
                prompt_tokens: v["usage"]["input_tokens"].as_u64().unwrap_or(0),
                completion_tokens: v["usage"]["output_tokens"].as_u64().unwrap_or(0),
            },
            latency: Default::default(),
        })
    }

    fn name(&self) -> &'static str {
        "messages"
    }
}

pub struct HttpBackend {
    config: BackendConfig,
    adapter: Box<dyn WireAdapter>,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(config: BackendConfig, adapter: Box<dyn WireAdapter>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpBackend {
            config,
            adapter,
            agent,
        }
    }

    pub fn url(&self) -> String {
        let path = self
            .config
            .path
            .as_deref()
            .unwrap_or_else(|| self.adapter.default_path());
        format!("{}{}", self.config.base_url.trim_end_matches('/'), path)
    }

    fn api_key(&self) -> Result<String, AttemptError> {
        match std::env::var(&self.config.auth_env_var) {
            Ok(key) if !key.trim().is_empty() => Ok(key),
            _ => Err(AttemptError::Auth(format!(
                "environment variable {} is not set",
                self.config.auth_env_var
            ))),
        }
    }
}

impl ChatBackend for HttpBackend {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, AttemptError> {
        let key = self.api_key()?;
        let started = Instant::now();
        let mut call = self.agent.post(&self.url());
        for (name, value) in self.adapter.headers(&key) {
            call = call.header(name.as_str(), value.as_str());
        }
        let mut response = call
            .send_json(self.adapter.body(request))
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => AttemptError::Timeout,
                other => AttemptError::Connection(other.to_string()),
            })?;
        let code = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => AttemptError::Timeout,
                other => AttemptError::Connection(other.to_string()),
            })?;
        match code {
            200..=299 => {
                let mut parsed = self.adapter.parse(&body)?;
                parsed.latency = started.elapsed();
                Ok(parsed)
            }
            401 | 403 => Err(AttemptError::Auth(format!("HTTP {code}"))),
            _ => Err(AttemptError::Status {
                code,
                body: body.chars().take(500).collect(),
            }),
        }
    }

    fn describe(&self) -> String {
        format!("{} {}", self.adapter.name(), self.url())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::ChatMessage;
    use std::collections::BTreeMap;

    fn request() -> ChatRequest {
        let mut extra = BTreeMap::new();
        extra.insert("reasoning_effort".to_string(), "high".into());
        ChatRequest {
            model_id: "o1-2024-12-17".into(),
            system_text: "Act as a buyer".into(),
            messages: vec![
                ChatMessage::user("Hi, how can I help you?"),
                ChatMessage::assistant("Could you please tell me the price?"),
                ChatMessage::user("It is $2550."),
            ],
            temperature: 1.0,
            extra_params: extra,
        }
    }

    #[test]
    fn openai_body_carries_system_and_extra_params() {
        let body = OpenAiChat.body(&request());
        assert_eq!(body["model"], "o1-2024-12-17");
        assert_eq!(body["reasoning_effort"], "high");
        assert_eq!(body["temperature"], 1.0);
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][1]["content"], "Hi, how can I help you?");
        assert_eq!(body["messages"].as_array().unwrap().len(), 4);
    }

    #[test]
    fn openai_parse() {
        let r = OpenAiChat
            .parse(r#"{"choices":[{"message":{"role":"assistant","content":"Deal."}}],"usage":{"prompt_tokens":12,"completion_tokens":3}}"#)
            .unwrap();
        assert_eq!(r.text, "Deal.");
        assert_eq!(r.usage, Usage { prompt_tokens: 12, completion_tokens: 3 });
        assert!(matches!(OpenAiChat.parse("{}"), Err(AttemptError::Protocol(_))));
        assert!(matches!(OpenAiChat.parse("not json"), Err(AttemptError::Protocol(_))));
    }

    #[test]
    fn messages_api_round() {
        let body = MessagesApi::default().body(&request());
        assert_eq!(body["system"], "Act as a buyer");
        assert_eq!(body["reasoning_effort"], "high");
        assert_eq!(body["messages"].as_array().unwrap().len(), 3);
        let r = MessagesApi::default()
            .parse(r#"{"content":[{"type":"text","text":"Sure"}],"usage":{"input_tokens":5,"output_tokens":1}}"#)
            .unwrap();
        assert_eq!(r.text, "Sure");
        assert_eq!(r.usage.completion_tokens, 1);
    }

    #[test]
    fn missing_credential_is_auth_error() {
        let config = BackendConfig {
            auth_env_var: "ANCHORBENCH_UNSET_FOR_TEST".into(),
            base_url: "http://127.0.0.1:9".into(),
            ..BackendConfig::default()
        };
        let backend = HttpBackend::new(config, Box::new(OpenAiChat));
        assert!(matches!(backend.send(&request()), Err(AttemptError::Auth(_))));
        assert_eq!(backend.url(), "http://127.0.0.1:9/v1/chat/completions");
    }
}
