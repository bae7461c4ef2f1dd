use std::thread;
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::backend::{BackendProfile, InferenceBackend};
use super::prompt::{Speaker, Turn};
use super::ContextError;
use crate::scene::ImageRef;

/// Environment variable holding the bearer token for the remote service.
pub const TOKEN_ENV: &str = "HUX_BACKEND_TOKEN";

const RETRY_BASE_DELAY: Duration = Duration::from_millis(200);

const KEYWORD_INSTRUCTION: &str = "Generate retrieval keywords, short phrases and other contextual cues \
for the following memory. Reply with one keyword or phrase per line and nothing else.";

/// Client for a chat-completions style inference service.
pub struct RemoteBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    token: Option<String>,
    max_retries: u32,
}

#[derive(Debug, Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<Value>,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Debug, Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

fn mime_for(path: &str) -> &'static str {
    let lower = path.to_ascii_lowercase();
    if lower.ends_with(".jpg") || lower.ends_with(".jpeg") {
        "image/jpeg"
    } else if lower.ends_with(".webp") {
        "image/webp"
    } else if lower.ends_with(".gif") {
        "image/gif"
    } else {
        "image/png"
    }
}

fn data_url(path: &str) -> Result<String, ContextError> {
    let bytes = std::fs::read(path).map_err(|e| ContextError::UnresolvableImage {
        locator: path.to_string(),
        reason: e.to_string(),
    })?;
    let encoded = base64::engine::general_purpose::STANDARD.encode(bytes);
    Ok(format!("data:{};base64,{encoded}", mime_for(path)))
}

/// Flattens an image reference into a file on disk plus textual hints about
/// the region or overlay the caption should focus on.
fn image_parts(image: &ImageRef, hints: &mut Vec<String>) -> Result<String, ContextError> {
    match image {
        ImageRef::File { path } => data_url(path),
        ImageRef::Crop { source, rect } => {
            hints.push(format!(
                "Focus on the region at x={}, y={}, width={}, height={} pixels.",
                rect.x, rect.y, rect.width, rect.height
            ));
            image_parts(source, hints)
        }
        ImageRef::Labeled { source, labels, .. } => {
            for l in labels {
                let b = l.bbox;
                hints.push(format!(
                    "Label {} at x={}, y={}, width={}, height={}.",
                    l.category, b.x, b.y, b.width, b.height
                ));
            }
            image_parts(source, hints)
        }
        ImageRef::Synthetic { .. } => Err(ContextError::UnresolvableImage {
            locator: image.locator(),
            reason: "remote backend needs an image file".into(),
        }),
    }
}

fn wire_role(speaker: Speaker) -> &'static str {
    match speaker {
        Speaker::User => "user",
        Speaker::Assistant => "assistant",
        Speaker::Tool => "system",
    }
}

impl RemoteBackend {
    pub fn new(profile: &BackendProfile) -> Result<Self, ContextError> {
        let endpoint = profile
            .endpoint
            .clone()
            .ok_or_else(|| ContextError::InvalidProfile("remote backend requires an endpoint".into()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(profile.timeout_ms))
            .build()
            .map_err(|e| ContextError::BackendUnavailable(e.to_string()))?;
        Ok(RemoteBackend {
            client,
            endpoint,
            model: profile.model_name.clone().unwrap_or_else(|| "default".to_string()),
            token: std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty()),
            max_retries: profile.max_retries,
        })
    }

    pub fn with_token(mut self, token: Option<String>) -> Self {
        self.token = token;
        self
    }

    fn send_once(&self, body: &ChatRequest<'_>) -> Result<String, (bool, String)> {
        let mut req = self.client.post(&self.endpoint).json(body);
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| (true, e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let retry = status.is_server_error() || status.as_u16() == 429;
            return Err((retry, format!("HTTP {status}")));
        }
        let parsed: ChatResponse = resp.json().map_err(|e| (false, e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or((false, "response has no message content".to_string()))
    }

    fn chat(&self, messages: Vec<Value>) -> Result<String, ContextError> {
        let body = ChatRequest {
            model: &self.model,
            messages,
        };
        let mut attempt = 0;
        loop {
            match self.send_once(&body) {
                Ok(text) => return Ok(text),
                Err((retryable, msg)) => {
                    if !retryable || attempt >= self.max_retries {
                        return Err(ContextError::BackendUnavailable(msg));
                    }
                    thread::sleep(RETRY_BASE_DELAY * 2u32.pow(attempt));
                    attempt += 1;
                }
            }
        }
    }
}

impl InferenceBackend for RemoteBackend {
    fn caption(&self, image: &ImageRef, instruction: &str) -> Result<String, ContextError> {
        let mut hints = Vec::new();
        let url = image_parts(image, &mut hints)?;
        let mut text = instruction.to_string();
        for h in hints {
            text.push(' ');
            text.push_str(&h);
        }
        self.chat(vec![json!({
            "role": "user",
            "content": [
                {"type": "text", "text": text},
                {"type": "image_url", "image_url": {"url": url}},
            ],
        })])
    }

    fn complete(&self, prompt: &str, history: &[Turn]) -> Result<String, ContextError> {
        if prompt.trim().is_empty() {
            return Err(ContextError::EmptyPrompt);
        }
        let mut messages: Vec<Value> = history
            .iter()
            .map(|t| json!({"role": wire_role(t.speaker), "content": t.text}))
            .collect();
        messages.push(json!({"role": "user", "content": prompt}));
        self.chat(messages)
    }

    fn keywords(&self, texts: &[&str]) -> Result<Vec<String>, ContextError> {
        let reply = self.chat(vec![
            json!({"role": "system", "content": KEYWORD_INSTRUCTION}),
            json!({"role": "user", "content": texts.join("\n")}),
        ])?;
        Ok(parse_keyword_reply(&reply))
    }
}

/// Accepts numbered lists, bullets or comma-separated replies.
fn parse_keyword_reply(reply: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for piece in reply.split(['\n', ',']) {
        let item = piece
            .trim()
            .trim_start_matches(|c: char| c.is_ascii_digit() || c == '.' || c == '-' || c == '*' || c == ')')
            .trim()
            .trim_matches('"')
            .to_lowercase();
        if !item.is_empty() && !out.contains(&item) {
            out.push(item);
        }
    }
    out
}
