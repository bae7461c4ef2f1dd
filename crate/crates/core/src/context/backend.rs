use serde::{Deserialize, Serialize};

use super::mock::MockBackend;
use super::prompt::Turn;
use super::remote::RemoteBackend;
use super::ContextError;
use crate::scene::ImageRef;

/// Captioning, completion and keyword generation behind one interface.
pub trait InferenceBackend {
    fn caption(&self, image: &ImageRef, instruction: &str) -> Result<String, ContextError>;

    fn complete(&self, prompt: &str, history: &[Turn]) -> Result<String, ContextError>;

    /// Retrieval keywords and short phrases for a memory record.
    fn keywords(&self, texts: &[&str]) -> Result<Vec<String>, ContextError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Mock,
    Remote,
}

fn default_timeout_ms() -> u64 {
    30_000
}
fn default_retries() -> u32 {
    2
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendProfile {
    #[serde(default)]
    pub kind: BackendKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model_name: Option<String>,
    /// Simulated captioner latency on the virtual clock.
    #[serde(default)]
    pub caption_latency_ms: u64,
    /// Per-request timeout for remote calls; a scenario timeout cancels here.
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
}

impl Default for BackendProfile {
    fn default() -> Self {
        BackendProfile {
            kind: BackendKind::Mock,
            endpoint: None,
            model_name: None,
            caption_latency_ms: 0,
            timeout_ms: default_timeout_ms(),
            max_retries: default_retries(),
        }
    }
}

impl BackendProfile {
    pub fn validate(&self) -> Result<(), ContextError> {
        match (self.kind, &self.endpoint) {
            (BackendKind::Remote, None) => Err(ContextError::InvalidProfile(
                "remote backend requires an endpoint".into(),
            )),
            (BackendKind::Mock, Some(_)) => Err(ContextError::InvalidProfile("mock backend takes no endpoint".into())),
            _ => Ok(()),
        }
    }
}

pub fn connect(profile: &BackendProfile) -> Result<Box<dyn InferenceBackend>, ContextError> {
    profile.validate()?;
    Ok(match profile.kind {
        BackendKind::Mock => Box::new(MockBackend),
        BackendKind::Remote => Box::new(RemoteBackend::new(profile)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_iff_remote() {
        assert!(BackendProfile::default().validate().is_ok());
        let remote = BackendProfile {
            kind: BackendKind::Remote,
            ..Default::default()
        };
        assert!(remote.validate().is_err());
        let mock = BackendProfile {
            endpoint: Some("http://localhost:1".into()),
            ..Default::default()
        };
        assert!(mock.validate().is_err());
    }
}
