//! Scene-caption register, prompt template and inference backends.

mod backend;
mod liou;
mod mock;
mod prompt;
mod remote;

use thiserror::Error;

pub use backend::{connect, BackendKind, BackendProfile, InferenceBackend};
pub use liou::{LiouEntry, LiouStack};
pub use mock::MockBackend;
pub use prompt::{assemble_prompt, PromptBundle, Speaker, Turn, PROMPT_LINES};
pub use remote::{RemoteBackend, TOKEN_ENV};

#[derive(Debug, Error)]
pub enum ContextError {
    #[error("utterance is empty")]
    EmptyUtterance,
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("cannot resolve image {locator}: {reason}")]
    UnresolvableImage { locator: String, reason: String },
    #[error("invalid backend profile: {0}")]
    InvalidProfile(String),
}
