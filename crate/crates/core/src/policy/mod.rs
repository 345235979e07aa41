//! Policies: anything that answers a prompt with text.

mod llm;
mod oracle;
mod playback;

pub use llm::LlmPolicy;
pub use oracle::{NoisyOraclePolicy, OraclePolicy, ORACLE_SENTINEL};
pub use playback::{PlaybackPolicy, Transcript, TranscriptRecord};

use crate::prompt::PromptBundle;
use crate::sim::EpisodeState;
use crate::world::World;
use std::time::Duration;

#[derive(Debug, Clone)]
pub struct PolicyQuery {
    pub prompt: PromptBundle,
    /// 0 for the decision prompt, then 1..=T for revisions.
    pub revision_round: u32,
    pub episode_id: String,
    pub step_index: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyResponse {
    pub raw_text: String,
    pub latency: Duration,
    pub provider_tag: String,
}

/// Privileged view handed to every policy; only test oracles look at it.
pub struct PolicyContext<'a> {
    pub world: &'a World,
    pub state: &'a EpisodeState,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("policy unavailable: {0}")]
    Unavailable(String),
    #[error("no recorded response for episode {episode_id}, step {step_index}, round {revision_round}")]
    TranscriptExhausted {
        episode_id: String,
        step_index: u32,
        revision_round: u32,
    },
}

pub trait Policy: Send + Sync {
    fn respond(&self, query: &PolicyQuery, ctx: &PolicyContext) -> Result<PolicyResponse, PolicyError>;
    fn tag(&self) -> &str;
}
