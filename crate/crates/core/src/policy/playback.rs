use super::{Policy, PolicyContext, PolicyError, PolicyQuery, PolicyResponse};
use crate::trajectory::Trajectory;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;
use std::time::Duration;

/// One policy response as written to the write-ahead log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub episode_id: String,
    pub step_index: u32,
    pub revision_round: u32,
    pub raw_text: String,
    pub provider_tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
}

/// Recorded responses keyed by (episode_id, step_index, revision_round).
#[derive(Debug, Clone, Default)]
pub struct Transcript {
    entries: HashMap<(String, u32, u32), String>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, episode_id: &str, step_index: u32, revision_round: u32, raw_text: impl Into<String>) {
        self.entries
            .insert((episode_id.to_string(), step_index, revision_round), raw_text.into());
    }

    pub fn get(&self, episode_id: &str, step_index: u32, revision_round: u32) -> Option<&str> {
        self.entries
            .get(&(episode_id.to_string(), step_index, revision_round))
            .map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn add_trajectory(&mut self, t: &Trajectory) {
        for step in &t.steps {
            for a in &step.attempts {
                self.insert(&t.id, step.step_index, a.round, a.raw_output.clone());
            }
        }
    }

    pub fn from_trajectories<'a>(ts: impl IntoIterator<Item = &'a Trajectory>) -> Self {
        let mut tr = Transcript::new();
        for t in ts {
            tr.add_trajectory(t);
        }
        tr
    }

    /// Reads a JSON-Lines log of [`TranscriptRecord`]s. Later lines win.
    pub fn load_jsonl(path: &Path) -> std::io::Result<Self> {
        let f = std::fs::File::open(path)?;
        let mut tr = Transcript::new();
        for (n, line) in std::io::BufReader::new(f).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let r: TranscriptRecord = serde_json::from_str(&line).map_err(|e| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{}:{}: {e}", path.display(), n + 1),
                )
            })?;
            tr.insert(&r.episode_id, r.step_index, r.revision_round, r.raw_text);
        }
        Ok(tr)
    }
}

pub struct PlaybackPolicy {
    transcript: Transcript,
    tag: String,
}

impl PlaybackPolicy {
    pub fn new(transcript: Transcript) -> Self {
        PlaybackPolicy {
            transcript,
            tag: "playback".into(),
        }
    }

    /// Reports `tag` as the provider, so replays reproduce the original record.
    pub fn with_tag(transcript: Transcript, tag: impl Into<String>) -> Self {
        PlaybackPolicy {
            transcript,
            tag: tag.into(),
        }
    }
}

impl Policy for PlaybackPolicy {
    fn respond(&self, q: &PolicyQuery, _ctx: &PolicyContext) -> Result<PolicyResponse, PolicyError> {
        match self.transcript.get(&q.episode_id, q.step_index, q.revision_round) {
            Some(t) => Ok(PolicyResponse {
                raw_text: t.to_string(),
                latency: Duration::ZERO,
                provider_tag: self.tag.clone(),
            }),
            None => Err(PolicyError::TranscriptExhausted {
                episode_id: q.episode_id.clone(),
                step_index: q.step_index,
                revision_round: q.revision_round,
            }),
        }
    }

    fn tag(&self) -> &str {
        &self.tag
    }
}
