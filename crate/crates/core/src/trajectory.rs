//! Episode records and their on-disk form (one JSON document per episode).

use crate::qty::Qty;
use crate::sim::{ExecutionOutcome, Feedback};
use crate::world::TaskDef;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalStatus {
    Success,
    Failure,
    PolicyUnavailable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailureReason {
    /// No valid skill after the allowed revisions.
    StepFailure,
    BudgetExhausted,
    PolicyUnavailable { message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum AttemptCheck {
    Ok,
    Unmet { feedback: Feedback },
    Malformed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    pub round: u32,
    pub raw_output: String,
    pub retrieved: Option<String>,
    pub check: AttemptCheck,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LabelEvent {
    Push { label: TaskDef },
    Pop { label: TaskDef },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub step_index: u32,
    pub inventory: String,
    pub surroundings: String,
    /// Label rendered into this step's decision prompt.
    pub active_label: String,
    pub history: Vec<String>,
    pub attempts: Vec<Attempt>,
    pub executed_skill: Option<String>,
    pub outcome: Option<ExecutionOutcome>,
    pub label_events: Vec<LabelEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeSettings {
    pub max_revisions: u32,
    pub cot: bool,
    pub relabel: bool,
    pub deterministic_world: bool,
}

impl Default for EpisodeSettings {
    fn default() -> Self {
        EpisodeSettings {
            max_revisions: 5,
            cot: false,
            relabel: true,
            deterministic_world: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldRef {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalState {
    pub inventory: Vec<(String, String)>,
    pub surroundings: Vec<(String, String)>,
    pub steps_used: u64,
}

impl FinalState {
    pub fn from_maps(
        inv: &indexmap::IndexMap<String, Qty>,
        surr: &indexmap::IndexMap<String, Qty>,
        steps_used: u64,
    ) -> Self {
        let f = |m: &indexmap::IndexMap<String, Qty>| m.iter().map(|(k, v)| (k.clone(), v.to_string())).collect();
        FinalState {
            inventory: f(inv),
            surroundings: f(surr),
            steps_used,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: String,
    pub task: TaskDef,
    pub task_index: usize,
    pub episode_index: usize,
    pub campaign_seed: u64,
    pub config_hash: String,
    pub world: WorldRef,
    pub policy: String,
    pub settings: EpisodeSettings,
    pub status: TerminalStatus,
    pub failure_reason: Option<FailureReason>,
    pub final_state: FinalState,
    pub steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    pub fn revisions(&self) -> usize {
        self.steps.iter().map(|s| s.attempts.len().saturating_sub(1)).sum()
    }

    pub fn queries(&self) -> usize {
        self.steps.iter().map(|s| s.attempts.len()).sum()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("trajectory serializes");
        s.push('\n');
        s
    }
}

pub fn episode_id(task_index: usize, task: &str, episode_index: usize) -> String {
    format!("t{task_index:02}-{task}-e{episode_index:03}")
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: corrupt trajectory: {message}")]
    Corrupt { path: PathBuf, message: String },
}

pub fn save(dir: &Path, t: &Trajectory) -> Result<PathBuf, StoreError> {
    std::fs::create_dir_all(dir).map_err(|source| StoreError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(format!("{}.json", t.id));
    let tmp = dir.join(format!(".{}.json.tmp", t.id));
    std::fs::write(&tmp, t.to_json()).map_err(|source| StoreError::Io {
        path: tmp.clone(),
        source,
    })?;
    std::fs::rename(&tmp, &path).map_err(|source| StoreError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

pub fn load(path: &Path) -> Result<Trajectory, StoreError> {
    let text = std::fs::read_to_string(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Loads every `*.json` file in `dir`, sorted by file name. A corrupt file
/// yields an error entry without affecting the others.
pub fn load_dir(dir: &Path) -> Result<Vec<Result<Trajectory, StoreError>>, StoreError> {
    let rd = std::fs::read_dir(dir).map_err(|source| StoreError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.is_file())
        .collect();
    paths.sort();
    Ok(paths.iter().map(|p| load(p)).collect())
}
