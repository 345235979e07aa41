//! Grids of episodes: configuration, parallel execution, persistence.

use crate::explore::{EpisodeSpec, Explorer, ResponseSink};
use crate::http::EndpointConfig;
use crate::policy::{
    LlmPolicy, NoisyOraclePolicy, OraclePolicy, PlaybackPolicy, Policy, Transcript, TranscriptRecord,
};
use crate::retrieval::{LexicalSimilarity, RemoteEmbedding, SimilarityProvider};
use crate::trajectory::{self, EpisodeSettings, TerminalStatus, Trajectory, WorldRef};
use crate::world::{TaskDef, World, WorldError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{mpsc, Mutex};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("cannot read config {path}: {message}")]
    Read { path: String, message: String },
    #[error("unknown task or family `{0}`")]
    UnknownTask(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, thiserror::Error)]
pub enum CampaignError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write output: {0}")]
    Io(String),
    #[error(transparent)]
    Store(#[from] trajectory::StoreError),
}

/// A task name, a family name, `eval` (all tasks except the iron family) or
/// `all`; optionally with a biome override.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TaskSelector {
    Name(String),
    WithBiome { task: String, biome: Option<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Llm,
    #[default]
    Oracle,
    NoisyOracle,
    Playback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    pub corruption_rate: f64,
    pub endpoint: EndpointConfig,
    /// Trajectory directory or transcript JSON-Lines file for playback.
    pub transcripts: Option<PathBuf>,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            kind: PolicyKind::Oracle,
            corruption_rate: 0.3,
            endpoint: EndpointConfig::default(),
            transcripts: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SimilarityKind {
    #[default]
    Lexical,
    RemoteEmbedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SimilarityConfig {
    pub kind: SimilarityKind,
    pub endpoint: Option<EndpointConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub world: PathBuf,
    pub tasks: Vec<TaskSelector>,
    pub episodes_per_task: usize,
    pub max_revisions: u32,
    pub cot: bool,
    pub relabel: bool,
    /// Force every success probability to 1.0.
    pub deterministic: bool,
    pub policy: PolicyConfig,
    pub similarity: SimilarityConfig,
    pub seed: u64,
    pub parallel: usize,
    pub out_dir: PathBuf,
    pub record_transcripts: bool,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            world: PathBuf::from("worlds/plan4mc_default.json"),
            tasks: vec![TaskSelector::Name("eval".into())],
            episodes_per_task: 5,
            max_revisions: 5,
            cot: false,
            relabel: true,
            deterministic: false,
            policy: PolicyConfig::default(),
            similarity: SimilarityConfig::default(),
            seed: 0,
            parallel: 1,
            out_dir: PathBuf::from("out"),
            record_transcripts: false,
        }
    }
}

impl CampaignConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn settings(&self) -> EpisodeSettings {
        EpisodeSettings {
            max_revisions: self.max_revisions,
            cot: self.cot,
            relabel: self.relabel,
            deterministic_world: self.deterministic,
        }
    }

    /// Hash over everything that affects results (not parallelism or paths of outputs).
    pub fn hash(&self, world_sha: &str) -> String {
        let mut c = self.clone();
        c.parallel = 0;
        c.out_dir = PathBuf::new();
        c.record_transcripts = false;
        c.world = PathBuf::from(world_sha);
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// Expands selectors into (task index, task with overrides applied).
pub fn resolve_tasks(world: &World, selectors: &[TaskSelector]) -> Result<Vec<(usize, TaskDef)>, ConfigError> {
    let mut out: Vec<(usize, TaskDef)> = Vec::new();
    for sel in selectors {
        let (name, biome) = match sel {
            TaskSelector::Name(n) => (n.as_str(), None),
            TaskSelector::WithBiome { task, biome } => (task.as_str(), biome.clone()),
        };
        let picked: Vec<usize> = match name {
            "all" => (0..world.tasks.len()).collect(),
            "eval" => (0..world.tasks.len())
                .filter(|&i| world.tasks[i].family.as_deref() != Some("iron"))
                .collect(),
            "stone" => family_indices(world, "cobblestone"),
            n => match world.task_index(n) {
                Some(i) => vec![i],
                None => {
                    let f = family_indices(world, n);
                    if f.is_empty() {
                        return Err(ConfigError::UnknownTask(n.to_string()));
                    }
                    f
                }
            },
        };
        for i in picked {
            let mut t = world.tasks[i].clone();
            if let Some(b) = &biome {
                t.biome = b.clone();
            }
            out.push((i, t));
        }
    }
    Ok(out)
}

fn family_indices(world: &World, family: &str) -> Vec<usize> {
    (0..world.tasks.len())
        .filter(|&i| world.tasks[i].family.as_deref() == Some(family))
        .collect()
}

pub fn build_policy(cfg: &PolicyConfig, seed: u64) -> Result<Box<dyn Policy>, ConfigError> {
    Ok(match cfg.kind {
        PolicyKind::Oracle => Box::new(OraclePolicy),
        PolicyKind::NoisyOracle => {
            if !(0.0..=1.0).contains(&cfg.corruption_rate) {
                return Err(ConfigError::Invalid("corruption rate must be within [0, 1]".into()));
            }
            Box::new(NoisyOraclePolicy::new(cfg.corruption_rate, seed))
        }
        PolicyKind::Llm => Box::new(LlmPolicy::new(cfg.endpoint.clone()).map_err(|e| ConfigError::Invalid(e.to_string()))?),
        PolicyKind::Playback => {
            let path = cfg
                .transcripts
                .as_ref()
                .ok_or_else(|| ConfigError::Invalid("playback needs a transcript path".into()))?;
            Box::new(PlaybackPolicy::new(load_transcript(path)?))
        }
    })
}

pub fn load_transcript(path: &Path) -> Result<Transcript, ConfigError> {
    let read_err = |m: String| ConfigError::Read {
        path: path.display().to_string(),
        message: m,
    };
    if path.is_dir() {
        let mut tr = Transcript::new();
        for t in trajectory::load_dir(path).map_err(|e| read_err(e.to_string()))? {
            tr.add_trajectory(&t.map_err(|e| read_err(e.to_string()))?);
        }
        Ok(tr)
    } else if path.extension().is_some_and(|e| e == "json") {
        let t = trajectory::load(path).map_err(|e| read_err(e.to_string()))?;
        Ok(Transcript::from_trajectories([&t]))
    } else {
        Transcript::load_jsonl(path).map_err(|e| read_err(e.to_string()))
    }
}

pub fn build_similarity(cfg: &SimilarityConfig, world: &World) -> Result<Box<dyn SimilarityProvider>, ConfigError> {
    Ok(match cfg.kind {
        SimilarityKind::Lexical => Box::new(LexicalSimilarity::new(world.synonyms.clone())),
        SimilarityKind::RemoteEmbedding => {
            let ep = cfg
                .endpoint
                .clone()
                .ok_or_else(|| ConfigError::Invalid("remote embedding needs an endpoint".into()))?;
            Box::new(RemoteEmbedding::new(ep).map_err(|e| ConfigError::Invalid(e.to_string()))?)
        }
    })
}

/// Appends transcript records to one JSON-Lines file per episode.
pub struct TranscriptLog {
    dir: PathBuf,
    files: Mutex<HashMap<String, std::fs::File>>,
}

impl TranscriptLog {
    pub fn new(dir: PathBuf) -> std::io::Result<Self> {
        std::fs::create_dir_all(&dir)?;
        Ok(TranscriptLog {
            dir,
            files: Mutex::new(HashMap::new()),
        })
    }
}

impl ResponseSink for TranscriptLog {
    fn record(&self, r: &TranscriptRecord) -> std::io::Result<()> {
        let mut files = self.files.lock().unwrap_or_else(|e| e.into_inner());
        if !files.contains_key(&r.episode_id) {
            let f = std::fs::File::create(self.dir.join(format!("{}.jsonl", r.episode_id)))?;
            files.insert(r.episode_id.clone(), f);
        }
        let f = files.get_mut(&r.episode_id).expect("inserted above");
        let line = serde_json::to_string(r).map_err(std::io::Error::other)?;
        writeln!(f, "{line}")?;
        f.flush()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task_index: usize,
    pub task: String,
    pub family: Option<String>,
    pub episodes: usize,
    pub successes: usize,
    pub failures: usize,
    pub policy_unavailable: usize,
    pub decision_steps: usize,
    pub revisions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub config_hash: String,
    pub tasks: Vec<TaskResult>,
    pub trajectories: Vec<String>,
}

impl CampaignResult {
    pub fn total_episodes(&self) -> usize {
        self.tasks.iter().map(|t| t.episodes).sum()
    }

    pub fn total_successes(&self) -> usize {
        self.tasks.iter().map(|t| t.successes).sum()
    }

    pub fn success_rate(&self) -> f64 {
        let n = self.total_episodes();
        if n == 0 {
            0.0
        } else {
            self.total_successes() as f64 / n as f64
        }
    }

    pub fn policy_unavailable(&self) -> usize {
        self.tasks.iter().map(|t| t.policy_unavailable).sum()
    }
}

/// Inputs shared by every episode of a campaign.
pub struct CampaignRun<'a> {
    pub world: &'a World,
    pub world_ref: WorldRef,
    pub tasks: Vec<(usize, TaskDef)>,
    pub episodes_per_task: usize,
    pub policy: &'a dyn Policy,
    pub similarity: &'a dyn SimilarityProvider,
    pub settings: EpisodeSettings,
    pub seed: u64,
    pub parallel: usize,
    pub config_hash: String,
    /// Where trajectories go; `None` keeps everything in memory.
    pub trajectory_dir: Option<PathBuf>,
    pub sink: Option<&'a dyn ResponseSink>,
    pub record_prompts: bool,
}

/// Runs the episode grid. Trajectories are written by a single writer thread
/// as soon as each episode finishes; the returned list is in grid order.
pub fn run_campaign(run: &CampaignRun) -> Result<(CampaignResult, Vec<Trajectory>), CampaignError> {
    let grid: Vec<EpisodeSpec> = run
        .tasks
        .iter()
        .flat_map(|(ti, t)| {
            (0..run.episodes_per_task).map(move |e| EpisodeSpec {
                task: t.clone(),
                task_index: *ti,
                episode_index: e,
                campaign_seed: run.seed,
            })
        })
        .collect();
    let explorer = Explorer {
        world: run.world,
        policy: run.policy,
        similarity: run.similarity,
        settings: run.settings.clone(),
        sink: run.sink,
        record_prompts: run.record_prompts,
    };
    let one = |spec: &EpisodeSpec| {
        let mut t = explorer.run_episode(spec);
        t.config_hash = run.config_hash.clone();
        t.world = run.world_ref.clone();
        t
    };

    let (tx, rx) = mpsc::channel::<Trajectory>();
    let dir = run.trajectory_dir.clone();
    let trajectories: Vec<Trajectory> = std::thread::scope(|scope| -> Result<Vec<Trajectory>, CampaignError> {
        let writer = scope.spawn(move || -> Result<(), trajectory::StoreError> {
            for t in rx {
                if let Some(d) = &dir {
                    trajectory::save(d, &t)?;
                }
            }
            Ok(())
        });
        let results: Vec<Trajectory> = if run.parallel > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(run.parallel)
                .build()
                .map_err(|e| CampaignError::Io(e.to_string()))?;
            pool.install(|| {
                grid.par_iter()
                    .map_with(tx.clone(), |tx, s| {
                        let t = one(s);
                        let _ = tx.send(t.clone());
                        t
                    })
                    .collect()
            })
        } else {
            grid.iter()
                .map(|s| {
                    let t = one(s);
                    let _ = tx.send(t.clone());
                    t
                })
                .collect()
        };
        drop(tx);
        writer.join().expect("writer thread panicked")?;
        Ok(results)
    })?;

    let mut per_task: Vec<TaskResult> = run
        .tasks
        .iter()
        .map(|(ti, t)| TaskResult {
            task_index: *ti,
            task: t.name.clone(),
            family: t.family.clone(),
            episodes: 0,
            successes: 0,
            failures: 0,
            policy_unavailable: 0,
            decision_steps: 0,
            revisions: 0,
        })
        .collect();
    for (k, t) in trajectories.iter().enumerate() {
        let r = &mut per_task[k / run.episodes_per_task.max(1)];
        r.episodes += 1;
        match t.status {
            TerminalStatus::Success => r.successes += 1,
            TerminalStatus::Failure => r.failures += 1,
            TerminalStatus::PolicyUnavailable => r.policy_unavailable += 1,
        }
        r.decision_steps += t.steps.len();
        r.revisions += t.revisions();
    }
    let result = CampaignResult {
        config_hash: run.config_hash.clone(),
        tasks: per_task,
        trajectories: trajectories.iter().map(|t| t.id.clone()).collect(),
    };
    Ok((result, trajectories))
}

pub fn world_ref(path: &Path) -> Result<WorldRef, ConfigError> {
    let bytes = std::fs::read(path).map_err(|e| {
        ConfigError::World(WorldError::Io {
            path: path.display().to_string(),
            source: e,
        })
    })?;
    Ok(WorldRef {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

/// Loads the world named by a config, applying the deterministic switch.
pub fn load_world(cfg: &CampaignConfig) -> Result<(World, WorldRef), ConfigError> {
    let wref = world_ref(&cfg.world)?;
    let world = World::load(&cfg.world)?;
    let world = if cfg.deterministic { world.deterministic() } else { world };
    Ok((world, wref))
}

/// Runs a campaign from a config file and writes everything under `out_dir`.
pub fn run_configured(cfg: &CampaignConfig, persist: bool) -> Result<(CampaignResult, Vec<Trajectory>), CampaignError> {
    let (world, wref) = load_world(cfg)?;
    let tasks = resolve_tasks(&world, &cfg.tasks)?;
    let policy = build_policy(&cfg.policy, cfg.seed)?;
    let similarity = build_similarity(&cfg.similarity, &world)?;
    let log = if persist {
        Some(TranscriptLog::new(cfg.out_dir.join("transcripts")).map_err(|e| CampaignError::Io(e.to_string()))?)
    } else {
        None
    };
    let run = CampaignRun {
        world: &world,
        world_ref: wref.clone(),
        tasks,
        episodes_per_task: cfg.episodes_per_task,
        policy: policy.as_ref(),
        similarity: similarity.as_ref(),
        settings: cfg.settings(),
        seed: cfg.seed,
        parallel: cfg.parallel,
        config_hash: cfg.hash(&wref.sha256),
        trajectory_dir: persist.then(|| cfg.out_dir.join("trajectories")),
        sink: log.as_ref().map(|l| l as &dyn ResponseSink),
        record_prompts: cfg.record_transcripts,
    };
    let (result, trajectories) = run_campaign(&run)?;
    if persist {
        let text = serde_json::to_string_pretty(&result).expect("result serializes") + "\n";
        std::fs::write(cfg.out_dir.join("campaign.json"), text).map_err(|e| CampaignError::Io(e.to_string()))?;
    }
    Ok((result, trajectories))
}
