//! Re-executes a recorded episode from its own responses and compares.

use crate::explore::{EpisodeSpec, Explorer};
use crate::policy::{PlaybackPolicy, Transcript};
use crate::retrieval::{LexicalSimilarity, SimilarityProvider};
use crate::trajectory::Trajectory;
use crate::world::World;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Divergence {
    /// First step whose record differs, with both versions as JSON.
    Step {
        step_index: u32,
        recorded: String,
        replayed: String,
    },
    StepCount { recorded: usize, replayed: usize },
    /// Steps agree but episode-level fields (status, final state, ...) differ.
    Episode { field: String },
}

impl std::fmt::Display for Divergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Divergence::Step {
                step_index,
                recorded,
                replayed,
            } => write!(f, "step {step_index} diverges\nrecorded: {recorded}\nreplayed: {replayed}"),
            Divergence::StepCount { recorded, replayed } => {
                write!(f, "recorded {recorded} steps but replay produced {replayed}")
            }
            Divergence::Episode { field } => write!(f, "episode field `{field}` diverges"),
        }
    }
}

/// Loads the world a trajectory was recorded against.
pub fn world_for(t: &Trajectory, override_path: Option<&std::path::Path>) -> Result<World, crate::world::WorldError> {
    let path = override_path.map(|p| p.to_path_buf()).unwrap_or_else(|| t.world.path.clone().into());
    let w = World::load(&path)?;
    Ok(if t.settings.deterministic_world { w.deterministic() } else { w })
}

pub fn replay_with(t: &Trajectory, world: &World, similarity: &dyn SimilarityProvider) -> Trajectory {
    let policy = PlaybackPolicy::with_tag(Transcript::from_trajectories([t]), t.policy.clone());
    let explorer = Explorer::new(world, &policy, similarity, t.settings.clone());
    let mut out = explorer.run_episode(&EpisodeSpec {
        task: t.task.clone(),
        task_index: t.task_index,
        episode_index: t.episode_index,
        campaign_seed: t.campaign_seed,
    });
    out.config_hash = t.config_hash.clone();
    out.world = t.world.clone();
    out
}

/// Replays with lexical retrieval and returns the first divergence, if any.
pub fn replay(t: &Trajectory, world: &World) -> (Trajectory, Option<Divergence>) {
    let sim = LexicalSimilarity::new(world.synonyms.clone());
    let again = replay_with(t, world, &sim);
    let d = compare(t, &again);
    (again, d)
}

pub fn compare(recorded: &Trajectory, replayed: &Trajectory) -> Option<Divergence> {
    for (a, b) in recorded.steps.iter().zip(&replayed.steps) {
        let (ja, jb) = (
            serde_json::to_string(a).expect("step serializes"),
            serde_json::to_string(b).expect("step serializes"),
        );
        if ja != jb {
            return Some(Divergence::Step {
                step_index: a.step_index,
                recorded: ja,
                replayed: jb,
            });
        }
    }
    if recorded.steps.len() != replayed.steps.len() {
        return Some(Divergence::StepCount {
            recorded: recorded.steps.len(),
            replayed: replayed.steps.len(),
        });
    }
    let ra = serde_json::to_value(recorded).expect("trajectory serializes");
    let rb = serde_json::to_value(replayed).expect("trajectory serializes");
    if let (Some(a), Some(b)) = (ra.as_object(), rb.as_object()) {
        for (k, v) in a {
            if b.get(k) != Some(v) {
                return Some(Divergence::Episode { field: k.clone() });
            }
        }
    }
    None
}
