#![allow(dead_code)]

use explorekit::World;
use std::path::PathBuf;

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn world_path() -> PathBuf {
    repo_root().join("worlds/plan4mc_default.json")
}

pub fn world() -> World {
    World::load(world_path()).expect("default world loads")
}

pub fn fixture(rel: &str) -> String {
    let p = repo_root().join("fixtures").join(rel);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

/// The 30 evaluation tasks (everything outside the iron family).
pub fn eval_tasks(w: &World) -> Vec<usize> {
    (0..w.tasks.len())
        .filter(|&i| w.tasks[i].family.as_deref() != Some("iron"))
        .collect()
}

use explorekit::explore::{EpisodeSpec, Explorer};
use explorekit::policy::{Policy, PolicyContext, PolicyError, PolicyQuery, PolicyResponse};
use explorekit::retrieval::LexicalSimilarity;
use explorekit::trajectory::{EpisodeSettings, Trajectory};
use std::time::Duration;

/// Replies with `script[step][round]`, repeating the last entry of each list.
pub struct StepScript(pub Vec<Vec<&'static str>>);

impl Policy for StepScript {
    fn respond(&self, q: &PolicyQuery, _: &PolicyContext) -> Result<PolicyResponse, PolicyError> {
        let rounds = self.0.get(q.step_index as usize).or(self.0.last()).unwrap();
        let r = rounds.get(q.revision_round as usize).or(rounds.last()).unwrap();
        Ok(PolicyResponse {
            raw_text: format!("Next skill: {r}"),
            latency: Duration::ZERO,
            provider_tag: "scripted".into(),
        })
    }

    fn tag(&self) -> &str {
        "scripted"
    }
}

pub fn run_scripted(w: &World, task: &str, episode_index: usize, script: Vec<Vec<&'static str>>) -> Trajectory {
    let i = w.task_index(task).unwrap();
    let sim = LexicalSimilarity::new(w.synonyms.clone());
    let settings = EpisodeSettings {
        max_revisions: 2,
        deterministic_world: true,
        ..EpisodeSettings::default()
    };
    let policy = StepScript(script);
    Explorer::new(w, &policy, &sim, settings).run_episode(&EpisodeSpec {
        task: w.tasks[i].clone(),
        task_index: i,
        episode_index,
        campaign_seed: 7,
    })
}

/// Three deterministic-world episodes with a known dataset yield:
/// a successful craft_stick run, a get_furnace_nearby run that completes one
/// subtask and then fails, and a craft_stick run that fails on its first step.
pub fn dataset_fixture() -> Vec<Trajectory> {
    let w = world().deterministic();
    vec![
        run_scripted(
            &w,
            "craft_stick",
            0,
            vec![vec!["find log nearby"], vec!["harvest log"], vec!["craft planks"], vec!["craft stick"]],
        ),
        run_scripted(&w, "get_furnace_nearby", 0, vec![vec!["craft planks"], vec!["craft furnace"]]),
        run_scripted(&w, "craft_stick", 1, vec![vec!["craft stick"]]),
    ]
}
