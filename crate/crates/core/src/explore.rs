//! Episode engine: decision with feedback-revision, label stack, execution.

use crate::policy::{Policy, PolicyContext, PolicyError, PolicyQuery, TranscriptRecord};
use crate::prompt::{self, PromptBundle};
use crate::retrieval::{parse_output, retrieve, SimilarityProvider};
use crate::sim::{self, check, episode_seed, observe, subtask_progress, Done, EpisodeState, ExecutionOutcome, Progress};
use crate::trajectory::{
    episode_id, Attempt, AttemptCheck, EpisodeSettings, FailureReason, FinalState, LabelEvent, TerminalStatus,
    Trajectory, TrajectoryStep, WorldRef,
};
use crate::world::{subtasks_of, TaskDef, World};

pub const MALFORMED_REASON: &str = "output could not be parsed into a skill";
const HISTORY_LEN: usize = 3;

/// Receives every policy response before it is parsed.
pub trait ResponseSink: Send + Sync {
    fn record(&self, record: &TranscriptRecord) -> std::io::Result<()>;
}

/// Bottom frame is the episode task; the top frame is the label shown in prompts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelStack {
    frames: Vec<TaskDef>,
}

impl LabelStack {
    pub fn new(root: TaskDef) -> Self {
        LabelStack { frames: vec![root] }
    }

    pub fn top(&self) -> &TaskDef {
        self.frames.last().expect("root frame is never popped")
    }

    pub fn root(&self) -> &TaskDef {
        &self.frames[0]
    }

    pub fn frames(&self) -> &[TaskDef] {
        &self.frames
    }

    pub fn depth(&self) -> usize {
        self.frames.len()
    }

    /// Pushes the subtask the skill works towards, if any: the deepest
    /// incomplete subtask (searched recursively under the active label)
    /// whose goal is the skill's primary product. Ties go to requirement order.
    pub fn push_for_skill(&mut self, world: &World, skill: &crate::world::Skill, state: &EpisodeState) -> Option<LabelEvent> {
        let item = &skill.primary_product()?.item;
        if *item == self.top().goal.item {
            return None;
        }
        let mut best: Option<(usize, TaskDef)> = None;
        deepest_match(world, self.top(), item, state, 1, &mut best);
        let (_, label) = best?;
        self.frames.push(label.clone());
        Some(LabelEvent::Push { label })
    }

    /// Removes every completed frame above the root, top first.
    pub fn pop_completed(&mut self, state: &EpisodeState) -> Vec<LabelEvent> {
        let mut events = Vec::new();
        let mut i = self.frames.len();
        while i > 1 {
            i -= 1;
            if subtask_progress(state, &self.frames[i]) == Progress::Complete {
                let label = self.frames.remove(i);
                events.push(LabelEvent::Pop { label });
            }
        }
        events
    }
}

fn deepest_match(
    world: &World,
    label: &TaskDef,
    item: &str,
    state: &EpisodeState,
    depth: usize,
    best: &mut Option<(usize, TaskDef)>,
) {
    for sub in subtasks_of(world, label) {
        if subtask_progress(state, &sub) == Progress::Complete {
            continue;
        }
        if sub.goal.item == item && best.as_ref().is_none_or(|(d, _)| depth > *d) {
            *best = Some((depth, sub.clone()));
        }
        deepest_match(world, &sub, item, state, depth + 1, best);
    }
}

#[derive(Debug, Clone)]
pub struct Decision {
    /// Catalog index of the accepted skill, or `None` for a step failure.
    pub skill: Option<usize>,
    pub attempts: Vec<Attempt>,
}

pub struct Explorer<'a> {
    pub world: &'a World,
    pub policy: &'a dyn Policy,
    pub similarity: &'a dyn SimilarityProvider,
    pub settings: EpisodeSettings,
    pub sink: Option<&'a dyn ResponseSink>,
    /// Include prompt text in sink records.
    pub record_prompts: bool,
}

/// Everything needed to start one episode.
#[derive(Debug, Clone)]
pub struct EpisodeSpec {
    pub task: TaskDef,
    pub task_index: usize,
    pub episode_index: usize,
    pub campaign_seed: u64,
}

impl EpisodeSpec {
    pub fn id(&self) -> String {
        episode_id(self.task_index, &self.task.name, self.episode_index)
    }
}

impl<'a> Explorer<'a> {
    pub fn new(world: &'a World, policy: &'a dyn Policy, similarity: &'a dyn SimilarityProvider, settings: EpisodeSettings) -> Self {
        Explorer {
            world,
            policy,
            similarity,
            settings,
            sink: None,
            record_prompts: false,
        }
    }

    fn ask(
        &self,
        prompt: &PromptBundle,
        round: u32,
        episode: &str,
        step: u32,
        state: &EpisodeState,
    ) -> Result<String, PolicyError> {
        let q = PolicyQuery {
            prompt: prompt.clone(),
            revision_round: round,
            episode_id: episode.to_string(),
            step_index: step,
        };
        let ctx = PolicyContext {
            world: self.world,
            state,
        };
        let resp = self.policy.respond(&q, &ctx)?;
        if let Some(sink) = self.sink {
            let rec = TranscriptRecord {
                episode_id: episode.to_string(),
                step_index: step,
                revision_round: round,
                raw_text: resp.raw_text.clone(),
                provider_tag: resp.provider_tag.clone(),
                prompt: self.record_prompts.then(|| prompt.text.clone()),
            };
            sink.record(&rec)
                .map_err(|e| PolicyError::Unavailable(format!("cannot persist response: {e}")))?;
        }
        Ok(resp.raw_text)
    }

    /// Algorithm: query, retrieve, check; on failure re-query with the
    /// feedback appended, at most `max_revisions` times.
    pub fn decide_with_revision(
        &self,
        state: &EpisodeState,
        label: &TaskDef,
        history: &[String],
        episode: &str,
        step: u32,
    ) -> Result<Decision, (PolicyError, Vec<Attempt>)> {
        let (inv, surr) = observe(state);
        let req = prompt::render_requirements(&label.requirements);
        let base = if self.settings.cot {
            prompt::render_cot(&label.name, &req, &inv, &surr)
        } else {
            prompt::render_decision(&label.name, &inv, &surr, history, &req)
        };
        let mut attempts = Vec::new();
        let mut current = base.clone();
        for round in 0..=self.settings.max_revisions {
            let raw = match self.ask(&current, round, episode, step, state) {
                Ok(r) => r,
                Err(e) => return Err((e, attempts)),
            };
            let (draft, retrieved, outcome) = match parse_output(&raw) {
                Err(_) => (raw.trim().to_string(), None, AttemptCheck::Malformed {
                    reason: MALFORMED_REASON.to_string(),
                }),
                Ok(parsed) => {
                    let idx = match retrieve(&parsed, &self.world.skills, &self.world.synonyms, self.similarity) {
                        Ok(i) => i,
                        Err(e) => return Err((PolicyError::Unavailable(e.to_string()), attempts)),
                    };
                    let skill = &self.world.skills[idx];
                    let check = match check(state, skill) {
                        Ok(()) => AttemptCheck::Ok,
                        Err(feedback) => AttemptCheck::Unmet { feedback },
                    };
                    (parsed.text.clone(), Some(idx), check)
                }
            };
            let accepted = matches!(outcome, AttemptCheck::Ok);
            attempts.push(Attempt {
                round,
                raw_output: raw,
                retrieved: retrieved.map(|i| self.world.skills[i].description.clone()),
                check: outcome.clone(),
            });
            if accepted {
                return Ok(Decision { skill: retrieved, attempts });
            }
            let retrieved_name = retrieved
                .map(|i| self.world.skills[i].description.as_str())
                .unwrap_or("none");
            current = match &outcome {
                AttemptCheck::Unmet { feedback } => prompt::render_revision(&base, &draft, retrieved_name, &inv, &surr, feedback),
                _ => prompt::render_revision_with_reason(&base, &draft, retrieved_name, &inv, &surr, MALFORMED_REASON),
            };
        }
        Ok(Decision { skill: None, attempts })
    }

    pub fn run_episode(&self, spec: &EpisodeSpec) -> Trajectory {
        let id = spec.id();
        let mut state = EpisodeState::new(
            spec.task.clone(),
            episode_seed(spec.campaign_seed, spec.task_index, spec.episode_index),
        );
        let mut stack = LabelStack::new(spec.task.clone());
        let mut history: Vec<String> = Vec::new();
        let mut steps = Vec::new();
        let mut failure = None;
        let mut status = None;

        let mut step: u32 = 0;
        while state.done == Done::Running {
            if u64::from(step) >= spec.task.max_steps {
                // Every execution costs at least one step, so this cannot be
                // reached through executions alone.
                failure = Some(FailureReason::BudgetExhausted);
                break;
            }
            let (inv, surr) = observe(&state);
            let label = stack.top().clone();
            let mut record = TrajectoryStep {
                step_index: step,
                inventory: inv,
                surroundings: surr,
                active_label: label.name.clone(),
                history: history.clone(),
                attempts: Vec::new(),
                executed_skill: None,
                outcome: None,
                label_events: Vec::new(),
            };
            let decision = match self.decide_with_revision(&state, &label, &history, &id, step) {
                Ok(d) => d,
                Err((e, attempts)) => {
                    record.attempts = attempts;
                    steps.push(record);
                    status = Some(TerminalStatus::PolicyUnavailable);
                    failure = Some(FailureReason::PolicyUnavailable { message: e.to_string() });
                    break;
                }
            };
            record.attempts = decision.attempts;
            let Some(si) = decision.skill else {
                steps.push(record);
                failure = Some(FailureReason::StepFailure);
                break;
            };
            let skill = &self.world.skills[si];
            if self.settings.relabel {
                record.label_events.extend(stack.push_for_skill(self.world, skill, &state));
            }
            let outcome = sim::execute(&mut state, skill).expect("decision returned a skill that passed check");
            if self.settings.relabel && outcome == ExecutionOutcome::Applied {
                record.label_events.extend(stack.pop_completed(&state));
            }
            record.executed_skill = Some(skill.description.clone());
            record.outcome = Some(outcome);
            steps.push(record);
            if outcome == ExecutionOutcome::BudgetExhausted {
                failure = Some(FailureReason::BudgetExhausted);
                break;
            }
            history.push(skill.description.clone());
            if history.len() > HISTORY_LEN {
                history.remove(0);
            }
            step += 1;
        }

        let status = status.unwrap_or(if state.done == Done::Success {
            TerminalStatus::Success
        } else {
            TerminalStatus::Failure
        });
        if status == TerminalStatus::Success {
            failure = None;
        }
        Trajectory {
            id,
            task: spec.task.clone(),
            task_index: spec.task_index,
            episode_index: spec.episode_index,
            campaign_seed: spec.campaign_seed,
            config_hash: String::new(),
            world: WorldRef::default(),
            policy: self.policy.tag().to_string(),
            settings: self.settings.clone(),
            status,
            failure_reason: failure,
            final_state: FinalState::from_maps(&state.inventory, &state.surroundings, state.steps_used),
            steps,
        }
    }
}
