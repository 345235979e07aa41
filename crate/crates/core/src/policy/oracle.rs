use super::{Policy, PolicyContext, PolicyError, PolicyQuery, PolicyResponse};
use crate::planner::plan_from_state;
use crate::sim::check;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::time::Duration;

/// Emitted when the goal is already met or cannot be reached.
pub const ORACLE_SENTINEL: &str = "Next skill: none";

/// Test oracle with access to the true state. Replans from the current
/// state each step and emits the first skill of a shortest plan for the
/// episode's root goal, so stochastic failures are simply retried.
#[derive(Debug, Default, Clone)]
pub struct OraclePolicy;

impl OraclePolicy {
    pub fn next_skill(ctx: &PolicyContext) -> Option<String> {
        let goal = &ctx.state.task.goal;
        if ctx.state.meets(goal) {
            return None;
        }
        let plan = plan_from_state(ctx.world, goal, ctx.state).ok()?;
        plan.first().map(|&i| ctx.world.skills[i].description.clone())
    }
}

impl Policy for OraclePolicy {
    fn respond(&self, _query: &PolicyQuery, ctx: &PolicyContext) -> Result<PolicyResponse, PolicyError> {
        let raw_text = match OraclePolicy::next_skill(ctx) {
            Some(s) => format!("Next skill: {s}"),
            None => ORACLE_SENTINEL.to_string(),
        };
        Ok(PolicyResponse {
            raw_text,
            latency: Duration::ZERO,
            provider_tag: self.tag().to_string(),
        })
    }

    fn tag(&self) -> &str {
        "oracle"
    }
}

/// Oracle that, on decision prompts, emits a random precondition-violating
/// skill with probability `corruption_rate`. Revision prompts always get the
/// oracle's answer. Draws are keyed by (seed, episode, step) so results do not
/// depend on scheduling.
#[derive(Debug, Clone)]
pub struct NoisyOraclePolicy {
    pub corruption_rate: f64,
    pub seed: u64,
}

impl NoisyOraclePolicy {
    pub fn new(corruption_rate: f64, seed: u64) -> Self {
        NoisyOraclePolicy { corruption_rate, seed }
    }

    fn rng(&self, episode_id: &str, step: u32) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(b"noisy-oracle");
        h.update(self.seed.to_le_bytes());
        h.update((episode_id.len() as u64).to_le_bytes());
        h.update(episode_id.as_bytes());
        h.update(step.to_le_bytes());
        ChaCha8Rng::from_seed(h.finalize().into())
    }
}

impl Policy for NoisyOraclePolicy {
    fn respond(&self, query: &PolicyQuery, ctx: &PolicyContext) -> Result<PolicyResponse, PolicyError> {
        if query.revision_round == 0 {
            let mut rng = self.rng(&query.episode_id, query.step_index);
            let draw: f64 = rng.gen();
            if draw < self.corruption_rate {
                let violating: Vec<&str> = ctx
                    .world
                    .skills
                    .iter()
                    .filter(|s| check(ctx.state, s).is_err())
                    .map(|s| s.description.as_str())
                    .collect();
                if !violating.is_empty() {
                    let pick = violating[rng.gen_range(0..violating.len())];
                    return Ok(PolicyResponse {
                        raw_text: format!("Next skill: {pick}"),
                        latency: Duration::ZERO,
                        provider_tag: self.tag().to_string(),
                    });
                }
            }
        }
        let mut r = OraclePolicy.respond(query, ctx)?;
        r.provider_tag = self.tag().to_string();
        Ok(r)
    }

    fn tag(&self) -> &str {
        "noisy-oracle"
    }
}
