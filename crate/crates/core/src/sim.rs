//! Mutable per-episode state and skill execution.

use crate::qty::{self, Qty};
use crate::world::{is_nearby, Requirement, Skill, TaskDef};
use indexmap::IndexMap;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Done {
    Running,
    Success,
    Failure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionOutcome {
    Applied,
    StochasticFailure,
    BudgetExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Progress {
    Incomplete,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deficit {
    pub requirement: Requirement,
    #[serde(with = "crate::qty")]
    pub have: Qty,
    #[serde(with = "crate::qty")]
    pub missing: Qty,
}

/// Unmet preconditions of an attempted skill. Never empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feedback {
    pub attempted_skill: String,
    pub deficits: Vec<Deficit>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("skill `{0}` executed without satisfied preconditions")]
    PreconditionViolated(String),
    #[error("episode is already over")]
    EpisodeOver,
}

/// Per-episode seed from a campaign seed and grid coordinates.
pub fn episode_seed(campaign_seed: u64, task_index: usize, episode_index: usize) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"episode");
    h.update(campaign_seed.to_le_bytes());
    h.update((task_index as u64).to_le_bytes());
    h.update((episode_index as u64).to_le_bytes());
    h.finalize().into()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeState {
    pub task: TaskDef,
    /// Kept in first-acquisition order.
    pub inventory: IndexMap<String, Qty>,
    pub surroundings: IndexMap<String, Qty>,
    pub steps_used: u64,
    pub done: Done,
    rng: ChaCha8Rng,
}

impl EpisodeState {
    pub fn new(task: TaskDef, seed: [u8; 32]) -> Self {
        let mut st = EpisodeState {
            inventory: IndexMap::new(),
            surroundings: IndexMap::new(),
            steps_used: 0,
            done: Done::Running,
            rng: ChaCha8Rng::from_seed(seed),
            task,
        };
        for r in st.task.initial_inventory.clone() {
            st.add(&r.item, r.quantity);
        }
        if st.goal_met() {
            st.done = Done::Success;
        }
        st
    }

    pub fn from_u64(task: TaskDef, seed: u64) -> Self {
        let mut s = [0u8; 32];
        s[..8].copy_from_slice(&seed.to_le_bytes());
        EpisodeState::new(task, s)
    }

    pub fn have(&self, item: &str) -> Qty {
        let c = if is_nearby(item) { &self.surroundings } else { &self.inventory };
        c.get(item).copied().unwrap_or_else(Qty::zero)
    }

    fn container(&mut self, item: &str) -> &mut IndexMap<String, Qty> {
        if is_nearby(item) {
            &mut self.surroundings
        } else {
            &mut self.inventory
        }
    }

    fn add(&mut self, item: &str, q: Qty) {
        *self.container(item).entry(item.to_string()).or_insert_with(Qty::zero) += q;
    }

    fn sub(&mut self, item: &str, q: Qty) {
        let c = self.container(item);
        if let Some(v) = c.get_mut(item) {
            *v -= q;
            if *v < Qty::zero() {
                *v = Qty::zero();
            }
        }
    }

    pub fn meets(&self, r: &Requirement) -> bool {
        self.have(&r.item) >= r.quantity
    }

    pub fn goal_met(&self) -> bool {
        self.meets(&self.task.goal)
    }

    pub fn is_running(&self) -> bool {
        self.done == Done::Running
    }
}

fn render(c: &IndexMap<String, Qty>) -> String {
    let parts: Vec<String> = c
        .iter()
        .filter(|(_, q)| !q.is_zero())
        .map(|(k, q)| format!("{} {}", qty::fmt1(q), k))
        .collect();
    if parts.is_empty() {
        "nothing".to_string()
    } else {
        parts.join("; ")
    }
}

/// (inventory_text, surroundings_text).
pub fn observe(state: &EpisodeState) -> (String, String) {
    (render(&state.inventory), render(&state.surroundings))
}

pub fn check(state: &EpisodeState, skill: &Skill) -> Result<(), Feedback> {
    let deficits: Vec<Deficit> = skill
        .preconditions
        .iter()
        .filter_map(|r| {
            let have = state.have(&r.item);
            (have < r.quantity).then(|| Deficit {
                requirement: r.clone(),
                have,
                missing: r.quantity - have,
            })
        })
        .collect();
    if deficits.is_empty() {
        Ok(())
    } else {
        Err(Feedback {
            attempted_skill: skill.description.clone(),
            deficits,
        })
    }
}

/// Runs a skill whose preconditions hold. Draws exactly one random number
/// unless the step budget is exhausted.
pub fn execute(state: &mut EpisodeState, skill: &Skill) -> Result<ExecutionOutcome, SimError> {
    if !state.is_running() {
        return Err(SimError::EpisodeOver);
    }
    if check(state, skill).is_err() {
        return Err(SimError::PreconditionViolated(skill.description.clone()));
    }
    if state.steps_used + skill.step_cost > state.task.max_steps {
        state.done = Done::Failure;
        return Ok(ExecutionOutcome::BudgetExhausted);
    }
    state.steps_used += skill.step_cost;
    let p = skill.success_prob_in(&state.task.biome);
    let draw: f64 = state.rng.gen();
    if draw >= p {
        return Ok(ExecutionOutcome::StochasticFailure);
    }
    for r in &skill.consumes {
        state.sub(&r.item, r.quantity);
    }
    for r in &skill.produces {
        state.add(&r.item, r.quantity);
    }
    if state.goal_met() {
        state.done = Done::Success;
    }
    Ok(ExecutionOutcome::Applied)
}

pub fn subtask_progress(state: &EpisodeState, subtask: &TaskDef) -> Progress {
    if state.meets(&subtask.goal) {
        Progress::Complete
    } else {
        Progress::Incomplete
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qty::qty;
    use crate::world::SkillKind;

    fn task(goal: &str, max_steps: u64, init: &[(&str, i64)]) -> TaskDef {
        TaskDef {
            name: format!("get_{goal}"),
            family: None,
            goal: Requirement::new(goal, qty(1)),
            requirements: vec![],
            biome: "forest".into(),
            max_steps,
            initial_inventory: init.iter().map(|(i, q)| Requirement::new(*i, qty(*q))).collect(),
        }
    }

    fn skill(desc: &str, pre: &[(&str, i64)], cons: &[(&str, i64)], prod: &[(&str, i64)], p: f64, cost: u64) -> Skill {
        let r = |v: &[(&str, i64)]| v.iter().map(|(i, q)| Requirement::new(*i, qty(*q))).collect();
        Skill {
            description: desc.into(),
            kind: SkillKind::Craft,
            preconditions: r(pre),
            consumes: r(cons),
            produces: r(prod),
            success_prob: p,
            step_cost: cost,
            biome_success_prob: None,
        }
    }

    #[test]
    fn observation_format() {
        let st = EpisodeState::from_u64(task("furnace", 10, &[("log", 2), ("dirt", 3), ("cobblestone", 4)]), 0);
        assert_eq!(observe(&st).0, "2.0 log; 3.0 dirt; 4.0 cobblestone");
        assert_eq!(observe(&st).1, "nothing");
        let st = EpisodeState::from_u64(task("furnace", 10, &[("crafting_table_nearby", 1)]), 0);
        assert_eq!(observe(&st), ("nothing".into(), "1.0 crafting_table_nearby".into()));
    }

    #[test]
    fn furnace_check_lists_deficits_in_order() {
        let st = EpisodeState::from_u64(task("furnace", 10, &[("cobblestone", 4), ("cobblestone_nearby", 1)]), 0);
        let furnace = skill(
            "craft furnace",
            &[("cobblestone", 8), ("crafting_table_nearby", 1)],
            &[("cobblestone", 8)],
            &[("furnace", 1)],
            1.0,
            1,
        );
        let fb = check(&st, &furnace).unwrap_err();
        let got: Vec<_> = fb
            .deficits
            .iter()
            .map(|d| (d.requirement.item.as_str(), d.have, d.missing))
            .collect();
        assert_eq!(got, vec![("cobblestone", qty(4), qty(4)), ("crafting_table_nearby", qty(0), qty(1))]);

        let ok = EpisodeState::from_u64(task("furnace", 10, &[("cobblestone", 11), ("crafting_table_nearby", 1)]), 0);
        assert!(check(&ok, &furnace).is_ok());
        assert!(check(&st, &skill("find log nearby", &[], &[], &[("log_nearby", 1)], 1.0, 1)).is_ok());
    }

    #[test]
    fn boundary_budget() {
        let mut st = EpisodeState::from_u64(task("table", 200, &[]), 0);
        st.steps_used = 199;
        let place = skill("place table", &[], &[], &[("x", 1)], 1.0, 200);
        assert_eq!(execute(&mut st, &place).unwrap(), ExecutionOutcome::BudgetExhausted);
        assert_eq!(st.done, Done::Failure);
        assert_eq!(st.steps_used, 199);
    }

    #[test]
    fn zero_probability_changes_nothing() {
        let mut st = EpisodeState::from_u64(task("log", 100, &[("dirt", 1)]), 3);
        let before = st.inventory.clone();
        let s = skill("harvest log", &[], &[], &[("log", 1)], 0.0, 5);
        assert_eq!(execute(&mut st, &s).unwrap(), ExecutionOutcome::StochasticFailure);
        assert_eq!(st.inventory, before);
        assert_eq!(st.steps_used, 5);
    }

    #[test]
    fn calling_without_check_is_an_error() {
        let mut st = EpisodeState::from_u64(task("stick", 100, &[]), 0);
        let s = skill("craft stick", &[("planks", 2)], &[("planks", 2)], &[("stick", 1)], 1.0, 1);
        assert!(matches!(execute(&mut st, &s), Err(SimError::PreconditionViolated(_))));
    }

    #[test]
    fn nearby_products_go_to_surroundings() {
        let mut st = EpisodeState::from_u64(task("crafting_table_nearby", 100, &[("crafting_table", 1)]), 0);
        let s = skill(
            "place crafting table nearby",
            &[("crafting_table", 1)],
            &[("crafting_table", 1)],
            &[("crafting_table_nearby", 1)],
            1.0,
            1,
        );
        assert_eq!(execute(&mut st, &s).unwrap(), ExecutionOutcome::Applied);
        assert_eq!(observe(&st), ("nothing".into(), "1.0 crafting_table_nearby".into()));
        assert_eq!(st.done, Done::Success);
    }
}
