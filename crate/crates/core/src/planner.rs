//! Shortest skill sequences over abstract item counts.
//!
//! A* over count vectors restricted to the goal's requirement closure. The
//! heuristic is a demand aggregation: walking items from the goal downwards,
//! each item needs at least max(largest single precondition, total consumed)
//! units, and a skill that is the sole producer of an item must run at least
//! ceil(shortfall / yield) times. Items with several producers contribute
//! nothing further, which keeps the bound admissible.

use crate::qty::Qty;
use crate::sim::EpisodeState;
use crate::world::{Requirement, TaskDef, World};
use num_integer::Integer;
use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("goal `{0}` is unreachable from the given state")]
    Unreachable(String),
    #[error("plan search exceeded {0} expanded states")]
    SearchLimit(usize),
}

pub const DEFAULT_STATE_LIMIT: usize = 2_000_000;

/// Minimum number of skill executions for the task, with every skill succeeding.
pub fn min_plan_length(world: &World, task: &TaskDef) -> Result<usize, PlanError> {
    let start: Vec<(String, Qty)> = task
        .initial_inventory
        .iter()
        .map(|r| (r.item.clone(), r.quantity))
        .collect();
    plan(world, &task.goal, &start).map(|p| p.len())
}

/// Plan from the current contents of an episode (inventory and surroundings).
pub fn plan_from_state(world: &World, goal: &Requirement, state: &EpisodeState) -> Result<Vec<usize>, PlanError> {
    let start: Vec<(String, Qty)> = state
        .inventory
        .iter()
        .chain(state.surroundings.iter())
        .map(|(k, v)| (k.clone(), *v))
        .collect();
    plan(world, goal, &start)
}

/// Returns skill indices of one shortest plan.
pub fn plan(world: &World, goal: &Requirement, start: &[(String, Qty)]) -> Result<Vec<usize>, PlanError> {
    plan_with_limit(world, goal, start, DEFAULT_STATE_LIMIT)
}

struct Problem {
    items: Vec<String>,
    /// Common denominator; counts are stored multiplied by it.
    scale: i64,
    /// (skill index, preconditions, consumes, produces) in scaled integer units.
    skills: Vec<SkillRow>,
    goal: usize,
    goal_qty: i64,
    cap: Vec<i64>,
    /// Items in an order where every consumer comes before what it needs.
    topo: Vec<usize>,
    /// Sole producer row per item, if exactly one.
    sole: Vec<Option<usize>>,
    /// Rows that list the item as a precondition.
    users: Vec<Vec<usize>>,
}

struct SkillRow {
    id: usize,
    pre: Vec<(usize, i64)>,
    cons: Vec<(usize, i64)>,
    prod: Vec<(usize, i64)>,
}

fn lcm_of_denoms<'a>(qs: impl Iterator<Item = &'a Qty>) -> i64 {
    qs.fold(1i64, |acc, q| acc.lcm(q.denom()))
}

fn scale(q: &Qty, k: i64) -> i64 {
    (q * Qty::from_integer(k)).to_integer()
}

impl Problem {
    fn build(world: &World, goal: &Requirement, start: &[(String, Qty)]) -> Problem {
        // Requirement closure: every producer of every needed item.
        let mut items: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut skill_ids: Vec<usize> = Vec::new();
        let mut seen_skill = HashSet::new();
        let mut stack = vec![goal.item.clone()];
        let add = |name: &str, items: &mut Vec<String>, index: &mut HashMap<String, usize>| -> bool {
            if index.contains_key(name) {
                return false;
            }
            index.insert(name.to_string(), items.len());
            items.push(name.to_string());
            true
        };
        add(&goal.item, &mut items, &mut index);
        while let Some(it) = stack.pop() {
            for &si in world.producers_of(&it) {
                if seen_skill.insert(si) {
                    skill_ids.push(si);
                }
                let s = &world.skills[si];
                for r in s.preconditions.iter().chain(&s.produces) {
                    if add(&r.item, &mut items, &mut index) && s.preconditions.contains(r) {
                        stack.push(r.item.clone());
                    }
                }
            }
        }
        // Items first reached as by-products still need their producers explored.
        loop {
            let mut grew = false;
            let snapshot = items.clone();
            for it in &snapshot {
                for &si in world.producers_of(it) {
                    if seen_skill.insert(si) {
                        skill_ids.push(si);
                        grew = true;
                        let s = &world.skills[si];
                        for r in s.preconditions.iter().chain(&s.produces) {
                            add(&r.item, &mut items, &mut index);
                        }
                    }
                }
            }
            if !grew {
                break;
            }
        }
        skill_ids.sort_unstable();

        let k = lcm_of_denoms(
            std::iter::once(&goal.quantity)
                .chain(start.iter().map(|(_, q)| q))
                .chain(skill_ids.iter().flat_map(|&si| {
                let s = &world.skills[si];
                s.preconditions
                    .iter()
                    .chain(&s.consumes)
                    .chain(&s.produces)
                    .map(|r| &r.quantity)
            })),
        );
        let row = |reqs: &[Requirement]| -> Vec<(usize, i64)> {
            reqs.iter().map(|r| (index[&r.item], scale(&r.quantity, k))).collect()
        };
        let skills: Vec<SkillRow> = skill_ids
            .iter()
            .map(|&si| {
                let s = &world.skills[si];
                SkillRow {
                    id: si,
                    pre: row(&s.preconditions),
                    cons: row(&s.consumes),
                    prod: row(&s.produces),
                }
            })
            .collect();

        let n = items.len();
        let goal_idx = index[&goal.item];
        let goal_qty = scale(&goal.quantity, k);
        let mut cap = vec![0i64; n];
        cap[goal_idx] = goal_qty;
        let mut users = vec![Vec::new(); n];
        let mut producers = vec![Vec::new(); n];
        for (ri, r) in skills.iter().enumerate() {
            for &(i, q) in &r.pre {
                cap[i] = cap[i].max(q);
                users[i].push(ri);
            }
            for &(i, _) in &r.prod {
                producers[i].push(ri);
            }
        }
        let sole = producers
            .iter()
            .map(|p| if p.len() == 1 { Some(p[0]) } else { None })
            .collect();

        // Reverse post-order over item -> precondition edges.
        let mut topo = Vec::with_capacity(n);
        let mut visited = vec![false; n];
        fn dfs(i: usize, producers: &[Vec<usize>], skills: &[SkillRow], visited: &mut [bool], out: &mut Vec<usize>) {
            if visited[i] {
                return;
            }
            visited[i] = true;
            for &ri in &producers[i] {
                for &(p, _) in &skills[ri].pre {
                    dfs(p, producers, skills, visited, out);
                }
            }
            out.push(i);
        }
        dfs(goal_idx, &producers, &skills, &mut visited, &mut topo);
        for i in 0..n {
            dfs(i, &producers, &skills, &mut visited, &mut topo);
        }
        topo.reverse();

        Problem {
            items,
            scale: k,
            skills,
            goal: goal_idx,
            goal_qty,
            cap,
            topo,
            sole,
            users,
        }
    }

    fn heuristic(&self, state: &[i64]) -> usize {
        let n = self.items.len();
        let mut runs = vec![0i64; self.skills.len()];
        let mut total = 0i64;
        let mut demand = vec![0i64; n];
        demand[self.goal] = self.goal_qty;
        for &i in &self.topo {
            let mut consumed = 0i64;
            let mut single = 0i64;
            for &ri in &self.users[i] {
                if runs[ri] == 0 {
                    continue;
                }
                let row = &self.skills[ri];
                consumed += runs[ri] * row.cons.iter().filter(|c| c.0 == i).map(|c| c.1).sum::<i64>();
                single = single.max(row.pre.iter().filter(|p| p.0 == i).map(|p| p.1).sum());
            }
            let need = demand[i].max(consumed).max(single);
            let short = need - state[i];
            if short <= 0 {
                continue;
            }
            if let Some(ri) = self.sole[i] {
                let y: i64 = self.skills[ri].prod.iter().filter(|p| p.0 == i).map(|p| p.1).sum();
                let r = (short + y - 1) / y;
                if r > runs[ri] {
                    total += r - runs[ri];
                    runs[ri] = r;
                }
            }
        }
        total as usize
    }

    fn applicable(&self, row: &SkillRow, state: &[i64]) -> bool {
        row.pre.iter().all(|&(i, q)| state[i] >= q)
            // Producing more of something already held in the largest useful amount never helps.
            && row.prod.iter().any(|&(i, _)| state[i] < self.cap[i])
    }

    fn apply(&self, row: &SkillRow, state: &[i64]) -> Vec<i64> {
        let mut next = state.to_vec();
        for &(i, q) in &row.cons {
            next[i] -= q;
        }
        for &(i, q) in &row.prod {
            next[i] += q;
        }
        next
    }

    fn reachable(&self, state: &[i64]) -> bool {
        let mut have: Vec<bool> = state.iter().map(|&q| q > 0).collect();
        loop {
            let mut grew = false;
            for row in &self.skills {
                if row.pre.iter().all(|&(i, _)| have[i]) {
                    for &(i, _) in &row.prod {
                        if !have[i] {
                            have[i] = true;
                            grew = true;
                        }
                    }
                }
            }
            if !grew {
                return have[self.goal];
            }
        }
    }
}

#[derive(PartialEq, Eq)]
struct Entry {
    f: usize,
    g: usize,
    seq: u64,
    node: usize,
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min f, then max g, then FIFO.
        Reverse(self.f)
            .cmp(&Reverse(other.f))
            .then(self.g.cmp(&other.g))
            .then(Reverse(self.seq).cmp(&Reverse(other.seq)))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn plan_with_limit(
    world: &World,
    goal: &Requirement,
    start: &[(String, Qty)],
    limit: usize,
) -> Result<Vec<usize>, PlanError> {
    let p = Problem::build(world, goal, start);
    run(&p, start, limit)
}

fn run(p: &Problem, start: &[(String, Qty)], limit: usize) -> Result<Vec<usize>, PlanError> {
    let mut s0 = vec![0i64; p.items.len()];
    let idx: HashMap<&str, usize> = p.items.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    for (name, q) in start {
        if let Some(&i) = idx.get(name.as_str()) {
            s0[i] += scale(q, p.scale);
        }
    }
    if s0[p.goal] >= p.goal_qty {
        return Ok(Vec::new());
    }
    if !p.reachable(&s0) {
        return Err(PlanError::Unreachable(p.items[p.goal].clone()));
    }

    // Node arena: (state, parent, skill row).
    let mut nodes: Vec<(Vec<i64>, usize, usize)> = vec![(s0.clone(), usize::MAX, usize::MAX)];
    let mut best: HashMap<Vec<i64>, (usize, usize)> = HashMap::new();
    best.insert(s0.clone(), (0, 0));
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Entry {
        f: p.heuristic(&s0),
        g: 0,
        seq,
        node: 0,
    });
    let mut expanded = 0usize;
    while let Some(Entry { g, node, .. }) = heap.pop() {
        let state = nodes[node].0.clone();
        if best.get(&state).map(|b| b.0) != Some(g) || best[&state].1 != node {
            continue;
        }
        if state[p.goal] >= p.goal_qty {
            let mut out = Vec::with_capacity(g);
            let mut cur = node;
            while nodes[cur].1 != usize::MAX {
                out.push(p.skills[nodes[cur].2].id);
                cur = nodes[cur].1;
            }
            out.reverse();
            return Ok(out);
        }
        expanded += 1;
        if expanded > limit {
            return Err(PlanError::SearchLimit(limit));
        }
        for (ri, row) in p.skills.iter().enumerate() {
            if !p.applicable(row, &state) {
                continue;
            }
            let next = p.apply(row, &state);
            let ng = g + 1;
            if let Some(&(bg, _)) = best.get(&next) {
                if bg <= ng {
                    continue;
                }
            }
            let h = p.heuristic(&next);
            let id = nodes.len();
            nodes.push((next.clone(), node, ri));
            best.insert(next, (ng, id));
            seq += 1;
            heap.push(Entry {
                f: ng + h,
                g: ng,
                seq,
                node: id,
            });
        }
    }
    Err(PlanError::Unreachable(p.items[p.goal].clone()))
}
