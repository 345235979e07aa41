mod common;

use explorekit::qty::{qty, Qty};
use explorekit::sim::{check, episode_seed, execute, observe, Done, EpisodeState, ExecutionOutcome};
use explorekit::world::World;
use proptest::prelude::*;

/// A state reached by applying random legal skills from a task's start.
fn walk(w: &World, task: usize, seed: u64, picks: &[usize]) -> EpisodeState {
    let mut st = EpisodeState::new(w.tasks[task].clone(), episode_seed(seed, task, 0));
    for &p in picks {
        if !st.is_running() {
            break;
        }
        let legal: Vec<usize> = (0..w.skills.len()).filter(|&i| check(&st, &w.skills[i]).is_ok()).collect();
        let i = legal[p % legal.len()];
        execute(&mut st, &w.skills[i]).unwrap();
    }
    st
}

fn amount(st: &EpisodeState, item: &str) -> Qty {
    st.have(item)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn check_has_no_side_effects(task in 0usize..40, seed in any::<u64>(), picks in proptest::collection::vec(any::<usize>(), 0..12), skill in 0usize..55) {
        let w = common::world();
        let st = walk(&w, task, seed, &picks);
        let before = (st.inventory.clone(), st.surroundings.clone(), st.steps_used, st.done);
        let first = check(&st, &w.skills[skill]);
        let second = check(&st, &w.skills[skill]);
        prop_assert_eq!(first, second);
        prop_assert_eq!(before, (st.inventory.clone(), st.surroundings.clone(), st.steps_used, st.done));
    }

    #[test]
    fn same_seed_same_evolution(task in 0usize..40, seed in any::<u64>(), picks in proptest::collection::vec(any::<usize>(), 0..20)) {
        let w = common::world();
        let a = walk(&w, task, seed, &picks);
        let b = walk(&w, task, seed, &picks);
        prop_assert_eq!(observe(&a), observe(&b));
        prop_assert_eq!((a.steps_used, a.done), (b.steps_used, b.done));
    }

    #[test]
    fn execution_conserves_quantities(task in 0usize..40, seed in any::<u64>(), picks in proptest::collection::vec(any::<usize>(), 0..12), pick in any::<usize>()) {
        let w = common::world();
        let mut st = walk(&w, task, seed, &picks);
        prop_assume!(st.is_running());
        let legal: Vec<usize> = (0..w.skills.len()).filter(|&i| check(&st, &w.skills[i]).is_ok()).collect();
        let skill = &w.skills[legal[pick % legal.len()]];
        let before: Vec<Qty> = w.items.iter().map(|i| amount(&st, &i.name)).collect();
        let steps = st.steps_used;
        let outcome = execute(&mut st, skill).unwrap();
        for (item, old) in w.items.iter().zip(before) {
            let new = amount(&st, &item.name);
            let expected = if outcome == ExecutionOutcome::Applied {
                let produced: Qty = skill.produces.iter().filter(|r| r.item == item.name).map(|r| r.quantity).sum();
                old - skill.consumed(&item.name) + produced
            } else {
                old
            };
            prop_assert_eq!(new, expected, "{}", item.name);
            prop_assert!(new >= qty(0));
        }
        match outcome {
            ExecutionOutcome::BudgetExhausted => {
                prop_assert_eq!(st.steps_used, steps);
                prop_assert_eq!(st.done, Done::Failure);
            }
            _ => prop_assert_eq!(st.steps_used, steps + skill.step_cost),
        }
    }
}

#[test]
fn seeds_differ_across_episodes() {
    assert_ne!(episode_seed(1, 0, 0), episode_seed(1, 0, 1));
    assert_ne!(episode_seed(1, 0, 0), episode_seed(1, 1, 0));
    assert_ne!(episode_seed(1, 0, 0), episode_seed(2, 0, 0));
    assert_eq!(episode_seed(9, 3, 4), episode_seed(9, 3, 4));
}

#[test]
fn find_skills_only_work_in_their_biome() {
    let w = common::world();
    let find = w.skill("find log nearby").unwrap();
    assert_eq!(find.success_prob_in("forest"), 0.9);
    assert_eq!(find.success_prob_in("desert"), 0.0);
}
