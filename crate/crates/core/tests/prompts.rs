mod common;

use explorekit::prompt::*;
use explorekit::qty::{qty, Qty};
use explorekit::sim::{check, Deficit, EpisodeState, Feedback};
use explorekit::world::{Requirement, TaskDef};
use indexmap::IndexMap;
use proptest::prelude::*;

fn example_history() -> Vec<String> {
    ["harvest log", "craft planks", "find log nearby"].map(String::from).to_vec()
}

#[test]
fn decision_prompt_with_example_slots() {
    let p = render_decision(
        "craft_wooden_pickaxe",
        "4.0 planks",
        "1.0 log_nearby",
        &example_history(),
        "3 planks, 2 stick, 1 crafting_table_nearby",
    );
    assert_eq!(p.text, common::fixture("prompts/decision_example_slots.txt"));
}

#[test]
fn decision_prompt_with_rendered_requirements() {
    let w = common::world();
    let t = w.task("craft_wooden_pickaxe").unwrap();
    let p = render_decision(&t.name, "4.0 planks", "1.0 log_nearby", &example_history(), &render_requirements(&t.requirements));
    assert_eq!(p.text, common::fixture("prompts/decision_canonical.txt"));
    assert_eq!(p.rerender(), p.text);
}

#[test]
fn revision_prompt_from_real_feedback() {
    let w = common::world();
    let t = w.task("craft_wooden_pickaxe").unwrap();
    let prior = render_decision(&t.name, "4.0 planks", "1.0 log_nearby", &example_history(), &render_requirements(&t.requirements));
    let mut state = EpisodeState::from_u64(t.clone(), 0);
    state.inventory.insert("planks".into(), qty(1));
    state.surroundings.insert("log_nearby".into(), qty(1));
    let feedback = check(&state, w.skill("craft stick").unwrap()).unwrap_err();
    let p = render_revision(&prior, "get sticks", "craft stick", "1.0 planks", "1.0 log_nearby", &feedback);
    assert_eq!(p.text, common::fixture("prompts/revision.txt"));
    assert_eq!(p.rerender(), p.text);
}

#[test]
fn cot_prompt_with_example_slots() {
    let p = render_cot("craft_wooden_pickaxe", "3 planks, 2 stick, 1 crafting_table_nearby", "4.0 planks", "1.0 log_nearby");
    let golden = common::fixture("prompts/cot_example_slots.txt");
    assert_eq!(p.text, golden);
    assert!(golden.contains("already have 4; still require 4\n"));
}

#[test]
fn dataset_pair_with_example_slots() {
    let (input, output) = render_dataset_pair(
        "craft_wooden_pickaxe",
        "4.0 planks",
        "1.0 log_nearby",
        &example_history(),
        "3 planks, 2 stick, 1 crafting_table_nearby",
        "harvest log",
    );
    assert_eq!(input, common::fixture("prompts/dataset_input_example_slots.txt"));
    assert_eq!(output, common::fixture("prompts/dataset_output.txt"));
}

fn furnace_reqs() -> Vec<Requirement> {
    vec![Requirement::new("cobblestone", qty(8)), Requirement::new("crafting_table_nearby", qty(1))]
}

fn gap_text(inv: &str, surr: &str) -> String {
    let reqs = furnace_reqs();
    let g = compute_gaps(&reqs, &collection_map(inv).unwrap(), &collection_map(surr).unwrap());
    g.verbalize("craft furnace", &render_requirements(&reqs), inv, surr) + "\n"
}

#[test]
fn gap_examples_match_worked_examples() {
    assert_eq!(
        gap_text("2.0 log; 3.0 dirt; 4.0 cobblestone", "1.0 cobblestone_nearby"),
        common::fixture("prompts/gap_unmet_example.txt")
    );
    assert_eq!(
        gap_text("2.0 log; 3.0 dirt; 11.0 cobblestone", "1.0 crafting_table_nearby"),
        common::fixture("prompts/gap_met_example.txt")
    );
}

#[test]
fn empty_requirements_are_met() {
    let g = compute_gaps(&[], &IndexMap::new(), &IndexMap::new());
    assert_eq!(g.analysis("do nothing"), "Therefore, all requirements are met, so one can do nothing directly.");
}

#[test]
fn reason_for_missing_nearby_item() {
    let f = Feedback {
        attempted_skill: "craft furnace".into(),
        deficits: vec![Deficit {
            requirement: Requirement::new("crafting_table_nearby", qty(1)),
            have: qty(0),
            missing: qty(1),
        }],
    };
    assert_eq!(
        speculated_reason(&f),
        "craft furnace requires crafting_table nearby but it is not in your surroundings. You should get crafting_table nearby first."
    );
}

const ITEMS: [&str; 6] = ["log", "planks", "stick", "cobblestone", "crafting_table_nearby", "log_nearby"];

fn collection() -> impl Strategy<Value = IndexMap<String, Qty>> {
    proptest::collection::vec((0..ITEMS.len(), 0i64..12), 0..6).prop_map(|v| {
        let mut m = IndexMap::new();
        for (i, n) in v {
            m.insert(ITEMS[i].to_string(), qty(n));
        }
        m
    })
}

fn requirements() -> impl Strategy<Value = Vec<Requirement>> {
    proptest::sample::subsequence(ITEMS.to_vec(), 0..=ITEMS.len())
        .prop_flat_map(|items| {
            let n = items.len();
            (Just(items), proptest::collection::vec(1i64..10, n))
        })
        .prop_map(|(items, qs)| items.iter().zip(qs).map(|(i, q)| Requirement::new(*i, qty(q))).collect())
}

/// Brute force: count upwards until the quantity on hand covers the need.
fn brute_still_require(need: i64, have: i64) -> i64 {
    let mut extra = 0;
    while have + extra < need {
        extra += 1;
    }
    extra
}

fn split(all: &IndexMap<String, Qty>) -> (IndexMap<String, Qty>, IndexMap<String, Qty>) {
    let mut inv = IndexMap::new();
    let mut surr = IndexMap::new();
    for (k, v) in all {
        if k.ends_with("_nearby") {
            surr.insert(k.clone(), *v);
        } else {
            inv.insert(k.clone(), *v);
        }
    }
    (inv, surr)
}

proptest! {
    #[test]
    fn gaps_agree_with_brute_force(reqs in requirements(), all in collection()) {
        let (inv, surr) = split(&all);
        let g = compute_gaps(&reqs, &inv, &surr);
        prop_assert_eq!(g.lines.len(), reqs.len());
        let mut met = true;
        for (line, r) in g.lines.iter().zip(&reqs) {
            let have = *all.get(&r.item).unwrap_or(&qty(0));
            let s = brute_still_require(*r.quantity.numer(), *have.numer());
            prop_assert_eq!(line.still_require, qty(s));
            prop_assert_eq!(line.have, have);
            met &= s == 0;
        }
        prop_assert_eq!(g.all_met, met);
    }

    #[test]
    fn gaps_met_iff_check_passes(reqs in requirements(), all in collection()) {
        let (inv, surr) = split(&all);
        let w = common::world();
        let mut state = EpisodeState::from_u64(w.tasks[0].clone(), 0);
        state.inventory = inv.clone();
        state.surroundings = surr.clone();
        let mut skill = w.skills[0].clone();
        skill.preconditions = reqs.clone();
        skill.consumes.clear();
        prop_assert_eq!(compute_gaps(&reqs, &inv, &surr).all_met, check(&state, &skill).is_ok());
    }

    #[test]
    fn no_marker_survives_rendering(
        task in "[a-z_ ]{0,20}",
        inv in "[a-z0-9. ;{}]{0,30}",
        surr in "[a-z0-9. ;]{0,30}",
        hist in proptest::collection::vec("[a-z {}]{1,12}", 0..5),
        reason in "[a-z .{}]{1,40}",
    ) {
        let clean = |s: &str| !s.contains("{{");
        prop_assume!(clean(&task) && clean(&inv) && hist.iter().all(|h| clean(h)) && clean(&reason));
        let d = render_decision(&task, &inv, &surr, &hist, "1.0 log");
        prop_assert!(!d.text.contains("{{"));
        let r = render_revision_with_reason(&d, "x y", "craft stick", &inv, &surr, &reason);
        prop_assert!(!r.text.contains("{{"));
        prop_assert!(!render_cot(&task, "nothing", &inv, &surr).text.contains("{{"));
        let (i, o) = render_dataset_pair(&task, &inv, &surr, &hist, "nothing", "craft stick");
        prop_assert!(!i.contains("{{") && !o.contains("{{"));
    }
}

#[test]
fn task_label_changes_only_task_lines() {
    let t = TaskDef {
        name: "craft_planks".into(),
        family: None,
        goal: Requirement::new("planks", qty(1)),
        requirements: vec![Requirement::new("log", qty(1))],
        biome: "forest".into(),
        max_steps: 10,
        initial_inventory: vec![],
    };
    let p = render_decision(&t.name, "nothing", "nothing", &[], &render_requirements(&t.requirements));
    assert!(p.text.contains("Task: craft_planks\n"));
    assert!(p.text.contains("Last three skills you have just already executed: none\n"));
    assert!(p.text.ends_with("Recipe: The requirements to craft_planks in Minecraft is: 1.0 log\nYour output:"));
}
