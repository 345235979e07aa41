mod common;

use explorekit::dataset::{self, build_dataset, eligible_segments, regenerate, DatasetError, LabelUsed};
use explorekit::trajectory::{FailureReason, TerminalStatus};
use explorekit::prompt::render_dataset_pair;

use LabelUsed::{Original as O, Relabeled as R};

/// Hand-enumerated yield of the fixture, in output order, before dedup.
const RAW: &[(&str, u32, &str, LabelUsed)] = &[
    ("t00-craft_stick-e000", 0, "craft_stick", O),
    ("t00-craft_stick-e000", 0, "find_log_nearby", R),
    ("t00-craft_stick-e000", 0, "find_log_nearby", R),
    ("t00-craft_stick-e000", 1, "craft_stick", O),
    ("t00-craft_stick-e000", 1, "harvest_log", R),
    ("t00-craft_stick-e000", 1, "harvest_log", R),
    ("t00-craft_stick-e000", 2, "craft_planks", R),
    ("t00-craft_stick-e000", 2, "craft_planks", R),
    ("t00-craft_stick-e000", 2, "craft_stick", O),
    ("t00-craft_stick-e000", 3, "craft_stick", O),
    ("t10-get_furnace_nearby-e000", 0, "craft_planks", R),
];

/// After dedup the duplicate relabeled rows (subtask span and pursued label
/// coincide) collapse.
const DEDUPED: &[usize] = &[0, 1, 3, 4, 6, 8, 9, 10];

fn keys(v: &[dataset::DatasetInstance]) -> Vec<(String, u32, String, LabelUsed)> {
    v.iter()
        .map(|i| (i.meta.trajectory_id.clone(), i.meta.step_index, i.meta.label.name.clone(), i.meta.label_used))
        .collect()
}

fn expected(rows: impl Iterator<Item = usize>) -> Vec<(String, u32, String, LabelUsed)> {
    rows.map(|k| {
        let (t, s, l, u) = RAW[k];
        (t.to_string(), s, l.to_string(), u)
    })
    .collect()
}

#[test]
fn fixture_episodes_end_as_scripted() {
    let ts = common::dataset_fixture();
    assert_eq!(ts[0].status, TerminalStatus::Success);
    assert_eq!(ts[0].steps.len(), 4);
    assert_eq!(ts[1].status, TerminalStatus::Failure);
    assert_eq!(ts[1].failure_reason, Some(FailureReason::StepFailure));
    assert_eq!(ts[1].steps[1].attempts.len(), 3);
    assert_eq!(ts[2].failure_reason, Some(FailureReason::StepFailure));
    assert!(ts[2].steps.iter().all(|s| s.executed_skill.is_none()));
}

#[test]
fn segments_follow_label_events() {
    let ts = common::dataset_fixture();
    let spans = |i: usize| -> Vec<(u32, u32, String, bool)> {
        eligible_segments(&ts[i])
            .into_iter()
            .map(|s| (s.start, s.end, s.label.name, s.root))
            .collect()
    };
    assert_eq!(
        spans(0),
        [
            (0, 3, "craft_stick".into(), true),
            (0, 0, "find_log_nearby".into(), false),
            (1, 1, "harvest_log".into(), false),
            (2, 2, "craft_planks".into(), false),
        ]
    );
    assert_eq!(spans(1), [(0, 0, "craft_planks".into(), false)]);
    assert!(spans(2).is_empty());
}

#[test]
fn fixture_yields_the_enumerated_instances() {
    let ts = common::dataset_fixture();
    assert_eq!(keys(&build_dataset(&ts, false)), expected(0..RAW.len()));
    let d = build_dataset(&ts, true);
    assert_eq!(keys(&d), expected(DEDUPED.iter().copied()));
    let s = dataset::summarize(&d);
    assert_eq!((s.instances, s.original, s.relabeled), (8, 4, 4));
}

#[test]
fn instance_text_matches_the_step() {
    let ts = common::dataset_fixture();
    let d = build_dataset(&ts, true);
    let i = &d[4];
    assert_eq!(i.meta.label.name, "craft_planks");
    let step = &ts[0].steps[2];
    let (input, output) = render_dataset_pair(
        "craft_planks",
        &step.inventory,
        &step.surroundings,
        &step.history,
        "1.0 log",
        "craft planks",
    );
    assert_eq!((&i.input, &i.output), (&input, &output));
    assert_eq!(output, "Next skill: craft planks");
    assert!(input.contains("Task: craft_planks\n"));
    assert!(input.contains("Last three skills you have just already executed: find log nearby; harvest log\n"));
}

#[test]
fn every_instance_regenerates_from_provenance() {
    let ts = common::dataset_fixture();
    for i in build_dataset(&ts, false) {
        assert_eq!(regenerate(&i, &ts).unwrap(), (i.input.clone(), i.output.clone()));
    }
    let i = &build_dataset(&ts, true)[0];
    assert!(matches!(regenerate(i, &ts[1..]), Err(DatasetError::MissingSource(_))));
}

#[test]
fn repeated_episodes_dedup_to_one_copy() {
    let w = common::world().deterministic();
    let script = || vec![vec!["find log nearby"], vec!["harvest log"], vec!["craft planks"], vec!["craft stick"]];
    let a = common::run_scripted(&w, "craft_stick", 0, script());
    let b = common::run_scripted(&w, "craft_stick", 1, script());
    let both = build_dataset(&[a.clone(), b], true);
    let one = build_dataset(&[a], true);
    assert_eq!(both, one);
    assert_eq!(one.len(), 7);
}

#[test]
fn build_is_idempotent_and_jsonl_round_trips() {
    let ts = common::dataset_fixture();
    let d = build_dataset(&ts, true);
    assert_eq!(d, build_dataset(&ts, true));
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.jsonl");
    dataset::write_jsonl(&p, &d).unwrap();
    let first = std::fs::read(&p).unwrap();
    assert_eq!(dataset::read_jsonl(&p).unwrap(), d);
    dataset::write_jsonl(&p, &dataset::read_jsonl(&p).unwrap()).unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), first);
    assert_eq!(first.iter().filter(|&&b| b == b'\n').count(), d.len());
}

#[test]
fn corrupt_lines_report_their_position() {
    let ts = common::dataset_fixture();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.jsonl");
    dataset::write_jsonl(&p, &build_dataset(&ts, true)[..2]).unwrap();
    let mut text = std::fs::read_to_string(&p).unwrap();
    text.push_str("{\"input\": 1}\n");
    std::fs::write(&p, text).unwrap();
    match dataset::read_jsonl(&p) {
        Err(DatasetError::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    assert!(matches!(dataset::read_jsonl(&dir.path().join("missing")), Err(DatasetError::Io { .. })));
}

#[test]
fn split_is_seeded_partition() {
    let d = build_dataset(&common::dataset_fixture(), false);
    let (a, b) = dataset::shuffle_split(&d, 0.25, 9);
    assert_eq!((a.len(), b.len()), (3, 8));
    assert_eq!(dataset::shuffle_split(&d, 0.25, 9), (a.clone(), b.clone()));
    let mut all: Vec<_> = a.into_iter().chain(b).collect();
    all.sort_by_key(|i| serde_json::to_string(i).unwrap());
    let mut orig = d.clone();
    orig.sort_by_key(|i| serde_json::to_string(i).unwrap());
    assert_eq!(all, orig);
}

#[test]
fn no_trajectories_no_instances() {
    assert!(build_dataset(&[], true).is_empty());
}
