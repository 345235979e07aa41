//! Supervised dataset construction from explored trajectories.

use crate::prompt::{render_dataset_pair, render_requirements};
use crate::trajectory::{LabelEvent, TerminalStatus, Trajectory};
use crate::world::{Requirement, TaskDef};
use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::Path;

/// Inclusive step span that contributes instances under `label`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub start: u32,
    pub end: u32,
    pub label: TaskDef,
    pub root: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelUsed {
    Original,
    Relabeled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRef {
    pub name: String,
    pub requirements: Vec<Requirement>,
}

impl From<&TaskDef> for LabelRef {
    fn from(t: &TaskDef) -> Self {
        LabelRef {
            name: t.name.clone(),
            requirements: t.requirements.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub trajectory_id: String,
    pub step_index: u32,
    pub label_used: LabelUsed,
    pub label: LabelRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetInstance {
    pub input: String,
    pub output: String,
    pub meta: InstanceMeta,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("provenance points to missing {0}")]
    MissingSource(String),
}

/// Spans that yield training data: the whole episode when it succeeded, and
/// each pushed frame that was later popped as complete.
pub fn eligible_segments(t: &Trajectory) -> Vec<Segment> {
    let mut out = Vec::new();
    if t.status == TerminalStatus::Success && !t.steps.is_empty() {
        out.push(Segment {
            start: t.steps[0].step_index,
            end: t.steps[t.steps.len() - 1].step_index,
            label: t.task.clone(),
            root: true,
        });
    }
    let mut open: Vec<(u32, TaskDef)> = Vec::new();
    for step in &t.steps {
        for ev in &step.label_events {
            match ev {
                LabelEvent::Push { label } => open.push((step.step_index, label.clone())),
                LabelEvent::Pop { label } => {
                    if let Some(pos) = open.iter().rposition(|(_, l)| l == label) {
                        let (start, label) = open.remove(pos);
                        out.push(Segment {
                            start,
                            end: step.step_index,
                            label,
                            root: false,
                        });
                    }
                }
            }
        }
    }
    out
}

/// Top of the label stack after each step's pushes, i.e. the frame the
/// executed skill was working towards.
fn pursued_labels(t: &Trajectory) -> Vec<TaskDef> {
    let mut stack = vec![t.task.clone()];
    let mut out = Vec::with_capacity(t.steps.len());
    for step in &t.steps {
        for ev in &step.label_events {
            if let LabelEvent::Push { label } = ev {
                stack.push(label.clone());
            }
        }
        out.push(stack.last().expect("root stays").clone());
        for ev in &step.label_events {
            if let LabelEvent::Pop { label } = ev {
                if let Some(pos) = stack.iter().skip(1).rposition(|l| l == label) {
                    stack.remove(pos + 1);
                }
            }
        }
    }
    out
}

fn render(t: &Trajectory, step_index: u32, label: &LabelRef) -> Option<(String, String)> {
    let step = t.steps.iter().find(|s| s.step_index == step_index)?;
    let skill = step.executed_skill.as_ref()?;
    Some(render_dataset_pair(
        &label.name,
        &step.inventory,
        &step.surroundings,
        &step.history,
        &render_requirements(&label.requirements),
        skill,
    ))
}

fn instance(t: &Trajectory, step_index: u32, label: &TaskDef, used: LabelUsed) -> Option<DatasetInstance> {
    let label = LabelRef::from(label);
    let (input, output) = render(t, step_index, &label)?;
    Some(DatasetInstance {
        input,
        output,
        meta: InstanceMeta {
            trajectory_id: t.id.clone(),
            step_index,
            label_used: used,
            label,
        },
    })
}

/// Builds instances ordered by (trajectory id, step, label name). With
/// `dedup`, later exact (input, output) repeats are dropped.
pub fn build_dataset(trajectories: &[Trajectory], dedup: bool) -> Vec<DatasetInstance> {
    let mut all = Vec::new();
    for t in trajectories {
        let pursued = pursued_labels(t);
        for seg in eligible_segments(t) {
            for (k, step) in t.steps.iter().enumerate() {
                if step.step_index < seg.start || step.step_index > seg.end || step.executed_skill.is_none() {
                    continue;
                }
                let used = if seg.root { LabelUsed::Original } else { LabelUsed::Relabeled };
                all.extend(instance(t, step.step_index, &seg.label, used));
                if seg.root && pursued[k] != t.task {
                    all.extend(instance(t, step.step_index, &pursued[k], LabelUsed::Relabeled));
                }
            }
        }
    }
    all.sort_by(|a, b| {
        (&a.meta.trajectory_id, a.meta.step_index, &a.meta.label.name, a.meta.label_used).cmp(&(
            &b.meta.trajectory_id,
            b.meta.step_index,
            &b.meta.label.name,
            b.meta.label_used,
        ))
    });
    if dedup {
        let mut seen = HashSet::new();
        all.retain(|i| seen.insert((i.input.clone(), i.output.clone())));
    }
    all
}

/// Re-renders an instance's input and output from its provenance.
pub fn regenerate(inst: &DatasetInstance, trajectories: &[Trajectory]) -> Result<(String, String), DatasetError> {
    let t = trajectories
        .iter()
        .find(|t| t.id == inst.meta.trajectory_id)
        .ok_or_else(|| DatasetError::MissingSource(format!("trajectory {}", inst.meta.trajectory_id)))?;
    render(t, inst.meta.step_index, &inst.meta.label).ok_or_else(|| {
        DatasetError::MissingSource(format!(
            "executed step {} in {}",
            inst.meta.step_index, inst.meta.trajectory_id
        ))
    })
}

pub fn write_jsonl(path: &Path, instances: &[DatasetInstance]) -> Result<(), DatasetError> {
    let io = |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut buf = Vec::new();
    for i in instances {
        serde_json::to_writer(&mut buf, i).expect("instance serializes");
        buf.push(b'\n');
    }
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(&buf).map_err(io)?;
    f.flush().map_err(io)
}

pub fn read_jsonl(path: &Path) -> Result<Vec<DatasetInstance>, DatasetError> {
    let f = std::fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    for (n, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| DatasetError::Parse {
            path: path.display().to_string(),
            line: n + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub instances: usize,
    pub original: usize,
    pub relabeled: usize,
    pub per_label: IndexMap<String, usize>,
}

pub fn summarize(instances: &[DatasetInstance]) -> DatasetSummary {
    let mut per_label: IndexMap<String, usize> = IndexMap::new();
    for i in instances {
        *per_label.entry(i.meta.label.name.clone()).or_default() += 1;
    }
    per_label.sort_keys();
    let relabeled = instances
        .iter()
        .filter(|i| i.meta.label_used == LabelUsed::Relabeled)
        .count();
    DatasetSummary {
        instances: instances.len(),
        original: instances.len() - relabeled,
        relabeled,
        per_label,
    }
}

/// Seeded shuffle, then the first `ceil(fraction * n)` go to the first split.
pub fn shuffle_split(
    instances: &[DatasetInstance],
    fraction: f64,
    seed: u64,
) -> (Vec<DatasetInstance>, Vec<DatasetInstance>) {
    let mut v = instances.to_vec();
    v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let k = ((fraction.clamp(0.0, 1.0) * v.len() as f64).ceil() as usize).min(v.len());
    let rest = v.split_off(k);
    (v, rest)
}
